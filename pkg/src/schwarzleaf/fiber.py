"""Discretizations of the Riemannian fiber ``(F, g_F)``.

Two backends:

* :class:`TriMesh` -- a closed triangulated surface (icosphere or flat torus)
  with cotangent stiffness and lumped (mixed Voronoi) mass.  Used for
  integrals and eigenvalues.
* :class:`ChartGrid` -- a uniform grid in chart coordinates (a polar-capped
  band of the sphere, or the torus) with 4th-order finite differences.  Used
  for pointwise work.

All operators accept a conformal factor ``phi`` and act on the metric
``g = phi^2 g_F``.  The Laplacian is ``div o grad`` (non-positive spectrum).
"""

from functools import cached_property
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from . import charts
from .errors import (ConfigError, DegenerateTriangle, SolverFailure, UnsupportedBackend,
                     UnsupportedSurface)

__all__ = [
    "TriMesh",
    "ChartGrid",
    "build_fiber",
    "grad_norm2",
    "laplacian",
    "integrate",
    "scalar_curvature",
    "first_eigenvalue",
    "fd_weights",
    "export_off",
]

AREA_FLOOR = 1e-14


def fd_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative on unit spacing."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    return np.linalg.solve(A, rhs)


def _as_field(fd, s, name="field"):
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        s = np.full(fd.n, float(s))
    if s.shape != (fd.n,):
        raise ValueError(f"{name} has shape {s.shape}, expected ({fd.n},)")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} has non-finite values")
    return s


def _as_phi(fd, phi):
    phi = _as_field(fd, 1.0 if phi is None else phi, "conformal factor")
    if np.any(phi <= 0):
        raise ValueError("conformal factor must be positive")
    return phi


# --- triangle meshes ---------------------------------------------------------

def _icosahedron():
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere(level):
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new)
    verts = np.array(verts)
    return verts / np.linalg.norm(verts, axis=1, keepdims=True), np.asarray(faces)


def torus_grid(n):
    """``n x n`` periodic triangulation of ``[0, 2 pi)^2`` with unwrapped corners."""
    h = 2.0 * np.pi / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    pts = np.stack([i.ravel() * h, j.ravel() * h], axis=1)

    def vid(a, b):
        return (a % n) * n + (b % n)

    tris, corners = [], []
    for a in range(n):
        for b in range(n):
            p00 = (a * h, b * h)
            p10 = ((a + 1) * h, b * h)
            p11 = ((a + 1) * h, (b + 1) * h)
            p01 = (a * h, (b + 1) * h)
            tris.append([vid(a, b), vid(a + 1, b), vid(a + 1, b + 1)])
            corners.append([p00, p10, p11])
            tris.append([vid(a, b), vid(a + 1, b + 1), vid(a, b + 1)])
            corners.append([p00, p11, p01])
    corners = np.array(corners)
    corners = np.concatenate([corners, np.zeros(corners.shape[:2] + (1,))], axis=2)
    return pts, np.array(tris), corners


def _angles_from_lengths(l0, l1, l2):
    """Interior angles opposite edges of lengths ``l0, l1, l2``."""
    c0 = (l1 ** 2 + l2 ** 2 - l0 ** 2) / (2 * l1 * l2)
    c1 = (l0 ** 2 + l2 ** 2 - l1 ** 2) / (2 * l0 * l2)
    c2 = (l0 ** 2 + l1 ** 2 - l2 ** 2) / (2 * l0 * l1)
    return np.arccos(np.clip(np.stack([c0, c1, c2], axis=1), -1.0, 1.0))


class TriMesh:
    """Closed triangulated fiber (``kind`` is ``"sphere"`` or ``"torus"``)."""

    backend = "trimesh"
    dim = 2
    closed = True

    def __init__(self, kind, points, tris, corners, resolution):
        self.kind = kind
        self.points = points
        self.tris = tris
        self.corners = corners
        self.resolution = resolution
        self.n = len(points)
        if np.any(self.tri_areas < AREA_FLOOR):
            bad = int(np.argmin(self.tri_areas))
            raise DegenerateTriangle(f"triangle {bad} has area {self.tri_areas[bad]:.3g}")

    @classmethod
    def sphere(cls, level):
        verts, faces = icosphere(level)
        return cls("sphere", verts, faces, verts[faces], {"level": level})

    @classmethod
    def torus(cls, n):
        pts, tris, corners = torus_grid(n)
        return cls("torus", pts, tris, corners, {"n": n})

    @property
    def h(self):
        """Mean edge length."""
        return float(self.edge_lengths.mean())

    @cached_property
    def edge_lengths(self):
        c = self.corners
        return np.stack([np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
                         np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
                         np.linalg.norm(c[:, 1] - c[:, 0], axis=1)], axis=1)

    @cached_property
    def tri_areas(self):
        c = self.corners
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def _angles(self, phi=None):
        L = self.edge_lengths
        if phi is not None:
            ph = phi[self.tris]
            # edge k joins the two corners other than k
            L = L * 0.5 * np.stack([ph[:, 1] + ph[:, 2], ph[:, 2] + ph[:, 0], ph[:, 0] + ph[:, 1]], axis=1)
        return _angles_from_lengths(L[:, 0], L[:, 1], L[:, 2]), L

    @cached_property
    def stiffness(self):
        """Cotangent stiffness ``K`` (symmetric PSD, rows sum to zero)."""
        ang, _ = self._angles()
        cot = 1.0 / np.tan(ang)
        t = self.tris
        rows, cols, vals = [], [], []
        for k in range(3):
            i, j = t[:, (k + 1) % 3], t[:, (k + 2) % 3]
            w = 0.5 * cot[:, k]
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-w, -w, w, w]
        K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.n, self.n))
        K.sum_duplicates()
        return K

    @cached_property
    def weights(self):
        """Lumped mass: mixed Voronoi areas (Meyer et al.)."""
        ang, L = self._angles()
        A = self.tri_areas
        cot = 1.0 / np.tan(ang)
        w = np.zeros((len(A), 3))
        obtuse = ang > np.pi / 2
        any_obtuse = obtuse.any(axis=1)
        for k in range(3):
            j, l = (k + 1) % 3, (k + 2) % 3
            # edges adjacent to corner k are opposite corners j and l
            vor = (L[:, l] ** 2 * cot[:, l] + L[:, j] ** 2 * cot[:, j]) / 8.0
            w[:, k] = np.where(any_obtuse, np.where(obtuse[:, k], A / 2, A / 4), vor)
        out = np.zeros(self.n)
        np.add.at(out, self.tris.ravel(), w.ravel())
        return out

    @cached_property
    def _grad_ops(self):
        c = self.corners
        normal = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        nhat = normal / np.linalg.norm(normal, axis=1, keepdims=True)
        # gradient of barycentric coordinate k: rotate the opposite edge
        grads = np.stack([np.cross(nhat, c[:, (k + 2) % 3] - c[:, (k + 1) % 3]) for k in range(3)], axis=1)
        grads /= (2.0 * self.tri_areas)[:, None, None]
        return grads

    def vertex_gradients(self, s):
        """Area-weighted average of per-triangle gradients, projected tangent.

        Returns ``(n, 3)`` vectors in the flat embedding; for the torus the
        third component vanishes.
        """
        s = _as_field(self, s)
        tg = np.einsum("tk,tkd->td", s[self.tris], self._grad_ops)
        acc = np.zeros((self.n, 3))
        wsum = np.zeros(self.n)
        for k in range(3):
            np.add.at(acc, self.tris[:, k], tg * self.tri_areas[:, None])
            np.add.at(wsum, self.tris[:, k], self.tri_areas)
        g = acc / wsum[:, None]
        if self.kind == "sphere":
            g -= np.sum(g * self.points, axis=1, keepdims=True) * self.points
        return g

    def tangent_frame(self):
        """Orthonormal tangent basis ``(n, 2, 3)`` at each vertex."""
        if self.kind == "torus":
            e = np.zeros((self.n, 2, 3))
            e[:, 0, 0] = 1.0
            e[:, 1, 1] = 1.0
            return e
        p = self.points
        helper = np.where(np.abs(p[:, 2:3]) < 0.9, np.array([[0.0, 0.0, 1.0]]), np.array([[1.0, 0.0, 0.0]]))
        e1 = np.cross(helper, p)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(p, e1)
        return np.stack([e1, e2], axis=1)

    def angle_defect(self, phi=None):
        ang, _ = self._angles(phi)
        total = np.zeros(self.n)
        np.add.at(total, self.tris.ravel(), ang.ravel())
        return 2.0 * np.pi - total


# --- chart grids -------------------------------------------------------------

class ChartGrid:
    """Uniform grid in chart coordinates with 4th-order differences.

    Axis 0 is ``theta`` (sphere band, non-periodic) or ``a`` (torus,
    periodic); axis 1 is ``phi`` or ``b`` (periodic).  Fields are flat arrays
    in C order of shape ``(n0 * n1,)``.
    """

    backend = "chartgrid"
    dim = 2
    closed = False

    def __init__(self, kind, shape, band=None):
        n0, n1 = (int(s) for s in shape)
        if n0 < 7 or n1 < 7:
            raise ConfigError("chart grid needs at least 7 points per axis")
        self.kind = kind
        self.shape = (n0, n1)
        self.n = n0 * n1
        if kind == "sphere":
            lo, hi = band
            if not 0 < lo < hi < np.pi:
                raise ConfigError(f"sphere band {band} must satisfy 0 < theta_min < theta_max < pi")
            self.band = (float(lo), float(hi))
            self.x0 = np.linspace(lo, hi, n0)
            self.h0 = (hi - lo) / (n0 - 1)
            self.periodic0 = False
        elif kind == "torus":
            self.band = None
            self.x0 = np.arange(n0) * (2 * np.pi / n0)
            self.h0 = 2 * np.pi / n0
            self.periodic0 = True
        else:
            raise ConfigError(f"unsupported chart grid kind {kind!r}")
        self.x1 = np.arange(n1) * (2 * np.pi / n1)
        self.h1 = 2 * np.pi / n1
        C0, C1 = np.meshgrid(self.x0, self.x1, indexing="ij")
        self.coords = np.stack([C0.ravel(), C1.ravel()], axis=1)
        self.points = charts.coords_to_points(kind, self.coords)
        self.gF, self.dgF = charts.chart_metric(kind, self.coords)
        self.resolution = {"shape": list(self.shape), "band": list(self.band) if self.band else None}

    @property
    def h(self):
        return max(self.h0, self.h1)

    @cached_property
    def weights(self):
        """Chart quadrature weights (trapezoid); informational only."""
        w0 = np.full(self.shape[0], self.h0)
        if not self.periodic0:
            w0[[0, -1]] *= 0.5
        area = np.sqrt(np.linalg.det(self.gF))
        return (w0[:, None] * self.h1 * np.ones(self.shape[1])[None, :]).ravel() * area

    def interior(self, margin=3):
        """Mask of points at least ``margin`` rows away from the band edges."""
        mask = np.ones(self.shape, dtype=bool)
        if not self.periodic0 and margin:
            mask[:margin] = False
            mask[-margin:] = False
        return mask.ravel()

    def _diff_axis(self, f, axis, order):
        h = self.h0 if axis == 0 else self.h1
        periodic = self.periodic0 if axis == 0 else True
        f = np.moveaxis(f, axis, 0)
        out = np.zeros_like(f)
        central = fd_weights([-2, -1, 0, 1, 2], order)
        n = f.shape[0]
        if periodic:
            for w, o in zip(central, (-2, -1, 0, 1, 2)):
                out += w * np.roll(f, -o, axis=0)
        else:
            for w, o in zip(central, (-2, -1, 0, 1, 2)):
                out[2:n - 2] += w * f[2 + o:n - 2 + o]
            for i in (0, 1):
                offs = np.arange(6) - i
                w = fd_weights(offs, order)
                out[i] = np.tensordot(w, f[i + offs], axes=(0, 0))
                j = n - 1 - i
                offs = -(np.arange(6) - i)
                w = fd_weights(offs, order)
                out[j] = np.tensordot(w, f[j + offs], axes=(0, 0))
        return np.moveaxis(out, 0, axis) / h ** order

    def d(self, f, axis):
        """First derivative of a field (extra trailing dims allowed)."""
        f = np.asarray(f, dtype=float)
        g = f.reshape(self.shape + f.shape[1:])
        return self._diff_axis(g, axis, 1).reshape(f.shape)

    def d2(self, f, a, b):
        f = np.asarray(f, dtype=float)
        g = f.reshape(self.shape + f.shape[1:])
        if a == b:
            out = self._diff_axis(g, a, 2)
        else:
            out = self._diff_axis(self._diff_axis(g, 0, 1), 1, 1)
        return out.reshape(f.shape)

    def gradient(self, f):
        """``(n, 2)`` array of chart partials."""
        return np.stack([self.d(f, 0), self.d(f, 1)], axis=-1)

    def hessian_partials(self, f):
        """``(n, 2, 2)`` array of second chart partials."""
        H = np.empty((self.n, 2, 2))
        H[:, 0, 0] = self.d2(f, 0, 0)
        H[:, 1, 1] = self.d2(f, 1, 1)
        H[:, 0, 1] = H[:, 1, 0] = self.d2(f, 0, 1)
        return H

    def conformal_metric(self, phi):
        g = phi[:, None, None] ** 2 * self.gF
        dg = np.stack([self.d(g, 0), self.d(g, 1)], axis=1)  # [n, k, i, j]
        return g, dg


def christoffel(g, dg):
    """``G[..., k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)`` with
    ``dg[..., l, i, j] = d_l g_ij``."""
    ginv = np.linalg.inv(g)
    lower = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def build_fiber(descriptor):
    """Construct a discretization from a descriptor mapping.

    ``{"backend": "trimesh", "kind": "sphere", "level": L}``,
    ``{"backend": "trimesh", "kind": "torus", "n": N}``,
    ``{"backend": "chartgrid", "kind": "sphere", "band": [a, b], "shape": [n0, n1]}``,
    ``{"backend": "chartgrid", "kind": "torus", "shape": [n0, n1]}``.
    """
    d = dict(descriptor)
    backend = d.get("backend", "trimesh")
    kind = d.get("kind")
    try:
        if backend == "trimesh":
            if kind == "sphere":
                level = int(d["level"])
                if not 0 <= level <= 7:
                    raise ConfigError(f"icosphere level {level} out of range 0..7")
                return TriMesh.sphere(level)
            if kind == "torus":
                n = int(d["n"])
                if n < 3:
                    raise ConfigError("torus grid needs n >= 3")
                return TriMesh.torus(n)
        elif backend == "chartgrid":
            if kind == "sphere":
                return ChartGrid("sphere", d["shape"], d.get("band", (np.pi / 6, 5 * np.pi / 6)))
            if kind == "torus":
                return ChartGrid("torus", d["shape"])
    except KeyError as exc:
        raise ConfigError(f"fiber descriptor missing {exc}") from None
    raise ConfigError(f"unsupported fiber {backend}/{kind}")


# --- operators ---------------------------------------------------------------

def grad_norm2(fd, phi, s):
    """``|grad s|^2`` in the metric ``phi^2 g_F``."""
    phi = _as_phi(fd, phi)
    s = _as_field(fd, s)
    if fd.backend == "trimesh":
        g = fd.vertex_gradients(s)
        return np.sum(g * g, axis=1) / phi ** 2
    ds = fd.gradient(s)
    ginv = np.linalg.inv(fd.gF)
    return np.einsum("ni,nij,nj->n", ds, ginv, ds) / phi ** 2


def laplacian(fd, phi, s):
    """``Delta s = div grad s`` in the metric ``phi^2 g_F``."""
    phi = _as_phi(fd, phi)
    s = _as_field(fd, s)
    if fd.backend == "trimesh":
        # two-dimensional fiber: Delta_g = phi^-2 Delta_F
        return -(fd.stiffness @ s) / (fd.weights * phi ** 2)
    g, dg = fd.conformal_metric(phi)
    G = christoffel(g, dg)
    ds = fd.gradient(s)
    H = fd.hessian_partials(s) - np.einsum("nkij,nk->nij", G, ds)
    return np.einsum("nij,nij->n", np.linalg.inv(g), H)


def integrate(fd, phi, s):
    """``sum_i s_i w_i phi_i^m`` over a closed mesh."""
    if not getattr(fd, "closed", False):
        raise UnsupportedSurface(f"cannot integrate over an open {fd.backend}")
    phi = _as_phi(fd, phi)
    s = _as_field(fd, s)
    return float(np.sum(s * fd.weights * phi ** fd.dim))


def baseline_scalar_curvature(fd):
    return 2.0 if fd.kind == "sphere" else 0.0


def scalar_curvature(fd, phi=None):
    """Scalar curvature of ``phi^2 g_F`` (``S = 2K`` on surfaces).

    TriMesh: angle defect of the mesh with edge lengths scaled by the mean of
    ``phi`` at their end points, over the lumped area ``w phi^2``.
    ChartGrid: the conformal-change formula applied to the round/flat
    baseline curvature.
    """
    phi = _as_phi(fd, phi)
    if fd.backend == "trimesh":
        defect = fd.angle_defect(None if np.all(phi == 1.0) else phi)
        return 2.0 * defect / (fd.weights * phi ** 2)
    lap = laplacian(fd, None, np.log(phi))
    return (baseline_scalar_curvature(fd) - 2.0 * lap) / phi ** 2


def first_eigenvalue(fd, phi=None, k=8, group_tol=2e-2):
    """Smallest nonzero eigenvalue of ``-Delta`` and its multiplicity.

    Solves ``K x = lam M x`` with lumped mass ``M = w phi^2`` (the Dirichlet
    energy is conformally invariant in two dimensions).
    """
    if fd.backend != "trimesh":
        raise UnsupportedBackend("eigenvalues need a closed TriMesh")
    phi = _as_phi(fd, phi)
    M = sp.diags(fd.weights * phi ** 2)
    k = min(k, fd.n - 2)
    try:
        vals = eigsh(fd.stiffness.tocsc(), k=k, M=M.tocsc(), sigma=-1e-3, which="LM",
                     return_eigenvectors=False)
    except (ArpackNoConvergence, RuntimeError) as exc:
        raise SolverFailure(str(exc)) from exc
    vals = np.sort(vals)
    nonzero = vals[vals > 1e-8 * max(1.0, abs(vals[-1]))]
    if nonzero.size == 0:
        raise SolverFailure("no nonzero eigenvalue found")
    lam1 = float(nonzero[0])
    mult = int(np.sum(np.abs(nonzero - lam1) <= group_tol * lam1))
    if mult == nonzero.size:
        raise SolverFailure("eigenvalue cluster not resolved; increase k")
    return lam1, mult


def export_off(fd, path, values=None):
    """Write a TriMesh in OFF format (optionally with one scalar per vertex
    appended as a comment block)."""
    if fd.backend != "trimesh":
        raise UnsupportedBackend("only meshes can be exported")
    pts = fd.points if fd.points.shape[1] == 3 else np.c_[fd.points, np.zeros(fd.n)]
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{fd.n} {len(fd.tris)} 0\n")
        for p in pts:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for t in fd.tris:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        if values is not None:
            for v in np.asarray(values, dtype=float):
                fh.write(f"# {v:.17g}\n")
