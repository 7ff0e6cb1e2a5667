"""Spacelike immersions ``Psi = (Psi_B, Psi_F): M -> B x_lambda F``.

``M`` is always the fiber discretization itself and ``Psi_F`` the identity on
its sample points, so an immersion is just the pair of fields
``u = t o Psi_B`` and ``v = r o Psi_B`` together with how it was built.

Derivatives of ``u`` and ``v`` ("jets") come from the chart grid's finite
differences, or on triangle meshes from a small finite-difference stencil
around each vertex applied to the analytic field (in the rotated sphere
chart whose poles are farthest from the vertex).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import base2d, charts
from .errors import ConfigError, NotSpacelike, UnsupportedBackend
from .expr import Expr

__all__ = [
    "Provenance",
    "Immersion",
    "Jets",
    "FrameField",
    "from_leaf_section",
    "from_slice",
    "from_graph",
    "frame_decomposition",
    "factoring_test",
    "local_diffeo_check",
    "SPACELIKE_MARGIN",
]

LEAF_XI, LEAF_ETA, SLICE, GRAPH, GENERIC = "LeafXi", "LeafEta", "Slice", "Graph", "Generic"
SPACELIKE_MARGIN = 1e-10
JET_STEP = 5e-3

_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_W2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFF = np.arange(-2, 3)


@dataclass(frozen=True)
class Provenance:
    kind: str
    c: Optional[float] = None
    t0: Optional[float] = None
    r0: Optional[float] = None

    @property
    def is_leaf(self):
        return self.kind in (LEAF_XI, LEAF_ETA, SLICE)

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


class Jets(NamedTuple):
    """Chart data and first/second partials of ``u``, ``v`` at every point."""

    coords: np.ndarray
    rot: np.ndarray
    gF: np.ndarray
    dgF: np.ndarray
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    ddu: np.ndarray
    ddv: np.ndarray


class FrameField(NamedTuple):
    """Tangent (chart components) and normal (ambient components) parts of
    ``xi`` and ``eta``; ``ell`` is the normalized null normal on leaves."""

    xi_tan: np.ndarray
    eta_tan: np.ndarray
    xi_perp: np.ndarray
    eta_perp: np.ndarray
    ell: Optional[np.ndarray]
    family: Optional[str]


def _field_callable(obj, kind):
    if obj is None:
        return None
    if isinstance(obj, Expr):
        return lambda pts: obj(**charts.point_env(kind, pts))
    if callable(obj):
        return obj
    if np.ndim(obj) == 0:
        const = float(obj)
        return lambda pts: np.full(len(pts), const)
    return None


def _sample(fd, obj):
    fn = _field_callable(obj, fd.kind)
    if fn is not None:
        vals = np.asarray(fn(fd.points), dtype=float)
        vals = np.broadcast_to(vals, (fd.n,)).copy()
    else:
        vals = np.asarray(obj, dtype=float)
        if vals.ndim == 0:
            vals = np.full(fd.n, float(vals))
    if vals.shape != (fd.n,):
        raise ConfigError(f"field has shape {vals.shape}, expected ({fd.n},)")
    return vals, fn


def _stencil_jets(fd, fn, coords, rot, h=JET_STEP):
    """Local 4th-order partials of an analytic field in each vertex's chart."""
    n = coords.shape[0]
    A, B = np.meshgrid(_OFF, _OFF, indexing="ij")
    off = np.stack([A.ravel(), B.ravel()], axis=1) * h  # (25, 2)
    pts_c = coords[:, None, :] + off[None, :, :]
    vals = np.empty((n, 25))
    for r in np.unique(rot):
        sel = rot == r
        pts = charts.coords_to_points(fd.kind, pts_c[sel], int(r))
        vals[sel] = np.asarray(fn(pts.reshape(-1, pts.shape[-1])), dtype=float).reshape(-1, 25)
    grid = vals.reshape(n, 5, 5)
    d = np.empty((n, 2))
    d[:, 0] = grid[:, :, 2] @ _W1 / h
    d[:, 1] = grid[:, 2, :] @ _W1 / h
    dd = np.empty((n, 2, 2))
    dd[:, 0, 0] = grid[:, :, 2] @ _W2 / h ** 2
    dd[:, 1, 1] = grid[:, 2, :] @ _W2 / h ** 2
    dd[:, 0, 1] = dd[:, 1, 0] = np.einsum("nab,a,b->n", grid, _W1, _W1) / h ** 2
    return d, dd


class Immersion:
    """An immersion of the fiber discretization ``fd`` into the spacetime."""

    def __init__(self, spec, fd, u, v, provenance, u_fn=None, v_fn=None):
        if spec.m != fd.dim:
            raise ConfigError(
                f"fiber_dim = {spec.m} but the fiber discretization is {fd.dim}-dimensional")
        self.spec = spec
        self.fd = fd
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.provenance = provenance
        self.u_fn = u_fn
        self.v_fn = v_fn
        self.profile = base2d.profile_eval(spec, self.v)

    @property
    def m(self):
        return self.spec.m

    @cached_property
    def warp(self):
        return base2d.warp_jet(self.spec, self.u, self.v)

    @property
    def phi(self):
        """Conformal factor ``lambda o Psi_B`` of the leaf/slice induced metric."""
        return self.warp.lam

    @cached_property
    def jets(self):
        fd = self.fd
        if fd.backend == "chartgrid":
            coords, rot = fd.coords, np.zeros(fd.n, dtype=int)
            dv, ddv = fd.gradient(self.v), fd.hessian_partials(self.v)
            du, ddu = fd.gradient(self.u), fd.hessian_partials(self.u)
        else:
            if self.v_fn is None:
                raise UnsupportedBackend("mesh jets need the analytic v field")
            if fd.kind == "sphere":
                rot = charts.pick_sphere_chart(fd.points)
                coords = np.empty((fd.n, 2))
                for r in (0, 1):
                    sel = rot == r
                    th, ph = charts.sphere_from_xyz(fd.points[sel], r)
                    coords[sel] = np.stack([th, ph], axis=1)
            else:
                coords, rot = fd.points.copy(), np.zeros(fd.n, dtype=int)
            dv, ddv = _stencil_jets(fd, self.v_fn, coords, rot)
            kind = self.provenance.kind
            if kind in (LEAF_XI, LEAF_ETA):
                # u = c +- r_*(v): chain rule with d r_*/dr = 1/f^2
                s = 1.0 if kind == LEAF_XI else -1.0
                f2, df2 = self.profile.f2, self.profile.df2_dr
                du = s * dv / f2[:, None]
                ddu = s * (ddv / f2[:, None, None]
                           - (df2 / f2 ** 2)[:, None, None] * dv[:, :, None] * dv[:, None, :])
            elif kind == SLICE:
                du, ddu = np.zeros_like(dv), np.zeros_like(ddv)
            else:
                if self.u_fn is None:
                    raise UnsupportedBackend("mesh jets need the analytic u field")
                du, ddu = _stencil_jets(fd, self.u_fn, coords, rot)
        gF, dgF = charts.chart_metric(fd.kind, coords)
        return Jets(coords, rot, gF, dgF, self.u, self.v, du, dv, ddu, ddv)

    # --- metrics ------------------------------------------------------------

    def pullback_metric(self):
        """``g = -f^2 du^2 + dv^2/f^2 + lambda^2 g_F`` from the jets."""
        j = self.jets
        f2 = self.profile.f2[:, None, None]
        return (-f2 * j.du[:, :, None] * j.du[:, None, :]
                + j.dv[:, :, None] * j.dv[:, None, :] / f2
                + (self.phi ** 2)[:, None, None] * j.gF)

    def induced_metric(self):
        """Induced metric in chart components.  Exactly ``lambda^2 g_F`` for
        leaves and slices; the pullback formula for graphs."""
        if self.provenance.is_leaf:
            return (self.phi ** 2)[:, None, None] * self.jets.gF
        return self.pullback_metric()

    def volume_density(self):
        """``d mu_g / d mu_{g_F}``."""
        if self.provenance.is_leaf:
            return self.phi ** self.m
        g = self.induced_metric()
        return np.sqrt(np.linalg.det(g) / np.linalg.det(self.jets.gF))

    def integrate(self, s):
        from .fiber import integrate
        return integrate(self.fd, None, np.asarray(s, dtype=float) * self.volume_density())

    def gradient(self, which):
        """Chart components of ``grad u`` or ``grad v`` in the induced metric."""
        d = self.jets.du if which == "u" else self.jets.dv
        return np.einsum("nij,nj->ni", np.linalg.inv(self.induced_metric()), d)

    def inner(self, a, b):
        return np.einsum("ni,nij,nj->n", a, self.induced_metric(), b)

    def push(self, w):
        """Ambient components ``d Psi (w)`` of chart tangent vectors ``w``."""
        j = self.jets
        return np.concatenate([
            np.einsum("ni,ni->n", w, j.du)[:, None],
            np.einsum("ni,ni->n", w, j.dv)[:, None],
            w], axis=1)

    def ambient_points(self):
        return np.concatenate([self.u[:, None], self.v[:, None], self.jets.coords], axis=1)

    def min_spacelike_eigenvalue(self):
        """Smallest eigenvalue of ``g_F^{-1} g`` per point (chart invariant)."""
        g = self.pullback_metric()
        gF = self.jets.gF
        L = np.linalg.cholesky(gF)
        Linv = np.linalg.inv(L)
        sym = Linv @ g @ np.swapaxes(Linv, -1, -2)
        return np.linalg.eigvalsh(sym)[:, 0]

    def __repr__(self):
        return f"Immersion({self.provenance.kind}, n={self.fd.n})"


def from_leaf_section(spec, family, c, v, fd):
    """Section of the ``D_xi`` (``family="xi"``) or ``D_eta`` leaf through
    ``t - r_* = c`` (resp. ``t + r_* = c``) over the fiber: ``u = c +- r_*(v)``."""
    if family not in ("xi", "eta"):
        raise ConfigError(f"family must be 'xi' or 'eta', not {family!r}")
    vals, vfn = _sample(fd, v)
    base2d.profile_eval(spec, vals)
    rstar = base2d.tortoise(spec, vals)
    u = c + rstar if family == "xi" else c - rstar
    kind = LEAF_XI if family == "xi" else LEAF_ETA
    return Immersion(spec, fd, u, vals, Provenance(kind, c=float(c)), v_fn=vfn)


def from_slice(spec, t0, r0, fd):
    base2d.profile_eval(spec, np.asarray([r0], dtype=float))
    u = np.full(fd.n, float(t0))
    v = np.full(fd.n, float(r0))
    const = float(r0)
    return Immersion(spec, fd, u, v, Provenance(SLICE, t0=float(t0), r0=float(r0)),
                     u_fn=lambda pts: np.full(len(pts), float(t0)),
                     v_fn=lambda pts: np.full(len(pts), const))


def from_graph(spec, u, v, fd, margin=SPACELIKE_MARGIN):
    """General spacelike graph; rejects points where the induced metric is not
    positive definite (smallest eigenvalue of ``g_F^{-1} g`` below ``margin``)."""
    uvals, ufn = _sample(fd, u)
    vvals, vfn = _sample(fd, v)
    base2d.profile_eval(spec, vvals)
    im = Immersion(spec, fd, uvals, vvals, Provenance(GRAPH), u_fn=ufn, v_fn=vfn)
    ev = im.min_spacelike_eigenvalue()
    bad = ~(ev > margin)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NotSpacelike(f"induced metric not positive definite at point {idx} "
                           f"(smallest eigenvalue {ev[idx]:.3g})", idx)
    return im


def frame_decomposition(im):
    """Split ``xi`` and ``eta`` into tangent and normal parts.

    ``xi^T = grad v / f^2 - grad u``, ``eta^T = -(grad v + f^2 grad u)/2``; the
    normal parts are ``xi - d Psi(xi^T)`` etc.  On leaves also the null normal
    ``ell^xi = -(|grad v|^2/2) xi + eta^perp`` or
    ``ell^eta = xi^perp - (2 |grad v|^2 / f^4) eta``.
    """
    f2 = im.profile.f2
    gu, gv = im.gradient("u"), im.gradient("v")
    xi_tan = gv / f2[:, None] - gu
    eta_tan = -0.5 * (gv + f2[:, None] * gu)
    n = im.fd.n
    xi = np.zeros((n, 4))
    xi[:, 0] = 1.0 / f2
    xi[:, 1] = 1.0
    eta = np.zeros((n, 4))
    eta[:, 0] = 0.5
    eta[:, 1] = -0.5 * f2
    xi_perp = xi - im.push(xi_tan)
    eta_perp = eta - im.push(eta_tan)
    kind = im.provenance.kind
    ell, family = None, None
    if kind in (LEAF_XI, SLICE):
        grad2 = im.inner(gv, gv)
        ell = -0.5 * grad2[:, None] * xi + eta_perp
        family = "xi"
    elif kind == LEAF_ETA:
        grad2 = im.inner(gv, gv)
        ell = xi_perp - (2.0 * grad2 / f2 ** 2)[:, None] * eta
        family = "eta"
    return FrameField(xi_tan, eta_tan, xi_perp, eta_perp, ell, family)


def gradient_error(fd):
    """Relative max error of the jet machinery on a reference function."""
    if fd.kind == "sphere":
        ref = lambda pts: pts[:, 2] + 0.5 * pts[:, 0] * pts[:, 1]
    else:
        ref = lambda pts: np.sin(pts[:, 0]) * np.cos(2 * pts[:, 1])
    vals = ref(fd.points)
    probe = Immersion(base2d.ProfileSpec(fiber_dim=fd.dim, warping=base2d.Warping("one")),
                      fd, np.zeros(fd.n), np.ones(fd.n), Provenance(GRAPH),
                      u_fn=lambda p: np.zeros(len(p)), v_fn=ref)
    j = probe.jets
    # analytic partials in the same charts
    if fd.kind == "sphere":
        th, ph = j.coords[:, 0], j.coords[:, 1]
        e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
        e_ph = np.stack([-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), np.zeros_like(th)], axis=1)
        P = fd.points
        grad3 = np.stack([0.5 * P[:, 1], 0.5 * P[:, 0], np.ones(fd.n)], axis=1)
        rotm = np.stack([charts._ROT[r] for r in j.rot])
        e_th = np.einsum("nij,nj->ni", rotm, e_th)
        e_ph = np.einsum("nij,nj->ni", rotm, e_ph)
        exact = np.stack([np.sum(grad3 * e_th, 1), np.sum(grad3 * e_ph, 1)], axis=1)
    else:
        a, b = j.coords[:, 0], j.coords[:, 1]
        exact = np.stack([np.cos(a) * np.cos(2 * b), -2 * np.sin(a) * np.sin(2 * b)], axis=1)
    if fd.backend == "chartgrid":
        mask = fd.interior(0)
        err = np.abs(fd.gradient(vals) - exact)[mask]
    else:
        err = np.abs(j.dv - exact)
    return float(err.max() / np.abs(exact).max())


def factoring_test(im, tol=None):
    """Classify by the gradient relations ``grad v = +- f^2 grad u``.

    Returns ``(label, residuals)`` where ``residuals`` holds per-point norms of
    ``dv - f^2 du`` (``"xi"``), ``dv + f^2 du`` (``"eta"``) and of ``du``,
    ``dv`` themselves.  ``tol`` defaults to ten times the measured relative
    gradient error of the discretization, scaled by the field size.
    """
    j = im.jets
    f2 = im.profile.f2[:, None]
    ginv = np.linalg.inv(j.gF)

    def norm(w):
        return np.sqrt(np.maximum(np.einsum("ni,nij,nj->n", w, ginv, w), 0.0))

    res = {
        "xi": norm(j.dv - f2 * j.du),
        "eta": norm(j.dv + f2 * j.du),
        "du": norm(j.du),
        "dv": norm(j.dv),
    }
    if tol is None:
        scale = max(float(res["dv"].max()), float((f2[:, 0] * res["du"]).max()),
                    float(np.abs(im.v).max()) * 1e-3)
        tol = max(10.0 * gradient_error(im.fd) * scale, 1e-12)
    if res["du"].max() <= tol and res["dv"].max() <= tol:
        label = SLICE
    elif res["xi"].max() <= tol:
        label = LEAF_XI
    elif res["eta"].max() <= tol:
        label = LEAF_ETA
    else:
        label = GENERIC
    return label, res, tol


def local_diffeo_check(im):
    """Per-point Jacobian witness ``lambda(Psi_B)^2`` of ``Psi_F`` (the
    identity) measured in the induced metric, and its minimum."""
    w = im.phi ** 2
    return w, float(w.min())


def base_pullback_trace(im):
    """``trace_g (Psi_B^* g_B)``."""
    j = im.jets
    f2 = im.profile.f2[:, None, None]
    pb = -f2 * j.du[:, :, None] * j.du[:, None, :] + j.dv[:, :, None] * j.dv[:, None, :] / f2
    return np.einsum("nij,nij->n", np.linalg.inv(im.induced_metric()), pb)
