"""Extrinsic geometry of codimension-two spacelike immersions.

Closed forms (leaf sections and slices) are written in the null normal
frame ``{n0, ell}`` where ``n0`` is the generator of the leaf (``xi`` for
``D_xi``, ``eta`` for ``D_eta``) and ``ell`` the second null normal with
``g~(n0, ell) = -1``; thus ``H = a n0 + b ell`` and ``|H|^2 = -2 a b``.

The oracle differentiates the immersion and uses the finite-difference
Christoffel symbols of the ambient metric; it shares no formula with the
closed forms.
"""

from typing import NamedTuple, Optional

import numpy as np

from . import base2d, warped
from .errors import UnsupportedBackend, UnsupportedDimension
from .fiber import christoffel, grad_norm2, laplacian, scalar_curvature
from .immersion import GRAPH, LEAF_ETA, LEAF_XI, SLICE, frame_decomposition

__all__ = [
    "OracleII",
    "second_fundamental_form_oracle",
    "oracle_null_coefficients",
    "oracle_shape_operator",
    "hessian",
    "shape_operators_closed",
    "MeanCurvature",
    "mean_curvature",
    "mean_curvature_norm",
    "CausalReport",
    "causal_classification",
    "marginal_residual",
    "umbilic_test",
    "normal_connection",
    "oracle_normal_derivative",
    "parallel_H_residual",
    "oracle_parallel_H_residual",
    "UNTRAPPED",
    "MARGINAL",
    "WEAKLY",
    "TRAPPED",
    "MINIMAL",
    "MIXED",
]

UNTRAPPED, MARGINAL, WEAKLY, TRAPPED, MINIMAL, MIXED = (
    "Untrapped", "MarginallyTrapped", "WeaklyTrapped", "Trapped", "Minimal", "Mixed")
ORIENTATION = "d/dt future pointing; xi, eta and ell future lightlike"


def _family(im):
    kind = im.provenance.kind
    if kind in (LEAF_XI, SLICE):
        return "xi"
    if kind == LEAF_ETA:
        return "eta"
    return None


def _require_leaf(im):
    fam = _family(im)
    if fam is None:
        raise UnsupportedBackend("closed forms need leaf or slice provenance")
    return fam


def _null_vectors(im):
    f2 = im.profile.f2
    n = im.fd.n
    xi = np.zeros((n, 4))
    xi[:, 0], xi[:, 1] = 1.0 / f2, 1.0
    eta = np.zeros((n, 4))
    eta[:, 0], eta[:, 1] = 0.5, -0.5 * f2
    return xi, eta


# --- oracle -------------------------------------------------------------------

class OracleII(NamedTuple):
    """Oracle second fundamental form ``II[n, i, j, k]`` (ambient components)
    on the chart basis, with the pulled-back metric and ``H``."""

    II: np.ndarray
    g: np.ndarray
    H: np.ndarray
    basis: np.ndarray
    x: np.ndarray
    G: np.ndarray


def second_fundamental_form_oracle(im, step=warped.DEFAULT_STEP):
    """Normal part of ``nabla~_{X_i} X_j`` with ``X_i = d_i Psi``.

    Only the jets of ``u``, ``v`` and the finite-difference ambient
    Christoffel symbols enter.
    """
    j = im.jets
    n = im.fd.n
    x = im.ambient_points()
    G = warped.oracle_christoffel(im.spec, im.fd.kind, x, step)
    gt = warped.ambient_metric(im.spec, im.fd.kind, x)
    X = np.zeros((n, 2, 4))
    X[:, :, 0] = j.du
    X[:, :, 1] = j.dv
    X[:, 0, 2] = 1.0
    X[:, 1, 3] = 1.0
    Y = np.zeros((n, 2, 2, 4))
    Y[..., 0] = j.ddu
    Y[..., 1] = j.ddv
    Y += np.einsum("nkab,nia,njb->nijk", G, X, X)
    g = np.einsum("nia,nab,njb->nij", X, gt, X)
    ginv = np.linalg.inv(g)
    # tangential part: X_k g^{kl} g~(Y, X_l)
    YX = np.einsum("nija,nab,nlb->nijl", Y, gt, X)
    tan = np.einsum("nijl,nlk,nkc->nijc", YX, ginv, X)
    II = Y - tan
    H = np.einsum("nij,nijc->nc", ginv, II) / im.m
    return OracleII(II, g, H, X, x, G)


def _oracle_normal_project(gt, X, g, w):
    ginv = np.linalg.inv(g)
    wX = np.einsum("na,nab,nlb->nl", w, gt, X)
    return w - np.einsum("nl,nlk,nkc->nc", wX, ginv, X)


def oracle_null_coefficients(im, oracle=None):
    """Oracle ``(a, b)`` with ``H = a n0 + b ell``.  ``ell`` is built from
    the oracle normal projection of the other null vector."""
    fam = _require_leaf(im)
    o = oracle if oracle is not None else second_fundamental_form_oracle(im)
    gt = warped.ambient_metric(im.spec, im.fd.kind, o.x)
    xi, eta = _null_vectors(im)
    n0, other = (xi, eta) if fam == "xi" else (eta, xi)
    perp = _oracle_normal_project(gt, o.basis, o.g, other)
    pp = np.einsum("na,nab,nb->n", perp, gt, perp)
    ell = perp + 0.5 * pp[:, None] * n0
    a = -np.einsum("na,nab,nb->n", o.H, gt, ell)
    b = -np.einsum("na,nab,nb->n", o.H, gt, n0)
    return a, b, ell


def oracle_shape_operator(im, zeta, oracle=None):
    """Mixed shape operator ``A_zeta = g^{-1} [g~(II_ij, zeta)]`` from the oracle."""
    o = oracle if oracle is not None else second_fundamental_form_oracle(im)
    gt = warped.ambient_metric(im.spec, im.fd.kind, o.x)
    low = np.einsum("nija,nab,nb->nij", o.II, gt, zeta)
    return np.einsum("nik,nkj->nij", np.linalg.inv(o.g), low)


# --- closed forms -------------------------------------------------------------

def hessian(im):
    """Chart components of ``Hess_g v`` with Christoffel symbols of the
    sampled conformal metric differentiated on the grid."""
    fd = im.fd
    if fd.backend != "chartgrid":
        raise UnsupportedBackend("Hessians need a ChartGrid discretization")
    g, dg = fd.conformal_metric(im.phi)
    G = christoffel(g, dg)
    j = im.jets
    return j.ddv - np.einsum("nkij,nk->nij", G, j.dv), g


def _grad_lap(im):
    phi = im.phi
    return grad_norm2(im.fd, phi, im.v), laplacian(im.fd, phi, im.v)


def shape_operators_closed(im, hessian_part=True):
    """Shape operators of a leaf section as mixed ``(n, 2, 2)`` tensors.

    ``D_xi``: ``A_xi = -(xi lam/lam) Id``, ``A_eta_perp = -(eta lam/lam) Id - Hess v``.
    ``D_eta``: ``A_eta = -(eta lam/lam) Id``, ``A_xi_perp = -(xi lam/lam) Id + (2/f^2) Hess v``.
    """
    fam = _require_leaf(im)
    w = im.warp
    xr, er = w.xi_lam / w.lam, w.eta_lam / w.lam
    eye = np.broadcast_to(np.eye(2), (im.fd.n, 2, 2))
    out = {}
    if fam == "xi":
        out["xi"] = -xr[:, None, None] * eye
    else:
        out["eta"] = -er[:, None, None] * eye
    if hessian_part:
        Hs, g = hessian(im)
        mixed = np.einsum("nik,nkj->nij", np.linalg.inv(g), Hs)
        if fam == "xi":
            out["eta_perp"] = -er[:, None, None] * eye - mixed
        else:
            f2 = im.profile.f2
            out["xi_perp"] = -xr[:, None, None] * eye + (2.0 / f2)[:, None, None] * mixed
    return out


class MeanCurvature(NamedTuple):
    """``H = a n0 + b ell = a_perp n0 + b_perp n1`` with ``n1 = eta^perp``
    (``D_xi``) or ``xi^perp`` (``D_eta``); ``vector`` in ambient components."""

    family: str
    a: np.ndarray
    b: np.ndarray
    a_perp: np.ndarray
    b_perp: np.ndarray
    vector: np.ndarray
    grad2: np.ndarray
    lap: np.ndarray


def mean_curvature(im, grad2=None, lap=None):
    """Closed-form mean curvature vector of a leaf section.

    ``D_xi``::

        H = [eta lam/lam - (xi lam/lam)|grad v|^2 + Delta v/m] xi + (xi lam/lam) eta^perp
          = [eta lam/lam - (xi lam/(2 lam))|grad v|^2 + Delta v/m] xi + (xi lam/lam) ell^xi

    ``D_eta``::

        H = (eta lam/lam) xi^perp + [xi lam/lam - 4 eta lam |grad v|^2/(lam f^4) - 2 Delta v/(m f^2)] eta
          = (eta lam/lam) ell^eta + [xi lam/lam - 2 eta lam |grad v|^2/(lam f^4) - 2 Delta v/(m f^2)] eta
    """
    fam = _require_leaf(im)
    if grad2 is None or lap is None:
        grad2, lap = _grad_lap(im)
    w = im.warp
    m = im.m
    f2 = im.profile.f2
    xr, er = w.xi_lam / w.lam, w.eta_lam / w.lam
    frame = frame_decomposition(im)
    xi, eta = _null_vectors(im)
    if fam == "xi":
        a_perp = er - xr * grad2 + lap / m
        b_perp = xr
        a = er - 0.5 * xr * grad2 + lap / m
        b = xr
        vec = a_perp[:, None] * xi + b_perp[:, None] * frame.eta_perp
    else:
        b_perp = er
        a_perp = xr - 4.0 * er * grad2 / f2 ** 2 - 2.0 * lap / (m * f2)
        a = xr - 2.0 * er * grad2 / f2 ** 2 - 2.0 * lap / (m * f2)
        b = er
        vec = a_perp[:, None] * eta + b_perp[:, None] * frame.xi_perp
    return MeanCurvature(fam, a, b, a_perp, b_perp, vec, grad2, lap)


def mean_curvature_norm(im, route="frame", mc=None):
    """``g~(H, H)`` (signed).

    ``route="frame"``: ``-2 a b`` from the null-frame coefficients.
    ``route="curvature"`` (``lambda = r``): ``(1/v^2)[f^2 - (S^{g_F} - v^2 S^g)/(m(m-1))]``
    with scalar curvatures from the fiber discretization.
    """
    if route == "frame":
        mc = mc if mc is not None else mean_curvature(im)
        return -2.0 * mc.a * mc.b
    if route == "curvature":
        _require_leaf(im)
        if im.spec.warping.kind != "radial":
            raise UnsupportedDimension("curvature route needs lambda = r")
        if im.fd.dim != 2:
            raise UnsupportedDimension("curvature route needs a two-dimensional fiber")
        m = im.m
        v = im.v
        S_F = scalar_curvature(im.fd)
        S_g = scalar_curvature(im.fd, v)
        return (im.profile.f2 - (S_F - v ** 2 * S_g) / (m * (m - 1))) / v ** 2
    raise ValueError(f"unknown route {route!r}")


def marginal_residual(im, grad2=None, lap=None):
    """``2 v Delta v - m (f^2 + |grad v|^2)`` (``lambda = r``); zero exactly
    where the leaf section is marginally trapped."""
    if grad2 is None or lap is None:
        grad2, lap = _grad_lap(im)
    return 2.0 * im.v * lap - im.m * (im.profile.f2 + grad2)


class CausalReport(NamedTuple):
    classes: np.ndarray
    orientation: np.ndarray
    verdict: str
    norm2: np.ndarray
    tol: float
    expansions: tuple
    convention: str


def causal_classification(im, mc=None, rel_tol=1e-6):
    """Pointwise causal character of ``H`` and a global verdict.

    Since ``n0`` and ``ell`` are future lightlike, ``H = a n0 + b ell`` is
    future timelike iff ``a, b > 0`` (equivalently both null expansions
    ``g~(H, n0) = -b`` and ``g~(H, ell) = -a`` negative).  ``|H|^2`` within
    ``tol = rel_tol * scale`` of zero counts as lightlike, or as ``Minimal``
    where ``H`` itself vanishes within the same band.  ``scale`` is the larger
    of ``max (|a| + |b|)^2`` and the fiber curvature scale ``max 1/lambda^2``,
    so that round-off in a vanishing ``H`` is not mistaken for a signal.
    """
    mc = mc if mc is not None else mean_curvature(im)
    a, b = mc.a, mc.b
    n2 = -2.0 * a * b
    scale = max(float(np.max((np.abs(a) + np.abs(b)) ** 2)), float(np.max(1.0 / im.warp.lam ** 2)))
    tol = rel_tol * scale
    classes = np.empty(a.shape, dtype=object)
    orient = np.full(a.shape, "", dtype=object)
    zero_h = (np.abs(a) + np.abs(b)) ** 2 <= tol
    classes[n2 > tol] = UNTRAPPED
    classes[np.abs(n2) <= tol] = MARGINAL
    classes[(np.abs(n2) <= tol) & zero_h] = MINIMAL
    classes[n2 < -tol] = TRAPPED
    causal = (classes == MARGINAL) | (classes == TRAPPED)
    s = np.where(np.abs(a) >= np.abs(b), a, b)
    orient[causal & (s > 0)] = "future"
    orient[causal & (s < 0)] = "past"
    kinds = set(classes.tolist())
    rest = kinds - {MINIMAL}
    if not rest:
        verdict = MINIMAL
    elif len(rest) == 1:
        verdict = rest.pop()
    elif rest <= {TRAPPED, MARGINAL} and len(set(orient[causal].tolist())) == 1:
        verdict = WEAKLY
    else:
        verdict = MIXED
    return CausalReport(classes, orient, verdict, n2, tol, (-b, -a), ORIENTATION)


def umbilic_test(im, direction=None):
    """Umbilic factor ``h`` and deviation of ``Hess v`` from ``h g``.

    ``A_{eta^perp}`` (resp. ``A_{xi^perp}``) is umbilic exactly when
    ``Hess v = h g``; ``h = trace/m`` and the deviation is the largest
    eigenvalue modulus of the traceless part (self-adjoint w.r.t. ``g``).
    """
    _require_leaf(im)
    Hs, g = hessian(im)
    mixed = np.einsum("nik,nkj->nij", np.linalg.inv(g), Hs)
    h = np.trace(mixed, axis1=1, axis2=2) / im.m
    # eigenvalues of a g-self-adjoint endomorphism via the symmetric form
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    sym = Linv @ Hs @ np.swapaxes(Linv, -1, -2)
    ev = np.linalg.eigvalsh(0.5 * (sym + np.swapaxes(sym, -1, -2)))
    dev = np.max(np.abs(ev - h[:, None]), axis=1)
    return h, dev


def normal_connection(im, V, oracle=None):
    """Normal covariant derivatives along chart tangent vectors ``V (n, 2)``.

    Returns ``(w0, N1)``: ``nabla^perp_V n0 = w0 * n0`` and the ambient
    vector ``nabla^perp_V n1`` (``n1 = eta^perp`` or ``xi^perp``), using

        D_xi:  nabla^perp_V xi = -(xi lam/lam) g(grad v, V) xi,
               nabla^perp_V eta^perp = -(eta lam/lam) g(grad v, V) xi + II(grad v, V)
        D_eta: nabla^perp_V eta = (2/f^2)(f f' + eta lam/lam) g(grad v, V) eta,
               nabla^perp_V xi^perp = (2 g(grad v, V)/f^2)[(xi lam/lam) eta - f f' xi^perp]
                                      - (2/f^2) II(grad v, V)

    ``II`` comes from the oracle (no closed form is needed for it).
    """
    fam = _require_leaf(im)
    V = np.asarray(V, dtype=float)
    w = im.warp
    xr, er = w.xi_lam / w.lam, w.eta_lam / w.lam
    gv = im.gradient("v")
    dvV = np.einsum("ni,ni->n", im.jets.dv, V)  # g(grad v, V) = dv(V)
    o = oracle if oracle is not None else second_fundamental_form_oracle(im)
    II_gV = np.einsum("ni,nj,nijc->nc", gv, V, o.II)
    xi, eta = _null_vectors(im)
    f2 = im.profile.f2
    ffp = im.profile.ffp
    if fam == "xi":
        w0 = -xr * dvV
        N1 = -(er * dvV)[:, None] * xi + II_gV
    else:
        frame = frame_decomposition(im)
        w0 = (2.0 / f2) * (ffp + er) * dvV
        N1 = ((2.0 * dvV / f2)[:, None] * (xr[:, None] * eta - ffp[:, None] * frame.xi_perp)
              - (2.0 / f2)[:, None] * II_gV)
    return w0, N1


def oracle_normal_derivative(im, N, oracle=None):
    """Oracle ``nabla^perp_{d_i} N`` for an ambient normal field ``N (n, 4)``
    sampled on a ChartGrid; returns ``(n, 2, 4)``."""
    fd = im.fd
    if fd.backend != "chartgrid":
        raise UnsupportedBackend("normal derivatives of sampled fields need a ChartGrid")
    o = oracle if oracle is not None else second_fundamental_form_oracle(im)
    dN = np.stack([fd.d(N, 0), fd.d(N, 1)], axis=1)
    D = dN + np.einsum("nkab,nia,nb->nik", o.G, o.basis, N)
    gt = warped.ambient_metric(im.spec, fd.kind, o.x)
    out = np.empty_like(D)
    for i in range(2):
        out[:, i] = _oracle_normal_project(gt, o.basis, o.g, D[:, i])
    return out


def parallel_H_residual(im):
    """``g~(nabla^perp_{d_i} H, n0)`` for the chart basis, ``(n, 2)``.

        D_xi:  -v_i xi(xi lam)/lam
        D_eta: 2 v_i (eta(eta lam) + f f' eta lam)/(lam f^2)

    Both vanish identically for ``lambda = r``.
    """
    fam = _require_leaf(im)
    w = im.warp
    dv = im.jets.dv
    if fam == "xi":
        c = -w.xi_xi_lam / w.lam
    else:
        c = 2.0 * (w.eta_eta_lam + im.profile.ffp * w.eta_lam) / (w.lam * im.profile.f2)
    return c[:, None] * dv


def oracle_parallel_H_residual(im, oracle=None):
    """Oracle counterpart of :func:`parallel_H_residual` (ChartGrid only)."""
    fam = _require_leaf(im)
    o = oracle if oracle is not None else second_fundamental_form_oracle(im)
    DH = oracle_normal_derivative(im, o.H, o)
    xi, eta = _null_vectors(im)
    n0 = xi if fam == "xi" else eta
    gt = warped.ambient_metric(im.spec, im.fd.kind, o.x)
    return np.einsum("nia,nab,nb->ni", DH, gt, n0)
