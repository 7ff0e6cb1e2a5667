"""The warped product ``(M~, g~) = B x_lambda F``.

Ambient coordinates are ``x = (t, r, y^1, y^2)`` with ``y`` a chart on the
fiber (``kind`` = ``"sphere"`` angles in one of two rotated atlases, or
``"torus"``/``"flat"`` coordinates).  Two independent connections live here:

* :func:`closed_covderiv` assembles the warped-product connection from the
  base connection, the gradient of ``lambda`` and the fiber Christoffels;
* :func:`oracle_christoffel` differentiates :func:`ambient_metric`
  numerically and knows nothing about warped products.
"""

from dataclasses import dataclass

import numpy as np

from . import base2d, charts
from .errors import BoundaryError, ChartError

__all__ = [
    "FieldGerm",
    "ambient_metric",
    "ambient_inner",
    "closed_christoffel",
    "closed_covderiv",
    "oracle_christoffel",
    "oracle_covderiv",
    "null_weingarten_factor",
    "recurrence_residual",
    "involutivity_residual",
    "xi_field",
    "eta_field",
]

DEFAULT_STEP = 1e-3
POLE_MARGIN = 1e-2


@dataclass(frozen=True)
class FieldGerm:
    """First-order germ of a vector field at a batch of points.

    ``value[..., k]`` are coordinate components and ``jac[..., k, a]`` is
    ``d_a Y^k``.
    """

    value: np.ndarray
    jac: np.ndarray

    @classmethod
    def constant(cls, value):
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (value.shape[-1],)))


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2:]


def ambient_metric(spec, kind, x):
    """Components of ``g~ = g_B + lambda^2 g_F`` at ambient points ``(..., 4)``."""
    t, r, y = _split(x)
    f2 = base2d.profile_eval(spec, r).f2
    lam = spec.warping.partials(t, r)[0]
    gF = charts.chart_metric(kind, y)[0]
    n = 2 + y.shape[-1]
    g = np.zeros(r.shape + (n, n))
    g[..., 0, 0] = -f2
    g[..., 1, 1] = 1.0 / f2
    g[..., 2:, 2:] = (lam ** 2)[..., None, None] * gF
    return g


def ambient_inner(spec, kind, x, a, b):
    g = ambient_metric(spec, kind, x)
    return np.einsum("...i,...ij,...j->...", a, g, b)


def _check_chart(kind, y, margin):
    if kind != "sphere":
        return
    theta = y[..., 0]
    if np.any((theta < margin) | (theta > np.pi - margin)):
        raise ChartError("point too close to a pole of its sphere chart")


def closed_christoffel(spec, kind, x):
    """Christoffel symbols ``G[..., k, i, j]`` of the warped connection.

    Assembled blockwise::

        nabla_X Y = nabla^B_X Y
        nabla_X V = nabla_V X = (X lambda / lambda) V
        nabla_V W = -(g~(V, W) / lambda) grad^B lambda + nabla^F_V W
    """
    t, r, y = _split(x)
    _check_chart(kind, y, POLE_MARGIN)
    GB = base2d.base_connection(spec, t, r)
    lam, lam_t, lam_r, *_ = spec.warping.partials(t, r)
    grad_lam = base2d.base_gradients(spec, t, r)["lambda"]
    gF = charts.chart_metric(kind, y)[0]
    GF = charts.chart_christoffel(kind, y)
    n = 2 + y.shape[-1]
    G = np.zeros(r.shape + (n, n, n))
    G[..., :2, :2, :2] = GB
    dlam = np.stack([lam_t, lam_r], axis=-1) / lam[..., None]
    for a in range(2, n):
        # mixed: nabla_{d_b} d_a = nabla_{d_a} d_b = (d_b lambda / lambda) d_a
        G[..., a, :2, a] = dlam
        G[..., a, a, :2] = dlam
    # g~(d_a, d_b) = lambda^2 gF_ab on the fiber block
    G[..., :2, 2:, 2:] = -(lam[..., None, None, None] * grad_lam[..., :, None, None]) * gF[..., None, :, :]
    G[..., 2:, 2:, 2:] = GF
    return G


def closed_covderiv(spec, kind, x, X, Y):
    """``nabla~_X Y`` from the closed-form warped connection.

    ``X`` is a vector (or a :class:`FieldGerm`, only its value is used);
    ``Y`` is a :class:`FieldGerm` carrying its first derivatives.
    """
    Xv = X.value if isinstance(X, FieldGerm) else np.asarray(X, dtype=float)
    G = closed_christoffel(spec, kind, x)
    return np.einsum("...ka,...a->...k", Y.jac, Xv) + np.einsum("...kij,...i,...j->...k", G, Xv, Y.value)


_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFF = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def _check_oracle_domain(spec, kind, x, step):
    t, r, y = _split(x)
    if spec.domain is not None:
        lo, hi = spec.domain
        if np.any(r - 2 * step < lo) or np.any(r + 2 * step > hi):
            raise BoundaryError(f"oracle stencil (step {step}) leaves the radial domain {spec.domain}")
    if np.any(r - 2 * step <= 0):
        raise BoundaryError("oracle stencil reaches r <= 0")
    if kind == "sphere":
        theta = y[..., 0]
        if np.any(theta - 2 * step <= 0) or np.any(theta + 2 * step >= np.pi):
            raise BoundaryError("oracle stencil crosses a pole of the sphere chart")


def metric_derivatives(spec, kind, x, step=DEFAULT_STEP):
    """``dg[..., l, i, j] = d_l g~_ij`` by 4th-order central differences."""
    x = np.asarray(x, dtype=float)
    _check_oracle_domain(spec, kind, x, step)
    n = x.shape[-1]
    dg = np.zeros(x.shape[:-1] + (n, n, n))
    for l in range(n):
        for w, o in zip(_W1, _OFF):
            if w == 0.0:
                continue
            xs = x.copy()
            xs[..., l] += o * step
            dg[..., l, :, :] += w * ambient_metric(spec, kind, xs)
        dg[..., l, :, :] /= step
    return dg


def oracle_christoffel(spec, kind, x, step=DEFAULT_STEP):
    """``G^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`` from a
    finite-difference metric (4th order in ``step``)."""
    x = np.asarray(x, dtype=float)
    dg = metric_derivatives(spec, kind, x, step)
    ginv = np.linalg.inv(ambient_metric(spec, kind, x))
    lower = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def oracle_covderiv(spec, kind, x, X, Y, step=DEFAULT_STEP):
    Xv = X.value if isinstance(X, FieldGerm) else np.asarray(X, dtype=float)
    G = oracle_christoffel(spec, kind, x, step)
    return np.einsum("...ka,...a->...k", Y.jac, Xv) + np.einsum("...kij,...i,...j->...k", G, Xv, Y.value)


def null_weingarten_factor(spec, t, r):
    """``(xi lambda / lambda, eta lambda / lambda)``; the first is the null
    Weingarten factor of the ``D_xi`` leaves, the second that of ``D_eta``."""
    jet = base2d.warp_jet(spec, t, r)
    return jet.xi_lam / jet.lam, jet.eta_lam / jet.lam


def _frame_germ(spec, x, which):
    t, r, y = _split(x)
    pv = base2d.profile_eval(spec, r)
    n = x.shape[-1]
    val = np.zeros(r.shape + (n,))
    jac = np.zeros(r.shape + (n, n))
    if which == "xi":
        val[..., 0] = 1.0 / pv.f2
        val[..., 1] = 1.0
        jac[..., 0, 1] = -pv.df2_dr / pv.f2 ** 2
    else:
        val[..., 0] = 0.5
        val[..., 1] = -0.5 * pv.f2
        jac[..., 1, 1] = -0.5 * pv.df2_dr
    return FieldGerm(val, jac)


def xi_field(spec, x):
    """Germ of the lift of ``xi = dt/f^2 + dr``."""
    return _frame_germ(spec, np.asarray(x, dtype=float), "xi")


def eta_field(spec, x):
    """Germ of the lift of ``eta = (dt - f^2 dr)/2``."""
    return _frame_germ(spec, np.asarray(x, dtype=float), "eta")


def recurrence_residual(spec, kind, x, which="xi", step=DEFAULT_STEP):
    """Max-norm of ``nabla~_X xi - alpha(X) xi`` (or ``nabla~_X eta + alpha(X) eta``)
    over ``X in {d_t, d_r}``, computed with the oracle connection."""
    x = np.asarray(x, dtype=float)
    t, r, _ = _split(x)
    germ = _frame_germ(spec, x, which)
    alpha = base2d.alpha_form(spec, t, r)
    sign = 1.0 if which == "xi" else -1.0
    n = x.shape[-1]
    worst = 0.0
    for b in range(2):
        X = np.zeros(x.shape[:-1] + (n,))
        X[..., b] = 1.0
        lhs = oracle_covderiv(spec, kind, x, X, germ, step)
        rhs = sign * alpha[..., b][..., None] * germ.value
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def involutivity_residual(spec, kind, x, fields, step=DEFAULT_STEP):
    """``max |g~([E1, E2], xi)|`` for callables ``E(x) -> (..., n)`` that take
    values in ``xi^perp``.  Brackets use central differences of the fields."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]

    def jac(E):
        J = np.zeros(x.shape[:-1] + (n, n))
        for a in range(n):
            acc = 0.0
            for w, o in zip(_W1, _OFF):
                if w == 0.0:
                    continue
                xs = x.copy()
                xs[..., a] += o * step
                acc = acc + w * E(xs)
            J[..., :, a] = acc / step
        return J

    _check_oracle_domain(spec, kind, x, step)
    xi = xi_field(spec, x).value
    vals = [E(x) for E in fields]
    jacs = [jac(E) for E in fields]
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            br = np.einsum("...ka,...a->...k", jacs[j], vals[i]) - np.einsum("...ka,...a->...k", jacs[i], vals[j])
            worst = max(worst, float(np.max(np.abs(ambient_inner(spec, kind, x, br, xi)))))
    return worst
