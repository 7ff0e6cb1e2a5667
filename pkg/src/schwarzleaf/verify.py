"""Verification harness: pointwise and integral checks plus refinement studies.

Each ``check_*`` function works on a single immersion and returns a
:class:`CheckResult`.  :class:`Scenario` knows how to rebuild one immersion
family at several resolutions; :func:`run_check` runs a registered check
over those resolutions and fits observed convergence orders.
"""

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Dict, List, Optional

import numpy as np

from . import base2d, extrinsic, immersion, warped
from .errors import ConfigError, SignError, UnknownCheck, UnsupportedDimension, UnsupportedSurface
from .fiber import build_fiber, first_eigenvalue, grad_norm2, laplacian, scalar_curvature

__all__ = [
    "CheckResult",
    "Scenario",
    "fit_order",
    "check_divergence_identity",
    "check_integral_inequality",
    "check_scalar_curvature_identity",
    "check_gauss_bonnet",
    "check_prop_080723B",
    "check_minimal_implies_slice",
    "check_eigenvalue_hypothesis",
    "check_mean_curvature_oracle",
    "check_shape_operator",
    "check_trapped_classification",
    "check_parallel_H",
    "check_factoring",
    "check_base_identities",
    "convergence_study",
    "run_check",
    "list_checks",
    "describe_check",
    "CHECKS",
    "random_profile_expr",
    "random_perturbation_expr",
]

POINTWISE, INTEGRAL, INEQUALITY, CLASSIFICATION = (
    "PointwiseIdentity", "IntegralIdentity", "Inequality", "Classification")
ROUNDOFF = 1e-11


@dataclass
class CheckResult:
    name: str
    kind: str
    residual: float
    tolerance: float
    verdict: str
    refinement_orders: Optional[List[float]] = None
    levels: List[dict] = field(default_factory=list)
    details: Dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self):
        return self.verdict == "pass"

    def as_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "residual": _clean(self.residual),
            "tolerance": _clean(self.tolerance),
            "verdict": self.verdict,
            "refinement_orders": self.refinement_orders,
            "levels": _clean(self.levels),
            "details": _clean(self.details),
            "note": self.note,
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _verdict(ok):
    return "pass" if ok else "fail"


def fit_order(hs, residuals, floor=0.0):
    """Least-squares slope of ``log residual`` against ``log h`` over the
    entries above ``floor``; ``None`` if fewer than two remain."""
    hs = np.asarray(hs, dtype=float)
    rs = np.abs(np.asarray(residuals, dtype=float))
    keep = rs > floor
    if keep.sum() < 2:
        return None
    slope = np.polyfit(np.log(hs[keep]), np.log(rs[keep]), 1)[0]
    return float(slope)


def _require_closed(im):
    if not getattr(im.fd, "closed", False):
        raise UnsupportedSurface("integral checks need a closed triangle mesh")


def _require_surface_leaf_radial(im):
    if im.fd.dim != 2 or im.m != 2:
        raise UnsupportedDimension("check needs a two-dimensional fiber")
    if im.spec.warping.kind != "radial":
        raise UnsupportedDimension("check needs lambda = r")
    if not im.provenance.is_leaf:
        raise UnsupportedDimension("check needs leaf or slice provenance")


def _ambient_inner(im, a, b):
    return warped.ambient_inner(im.spec, im.fd.kind, im.ambient_points(), a, b)


def _divergence_terms(im, H=None):
    """Integrands whose integrals vanish for the ``xi`` and ``eta`` identities."""
    fr = immersion.frame_decomposition(im)
    if H is None and im.provenance.is_leaf:
        # |grad v|^2 from the same jets as the frame, Laplacian from the mesh:
        # the leaf integrand then reduces to a discrete divergence
        gv = im.gradient("v")
        lap = laplacian(im.fd, im.phi, im.v)
        H = extrinsic.mean_curvature(im, im.inner(gv, gv), lap).vector
    elif H is None:
        H = extrinsic.second_fundamental_form_oracle(im).H
    w = im.warp
    n = im.m
    ffp = im.profile.ffp
    xe = im.inner(fr.xi_tan, fr.eta_tan)
    xx = im.inner(fr.xi_tan, fr.xi_tan)
    h_xi = _ambient_inner(im, H, fr.xi_perp)
    h_eta = _ambient_inner(im, H, fr.eta_perp)
    xr, er = w.xi_lam / w.lam, w.eta_lam / w.lam
    xi_terms = [n * h_xi, xr * (n + 2 * xe), -ffp * xx]
    eta_terms = [n * h_eta, er * (n + 2 * xe), ffp * xe]
    return xi_terms, eta_terms, fr


def check_divergence_identity(im, rel_tol=1e-3, H=None):
    """Integrated divergence identities for ``xi^T`` and ``eta^T``.

    ``int [n g~(H, xi^perp) + (xi lam/lam)(n + 2 g(xi^T, eta^T)) - f f' |xi^T|^2] = 0``
    and its ``eta`` analogue with ``+ f f' g(xi^T, eta^T)``; the residual is
    the larger of the two, relative to the integral of the absolute terms.
    """
    _require_closed(im)
    xi_terms, eta_terms, _ = _divergence_terms(im, H)
    out = {}
    for key, terms in (("xi", xi_terms), ("eta", eta_terms)):
        total = im.integrate(sum(terms))
        scale = sum(im.integrate(np.abs(t)) for t in terms)
        out[key] = (total, scale, abs(total) / scale if scale > 0 else abs(total))
    res = max(out["xi"][2], out["eta"][2])
    pointwise = float(np.max(np.abs(sum(xi_terms)))) if im.provenance.is_leaf else None
    return CheckResult("divergence_identity", INTEGRAL, res, rel_tol, _verdict(res <= rel_tol), details={
        "integral_xi": out["xi"][0], "integral_eta": out["eta"][0],
        "scale_xi": out["xi"][1], "scale_eta": out["eta"][1],
        "leaf_pointwise_max": pointwise,
    })


def _fprime_sign(im):
    ffp = im.profile.ffp
    if np.all(ffp > 0):
        return 1
    if np.all(ffp < 0):
        return -1
    if np.all(ffp == 0):
        return 0
    raise SignError("f' changes sign over the range of v")


def check_integral_inequality(im, rel_tol=1e-6, factor_tol=None):
    """Sign of ``int [n g~(H, xi^perp) + (xi lam/lam)(n + 2 g(xi^T, eta^T))]``
    and the equality case, cross-checked against :func:`factoring_test`."""
    _require_closed(im)
    sign = _fprime_sign(im)
    xi_terms, _, _ = _divergence_terms(im)
    integrand = xi_terms[0] + xi_terms[1]
    total = im.integrate(integrand)
    scale = im.integrate(np.abs(xi_terms[0])) + im.integrate(np.abs(xi_terms[1]))
    tol = rel_tol * scale
    equality = abs(total) <= tol
    label = immersion.factoring_test(im, factor_tol)[0]
    factors = label in (immersion.LEAF_XI, immersion.SLICE)
    if sign > 0:
        sign_ok = total >= -tol
    elif sign < 0:
        sign_ok = total <= tol
    else:
        sign_ok = equality
    expected_eq = factors if sign != 0 else True
    ok = sign_ok and (equality == expected_eq)
    return CheckResult("integral_inequality", INEQUALITY, total / scale if scale else total, rel_tol,
                       _verdict(ok), details={
                           "integral": total, "scale": scale, "fprime_sign": sign,
                           "equality": equality, "factoring": label, "sign_ok": sign_ok,
                       })


def _mask(im):
    fd = im.fd
    return fd.interior(3) if fd.backend == "chartgrid" else np.ones(fd.n, dtype=bool)


def check_scalar_curvature_identity(im, tol=1e-3):
    """Pointwise ``S^{g_F} = v^2 [S^g + 2(m-1) Delta v / v - m(m-1)|grad v|^2/v^2]``
    and agreement of the two ``|H|^2`` routes (``lambda = r``)."""
    _require_surface_leaf_radial(im)
    m = im.m
    v = im.v
    S_F = scalar_curvature(im.fd)
    S_g = scalar_curvature(im.fd, v)
    g2 = grad_norm2(im.fd, v, v)
    lap = laplacian(im.fd, v, v)
    rhs = v ** 2 * (S_g + 2 * (m - 1) * lap / v - m * (m - 1) * g2 / v ** 2)
    mask = _mask(im)
    r1 = float(np.max(np.abs(S_F - rhs)[mask]))
    mc = extrinsic.mean_curvature(im, g2, lap)
    n_frame = extrinsic.mean_curvature_norm(im, "frame", mc)
    n_curv = extrinsic.mean_curvature_norm(im, "curvature")
    r2 = float(np.max(np.abs(n_frame - n_curv)[mask]))
    res = max(r1, r2)
    return CheckResult("scalar_curvature_identity", POINTWISE, res, tol, _verdict(res <= tol), details={
        "conformal_relation_residual": r1, "norm_routes_residual": r2,
    })


def check_gauss_bonnet(im, rel_tol=1e-3):
    """``int |H|^2 dmu = int f^2/v^2 dmu`` for compact surfaces, ``lambda = r``."""
    _require_closed(im)
    _require_surface_leaf_radial(im)
    lhs = im.integrate(extrinsic.mean_curvature_norm(im))
    rhs = im.integrate(im.profile.f2 / im.v ** 2)
    gap = abs(lhs - rhs) / abs(rhs)
    return CheckResult("gauss_bonnet", INTEGRAL, gap, rel_tol, _verdict(gap <= rel_tol),
                       details={"int_H2": lhs, "int_f2_over_v2": rhs})


def check_prop_080723B(im, rel_tol=1e-2, abs_tol=1e-9):
    """``int (S^{g_F} - v^2 S^g) dmu = -(m-1)(m+2) int |grad v|^2 dmu <= 0``
    with curvatures from angle defects and the gradient from the mesh."""
    _require_closed(im)
    _require_surface_leaf_radial(im)
    m = im.m
    v = im.v
    direct = im.integrate(scalar_curvature(im.fd) - v ** 2 * scalar_curvature(im.fd, v))
    rhs = -(m - 1) * (m + 2) * im.integrate(grad_norm2(im.fd, v, v))
    scale = im.integrate(np.abs(scalar_curvature(im.fd)))
    if abs(rhs) > abs_tol * scale:
        res = abs(direct - rhs) / abs(rhs)
        ok = res <= rel_tol and direct <= abs_tol * scale
    else:
        res = abs(direct - rhs) / scale
        ok = res <= abs_tol
    return CheckResult("prop_080723B", INTEGRAL, res, rel_tol if abs(rhs) > abs_tol * scale else abs_tol,
                       _verdict(ok), details={"direct": direct, "gradient_route": rhs})


def check_minimal_implies_slice(im, tol=1e-8):
    """Compact minimal leaf sections are slices at critical points of
    ``lambda``; for ``lambda = r`` the ``ell`` coefficient never vanishes."""
    mc = extrinsic.mean_curvature(im)
    size = np.abs(mc.a) + np.abs(mc.b)
    details = {"min_H_size": float(size.min()), "min_abs_ell_coefficient": float(np.abs(mc.b).min())}
    if im.spec.warping.kind == "radial":
        ok = float(np.abs(mc.b).min()) > 0
        return CheckResult("minimal_implies_slice", CLASSIFICATION, float(np.abs(mc.b).min()), 0.0,
                           _verdict(ok), details=details, note="lambda = r admits no minimal leaf sections")
    if float(size.max()) > tol:
        return CheckResult("minimal_implies_slice", CLASSIFICATION, float(size.max()), tol, "pass",
                           details=details, note="H does not vanish; hypothesis not met")
    label = immersion.factoring_test(im)[0]
    grad_lam = base2d.base_gradients(im.spec, im.u, im.v)["lambda"]
    crit = float(np.max(np.abs(grad_lam)))
    ok = label == immersion.SLICE and crit <= tol
    details.update({"factoring": label, "max_grad_lambda": crit})
    return CheckResult("minimal_implies_slice", CLASSIFICATION, crit, tol, _verdict(ok), details=details)


def check_eigenvalue_hypothesis(im, c=None, rel_tol=1e-2):
    """Ricci window ``0 < Ric^g <= (n-1)(2 - n c/lambda_1) c`` of the rigidity
    statement for umbilic leaf sections; ``Ric = (S/2) g`` on surfaces.
    ``c`` defaults to ``lambda_1 / n``.  Only the hypothesis is evaluated."""
    _require_closed(im)
    if im.fd.dim != 2:
        raise UnsupportedDimension("eigenvalue window implemented for surfaces")
    if not im.provenance.is_leaf:
        raise UnsupportedDimension("eigenvalue window needs a conformal (leaf or slice) induced metric")
    n = 2
    phi = im.phi
    lam1, mult = first_eigenvalue(im.fd, phi)
    c = lam1 / n if c is None else float(c)
    K = 0.5 * scalar_curvature(im.fd, phi)
    upper = (n - 1) * (2 - n * c / lam1) * c
    lower_ok = float(K.min()) > 0
    upper_ok = float(K.max()) <= upper + rel_tol * abs(upper)
    excess = float(K.max() - upper) / abs(upper) if upper else float("inf")
    return CheckResult("eigenvalue_hypothesis", CLASSIFICATION, excess, rel_tol,
                       _verdict(lower_ok and upper_ok), details={
                           "lambda1": lam1, "multiplicity": mult, "c": c,
                           "ricci_min": float(K.min()), "ricci_max": float(K.max()),
                           "upper_bound": upper,
                       }, note="hypothesis only; no isometry claim")


def check_mean_curvature_oracle(im, rel_tol=1e-5):
    """Closed-form null-frame coefficients of ``H`` against the oracle
    trace of the finite-difference second fundamental form."""
    o = extrinsic.second_fundamental_form_oracle(im)
    a, b, _ = extrinsic.oracle_null_coefficients(im, o)
    mc = extrinsic.mean_curvature(im)
    mask = _mask(im)
    scale = max(float(np.abs(mc.a).max()), float(np.abs(mc.b).max()))
    res = max(float(np.abs(a - mc.a)[mask].max()), float(np.abs(b - mc.b)[mask].max())) / scale
    # H in the {n0, n1} basis equals H in the {n0, ell} basis (exact algebra)
    fr = immersion.frame_decomposition(im)
    n0, n1 = _null_pair(im, fr)
    alt = mc.a[:, None] * n0 + mc.b[:, None] * fr.ell
    change = float(np.max(np.abs(alt - (mc.a_perp[:, None] * n0 + mc.b_perp[:, None] * n1))))
    return CheckResult("mean_curvature_oracle", POINTWISE, res, rel_tol, _verdict(res <= rel_tol),
                       details={"frame_change_residual": change, "scale": scale})


def _null_pair(im, fr):
    xi, eta = extrinsic._null_vectors(im)
    if fr.family == "xi":
        return xi, fr.eta_perp
    return eta, fr.xi_perp


def check_shape_operator(im, rel_tol=1e-5, exact_tol=1e-12):
    """Closed ``A_{n0} = -(n0 lam/lam) Id`` (exact against the null Weingarten
    factor) and its oracle counterpart; plus the trace identity
    ``trace A_zeta = m g~(H, zeta)`` in closed form."""
    fam = extrinsic._family(im)
    if fam is None:
        raise ConfigError("shape operator check needs a leaf section")
    ops = extrinsic.shape_operators_closed(im, hessian_part=im.fd.backend == "chartgrid")
    xr, er = warped.null_weingarten_factor(im.spec, im.u, im.v)
    factor = xr if fam == "xi" else er
    A = ops[fam]
    exact = float(np.max(np.abs(A + factor[:, None, None] * np.eye(2))))
    mc = extrinsic.mean_curvature(im)
    # trace(A_n0) = m g~(H, n0) = -m b
    trace_gap = float(np.max(np.abs(np.trace(A, axis1=1, axis2=2) + im.m * mc.b)))
    xi, eta = extrinsic._null_vectors(im)
    n0 = xi if fam == "xi" else eta
    mask = _mask(im)
    Ao = extrinsic.oracle_shape_operator(im, n0)
    oracle = float(np.max(np.abs(Ao - A)[mask]))
    details = {"closed_exact_residual": exact, "oracle_residual": oracle, "trace_residual": trace_gap}
    if im.fd.backend == "chartgrid":
        fr = immersion.frame_decomposition(im)
        n1 = fr.eta_perp if fam == "xi" else fr.xi_perp
        key = "eta_perp" if fam == "xi" else "xi_perp"
        tr = np.trace(ops[key], axis1=1, axis2=2)
        rhs = im.m * _ambient_inner(im, mc.vector, n1)
        details["trace_residual_second"] = float(np.max(np.abs(tr - rhs)[mask]))
        details["oracle_residual_second"] = float(np.max(np.abs(extrinsic.oracle_shape_operator(im, n1) - ops[key])[mask]))
    ok = exact <= exact_tol and oracle <= rel_tol and trace_gap <= exact_tol
    return CheckResult("shape_operator", POINTWISE, oracle, rel_tol, _verdict(ok), details=details)


def check_trapped_classification(im, expect=None, rel_tol=1e-6):
    """Causal class of ``H`` per point, consistency with the marginal
    predicate ``2 v Delta v - m (f^2 + |grad v|^2) = 0`` (``lambda = r``) and an
    optional expected global verdict."""
    mc = extrinsic.mean_curvature(im)
    rep = extrinsic.causal_classification(im, mc, rel_tol)
    details = {
        "verdict": rep.verdict,
        "counts": {k: int(np.sum(rep.classes == k)) for k in sorted(set(rep.classes.tolist()))},
        "min_norm2": float(rep.norm2.min()), "max_norm2": float(rep.norm2.max()),
        "tol": rep.tol, "orientation": rep.convention,
    }
    ok = True
    if im.spec.warping.kind == "radial":
        res = extrinsic.marginal_residual(im, mc.grad2, mc.lap)
        band = im.m * im.v ** 2 * rep.tol
        # |H|^2 = -res/(m v^2): classes must follow the sign of the residual
        pred = np.where(res < -band, extrinsic.UNTRAPPED,
                        np.where(res > band, extrinsic.TRAPPED, extrinsic.MARGINAL))
        got = np.where(rep.classes == extrinsic.MINIMAL, extrinsic.MARGINAL, rep.classes)
        agree = pred == got
        details["marginal_predicate_agreement"] = float(agree.mean())
        details["max_marginal_residual"] = float(res.max())
        ok = bool(agree.all())
    if expect is not None:
        ok = ok and rep.verdict == expect
        details["expected"] = expect
    return CheckResult("trapped_classification", CLASSIFICATION, float(rep.norm2.min()), rep.tol,
                       _verdict(ok), details=details)


def check_parallel_H(im, rel_tol=1e-5, zero_tol=1e-12):
    """``g~(nabla^perp H, n0)``: identically zero for ``lambda = r``; otherwise
    the closed form is compared with the oracle (ChartGrid)."""
    closed = extrinsic.parallel_H_residual(im)
    size = float(np.max(np.abs(closed)))
    details = {"max_closed": size}
    if im.spec.warping.kind == "radial":
        ok = size <= zero_tol
        res, tol = size, zero_tol
    else:
        res, tol, ok = size, rel_tol, True
    if im.fd.backend == "chartgrid":
        mask = _mask(im)
        orc = extrinsic.oracle_parallel_H_residual(im)
        gap = float(np.max(np.abs(orc - closed)[mask]))
        details["oracle_gap"] = gap
        details["max_oracle"] = float(np.max(np.abs(orc)[mask]))
        if im.spec.warping.kind != "radial":
            scale = max(size, 1e-300)
            ok = gap / scale <= rel_tol if size > zero_tol else gap <= rel_tol
    return CheckResult("parallel_H", POINTWISE, res, tol, _verdict(ok), details=details)


_EXPECTED_FACTOR = {
    immersion.LEAF_XI: immersion.LEAF_XI,
    immersion.LEAF_ETA: immersion.LEAF_ETA,
    immersion.SLICE: immersion.SLICE,
    immersion.GRAPH: immersion.GENERIC,
}


def check_factoring(im, expect=None, tol=None):
    """Leaf detection by the gradient relations ``grad v = +- f^2 grad u``."""
    label, res, used = immersion.factoring_test(im, tol)
    if expect is None:
        expect = _EXPECTED_FACTOR[im.provenance.kind]
        # a leaf section with constant v is also a slice
        allowed = {expect, immersion.SLICE} if im.provenance.is_leaf else {expect}
    else:
        allowed = {expect}
    return CheckResult("factoring", CLASSIFICATION, float(min(res["xi"].max(), res["eta"].max())), used,
                       _verdict(label in allowed), details={"label": label, "expected": sorted(allowed)})


def _relative_null(spec, r, X):
    """``|g_B(X, X)|`` relative to the size of its two cancelling terms."""
    f2 = base2d.profile_eval(spec, r).f2
    tt, rr = f2 * X[..., 0] ** 2, X[..., 1] ** 2 / f2
    return float(np.max(np.abs(rr - tt) / (tt + rr)))


def check_base_identities(spec, samples=1_000_000, seed=0, tol=1e-12):
    """Frame and recurrence identities of the base and, for the Schwarzschild
    profile in four dimensions, tortoise quadrature against the closed form."""
    rng = np.random.default_rng(seed)
    lo, hi = spec.domain
    hi_eff = min(hi, lo + 100.0)
    pad = 1e-6 * (hi_eff - lo)
    r = rng.uniform(lo + pad, hi_eff - pad, samples)
    t = rng.uniform(-10, 10, samples)
    xi, eta = base2d.lightlike_frame(spec, t, r)
    alpha = base2d.alpha_form(spec, t, r)
    cross = float(np.max(np.abs(base2d.base_inner(spec, r, xi, eta) + 1.0)))
    null = max(_relative_null(spec, r, xi), _relative_null(spec, r, eta))
    a_xi = float(np.max(np.abs(np.sum(alpha * xi, -1))))
    # alpha(eta) is f f', not zero: eta is only pregeodesic
    ffp = base2d.profile_eval(spec, r).ffp
    a_eta = np.sum(alpha * eta, -1)
    a_eta_gap = float(np.max(np.abs(a_eta - ffp) / np.maximum(1.0, np.abs(ffp))))
    # recurrence via the oracle connection at a few interior points
    step = warped.DEFAULT_STEP
    k = 64
    rr = rng.uniform(lo + 0.05 * (hi_eff - lo), hi_eff - 0.05 * (hi_eff - lo), k)
    x = np.stack([rng.uniform(-1, 1, k), rr, rng.uniform(0.5, 2.6, k), rng.uniform(0, 6, k)], axis=1)
    rec = max(warped.recurrence_residual(spec, "sphere", x, "xi", step),
              warped.recurrence_residual(spec, "sphere", x, "eta", step))
    details = {"xi_eta_residual": cross, "null_residual": null, "alpha_xi_residual": a_xi,
               "alpha_eta_max": float(np.max(np.abs(a_eta))), "alpha_eta_minus_ffp": a_eta_gap,
               "recurrence_residual": rec}
    ok = cross <= tol and null <= tol and a_xi <= tol and a_eta_gap <= tol and rec <= 1e-6
    if spec.mass > 0 and spec.charge == 0 and spec.cosmo == 0 and spec.m == 2:
        M = spec.mass
        rs = np.linspace(max(lo, 2 * M) + 0.25 * M, min(hi, 40 * M), 200)
        closed = rs + 2 * M * np.log(rs / (2 * M) - 1)
        ref = rs[0]
        quad = base2d.tortoise(spec, rs, r_ref=ref) + (ref + 2 * M * np.log(ref / (2 * M) - 1))
        tgap = float(np.max(np.abs(quad - closed)))
        details["tortoise_residual"] = tgap
        ok = ok and tgap <= 1e-10
    res = max(cross, null, a_xi, a_eta_gap)
    return CheckResult("base_identities", POINTWISE, res, tol, _verdict(ok), details=details)


# --- scenarios ----------------------------------------------------------------

@dataclass
class Scenario:
    """One immersion family, buildable at any resolution.

    ``provenance`` is ``"leaf_xi"``, ``"leaf_eta"``, ``"slice"`` or
    ``"graph"``; ``u``/``v`` are expressions (``Expr``) or constants.
    """

    name: str
    spec: base2d.ProfileSpec
    provenance: str
    fiber_kind: str = "sphere"
    v: object = None
    u: object = None
    c: float = 0.0
    t0: float = 0.0
    r0: float = None
    levels: List[int] = field(default_factory=lambda: [2, 3, 4, 5])
    chart_band: tuple = (np.pi / 6, 5 * np.pi / 6)
    chart_shapes: List[tuple] = field(default_factory=lambda: [(33, 64), (65, 128), (129, 256)])
    checks: List[str] = field(default_factory=list)
    tolerances: Dict[str, float] = field(default_factory=dict)
    expect: Dict[str, object] = field(default_factory=dict)
    seed: int = 0

    def mesh(self, level):
        key = "level" if self.fiber_kind == "sphere" else "n"
        return build_fiber({"backend": "trimesh", "kind": self.fiber_kind, key: level})

    def grid(self, shape):
        d = {"backend": "chartgrid", "kind": self.fiber_kind, "shape": list(shape)}
        if self.fiber_kind == "sphere":
            d["band"] = list(self.chart_band)
        return build_fiber(d)

    def build(self, fd):
        p = self.provenance
        if p in ("leaf_xi", "leaf_eta"):
            return immersion.from_leaf_section(self.spec, p[5:], self.c, self.v, fd)
        if p == "slice":
            return immersion.from_slice(self.spec, self.t0, self.r0, fd)
        if p == "graph":
            return immersion.from_graph(self.spec, self.u if self.u is not None else 0.0, self.v, fd)
        raise ConfigError(f"unknown provenance {p!r}")

    def resolutions(self, backend):
        if backend == "trimesh":
            return [(lvl, self.mesh) for lvl in self.levels]
        return [(tuple(s), self.grid) for s in self.chart_shapes]


@dataclass(frozen=True)
class CheckSpec:
    name: str
    kind: str
    backend: str
    func: Callable
    default_tol: float
    min_order: Optional[float]
    summary: str


CHECKS: Dict[str, CheckSpec] = {}


def _register(name, kind, backend, func, tol, min_order, summary):
    CHECKS[name] = CheckSpec(name, kind, backend, func, tol, min_order, summary)


_register("mean_curvature_oracle", POINTWISE, "chartgrid", check_mean_curvature_oracle, 1e-5, 2.0,
          "closed-form mean curvature of leaf sections vs finite-difference second fundamental form")
_register("shape_operator", POINTWISE, "chartgrid", check_shape_operator, 1e-5, None,
          "shape operators along the null generator and the transverse normal; trace identity")
_register("gauss_bonnet", INTEGRAL, "trimesh", check_gauss_bonnet, 1e-3, 1.9,
          "integral of |H|^2 equals integral of f^2/v^2 on compact surfaces (lambda = r)")
_register("scalar_curvature_identity", POINTWISE, "chartgrid", check_scalar_curvature_identity, 1e-3, 2.0,
          "conformal scalar-curvature relation and the curvature route to |H|^2 (lambda = r)")
_register("divergence_identity", INTEGRAL, "trimesh", check_divergence_identity, 1e-3, 2.0,
          "integrated divergence identities for the tangent parts of xi and eta")
_register("integral_inequality", INEQUALITY, "trimesh", check_integral_inequality, 1e-6, None,
          "integral inequality for f' signed; equality iff the immersion lies in a D_xi leaf")
_register("prop_080723B", INTEGRAL, "trimesh", check_prop_080723B, 1e-2, 1.9,
          "integral of S^{g_F} - v^2 S^g equals -(m-1)(m+2) times the Dirichlet energy of v")
_register("minimal_implies_slice", CLASSIFICATION, "trimesh", check_minimal_implies_slice, 1e-8, None,
          "compact minimal leaf sections are slices at critical points of lambda")
_register("eigenvalue_hypothesis", CLASSIFICATION, "trimesh", check_eigenvalue_hypothesis, 1e-2, None,
          "Ricci window involving the first Laplace eigenvalue (hypothesis only)")
_register("trapped_classification", CLASSIFICATION, "trimesh", check_trapped_classification, 1e-6, None,
          "causal character of H and agreement with the marginally-trapped predicate")
_register("parallel_H", POINTWISE, "chartgrid", check_parallel_H, 1e-5, None,
          "normal derivative of H along the null generator (zero for lambda = r)")
_register("factoring", CLASSIFICATION, "trimesh", check_factoring, None, None,
          "detection of leaf sections and slices from the gradient relations")
_register("base_identities", POINTWISE, "none", None, 1e-12, None,
          "null frame, recurrence form and tortoise quadrature of the base")


def _anchors():
    text = resources.files("schwarzleaf").joinpath("anchors.json").read_text()
    return json.loads(text)


def list_checks():
    return sorted(CHECKS)


def describe_check(name):
    try:
        spec = CHECKS[name]
    except KeyError:
        raise UnknownCheck(name) from None
    anchor = _anchors().get(name, "")
    lines = [f"{name} ({spec.kind}, {spec.backend})", f"  {spec.summary}"]
    if anchor:
        lines.append(f"  source: {anchor}")
    if spec.default_tol is not None:
        lines.append(f"  default tolerance: {spec.default_tol:g}")
    if spec.min_order is not None:
        lines.append(f"  required observed order: {spec.min_order:g}")
    return "\n".join(lines)


def _call(cs, im, tol, scn):
    kwargs = {}
    if cs.name in ("trapped_classification", "factoring"):
        kwargs["expect"] = scn.expect.get(cs.name)
    if cs.name == "eigenvalue_hypothesis" and "eigen_c" in scn.expect:
        kwargs["c"] = scn.expect["eigen_c"]
    if tol is not None:
        first = {"scalar_curvature_identity": "tol", "minimal_implies_slice": "tol",
                 "factoring": "tol"}.get(cs.name, "rel_tol")
        kwargs[first] = tol
    return cs.func(im, **kwargs)


def convergence_study(scn, name, tol=None):
    """Run check ``name`` at every resolution of the scenario; the verdict is
    taken at the finest level, with a fitted order where one is required."""
    cs = CHECKS[name]
    if cs.backend == "none":
        return check_base_identities(scn.spec, seed=scn.seed)
    tol = scn.tolerances.get(name, tol)
    res_list = scn.resolutions(cs.backend)
    if cs.min_order is None:
        res_list = res_list[-1:]
    rows, results = [], []
    for key, make in res_list:
        fd = make(key)
        im = scn.build(fd)
        r = _call(cs, im, tol, scn)
        results.append(r)
        rows.append({"resolution": key if np.ndim(key) == 0 else list(key), "h": fd.h,
                     "residual": r.residual, "verdict": r.verdict})
    final = results[-1]
    orders = None
    ok = final.passed
    note = final.note
    if cs.min_order is not None:
        hs = [row["h"] for row in rows]
        rs = [row["residual"] for row in rows]
        order = fit_order(hs, rs, floor=ROUNDOFF)
        orders = [order] if order is not None else []
        if order is None:
            note = (note + "; " if note else "") + "residuals at round-off level, order not fitted"
        else:
            ok = ok and order >= cs.min_order
    return replace(final, refinement_orders=orders, levels=rows, verdict=_verdict(ok), note=note)


def run_check(scn, name, tol=None):
    if name not in CHECKS:
        raise UnknownCheck(name)
    return convergence_study(scn, name, tol)


# --- randomized suites --------------------------------------------------------

_SPHERE_MODES = [(1, -1), (1, 0), (1, 1), (2, -2), (2, -1), (2, 0), (2, 1), (2, 2)]
_TORUS_MODES = ["cos(a)", "sin(a)", "cos(b)", "sin(b)", "cos(a)*cos(b)", "sin(a)*sin(b)"]


def random_perturbation_expr(rng, scale, degree=2, kind="sphere"):
    """Seeded combination ``sum c_k Y_k`` of low-order modes with
    ``sum |c_k| <= scale``; every mode is bounded by 1 on the fiber."""
    if kind == "sphere":
        modes = [f"harm({l}, {m})" for l, m in _SPHERE_MODES if l <= degree]
    else:
        modes = _TORUS_MODES if degree >= 2 else _TORUS_MODES[:4]
    coef = rng.normal(size=len(modes))
    coef *= scale * rng.uniform(0.5, 1.0) / np.sum(np.abs(coef))
    return " + ".join(f"({c:.17g})*{mode}" for c, mode in zip(coef, modes))


def random_profile_expr(rng, base, amplitude=0.1, degree=2, kind="sphere"):
    """``base`` plus a seeded perturbation capped at ``amplitude * min(v)``."""
    # |perturbation| <= A and A <= amplitude * (base - A)
    cap = amplitude * base / (1.0 + amplitude)
    return f"{base:.17g} + " + random_perturbation_expr(rng, cap, degree, kind)
