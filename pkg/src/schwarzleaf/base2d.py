"""The two-dimensional Lorentzian base ``(B, g_B)``.

The base metric is ``g_B = -f^2(r) dt^2 + dr^2 / f^2(r)`` with the profile

    f^2(r) = 1 - 2M / r^(m-1) + q^2 / r^(2m-2) - 2 Lambda r^2 / (m (m+1)).

All routines are vectorized over ``t`` and ``r``; derivatives of ``f^2`` are
exact (closed form), finite differences live only in the oracles.  The
coordinate vector ``d/dt`` is taken to be future pointing.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from . import expr
from .errors import ConfigError, DomainError

__all__ = [
    "Warping",
    "ProfileSpec",
    "ProfileValues",
    "WarpJet",
    "profile_eval",
    "base_metric",
    "base_inner",
    "base_connection",
    "lightlike_frame",
    "alpha_form",
    "gauss_curvature",
    "tortoise",
    "base_gradients",
    "warp_jet",
    "exterior_components",
]


@dataclass(frozen=True)
class Warping:
    """Warping function ``lambda(t, r)``.

    ``kind`` is one of ``"radial"`` (lambda = r), ``"one"`` (lambda = 1) or
    ``"custom"``.  Custom warpings carry an expression in ``t`` and ``r``;
    first partials may be supplied, otherwise they (and all second partials)
    are derived symbolically from the expression.
    """

    kind: str = "radial"
    source: Optional[str] = None
    source_t: Optional[str] = None
    source_r: Optional[str] = None
    _exprs: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("radial", "one", "custom"):
            raise ConfigError(f"unknown warping kind {self.kind!r}")
        if self.kind != "custom":
            return
        if not self.source:
            raise ConfigError("custom warping needs an expression")
        lam = expr.parse(self.source)
        extra = lam.variables - {"t", "r"}
        if extra:
            raise ConfigError(f"warping expression uses unknown variables {sorted(extra)}")
        lt = expr.parse(self.source_t) if self.source_t else lam.diff("t")
        lr = expr.parse(self.source_r) if self.source_r else lam.diff("r")
        exprs = (lam, lt, lr, lt.diff("t"), lt.diff("r"), lr.diff("r"))
        object.__setattr__(self, "_exprs", exprs)

    @classmethod
    def custom(cls, source, source_t=None, source_r=None):
        return cls("custom", source, source_t, source_r)

    @property
    def label(self):
        return {"radial": "r", "one": "1"}.get(self.kind, self.source)

    def partials(self, t, r):
        """Return ``(lam, lam_t, lam_r, lam_tt, lam_tr, lam_rr)``."""
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        zero = np.zeros_like(r)
        if self.kind == "radial":
            return r.copy(), zero, zero + 1.0, zero, zero, zero
        if self.kind == "one":
            return zero + 1.0, zero, zero, zero, zero, zero
        return tuple(np.broadcast_to(e(t=t, r=r), r.shape).astype(float) for e in self._exprs)


@dataclass(frozen=True)
class ProfileSpec:
    """Parameters of a generalized Schwarzschild spacetime ``B x_lambda F``."""

    mass: float = 0.0
    charge: float = 0.0
    cosmo: float = 0.0
    fiber_dim: int = 2
    warping: Warping = field(default_factory=Warping)
    domain: Optional[Tuple[float, float]] = None
    tortoise_ref: Optional[float] = None

    def __post_init__(self):
        if self.mass < 0:
            raise ConfigError("mass must be nonnegative")
        if int(self.fiber_dim) != self.fiber_dim or self.fiber_dim < 2:
            raise ConfigError("fiber_dim must be an integer >= 2")
        if self.domain is not None:
            lo, hi = self.domain
            if not lo < hi:
                raise ConfigError(f"empty domain {self.domain}")

    @property
    def m(self):
        return int(self.fiber_dim)

    @property
    def ref(self):
        """Base point of the tortoise coordinate."""
        if self.tortoise_ref is not None:
            return float(self.tortoise_ref)
        if self.domain is None or not np.isfinite(self.domain[1]):
            raise ConfigError("tortoise_ref needed when the domain is unbounded")
        return 0.5 * (self.domain[0] + self.domain[1])

    def regular_at_origin(self):
        return self.mass == 0 and self.charge == 0

    def with_domain(self, scan, component=None, samples=4001):
        """Restrict to one connected component of ``{f^2 > 0}`` inside ``scan``."""
        comps = exterior_components(self, scan, samples)
        if not comps:
            raise DomainError(f"f^2 has no positive region in {tuple(scan)}")
        if component is None:
            if len(comps) > 1:
                raise ConfigError(
                    f"f^2 > 0 has {len(comps)} components in {tuple(scan)}: "
                    f"{comps}; choose one with 'component'")
            component = 0
        try:
            dom = comps[component]
        except IndexError:
            raise ConfigError(f"no component {component}; found {comps}") from None
        return replace(self, domain=dom)


class ProfileValues(NamedTuple):
    f2: np.ndarray
    df2_dr: np.ndarray
    ffp: np.ndarray
    d2f2_dr2: np.ndarray


class WarpJet(NamedTuple):
    """Warping function and its derivatives along the null frame."""

    lam: np.ndarray
    lam_t: np.ndarray
    lam_r: np.ndarray
    xi_lam: np.ndarray
    eta_lam: np.ndarray
    xi_xi_lam: np.ndarray
    eta_eta_lam: np.ndarray


def _f2_terms(spec, r):
    m = spec.m
    f2 = np.ones_like(r)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    if spec.mass:
        a = 2.0 * spec.mass
        f2 = f2 - a * r ** (1 - m)
        d1 = d1 + a * (m - 1) * r ** (-m)
        d2 = d2 - a * (m - 1) * m * r ** (-m - 1)
    if spec.charge:
        q2 = spec.charge ** 2
        f2 = f2 + q2 * r ** (2 - 2 * m)
        d1 = d1 + q2 * (2 - 2 * m) * r ** (1 - 2 * m)
        d2 = d2 + q2 * (2 - 2 * m) * (1 - 2 * m) * r ** (-2 * m)
    if spec.cosmo:
        c = 2.0 * spec.cosmo / (m * (m + 1))
        f2 = f2 - c * r * r
        d1 = d1 - 2.0 * c * r
        d2 = d2 - 2.0 * c
    return f2, d1, d2


def _check(spec, r, allow_origin=False):
    r = np.asarray(r, dtype=float)
    bad = ~np.isfinite(r) | ((r < 0) if allow_origin else (r <= 0))
    if np.any(bad):
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise DomainError(f"radial value r={r.ravel()[idx]!r} at index {idx} is not positive", idx)
    if spec.domain is not None:
        lo, hi = spec.domain
        out = (r < lo) | (r > hi)
        if np.any(out):
            idx = int(np.flatnonzero(out.ravel())[0])
            raise DomainError(
                f"radial value r={r.ravel()[idx]!r} at index {idx} leaves the exterior "
                f"domain {spec.domain}", idx)
    with np.errstate(divide="ignore", invalid="ignore"):
        f2, d1, d2 = _f2_terms(spec, r)
    bad = ~(f2 > 0)
    if np.any(bad):
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise DomainError(
            f"f^2 = {f2.ravel()[idx]:.6g} <= 0 at r={r.ravel()[idx]!r} (index {idx})", idx)
    return r, f2, d1, d2


def profile_eval(spec, r):
    """Return ``(f2, df2/dr, f f', d2f2/dr2)`` at ``r`` (exact derivatives)."""
    r, f2, d1, d2 = _check(spec, r)
    return ProfileValues(f2, d1, 0.5 * d1, d2)


def base_metric(spec, r):
    """Components ``diag(-f^2, 1/f^2)`` of ``g_B`` as a ``(..., 2, 2)`` array."""
    f2 = profile_eval(spec, r).f2
    g = np.zeros(f2.shape + (2, 2))
    g[..., 0, 0] = -f2
    g[..., 1, 1] = 1.0 / f2
    return g


def base_inner(spec, r, a, b):
    """``g_B(a, b)`` for base vectors given as ``(..., 2)`` arrays ``(a_t, a_r)``."""
    f2 = profile_eval(spec, r).f2
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -f2 * a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] / f2


def base_connection(spec, t, r):
    """Christoffel symbols ``G[..., k, i, j]`` of ``g_B`` (index 0 = t, 1 = r).

    Only three groups are nonzero::

        nabla_dt dt = f^3 f' dr,  nabla_dt dr = (f'/f) dt,  nabla_dr dr = -(f'/f) dr
    """
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    pv = profile_eval(spec, r)
    G = np.zeros(r.shape + (2, 2, 2))
    fp_over_f = pv.ffp / pv.f2
    G[..., 1, 0, 0] = pv.f2 * pv.ffp
    G[..., 0, 0, 1] = fp_over_f
    G[..., 0, 1, 0] = fp_over_f
    G[..., 1, 1, 1] = -fp_over_f
    return G


def lightlike_frame(spec, t, r):
    """Null vectors ``xi = dt/f^2 + dr`` and ``eta = (dt - f^2 dr)/2``.

    Both are future pointing and ``g_B(xi, eta) = -1``.
    """
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    f2 = profile_eval(spec, r).f2
    xi = np.stack([1.0 / f2, np.ones_like(f2)], axis=-1)
    eta = np.stack([0.5 * np.ones_like(f2), -0.5 * f2], axis=-1)
    return xi, eta


def alpha_form(spec, t, r):
    """The recurrence 1-form ``alpha = f'(f dt - dr/f)`` as ``(alpha_t, alpha_r)``."""
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    pv = profile_eval(spec, r)
    return np.stack([pv.ffp, -pv.ffp / pv.f2], axis=-1)


def gauss_curvature(spec, r):
    """``K^B = -((f')^2 + f f'') = -(f^2)''/2``."""
    return -0.5 * profile_eval(spec, r).d2f2_dr2


def base_gradients(spec, t, r):
    """Gradients of ``t``, ``r``, ``f`` and the warping function w.r.t. ``g_B``."""
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    pv = profile_eval(spec, r)
    zero = np.zeros_like(r)
    lam, lam_t, lam_r, *_ = spec.warping.partials(t, r)
    f = np.sqrt(pv.f2)
    fprime = pv.ffp / f
    return {
        "t": np.stack([-1.0 / pv.f2, zero], axis=-1),
        "r": np.stack([zero, pv.f2], axis=-1),
        "f": np.stack([zero, pv.f2 * fprime], axis=-1),
        "lambda": np.stack([-lam_t / pv.f2, pv.f2 * lam_r], axis=-1),
    }


def warp_jet(spec, t, r):
    """``lambda``, ``xi(lambda)``, ``eta(lambda)`` and the second derivatives
    ``xi(xi(lambda))``, ``eta(eta(lambda))`` at base points."""
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    pv = profile_eval(spec, r)
    f2, df2 = pv.f2, pv.df2_dr
    lam, lt, lr, ltt, ltr, lrr = spec.warping.partials(t, r)
    xi_lam = lt / f2 + lr
    eta_lam = 0.5 * (lt - f2 * lr)
    # xi = dt/f^2 + dr applied to xi_lam
    dt_xi = ltt / f2 + ltr
    dr_xi = ltr / f2 - lt * df2 / f2 ** 2 + lrr
    xi_xi = dt_xi / f2 + dr_xi
    # eta = (dt - f^2 dr)/2 applied to eta_lam
    dt_eta = 0.5 * (ltt - f2 * ltr)
    dr_eta = 0.5 * (ltr - df2 * lr - f2 * lrr)
    eta_eta = 0.5 * (dt_eta - f2 * dr_eta)
    if np.any(~(lam > 0)):
        idx = int(np.flatnonzero(~(lam > 0).ravel())[0])
        raise DomainError(f"warping function is not positive at index {idx}", idx)
    return WarpJet(lam, lt, lr, xi_lam, eta_lam, xi_xi, eta_eta)


def exterior_components(spec, scan, samples=4001):
    """Connected components of ``{r in scan : f^2(r) > 0}`` with zeros of
    ``f^2`` located by bracketing and bisection."""
    lo, hi = float(scan[0]), float(scan[1])
    if not 0 <= lo < hi:
        raise ConfigError(f"bad scan interval {tuple(scan)}")
    start = lo if lo > 0 or spec.regular_at_origin() else np.nextafter(lo, hi)
    rs = np.linspace(start, hi, samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = _f2_terms(spec, rs)[0]

    def f2(x):
        return float(_f2_terms(spec, np.asarray(x, dtype=float))[0])

    pos = vals > 0
    comps = []
    i = 0
    while i < samples:
        if not pos[i]:
            i += 1
            continue
        j = i
        while j + 1 < samples and pos[j + 1]:
            j += 1
        a = rs[i] if i == 0 else brentq(f2, rs[i - 1], rs[i], xtol=1e-14, rtol=1e-15)
        b = rs[j] if j == samples - 1 else brentq(f2, rs[j], rs[j + 1], xtol=1e-14, rtol=1e-15)
        comps.append((float(a), float(b)))
        i = j + 1
    return comps


# --- tortoise coordinate ----------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(fun, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = fun(x)
    k = half * (y @ _WK)
    g = half * (y @ _WG15)
    return k, np.abs(k - g)


def _adaptive(fun, a, b, abstol):
    """Vectorized adaptive Gauss-Kronrod (7, 15) over many intervals."""
    total = np.zeros(a.shape)
    owner = np.arange(a.size)
    width = np.abs(b - a)
    span = max(float(width.sum()), 1e-300)
    for _ in range(60):
        if owner.size == 0:
            return total
        k, err = _gk15(fun, a, b)
        budget = abstol * np.maximum(np.abs(b - a) / span, 1e-6)
        done = err <= budget
        np.add.at(total, owner[done], k[done])
        a, b, owner = a[~done], b[~done], owner[~done]
        mid = 0.5 * (a + b)
        a, b, owner = np.concatenate([a, mid]), np.concatenate([mid, b]), np.concatenate([owner, owner])
    raise DomainError("tortoise quadrature did not converge (interval touches a zero of f^2?)")


def tortoise(spec, r, r_ref=None, abstol=1e-13):
    """``r_*(r) = integral_{r_ref}^{r} du / f^2(u)`` by adaptive quadrature.

    Vectorized: the sample values are sorted and the integrals between
    consecutive values are accumulated, so the cost is one short adaptive
    integral per distinct value.
    """
    r_ref = spec.ref if r_ref is None else float(r_ref)
    r_arr = np.asarray(r, dtype=float)
    allow0 = spec.regular_at_origin()
    pts = np.concatenate([r_arr.ravel(), [r_ref]])
    _check(spec, pts, allow_origin=allow0)
    lo, hi = pts.min(), pts.max()
    scan = np.linspace(lo, hi, 2001)
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(~(_f2_terms(spec, scan)[0] > 0)):
            raise DomainError(f"[{lo}, {hi}] touches a zero of f^2")

    def integrand(x):
        return 1.0 / _f2_terms(spec, x)[0]

    knots = np.unique(pts)
    if knots.size == 1:
        return np.zeros_like(r_arr) if r_arr.ndim else 0.0
    pieces = _adaptive(integrand, knots[:-1], knots[1:], abstol)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    cum -= cum[np.searchsorted(knots, r_ref)]
    out = cum[np.searchsorted(knots, r_arr.ravel())].reshape(r_arr.shape)
    return out if r_arr.ndim else float(out)
