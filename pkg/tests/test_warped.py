import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwarzleaf import warped
from schwarzleaf.base2d import ProfileSpec, Warping
from schwarzleaf.errors import BoundaryError, ChartError

SPECS = {
    "schwarzschild": ProfileSpec(mass=1.0).with_domain((0.5, 60.0)),
    "rn": ProfileSpec(mass=1.0, charge=0.5).with_domain((0.05, 60.0), 1),
    "r_squared": ProfileSpec(mass=1.0, warping=Warping.custom("r^2")).with_domain((0.5, 60.0)),
    "time_dependent": ProfileSpec(mass=1.0, warping=Warping.custom("r*exp(0.1*t) + 0.05*t^2")).with_domain((0.5, 60.0)),
    "minkowski_flat": ProfileSpec(mass=0.0, warping=Warping("one")).with_domain((0.1, 60.0)),
}


def _points(kind, n=40, seed=3):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, n)
    r = rng.uniform(3.0, 20.0, n)
    if kind == "sphere":
        y = np.stack([rng.uniform(0.3, np.pi - 0.3, n), rng.uniform(0, 2 * np.pi, n)], axis=1)
    else:
        y = rng.uniform(0, 2 * np.pi, (n, 2))
    return np.column_stack([t, r, y])


@pytest.mark.parametrize("name", sorted(SPECS))
@pytest.mark.parametrize("kind", ["sphere", "torus"])
def test_closed_connection_matches_oracle(name, kind):
    spec = SPECS[name]
    x = _points(kind)
    closed = warped.closed_christoffel(spec, kind, x)
    oracle = warped.oracle_christoffel(spec, kind, x)
    scale = max(1.0, float(np.abs(closed).max()))
    assert np.max(np.abs(closed - oracle)) <= 1e-9 * scale


def test_oracle_is_fourth_order():
    spec = SPECS["time_dependent"]
    x = _points("sphere", 10)
    closed = warped.closed_christoffel(spec, "sphere", x)
    e1 = np.max(np.abs(warped.oracle_christoffel(spec, "sphere", x, 4e-2) - closed))
    e2 = np.max(np.abs(warped.oracle_christoffel(spec, "sphere", x, 2e-2) - closed))
    assert np.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)


def test_covderiv_routes_agree():
    spec = SPECS["r_squared"]
    x = _points("sphere", 20)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 4))
    Y = warped.FieldGerm(rng.normal(size=(20, 4)), rng.normal(size=(20, 4, 4)))
    a = warped.closed_covderiv(spec, "sphere", x, X, Y)
    b = warped.oracle_covderiv(spec, "sphere", x, X, Y)
    assert np.max(np.abs(a - b)) <= 1e-9 * np.abs(a).max()


def test_metric_signature():
    x = _points("sphere", 5)
    g = warped.ambient_metric(SPECS["schwarzschild"], "sphere", x)
    ev = np.linalg.eigvalsh(g)
    assert np.all(ev[:, 0] < 0) and np.all(ev[:, 1:] > 0)


@pytest.mark.parametrize("name", sorted(SPECS))
@pytest.mark.parametrize("which", ["xi", "eta"])
def test_recurrence(name, which):
    x = _points("sphere", 30)
    assert warped.recurrence_residual(SPECS[name], "sphere", x, which) <= 1e-9


def test_null_weingarten_factor_radial():
    spec = SPECS["schwarzschild"]
    r = np.array([3.0, 8.0])
    xr, er = warped.null_weingarten_factor(spec, 0.0, r)
    np.testing.assert_allclose(xr, 1 / r)
    np.testing.assert_allclose(er, -(1 - 2 / r) / (2 * r))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_xi_perp_distribution_is_involutive(seed):
    spec = SPECS["time_dependent"]
    x = _points("sphere", 6, seed)

    def xi(p):
        return warped.xi_field(spec, p).value

    def e1(p):
        out = np.zeros_like(p)
        out[..., 2] = p[..., 1]
        return out + (1 + p[..., 0] * p[..., 3])[..., None] * xi(p)

    def e2(p):
        out = np.zeros_like(p)
        out[..., 3] = np.sin(p[..., 2]) + p[..., 0]
        return out + (p[..., 1] ** 2)[..., None] * xi(p)

    assert warped.involutivity_residual(spec, "sphere", x, [e1, e2, xi]) <= 1e-8


def test_transverse_bracket_detected():
    """Negative control: [d_y1, y1 eta] = eta and g~(eta, xi) = -1."""
    spec = SPECS["schwarzschild"]
    x = _points("sphere", 6)

    def e1(p):
        out = np.zeros_like(p)
        out[..., 2] = 1.0
        return out

    def e2(p):
        return p[..., 2, None] * warped.eta_field(spec, p).value

    assert warped.involutivity_residual(spec, "sphere", x, [e1, e2]) > 1e-3


def test_chart_and_boundary_errors():
    spec = SPECS["schwarzschild"]
    near_pole = np.array([[0.0, 4.0, 1e-3, 0.5]])
    with pytest.raises(ChartError):
        warped.closed_christoffel(spec, "sphere", near_pole)
    with pytest.raises(BoundaryError):
        warped.oracle_christoffel(spec, "sphere", np.array([[0.0, 2.0005, 1.0, 0.5]]))
    with pytest.raises(BoundaryError):
        warped.oracle_christoffel(spec, "sphere", np.array([[0.0, 4.0, 1e-3, 0.5]]))
