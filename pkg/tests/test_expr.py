import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwarzleaf import expr
from schwarzleaf.errors import ConfigError


def test_arithmetic_and_precedence():
    assert expr.parse("1 + 2*3")() == 7.0
    assert expr.parse("-2^2")() == -4.0
    assert expr.parse("2^3^2")() == 512.0
    assert expr.parse("2**3")() == 8.0
    assert expr.parse("(1 + 2) / 4")() == 0.75
    assert expr.parse("1e-1 + .5")() == pytest.approx(0.6)
    assert expr.parse("pi")() == pytest.approx(np.pi)


def test_variables_and_arrays():
    e = expr.parse("4 + 0.3*z")
    z = np.array([-1.0, 0.0, 1.0])
    np.testing.assert_allclose(e(x=0 * z, y=0 * z, z=z), [3.7, 4.0, 4.3])
    assert e.variables == {"z"}


def test_harmonics():
    x, y, z = np.eye(3)
    assert expr.parse("harm(1, 0)")(x=x, y=y, z=z).tolist() == z.tolist()
    np.testing.assert_allclose(expr.parse("harm(2, 0)")(x=x, y=y, z=z), 0.5 * (3 * z * z - 1))
    assert expr.parse("harm(2, 2)").variables == {"x", "y", "z"}
    with pytest.raises(ConfigError):
        expr.parse("harm(3, 0)")(x=x, y=y, z=z)


@pytest.mark.parametrize("bad", ["1 +", "2 $ 3", "foo(1)", "(1", "r r"])
def test_malformed(bad):
    with pytest.raises(ConfigError):
        expr.parse(bad)(r=1.0)


def test_unknown_variable():
    with pytest.raises(ConfigError):
        expr.parse("q + 1")(r=1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(-1.0, 1.0))
def test_symbolic_derivative_matches_central_difference(r, t):
    e = expr.parse("r^2*exp(0.3*t) + sin(r*t)/r - log(r)*sqrt(r) + cos(t)^3")
    h = 1e-5
    for var, other in (("r", "t"), ("t", "r")):
        d = e.diff(var)
        env = {"r": r, "t": t}
        lo, hi = dict(env), dict(env)
        lo[var] -= h
        hi[var] += h
        fd = (e(**hi) - e(**lo)) / (2 * h)
        assert d(**env) == pytest.approx(fd, rel=1e-6, abs=1e-6)
