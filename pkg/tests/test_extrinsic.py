import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwarzleaf import expr, extrinsic, immersion, warped
from schwarzleaf.base2d import ProfileSpec, Warping
from schwarzleaf.errors import UnsupportedBackend
from schwarzleaf.fiber import build_fiber
from schwarzleaf.immersion import from_graph, from_leaf_section, from_slice

from conftest import equator

V = expr.parse("4 + 0.3*z")


def test_equator_values_frozen(schw, grid_mid):
    """D_xi leaf v = 4 + 0.3 z in Schwarzschild at the equator (v = 4):
    |grad v|^2 = 0.09/16, Delta v = 0, so
    a = -f^2/(2v) - |grad v|^2/(2v) = -0.063203125, b = 1/v = 0.25,
    |H|^2 = -2ab = 0.0316015625."""
    im = from_leaf_section(schw, "xi", 0.0, V, grid_mid)
    mc = extrinsic.mean_curvature(im)
    eq = equator(grid_mid)
    assert eq.size == 128
    np.testing.assert_allclose(mc.grad2[eq], 0.09 / 16, rtol=1e-7)
    np.testing.assert_allclose(mc.lap[eq], 0.0, atol=1e-7)
    np.testing.assert_allclose(mc.a[eq], -0.063203125, atol=1e-8)
    np.testing.assert_allclose(mc.b[eq], 0.25, rtol=1e-14)
    np.testing.assert_allclose(extrinsic.mean_curvature_norm(im, "frame", mc)[eq], 0.0316015625, atol=1e-8)
    np.testing.assert_allclose(extrinsic.mean_curvature_norm(im, "curvature")[eq], 0.0316015625, atol=1e-7)


def test_cone_norm_is_inverse_radius_squared(mink, sphere4):
    im = from_leaf_section(mink, "xi", 0.0, 3.0, sphere4)
    np.testing.assert_allclose(extrinsic.mean_curvature_norm(im), 1 / 9, rtol=1e-12)


def test_slice_mean_curvature_is_minus_grad_log_lambda(schw, grid_mid):
    im = from_slice(schw, 0.0, 4.0, grid_mid)
    H = extrinsic.mean_curvature(im).vector
    # H = -grad^B r / r = (0, -f^2/r) with f^2(4) = 1/2
    np.testing.assert_allclose(H[:, :2], np.tile([0.0, -0.125], (grid_mid.n, 1)), atol=1e-12)
    np.testing.assert_allclose(H[:, 2:], 0.0, atol=1e-12)
    np.testing.assert_allclose(extrinsic.mean_curvature_norm(im), 0.5 / 16, rtol=1e-10)


@pytest.mark.parametrize("family", ["xi", "eta"])
@pytest.mark.parametrize("warp", ["r", "r^2", "r*exp(0.1*t)"])
def test_closed_vs_oracle_mean_curvature(family, warp, grid_mid):
    w = Warping("radial") if warp == "r" else Warping.custom(warp)
    spec = ProfileSpec(mass=1.0, warping=w).with_domain((0.5, 60.0))
    im = from_leaf_section(spec, family, 1.0, V, grid_mid)
    mc = extrinsic.mean_curvature(im)
    o = extrinsic.second_fundamental_form_oracle(im)
    a, b, _ = extrinsic.oracle_null_coefficients(im, o)
    mask = grid_mid.interior(3)
    scale = max(np.abs(mc.a).max(), np.abs(mc.b).max())
    assert np.max(np.abs(a - mc.a)[mask]) <= 1e-6 * scale
    assert np.max(np.abs(b - mc.b)[mask]) <= 1e-6 * scale
    x = im.ambient_points()
    gap = mc.vector - o.H
    assert np.max(np.abs(warped.ambient_inner(spec, "sphere", x, gap, gap))[mask]) <= 1e-10


def test_shape_operators_vs_oracle(schw, grid_mid):
    for family in ("xi", "eta"):
        im = from_leaf_section(schw, family, 0.0, V, grid_mid)
        ops = extrinsic.shape_operators_closed(im)
        fr = immersion.frame_decomposition(im)
        xi, eta = extrinsic._null_vectors(im)
        mask = grid_mid.interior(3)
        o = extrinsic.second_fundamental_form_oracle(im)
        if family == "xi":
            pairs = (("xi", xi), ("eta_perp", fr.eta_perp))
        else:
            pairs = (("eta", eta), ("xi_perp", fr.xi_perp))
        for key, zeta in pairs:
            A = extrinsic.oracle_shape_operator(im, zeta, o)
            assert np.max(np.abs(A - ops[key])[mask]) <= 1e-6


def test_umbilic_for_linear_functions(schw, grid_mid):
    # restrictions of linear functions to the round sphere satisfy Hess z = -z g_S2,
    # but v = 4 + 0.3 z is not umbilic for the conformal metric v^2 g_S2
    im = from_leaf_section(schw, "xi", 0.0, V, grid_mid)
    h, dev = extrinsic.umbilic_test(im)
    assert dev[grid_mid.interior(3)].max() > 1e-4
    const = from_leaf_section(schw, "xi", 0.0, 4.0, grid_mid)
    h, dev = extrinsic.umbilic_test(const)
    assert dev.max() <= 1e-12 and np.abs(h).max() <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(3.0, 6.0))
def test_exterior_leaves_are_never_weakly_trapped(a, b, base):
    """For lambda = r, |H|^2 may turn negative at points where Delta v is
    large, but a compact leaf section is never weakly trapped as a whole; the
    pointwise classes follow the sign of the marginal predicate."""
    spec = ProfileSpec(mass=1.0).with_domain((0.5, 60.0))
    fd = build_fiber({"backend": "trimesh", "kind": "sphere", "level": 3})
    im = from_leaf_section(spec, "xi", 0.0, expr.parse(f"{base} + {a}*x + {b}*harm(2, 1)"), fd)
    mc = extrinsic.mean_curvature(im)
    rep = extrinsic.causal_classification(im, mc)
    assert np.any(rep.norm2 > 0)
    assert rep.verdict in (extrinsic.UNTRAPPED, extrinsic.MIXED)
    res = extrinsic.marginal_residual(im, mc.grad2, mc.lap)
    np.testing.assert_allclose(rep.norm2, -res / (2 * im.v ** 2), rtol=1e-10, atol=1e-14)


def test_strong_perturbation_has_trapped_points(schw):
    fd = build_fiber({"backend": "trimesh", "kind": "sphere", "level": 3})
    im = from_leaf_section(schw, "xi", 0.0, expr.parse("3 + 0.296875*harm(2, 1)"), fd)
    rep = extrinsic.causal_classification(im)
    assert np.any(rep.classes == extrinsic.TRAPPED)
    assert rep.verdict == extrinsic.MIXED


def test_hyperplane_sections_are_marginal():
    spec = ProfileSpec(mass=0.0, warping=Warping("one")).with_domain((0.5, 40.0))
    fd = build_fiber({"backend": "trimesh", "kind": "torus", "n": 32})
    im = from_leaf_section(spec, "xi", 0.0, expr.parse("4 + 0.3*cos(a) + 0.2*sin(2*b)"), fd)
    mc = extrinsic.mean_curvature(im)
    assert np.all(mc.b == 0)
    rep = extrinsic.causal_classification(im, mc)
    assert rep.verdict == extrinsic.MARGINAL
    nonzero = np.abs(mc.lap) > 1e-2
    assert np.all(rep.classes[nonzero] == extrinsic.MARGINAL)
    # H = (Delta v / 2) xi: future pointing where Delta v > 0
    assert set(rep.orientation[nonzero & (mc.lap > 0)]) == {"future"}
    assert set(rep.orientation[nonzero & (mc.lap < 0)]) == {"past"}
    assert extrinsic.causal_classification(
        from_leaf_section(spec, "xi", 0.0, 4.0, fd)).verdict == extrinsic.MINIMAL


def test_de_sitter_static_slices_are_untrapped():
    """|H|^2 = f^2/r^2 > 0 for slices of lambda = r inside the static patch."""
    spec = ProfileSpec(mass=0.0, cosmo=0.3).with_domain((0.1, 10.0))
    fd = build_fiber({"backend": "trimesh", "kind": "sphere", "level": 2})
    im = from_slice(spec, 0.0, 2.0, fd)
    rep = extrinsic.causal_classification(im)
    assert rep.verdict == extrinsic.UNTRAPPED


def test_normal_connection_vs_oracle(grid_mid):
    for warp in ("r", "r^2"):
        w = Warping("radial") if warp == "r" else Warping.custom(warp)
        spec = ProfileSpec(mass=1.0, warping=w).with_domain((0.5, 60.0))
        for family in ("xi", "eta"):
            im = from_leaf_section(spec, family, 0.0, V, grid_mid)
            o = extrinsic.second_fundamental_form_oracle(im)
            fr = immersion.frame_decomposition(im)
            xi, eta = extrinsic._null_vectors(im)
            n0, n1 = (xi, fr.eta_perp) if family == "xi" else (eta, fr.xi_perp)
            D0 = extrinsic.oracle_normal_derivative(im, n0, o)
            D1 = extrinsic.oracle_normal_derivative(im, n1, o)
            mask = grid_mid.interior(3)
            for i in range(2):
                e = np.zeros((grid_mid.n, 2))
                e[:, i] = 1.0
                w0, N1 = extrinsic.normal_connection(im, e, o)
                assert np.max(np.abs(D0[:, i] - w0[:, None] * n0)[mask]) <= 1e-6
                assert np.max(np.abs(D1[:, i] - N1)[mask]) <= 1e-6


def test_parallel_H(schw, schw_r2, grid_mid):
    im = from_leaf_section(schw, "xi", 0.0, V, grid_mid)
    assert np.abs(extrinsic.parallel_H_residual(im)).max() == 0.0
    mask = grid_mid.interior(3)
    assert np.abs(extrinsic.oracle_parallel_H_residual(im))[mask].max() <= 1e-6
    for family in ("xi", "eta"):
        im2 = from_leaf_section(schw_r2, family, 0.0, V, grid_mid)
        closed = extrinsic.parallel_H_residual(im2)
        orc = extrinsic.oracle_parallel_H_residual(im2)
        assert np.abs(closed).max() >= 1e-3
        assert np.max(np.abs(closed - orc)[mask]) <= 1e-5 * np.abs(closed).max()


def test_closed_forms_need_leaves(schw, sphere4):
    im = from_graph(schw, 0.0, V, sphere4)
    with pytest.raises(UnsupportedBackend):
        extrinsic.mean_curvature(im)
    with pytest.raises(UnsupportedBackend):
        extrinsic.hessian(from_leaf_section(schw, "xi", 0.0, V, sphere4))
