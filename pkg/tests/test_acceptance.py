"""Acceptance criteria, one test (and one printed PASS/FAIL line) each."""
import time

import numpy as np
import pytest

from schwarzleaf import base2d, cli, expr, extrinsic, immersion, verify
from schwarzleaf.base2d import ProfileSpec, Warping
from schwarzleaf.fiber import build_fiber, first_eigenvalue
from schwarzleaf.verify import Scenario

V = expr.parse("4 + 0.3*z")


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {label}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def schwarzschild():
    return ProfileSpec(mass=1.0).with_domain((0.5, 60.0))


def test_01_mean_curvature_oracle(report):
    t0 = time.perf_counter()
    r = verify.run_check(Scenario("leaf", schwarzschild(), "leaf_xi", v=V), "mean_curvature_oracle")
    dt = time.perf_counter() - t0
    order = r.refinement_orders[0]
    ok = order >= 2.0 and r.residual <= 1e-5 and dt <= 60
    report("1", ok, f"order {order:.3f} (>= 2), finest {r.residual:.2e} (<= 1e-5), {dt:.1f} s (<= 60)")


def test_02_shape_operator(report):
    spec = schwarzschild()
    scn = Scenario("leaf", spec, "leaf_xi", v=V)
    grid = verify.check_shape_operator(scn.build(scn.grid(scn.chart_shapes[-1])))
    mesh = verify.check_shape_operator(scn.build(scn.mesh(5)))
    exact = max(grid.details["closed_exact_residual"], mesh.details["closed_exact_residual"])
    oracle = grid.details["oracle_residual"]
    report("2", exact <= 1e-12 and oracle <= 1e-5,
           f"closed-form {exact:.2e} (<= 1e-12), oracle {oracle:.2e} (<= 1e-5)")


def test_03_gauss_bonnet(report):
    cone = ProfileSpec(mass=0.0).with_domain((0.5, 40.0))
    fd = build_fiber({"backend": "trimesh", "kind": "sphere", "level": 5})
    c = verify.check_gauss_bonnet(immersion.from_leaf_section(cone, "xi", 0.0, 3.0, fd))
    e1 = abs(c.details["int_H2"] / (4 * np.pi) - 1)
    e2 = abs(c.details["int_f2_over_v2"] / (4 * np.pi) - 1)
    r = verify.run_check(Scenario("leaf", schwarzschild(), "leaf_xi", v=V), "gauss_bonnet")
    order = r.refinement_orders[0]
    ok = e1 <= 1e-3 and e2 <= 1e-3 and r.residual <= 1e-3 and abs(order - 2) <= 0.1
    report("3", ok, f"cone rel. errors {e1:.2e}, {e2:.2e} (<= 1e-3); leaf gap {r.residual:.2e} "
                    f"(<= 1e-3), order {order:.3f} (~ 2)")


def test_04_scalar_curvature_identity(report):
    r = verify.run_check(Scenario("leaf", schwarzschild(), "leaf_xi", v=V), "scalar_curvature_identity")
    order = r.refinement_orders[0]
    report("4", r.residual <= 1e-3 and order >= 2.0,
           f"fine-grid residual {r.residual:.2e} (<= 1e-3), order {order:.3f} (>= 2)")


def test_05_divergence_identity(report):
    spec = schwarzschild()
    scns = [Scenario("leaf_xi", spec, "leaf_xi", v=V),
            Scenario("leaf_eta", spec, "leaf_eta", v=V, c=3.0),
            Scenario("slice", spec, "slice", r0=4.0),
            Scenario("graph", spec, "graph", u=expr.parse("0.2*x*y"), v=expr.parse("4 + 0.3*z + 0.2*x"))]
    parts, ok = [], True
    for scn in scns:
        r = verify.run_check(scn, "divergence_identity")
        order = r.refinement_orders[0] if r.refinement_orders else None
        ok = ok and r.residual <= 1e-3 and (order is None and r.residual <= verify.ROUNDOFF or
                                            order is not None and order >= 2.0)
        parts.append(f"{scn.name} {r.residual:.1e}" + (f" order {order:.2f}" if order else " (round-off)"))
    report("5", ok, "; ".join(parts))


def test_06_integral_inequality_suite(report):
    scene = cli.load_scene("random_suite")
    assert len(scene.scenarios) >= 20
    bad = []
    for scn in scene.scenarios:
        im = scn.build(scn.mesh(scn.levels[-1]))
        assert np.all(base2d.profile_eval(scn.spec, im.v).ffp > 0)
        r = verify.check_integral_inequality(im)
        kind = immersion.factoring_test(im)[0]
        eq_case = kind in (immersion.LEAF_XI, immersion.SLICE)
        tol = r.tolerance * r.details["scale"]
        fine = (r.details["integral"] >= -tol and r.details["equality"] == eq_case
                and (not eq_case or abs(r.details["integral"]) <= tol))
        if not fine:
            bad.append(scn.name)
    report("6", not bad, f"{len(scene.scenarios)} seeded scenarios, f' > 0 on all; failures: {bad or 'none'}")


def test_07_trapped_classification(report):
    leaves = [s for name in ("schwarzschild_leaf", "random_suite")
              for s in cli.load_scene(name).scenarios if s.provenance != "graph"]
    min_norm, agree = np.inf, 1.0
    for scn in leaves:
        r = verify.check_trapped_classification(scn.build(scn.mesh(scn.levels[-1])))
        min_norm = min(min_norm, r.details["min_norm2"])
        agree = min(agree, r.details["marginal_predicate_agreement"])
    mink = ProfileSpec(mass=0.0, warping=Warping("one")).with_domain((0.5, 40.0))
    fd = build_fiber({"backend": "trimesh", "kind": "torus", "n": 64})
    wave = immersion.from_leaf_section(mink, "xi", 0.0, expr.parse("4 + 0.3*cos(a) + 0.2*sin(2*b)"), fd)
    verdict = extrinsic.causal_classification(wave).verdict
    ok = min_norm > 0 and agree == 1.0 and verdict == extrinsic.MARGINAL
    report("7", ok, f"{len(leaves)} Schwarzschild sections, min |H|^2 {min_norm:.3e} (> 0), "
                    f"predicate agreement {agree:.0%}; hyperplane verdict {verdict}")


def test_08_parallel_H(report):
    r = verify.run_check(Scenario("leaf", schwarzschild(), "leaf_xi", v=V), "parallel_H")
    sq = ProfileSpec(mass=1.0, warping=Warping.custom("r^2")).with_domain((0.5, 60.0))
    c = verify.run_check(Scenario("leaf_r2", sq, "leaf_xi", v=V), "parallel_H")
    size = c.details["max_closed"]
    report("8", r.residual <= 1e-12 and size >= 1e-3 and c.passed,
           f"lambda = r {r.residual:.1e} (<= 1e-12); lambda = r^2 {size:.2e} (>= 1e-3), "
           f"oracle gap {c.details['oracle_gap']:.1e}")


def test_09_first_eigenvalue(report):
    lam, mult = first_eigenvalue(build_fiber({"backend": "trimesh", "kind": "sphere", "level": 5}))
    report("9", abs(lam / 2 - 1) <= 0.02 and mult == 3, f"lambda_1 = {lam:.5f} (2 +- 2%), multiplicity {mult}")


def test_10_base_layer(report):
    spec = schwarzschild()
    r = verify.check_base_identities(spec, samples=1_000_000)
    d = r.details
    rs = np.linspace(2.25, 40.0, 400)
    closed = rs + 2 * np.log(rs / 2 - 1)   # equals 4 at r = 4
    tort = float(np.max(np.abs(base2d.tortoise(spec, rs, r_ref=4.0) + 4.0 - closed)))
    at4 = float(base2d.tortoise(spec, np.array([4.0]), r_ref=4.0)[0] + 4.0)
    ok = (max(tort, d["tortoise_residual"]) <= 1e-10 and d["recurrence_residual"] <= 1e-6
          and d["xi_eta_residual"] <= 1e-12 and d["null_residual"] <= 1e-12
          and d["alpha_xi_residual"] <= 1e-12 and at4 == pytest.approx(4.0, abs=1e-12))
    report("10 (excluding alpha(eta))", ok,
           f"tortoise {tort:.1e}, r_*(4) = {at4:.12g}; recurrence {d['recurrence_residual']:.1e}; "
           f"g(xi,eta)+1 {d['xi_eta_residual']:.1e}; null {d['null_residual']:.1e}; "
           f"alpha(xi) {d['alpha_xi_residual']:.1e} over 1e6 points")


def test_10_alpha_eta_vanishes(report):
    # Expected to fail: alpha(eta) = f f', nonzero wherever f' != 0 (see README).
    d = verify.check_base_identities(schwarzschild(), samples=1_000_000).details
    report("10 (alpha(eta) = 0)", d["alpha_eta_max"] <= 1e-12,
           f"max |alpha(eta)| = {d['alpha_eta_max']:.3e}; alpha(eta) - f f' = {d['alpha_eta_minus_ffp']:.1e}")
