import numpy as np
import pytest

from schwarzleaf import fiber
from schwarzleaf.errors import ConfigError, UnsupportedBackend, UnsupportedSurface
from schwarzleaf.fiber import build_fiber


def mesh(level):
    return build_fiber({"backend": "trimesh", "kind": "sphere", "level": level})


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_counts_and_euler(level):
    fd = mesh(level)
    assert fd.n == 10 * 4 ** level + 2
    assert len(fd.tris) == 20 * 4 ** level
    np.testing.assert_allclose(np.linalg.norm(fd.points, axis=1), 1.0, atol=1e-15)
    # Gauss-Bonnet on the mesh is exact: total angle defect = 2 pi chi
    assert fd.angle_defect().sum() == pytest.approx(4 * np.pi, abs=1e-11)


def test_torus_angle_defect_vanishes():
    fd = build_fiber({"backend": "trimesh", "kind": "torus", "n": 12})
    np.testing.assert_allclose(fd.angle_defect(), 0.0, atol=1e-12)
    assert fd.weights.sum() == pytest.approx(4 * np.pi ** 2, rel=1e-12)


def test_sphere_area_converges():
    errs = [abs(mesh(L).weights.sum() - 4 * np.pi) for L in (2, 3, 4)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_cotan_laplacian_of_linear_function(sphere4):
    # Delta_{S^2} z = -2 z
    z = sphere4.points[:, 2]
    lap = fiber.laplacian(sphere4, None, z)
    assert np.max(np.abs(lap + 2 * z)) <= 2e-2
    assert sphere4.stiffness @ np.ones(sphere4.n) == pytest.approx(np.zeros(sphere4.n), abs=1e-11)


def test_conformal_scalar_curvature_on_mesh(sphere4):
    # v^2 g_S2 with constant v is a round sphere of radius v: S = 2/v^2
    S = fiber.scalar_curvature(sphere4, np.full(sphere4.n, 3.0))
    assert fiber.integrate(sphere4, 3.0, S) == pytest.approx(8 * np.pi, rel=1e-12)


def test_first_eigenvalue_unit_sphere(sphere4):
    lam1, mult = fiber.first_eigenvalue(sphere4)
    assert lam1 == pytest.approx(2.0, rel=2e-2)
    assert mult == 3
    lam2, _ = fiber.first_eigenvalue(sphere4, np.full(sphere4.n, 2.0))
    assert lam2 == pytest.approx(lam1 / 4, rel=1e-10)


def test_first_eigenvalue_flat_torus():
    fd = build_fiber({"backend": "trimesh", "kind": "torus", "n": 32})
    lam1, mult = fiber.first_eigenvalue(fd)
    assert lam1 == pytest.approx(1.0, rel=1e-2)
    assert mult == 4


def test_chartgrid_derivatives_converge():
    errs = []
    for n0, n1 in ((33, 64), (65, 128)):
        fd = build_fiber({"backend": "chartgrid", "kind": "sphere", "shape": [n0, n1]})
        th, ph = fd.coords.T
        f = np.sin(th) ** 2 * np.cos(ph)
        d_th = 2 * np.sin(th) * np.cos(th) * np.cos(ph)
        d_phph = -np.sin(th) ** 2 * np.cos(ph)
        errs.append(max(np.max(np.abs(fd.d(f, 0) - d_th)),
                        np.max(np.abs(fd.d2(f, 1, 1) - d_phph))))
    assert errs[0] / errs[1] > 12.0


def test_chartgrid_laplacian_and_curvature(grid_mid):
    th = grid_mid.coords[:, 0]
    z = np.cos(th)
    lap = fiber.laplacian(grid_mid, None, z)
    # fourth-order differences: h^4 ~ 1e-6 at this spacing
    assert np.max(np.abs(lap + 2 * z)) <= 2e-6
    S = fiber.scalar_curvature(grid_mid, 4.0 + 0 * z)
    assert np.max(np.abs(S - 2 / 16)) <= 1e-12
    with pytest.raises(UnsupportedSurface):
        fiber.integrate(grid_mid, None, z)
    with pytest.raises(UnsupportedBackend):
        fiber.first_eigenvalue(grid_mid)


@pytest.mark.parametrize("desc", [
    {"backend": "trimesh", "kind": "sphere", "level": 9},
    {"backend": "trimesh", "kind": "torus", "n": 2},
    {"backend": "trimesh", "kind": "klein", "n": 8},
    {"backend": "chartgrid", "kind": "sphere", "shape": [65, 128], "band": [0, 1]},
    {"backend": "chartgrid", "kind": "sphere"},
    {"backend": "voxels", "kind": "sphere"},
])
def test_build_fiber_rejects(desc):
    with pytest.raises(ConfigError):
        build_fiber(desc)


def test_export_off_roundtrip(tmp_path):
    fd = mesh(1)
    vals = np.arange(fd.n, dtype=float)
    path = tmp_path / "m.off"
    fiber.export_off(fd, path, vals)
    lines = path.read_text().splitlines()
    assert lines[0] == "OFF"
    assert lines[1] == f"{fd.n} {len(fd.tris)} 0"
    pts = np.array([[float(x) for x in ln.split()] for ln in lines[2:2 + fd.n]])
    np.testing.assert_array_equal(pts, fd.points)
    assert [float(ln[2:]) for ln in lines[2 + fd.n + len(fd.tris):]] == vals.tolist()
