"""Coordinate charts on the fiber.

Two chart families are needed: spherical angles ``(theta, phi)`` on the unit
sphere (with a second, rotated copy whose poles sit on the x axis) and the
flat chart ``(a, b)`` used for the torus and the Euclidean plane.  Points are
carried around in *embedding coordinates*: unit vectors in R^3 for the
sphere, the pair ``(a, b)`` for flat fibers.
"""

import numpy as np

# columns are the images of the local x, y, z axes; local z -> world x
_ROT = (np.eye(3), np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


def sphere_to_xyz(theta, phi, rot=0):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    local = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
    return local @ _ROT[rot].T


def sphere_from_xyz(xyz, rot=0):
    local = np.asarray(xyz, dtype=float) @ _ROT[rot]
    theta = np.arccos(np.clip(local[..., 2], -1.0, 1.0))
    phi = np.arctan2(local[..., 1], local[..., 0])
    return theta, phi


def pick_sphere_chart(xyz):
    """Per point, the atlas index whose poles are farther away."""
    xyz = np.asarray(xyz, dtype=float)
    return np.where(np.abs(xyz[..., 2]) <= np.abs(xyz[..., 0]), 0, 1)


def sphere_metric(theta):
    """Round metric ``diag(1, sin^2 theta)`` and its theta derivative."""
    theta = np.asarray(theta, dtype=float)
    g = np.zeros(theta.shape + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = np.sin(theta) ** 2
    dg = np.zeros(theta.shape + (2, 2, 2))
    dg[..., 0, 1, 1] = 2.0 * np.sin(theta) * np.cos(theta)
    return g, dg


def sphere_christoffel(theta):
    """Closed-form Christoffel symbols ``G[..., k, i, j]`` of the round metric."""
    theta = np.asarray(theta, dtype=float)
    G = np.zeros(theta.shape + (2, 2, 2))
    G[..., 0, 1, 1] = -np.sin(theta) * np.cos(theta)
    cot = np.cos(theta) / np.sin(theta)
    G[..., 1, 0, 1] = cot
    G[..., 1, 1, 0] = cot
    return G


def flat_metric(shape):
    g = np.zeros(tuple(shape) + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0
    return g, np.zeros(tuple(shape) + (2, 2, 2))


def chart_metric(kind, coords):
    """Metric ``g_F`` and derivatives in chart coordinates ``(..., 2)``."""
    coords = np.asarray(coords, dtype=float)
    if kind == "sphere":
        return sphere_metric(coords[..., 0])
    return flat_metric(coords.shape[:-1])


def chart_christoffel(kind, coords):
    coords = np.asarray(coords, dtype=float)
    if kind == "sphere":
        return sphere_christoffel(coords[..., 0])
    return np.zeros(coords.shape[:-1] + (2, 2, 2))


def coords_to_points(kind, coords, rot=0):
    """Chart coordinates -> embedding coordinates."""
    coords = np.asarray(coords, dtype=float)
    if kind == "sphere":
        return sphere_to_xyz(coords[..., 0], coords[..., 1], rot)
    return coords.copy()


def point_env(kind, pts):
    """Variable bindings for scene expressions at embedding points."""
    pts = np.asarray(pts, dtype=float)
    if kind == "sphere":
        theta, phi = sphere_from_xyz(pts)
        return {"x": pts[..., 0], "y": pts[..., 1], "z": pts[..., 2], "theta": theta, "phi": phi}
    return {"a": pts[..., 0], "b": pts[..., 1], "x": pts[..., 0], "y": pts[..., 1]}
