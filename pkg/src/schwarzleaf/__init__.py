"""Numerical geometry of generalized Schwarzschild spacetimes ``B x_lambda F``:
lightlike foliations, spacelike codimension-two sections of their leaves,
closed-form extrinsic geometry and finite-difference oracles."""

from .base2d import ProfileSpec, Warping
from .errors import GeometryError
from .fiber import build_fiber
from .immersion import from_graph, from_leaf_section, from_slice

__all__ = [
    "ProfileSpec",
    "Warping",
    "GeometryError",
    "build_fiber",
    "from_leaf_section",
    "from_slice",
    "from_graph",
]

__version__ = "0.1.0"
