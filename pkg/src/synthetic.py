"""
Parametric test surfaces standing in for scanned patches
"""

import logging
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh_core import TriMesh3, check_mesh, write_obj

logger = logging.getLogger(__name__)

SYNTHETIC_KINDS = ('plane', 'cylinder_sector', 'hemisphere_cap', 'ripple')


def grid_faces(n: int) -> np.ndarray:
    """Two counter-clockwise triangles per cell of an n×n vertex grid indexed j*n + i"""
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1))
    v00 = (j * n + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def _grid_params(n: int):
    s, t = np.meshgrid(np.linspace(0.0, 1.0, n), np.linspace(0.0, 1.0, n))
    return s.ravel(), t.ravel()


def text_stripes(s, t) -> np.ndarray:
    """Rows of dark glyph-like marks on a light ground, in [0, 1]"""
    rows = np.sin(np.pi * 6.0 * t) ** 2
    glyphs = 0.5 + 0.5 * np.cos(2.0 * np.pi * 9.0 * s) * np.cos(2.0 * np.pi * 2.0 * t)
    return np.clip(0.9 - 0.75 * rows * glyphs, 0.0, 1.0)


def plane(n: int, spacing: float = 1.0) -> TriMesh3:
    s, t = _grid_params(n)
    extent = spacing * (n - 1)
    vertices = np.column_stack([s * extent, t * extent, np.zeros_like(s)])
    return TriMesh3(vertices, grid_faces(n), intensity=text_stripes(s, t), name=f"plane_{n}")


def cylinder_sector(n: int, radius: float = 1.0, angle: float = np.pi / 2, height: float = 1.0) -> TriMesh3:
    """Sector of a cylinder about the y axis; developable"""
    s, t = _grid_params(n)
    theta = s * angle
    vertices = np.column_stack([radius * np.sin(theta), t * height, radius * np.cos(theta)])
    return TriMesh3(vertices, grid_faces(n), intensity=text_stripes(s, t), name=f"cylinder_sector_{n}")


def cylinder_unroll(n: int, radius: float = 1.0, angle: float = np.pi / 2, height: float = 1.0) -> np.ndarray:
    """Arc-length unrolling (Rθ, y) matching cylinder_sector vertex order"""
    s, t = _grid_params(n)
    return np.column_stack([radius * s * angle, t * height])


def hemisphere_cap(n: int, polar_angle: float = np.pi / 3) -> TriMesh3:
    """
    Square grid lifted onto the unit sphere; the grid corners reach ``polar_angle``
    from the pole, so Gaussian curvature is 1 everywhere
    """
    half = np.sin(polar_angle) / np.sqrt(2.0)
    s, t = _grid_params(n)
    x = (2.0 * s - 1.0) * half
    y = (2.0 * t - 1.0) * half
    z = np.sqrt(1.0 - x ** 2 - y ** 2)
    return TriMesh3(np.column_stack([x, y, z]), grid_faces(n), intensity=text_stripes(s, t),
                    name=f"hemisphere_cap_{n}")


def ripple(n: int, amplitude: float = 0.1) -> TriMesh3:
    s, t = _grid_params(n)
    z = amplitude * np.sin(2.0 * np.pi * s) * np.sin(2.0 * np.pi * t)
    return TriMesh3(np.column_stack([s, t, z]), grid_faces(n), intensity=text_stripes(s, t),
                    name=f"ripple_{n}")


def collinear_grid(n: int) -> TriMesh3:
    """Grid connectivity with every vertex on the x axis; no flattening system is solvable on it"""
    i, j = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64))
    x = (i + 0.37 * j).ravel()
    vertices = np.column_stack([x, np.zeros_like(x), np.zeros_like(x)])
    s, t = _grid_params(n)
    return TriMesh3(vertices, grid_faces(n), intensity=text_stripes(s, t), name=f"collinear_{n}")


_GENERATORS = {
    'plane': plane,
    'cylinder_sector': cylinder_sector,
    'hemisphere_cap': hemisphere_cap,
    'ripple': ripple,
}


def generate_synthetic(kind: str, n: int, path=None, **params) -> TriMesh3:
    """
    Build a parametric test mesh with a text-like intensity pattern

    Args:
        kind: one of SYNTHETIC_KINDS
        n: vertices per grid side, at least 2
        path: when given, the mesh is also written there as OBJ
        **params: shape parameters forwarded to the generator

    Returns:
        A checked TriMesh3
    """
    if kind not in _GENERATORS:
        raise ConfigError(f"Unknown synthetic mesh '{kind}', expected one of {SYNTHETIC_KINDS}")
    if int(n) != n or n < 2:
        raise ConfigError(f"Synthetic mesh resolution must be an integer >= 2, got {n}")
    mesh = check_mesh(_GENERATORS[kind](int(n), **params))
    if path is not None:
        write_obj(mesh, Path(path))
        logger.info("Wrote synthetic %s mesh to %s", kind, path)
    return mesh
