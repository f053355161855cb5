"""
Least squares conformal flattening with two pinned boundary vertices
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu
from scipy.spatial.distance import pdist, squareform

from .errors import SolverFailure
from .mesh_core import TriMesh3, boundary_loop, boundary_vertex_mask

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8
CG_TOLERANCE = 1e-10
PIN_TIE_RATIO = 1e-12


class Algorithm(str, Enum):
    LSCM = "LSCM"
    ABF = "ABF"
    MM = "MM"


@dataclass(frozen=True, eq=False)
class UVMap:
    """
    Per-vertex parameter coordinates sharing the connectivity of ``mesh``

    Attributes:
        uv: (n, 2) coordinates in the mesh's length units
        mesh: the TriMesh3 this parameterization belongs to
        algorithm: which flattener produced it
        diagnostics: solver-specific quality information
        scale_factor: uniform scale applied after flattening (1 when untouched)
    """
    uv: np.ndarray
    mesh: TriMesh3
    algorithm: Algorithm
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    scale_factor: float = 1.0

    def __post_init__(self):
        uv = np.array(self.uv, dtype=np.float64, copy=True)
        if uv.shape != (self.mesh.n_vertices, 2):
            raise ValueError(f"uv must have shape ({self.mesh.n_vertices}, 2), got {uv.shape}")
        if not np.all(np.isfinite(uv)):
            raise SolverFailure(f"{Algorithm(self.algorithm).value} produced non-finite coordinates")
        uv.setflags(write=False)
        object.__setattr__(self, 'uv', uv)
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))

    def with_uv(self, uv, scale_factor: Optional[float] = None) -> 'UVMap':
        return UVMap(uv, self.mesh, self.algorithm, dict(self.diagnostics),
                     self.scale_factor if scale_factor is None else scale_factor)

    def signed_areas(self) -> np.ndarray:
        tri = self.uv[self.mesh.faces]
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def flipped_faces(self) -> List[int]:
        """Faces whose orientation opposes the majority; ties count as positive"""
        areas = self.signed_areas()
        positive = np.count_nonzero(areas > 0)
        negative = np.count_nonzero(areas < 0)
        if negative > positive:
            return np.flatnonzero(areas > 0).tolist()
        return np.flatnonzero(areas < 0).tolist()


@dataclass(frozen=True)
class PinPair:
    a: int
    b: int
    position_a: Tuple[float, float]
    position_b: Tuple[float, float]

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("pinned vertices must be distinct")

    @property
    def distance(self) -> float:
        return float(np.hypot(self.position_b[0] - self.position_a[0],
                              self.position_b[1] - self.position_a[1]))


def select_pins(mesh: TriMesh3) -> PinPair:
    """
    Pick the two boundary vertices farthest apart in 3D

    Args:
        mesh: disk-topology mesh

    Returns:
        PinPair placing the lower id at (0, 0) and the other at (d, 0);
        distance ties resolve to the lexicographically smallest id pair
    """
    loop = np.array(sorted(boundary_loop(mesh)), dtype=np.int64)
    distances = squareform(pdist(mesh.vertices[loop]))
    upper = np.triu(distances, k=1)
    d_max = float(upper.max())
    candidates = np.argwhere(upper >= d_max * (1.0 - PIN_TIE_RATIO))
    i, j = candidates[0]
    a, b = int(loop[i]), int(loop[j])
    d = float(np.linalg.norm(mesh.vertices[b] - mesh.vertices[a]))
    logger.debug("Pins for %s: %d, %d at distance %.6g", mesh.name, a, b, d)
    return PinPair(a, b, (0.0, 0.0), (d, 0.0))


def _local_frame_coordinates(mesh: TriMesh3) -> np.ndarray:
    """Corner positions of every face in its own orthonormal frame, as complex numbers"""
    tri = mesh.vertices[mesh.faces]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    len1 = np.linalg.norm(e1, axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        x_axis = e1 / len1[:, None]
        x2 = np.einsum('ij,ij->i', e2, x_axis)
        y2 = np.linalg.norm(e2 - x2[:, None] * x_axis, axis=1)
    z = np.zeros((mesh.n_faces, 3), dtype=np.complex128)
    z[:, 1] = len1
    z[:, 2] = x2 + 1j * y2
    return z


def conformal_matrix(mesh: TriMesh3) -> sparse.csr_matrix:
    """
    Real (2m, 2n) matrix whose squared norm on interleaved (u, v) is the conformal energy

    Raises:
        SolverFailure: when a face has no area in its local frame
    """
    z = _local_frame_coordinates(mesh)
    double_area = (z[:, 1].conjugate() * z[:, 2]).imag
    bad = np.flatnonzero(~(double_area > 0))
    if len(bad):
        raise SolverFailure(f"LSCM system is rank deficient: {len(bad)} faces have zero area "
                            f"(first {bad[:5].tolist()})")
    weights = np.empty_like(z)
    for j in range(3):
        weights[:, j] = (z[:, (j + 2) % 3] - z[:, (j + 1) % 3]) / np.sqrt(double_area)

    m = mesh.n_faces
    face_ids = np.repeat(np.arange(m), 3)
    verts = mesh.faces.ravel()
    a = weights.real.ravel()
    b = weights.imag.ravel()
    rows = np.concatenate([2 * face_ids, 2 * face_ids, 2 * face_ids + 1, 2 * face_ids + 1])
    cols = np.concatenate([2 * verts, 2 * verts + 1, 2 * verts, 2 * verts + 1])
    vals = np.concatenate([a, -b, b, a])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * m, 2 * mesh.n_vertices))


def conformal_energy(mesh: TriMesh3, uv) -> float:
    """The quantity lscm_flatten minimizes, evaluated at ``uv``"""
    coords = np.asarray(getattr(uv, 'uv', uv), dtype=np.float64).ravel()
    residual = conformal_matrix(mesh) @ coords
    return float(residual @ residual)


def lscm_flatten(mesh: TriMesh3, pins: Optional[PinPair] = None) -> UVMap:
    """
    Minimize the conformal energy with two vertices fixed

    Args:
        mesh: disk-topology mesh
        pins: fixed vertices; select_pins(mesh) when omitted

    Returns:
        UVMap tagged LSCM

    Raises:
        NotADisk: mesh has other than one boundary loop
        SolverFailure: the linear system is singular or its residual stays too large
    """
    if pins is None:
        pins = select_pins(mesh)
    else:
        on_boundary = boundary_vertex_mask(mesh)
        boundary_loop(mesh)
        if not (on_boundary[pins.a] and on_boundary[pins.b]):
            raise ValueError(f"pins {pins.a}, {pins.b} must both lie on the boundary")

    n = mesh.n_vertices
    matrix = conformal_matrix(mesh).tocsc()

    pinned = np.array([pins.a, pins.b])
    pinned_cols = np.array([2 * pins.a, 2 * pins.a + 1, 2 * pins.b, 2 * pins.b + 1])
    pinned_values = np.array([*pins.position_a, *pins.position_b], dtype=np.float64)
    free_mask = np.ones(2 * n, dtype=bool)
    free_mask[pinned_cols] = False
    free_cols = np.flatnonzero(free_mask)

    a_free = matrix[:, free_cols]
    rhs_ls = -(matrix[:, pinned_cols] @ pinned_values)
    normal = (a_free.T @ a_free).tocsc()
    rhs = a_free.T @ rhs_ls

    try:
        x = splu(normal).solve(rhs)
    except RuntimeError as exc:
        raise SolverFailure(f"LSCM normal equations are singular for '{mesh.name}': {exc}") from exc

    scale = max(float(np.abs(rhs).max()), np.finfo(float).tiny)
    relative = float(np.abs(normal @ x - rhs).max()) / scale
    method = "splu"
    if not np.isfinite(relative) or relative > RESIDUAL_TOLERANCE:
        logger.debug("LSCM direct residual %.3g, refining with conjugate gradients", relative)
        x0 = x if np.all(np.isfinite(x)) else None
        x, info = cg(normal, rhs, x0=x0, rtol=CG_TOLERANCE, maxiter=10 * n)
        relative = float(np.abs(normal @ x - rhs).max()) / scale
        method = "splu+cg"
        if info != 0 or not np.isfinite(relative) or relative > RESIDUAL_TOLERANCE:
            raise SolverFailure(f"LSCM did not converge for '{mesh.name}' "
                                f"(relative residual {relative:.3g})")

    coords = np.empty(2 * n)
    coords[free_cols] = x
    coords[pinned_cols] = pinned_values
    uv = coords.reshape(n, 2)

    energy = conformal_energy(mesh, uv)
    result = UVMap(uv, mesh, Algorithm.LSCM, {
        'pins': pinned.tolist(),
        'solver': method,
        'relative_residual': relative,
        'conformal_energy': energy,
    })
    flipped = result.flipped_faces()
    result.diagnostics['flipped_faces'] = len(flipped)
    if flipped:
        logger.warning("LSCM flattening of %s has %d flipped faces", mesh.name, len(flipped))
    logger.info("LSCM flattened %s: energy %.6g, residual %.3g", mesh.name, energy, relative)
    return result
