"""
Distortion measures for a flattening: texture stretch, angular error and area error
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateParameterization
from .flatten_abf import abf_weights, optimal_angles
from .flatten_lscm import UVMap
from .mesh_core import TriMesh3, boundary_vertex_mask, corner_angles_3d, triangle_corner_angles

logger = logging.getLogger(__name__)

DEGENERATE_UV_RATIO = 1e-12
UNIT_SCALE_TOLERANCE = 1e-15


@dataclass(frozen=True)
class TriangleStretch:
    """Singular values of the parameter-to-surface map of one triangle"""
    gamma_max: float
    gamma_min: float
    l2: float
    linf: float


@dataclass(frozen=True)
class RegionMetrics:
    """Stretch and area error restricted to a subset of faces"""
    face_count: int
    l2: float
    linf: float
    e: float

    def to_dict(self):
        return {'face_count': int(self.face_count), 'l2': float(self.l2),
                'linf': float(self.linf), 'e': float(self.e)}


@dataclass
class MetricsReport:
    l2_mesh: float
    linf_mesh: float
    f_alpha: float
    f_mesh: float
    e_mesh: float
    face_l2: np.ndarray
    face_linf: np.ndarray
    face_area_error: np.ndarray
    corner_angular_error: np.ndarray
    flipped_face_ids: List[int] = field(default_factory=list)
    scale_factor: float = 1.0
    boundary: Optional[RegionMetrics] = None

    def to_dict(self, per_face: bool = False):
        """JSON-ready summary; per-face arrays only when asked for"""
        result = {
            'l2_mesh': float(self.l2_mesh),
            'linf_mesh': float(self.linf_mesh),
            'f_alpha': float(self.f_alpha),
            'f_mesh': float(self.f_mesh),
            'e_mesh': float(self.e_mesh),
            'flipped_face_ids': [int(i) for i in self.flipped_face_ids],
            'scale_factor': float(self.scale_factor),
            'boundary': self.boundary.to_dict() if self.boundary is not None else None,
        }
        if per_face:
            result.update({
                'face_l2': self.face_l2.tolist(),
                'face_linf': self.face_linf.tolist(),
                'face_area_error': self.face_area_error.tolist(),
                'corner_angular_error': self.corner_angular_error.tolist(),
            })
        return result


def _uv_array(uv) -> np.ndarray:
    return np.asarray(getattr(uv, 'uv', uv), dtype=np.float64)


def _signed_uv_areas(mesh: TriMesh3, uv) -> np.ndarray:
    tri = _uv_array(uv)[mesh.faces]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def normalize_scale(uv: UVMap, mesh: Optional[TriMesh3] = None) -> UVMap:
    """
    Scale uv uniformly so its total (unsigned) area equals the 3D total area

    Returns:
        A new UVMap; scale_factor accumulates the applied factor

    Raises:
        DegenerateParameterization: total 2D area is zero
    """
    mesh = mesh or uv.mesh
    total_2d = float(np.abs(_signed_uv_areas(mesh, uv)).sum())
    if not total_2d > 0:
        raise DegenerateParameterization(f"Parameterization of '{mesh.name}' has zero total area",
                                         range(mesh.n_faces))
    factor = float(np.sqrt(float(mesh.face_areas.sum()) / total_2d))
    if abs(factor - 1.0) < UNIT_SCALE_TOLERANCE:
        return uv.with_uv(uv.uv, scale_factor=uv.scale_factor)
    return uv.with_uv(uv.uv * factor, scale_factor=uv.scale_factor * factor)


def _stretch_arrays(q, p):
    """Vectorized stretch for (m, 3, 3) surface and (m, 3, 2) parameter corners"""
    s, t = p[:, :, 0], p[:, :, 1]
    double_area = (s[:, 1] - s[:, 0]) * (t[:, 2] - t[:, 0]) - (s[:, 2] - s[:, 0]) * (t[:, 1] - t[:, 0])
    q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2]
    with np.errstate(divide='ignore', invalid='ignore'):
        ss = (q1 * (t[:, 1] - t[:, 2])[:, None] + q2 * (t[:, 2] - t[:, 0])[:, None]
              + q3 * (t[:, 0] - t[:, 1])[:, None]) / double_area[:, None]
        st = (q1 * (s[:, 2] - s[:, 1])[:, None] + q2 * (s[:, 0] - s[:, 2])[:, None]
              + q3 * (s[:, 1] - s[:, 0])[:, None]) / double_area[:, None]
        a = np.einsum('ij,ij->i', ss, ss)
        b = np.einsum('ij,ij->i', ss, st)
        c = np.einsum('ij,ij->i', st, st)
        gamma_max = np.sqrt(0.5 * ((a + c) + np.sqrt((a - c) ** 2 + 4.0 * b ** 2)))
        # smaller root from the product Γγ = |Ss × St|, which avoids cancellation
        gamma_min = np.linalg.norm(np.cross(ss, st), axis=1) / gamma_max
        gamma_min = np.where(gamma_max > 0, gamma_min, 0.0)
        l2 = np.sqrt(0.5 * (a + c))
    return gamma_max, gamma_min, l2, gamma_max.copy()


def triangle_stretch(q1, q2, q3, p1, p2, p3) -> TriangleStretch:
    """
    Stretch of the affine map from a parameter triangle (p) to a surface triangle (q)

    Raises:
        DegenerateParameterization: the parameter triangle has no area
    """
    q = np.asarray([q1, q2, q3], dtype=np.float64)[None]
    p = np.asarray([p1, p2, p3], dtype=np.float64)[None]
    if q.shape[-1] == 2:
        q = np.concatenate([q, np.zeros((1, 3, 1))], axis=2)
    gamma_max, gamma_min, l2, linf = _stretch_arrays(q, p)
    if not np.isfinite(gamma_max[0]):
        raise DegenerateParameterization("parameter triangle has zero area", [0])
    return TriangleStretch(float(gamma_max[0]), float(gamma_min[0]), float(l2[0]), float(linf[0]))


def _degenerate_faces(mesh: TriMesh3, uv) -> np.ndarray:
    areas = np.abs(_signed_uv_areas(mesh, uv))
    mean = areas.mean() if len(areas) else 0.0
    return np.flatnonzero(~(areas >= DEGENERATE_UV_RATIO * mean) | (areas == 0))


def stretch_per_face(mesh: TriMesh3, uv) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-face (Γ, γ, l2, linf) arrays

    Raises:
        DegenerateParameterization: listing faces whose 2D area is below 1e-12 of the mean
    """
    bad = _degenerate_faces(mesh, uv)
    if len(bad):
        raise DegenerateParameterization(
            f"{len(bad)} faces of '{mesh.name}' have zero parameter area (first {bad[:10].tolist()})", bad)
    return _stretch_arrays(mesh.vertices[mesh.faces], _uv_array(uv)[mesh.faces])


def l2_mesh(mesh: TriMesh3, uv) -> float:
    """Area-weighted RMS stretch"""
    _, _, l2, _ = stretch_per_face(mesh, uv)
    areas = mesh.face_areas
    return float(np.sqrt(np.sum(l2 ** 2 * areas) / np.sum(areas)))


def linf_mesh(mesh: TriMesh3, uv) -> float:
    """Worst stretch over all faces"""
    _, _, _, linf = stretch_per_face(mesh, uv)
    return float(linf.max())


def uv_corner_angles(uv: UVMap, mesh: Optional[TriMesh3] = None) -> np.ndarray:
    mesh = mesh or uv.mesh
    return triangle_corner_angles(_uv_array(uv)[mesh.faces])


def angular_error(phi, alpha, weights=None) -> Tuple[float, float]:
    """
    Weighted squared angle deviation

    Returns:
        f_alpha = Σ w (α - φ)², and f_mesh = f_alpha / (3 · face count)
    """
    phi = np.asarray(phi, dtype=np.float64).reshape(-1, 3)
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1, 3)
    weights = abf_weights(phi) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1, 3)
    f_alpha = float(np.sum(weights * (alpha - phi) ** 2))
    return f_alpha, f_alpha / (3 * len(phi))


def area_error(mesh: TriMesh3, uv) -> Tuple[np.ndarray, float]:
    """
    Per-face relative area error and its mean

    Each face compares its share of the surface area with its share of the
    parameter area; the error is one minus the smaller share over the larger.
    """
    bad = _degenerate_faces(mesh, uv)
    if len(bad):
        raise DegenerateParameterization(
            f"{len(bad)} faces of '{mesh.name}' have zero parameter area (first {bad[:10].tolist()})", bad)
    area_3d = mesh.face_areas
    area_2d = np.abs(_signed_uv_areas(mesh, uv))
    share_3d = area_3d / area_3d.sum()
    share_2d = area_2d / area_2d.sum()
    per_face = np.where(share_3d > share_2d, 1.0 - share_2d / share_3d, 1.0 - share_3d / share_2d)
    return per_face, float(per_face.mean())


def boundary_faces(mesh: TriMesh3) -> np.ndarray:
    """Ids of faces with at least one vertex on the boundary"""
    return np.flatnonzero(boundary_vertex_mask(mesh)[mesh.faces].any(axis=1))


def region_metrics(face_ids, areas, face_l2, face_linf, face_area_error) -> Optional[RegionMetrics]:
    """
    Aggregate per-face stretch and area error over ``face_ids``

    l2 is the area-weighted RMS over the region, linf its worst face and e the
    mean per-face area error. None for an empty region.
    """
    face_ids = np.asarray(face_ids, dtype=np.int64)
    if len(face_ids) == 0:
        return None
    weights = areas[face_ids]
    return RegionMetrics(
        face_count=len(face_ids),
        l2=float(np.sqrt(np.sum(face_l2[face_ids] ** 2 * weights) / np.sum(weights))),
        linf=float(face_linf[face_ids].max()),
        e=float(face_area_error[face_ids].mean()),
    )


def compute_metrics(mesh: TriMesh3, uv: UVMap, phi=None, weights=None) -> MetricsReport:
    """
    Normalize the scale of ``uv`` and evaluate every distortion measure

    Args:
        mesh: source surface
        uv: flattening of ``mesh``
        phi: optimal angles; derived from the 3D angles when omitted
        weights: angular weights; φ⁻² when omitted
    """
    normalized = normalize_scale(uv, mesh)
    gamma_max, _, l2, linf = stretch_per_face(mesh, normalized)
    areas = mesh.face_areas

    if phi is None:
        phi = optimal_angles(corner_angles_3d(mesh), mesh)
    if weights is None:
        weights = abf_weights(phi)
    alpha = uv_corner_angles(normalized, mesh)
    f_alpha, f_mesh = angular_error(phi, alpha, weights)
    per_face_area, e_mesh = area_error(mesh, normalized)

    report = MetricsReport(
        l2_mesh=float(np.sqrt(np.sum(l2 ** 2 * areas) / np.sum(areas))),
        linf_mesh=float(linf.max()),
        f_alpha=f_alpha,
        f_mesh=f_mesh,
        e_mesh=e_mesh,
        face_l2=l2,
        face_linf=linf,
        face_area_error=per_face_area,
        corner_angular_error=weights * (alpha - phi) ** 2,
        flipped_face_ids=normalized.flipped_faces(),
        scale_factor=normalized.scale_factor,
        boundary=region_metrics(boundary_faces(mesh), areas, l2, linf, per_face_area),
    )
    logger.debug("Metrics for %s/%s: L2 %.6f, Linf %.6f, F %.6g, E %.6g", mesh.name,
                 uv.algorithm.value, report.l2_mesh, report.linf_mesh, report.f_mesh, report.e_mesh)
    return report
