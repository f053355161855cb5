"""
Unit tests for stretch, angular and area distortion metrics
"""

import sys
import os
import unittest

import numpy as np
from scipy.spatial.transform import Rotation
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.errors import DegenerateParameterization
from src.flatten_lscm import Algorithm, UVMap, lscm_flatten
from src.mesh_core import TriMesh3
from src.metrics import (normalize_scale, triangle_stretch, stretch_per_face, l2_mesh, linf_mesh,
                         angular_error, area_error, compute_metrics, boundary_faces, region_metrics)
from src.synthetic import plane, hemisphere_cap


def disjoint_pair():
    """Two unit right triangles that share no vertices"""
    vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]]
    return TriMesh3(vertices, [[0, 1, 2], [3, 4, 5]])


class TestTriangleStretch(unittest.TestCase):

    def test_identity(self):
        result = triangle_stretch((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0), (1, 0), (0, 1))
        self.assertAlmostEqual(result.gamma_max, 1.0, places=12)
        self.assertAlmostEqual(result.gamma_min, 1.0, places=12)
        self.assertAlmostEqual(result.l2, 1.0, places=12)
        self.assertAlmostEqual(result.linf, 1.0, places=12)

    def test_half_size_parameter_triangle(self):
        """A parameter triangle at half size stretches by two in every direction"""
        result = triangle_stretch((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0), (0.5, 0), (0, 0.5))
        self.assertAlmostEqual(result.gamma_max, 2.0, places=12)
        self.assertAlmostEqual(result.gamma_min, 2.0, places=12)
        self.assertAlmostEqual(result.l2, 2.0, places=12)

    def test_anisotropic(self):
        result = triangle_stretch((0, 0, 0), (2, 0, 0), (0, 1, 0), (0, 0), (1, 0), (0, 1))
        self.assertAlmostEqual(result.gamma_max, 2.0, places=12)
        self.assertAlmostEqual(result.gamma_min, 1.0, places=12)
        self.assertAlmostEqual(result.l2, np.sqrt(2.5), places=12)

    def test_degenerate_parameter_triangle(self):
        with self.assertRaises(DegenerateParameterization):
            triangle_stretch((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0), (1, 0), (2, 0))

    def test_singular_value_oracle(self):
        """Γ and γ match the SVD of the parameter-to-surface Jacobian"""
        rng = np.random.default_rng(42)
        count = 40000
        q = rng.uniform(-1, 1, size=(count, 3, 3))
        p = rng.uniform(-1, 1, size=(count, 3, 2))
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area_2d = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        area_3d = 0.5 * np.linalg.norm(np.cross(q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]), axis=1)
        keep = np.flatnonzero((area_2d >= 0.05) & (area_3d >= 0.05))[:10000]
        self.assertEqual(len(keep), 10000)
        q, p = q[keep], p[keep]

        mesh = TriMesh3(q.reshape(-1, 3), np.arange(3 * len(keep)).reshape(-1, 3))
        gamma_max, gamma_min, _, _ = stretch_per_face(mesh, p.reshape(-1, 2))

        surface = np.stack([q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]], axis=2)
        param = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        jacobian = surface @ np.linalg.inv(param)
        singular = np.linalg.svd(jacobian, compute_uv=False)
        np.testing.assert_allclose(gamma_max, singular[:, 0], rtol=1e-9)
        np.testing.assert_allclose(gamma_min, singular[:, 1], rtol=1e-9)


class TestMeshStretch(unittest.TestCase):

    def test_area_weighted_l2(self):
        """Half the area at stretch 2 and half isometric gives sqrt(2.5)"""
        mesh = disjoint_pair()
        uv = mesh.vertices[:, :2].copy()
        uv[:3] *= 0.5
        self.assertAlmostEqual(l2_mesh(mesh, uv), np.sqrt(2.5), places=12)
        self.assertAlmostEqual(linf_mesh(mesh, uv), 2.0, places=12)

    def test_scale_covariance(self):
        mesh = hemisphere_cap(6)
        uv = lscm_flatten(mesh).uv
        base = stretch_per_face(mesh, uv)[0]
        scaled = stretch_per_face(mesh, 3.0 * uv)[0]
        np.testing.assert_allclose(scaled, base / 3.0, rtol=1e-12)

    def test_degenerate_faces_listed(self):
        mesh = plane(3)
        uv = mesh.vertices[:, :2].copy()
        uv[4] = uv[0]
        with self.assertRaises(DegenerateParameterization) as ctx:
            l2_mesh(mesh, uv)
        self.assertIn(0, ctx.exception.face_ids)


class TestNormalizeScale(unittest.TestCase):

    def setUp(self):
        self.mesh = plane(5)

    def test_identity_unchanged(self):
        uv = UVMap(self.mesh.vertices[:, :2], self.mesh, Algorithm.LSCM)
        result = normalize_scale(uv)
        self.assertEqual(result.scale_factor, 1.0)
        np.testing.assert_array_equal(result.uv, uv.uv)

    def test_half_scale(self):
        uv = UVMap(0.5 * self.mesh.vertices[:, :2], self.mesh, Algorithm.LSCM)
        result = normalize_scale(uv)
        self.assertAlmostEqual(result.scale_factor, 2.0, places=12)
        np.testing.assert_allclose(result.uv, self.mesh.vertices[:, :2], atol=1e-12)

    def test_total_area_matches(self):
        mesh = hemisphere_cap(7)
        rng = np.random.default_rng(1)
        uv = UVMap(mesh.vertices[:, :2] * 3.7 + rng.normal(scale=1e-3, size=(mesh.n_vertices, 2)),
                   mesh, Algorithm.MM)
        result = normalize_scale(uv)
        tri = result.uv[mesh.faces]
        e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
        total_2d = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]).sum()
        self.assertAlmostEqual(total_2d / mesh.face_areas.sum(), 1.0, delta=1e-9)

    def test_zero_area(self):
        uv = UVMap(np.zeros((self.mesh.n_vertices, 2)), self.mesh, Algorithm.LSCM)
        with self.assertRaises(DegenerateParameterization):
            normalize_scale(uv)


class TestAngularAndAreaError(unittest.TestCase):

    def test_exact_angles(self):
        phi = np.full((2, 3), np.pi / 3)
        self.assertEqual(angular_error(phi, phi.copy()), (0.0, 0.0))

    def test_single_corner_off(self):
        """One corner 0.1 away from π/3 costs (9/π²)·0.01"""
        phi = np.full((1, 3), np.pi / 3)
        alpha = phi.copy()
        alpha[0, 0] += 0.1
        f_alpha, f_mesh = angular_error(phi, alpha)
        self.assertAlmostEqual(f_alpha, 9.0 / np.pi ** 2 * 0.01, places=12)
        self.assertAlmostEqual(f_mesh, f_alpha / 3.0, places=15)

    def test_single_triangle_area(self):
        mesh = TriMesh3([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        per_face, mean = area_error(mesh, [[0, 0], [3, 0], [0, 7]])
        self.assertEqual(mean, 0.0)
        self.assertEqual(per_face.tolist(), [0.0])

    def test_three_to_one(self):
        """Equal 3D faces at 3:1 in 2D share 3/4 and 1/4 of the parameter area"""
        mesh = disjoint_pair()
        uv = mesh.vertices[:, :2].copy()
        uv[:3] *= np.sqrt(3.0)
        per_face, mean = area_error(mesh, uv)
        np.testing.assert_allclose(per_face, [1.0 / 3.0, 0.5], atol=1e-12)
        self.assertAlmostEqual(mean, 5.0 / 12.0, places=12)

    def test_scale_invariance(self):
        mesh = hemisphere_cap(6)
        uv = lscm_flatten(mesh).uv
        np.testing.assert_array_equal(area_error(mesh, uv)[0], area_error(mesh, 2.0 * uv)[0])


class TestComputeMetrics(unittest.TestCase):

    def setUp(self):
        self.mesh = hemisphere_cap(8)
        self.uv = lscm_flatten(self.mesh)

    def test_bounds(self):
        report = compute_metrics(self.mesh, self.uv)
        self.assertGreaterEqual(report.linf_mesh, report.l2_mesh)
        self.assertGreaterEqual(report.l2_mesh, 1.0 - 1e-12)
        self.assertGreaterEqual(report.e_mesh, 0.0)
        self.assertLess(report.e_mesh, 1.0)
        self.assertGreater(report.f_mesh, 0.0)
        self.assertEqual(report.flipped_face_ids, [])

    def test_planar_identity_is_undistorted(self):
        mesh = plane(6)
        report = compute_metrics(mesh, UVMap(mesh.vertices[:, :2], mesh, Algorithm.ABF))
        self.assertAlmostEqual(report.l2_mesh, 1.0, places=12)
        self.assertAlmostEqual(report.e_mesh, 0.0, places=12)
        self.assertLessEqual(report.f_mesh, 1e-20)

    def test_rigid_motion_invariance(self):
        """Metrics ignore 3D rotation of the surface and 2D rigid motion of the layout"""
        base = compute_metrics(self.mesh, self.uv)
        rotation = Rotation.from_euler('zyx', [0.4, 1.2, -0.3]).as_matrix()
        turned_mesh = self.mesh.with_vertices(self.mesh.vertices @ rotation.T + [1.0, -2.0, 0.5])
        c, s = np.cos(2.1), np.sin(2.1)
        moved_uv = self.uv.uv @ np.array([[c, -s], [s, c]]).T + [10.0, -4.0]
        moved = compute_metrics(turned_mesh, UVMap(moved_uv, turned_mesh, Algorithm.LSCM))
        for key in ('l2_mesh', 'linf_mesh', 'f_mesh', 'e_mesh'):
            self.assertAlmostEqual(getattr(moved, key), getattr(base, key), delta=1e-9, msg=key)

    def test_report_dict(self):
        data = compute_metrics(self.mesh, self.uv).to_dict()
        self.assertEqual(set(data), {'l2_mesh', 'linf_mesh', 'f_alpha', 'f_mesh', 'e_mesh',
                                     'flipped_face_ids', 'scale_factor', 'boundary'})
        self.assertEqual(set(data['boundary']), {'face_count', 'l2', 'linf', 'e'})
        self.assertIn('face_l2', compute_metrics(self.mesh, self.uv).to_dict(per_face=True))


class TestBoundaryRegion(unittest.TestCase):

    def setUp(self):
        self.mesh = plane(6)

    def test_boundary_face_count(self):
        """Test a 6×6 grid has 32 of its 50 faces touching the rim"""
        self.assertEqual(len(boundary_faces(self.mesh)), 32)

    def test_planar_identity(self):
        mesh = self.mesh
        boundary = compute_metrics(mesh, UVMap(mesh.vertices[:, :2], mesh, Algorithm.ABF)).boundary
        self.assertEqual(boundary.face_count, 32)
        self.assertAlmostEqual(boundary.l2, 1.0, places=12)
        self.assertAlmostEqual(boundary.linf, 1.0, places=12)
        self.assertAlmostEqual(boundary.e, 0.0, places=12)

    def test_interior_distortion_leaves_rim_clean(self):
        """Test moving an interior vertex inside its star distorts only the interior faces"""
        mesh = self.mesh
        uv = mesh.vertices[:, :2].copy()
        uv[2 * 6 + 2] += [0.3, 0.2]
        report = compute_metrics(mesh, UVMap(uv, mesh, Algorithm.MM))
        self.assertGreater(report.linf_mesh, 1.01)
        self.assertGreater(report.l2_mesh, 1.0 + 1e-6)
        self.assertAlmostEqual(report.boundary.l2, 1.0, places=9)
        self.assertAlmostEqual(report.boundary.linf, 1.0, places=9)
        self.assertAlmostEqual(report.boundary.e, 0.0, places=9)

    def test_region_bounded_by_whole_mesh(self):
        mesh = hemisphere_cap(8)
        report = compute_metrics(mesh, lscm_flatten(mesh))
        self.assertLessEqual(report.boundary.linf, report.linf_mesh)
        self.assertLessEqual(report.boundary.l2, report.boundary.linf + 1e-12)
        self.assertGreaterEqual(report.boundary.e, 0.0)

    def test_empty_region(self):
        values = np.ones(4)
        self.assertIsNone(region_metrics([], values, values, values, values))


if __name__ == '__main__':
    unittest.main()
