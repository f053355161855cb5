"""
Unit tests for least squares conformal flattening
"""

import sys
import os
import unittest

import numpy as np
from scipy.spatial.transform import Rotation
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.errors import SolverFailure
from src.flatten_lscm import Algorithm, UVMap, PinPair, select_pins, lscm_flatten, conformal_energy
from src.mesh_core import TriMesh3, edges
from src.metrics import compute_metrics
from src.synthetic import plane, cylinder_sector, cylinder_unroll, hemisphere_cap, collinear_grid
from src.utils import similarity_align_2d, rms_deviation


def edge_lengths(mesh, coords):
    pairs = edges(mesh)
    return np.linalg.norm(coords[pairs[:, 1]] - coords[pairs[:, 0]], axis=1)


class TestPinSelection(unittest.TestCase):

    def test_unit_square_tie(self):
        """Equal diagonals resolve to the smallest id pair"""
        mesh = TriMesh3([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
        pins = select_pins(mesh)
        self.assertEqual((pins.a, pins.b), (0, 2))
        self.assertAlmostEqual(pins.distance, np.sqrt(2.0), places=12)
        self.assertEqual(pins.position_a, (0.0, 0.0))

    def test_equilateral_triangle(self):
        mesh = TriMesh3([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]], [[0, 1, 2]])
        pins = select_pins(mesh)
        self.assertEqual((pins.a, pins.b), (0, 1))
        self.assertAlmostEqual(pins.distance, 1.0, places=12)

    def test_grid_corners(self):
        pins = select_pins(plane(10))
        self.assertEqual((pins.a, pins.b), (0, 99))
        self.assertAlmostEqual(pins.position_b[0], 9.0 * np.sqrt(2.0), places=12)

    def test_pin_pair_distinct(self):
        with self.assertRaises(ValueError):
            PinPair(3, 3, (0.0, 0.0), (1.0, 0.0))


class TestLSCM(unittest.TestCase):

    def setUp(self):
        self.plane = plane(10)
        self.cap = hemisphere_cap(8)

    def test_planar_grid_is_rigid_motion(self):
        """A planar mesh flattens to a congruent copy of itself"""
        uv = lscm_flatten(self.plane)
        self.assertEqual(uv.algorithm, Algorithm.LSCM)
        np.testing.assert_allclose(edge_lengths(self.plane, uv.uv),
                                   edge_lengths(self.plane, self.plane.vertices), atol=1e-6)
        self.assertEqual(uv.flipped_faces(), [])

    def test_pins_are_exact(self):
        uv = lscm_flatten(self.plane)
        a, b = uv.diagnostics['pins']
        self.assertEqual(tuple(uv.uv[a]), (0.0, 0.0))
        self.assertEqual(uv.uv[b, 1], 0.0)
        self.assertAlmostEqual(uv.uv[b, 0], 9.0 * np.sqrt(2.0), places=12)

    def test_planar_angular_error_zero(self):
        uv = lscm_flatten(self.plane)
        self.assertLessEqual(compute_metrics(self.plane, uv).f_mesh, 1e-8)

    def test_cylinder_matches_unrolling(self):
        """Developable cylinder sector flattens to its arc-length unrolling"""
        mesh = cylinder_sector(20)
        uv = lscm_flatten(mesh)
        reference = cylinder_unroll(20)
        aligned = similarity_align_2d(uv.uv, reference, allow_reflection=True)
        self.assertLessEqual(rms_deviation(aligned, reference), 1e-3)
        self.assertEqual(uv.flipped_faces(), [])

    def test_hemisphere_has_no_flips(self):
        uv = lscm_flatten(self.cap)
        self.assertEqual(uv.flipped_faces(), [])
        self.assertGreater(uv.diagnostics['conformal_energy'], 0.0)

    def test_solution_is_constrained_minimum(self):
        """Perturbing free vertices never lowers the conformal energy"""
        uv = lscm_flatten(self.cap)
        best = conformal_energy(self.cap, uv)
        pins = uv.diagnostics['pins']
        rng = np.random.default_rng(3)
        scale = 1e-3 * np.ptp(uv.uv[:, 0])
        for _ in range(100):
            noise = rng.normal(scale=scale, size=uv.uv.shape)
            noise[pins] = 0.0
            self.assertGreaterEqual(conformal_energy(self.cap, uv.uv + noise), best)

    def test_rotation_invariance(self):
        rotation = Rotation.from_euler('xyz', [0.3, -0.7, 1.1]).as_matrix()
        rotated = self.cap.with_vertices(self.cap.vertices @ rotation.T)
        np.testing.assert_allclose(lscm_flatten(rotated).uv, lscm_flatten(self.cap).uv, atol=1e-9)

    def test_collinear_mesh_fails(self):
        """Zero-area faces leave the system rank deficient"""
        with self.assertRaises(SolverFailure):
            lscm_flatten(collinear_grid(4))

    def test_custom_pins_must_be_on_boundary(self):
        with self.assertRaises(ValueError):
            lscm_flatten(self.plane, PinPair(0, 45, (0.0, 0.0), (1.0, 0.0)))


class TestUVMap(unittest.TestCase):

    def setUp(self):
        self.mesh = TriMesh3([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])

    def test_non_finite_rejected(self):
        with self.assertRaises(SolverFailure):
            UVMap([[0, 0], [1, 0], [np.nan, 1], [0, 1]], self.mesh, Algorithm.LSCM)

    def test_flipped_face_detection(self):
        """The minority orientation is reported as flipped"""
        uv = UVMap([[0, 0], [1, 0], [1, 1], [2, 0.5]], self.mesh, 'MM')
        self.assertEqual(uv.algorithm, Algorithm.MM)
        self.assertEqual(uv.flipped_faces(), [1])

    def test_orientation_tie_counts_as_positive(self):
        uv = UVMap([[0, 0], [1, 0], [1, 1], [2, 0.5]], self.mesh, 'MM')
        areas = uv.signed_areas()
        self.assertGreater(areas[0], 0)
        self.assertLess(areas[1], 0)


if __name__ == '__main__':
    unittest.main()
