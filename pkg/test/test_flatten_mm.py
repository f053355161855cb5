"""
Unit tests for the mass-spring flattening simulation
"""

import sys
import os
import unittest
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.errors import ConfigError, Diverged, InvalidMesh
from src.flatten_abf import abf_flatten
from src.flatten_lscm import Algorithm, lscm_flatten
from src.flatten_mm import (MMConfig, SpringSystem, build_spring_system, spring_forces, step,
                            simulate, project_to_plane, mechanical_energy, mm_flatten)
from src.mesh_core import TriMesh3
from src.metrics import compute_metrics
from src.synthetic import plane, cylinder_sector, hemisphere_cap, ripple
from src.utils import edge_length_error


def two_masses(gap, velocities=None, **config):
    positions = np.array([[0.0, 0.0, 0.0], [gap, 0.0, 0.0]])
    if velocities is None:
        velocities = np.zeros_like(positions)
    return SpringSystem(positions=positions, velocities=np.asarray(velocities, dtype=float),
                        springs=np.array([[0, 1]]), rest_lengths=np.array([1.0]),
                        config=MMConfig(**config))


class TestMMConfig(unittest.TestCase):

    def test_defaults(self):
        config = MMConfig()
        self.assertEqual(config.stiffness, 1000.0)
        self.assertEqual(config.timestep, 1e-3)
        self.assertAlmostEqual(config.threshold_for(100), 1e-6)

    def test_stability_bound(self):
        """Timesteps at or above 2*sqrt(m/k) are rejected"""
        with self.assertRaises(ConfigError):
            MMConfig(timestep=0.1)

    def test_invalid_values(self):
        for bad in ({'vertex_mass': -1.0}, {'damping': -0.5}, {'collision_restitution': 1.5},
                    {'max_steps': 0}, {'ke_threshold': 0.0}):
            with self.assertRaises(ConfigError, msg=str(bad)):
                MMConfig(**bad)

    def test_from_dict_rejects_unknown(self):
        with self.assertRaises(ConfigError):
            MMConfig.from_dict({'stiffness': 10.0, 'spring_count': 3})

    def test_overrides_skip_none(self):
        config = MMConfig().with_overrides(stiffness=2000.0, damping=None)
        self.assertEqual(config.stiffness, 2000.0)
        self.assertEqual(config.damping, 5.0)


class TestSpringSystem(unittest.TestCase):

    def test_single_triangle(self):
        mesh = TriMesh3([[0, 0, 0], [3, 0, 0], [0, 4, 0]], [[0, 1, 2]])
        system = build_spring_system(mesh)
        self.assertEqual(system.n_masses, 3)
        self.assertEqual(len(system.springs), 3)
        np.testing.assert_allclose(system.rest_lengths, [3.0, 4.0, 5.0])

    def test_grid_spring_count(self):
        """10x10 grid: 90 horizontal, 90 vertical and 81 diagonal springs"""
        system = build_spring_system(plane(10))
        self.assertEqual(system.n_masses, 100)
        self.assertEqual(len(system.springs), 261)

    def test_initial_state(self):
        system = build_spring_system(hemisphere_cap(6))
        self.assertEqual(system.positions[:, 2].min(), 0.0)
        self.assertTrue(np.all(system.velocities == 0.0))
        self.assertEqual(system.step_count, 0)

    def test_curved_patch_rests_on_its_rim(self):
        """Normals end up pointing up, so the rim is lowest"""
        system = build_spring_system(hemisphere_cap(5))
        self.assertGreater(system.positions[12, 2], system.positions[0, 2])
        self.assertEqual(system.positions[0, 2], 0.0)

    def test_rest_lengths_positive(self):
        with self.assertRaises(InvalidMesh):
            SpringSystem(positions=np.zeros((2, 3)), velocities=np.zeros((2, 3)), springs=np.array([[0, 1]]),
                         rest_lengths=np.array([0.0]), config=MMConfig())


class TestStep(unittest.TestCase):

    def test_stretched_spring_pulls_together(self):
        system = two_masses(1.1, gravity=0.0, damping=0.0)
        forces = spring_forces(system)
        np.testing.assert_allclose(forces[0], [100.0, 0.0, 0.0])
        np.testing.assert_allclose(forces[1], [-100.0, 0.0, 0.0])
        after = step(system)
        np.testing.assert_allclose(after.velocities[0], [0.1, 0.0, 0.0])
        np.testing.assert_allclose(after.velocities[1], [-0.1, 0.0, 0.0])
        self.assertEqual(after.step_count, 1)
        self.assertEqual(system.step_count, 0)

    def test_equilibrium_is_fixed_point(self):
        """A flat sheet at rest on the plane stays put without gravity"""
        system = build_spring_system(plane(5), MMConfig(gravity=0.0))
        after = step(system)
        np.testing.assert_allclose(after.positions, system.positions, atol=1e-12)
        np.testing.assert_allclose(after.velocities, 0.0, atol=1e-12)

    def test_plane_collision(self):
        system = two_masses(1.0, velocities=[[0, 0, -100.0], [0, 0, 0]], gravity=0.0, damping=0.0)
        after = step(system)
        self.assertEqual(after.positions[0, 2], 0.0)
        self.assertEqual(after.velocities[0, 2], 0.0)

    def test_non_finite_state_diverges(self):
        system = two_masses(1.0, velocities=[[np.inf, 0, 0], [0, 0, 0]])
        with self.assertRaises(Diverged) as ctx:
            step(system)
        self.assertEqual(ctx.exception.step_count, 1)

    def test_damped_energy_never_increases(self):
        """With damping and no gravity the mechanical energy decays step by step"""
        system = build_spring_system(plane(5), MMConfig(gravity=0.0, damping=20.0))
        rng = np.random.default_rng(5)
        noise = np.zeros_like(system.positions)
        noise[:, :2] = rng.uniform(-0.05, 0.05, size=(system.n_masses, 2))
        system = replace(system, positions=system.positions + noise)
        energy = mechanical_energy(system)
        self.assertGreater(energy, 0.0)
        for _ in range(200):
            system = step(system)
            current = mechanical_energy(system)
            self.assertLessEqual(current, energy * (1.0 + 1e-9) + 1e-15)
            energy = current


class TestSimulation(unittest.TestCase):

    def test_planar_grid_settles_at_once(self):
        mesh = plane(10)
        final = simulate(build_spring_system(mesh))
        self.assertTrue(final.converged)
        self.assertLessEqual(final.step_count, 2)
        uv = project_to_plane(final)
        self.assertEqual(uv.algorithm, Algorithm.MM)
        np.testing.assert_allclose(uv.uv, mesh.vertices[:, :2], atol=1e-6)

    def test_deterministic(self):
        config = MMConfig(max_steps=300)
        first = simulate(build_spring_system(hemisphere_cap(5), config))
        second = simulate(build_spring_system(hemisphere_cap(5), config))
        np.testing.assert_array_equal(first.positions, second.positions)
        self.assertEqual(first.step_count, 300)
        self.assertFalse(first.converged)

    def test_rotation_about_vertical_axis(self):
        """Rotating the input about z rotates the flattening the same way"""
        angle = 0.7
        c, s = np.cos(angle), np.sin(angle)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        mesh = hemisphere_cap(5)
        config = MMConfig(max_steps=2000)
        base = project_to_plane(simulate(build_spring_system(mesh, config)))
        turned_mesh = mesh.with_vertices(mesh.vertices @ rotation.T)
        turned = project_to_plane(simulate(build_spring_system(turned_mesh, config)))
        np.testing.assert_allclose(turned.uv, base.uv @ rotation[:2, :2].T, atol=1e-6)

    def test_cylinder_flattens_nearly_isometrically(self):
        mesh = cylinder_sector(10)
        uv = mm_flatten(mesh)
        self.assertTrue(uv.diagnostics['converged'])
        self.assertLessEqual(edge_length_error(mesh, uv), 0.01)

    def test_trajectory_dump(self):
        with tempfile.TemporaryDirectory() as tmp:
            uv = mm_flatten(plane(4), dump_every=1, dump_dir=tmp)
            self.assertTrue(uv.diagnostics['converged'])
            self.assertTrue((Path(tmp) / "plane_4_mm_00000001.obj").exists())
            self.assertEqual(uv.diagnostics['fold_face_ids'], [])

class TestCurvedSurfaces(unittest.TestCase):

    def test_hemisphere_settles_with_residual_error(self):
        """A sphere patch cannot lie flat without stretching some springs"""
        mesh = hemisphere_cap(6)
        uv = mm_flatten(mesh)
        self.assertTrue(uv.diagnostics['converged'])
        self.assertGreater(edge_length_error(mesh, uv), 0.0)

    def test_fine_cylinder_nearly_isometric(self):
        mesh = cylinder_sector(20)
        uv = mm_flatten(mesh)
        self.assertTrue(uv.diagnostics['converged'])
        self.assertLessEqual(edge_length_error(mesh, uv), 0.01)

    def test_comparison_with_angle_based(self):
        """
        Test all three algorithms finish on the curved grids and keep their ordering on angles

        MM and ABF stretch stay within a fraction of a percent of each other here, in either order.
        """
        for mesh in (hemisphere_cap(10), ripple(10)):
            reports = {
                Algorithm.LSCM: compute_metrics(mesh, lscm_flatten(mesh)),
                Algorithm.ABF: compute_metrics(mesh, abf_flatten(mesh)),
                Algorithm.MM: compute_metrics(mesh, mm_flatten(mesh)),
            }
            for algorithm, report in reports.items():
                msg = f"{mesh.name}/{algorithm.value}"
                for key in ('l2_mesh', 'linf_mesh', 'f_mesh', 'e_mesh'):
                    self.assertTrue(np.isfinite(getattr(report, key)), msg)
                self.assertGreaterEqual(report.l2_mesh, 1.0 - 1e-12, msg)
                self.assertGreaterEqual(report.linf_mesh, report.l2_mesh - 1e-12, msg)
                self.assertGreater(report.e_mesh, 0.0, msg)
            abf, mm = reports[Algorithm.ABF], reports[Algorithm.MM]
            self.assertLessEqual(abf.f_mesh, mm.f_mesh + 1e-12, mesh.name)
            self.assertLess(abs(mm.l2_mesh - abf.l2_mesh), 0.02, mesh.name)



if __name__ == '__main__':
    unittest.main()
