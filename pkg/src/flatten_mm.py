"""
Material-modeling flattening: a mass-spring sheet settling onto the plane z = 0
"""

import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
from scipy import sparse

from .errors import ConfigError, Diverged, InvalidMesh
from .flatten_lscm import Algorithm, UVMap
from .mesh_core import TriMesh3, edges, write_obj

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 1000


@dataclass(frozen=True)
class MMConfig:
    """
    Physical parameters of the mass-spring simulation

    ke_threshold of None means 1e-8 times the vertex count.
    """
    vertex_mass: float = 1.0
    stiffness: float = 1000.0
    damping: float = 5.0
    gravity: float = 10.0
    timestep: float = 1e-3
    ke_threshold: Optional[float] = None
    max_steps: int = 500000
    collision_restitution: float = 0.0

    def __post_init__(self):
        for name in ('vertex_mass', 'stiffness', 'timestep'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"MMConfig.{name} must be positive, got {value}")
        for name in ('damping', 'gravity'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigError(f"MMConfig.{name} must be non-negative, got {value}")
        if self.ke_threshold is not None and not self.ke_threshold > 0:
            raise ConfigError(f"MMConfig.ke_threshold must be positive, got {self.ke_threshold}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigError(f"MMConfig.max_steps must be a positive integer, got {self.max_steps}")
        if not 0.0 <= self.collision_restitution <= 1.0:
            raise ConfigError(f"MMConfig.collision_restitution must lie in [0, 1], "
                              f"got {self.collision_restitution}")
        bound = 2.0 * np.sqrt(self.vertex_mass / self.stiffness)
        if not self.timestep < bound:
            raise ConfigError(f"MMConfig.timestep {self.timestep} violates the stability bound "
                              f"2*sqrt(mass/stiffness) = {bound:.6g}")

    def threshold_for(self, n_vertices: int) -> float:
        return self.ke_threshold if self.ke_threshold is not None else 1e-8 * n_vertices

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values) -> 'MMConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown MMConfig fields: {sorted(unknown)}")
        return cls(**values)

    def with_overrides(self, **overrides) -> 'MMConfig':
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True, eq=False)
class SpringSystem:
    """
    Point masses joined by edge springs

    Attributes:
        positions, velocities: (n, 3) state
        springs: (s, 2) vertex pairs in fixed order
        rest_lengths: (s,) spring rest lengths
        config: physical parameters
        step_count: steps taken so far
        mesh: source mesh, used for projection and trajectory dumps
        incidence: (s, n) sparse matrix with -1 at the first and +1 at the second endpoint
    """
    positions: np.ndarray
    velocities: np.ndarray
    springs: np.ndarray
    rest_lengths: np.ndarray
    config: MMConfig
    step_count: int = 0
    mesh: Optional[TriMesh3] = None
    incidence: Optional[sparse.csr_matrix] = None
    converged: bool = False
    max_plane_deviation: float = 0.0

    def __post_init__(self):
        if np.any(~(np.asarray(self.rest_lengths) > 0)):
            raise InvalidMesh("spring rest lengths must be positive")
        if self.incidence is None:
            springs = np.asarray(self.springs, dtype=np.int64).reshape(-1, 2)
            count = len(springs)
            rows = np.repeat(np.arange(count), 2)
            vals = np.tile([-1.0, 1.0], count)
            matrix = sparse.csr_matrix((vals, (rows, springs.ravel())), shape=(count, len(self.positions)))
            object.__setattr__(self, 'springs', springs)
            object.__setattr__(self, 'incidence', matrix)

    @property
    def n_masses(self) -> int:
        return len(self.positions)


def _plane_alignment(mesh: TriMesh3) -> np.ndarray:
    """Rotation taking the best-fit plane normal (oriented with the surface normals) to +z"""
    centered = mesh.vertices - mesh.vertices.mean(axis=0)
    _, vectors = np.linalg.eigh(centered.T @ centered)
    normal = vectors[:, 0]

    tri = mesh.vertices[mesh.faces]
    face_normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    if float(face_normals.sum(axis=0) @ normal) < 0:
        normal = -normal

    z_axis = np.array([0.0, 0.0, 1.0])
    axis = np.cross(normal, z_axis)
    sin_angle = float(np.linalg.norm(axis))
    cos_angle = float(normal @ z_axis)
    if sin_angle < 1e-12:
        return np.eye(3) if cos_angle > 0 else np.diag([1.0, -1.0, -1.0])
    k = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + k + k @ k * ((1.0 - cos_angle) / sin_angle ** 2)


def build_spring_system(mesh: TriMesh3, config: Optional[MMConfig] = None) -> SpringSystem:
    """
    One unit mass per vertex and one spring per unique edge

    The mesh is rotated so its best-fit plane is parallel to z = 0, then lifted
    so its lowest point touches the plane. Velocities start at zero.
    """
    config = config or MMConfig()
    springs = edges(mesh)
    rest = np.linalg.norm(mesh.vertices[springs[:, 1]] - mesh.vertices[springs[:, 0]], axis=1)

    positions = mesh.vertices @ _plane_alignment(mesh).T
    positions[:, 2] -= positions[:, 2].min()

    logger.debug("Spring system for %s: %d masses, %d springs", mesh.name, mesh.n_vertices, len(springs))
    return SpringSystem(positions=positions, velocities=np.zeros_like(positions), springs=springs,
                        rest_lengths=rest, config=config, mesh=mesh)


def spring_forces(system: SpringSystem) -> np.ndarray:
    """Hooke forces k(|d| - rest) d̂ accumulated on every mass"""
    delta = system.incidence @ system.positions
    length = np.linalg.norm(delta, axis=1)
    magnitude = system.config.stiffness * (length - system.rest_lengths) / length
    # incidence.T gives the energy gradient; force is its negative
    return -(system.incidence.T @ (magnitude[:, None] * delta))


def kinetic_energy(system: SpringSystem) -> float:
    return 0.5 * system.config.vertex_mass * float(np.sum(system.velocities ** 2))


def mechanical_energy(system: SpringSystem) -> float:
    """Spring potential plus kinetic energy"""
    length = np.linalg.norm(system.incidence @ system.positions, axis=1)
    potential = 0.5 * system.config.stiffness * float(np.sum((length - system.rest_lengths) ** 2))
    return potential + kinetic_energy(system)


def step(system: SpringSystem) -> SpringSystem:
    """
    One semi-implicit Euler step followed by plane collision

    Raises:
        Diverged: the new state is not finite
    """
    config = system.config
    force = spring_forces(system) - config.damping * system.velocities
    force[:, 2] -= config.vertex_mass * config.gravity

    velocities = system.velocities + config.timestep * force / config.vertex_mass
    positions = system.positions + config.timestep * velocities

    below = positions[:, 2] < 0.0
    positions[below, 2] = 0.0
    velocities[below, 2] = -config.collision_restitution * velocities[below, 2]

    count = system.step_count + 1
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
        raise Diverged(f"Mass-spring state became non-finite at step {count}", step_count=count)
    return replace(system, positions=positions, velocities=velocities, step_count=count)


def simulate(system: SpringSystem, dump_every: Optional[int] = None,
             dump: Optional[Callable[[SpringSystem], None]] = None) -> SpringSystem:
    """
    Step until kinetic energy drops to the threshold or max_steps is reached

    Args:
        system: starting state
        dump_every: call ``dump`` every this many steps
        dump: trajectory callback receiving the current state

    Returns:
        The final state with ``converged`` and ``max_plane_deviation`` filled in
    """
    config = system.config
    threshold = config.threshold_for(system.n_masses)
    state = system
    converged = False
    while state.step_count < config.max_steps:
        state = step(state)
        energy = kinetic_energy(state)
        if dump_every and dump is not None and state.step_count % dump_every == 0:
            dump(state)
        if state.step_count % PROGRESS_EVERY == 0:
            logger.debug("MM step %d: kinetic energy %.3e", state.step_count, energy)
        if energy <= threshold:
            converged = True
            break

    deviation = float(np.abs(state.positions[:, 2]).max(initial=0.0))
    if converged:
        logger.info("MM settled after %d steps (max |z| %.3e)", state.step_count, deviation)
    else:
        logger.warning("MM did not settle within %d steps (kinetic energy %.3e)",
                       config.max_steps, kinetic_energy(state))
    return replace(state, converged=converged, max_plane_deviation=deviation)


def project_to_plane(system: SpringSystem, mesh: Optional[TriMesh3] = None) -> UVMap:
    """Drop z from the settled positions"""
    mesh = mesh or system.mesh
    if mesh is None:
        raise ValueError("project_to_plane needs the source mesh")
    max_z = float(np.abs(system.positions[:, 2]).max(initial=0.0))
    return UVMap(system.positions[:, :2], mesh, Algorithm.MM, {
        'steps': system.step_count,
        'converged': system.converged,
        'max_z': max_z,
    })


def detect_folds(uv: UVMap) -> List[int]:
    """Faces whose 2D orientation disagrees with the majority"""
    return uv.flipped_faces()


def mm_flatten(mesh: TriMesh3, config: Optional[MMConfig] = None, dump_every: Optional[int] = None,
               dump_dir=None) -> UVMap:
    """
    Build, simulate and project; optionally dump an OBJ snapshot every ``dump_every`` steps
    """
    system = build_spring_system(mesh, config)
    dump = None
    if dump_every and dump_dir is not None:
        out = Path(dump_dir)

        def dump(state):
            write_obj(mesh.with_vertices(state.positions), out / f"{mesh.name}_mm_{state.step_count:08d}.obj",
                      intensity_sidecar=False)

    final = simulate(system, dump_every=dump_every, dump=dump)
    result = project_to_plane(final, mesh)
    folds = detect_folds(result)
    result.diagnostics['fold_face_ids'] = folds
    result.diagnostics['flipped_faces'] = len(folds)
    if folds:
        logger.warning("MM flattening of %s folded %d faces", mesh.name, len(folds))
    return result
