"""
Angle-based flattening: solve for planar corner angles, then lay the triangles out
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverFailure
from .flatten_lscm import Algorithm, UVMap
from .mesh_core import TriMesh3, boundary_loop, boundary_vertex_mask, corner_angles_3d

logger = logging.getLogger(__name__)

ANGLE_EPS = 1e-5
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100
MIN_STEP = 1.0 / 64.0
HESSIAN_FLOOR = 1e-3
INCONSISTENCY_RATIO = 1e-3


@dataclass
class AngleSet:
    """Per-corner angle tables, each shaped (m, 3) and indexed like mesh.faces"""
    beta: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    weights: np.ndarray


@dataclass
class AbfSolution:
    angles: AngleSet
    constraint_residual_inf: float
    iterations: int
    converged: bool
    gradient_norm: float = 0.0
    face_residual: float = 0.0
    vertex_residual: float = 0.0
    sine_residual: float = 0.0
    energy_history: List[float] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return angle_energy(self.angles.alpha, self.angles.phi, self.angles.weights)


@dataclass(frozen=True)
class InconsistentAngles:
    """A vertex whose second placement disagreed with its first"""
    face_id: int
    vertex_id: int
    deviation: float


def optimal_angles(beta, mesh: TriMesh3) -> np.ndarray:
    """
    Rescale 3D angles so every interior vertex sums to 2π

    Boundary corners keep their 3D angle. The result is clamped to
    [ANGLE_EPS, π - ANGLE_EPS].
    """
    beta = np.asarray(beta, dtype=np.float64)
    interior = ~boundary_vertex_mask(mesh)
    sums = np.bincount(mesh.faces.ravel(), weights=beta.ravel(), minlength=mesh.n_vertices)
    scale = np.ones(mesh.n_vertices)
    scale[interior] = 2.0 * np.pi / sums[interior]
    phi = beta * scale[mesh.faces]
    return np.clip(phi, ANGLE_EPS, np.pi - ANGLE_EPS)


def abf_weights(phi) -> np.ndarray:
    return np.asarray(phi, dtype=np.float64) ** -2


def angle_energy(alpha, phi, weights) -> float:
    return float(np.sum(weights * (alpha - phi) ** 2))


class _AngleSystem:
    """Constraint bookkeeping for one mesh; corners are numbered 3f + j"""

    def __init__(self, mesh: TriMesh3):
        self.m = mesh.n_faces
        n_corners = 3 * self.m
        interior = ~boundary_vertex_mask(mesh)
        interior_ids = np.full(mesh.n_vertices, -1, dtype=np.int64)
        interior_ids[interior] = np.arange(np.count_nonzero(interior))
        self.n_interior = int(np.count_nonzero(interior))

        corners = np.arange(n_corners)
        self.corner_face = corners // 3
        local = corners % 3
        self.next_corner = self.corner_face * 3 + (local + 1) % 3
        self.prev_corner = self.corner_face * 3 + (local + 2) % 3

        vertex_of = interior_ids[mesh.faces.ravel()]
        self.wheel = np.flatnonzero(vertex_of >= 0)
        self.wheel_vertex = vertex_of[self.wheel]

        self.j_face = sparse.csr_matrix((np.ones(n_corners), (self.corner_face, corners)),
                                        shape=(self.m, n_corners))
        self.j_vertex = sparse.csr_matrix((np.ones(len(self.wheel)), (self.wheel_vertex, self.wheel)),
                                          shape=(self.n_interior, n_corners))
        self.n_constraints = self.m + 2 * self.n_interior

    def sine_jacobian(self, alpha):
        cot = 1.0 / np.tan(alpha)
        rows = np.concatenate([self.wheel_vertex, self.wheel_vertex])
        cols = np.concatenate([self.next_corner[self.wheel], self.prev_corner[self.wheel]])
        vals = np.concatenate([cot[cols[:len(self.wheel)]], -cot[cols[len(self.wheel):]]])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_interior, 3 * self.m))

    def residuals(self, alpha):
        face = np.bincount(self.corner_face, weights=alpha, minlength=self.m) - np.pi
        vertex = np.bincount(self.wheel_vertex, weights=alpha[self.wheel], minlength=self.n_interior) - 2.0 * np.pi
        log_sine = np.log(np.sin(alpha))
        sine = np.bincount(self.wheel_vertex,
                           weights=log_sine[self.next_corner[self.wheel]] - log_sine[self.prev_corner[self.wheel]],
                           minlength=self.n_interior)
        return face, vertex, sine

    def sine_product_residual(self, alpha) -> float:
        if not self.n_interior:
            return 0.0
        log_sine = np.log(np.sin(alpha))
        forward = np.exp(np.bincount(self.wheel_vertex, weights=log_sine[self.next_corner[self.wheel]],
                                     minlength=self.n_interior))
        backward = np.exp(np.bincount(self.wheel_vertex, weights=log_sine[self.prev_corner[self.wheel]],
                                      minlength=self.n_interior))
        return float(np.abs(forward - backward).max())

    def jacobian(self, alpha):
        return sparse.vstack([self.j_face, self.j_vertex, self.sine_jacobian(alpha)]).tocsr()

    def kkt_residual(self, alpha, lam, phi, weights):
        jac = self.jacobian(alpha)
        gradient = 2.0 * weights * (alpha - phi) + jac.T @ lam
        constraints = np.concatenate(self.residuals(alpha))
        return gradient, constraints, jac

    def hessian_diagonal(self, alpha, lam, weights):
        lam_sine = lam[self.m + self.n_interior:]
        coef = np.zeros(3 * self.m)
        np.add.at(coef, self.next_corner[self.wheel], lam_sine[self.wheel_vertex])
        np.add.at(coef, self.prev_corner[self.wheel], -lam_sine[self.wheel_vertex])
        diagonal = 2.0 * weights - coef / np.sin(alpha) ** 2
        return np.maximum(diagonal, HESSIAN_FLOOR * 2.0 * weights)


def _merit(gradient, constraints) -> float:
    values = [np.abs(gradient).max(initial=0.0), np.abs(constraints).max(initial=0.0)]
    return float(max(values))


def abf_solve(mesh: TriMesh3, phi, weights=None, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> AbfSolution:
    """
    Lagrange-Newton minimization of Σ w (α - φ)² under the planarity constraints

    Constraints: each face sums to π, each interior vertex sums to 2π, and
    around each interior vertex the product of sines of the following corners
    equals that of the preceding corners (iterated in log form).

    Args:
        mesh: disk-topology mesh
        phi: (m, 3) optimal angles
        weights: (m, 3) weights, φ⁻² when omitted
        tol: bound on the constraint residual and the Lagrangian gradient
        max_iter: Newton iteration limit

    Raises:
        SolverFailure: no convergence within max_iter, or a singular KKT system;
            the exception carries the last AbfSolution
    """
    if not tol > 0:
        raise ConfigError(f"ABF tolerance must be positive, got {tol}")
    if max_iter < 0:
        raise ConfigError(f"ABF max_iter must be non-negative, got {max_iter}")
    boundary_loop(mesh)

    phi = np.asarray(phi, dtype=np.float64)
    weights = abf_weights(phi) if weights is None else np.asarray(weights, dtype=np.float64)
    beta = corner_angles_3d(mesh)
    system = _AngleSystem(mesh)

    phi_flat = phi.ravel()
    w_flat = weights.ravel()
    alpha = phi_flat.copy()
    lam = np.zeros(system.n_constraints)
    history = [angle_energy(alpha, phi_flat, w_flat)]

    def snapshot(iterations, converged, gradient):
        face, vertex, sine = system.residuals(alpha)
        product = system.sine_product_residual(alpha)
        face_res = float(np.abs(face).max(initial=0.0))
        vertex_res = float(np.abs(vertex).max(initial=0.0))
        angles = AngleSet(beta=beta, phi=phi, alpha=alpha.reshape(-1, 3).copy(), weights=weights)
        return AbfSolution(
            angles=angles,
            constraint_residual_inf=max(face_res, vertex_res, product),
            iterations=iterations,
            converged=converged,
            gradient_norm=float(np.abs(gradient).max(initial=0.0)),
            face_residual=face_res,
            vertex_residual=vertex_res,
            sine_residual=product,
            energy_history=list(history),
        )

    gradient, constraints, jac = system.kkt_residual(alpha, lam, phi_flat, w_flat)
    for iteration in range(max_iter + 1):
        constraint_res = max(np.abs(constraints).max(initial=0.0), system.sine_product_residual(alpha))
        gradient_res = np.abs(gradient).max(initial=0.0)
        logger.debug("ABF iteration %d: constraints %.3e, gradient %.3e", iteration, constraint_res, gradient_res)
        if constraint_res <= tol and gradient_res <= tol:
            solution = snapshot(iteration, True, gradient)
            logger.info("ABF converged for %s in %d iterations (residual %.3e)",
                        mesh.name, iteration, solution.constraint_residual_inf)
            return solution
        if iteration == max_iter:
            break

        hessian = system.hessian_diagonal(alpha, lam, w_flat)
        kkt = sparse.bmat([[sparse.diags(hessian), jac.T], [jac, None]], format='csc')
        rhs = -np.concatenate([gradient, constraints])
        try:
            step = splu(kkt).solve(rhs)
        except RuntimeError as exc:
            raise SolverFailure(f"ABF KKT system is singular for '{mesh.name}': {exc}",
                                snapshot(iteration, False, gradient)) from exc
        if not np.all(np.isfinite(step)):
            raise SolverFailure(f"ABF Newton step is not finite for '{mesh.name}'",
                                snapshot(iteration, False, gradient))
        d_alpha, d_lam = step[:len(alpha)], step[len(alpha):]

        current = _merit(gradient, constraints)
        t = 1.0
        while True:
            trial_alpha = alpha + t * d_alpha
            trial_lam = lam + t * d_lam
            inside = np.all((trial_alpha > ANGLE_EPS) & (trial_alpha < np.pi - ANGLE_EPS))
            if inside:
                trial = system.kkt_residual(trial_alpha, trial_lam, phi_flat, w_flat)
                if _merit(trial[0], trial[1]) <= current or t <= MIN_STEP:
                    break
            elif t <= MIN_STEP:
                trial_alpha = np.clip(trial_alpha, ANGLE_EPS, np.pi - ANGLE_EPS)
                trial = system.kkt_residual(trial_alpha, trial_lam, phi_flat, w_flat)
                break
            t *= 0.5

        alpha, lam = trial_alpha, trial_lam
        gradient, constraints, jac = trial
        history.append(angle_energy(alpha, phi_flat, w_flat))

    solution = snapshot(max_iter, False, gradient)
    raise SolverFailure(f"ABF did not converge for '{mesh.name}' within {max_iter} iterations "
                        f"(constraint residual {solution.constraint_residual_inf:.3e})", solution)


def reconstruct_uv(mesh: TriMesh3, angles: AngleSet, scale_edge: int = 0) -> UVMap:
    """
    Lay triangles out breadth-first from one boundary edge using the law of sines

    Args:
        mesh: disk-topology mesh
        angles: AngleSet whose alpha drives the layout
        scale_edge: index k into boundary_loop(mesh); the edge (loop[k], loop[k+1])
            is placed from (0, 0) to (L, 0) with L its 3D length

    Returns:
        UVMap tagged ABF; diagnostics['inconsistent_angles'] lists every
        revisited vertex that landed more than 1e-3·L from its first placement
    """
    loop = boundary_loop(mesh)
    if not 0 <= scale_edge < len(loop):
        raise ValueError(f"scale_edge {scale_edge} outside boundary loop of length {len(loop)}")
    a, b = loop[scale_edge], loop[(scale_edge + 1) % len(loop)]
    length = float(np.linalg.norm(mesh.vertices[b] - mesh.vertices[a]))

    alpha = np.asarray(angles.alpha, dtype=np.float64)
    faces = mesh.faces.tolist()
    face_of = {(he[0], he[1]): i // 3 for i, he in enumerate(mesh.half_edges.tolist())}

    uv = np.full((mesh.n_vertices, 2), np.nan)
    placed = np.zeros(mesh.n_vertices, dtype=bool)
    visited = np.zeros(mesh.n_faces, dtype=bool)
    inconsistent = []

    def place_apex(face_id, p, q):
        # face runs p -> q -> r counter-clockwise; r sits left of p -> q
        corners = faces[face_id]
        jp = corners.index(p)
        jq, jr = (jp + 1) % 3, (jp + 2) % 3
        r = corners[jr]
        base = uv[q] - uv[p]
        side = np.hypot(base[0], base[1]) * np.sin(alpha[face_id, jq]) / np.sin(alpha[face_id, jr])
        angle = alpha[face_id, jp]
        c, s = np.cos(angle), np.sin(angle)
        direction = np.array([c * base[0] - s * base[1], s * base[0] + c * base[1]])
        target = uv[p] + direction / np.hypot(base[0], base[1]) * side
        if placed[r]:
            deviation = float(np.hypot(*(target - uv[r])))
            if deviation > INCONSISTENCY_RATIO * length:
                inconsistent.append(InconsistentAngles(face_id, r, deviation))
        else:
            uv[r] = target
            placed[r] = True

    seed = face_of[(a, b)]
    uv[a] = (0.0, 0.0)
    uv[b] = (length, 0.0)
    placed[[a, b]] = True
    place_apex(seed, a, b)
    visited[seed] = True
    queue = deque([seed])
    while queue:
        f = queue.popleft()
        corners = faces[f]
        for j in range(3):
            p, q = corners[j], corners[(j + 1) % 3]
            g = face_of.get((q, p))
            if g is None or visited[g]:
                continue
            visited[g] = True
            place_apex(g, q, p)
            queue.append(g)

    if not placed.all():
        raise SolverFailure(f"ABF layout left {int((~placed).sum())} vertices of '{mesh.name}' unplaced")
    if inconsistent:
        logger.warning("ABF layout of %s: %d vertices placed inconsistently (worst %.3e)",
                       mesh.name, len(inconsistent), max(r.deviation for r in inconsistent))
    return UVMap(uv, mesh, Algorithm.ABF, {'scale_edge': [a, b], 'inconsistent_angles': inconsistent})


def abf_flatten(mesh: TriMesh3, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                scale_edge: int = 0) -> UVMap:
    """Full ABF pipeline: 3D angles, optimal angles, Newton solve, layout"""
    beta = corner_angles_3d(mesh)
    phi = optimal_angles(beta, mesh)
    solution = abf_solve(mesh, phi, abf_weights(phi), tol=tol, max_iter=max_iter)
    result = reconstruct_uv(mesh, solution.angles, scale_edge)
    result.diagnostics.update({
        'iterations': solution.iterations,
        'converged': solution.converged,
        'constraint_residual_inf': solution.constraint_residual_inf,
        'face_residual': solution.face_residual,
        'vertex_residual': solution.vertex_residual,
        'sine_residual': solution.sine_residual,
        'angle_energy': solution.energy,
    })
    flipped = result.flipped_faces()
    result.diagnostics['flipped_faces'] = len(flipped)
    if flipped:
        logger.warning("ABF flattening of %s has %d flipped faces", mesh.name, len(flipped))
    return result
