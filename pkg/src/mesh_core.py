"""
Triangle mesh model for surface patches: loading, validation and geometric queries
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import trimesh
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from trimesh.exchange.obj import export_obj
from trimesh.visual import TextureVisuals

from .errors import InvalidMesh, NotADisk, ParseError

logger = logging.getLogger(__name__)

DEGENERATE_AREA_RATIO = 1e-9


def _frozen(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Texture:
    """Source image plus per-vertex coordinates into it (s, t in [0, 1], t up)"""
    image: np.ndarray
    source_uv: np.ndarray

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim == 3 and image.shape[2] == 4:
            image = image[:, :, :3]
        if image.ndim not in (2, 3) or (image.ndim == 3 and image.shape[2] != 3):
            raise InvalidMesh(f"Texture image must be HxW or HxWx3, got shape {image.shape}")
        if image.size and image.max() > 1.0:
            image = image / 255.0
        object.__setattr__(self, 'image', _frozen(image))
        object.__setattr__(self, 'source_uv', _frozen(np.asarray(self.source_uv, dtype=np.float64)))

    @property
    def is_rgb(self) -> bool:
        return self.image.ndim == 3


@dataclass(frozen=True, eq=False)
class TriMesh3:
    """
    Immutable triangulated surface patch

    Attributes:
        vertices: (n, 3) vertex positions in abstract length units
        faces: (m, 3) vertex indices, counter-clockwise about the face normal
        intensity: optional (n,) per-vertex scalar in [0, 1]
        texture: optional source image with per-vertex source coordinates
        name: label used in reports and artifact file names
    """
    vertices: np.ndarray
    faces: np.ndarray
    intensity: Optional[np.ndarray] = None
    texture: Optional[Texture] = None
    name: str = "mesh"

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise InvalidMesh(f"vertices must have shape (n, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise InvalidMesh(f"faces must have shape (m, 3), got {faces.shape}")
        if not np.all(np.isfinite(vertices)):
            raise InvalidMesh("vertices contain non-finite coordinates")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            bad = np.flatnonzero(np.any((faces < 0) | (faces >= len(vertices)), axis=1))
            raise InvalidMesh(f"face indices out of range in faces {bad.tolist()}")

        object.__setattr__(self, 'vertices', _frozen(vertices))
        object.__setattr__(self, 'faces', _frozen(faces))

        if self.intensity is not None:
            intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if intensity.shape != (len(vertices),):
                raise InvalidMesh(
                    f"intensity needs one value per vertex ({len(vertices)}), got {intensity.shape[0]}")
            if np.any(~np.isfinite(intensity)) or intensity.min() < 0.0 or intensity.max() > 1.0:
                raise InvalidMesh("intensity values must lie in [0, 1]")
            object.__setattr__(self, 'intensity', _frozen(intensity))

        if self.texture is not None and self.texture.source_uv.shape != (len(vertices), 2):
            raise InvalidMesh("texture source_uv needs one (s, t) pair per vertex")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def has_texture(self) -> bool:
        return self.intensity is not None or self.texture is not None

    def with_vertices(self, vertices) -> 'TriMesh3':
        """Same connectivity and attributes on new vertex positions"""
        return TriMesh3(vertices, self.faces, self.intensity, self.texture, self.name)

    @cached_property
    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return _frozen(0.5 * np.linalg.norm(cross, axis=1))

    @cached_property
    def half_edges(self) -> np.ndarray:
        """(3m, 2) directed edges; row 3f+j runs from corner j to corner j+1 of face f"""
        return _frozen(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2))

    @cached_property
    def edge_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique undirected edges (sorted pairs), half-edge → edge index, faces per edge"""
        undirected = np.sort(self.half_edges, axis=1)
        edges, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
        return _frozen(edges.reshape(-1, 2)), _frozen(inverse.reshape(-1)), _frozen(counts)


@dataclass
class ValidationReport:
    """Result of checking a mesh against the TriMesh3 invariants"""
    boundary_loop_count: int
    degenerate_face_ids: List[int] = field(default_factory=list)
    non_manifold_edges: List[Tuple[int, int]] = field(default_factory=list)
    is_disk: bool = False
    invalid_face_ids: List[int] = field(default_factory=list)
    misoriented_edges: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return (self.is_disk and not self.degenerate_face_ids and not self.invalid_face_ids
                and not self.misoriented_edges)

    def summary(self) -> str:
        parts = [f"boundary loops: {self.boundary_loop_count}"]
        if self.invalid_face_ids:
            parts.append(f"faces repeating a vertex: {self.invalid_face_ids}")
        if self.degenerate_face_ids:
            parts.append(f"degenerate faces: {self.degenerate_face_ids}")
        if self.non_manifold_edges:
            parts.append(f"non-manifold edges: {self.non_manifold_edges}")
        if self.misoriented_edges:
            parts.append(f"inconsistently oriented edges: {self.misoriented_edges}")
        return "; ".join(parts)

    def to_dict(self):
        return {
            'boundary_loop_count': self.boundary_loop_count,
            'degenerate_face_ids': list(self.degenerate_face_ids),
            'non_manifold_edges': [list(e) for e in self.non_manifold_edges],
            'is_disk': self.is_disk,
            'invalid_face_ids': list(self.invalid_face_ids),
            'misoriented_edges': [list(e) for e in self.misoriented_edges],
        }


def triangle_corner_angles(tri: np.ndarray) -> np.ndarray:
    """
    Interior angles of a stack of triangles

    Args:
        tri: (m, 3, d) corner positions with d = 2 or 3

    Returns:
        (m, 3) angles in radians; column j is the angle at corner j
    """
    tri = np.asarray(tri, dtype=np.float64)
    angles = np.empty(tri.shape[:2])
    for j in range(3):
        a = tri[:, (j + 1) % 3] - tri[:, j]
        b = tri[:, (j + 2) % 3] - tri[:, j]
        if tri.shape[2] == 2:
            sin_part = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        else:
            sin_part = np.linalg.norm(np.cross(a, b), axis=1)
        angles[:, j] = np.arctan2(sin_part, np.einsum('ij,ij->i', a, b))
    return angles


def corner_angles_3d(mesh: TriMesh3) -> np.ndarray:
    """Per-corner 3D angles β, shape (m, 3)"""
    return triangle_corner_angles(mesh.vertices[mesh.faces])


def face_area_3d(mesh: TriMesh3, face_id: int) -> float:
    if not 0 <= face_id < mesh.n_faces:
        raise IndexError(f"face id {face_id} out of range for {mesh.n_faces} faces")
    return float(mesh.face_areas[face_id])


def total_area_3d(mesh: TriMesh3) -> float:
    total = 0.0
    for area in mesh.face_areas.tolist():
        total += area
    return total


def edges(mesh: TriMesh3) -> np.ndarray:
    """Unique undirected edges as sorted (i, j) pairs"""
    return mesh.edge_table[0]


def boundary_half_edges(mesh: TriMesh3) -> np.ndarray:
    """Directed boundary edges oriented as in their face, interior on the left"""
    _, inverse, counts = mesh.edge_table
    return mesh.half_edges[counts[inverse] == 1]


def boundary_vertex_mask(mesh: TriMesh3) -> np.ndarray:
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[boundary_half_edges(mesh).ravel()] = True
    return mask


def vertex_corners(mesh: TriMesh3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Corners grouped by vertex

    Returns:
        order: corner ids (3f + j) sorted by vertex, stable in face order
        offsets: (n + 1,) slice bounds so vertex v owns order[offsets[v]:offsets[v + 1]]
    """
    flat = mesh.faces.ravel()
    order = np.argsort(flat, kind='stable')
    offsets = np.zeros(mesh.n_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(flat, minlength=mesh.n_vertices), out=offsets[1:])
    return order, offsets


def _count_boundary_loops(mesh: TriMesh3) -> int:
    boundary = np.sort(boundary_half_edges(mesh), axis=1)
    if len(boundary) == 0:
        return 0
    verts, local = np.unique(boundary, return_inverse=True)
    local = local.reshape(-1, 2)
    graph = coo_matrix((np.ones(len(local)), (local[:, 0], local[:, 1])), shape=(len(verts), len(verts)))
    n_components, _ = connected_components(graph, directed=False)
    # cycle rank of the boundary graph: a pinched vertex splits one walk into two loops
    return int(len(boundary) - len(verts) + n_components)


def validate(mesh: TriMesh3) -> ValidationReport:
    """Check every TriMesh3 invariant without modifying the mesh"""
    faces = mesh.faces
    invalid = np.flatnonzero((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                             | (faces[:, 0] == faces[:, 2]))

    areas = mesh.face_areas
    mean_area = float(areas.mean()) if len(areas) else 0.0
    degenerate = np.flatnonzero(areas < DEGENERATE_AREA_RATIO * mean_area)

    edge_list, _, counts = mesh.edge_table
    non_manifold = [tuple(int(v) for v in e) for e in edge_list[counts > 2]]

    directed, directed_counts = np.unique(mesh.half_edges, axis=0, return_counts=True)
    repeated = np.unique(np.sort(directed.reshape(-1, 2)[directed_counts > 1], axis=1), axis=0)
    misoriented = [tuple(int(v) for v in e) for e in repeated.reshape(-1, 2)]

    loops = _count_boundary_loops(mesh) if mesh.n_faces else 0
    report = ValidationReport(
        boundary_loop_count=loops,
        degenerate_face_ids=degenerate.tolist(),
        non_manifold_edges=non_manifold,
        is_disk=(loops == 1 and not non_manifold),
        invalid_face_ids=invalid.tolist(),
        misoriented_edges=misoriented,
    )
    logger.debug("Validated %s: %s", mesh.name, report.summary())
    return report


def check_mesh(mesh: TriMesh3) -> TriMesh3:
    """Return the mesh unchanged, or raise InvalidMesh carrying the report"""
    report = validate(mesh)
    if not report.is_valid:
        raise InvalidMesh(f"Mesh '{mesh.name}' is not a valid disk patch ({report.summary()})", report)
    return mesh


def boundary_loop(mesh: TriMesh3) -> List[int]:
    """
    The single boundary loop with the interior on the left,
    starting at the lowest boundary vertex id
    """
    report = validate(mesh)
    if not report.is_disk:
        raise NotADisk(f"Mesh '{mesh.name}' has {report.boundary_loop_count} boundary loops")

    boundary = boundary_half_edges(mesh)
    tails, counts = np.unique(boundary[:, 0], return_counts=True)
    if np.any(counts > 1):
        raise NotADisk(f"Boundary of '{mesh.name}' is pinched at vertex {int(tails[counts > 1][0])}")
    successor = np.full(mesh.n_vertices, -1, dtype=np.int64)
    successor[boundary[:, 0]] = boundary[:, 1]

    start = int(tails[0])
    loop = [start]
    current = int(successor[start])
    while current != start:
        if current < 0 or len(loop) >= len(boundary):
            raise NotADisk(f"Boundary of '{mesh.name}' does not close consistently")
        loop.append(current)
        current = int(successor[current])
    if len(loop) != len(boundary):
        raise NotADisk(f"Boundary of '{mesh.name}' has more than one loop")
    return loop


# ---------------------------------------------------------------------------
# File formats

def load_mesh(path, format: Optional[str] = None) -> TriMesh3:
    """
    Load a triangulated surface patch

    Args:
        path: OBJ or PLY file
        format: 'OBJ' or 'PLY'; inferred from the suffix when omitted

    Returns:
        A checked TriMesh3. Intensity comes from vertex colors, a PLY
        ``intensity``/``quality`` property, or a ``<stem>.intensity.txt``
        sidecar when present. An OBJ with ``vt`` records and a ``<stem>.png``
        sidecar also carries a Texture.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Mesh file not found: {path}")

    fmt = (format or path.suffix.lstrip('.')).upper()
    if fmt not in ('OBJ', 'PLY'):
        raise ParseError(f"Unsupported mesh format '{fmt}' for {path}")
    if fmt == 'OBJ':
        try:
            path.read_bytes().decode('utf-8')
        except UnicodeDecodeError as exc:
            raise ParseError(f"{path}: OBJ is not valid UTF-8 text ({exc})") from exc

    loaded = _load_trimesh(path, fmt)
    vertices = np.asarray(loaded.vertices, dtype=np.float64)
    faces = np.asarray(loaded.faces, dtype=np.int64).reshape(-1, 3)
    if len(vertices) == 0 or len(faces) == 0:
        raise ParseError(f"{path}: no triangles could be read")
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise ParseError(f"{path}: faces reference vertices that are not in the file")

    intensity = _intensity_from_colors(loaded)
    if fmt == 'PLY':
        scalar = _ply_vertex_scalar(loaded, ('intensity', 'quality'))
        if scalar is not None:
            intensity = scalar

    sidecar = path.with_suffix('.intensity.txt')
    if sidecar.exists():
        try:
            intensity = np.loadtxt(sidecar, dtype=np.float64).reshape(-1)
        except ValueError as exc:
            raise ParseError(f"Invalid intensity sidecar {sidecar}: {exc}") from exc

    texture = None
    image_path = path.with_suffix('.png')
    source_uv = _source_uv(loaded)
    if source_uv is not None and image_path.exists():
        import matplotlib.image as mpimg
        texture = Texture(mpimg.imread(image_path), source_uv)

    mesh = TriMesh3(vertices, faces, intensity=intensity, texture=texture, name=path.stem)
    logger.info("Loaded %s: %d vertices, %d faces", path, mesh.n_vertices, mesh.n_faces)
    return check_mesh(mesh)


def _load_trimesh(path: Path, fmt: str) -> trimesh.Trimesh:
    # file order of vertices and faces is kept; OBJ texture seams are not split
    options = {'maintain_order': True} if fmt == 'OBJ' else {}
    try:
        loaded = trimesh.load(str(path), file_type=fmt.lower(), process=False, force='mesh', **options)
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if isinstance(loaded, trimesh.Scene):
        if not loaded.geometry:
            raise ParseError(f"{path}: no triangles could be read")
        loaded = trimesh.util.concatenate(tuple(loaded.geometry.values()))
    if not isinstance(loaded, trimesh.Trimesh):
        raise ParseError(f"{path}: expected a triangle mesh, got {type(loaded).__name__}")
    return loaded


def _intensity_from_colors(loaded: trimesh.Trimesh) -> Optional[np.ndarray]:
    if getattr(loaded.visual, 'kind', None) != 'vertex':
        return None
    colors = np.asarray(loaded.visual.vertex_colors, dtype=np.float64)[:, :3] / 255.0
    if np.all(colors == colors[:, :1]):
        return colors[:, 0].copy()
    return colors.mean(axis=1)


def _ply_vertex_scalar(loaded: trimesh.Trimesh, names) -> Optional[np.ndarray]:
    """A scalar PLY vertex property, from trimesh's vertex attributes or raw element data"""
    attributes = getattr(loaded, 'vertex_attributes', None) or {}
    raw = loaded.metadata.get('_ply_raw', {}).get('vertex', {}).get('data')
    for name in names:
        if name in attributes:
            return np.asarray(attributes[name], dtype=np.float64).reshape(-1)
        try:
            return np.asarray(raw[name], dtype=np.float64).reshape(-1)
        except (KeyError, IndexError, TypeError, ValueError):
            continue
    return None


def _source_uv(loaded: trimesh.Trimesh) -> Optional[np.ndarray]:
    uv = getattr(loaded.visual, 'uv', None)
    if uv is None:
        return None
    uv = np.asarray(uv, dtype=np.float64)
    if uv.shape != (len(loaded.vertices), 2) or not np.all(np.isfinite(uv)):
        return None
    return uv


def write_obj(mesh: TriMesh3, path, uv=None, intensity_sidecar: bool = True):
    """
    Write a mesh as OBJ

    Coordinates are written with 17 decimals. Intensity is written as gray
    vertex colors (8-bit in the file) and, unless ``intensity_sidecar`` is
    False, exactly to ``<stem>.intensity.txt``. When ``uv`` (a UVMap or an
    (n, 2) array) is given, one ``vt`` per vertex is written and faces
    reference it; vertex colors are then omitted.
    """
    path = Path(path)
    visual = None
    if uv is not None:
        uv_array = np.asarray(getattr(uv, 'uv', uv), dtype=np.float64)
        if uv_array.shape != (mesh.n_vertices, 2):
            raise ValueError(f"uv must have shape ({mesh.n_vertices}, 2)")
        visual = TextureVisuals(uv=uv_array)

    colors = None
    if mesh.intensity is not None and visual is None:
        gray = np.round(mesh.intensity * 255.0).astype(np.uint8)
        colors = np.column_stack([gray, gray, gray])

    shape = trimesh.Trimesh(vertices=mesh.vertices, faces=mesh.faces, vertex_colors=colors,
                            visual=visual, process=False, validate=False)
    text = export_obj(shape, include_normals=False, include_color=colors is not None,
                      include_texture=visual is not None, digits=17)

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    if mesh.intensity is not None and intensity_sidecar:
        np.savetxt(path.with_suffix('.intensity.txt'), mesh.intensity, fmt='%.17g')
