"""
Software rasterization of flattenings: texture images, error heatmaps and PPM output
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from matplotlib import colormaps
from scipy.ndimage import map_coordinates

from .errors import EmptyParameterization, LengthMismatch, MissingTexture, ParseError
from .flatten_lscm import UVMap
from .mesh_core import TriMesh3

logger = logging.getLogger(__name__)

DEFAULT_PADDING = 2
COLORMAP_NAME = 'viridis'


@dataclass(frozen=True, eq=False)
class RasterImage:
    """
    8-bit image of a parameterization

    Attributes:
        pixels: (H, W) grayscale or (H, W, 3) RGB, row 0 at the top
        origin: UV point (u_min, v_max) mapped to pixel (padding, padding)
        scale: pixels per UV unit
        padding: empty border in pixels
        face_ids: (H, W) face drawn at each pixel, -1 for background
        fold_mask: (H, W) pixels covered by more than one face
    """
    pixels: np.ndarray
    origin: Tuple[float, float]
    scale: float
    padding: int
    face_ids: np.ndarray
    fold_mask: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim not in (2, 3) or self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {self.pixels.shape}")
        if not self.scale > 0:
            raise ValueError(f"image scale must be positive, got {self.scale}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_rgb(self) -> bool:
        return self.pixels.ndim == 3

    @property
    def covered(self) -> np.ndarray:
        return self.face_ids >= 0

    def pixel_center_uv(self, x: int, y: int) -> Tuple[float, float]:
        return (self.origin[0] + (x + 0.5 - self.padding) / self.scale,
                self.origin[1] - (y + 0.5 - self.padding) / self.scale)


@lru_cache(maxsize=1)
def _colormap_table() -> np.ndarray:
    rgba = colormaps[COLORMAP_NAME](np.arange(256))
    table = np.rint(rgba[:, :3] * 255.0).astype(np.uint8)
    table.setflags(write=False)
    return table


def colormap_table() -> np.ndarray:
    """The fixed 256-entry perceptual colormap used by heatmaps, (256, 3) uint8"""
    return _colormap_table()


def _layout(uv: np.ndarray, resolution: float, padding: int):
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if len(uv) == 0:
        raise EmptyParameterization("parameterization has no vertices")
    lo = uv.min(axis=0)
    hi = uv.max(axis=0)
    span = hi - lo
    if not np.all(np.isfinite(span)) or np.any(span <= 0):
        raise EmptyParameterization(f"parameterization has no extent (span {span.tolist()})")
    width = int(np.ceil(span[0] * resolution)) + 2 * padding
    height = int(np.ceil(span[1] * resolution)) + 2 * padding
    points = np.column_stack([(uv[:, 0] - lo[0]) * resolution + padding,
                              (hi[1] - uv[:, 1]) * resolution + padding])
    return width, height, points, (float(lo[0]), float(hi[1]))


def _rasterize(points: np.ndarray, faces: np.ndarray, priority: np.ndarray, width: int, height: int):
    """
    Pixel-center coverage of every face

    Faces are drawn in ``priority`` order and never overwrite; pixels reached
    by a later face are flagged as folds. Edges exactly through a pixel
    center belong to the face for which they are a top or left edge.
    """
    owner = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    fold = np.zeros((height, width), dtype=bool)

    for f in priority.tolist():
        tri = points[faces[f]]
        area2 = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
        if area2 == 0:
            continue
        order = [0, 1, 2] if area2 > 0 else [0, 2, 1]
        p = tri[order]
        area2 = abs(area2)

        x0 = max(int(np.floor(p[:, 0].min() - 0.5)), 0)
        x1 = min(int(np.ceil(p[:, 0].max() - 0.5)), width - 1)
        y0 = max(int(np.floor(p[:, 1].min() - 0.5)), 0)
        y1 = min(int(np.ceil(p[:, 1].max() - 0.5)), height - 1)
        if x0 > x1 or y0 > y1:
            continue
        xs, ys = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)

        inside = np.ones(xs.shape, dtype=bool)
        edge_values = []
        for k in range(3):
            a, b = p[k], p[(k + 1) % 3]
            dx, dy = b[0] - a[0], b[1] - a[1]
            e = dx * (ys - a[1]) - dy * (xs - a[0])
            owns = dy < 0 or (dy == 0 and dx > 0)
            inside &= (e > 0) | ((e == 0) & owns)
            edge_values.append(e)

        sub_owner = owner[y0:y1 + 1, x0:x1 + 1]
        fold[y0:y1 + 1, x0:x1 + 1] |= inside & (sub_owner >= 0)
        fresh = inside & (sub_owner < 0)
        sub_owner[fresh] = f
        sub_bary = bary[y0:y1 + 1, x0:x1 + 1]
        for k in range(3):
            # edge k is opposite corner k + 2
            sub_bary[..., order[(k + 2) % 3]][fresh] = edge_values[k][fresh] / area2

    return owner, bary, fold


def _draw_order(mesh: TriMesh3) -> np.ndarray:
    """Larger 3D faces first, ties by lower id"""
    return np.lexsort((np.arange(mesh.n_faces), -mesh.face_areas))


def _bilinear(image: np.ndarray, st: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    coords = np.vstack([(1.0 - st[:, 1]) * (h - 1), st[:, 0] * (w - 1)])
    if image.ndim == 2:
        return map_coordinates(image, coords, order=1, mode='nearest')
    return np.column_stack([map_coordinates(image[:, :, c], coords, order=1, mode='nearest')
                            for c in range(image.shape[2])])


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def rasterize_texture(mesh: TriMesh3, uv: UVMap, resolution: float,
                      padding: int = DEFAULT_PADDING) -> RasterImage:
    """
    Render the flattened texture

    Args:
        mesh: surface carrying per-vertex intensity or a source texture
        uv: flattening of ``mesh``
        resolution: pixels per UV unit
        padding: empty border in pixels

    Returns:
        Grayscale image for intensity, RGB or grayscale following the source
        texture otherwise; overlapping faces are resolved toward the larger
        3D face and flagged in ``fold_mask``
    """
    if mesh.intensity is None and mesh.texture is None:
        raise MissingTexture(f"Mesh '{mesh.name}' has neither intensity nor texture")
    width, height, points, origin = _layout(np.asarray(uv.uv), resolution, padding)
    owner, bary, fold = _rasterize(points, mesh.faces, _draw_order(mesh), width, height)

    covered = owner >= 0
    corners = mesh.faces[owner[covered]]
    weights = bary[covered]
    if mesh.texture is not None:
        st = np.einsum('kj,kjd->kd', weights, mesh.texture.source_uv[corners])
        samples = _bilinear(np.asarray(mesh.texture.image), st)
        shape = (height, width, 3) if mesh.texture.is_rgb else (height, width)
    else:
        samples = np.einsum('kj,kj->k', weights, mesh.intensity[corners])
        shape = (height, width)

    pixels = np.zeros(shape, dtype=np.uint8)
    pixels[covered] = _to_bytes(samples)
    if fold.any():
        logger.warning("Texture of %s/%s has %d overlapping pixels", mesh.name, uv.algorithm.value,
                       int(fold.sum()))
    return RasterImage(pixels, origin, float(resolution), padding, owner, fold)


def heatmap(uv: UVMap, per_face_values, value_range: Tuple[float, float], resolution: float,
            padding: int = DEFAULT_PADDING) -> RasterImage:
    """
    Flat-shade every face by its value through the shipped colormap

    Values are mapped to (v - lo) / (hi - lo), clamped to [0, 1], and looked
    up at index floor(t * 255 + 0.5). Background stays black.
    """
    mesh = uv.mesh
    values = np.asarray(per_face_values, dtype=np.float64).reshape(-1)
    if len(values) != mesh.n_faces:
        raise LengthMismatch(f"{len(values)} values for {mesh.n_faces} faces")
    lo, hi = value_range
    if not lo < hi:
        raise ValueError(f"heatmap range needs lo < hi, got [{lo}, {hi}]")

    width, height, points, origin = _layout(np.asarray(uv.uv), resolution, padding)
    owner, _, fold = _rasterize(points, mesh.faces, _draw_order(mesh), width, height)

    t = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    index = np.floor(t * 255.0 + 0.5).astype(np.int64)
    colors = colormap_table()[index]

    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    covered = owner >= 0
    pixels[covered] = colors[owner[covered]]
    return RasterImage(pixels, origin, float(resolution), padding, owner, fold)


def write_ppm(image, path) -> Path:
    """Binary P5 (grayscale) or P6 (RGB), maxval 255, no comments"""
    pixels = np.asarray(getattr(image, 'pixels', image))
    if pixels.dtype == bool:
        pixels = pixels.astype(np.uint8) * 255
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    magic = b'P6' if pixels.ndim == 3 else b'P5'
    header = b'%s\n%d %d\n255\n' % (magic, pixels.shape[1], pixels.shape[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as fh:
        fh.write(header)
        fh.write(pixels.tobytes())
    return path


def read_ppm(path) -> np.ndarray:
    """Read a P5 or P6 file written by write_ppm"""
    with open(path, 'rb') as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PPM header")
        tokens.append(data[start:pos])
    pos += 1
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b'P5', b'P6') or maxval != 255:
        raise ParseError(f"{path}: unsupported PPM variant {magic!r} maxval {maxval}")
    channels = 3 if magic == b'P6' else 1
    expected = width * height * channels
    body = np.frombuffer(data, dtype=np.uint8, count=expected, offset=pos) if len(data) - pos >= expected else None
    if body is None:
        raise ParseError(f"{path}: PPM body shorter than {expected} bytes")
    return body.reshape((height, width, 3) if channels == 3 else (height, width))


def save_rendering(image: RasterImage, path, fold_mask_path: Optional[Path] = None) -> Path:
    """Write an image and, when it has folds, its mask as a P5 file"""
    out = write_ppm(image, path)
    if fold_mask_path is not None and image.fold_mask.any():
        write_ppm(image.fold_mask, fold_mask_path)
    return out
