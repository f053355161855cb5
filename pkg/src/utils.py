"""
Utility functions for the Surface Flattening Analyzer
"""

import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from .errors import ConfigError
from .flatten_mm import MMConfig
from .mesh_core import edges


def load_json_config(filepath) -> Dict[str, Any]:
    """
    Load a configuration dictionary from a JSON file

    Args:
        filepath: Path to JSON configuration file

    Returns:
        Dictionary of configuration values
    """
    try:
        with open(filepath, 'r') as f:
            config = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Configuration file not found: {filepath}")
    except json.JSONDecodeError:
        raise ValueError(f"Invalid JSON in configuration file: {filepath}")
    if not isinstance(config, dict):
        raise ValueError(f"Configuration file must hold a JSON object: {filepath}")
    return config


def load_mm_config(filepath, preset: str = None) -> MMConfig:
    """
    Load mass-spring parameters from JSON

    Args:
        filepath: JSON file holding either MMConfig fields or named presets
        preset: name of the preset to pick when the file holds several

    Returns:
        Validated MMConfig
    """
    values = load_json_config(filepath)
    if preset is not None:
        if preset not in values:
            raise ConfigError(f"Preset '{preset}' not found in {filepath}; available: {sorted(values)}")
        values = values[preset]
    return MMConfig.from_dict(values)


def save_mm_config(config: MMConfig, filepath):
    """
    Save mass-spring parameters to JSON

    Args:
        config: MMConfig to store
        filepath: Path to save the configuration
    """
    with open(filepath, 'w') as f:
        json.dump(config.to_dict(), f, indent=2)


def validate_resolution(resolution: float) -> bool:
    """
    Validate that a raster resolution is usable

    Args:
        resolution: Pixels per UV unit

    Returns:
        True if valid, False otherwise
    """
    return np.isfinite(resolution) and 0 < resolution <= 10000


def validate_output_dir(path) -> bool:
    """True when ``path`` exists (or can be created) and is writable"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError:
        return False
    marker = path / '.write_check'
    try:
        marker.write_bytes(b'')
        marker.unlink()
    except OSError:
        return False
    return True


def similarity_align_2d(source, target, allow_reflection: bool = False) -> np.ndarray:
    """
    Least-squares similarity transform of ``source`` onto ``target`` (Procrustes)

    Args:
        source: (n, 2) points to move
        target: (n, 2) reference points
        allow_reflection: also consider mirror images

    Returns:
        Aligned copy of source
    """
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if src.shape != tgt.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError(f"point sets must both be (n, 2), got {src.shape} and {tgt.shape}")

    src_mean = src.mean(axis=0)
    tgt_mean = tgt.mean(axis=0)
    a = src - src_mean
    b = tgt - tgt_mean
    denom = float(np.sum(a * a))
    if denom == 0.0:
        return np.broadcast_to(tgt_mean, src.shape).copy()

    u, s, vt = np.linalg.svd(a.T @ b)
    d = 1.0
    if not allow_reflection and np.linalg.det(u @ vt) < 0:
        d = -1.0
    rotation = u @ np.diag([1.0, d]) @ vt
    scale = (s[0] + d * s[1]) / denom
    return a @ rotation * scale + tgt_mean


def rms_deviation(points, reference) -> float:
    """Root-mean-square distance between corresponding points"""
    diff = np.asarray(points, dtype=np.float64) - np.asarray(reference, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum(diff ** 2, axis=1))))


def edge_length_error(mesh, uv) -> float:
    """
    RMS difference between 2D and 3D edge lengths, relative to the mean 3D edge length

    Args:
        mesh: TriMesh3
        uv: UVMap or (n, 2) array

    Returns:
        Dimensionless error; 0 for an isometric flattening
    """
    coords = np.asarray(getattr(uv, 'uv', uv), dtype=np.float64)
    pairs = edges(mesh)
    length_3d = np.linalg.norm(mesh.vertices[pairs[:, 1]] - mesh.vertices[pairs[:, 0]], axis=1)
    length_2d = np.linalg.norm(coords[pairs[:, 1]] - coords[pairs[:, 0]], axis=1)
    return float(np.sqrt(np.mean((length_2d - length_3d) ** 2)) / length_3d.mean())
