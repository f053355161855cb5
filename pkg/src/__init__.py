"""
Surface Flattening Analyzer - parameterize triangulated surface patches onto the plane and measure the distortion.

This package provides:
- Mesh loading and validation for disk-topology triangle patches (OBJ, PLY)
- Three flattening algorithms: LSCM, ABF and mass-spring material modeling
- Texture stretch, angular and area distortion metrics
- Flattened texture rendering and per-face error heatmaps
- A comparison pipeline producing tabular reports

Author: Kumar Karan Bohidar
Version: 1.0.0
License: MIT
"""

__version__ = "1.0.0"
__author__ = "Kumar Karan Bohidar"

from .errors import (
    FlatteningError,
    ParseError,
    InvalidMesh,
    NotADisk,
    SolverFailure,
    Diverged,
    DegenerateParameterization,
    MissingTexture,
    EmptyParameterization,
    LengthMismatch,
    ConfigError,
)
from .mesh_core import (
    TriMesh3,
    Texture,
    ValidationReport,
    load_mesh,
    write_obj,
    validate,
    check_mesh,
    boundary_loop,
    corner_angles_3d,
    face_area_3d,
    total_area_3d,
)
from .flatten_lscm import Algorithm, UVMap, PinPair, select_pins, lscm_flatten, conformal_energy
from .flatten_abf import (
    AngleSet,
    AbfSolution,
    InconsistentAngles,
    optimal_angles,
    abf_weights,
    abf_solve,
    reconstruct_uv,
    abf_flatten,
)
from .flatten_mm import (
    MMConfig,
    SpringSystem,
    build_spring_system,
    step,
    simulate,
    project_to_plane,
    detect_folds,
    mechanical_energy,
    mm_flatten,
)
from .metrics import (
    TriangleStretch,
    MetricsReport,
    RegionMetrics,
    normalize_scale,
    triangle_stretch,
    l2_mesh,
    linf_mesh,
    angular_error,
    area_error,
    compute_metrics,
    boundary_faces,
    region_metrics,
)
from .raster_viz import RasterImage, rasterize_texture, heatmap, write_ppm, read_ppm, colormap_table
from .synthetic import generate_synthetic, SYNTHETIC_KINDS
from .utils import load_mm_config, save_mm_config, similarity_align_2d
from .pipeline import RunConfig, ComparisonReport, run_pipeline

__all__ = [
    'FlatteningError', 'ParseError', 'InvalidMesh', 'NotADisk', 'SolverFailure', 'Diverged',
    'DegenerateParameterization', 'MissingTexture', 'EmptyParameterization', 'LengthMismatch',
    'ConfigError',
    'TriMesh3', 'Texture', 'ValidationReport', 'load_mesh', 'write_obj', 'validate', 'check_mesh',
    'boundary_loop', 'corner_angles_3d', 'face_area_3d', 'total_area_3d',
    'Algorithm', 'UVMap', 'PinPair', 'select_pins', 'lscm_flatten', 'conformal_energy',
    'AngleSet', 'AbfSolution', 'InconsistentAngles', 'optimal_angles', 'abf_weights', 'abf_solve',
    'reconstruct_uv', 'abf_flatten',
    'MMConfig', 'SpringSystem', 'build_spring_system', 'step', 'simulate', 'project_to_plane',
    'detect_folds', 'mechanical_energy', 'mm_flatten',
    'TriangleStretch', 'MetricsReport', 'RegionMetrics', 'normalize_scale', 'triangle_stretch', 'l2_mesh',
    'linf_mesh', 'angular_error', 'area_error', 'compute_metrics',
    'boundary_faces', 'region_metrics',
    'RasterImage', 'rasterize_texture', 'heatmap', 'write_ppm', 'read_ppm', 'colormap_table',
    'generate_synthetic', 'SYNTHETIC_KINDS',
    'load_mm_config', 'save_mm_config', 'similarity_align_2d',
    'RunConfig', 'ComparisonReport', 'run_pipeline',
]
