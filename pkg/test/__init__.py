"""
Test suite for Surface Flattening Analyzer.

This package contains unit tests for:
- mesh_core.py
- flatten_lscm.py, flatten_abf.py, flatten_mm.py
- metrics.py
- raster_viz.py
- synthetic.py
- pipeline.py and the command line
- visualization.py
- utils.py

Run tests with: python -m pytest test/
"""

import os
import sys

# Add the repository root to Python path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

# Test configuration
TEST_CONFIG = {
    'grid_sizes': [3, 6, 10],
    'raster_resolution': 50,
    'planar_tolerance': 1e-8,   # angular error of planar inputs
    'unroll_tolerance': 1e-3,   # RMS distance to the cylinder unrolling
}

# Import test modules to make them discoverable
from .test_mesh_core import TestMeshModel, TestValidation, TestBoundaryLoop, TestGeometry, TestFileFormats
from .test_flatten_lscm import TestPinSelection, TestLSCM, TestUVMap
from .test_flatten_abf import TestOptimalAngles, TestAbfSolve, TestReconstruction, TestAbfFlatten
from .test_flatten_mm import TestMMConfig, TestSpringSystem, TestStep, TestSimulation, TestCurvedSurfaces
from .test_metrics import (TestTriangleStretch, TestMeshStretch, TestNormalizeScale,
                           TestAngularAndAreaError, TestComputeMetrics, TestBoundaryRegion)
from .test_raster_viz import TestColormap, TestRasterizeTexture, TestHeatmap, TestPPM
from .test_synthetic import TestSynthetic
from .test_pipeline import TestRunConfig, TestPipeline, TestCommandLine
from .test_visualization import TestVisualization
from .test_utils import TestUtils

__all__ = [
    'TestMeshModel', 'TestValidation', 'TestBoundaryLoop', 'TestGeometry', 'TestFileFormats',
    'TestPinSelection', 'TestLSCM', 'TestUVMap',
    'TestOptimalAngles', 'TestAbfSolve', 'TestReconstruction', 'TestAbfFlatten',
    'TestMMConfig', 'TestSpringSystem', 'TestStep', 'TestSimulation', 'TestCurvedSurfaces',
    'TestTriangleStretch', 'TestMeshStretch', 'TestNormalizeScale', 'TestAngularAndAreaError',
    'TestComputeMetrics', 'TestBoundaryRegion',
    'TestColormap', 'TestRasterizeTexture', 'TestHeatmap', 'TestPPM',
    'TestSynthetic',
    'TestRunConfig', 'TestPipeline', 'TestCommandLine',
    'TestVisualization',
    'TestUtils',
    'TEST_CONFIG'
]


def run_all_tests():
    """Convenience function to run all tests."""
    import pytest
    pytest.main([os.path.dirname(__file__), '-v'])
