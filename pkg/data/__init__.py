"""
Bundled data for Surface Flattening Analyzer.

This package contains:
- mm_presets.json: named mass-spring configurations, selectable with --mm-preset
"""

import json
from pathlib import Path

DATA_PATH = Path(__file__).resolve().parent
MM_PRESETS_FILE = "mm_presets.json"


def get_data_path(filename):
    """Get absolute path to a bundled data file."""
    return str(DATA_PATH / filename)


def list_data_files():
    """List bundled JSON files."""
    return sorted(path.name for path in DATA_PATH.glob("*.json"))


def list_mm_presets():
    """Names of the bundled mass-spring presets, sorted."""
    with open(DATA_PATH / MM_PRESETS_FILE, "r", encoding="utf-8") as f:
        return sorted(json.load(f))


__all__ = ['DATA_PATH', 'MM_PRESETS_FILE', 'get_data_path', 'list_data_files', 'list_mm_presets']
