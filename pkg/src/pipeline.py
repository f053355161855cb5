"""
Comparison pipeline: flatten every mesh with every requested algorithm, measure, render, report
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .errors import ConfigError
from .flatten_abf import DEFAULT_MAX_ITER, DEFAULT_TOL, abf_flatten
from .flatten_lscm import Algorithm, UVMap, lscm_flatten
from .flatten_mm import MMConfig, mm_flatten
from .mesh_core import TriMesh3, load_mesh, write_obj
from .metrics import MetricsReport, compute_metrics
from .raster_viz import RasterImage, heatmap, rasterize_texture, save_rendering, write_ppm
from .utils import validate_output_dir, validate_resolution

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = "1.0"
DEFAULT_ALGORITHMS = (Algorithm.ABF, Algorithm.LSCM, Algorithm.MM)
HEATMAP_METRICS = ('angular', 'area', 'stretch')
MISSING = "---"

TABLES = (
    ('l2_mesh', 'L2 Error'),
    ('linf_mesh', 'Linf Error'),
    ('f_mesh', 'F(M) Error'),
    ('e_mesh', 'E(M) Error'),
)

BOUNDARY_TABLES = (
    ('boundary.l2', 'Boundary L2 Error'),
    ('boundary.linf', 'Boundary Linf Error'),
    ('boundary.e', 'Boundary E(M) Error'),
)


@dataclass
class RunConfig:
    """Everything one comparison run needs"""
    mesh_paths: Sequence[Path]
    out_dir: Path
    algorithms: Sequence[Algorithm] = DEFAULT_ALGORITHMS
    mm_config: MMConfig = field(default_factory=MMConfig)
    resolution: float = 50.0
    heatmap_metrics: Sequence[str] = ('angular', 'area')
    report_version: str = REPORT_FORMAT_VERSION
    abf_tol: float = DEFAULT_TOL
    abf_max_iter: int = DEFAULT_MAX_ITER
    jobs: int = 1
    dump_trajectory: Optional[int] = None
    render_figures: bool = True

    def __post_init__(self):
        self.mesh_paths = [Path(p) for p in self.mesh_paths]
        self.out_dir = Path(self.out_dir)
        if not self.mesh_paths:
            raise ConfigError("at least one mesh is required")
        missing = [str(p) for p in self.mesh_paths if not p.exists()]
        if missing:
            raise ConfigError(f"mesh files not found: {missing}")
        try:
            self.algorithms = [Algorithm(str(getattr(a, 'value', a)).upper()) for a in self.algorithms]
        except ValueError as exc:
            raise ConfigError(f"unknown algorithm in {list(self.algorithms)}") from exc
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms must not repeat")
        unknown = set(self.heatmap_metrics) - set(HEATMAP_METRICS)
        if unknown:
            raise ConfigError(f"unknown heatmap metrics {sorted(unknown)}; choose from {HEATMAP_METRICS}")
        if not validate_resolution(self.resolution):
            raise ConfigError(f"invalid raster resolution {self.resolution}")
        if not self.abf_tol > 0 or self.abf_max_iter < 0:
            raise ConfigError("ABF tolerance must be positive and max iterations non-negative")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.dump_trajectory is not None and self.dump_trajectory < 1:
            raise ConfigError(f"trajectory dump interval must be positive, got {self.dump_trajectory}")
        if not validate_output_dir(self.out_dir):
            raise ConfigError(f"output directory is not writable: {self.out_dir}")


@dataclass
class PairResult:
    """Outcome for one (mesh, algorithm) pair"""
    mesh: str
    algorithm: Algorithm
    status: str
    metrics: Optional[MetricsReport] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    stage: Optional[str] = None
    error_type: Optional[str] = None
    message: Optional[str] = None
    uv: Optional[UVMap] = None
    texture: Optional[RasterImage] = None
    heatmaps: Dict[str, RasterImage] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == 'ok'

    def to_dict(self):
        record = {'mesh': self.mesh, 'algorithm': self.algorithm.value, 'status': self.status,
                  'timings': {k: round(v, 6) for k, v in self.timings.items()}}
        if self.ok:
            record['metrics'] = self.metrics.to_dict()
            record['diagnostics'] = _jsonable(self.diagnostics)
            record['artifacts'] = dict(self.artifacts)
        else:
            record.update({'stage': self.stage, 'error_type': self.error_type, 'message': self.message})
        return record


@dataclass
class ComparisonReport:
    meshes: List[str]
    algorithms: List[Algorithm]
    results: List[PairResult]
    format_version: str = REPORT_FORMAT_VERSION
    toolkit_version: str = __version__

    @property
    def has_failures(self) -> bool:
        return any(not r.ok for r in self.results)

    def result(self, mesh: str, algorithm) -> PairResult:
        algorithm = Algorithm(getattr(algorithm, 'value', algorithm))
        for r in self.results:
            if r.mesh == mesh and r.algorithm == algorithm:
                return r
        raise KeyError((mesh, algorithm))

    def to_dict(self):
        return {
            'format_version': self.format_version,
            'toolkit_version': self.toolkit_version,
            'meshes': list(self.meshes),
            'algorithms': [a.value for a in self.algorithms],
            'results': [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def metric_table(self, key: str) -> pd.DataFrame:
        """Rows are meshes, columns are algorithms; failures hold "---" """
        table = pd.DataFrame(index=pd.Index(self.meshes, name='Mesh'),
                             columns=[a.value for a in self.algorithms], dtype=object)
        for r in self.results:
            table.loc[r.mesh, r.algorithm.value] = _metric_value(r.metrics, key) if r.ok else MISSING
        return table

    def render_text(self) -> str:
        blocks = [f"Surface flattening comparison (report format {self.format_version}, "
                  f"toolkit {self.toolkit_version})"]
        for key, title in TABLES + BOUNDARY_TABLES:
            table = self.metric_table(key)
            formatted = table.apply(lambda column: column.map(
                lambda v: v if v == MISSING else f"{v:.5f}"))
            blocks.append(f"{title}\n{formatted.to_string()}")
        failures = [r for r in self.results if not r.ok]
        if failures:
            lines = [f"  {r.mesh} / {r.algorithm.value}: {r.error_type} during {r.stage}: {r.message}"
                     for r in failures]
            blocks.append("Failures\n" + "\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def _metric_value(metrics, key: str):
    """Attribute lookup through dotted keys; a missing region reads as "---" """
    value = metrics
    for part in key.split('.'):
        value = getattr(value, part, None)
        if value is None:
            return MISSING
    return value


def _jsonable(value):
    if is_dataclass(value) and not isinstance(value, type):
        return _jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return value.as_posix()
    return value


def flatten_with(mesh: TriMesh3, algorithm: Algorithm, config: RunConfig) -> UVMap:
    """Dispatch to one flattener with the run's settings"""
    if algorithm is Algorithm.LSCM:
        return lscm_flatten(mesh)
    if algorithm is Algorithm.ABF:
        return abf_flatten(mesh, tol=config.abf_tol, max_iter=config.abf_max_iter)
    dump_dir = None
    if config.dump_trajectory:
        dump_dir = config.out_dir / mesh.name / 'mm_trajectory'
    return mm_flatten(mesh, config.mm_config, dump_every=config.dump_trajectory, dump_dir=dump_dir)


def _run_pair(mesh: TriMesh3, algorithm: Algorithm, config: RunConfig) -> PairResult:
    result = PairResult(mesh.name, algorithm, 'ok')
    mesh_dir = config.out_dir / mesh.name
    stage = 'flatten'
    try:
        started = time.perf_counter()
        uv = flatten_with(mesh, algorithm, config)
        result.timings['flatten'] = time.perf_counter() - started
        result.uv = uv
        result.diagnostics = dict(uv.diagnostics)

        stage = 'metrics'
        started = time.perf_counter()
        result.metrics = compute_metrics(mesh, uv)
        result.timings['metrics'] = time.perf_counter() - started

        stage = 'raster'
        started = time.perf_counter()
        mesh_dir.mkdir(parents=True, exist_ok=True)
        uv_path = mesh_dir / f"{algorithm.value}_uv.obj"
        write_obj(mesh, uv_path, uv, intensity_sidecar=False)
        result.artifacts['uv'] = uv_path.relative_to(config.out_dir).as_posix()
        if mesh.has_texture:
            image = rasterize_texture(mesh, uv, config.resolution)
            texture_path = mesh_dir / f"{algorithm.value}_texture.ppm"
            fold_path = mesh_dir / f"{algorithm.value}_folds.pgm"
            save_rendering(image, texture_path, fold_path)
            result.artifacts['texture'] = texture_path.relative_to(config.out_dir).as_posix()
            if image.fold_mask.any():
                result.artifacts['fold_mask'] = fold_path.relative_to(config.out_dir).as_posix()
            result.diagnostics['fold_pixels'] = int(image.fold_mask.sum())
            result.texture = image
        result.timings['raster'] = time.perf_counter() - started
        logger.info("%s / %s done: L2 %.5f, E(M) %.5f", mesh.name, algorithm.value,
                    result.metrics.l2_mesh, result.metrics.e_mesh)
    except Exception as exc:
        logger.exception("%s / %s failed during %s", mesh.name, algorithm.value, stage)
        return PairResult(mesh.name, algorithm, 'failed', timings=result.timings, stage=stage,
                          error_type=type(exc).__name__, message=str(exc))
    return result


def _mark_failed(result: PairResult, stage: str, exc: Exception):
    """Turn a finished pair into a failure record; its metrics no longer reach the tables"""
    result.status = 'failed'
    result.stage = stage
    result.error_type = type(exc).__name__
    result.message = str(exc)


def _heatmap_values(result: PairResult, metric: str) -> np.ndarray:
    if metric == 'angular':
        return result.metrics.corner_angular_error.sum(axis=1)
    if metric == 'area':
        return result.metrics.face_area_error
    return result.metrics.face_l2


def _shared_range(results: List[PairResult], metric: str):
    if metric == 'area':
        return 0.0, 1.0
    values = [_heatmap_values(r, metric) for r in results]
    top = max(float(v.max()) for v in values)
    if metric == 'stretch':
        return 1.0, top if top > 1.0 else 2.0
    return 0.0, top if top > 0.0 else 1.0


def _render_heatmaps(results: List[PairResult], config: RunConfig):
    """Heatmaps of one mesh share a value range per metric"""
    done = [r for r in results if r.ok]
    if not done:
        return {}
    ranges = {}
    for metric in config.heatmap_metrics:
        value_range = _shared_range(done, metric)
        ranges[metric] = value_range
        for r in done:
            started = time.perf_counter()
            if not r.ok:
                continue
            try:
                image = heatmap(r.uv, _heatmap_values(r, metric), value_range, config.resolution)
            except Exception as exc:
                logger.exception("%s / %s: %s heatmap failed", r.mesh, r.algorithm.value, metric)
                _mark_failed(r, 'heatmap', exc)
                continue
            path = config.out_dir / r.mesh / f"{r.algorithm.value}_{metric}.ppm"
            write_ppm(image, path)
            r.artifacts[f'{metric}_heatmap'] = path.relative_to(config.out_dir).as_posix()
            r.heatmaps[metric] = image
            r.timings['raster'] = r.timings.get('raster', 0.0) + time.perf_counter() - started
    return ranges


def _render_figures(mesh_name: str, results: List[PairResult], ranges, config: RunConfig):
    from .visualization import FlatteningVisualizer

    visualizer = FlatteningVisualizer()
    mesh_dir = config.out_dir / mesh_name
    done = [r for r in results if r.ok]
    textures = {r.algorithm.value: r.texture for r in done if r.texture is not None}
    if textures:
        fig = visualizer.plot_texture_comparison(textures, title=f"{mesh_name}: flattened textures")
        visualizer.save(fig, mesh_dir / 'textures.png')
    labels = {'angular': 'weighted angle error', 'area': 'E(t)', 'stretch': 'L2 stretch'}
    for metric, value_range in ranges.items():
        maps = {r.algorithm.value: r.heatmaps[metric] for r in done if metric in r.heatmaps}
        if maps:
            fig = visualizer.plot_heatmaps(maps, value_range, labels[metric], title=f"{mesh_name}: {metric}")
            visualizer.save(fig, mesh_dir / f'{metric}_heatmaps.png')
    for r in done:
        # flipped faces drawn in red
        path = mesh_dir / f'{r.algorithm.value}_layout.png'
        visualizer.save(visualizer.plot_uv_layout(r.uv), path)
        r.artifacts['layout'] = path.relative_to(config.out_dir).as_posix()


def _render_summaries(report: 'ComparisonReport', config: RunConfig):
    from .visualization import FlatteningVisualizer

    visualizer = FlatteningVisualizer()
    for key, title in TABLES:
        fig = visualizer.plot_metric_summary(report.metric_table(key), title)
        visualizer.save(fig, config.out_dir / f'summary_{key}.png')


def _load_all(config: RunConfig):
    meshes, load_failures = [], {}
    seen = set()
    for path in config.mesh_paths:
        name = path.stem
        suffix = 2
        while name in seen:
            name = f"{path.stem}_{suffix}"
            suffix += 1
        seen.add(name)
        try:
            mesh = load_mesh(path)
            if mesh.name != name:
                mesh = TriMesh3(mesh.vertices, mesh.faces, mesh.intensity, mesh.texture, name)
            meshes.append(mesh)
        except OSError:
            raise
        except Exception as exc:
            logger.exception("Could not load %s", path)
            load_failures[name] = exc
            meshes.append(name)
    return meshes, load_failures


def run_pipeline(config: RunConfig) -> ComparisonReport:
    """
    Run every (mesh, algorithm) pair and write the report plus artifacts

    Per-pair failures become report entries. Writes ``report.json`` and
    ``report.txt`` to the output directory.
    """
    meshes, load_failures = _load_all(config)
    names = [m if isinstance(m, str) else m.name for m in meshes]

    tasks = [(m, a) for m in meshes if not isinstance(m, str) for a in config.algorithms]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            finished = list(pool.map(lambda task: _run_pair(task[0], task[1], config), tasks))
    else:
        finished = [_run_pair(m, a, config) for m, a in tasks]
    by_pair = {(r.mesh, r.algorithm): r for r in finished}

    results = []
    for name in names:
        row = []
        for algorithm in config.algorithms:
            if name in load_failures:
                exc = load_failures[name]
                row.append(PairResult(name, algorithm, 'failed', stage='load',
                                      error_type=type(exc).__name__, message=str(exc)))
            else:
                row.append(by_pair[(name, algorithm)])
        ranges = _render_heatmaps(row, config)
        if config.render_figures and any(r.ok for r in row):
            try:
                _render_figures(name, row, ranges, config)
            except Exception as exc:
                logger.exception("Comparison figures for %s failed", name)
                for r in row:
                    if r.ok:
                        r.diagnostics['figure_error'] = f"{type(exc).__name__}: {exc}"
        results.extend(row)

    report = ComparisonReport(names, list(config.algorithms), results, format_version=config.report_version)
    if config.render_figures:
        try:
            _render_summaries(report, config)
        except Exception:
            logger.exception("Summary figures failed")
    (config.out_dir / 'report.json').write_text(report.to_json() + "\n", encoding='utf-8')
    (config.out_dir / 'report.txt').write_text(report.render_text(), encoding='utf-8')
    failed = sum(1 for r in results if not r.ok)
    logger.info("Report written to %s (%d pairs, %d failed)", config.out_dir, len(results), failed)
    return report
