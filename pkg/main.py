import argparse
import logging
import sys
from pathlib import Path

from data import MM_PRESETS_FILE, get_data_path, list_mm_presets
from src import __version__
from src.errors import ConfigError
from src.flatten_mm import MMConfig
from src.pipeline import DEFAULT_ALGORITHMS, HEATMAP_METRICS, RunConfig, run_pipeline
from src.synthetic import SYNTHETIC_KINDS, generate_synthetic
from src.utils import load_mm_config

logger = logging.getLogger("flatten-analyzer")

MM_FLAGS = (
    ('vertex_mass', float),
    ('stiffness', float),
    ('damping', float),
    ('gravity', float),
    ('timestep', float),
    ('ke_threshold', float),
    ('max_steps', int),
    ('collision_restitution', float),
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="flatten-analyzer",
        description="Flatten triangulated surface patches with LSCM, ABF and mass-spring "
                    "simulation, then compare their distortion.",
    )
    parser.add_argument("inputs", nargs="*", type=Path, help="OBJ or PLY meshes to flatten")
    parser.add_argument("--algorithms", nargs="+", default=[a.value for a in DEFAULT_ALGORITHMS],
                        type=str.upper, choices=[a.value for a in DEFAULT_ALGORITHMS],
                        help="algorithms to compare (default: ABF LSCM MM)")
    parser.add_argument("--out-dir", type=Path, default=Path("flattening_output"),
                        help="directory for the report and images")
    parser.add_argument("--resolution", type=float, default=50.0, help="pixels per UV unit (default: 50)")
    parser.add_argument("--heatmaps", nargs="*", default=["angular", "area"], choices=HEATMAP_METRICS,
                        help="per-face error maps to render")
    parser.add_argument("--synthetic", nargs=2, action="append", metavar=("KIND", "N"), default=[],
                        help=f"add a generated mesh; KIND is one of {', '.join(SYNTHETIC_KINDS)}")
    parser.add_argument("--dump-trajectory", type=int, metavar="K",
                        help="write an OBJ snapshot of the MM simulation every K steps")
    parser.add_argument("--abf-tol", type=float, default=1e-7, help="ABF convergence tolerance")
    parser.add_argument("--abf-max-iter", type=int, default=100, help="ABF Newton iteration limit")
    parser.add_argument("--mm-preset", help=f"named MM configuration: {', '.join(list_mm_presets())}")
    parser.add_argument("--mm-config", type=Path, help="JSON file with MM configuration fields")
    for name, kind in MM_FLAGS:
        parser.add_argument(f"--mm-{name.replace('_', '-')}", dest=f"mm_{name}", type=kind,
                            help=f"override MMConfig.{name}")
    parser.add_argument("--jobs", type=int, default=1, help="mesh/algorithm pairs to run concurrently")
    parser.add_argument("--no-figures", action="store_true", help="skip the matplotlib comparison figures")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="shorthand for --log-level DEBUG")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def resolve_mm_config(args) -> MMConfig:
    if args.mm_preset:
        config = load_mm_config(get_data_path(MM_PRESETS_FILE), preset=args.mm_preset)
    elif args.mm_config:
        config = load_mm_config(args.mm_config)
    else:
        config = MMConfig()
    overrides = {name: getattr(args, f"mm_{name}") for name, _ in MM_FLAGS}
    return config.with_overrides(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        inputs = list(args.inputs)
        for kind, n in args.synthetic:
            try:
                size = int(n)
            except ValueError:
                raise ConfigError(f"synthetic mesh size must be an integer, got '{n}'")
            path = args.out_dir / "meshes" / f"{kind}_{size}.obj"
            generate_synthetic(kind, size, path=path)
            inputs.append(path)

        config = RunConfig(
            mesh_paths=inputs,
            out_dir=args.out_dir,
            algorithms=args.algorithms,
            mm_config=resolve_mm_config(args),
            resolution=args.resolution,
            heatmap_metrics=args.heatmaps,
            abf_tol=args.abf_tol,
            abf_max_iter=args.abf_max_iter,
            jobs=args.jobs,
            dump_trajectory=args.dump_trajectory,
            render_figures=not args.no_figures,
        )
        report = run_pipeline(config)
    except (ConfigError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 1

    print(report.render_text())
    return 2 if report.has_failures else 0


if __name__ == "__main__":
    sys.exit(main())
