"""Command-line front end.

    spinexchange run <config-path> [--output-dir D] [--seed S] [--jobs J]
    spinexchange presets list
    spinexchange presets show <name>
    spinexchange validate <config-path>

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 oracle-comparison failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_config, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ORACLE = 4


def preset_names() -> list:
    root = resources.files("spinexchange") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_text(name: str) -> str:
    path = resources.files("spinexchange") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"no preset named {name!r}; see 'presets list'")
    return path.read_text()


def resolve_config(target: str) -> dict:
    """Load a config file, or a bundled preset when ``target`` names one."""
    path = Path(target)
    if path.exists():
        return load_config(path)
    name = target[len("preset:"):] if target.startswith("preset:") else target
    if name in preset_names():
        return parse_config(preset_text(name), f"preset:{name}")
    raise ConfigError("config file not found", None, None, target)


def _cmd_run(args) -> int:
    from .exact import LeakageError, OracleSizeError
    from .meanfield import IntegrationError
    from .scenarios import run_config

    try:
        cfg = resolve_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            print("config error: --seed must be >= 0", file=sys.stderr)
            return EXIT_CONFIG
        cfg["seed"] = args.seed
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.output_dir if args.output_dir is not None else cfg["output_dir"]
    try:
        result = run_config(cfg, out_dir, jobs=args.jobs)
    except (ValueError, OracleSizeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, LeakageError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, path in result.tables.items():
        print(f"{name}: {path}")
    print(f"summary: {result.summary_path}")
    print(f"wall_time_s={result.wall_time:.3f} config_hash={result.config_hash}")
    if not result.passed:
        print("oracle comparison failed", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = resolve_config(args.config)
        _build_check(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(cfg, indent=2, sort_keys=True))
    return EXIT_OK


def _build_check(cfg: dict) -> None:
    """Construct the physics objects a run would build, without running."""
    from .scenarios import build_params, build_profile, resolve_threemode

    if "params" in cfg:
        build_params(cfg["params"], delta_c=0.0 if cfg["scenario"] == "sign_sweep" else None)
    if "profile" in cfg:
        prof = build_profile(cfg["profile"])
        if cfg["scenario"] == "hop":
            pr = cfg["protocol"]
            if pr["a_max_um"] <= prof.grid[0] or pr["a_min_um"] > prof.grid[-1]:
                raise ConfigError("region A lies outside the grid", "protocol.a_min_um")
        if cfg["scenario"] == "sign_sweep":
            b = cfg["sweep"]["boundary_um"]
            if not prof.grid[0] < b <= prof.grid[-1]:
                raise ConfigError("boundary must lie inside the grid", "sweep.boundary_um")
    if cfg["scenario"] == "spin_mixing":
        resolve_threemode(cfg["spin_mixing"])


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            cfg = parse_config(preset_text(name), f"preset:{name}")
            print(f"{name:18s} {cfg['scenario']:15s} {cfg['description']}")
        return EXIT_OK
    if not args.name:
        print("config error: 'presets show' needs a preset name", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sys.stdout.write(preset_text(args.name))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinexchange",
                                 description="Cavity-mediated spin-exchange simulations")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config (file path or preset name)")
    r.add_argument("config")
    r.add_argument("--output-dir", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=_cmd_run)
    p = sub.add_parser("presets", help="list or print bundled scenario presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=_cmd_presets)
    v = sub.add_parser("validate", help="check a config and print it fully resolved")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
