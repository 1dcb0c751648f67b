"""Command line runner: ``greenavg list`` and ``greenavg run <config or name>``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .benchmarks import REGISTRY, ExperimentResult, make_field, make_forcing, sweep_experiment
from .errors import ConfigError, GreenAvgError
from .function_space import write_csv
from .green_solver import SolveConfig
from .spectral import OperatorSpec

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

log = logging.getLogger("greenavg")

_SOLVE_KEYS = {f.name for f in fields(SolveConfig)}
_TOP_KEYS = {"experiment", "eps_list", "t_min", "seed", "output_dir", "operator", "forcing", "field", "solve"}


@dataclass
class ExperimentConfig:
    experiment: str
    operator: dict = field(default_factory=dict)
    forcing: dict = field(default_factory=dict)
    field: dict | None = None
    eps_list: list | None = None
    solve: SolveConfig | None = None
    t_min: float | None = None
    seed: int = 0
    output_dir: Path = Path("out")
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        name = data.get("experiment")
        if not isinstance(name, str):
            raise ConfigError("config needs an 'experiment' name")
        if name != "custom" and name not in REGISTRY:
            raise ConfigError(f"unknown experiment {name!r}; run 'list' for the registry")

        eps_list = data.get("eps_list")
        if eps_list is not None:
            if not isinstance(eps_list, list) or not eps_list:
                raise ConfigError("eps_list must be a non-empty list")
            try:
                eps_list = [float(e) for e in eps_list]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"eps_list entries must be numbers: {exc}") from None
            if any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
                raise ConfigError("eps_list must be positive and strictly decreasing")

        solve = data.get("solve")
        if solve is not None:
            bad = set(solve) - _SOLVE_KEYS
            if bad:
                raise ConfigError(f"unknown solve keys {sorted(bad)}")
            try:
                solve = SolveConfig(**solve)
            except TypeError as exc:
                raise ConfigError(str(exc)) from None

        cfg = cls(
            experiment=name,
            operator=dict(data.get("operator", {})),
            forcing=dict(data.get("forcing", {})),
            field=data.get("field"),
            eps_list=eps_list,
            solve=solve,
            t_min=data.get("t_min"),
            seed=int(data.get("seed", 0)),
            output_dir=Path(data.get("output_dir", "out")),
            base_dir=base_dir,
        )
        if name == "custom":
            cfg._check_custom()
        return cfg

    def _check_custom(self):
        if not self.operator:
            raise ConfigError("custom experiments need an [operator] section")
        if not self.forcing:
            raise ConfigError("custom experiments need a [forcing] section")
        if not self.eps_list:
            raise ConfigError("custom experiments need eps_list")
        if self.forcing.get("signal") == "csv":
            path = Path(self.forcing.get("path", ""))
            if not path.is_absolute():
                path = self.base_dir / path
            if not path.is_file():
                raise ConfigError(f"forcing file {path} does not exist")

    def operator_spec(self) -> OperatorSpec:
        op = dict(self.operator)
        kind = op.pop("kind", None)
        if kind == "dense_matrix":
            return OperatorSpec(kind, matrix=np.asarray(op.get("matrix"), dtype=float))
        if kind == "dirichlet_laplacian_1d":
            return OperatorSpec(kind, points=int(op.get("points", 0)))
        raise ConfigError(f"unknown operator kind {kind!r}")


def load_config(source: str, seed: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    """A TOML file path, or a bare registry name run with its defaults."""
    if source in REGISTRY:
        data, base = {"experiment": source}, Path(".")
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"{source!r} is neither a config file nor a registered experiment")
        try:
            data = tomllib.loads(path.read_text())
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        base = path.parent
    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = output_dir
    return ExperimentConfig.from_dict(data, base)


def execute(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.experiment != "custom":
        kwargs = {"seed": cfg.seed}
        if cfg.eps_list is not None:
            kwargs["eps_list"] = tuple(cfg.eps_list)
        if cfg.solve is not None:
            kwargs["solve"] = cfg.solve
        return REGISTRY[cfg.experiment][0](**kwargs)
    op = cfg.operator_spec()
    solve = cfg.solve or SolveConfig()
    f, f_bar = make_forcing(op, cfg.forcing, solve.T / min(cfg.eps_list) + 1.0, cfg.base_dir)
    F = make_field(cfg.field, op.dim)
    return sweep_experiment("custom", op, f, f_bar, F, cfg.eps_list, solve, cfg.t_min)


def _fmt(x) -> str:
    return "nan" if x is None or not math.isfinite(x) else f"{x:.17g}"


def write_outputs(res: ExperimentResult, out: Path, telemetry: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(res.solution, out / "solution.csv")
    lines = ["eps,sup_dev,bound,slope_cumulative"]
    report_json = {"experiment": res.name, "summary": _jsonable(res.summary)}
    if res.report is not None:
        for row, slope in zip(res.report.rows, res.report.cumulative_slopes()):
            lines.append(",".join(_fmt(v) for v in (row.eps, row.sup_dev, row.bound, slope)))
        report_json["report"] = res.report.to_dict()
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(json.dumps(report_json, indent=2, sort_keys=True) + "\n")
    (out / "telemetry.json").write_text(json.dumps(_jsonable(telemetry), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run(source: str, seed: int | None = None, output_dir: str | None = None) -> int:
    """Run one experiment; returns the process exit code."""
    try:
        cfg = load_config(source, seed, output_dir)
        start = time.perf_counter()
        res = execute(cfg)
        elapsed = time.perf_counter() - start
        telemetry = {"experiment": cfg.experiment, "seed": cfg.seed, "seconds": elapsed, **res.telemetry}
        write_outputs(res, cfg.output_dir, telemetry)
    except GreenAvgError as exc:
        msg = str(exc).replace('"', "'").replace("\n", " ")
        print(f'ERROR code={exc.code} exit={exc.exit_code} msg="{msg}"', file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError, KeyError) as exc:
        # malformed values that slipped past the schema checks, e.g. a string where a number belongs
        msg = str(exc).replace('"', "'").replace("\n", " ")
        print(f'ERROR code={ConfigError.code} exit={ConfigError.exit_code} msg="{msg}"', file=sys.stderr)
        return ConfigError.exit_code
    log.info("wrote %s outputs to %s in %.2fs", cfg.experiment, cfg.output_dir, elapsed)
    return 0


def list_experiments() -> str:
    width = max(map(len, REGISTRY))
    return "\n".join(f"{name:<{width}}  {desc}" for name, (_, desc) in REGISTRY.items())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="greenavg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the built-in experiments")
    p_run = sub.add_parser("run", help="run a TOML config or a built-in experiment by name")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir")
    p_run.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "list":
        print(list_experiments())
        return 0
    return run(args.config, args.seed, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
