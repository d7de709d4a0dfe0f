"""Command-line experiment runner.

``boussinesq-lab run <config|manifest.json> [--out DIR]``
``boussinesq-lab sweep-lifespan <config> [--eps E ...] [--workers W]``
``boussinesq-lab sweep-cauchy <config> [--deltas D ...] [--workers W]``
``boussinesq-lab acceptance <suite> [--json PATH]``

Outputs land under ``$BSQ_OUTPUT_ROOT`` (default: the working directory).
Exit codes: 0 success (a blow-up is a recorded result), 1 failed acceptance
criteria, 2 configuration errors, 3 validation errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, format_config, parse_config
from .diagnostics import BlowupMonitor, EnergyReport, UnsupportedCaseError, Verdict, build_report, energy_growth_coefficient
from .initial_data import make_initial_state
from .solvers import LimitFitError, MollifiedSystem, StabilityError, cauchy_study, evolve, limit_extract, write_field_dump
from .spectral_ops import Grid, ParameterError
from .systems import CaseParams, CavitationError, ResolutionError, SpectralSystem, State, ValidationError, make_system
from .transforms import EtaVSystem, nested_bundle, to_v_variable

OUTPUT_ROOT_ENV = "BSQ_OUTPUT_ROOT"
SCHEMA_VERSION = 1
COLUMNS = ("t", "hamiltonian", "E_s", "E", "total_E", "mass", "noncavitation_margin", "curl_norm",
           "eta_Hs", "vel_Hs", "eta_X", "vel_X", "status")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3
VALIDATION_ERRORS = (ValidationError, CavitationError, ParameterError, ResolutionError, StabilityError,
                     UnsupportedCaseError)


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


# --------------------------------------------------------------------------- single run


@dataclass
class RunResult:
    directory: Path
    params: CaseParams
    verdict: Verdict
    rows: int
    csv_sha256: str
    times: list[float]
    energies: list[float]

    @property
    def max_energy_ratio(self) -> float:
        e = np.asarray(self.energies, dtype=float)
        if e.size == 0 or not np.all(np.isfinite(e)) or e[0] <= 0:
            return float("nan")
        return float(np.max(e) / e[0])


def build_system(cfg: RunConfig, p: CaseParams, grid: Grid) -> tuple[SpectralSystem, bool]:
    """System for the config and whether its velocity slot carries ``v = (1 + eps eta) u``."""
    dealias, nonlinear = cfg.integrator.dealias, cfg.case.nonlinear
    if cfg.mollifier.delta is not None:
        return MollifiedSystem(p.eps, cfg.mollifier.delta, grid, dealias, nonlinear), True
    if cfg.case.variables == "eta_v":
        if p.family != "abcd" or p.case_id != "12" or abs(p.c + 1.0) > 1e-12:
            raise ValidationError(["the (eta, v) solver needs a = b = d = 0, c = -1"])
        return EtaVSystem(p.eps, grid, dealias, nonlinear), True
    kwargs: dict = {"dealias": dealias, "nonlinear": nonlinear}
    if p.family == "full_dispersion":
        kwargs["with_surface_tension"] = cfg.case.with_surface_tension
    if p.family == "kaup":
        kwargs["allow_ill_posed"] = cfg.case.allow_ill_posed
    return make_system(p, grid, **kwargs), False


def _reporter(cfg: RunConfig, p: CaseParams, grid: Grid, velocity_is_v: bool):
    h, sorder = cfg.monitor.h, cfg.monitor.sobolev_index
    exact_v = velocity_is_v and cfg.mollifier.delta is None and cfg.case.nonlinear

    def report(t: float, values: np.ndarray) -> EnergyReport:
        s = State.from_stack(grid, values, t)
        bundle = None
        if exact_v and s.is_finite() and np.min(1.0 + p.eps * s.eta) > 0:
            bundle = nested_bundle(grid, s.eta, np.stack(s.vel), p.eps, order=grid.dim + 1)
        return build_report(p, s, h=h, sorder=sorder, bundle=bundle, velocity_is_v=velocity_is_v)

    return report


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _csv_rows(reports: Sequence[EnergyReport], verdict: Verdict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in reports:
        values = (r.hamiltonian, r.symmetrized_energy, r.quasilinear_E, r.total_E, r.mass,
                  r.noncavitation_margin, r.curl_norm, r.eta_hs, r.vel_hs, r.eta_x, r.vel_x)
        numeric_ok = r.finite and all(v is None or math.isfinite(v) for v in values)
        tagged = not verdict.healthy and verdict.t_star is not None and r.time >= verdict.t_star
        status = f"blowup: {verdict.reason}" if (tagged or not numeric_ok) and not verdict.healthy else "ok"
        if not numeric_ok and verdict.healthy:
            status = "blowup: non-finite values"
        writer.writerow([_fmt(r.time), *(_fmt(v) for v in values), status])
    return buf.getvalue()


def _resolve(directory: str, override: str | None) -> Path:
    if override is not None:
        return Path(override)
    return output_root() / directory


def run_config(cfg: RunConfig, out: str | Path | None = None) -> RunResult:
    """Execute one run and write ``manifest.json``, ``timeseries.csv`` and optional dumps."""
    p = cfg.params()
    grid = cfg.grid_obj()
    icfg = cfg.integrator_cfg()
    s0 = make_initial_state(grid, cfg.data, p.eps, cfg.monitor.h)
    system, velocity_is_v = build_system(cfg, p, grid)
    if velocity_is_v:
        s0 = to_v_variable(s0, p.eps)
    monitor = BlowupMonitor(cfg.monitor.growth_factor)
    traj = evolve(icfg, system, s0.stack(), reporter=_reporter(cfg, p, grid, velocity_is_v),
                  monitor=monitor, keep_states=cfg.output.dump_fields)
    directory = _resolve(cfg.output.dir, None if out is None else str(out))
    directory.mkdir(parents=True, exist_ok=True)
    text = _csv_rows(traj.reports, traj.verdict)
    (directory / "timeseries.csv").write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    dumps = []
    if cfg.output.dump_fields:
        (directory / "fields").mkdir(exist_ok=True)
        for i, (t, values) in enumerate(zip(traj.times, traj.states)):
            name = f"fields/state_{i:05d}.bsq"
            write_field_dump(directory / name, grid, p.eps, t, values)
            dumps.append(name)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "command": "run",
        "config": format_config(cfg),
        "seed": cfg.data.seed,
        "seed_contract": "numpy SeedSequence(seed).spawn(1 + dim): eta stream, then one per velocity component",
        "case_id": p.case_id,
        "params": asdict(p),
        "velocity_variable": "v" if velocity_is_v else "u",
        "verdict": asdict(traj.verdict),
        "rows": len(traj.reports),
        "columns": list(COLUMNS),
        "csv": "timeseries.csv",
        "csv_sha256": digest,
        "field_dumps": dumps,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    energies = [r.monitored_energy for r in traj.reports]
    return RunResult(directory, p, traj.verdict, len(traj.reports), digest, list(traj.times), energies)


def load_config(path: str | Path) -> RunConfig:
    """Config text or an emitted ``manifest.json`` (its echoed config is used)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if str(path).endswith(".json"):
        try:
            text = json.loads(text)["config"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path} is not a run manifest") from exc
    return parse_config(text)


# --------------------------------------------------------------------------- sweeps


def sweep_lifespan(cfg: RunConfig, eps_list: Sequence[float], workers: int = 1) -> dict:
    """Run to ``t_budget / eps`` for each epsilon; writes ``summary.csv`` and ``summary.json``."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ConfigError("sweep-lifespan needs at least three epsilons (--eps or sweep.eps)")
    base = _resolve(cfg.output.dir, None)
    runs = [cfg.with_eps(e).with_t_end(cfg.sweep.t_budget / e).with_output(str(base / f"eps_{e:g}"))
            for e in eps_list]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda c: run_config(c, out=c.output.dir), runs))
    rows = []
    for e, c, r in zip(eps_list, runs, results):
        c1 = energy_growth_coefficient(np.asarray(r.times), np.asarray(r.energies), e) if r.verdict.healthy else None
        rows.append({"eps": e, "t_end": c.integrator.t_end, "healthy": r.verdict.healthy,
                     "t_star": r.verdict.t_star, "reason": r.verdict.reason,
                     "max_energy_ratio": r.max_energy_ratio, "C1": c1, "run_dir": r.directory.name})
    blown = [(row["eps"], row["t_star"]) for row in rows if not row["healthy"] and row["t_star"]]
    fit = None
    if len(blown) >= 2:
        xs = np.log([1.0 / e for e, _ in blown])
        ys = np.log([t for _, t in blown])
        slope, intercept = np.polyfit(xs, ys, 1)
        fit = {"slope": float(slope), "intercept": float(intercept)}
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: ("" if v is None else v) for k, v in row.items()} for row in rows)
    summary = {"config": format_config(cfg), "code_version": __version__, "runs": rows,
               "lifespan_fit": fit}
    (base / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def sweep_cauchy(cfg: RunConfig, deltas: Sequence[float], workers: int = 1, samples: int = 4) -> dict:
    """Mollified-scheme Cauchy study from the configured data; writes ``cauchy.json``."""
    if not deltas:
        raise ConfigError("sweep-cauchy needs a delta list (--deltas or sweep.deltas)")
    if len(deltas) < 3:
        raise ConfigError("sweep-cauchy needs at least three deltas")
    p = cfg.params()
    grid = cfg.grid_obj()
    s0 = to_v_variable(make_initial_state(grid, cfg.data, p.eps, cfg.monitor.h), p.eps)
    report = cauchy_study(deltas, cfg.integrator_cfg(), p.eps, s0, samples=samples, workers=workers)
    limit = None
    try:
        proxy = limit_extract(report)
        limit = {"delta": proxy.delta, "error_bar": proxy.error_bar, "residual": proxy.residual,
                 "within_bar": proxy.within_bar}
    except LimitFitError as exc:
        limit = {"error": str(exc)}
    out = {
        "config": format_config(cfg),
        "code_version": __version__,
        "eps": p.eps,
        "deltas": report.deltas,
        "distances": [{"delta_a": a, "delta_b": b, "distance": d} for (a, b), d in report.distances.items()],
        "slope": report.slope,
        "intercept": report.intercept,
        "degenerate": report.degenerate,
        "flagged": report.flagged,
        "verdicts": {f"{d:g}": asdict(v) for d, v in report.verdicts.items()},
        "limit_proxy": limit,
    }
    base = _resolve(cfg.output.dir, None)
    base.mkdir(parents=True, exist_ok=True)
    (base / "cauchy.json").write_text(json.dumps(out, indent=2) + "\n")
    return out


# --------------------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 already; keep the message on stderr
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boussinesq-lab", description="Boussinesq-system experiment runner")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run one configuration or re-run a manifest")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output.dir)")
    life = sub.add_parser("sweep-lifespan", help="lifespan sweep over epsilon")
    life.add_argument("config")
    life.add_argument("--eps", type=float, nargs="+")
    life.add_argument("--workers", type=int)
    cauchy = sub.add_parser("sweep-cauchy", help="mollifier Cauchy study over delta")
    cauchy.add_argument("config")
    cauchy.add_argument("--deltas", type=float, nargs="+")
    cauchy.add_argument("--workers", type=int)
    acc = sub.add_parser("acceptance", help="run an acceptance suite")
    acc.add_argument("suite")
    acc.add_argument("--json", help="write all verdicts to this file")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "acceptance":
        from .acceptance import SUITES, run_suite

        if args.suite not in SUITES:
            raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        results = run_suite(args.suite, echo=lambda r: print(json.dumps(r.as_dict()), flush=True))
        if args.json:
            Path(args.json).write_text(json.dumps([r.as_dict() for r in results], indent=2) + "\n")
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED
    cfg = load_config(args.config)
    if args.command == "run":
        result = run_config(cfg, out=args.out)
        print(json.dumps({"dir": str(result.directory), "rows": result.rows, "verdict": asdict(result.verdict)}))
    elif args.command == "sweep-lifespan":
        summary = sweep_lifespan(cfg, args.eps or cfg.sweep.eps, args.workers or cfg.sweep.workers)
        for row in summary["runs"]:
            print(json.dumps(row))
    else:
        out = sweep_cauchy(cfg, args.deltas or cfg.sweep.deltas, args.workers or cfg.sweep.workers)
        print(json.dumps({k: out[k] for k in ("slope", "intercept", "degenerate", "flagged", "limit_proxy")}))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return _dispatch(_parser().parse_args(argv))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
