"""Experiment runner: scenario configs, the baud-rate sweep, result emission.

A scenario names a topology, a mode, a solver, and the baud rates to sweep;
each (baud, solver, trial) combination yields one result row. Rows are
written to ``results.csv`` with only deterministic fields (reruns with the
same config and seeds are byte-identical); wall-clock timings go to
``report.json`` alongside the full provenance.

Subcommands: run, sweep, compare, validate-instance, dump-capacity-matrix.
Exit codes: 0 success, 1 config error, 2 solver failure in all rows.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .bench import sequential_load, write_trials_csv
from .cg import CgOptions, run_cg, validate_assignment
from .lp import INF, SolveOptions, solve_milp
from .models import ModelSizeError, build_ilp, make_instance
from .phy import PhyConfig, load_phy_config
from .topology import TopologyError, load_topology

SOLVERS = ("ilp", "cg", "ksp-ff", "ff-ksp")

PAPER_BAUD_SWEEP = (500.0, 200.0, 150.0, 100.0, 50.0, 25.0, 15.0, 12.5, 10.0)  # GBaud


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    topology: str
    mode: str = "RWA"
    solver: str = "cg"
    bauds_gbaud: Tuple[float, ...] = (25.0,)
    k_routes: int = 10
    transceivers: float = INF
    formats_allowed: int = 8
    trials: int = 1
    seed: int = 0
    phy_config: Optional[str] = None
    output_dir: str = "results"
    total_bandwidth: float = 15e12
    ilp_gap: float = 0.05
    ilp_time_limit: float = 3600.0
    ilp_variable_cap: int = 200_000
    integer_gap: float = 0.01
    integer_time_limit: float = 10.0
    cg_epsilon: float = 1e-6
    cg_max_columns: int = 2000
    cg_pricing: str = "greedy"
    cg_pricing_time_limit: float = 60.0
    workers: int = 1

    def __post_init__(self):
        if not self.bauds_gbaud:
            raise ConfigError("baud list must not be empty")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.mode not in ("RWA", "RWBA"):
            raise ConfigError("mode must be RWA or RWBA")
        if self.solver in ("ksp-ff", "ff-ksp") and self.trials < 1:
            raise ConfigError("benchmark solvers need trials >= 1")
        if not 1 <= self.formats_allowed <= 8:
            raise ConfigError("formats_allowed must be in 1..8")

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "Scenario":
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        else:
            with open(path) as fh:
                doc = json.load(fh)
        doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
        if "transceivers" in doc and doc["transceivers"] in ("inf", None):
            doc["transceivers"] = INF
        if "bauds_gbaud" in doc:
            doc["bauds_gbaud"] = tuple(float(b) for b in doc["bauds_gbaud"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def effective_config(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["transceivers"] = "inf" if self.transceivers == INF else self.transceivers
        doc["bauds_gbaud"] = list(self.bauds_gbaud)
        return doc

    def config_hash(self) -> str:
        canonical = json.dumps(self.effective_config(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


RESULT_FIELDS = [
    "baud_gbaud",
    "solver",
    "mode",
    "seed",
    "wavelengths",
    "formats",
    "status",
    "throughput_bps",
    "lightpaths",
    "columns",
    "gap",
    "steps",
    "config_hash",
    "version",
]


def _phy(scenario: Scenario) -> PhyConfig:
    return load_phy_config(scenario.phy_config) if scenario.phy_config else PhyConfig()


def _build_instance(scenario: Scenario, baud_gbaud: float, mode: Optional[str] = None):
    topology = load_topology(scenario.topology)
    return make_instance(
        topology,
        scenario.k_routes,
        baud_gbaud * 1e9,
        mode or scenario.mode,
        phy_config=_phy(scenario),
        transceivers=scenario.transceivers,
        formats_allowed=scenario.formats_allowed,
        total_bandwidth=scenario.total_bandwidth,
    )


def _run_row(scenario: Scenario, baud: float, seed: int) -> Tuple[dict, dict]:
    """One (baud, solver, seed) execution: (csv row, timing record)."""
    row = {
        "baud_gbaud": f"{baud:g}",
        "solver": scenario.solver,
        "mode": scenario.mode,
        "seed": seed,
        "formats": scenario.formats_allowed,
        "status": "ok",
        "throughput_bps": "",
        "lightpaths": "",
        "columns": "",
        "gap": "",
        "steps": "",
        "config_hash": scenario.config_hash(),
        "version": __version__,
    }
    timing: Dict[str, float] = {}
    t0 = time.perf_counter()
    try:
        instance = _build_instance(scenario, baud)
        row["wavelengths"] = instance.wavelengths
        if scenario.solver == "ilp":
            program, layout = build_ilp(instance, scenario.ilp_variable_cap)
            solution = solve_milp(
                program,
                SolveOptions(relative_gap=scenario.ilp_gap, time_limit=scenario.ilp_time_limit),
            )
            row["status"] = solution.status
            if solution.objective is not None:
                row["throughput_bps"] = f"{solution.objective:.6g}"
                row["gap"] = f"{solution.relative_gap:.4g}"
                used = sum(
                    1 for idx in layout.delta.values() if solution.x[idx] > 0.5
                )
                row["lightpaths"] = used
        elif scenario.solver == "cg":
            options = CgOptions(
                epsilon=scenario.cg_epsilon,
                max_columns=scenario.cg_max_columns,
                pricing=scenario.cg_pricing,
                pricing_time_limit=scenario.cg_pricing_time_limit,
                integer_gap=scenario.integer_gap,
                integer_time_limit=scenario.integer_time_limit,
                init_seed=seed,
            )
            report = run_cg(instance, options)
            validate_assignment(instance, report.assignments, report.columns)
            row["status"] = report.integer_status
            if report.integer_objective is not None:
                row["throughput_bps"] = f"{report.integer_objective:.6g}"
            row["columns"] = report.pool_size
            row["gap"] = f"{report.integer_gap:.4g}"
            row["lightpaths"] = sum(
                report.columns[a.column].transceivers for a in report.assignments
            )
            timing.update(
                init=report.wall_init,
                pricing=report.wall_pricing,
                integer=report.wall_integer,
                packing=report.wall_packing,
            )
        else:
            result = sequential_load(instance, scenario.solver, seed)
            row["throughput_bps"] = f"{result.throughput:.6g}"
            row["lightpaths"] = len(result.lightpaths)
            row["steps"] = result.steps
    except ModelSizeError as exc:
        row["status"] = "memory-cap"
        row["note"] = str(exc)
    except (TopologyError, FileNotFoundError) as exc:
        raise ConfigError(str(exc)) from exc
    except Exception as exc:  # solver failure: recorded per row, sweep continues
        row["status"] = "error"
        row["note"] = f"{type(exc).__name__}: {exc}"
    timing["total"] = time.perf_counter() - t0
    return row, timing


def run_scenario(scenario: Scenario, output_dir: Optional[Path] = None) -> List[dict]:
    """Execute every (baud, trial) row; write results.csv and report.json."""
    out = Path(output_dir or scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = (
        range(scenario.seed, scenario.seed + scenario.trials)
        if scenario.solver in ("ksp-ff", "ff-ksp")
        else [scenario.seed]
    )
    jobs = [(baud, seed) for baud in scenario.bauds_gbaud for seed in seeds]
    rows: List[dict] = []
    timings: List[dict] = []
    if scenario.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=scenario.workers) as pool:
            futures = [pool.submit(_run_row, scenario, baud, seed) for baud, seed in jobs]
            for (baud, seed), future in zip(jobs, futures):
                row, timing = future.result()
                rows.append(row)
                timings.append({"baud_gbaud": baud, "seed": seed, **timing})
    else:
        for baud, seed in jobs:
            row, timing = _run_row(scenario, baud, seed)
            rows.append(row)
            timings.append({"baud_gbaud": baud, "seed": seed, **timing})

    rows.sort(key=lambda r: (float(r["baud_gbaud"]), r["solver"], r["seed"]))
    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    report = {
        "version": __version__,
        "config": scenario.effective_config(),
        "config_hash": scenario.config_hash(),
        "rows": rows,
        "timings_s": timings,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return rows


def compare_modes(scenario_a: Scenario, scenario_b: Scenario, output_dir: Optional[Path] = None) -> List[dict]:
    """Throughput ratios B/A per baud for two scenarios differing only in
    mode, transceiver budget, or allowed formats."""
    fixed = ("topology", "bauds_gbaud", "k_routes", "solver", "trials", "seed", "total_bandwidth")
    for name in fixed:
        if getattr(scenario_a, name) != getattr(scenario_b, name):
            raise ConfigError(f"scenarios differ in {name}; only mode/transceivers/formats may vary")
    out = Path(output_dir or scenario_a.output_dir)
    rows_a = run_scenario(scenario_a, out / "a")
    rows_b = run_scenario(scenario_b, out / "b")
    table = []
    for ra, rb in zip(rows_a, rows_b):
        th_a = float(ra["throughput_bps"]) if ra["throughput_bps"] else None
        th_b = float(rb["throughput_bps"]) if rb["throughput_bps"] else None
        table.append(
            {
                "baud_gbaud": ra["baud_gbaud"],
                "seed": ra["seed"],
                "throughput_a_bps": ra["throughput_bps"],
                "throughput_b_bps": rb["throughput_bps"],
                "ratio_b_over_a": f"{th_b / th_a:.6g}" if th_a and th_b is not None else "",
            }
        )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(table[0].keys()) if table else [])
        writer.writeheader()
        writer.writerows(table)
    return table


def _scenario_from_args(args) -> Scenario:
    overrides = {
        "topology": args.topology,
        "mode": args.mode,
        "solver": args.solver,
        "output_dir": args.output,
        "seed": args.seed,
        "trials": args.trials,
        "k_routes": args.k_routes,
        "formats_allowed": args.formats,
        "workers": args.workers,
    }
    if getattr(args, "bauds", None):
        overrides["bauds_gbaud"] = tuple(float(b) for b in args.bauds)
    if getattr(args, "transceivers", None) is not None:
        overrides["transceivers"] = INF if args.transceivers == "inf" else float(args.transceivers)
    if args.config:
        return Scenario.from_file(args.config, overrides)
    if overrides.get("topology") is None:
        raise ConfigError("either --config or --topology is required")
    return Scenario(**{k: v for k, v in overrides.items() if v is not None})


def _add_scenario_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="scenario file (TOML or JSON)")
    parser.add_argument("--topology", help="topology file (CSV or JSON)")
    parser.add_argument("--mode", choices=("RWA", "RWBA"))
    parser.add_argument("--solver", choices=SOLVERS)
    parser.add_argument("--bauds", nargs="+", metavar="GBAUD", help="baud rates to sweep")
    parser.add_argument("--k-routes", type=int, dest="k_routes")
    parser.add_argument("--formats", type=int, help="allowed modulation formats, 1..8")
    parser.add_argument("--transceivers", help="lightpath budget (number or 'inf')")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--dump-config", action="store_true", help="print the merged config and exit")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="mbnopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured scenario")
    _add_scenario_args(p_run)
    p_sweep = sub.add_parser("sweep", help="run the full baud-rate sweep")
    _add_scenario_args(p_sweep)
    p_cmp = sub.add_parser("compare", help="run two scenarios and tabulate throughput ratios")
    _add_scenario_args(p_cmp)
    p_cmp.add_argument("--mode-b", choices=("RWA", "RWBA"), help="mode of the second scenario")
    p_cmp.add_argument("--formats-b", type=int, help="formats_allowed of the second scenario")
    p_cmp.add_argument("--transceivers-b", help="transceiver budget of the second scenario")

    p_val = sub.add_parser("validate-instance", help="load and validate a topology / instance")
    p_val.add_argument("topology")
    p_val.add_argument("--k-routes", type=int, default=3, dest="k_routes")
    p_val.add_argument("--baud", type=float, default=25.0)
    p_val.add_argument("--mode", choices=("RWA", "RWBA"), default="RWA")

    p_dump = sub.add_parser("dump-capacity-matrix", help="write the capacity matrix as CSV")
    p_dump.add_argument("topology")
    p_dump.add_argument("--k-routes", type=int, default=3, dest="k_routes")
    p_dump.add_argument("--baud", type=float, default=25.0)
    p_dump.add_argument("--mode", choices=("RWA", "RWBA"), default="RWBA")
    p_dump.add_argument("--formats", type=int, default=8)
    p_dump.add_argument("--output", default="capacity.csv")

    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            scenario = _scenario_from_args(args)
            if args.command == "sweep" and not getattr(args, "bauds", None) and len(scenario.bauds_gbaud) == 1:
                scenario = dataclasses.replace(scenario, bauds_gbaud=PAPER_BAUD_SWEEP)
            if args.dump_config:
                print(json.dumps(scenario.effective_config(), indent=2))
                return 0
            rows = run_scenario(scenario)
            ok = sum(1 for r in rows if r["status"] not in ("error",))
            print(f"{len(rows)} rows -> {Path(scenario.output_dir) / 'results.csv'}")
            return 0 if ok else 2
        if args.command == "compare":
            scenario_a = _scenario_from_args(args)
            changes = {}
            if args.mode_b:
                changes["mode"] = args.mode_b
            if args.formats_b:
                changes["formats_allowed"] = args.formats_b
            if args.transceivers_b:
                changes["transceivers"] = INF if args.transceivers_b == "inf" else float(args.transceivers_b)
            if not changes:
                raise ConfigError("compare needs at least one of --mode-b/--formats-b/--transceivers-b")
            scenario_b = dataclasses.replace(scenario_a, **changes)
            if args.dump_config:
                print(json.dumps([scenario_a.effective_config(), scenario_b.effective_config()], indent=2))
                return 0
            table = compare_modes(scenario_a, scenario_b)
            for entry in table:
                print(
                    f"baud {entry['baud_gbaud']:>6} GBd  A {entry['throughput_a_bps'] or '-':>12}"
                    f"  B {entry['throughput_b_bps'] or '-':>12}  ratio {entry['ratio_b_over_a'] or '-'}"
                )
            return 0
        if args.command == "validate-instance":
            topology = load_topology(args.topology)
            instance = make_instance(topology, args.k_routes, args.baud * 1e9, args.mode)
            print(
                f"{topology.name}: {len(topology.nodes)} nodes, {len(topology.links)} links, "
                f"{len(instance.demand_pairs())} demand pairs, W={instance.wavelengths}, mode={instance.mode}"
            )
            return 0
        if args.command == "dump-capacity-matrix":
            topology = load_topology(args.topology)
            instance = make_instance(
                topology, args.k_routes, args.baud * 1e9, args.mode, formats_allowed=args.formats
            )
            instance.capacity.write_csv(args.output)
            print(f"capacity matrix -> {args.output}")
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (TopologyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
