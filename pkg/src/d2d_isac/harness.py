"""Experiment orchestration: convergence traces, beampatterns, threshold
sweeps and Monte Carlo tables, all emitted as CSV with embedded metadata."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .channel import build_radar_environment, sample_channels
from .config import RngStream, SystemConfig, sample_geometry
from .optimizer import (BeamformingSolution, InfeasibleProblemError,
                        SCHEMES, solve_scheme)
from .sensing import beampattern, default_angle_grid

CONVERGENCE_COLUMNS = ("scheme", "iteration", "objective_bps_hz")
BEAMPATTERN_COLUMNS = ("scheme", "eta_db", "theta_rad", "power_db")
SWEEP_COLUMNS = ("scheme", "eta_db", "mean_rate", "std_rate", "trials",
                 "infeasible_rate")
TRIAL_COLUMNS = ("scheme", "eta_db", "trial", "seed", "feasible",
                 "sum_rate_bps_hz", "extracted_sum_rate_bps_hz",
                 "achieved_scnr_db", "iterations", "converged")


@dataclass(frozen=True)
class ExperimentSpec:
    command: str                       # run | sweep | beampattern | montecarlo
    config: SystemConfig
    scheme_list: tuple = SCHEMES
    eta_grid: tuple = tuple(range(58, 69))   # dB
    trials: int = 1
    seed_base: int = 0
    output_dir: str = "."
    config_path: str | None = None

    def __post_init__(self):
        if self.command not in ("run", "sweep", "beampattern", "montecarlo"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.command in ("sweep", "beampattern") and not self.eta_grid:
            raise ValueError(f"{self.command} needs a nonempty eta grid")
        for s in self.scheme_list:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")


@dataclass
class ExperimentResult:
    rows: dict                          # table name -> list of row dicts
    metadata: dict
    files: list = field(default_factory=list)


def realize(cfg: SystemConfig, seed: int):
    """Deterministic (geometry, channels, radar environment) for one seed."""
    cfg = replace(cfg, rng_seed=seed)
    geo = sample_geometry(cfg, RngStream(seed, "geometry"))
    ch = sample_channels(cfg, geo, RngStream(seed, "fading"))
    env = build_radar_environment(cfg)
    return cfg, ch, env


def _solve(cfg: SystemConfig, seed: int, scheme: str,
           eta_db: float | None = None) -> BeamformingSolution:
    if eta_db is not None:
        cfg = replace(cfg, scnr_threshold_db=eta_db)
    cfg, ch, env = realize(cfg, seed)
    return solve_scheme(ch, env, cfg, scheme)


def aggregate(trial_rows: list, baseline: str = "fixed-d2d") -> list:
    """Per (scheme, eta): mean/std over feasible trials, counts, infeasibility
    rate, and relative gain over the baseline scheme at the same eta."""
    if not trial_rows:
        raise ValueError("nothing to aggregate")
    cols = set(trial_rows[0])
    for r in trial_rows:
        if set(r) != cols:
            raise ValueError("inconsistent trial row columns")

    groups: dict = {}
    for r in trial_rows:
        groups.setdefault((r["scheme"], r["eta_db"]), []).append(r)

    summary = []
    for (scheme, eta), rows in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        rates = [r["sum_rate_bps_hz"] for r in rows if r["feasible"]]
        n = len(rows)
        entry = {
            "scheme": scheme,
            "eta_db": eta,
            "mean_rate": float(np.mean(rates)) if rates else None,
            "std_rate": float(np.std(rates)) if rates else None,
            "trials": n,
            "infeasible_rate": (n - len(rates)) / n,
        }
        summary.append(entry)

    base_means = {e["eta_db"]: e["mean_rate"] for e in summary
                  if e["scheme"] == baseline}
    gain_col = f"gain_over_{baseline.replace('-', '_')}"
    for e in summary:
        ref = base_means.get(e["eta_db"])
        if ref and e["mean_rate"] is not None and e["scheme"] != baseline:
            e[gain_col] = (e["mean_rate"] - ref) / ref
        else:
            e[gain_col] = None
    return summary


def _write_csv(path: str, columns, rows, metadata: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {json.dumps(metadata, sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow(["" if r.get(c) is None else r[c] for c in columns])


def run_experiment(spec: ExperimentSpec, solution_hook=None) -> ExperimentResult:
    """Execute one experiment and write its CSV artifacts.

    solution_hook(scheme, eta_db, seed, solution, channels, env, cfg) is
    called for every successfully solved instance (used for audits).
    """
    cfg = spec.config
    meta = {
        "artifact_version": __version__,
        "command": spec.command,
        "config": cfg.to_json_dict(),
        "seed_base": spec.seed_base,
        "schemes": list(spec.scheme_list),
        "eta_grid_db": list(spec.eta_grid),
        "trials": spec.trials,
    }

    def hook(scheme, eta, seed, sol, rcfg, ch, env):
        if solution_hook is not None:
            solution_hook(scheme, eta, seed, sol, ch, env, rcfg)

    tables: dict = {}

    if spec.command == "run":
        rows = []
        for scheme in spec.scheme_list:
            rcfg, ch, env = realize(cfg, spec.seed_base)
            sol = solve_scheme(ch, env, rcfg, scheme)
            hook(scheme, cfg.scnr_threshold_db, spec.seed_base, sol, rcfg, ch, env)
            for i, obj in enumerate(sol.iteration_trace):
                rows.append({"scheme": scheme, "iteration": i,
                             "objective_bps_hz": repr(float(obj))})
        tables["convergence"] = (CONVERGENCE_COLUMNS, rows)

    elif spec.command == "beampattern":
        thetas = default_angle_grid()
        rows = []
        for scheme in spec.scheme_list:
            if scheme == "sensing-only":
                rcfg, ch, env = realize(cfg, spec.seed_base)
                sol = solve_scheme(ch, env, rcfg, scheme)
                hook(scheme, None, spec.seed_base, sol, rcfg, ch, env)
                pat = beampattern(env, sol.cov, thetas)
                curves = [(eta, pat) for eta in spec.eta_grid]
            else:
                curves = []
                for eta in spec.eta_grid:
                    rcfg, ch, env = realize(replace(cfg, scnr_threshold_db=eta),
                                            spec.seed_base)
                    sol = solve_scheme(ch, env, rcfg, scheme)
                    hook(scheme, eta, spec.seed_base, sol, rcfg, ch, env)
                    curves.append((eta, beampattern(env, sol.cov, thetas)))
            for eta, pat in curves:
                for th, db in zip(thetas, pat):
                    rows.append({"scheme": scheme, "eta_db": eta,
                                 "theta_rad": repr(float(th)),
                                 "power_db": repr(float(db))})
        tables["beampattern"] = (BEAMPATTERN_COLUMNS, rows)

    elif spec.command in ("sweep", "montecarlo"):
        etas = spec.eta_grid if spec.command == "sweep" else (cfg.scnr_threshold_db,)
        trial_rows = []
        for trial in range(spec.trials):
            seed = spec.seed_base + trial
            for scheme in spec.scheme_list:
                # constant in eta by construction: solve once, replicate
                once = scheme in ("communication-only", "sensing-only")
                cached = None
                for eta in etas:
                    if once and cached is not None:
                        sol = cached
                    else:
                        try:
                            eff = cfg.scnr_threshold_db if once else eta
                            rcfg, ch, env = realize(
                                replace(cfg, scnr_threshold_db=eff), seed)
                            sol = solve_scheme(ch, env, rcfg, scheme)
                            hook(scheme, eta, seed, sol, rcfg, ch, env)
                            if once:
                                cached = sol
                        except InfeasibleProblemError:
                            trial_rows.append({
                                "scheme": scheme, "eta_db": eta, "trial": trial,
                                "seed": seed, "feasible": 0,
                                "sum_rate_bps_hz": None,
                                "extracted_sum_rate_bps_hz": None,
                                "achieved_scnr_db": None,
                                "iterations": None, "converged": None,
                            })
                            continue
                    trial_rows.append({
                        "scheme": scheme, "eta_db": eta, "trial": trial,
                        "seed": seed, "feasible": 1,
                        "sum_rate_bps_hz": sol.relaxed_sum_rate,
                        "extracted_sum_rate_bps_hz": sol.extracted_sum_rate,
                        "achieved_scnr_db": sol.achieved_scnr_db,
                        "iterations": sol.iterations_used,
                        "converged": int(sol.converged),
                    })
        tables["trials"] = (TRIAL_COLUMNS, trial_rows)
        if spec.command == "sweep":
            summary = aggregate(trial_rows)
            tables["sweep"] = (SWEEP_COLUMNS, summary)

    result = ExperimentResult(
        rows={name: rows for name, (_, rows) in tables.items()},
        metadata=meta,
    )
    os.makedirs(spec.output_dir, exist_ok=True)
    for name, (columns, rows) in tables.items():
        path = os.path.join(spec.output_dir, f"{name}.csv")
        _write_csv(path, columns, rows, meta)
        result.files.append(path)
    return result
