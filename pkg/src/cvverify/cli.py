"""Command-line front end.

Configs are JSON files with the protocol parameters plus per-command
knobs; unknown keys are rejected outright because physics configs fail
quietly otherwise.  Every command writes a JSON report embedding the
fully resolved config, the package version and the truncation
diagnostics; fixed seeds give byte-identical reports under any worker
count.  Exit codes: 0 success, 1 configuration error, 2 numerical
convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, TruncationError
from .estimator import estimate_lower_bound, make_plan
from .fock import FockState, fidelity
from .injection import inject_cubic
from .protocol import (
    INJECTION_DIM,
    INJECTION_TAIL_TOL,
    ProtocolParams,
    RunContext,
    plan_request,
    run_protocol,
    verifiability_monte_carlo,
)
from .states import AdversarySpec, adversary_state, cubic_phase_state
from .witness import build_witness, fidelity_lower_bound

COMMANDS = (
    "witness-eval",
    "estimate",
    "complexity",
    "teleport",
    "protocol-run",
    "adversary-sweep",
)

OUTDIR_ENV = "CVVERIFY_OUTDIR"

_TOP_LEVEL_KEYS = {
    "M": int,
    "gamma_tilde": (int, float),
    "s": (int, float),
    "gamma_list": list,
    "F_T": (int, float),
    "beta": (int, float),
    "eta": (int, float),
    "D": int,
    "seed": int,
    "injection_D": int,
    "adversary": dict,
    "runs": int,
    "workers": int,
    "out_dir": str,
    "x_meas": (int, float, type(None)),
    "trial_csv": bool,
    "runs_csv": bool,
    "sweep": dict,
    "second_moment_bound": (int, float),
}

_DEFAULTS = {
    "M": 1,
    "gamma_tilde": 0.1,
    "s": 1.0,
    "F_T": 0.9,
    "beta": 0.05,
    "eta": 0.05,
    "D": 40,
    "seed": 0,
    "injection_D": INJECTION_DIM,
    "runs": 1,
    "workers": 1,
    "x_meas": None,
    "trial_csv": False,
    "runs_csv": False,
    "second_moment_bound": None,
}


@dataclass
class RunConfig:
    params: ProtocolParams
    adversary: AdversarySpec
    runs: int
    workers: int
    out_dir: Path
    x_meas: float | None
    trial_csv: bool
    runs_csv: bool
    sweep: dict | None
    second_moment_bound: float | None
    resolved: dict = field(default_factory=dict)


def _check_types(data: dict) -> None:
    unknown = set(data) - set(_TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key, value in data.items():
        expected = _TOP_LEVEL_KEYS[key]
        if value is None and key in ("x_meas", "second_moment_bound"):
            continue
        if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
            raise ConfigError(f"config key {key!r} has wrong type {type(value).__name__}")


def parse_config(path: str | None = None, overrides: dict | None = None,
                 data: dict | None = None) -> RunConfig:
    """Load, validate and default-resolve a run configuration.

    Strict schema: unknown keys are errors, the eta/F_T relation is
    enforced here, and the fully resolved mapping is echoed into every
    report for provenance.
    """
    merged: dict = {}
    if path is not None:
        with open(path) as handle:
            try:
                merged.update(json.load(handle))
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from err
    if data:
        merged.update(data)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    _check_types(merged)

    resolved = dict(_DEFAULTS)
    resolved.update(merged)
    if "gamma_list" not in resolved or resolved["gamma_list"] is None:
        resolved["gamma_list"] = [resolved["gamma_tilde"]] * resolved["M"]
    resolved.setdefault("adversary", {"kind": "honest"})
    resolved.setdefault("sweep", None)
    resolved.setdefault(
        "out_dir", os.environ.get(OUTDIR_ENV, ".")
    )

    gamma_list = resolved["gamma_list"]
    if not all(isinstance(g, (int, float)) for g in gamma_list):
        raise ConfigError("gamma_list entries must be numbers")
    try:
        params = ProtocolParams(
            modes=resolved["M"],
            gamma_tilde=float(resolved["gamma_tilde"]),
            s=float(resolved["s"]),
            gamma_list=tuple(float(g) for g in gamma_list),
            f_threshold=float(resolved["F_T"]),
            beta=float(resolved["beta"]),
            eta=float(resolved["eta"]),
            dim=resolved["D"],
            seed=resolved["seed"],
            injection_dim=resolved["injection_D"],
        )
        adversary = AdversarySpec.from_dict(resolved["adversary"])
    except ConfigError:
        raise
    sweep = resolved["sweep"]
    if sweep is not None:
        extra = set(sweep) - {"kind", "values"}
        if extra:
            raise ConfigError(f"unknown sweep keys {sorted(extra)}")
        if sweep.get("kind") not in ("orthogonal_mix", "thermal_mix", "wrong_gamma"):
            raise ConfigError("sweep kind must be orthogonal_mix, thermal_mix or wrong_gamma")
        if not isinstance(sweep.get("values"), list) or not sweep["values"]:
            raise ConfigError("sweep values must be a non-empty list")
    return RunConfig(
        params=params,
        adversary=adversary,
        runs=resolved["runs"],
        workers=resolved["workers"],
        out_dir=Path(resolved["out_dir"]),
        x_meas=None if resolved["x_meas"] is None else float(resolved["x_meas"]),
        trial_csv=bool(resolved["trial_csv"]),
        runs_csv=bool(resolved["runs_csv"]),
        sweep=sweep,
        second_moment_bound=(
            None if resolved["second_moment_bound"] is None
            else float(resolved["second_moment_bound"])
        ),
        resolved={k: resolved[k] for k in sorted(resolved)},
    )


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _convergence_diagnostics(cfg: RunConfig) -> dict:
    state = cubic_phase_state(cfg.params.resource())
    return {
        "dim": cfg.params.dim,
        "top_level_mass": state.tail_mass(),
        "grid_points": 2**14,
    }


def _write_report(cfg: RunConfig, command: str, payload: dict) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "command": command,
        "version": __version__,
        "config": cfg.resolved,
        "convergence": _convergence_diagnostics(cfg),
        "result": payload,
    }
    path = cfg.out_dir / f"{command}-report.json"
    path.write_text(_canonical(report))
    return path


def _cmd_witness_eval(cfg: RunConfig) -> dict:
    spec = build_witness(cfg.params.resource())
    rho = adversary_state(cfg.adversary, cfg.params.resource())
    sigma = cubic_phase_state(cfg.params.resource())
    return {
        "adversary": cfg.adversary.to_dict(),
        "f_low": fidelity_lower_bound(rho, spec),
        "fidelity": fidelity(sigma, rho),
        "witness": spec.to_dict(),
    }


def _cmd_complexity(cfg: RunConfig) -> dict:
    spec = build_witness(cfg.params.resource())
    plan = make_plan(
        spec,
        cfg.params.eta,
        cfg.params.beta,
        second_moment_bound=cfg.second_moment_bound,
        seed=cfg.params.seed,
    )
    return {
        "trials": plan.trials,
        "copies": plan.trials + 1,
        "eta": cfg.params.eta,
        "beta": cfg.params.beta,
        "second_moment": plan.second_moment,
        "second_moment_source": plan.second_moment_source,
        "plan": plan.to_dict(),
    }


def _cmd_estimate(cfg: RunConfig) -> dict:
    spec = build_witness(cfg.params.resource())
    rho = adversary_state(cfg.adversary, cfg.params.resource())
    plan = make_plan(
        spec,
        cfg.params.eta,
        cfg.params.beta,
        second_moment_bound=cfg.second_moment_bound,
        seed=cfg.params.seed,
    )
    sink = None
    rows: list = []
    if cfg.trial_csv:
        def sink(trial_idx, term_idx, outcomes, values):
            rows.extend(zip(trial_idx.tolist(), term_idx.tolist(),
                            outcomes.tolist(), values.tolist()))
    report = estimate_lower_bound(rho, spec, plan, workers=cfg.workers, trial_sink=sink)
    if cfg.trial_csv:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        with open(cfg.out_dir / "trials.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["trial_index", "i", "f", "F_if"])
            for row in rows:
                writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    return {
        "adversary": cfg.adversary.to_dict(),
        "plan": plan.to_dict(),
        "estimate": report.to_dict(),
        "f_low_exact": fidelity_lower_bound(rho, spec),
    }


def _cmd_teleport(cfg: RunConfig) -> dict:
    params = cfg.params
    resource_spec = params.resource(dim=params.injection_dim, tail_tol=INJECTION_TAIL_TOL)
    resource = adversary_state(cfg.adversary, resource_spec)
    psi_in = FockState.vacuum(params.injection_dim)
    rng = np.random.default_rng(params.seed)
    result = inject_cubic(
        psi_in,
        resource,
        gamma=params.gamma_list[0],
        gamma_tilde=params.gamma_tilde,
        s=params.s,
        x_meas=cfg.x_meas,
        rng=rng,
    )
    return {"adversary": cfg.adversary.to_dict(), "injection": result.to_dict()}


def _transcript_rows(transcripts, adversary: AdversarySpec):
    for t in transcripts:
        yield {
            "run_index": t.run_index,
            "adversary": json.dumps(adversary.to_dict(), sort_keys=True),
            "F_exact": t.fidelity_exact,
            "f_low_est": t.estimate.f_low_est,
            "decision": t.decision.value,
            "incorrectness": "" if t.incorrectness is None else repr(t.incorrectness),
        }


def _write_runs_csv(cfg: RunConfig, rows) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "runs.csv", "w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=["run_index", "adversary", "F_exact", "f_low_est",
                        "decision", "incorrectness"],
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _cmd_protocol_run(cfg: RunConfig) -> dict:
    ctx = RunContext(cfg.params, cfg.adversary)
    if cfg.runs <= 1:
        transcript = run_protocol(cfg.params, cfg.adversary, context=ctx,
                                  workers=cfg.workers)
        if cfg.runs_csv:
            _write_runs_csv(cfg, _transcript_rows([transcript], cfg.adversary))
        return {"adversary": cfg.adversary.to_dict(), "transcript": transcript.to_dict()}
    mc = verifiability_monte_carlo(
        cfg.params, cfg.adversary, runs=cfg.runs, workers=cfg.workers, context=ctx
    )
    transcripts = mc.pop("transcripts")
    if cfg.runs_csv:
        _write_runs_csv(cfg, _transcript_rows(transcripts, cfg.adversary))
    return {
        "adversary": cfg.adversary.to_dict(),
        "verifiability": mc,
        "decisions": [t.decision.value for t in transcripts],
    }


def _cmd_adversary_sweep(cfg: RunConfig) -> dict:
    if cfg.sweep is None:
        raise ConfigError("adversary-sweep requires a 'sweep' section")
    kind = cfg.sweep["kind"]
    cells = []
    rows = []
    for value in cfg.sweep["values"]:
        if kind == "wrong_gamma":
            adversary = AdversarySpec(kind="wrong_gamma", gamma_value=float(value))
        else:
            adversary = AdversarySpec(kind=kind, weight=float(value))
        mc = verifiability_monte_carlo(
            cfg.params, adversary, runs=max(cfg.runs, 100), workers=cfg.workers
        )
        transcripts = mc.pop("transcripts")
        rows.extend(_transcript_rows(transcripts, adversary))
        cells.append({"value": value, **{k: mc[k] for k in sorted(mc)}})
    _write_runs_csv(cfg, rows)
    return {"sweep": cfg.sweep, "cells": cells}


_RUNNERS = {
    "witness-eval": _cmd_witness_eval,
    "estimate": _cmd_estimate,
    "complexity": _cmd_complexity,
    "teleport": _cmd_teleport,
    "protocol-run": _cmd_protocol_run,
    "adversary-sweep": _cmd_adversary_sweep,
}


def run_command(command: str, cfg: RunConfig) -> Path:
    """Execute one command and write its report; returns the report path."""
    payload = _RUNNERS[command](cfg)
    return _write_report(cfg, command, payload)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvverify",
        description="Simulate and verify blind delegated CV computation with cubic-phase resources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON config file")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--out-dir", default=None)
        cmd.add_argument("--workers", type=int, default=None)
        cmd.add_argument("--runs", type=int, default=None)
        cmd.add_argument("--dim", type=int, default=None, help="override D")
        cmd.add_argument("--eta", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "out_dir": args.out_dir,
        "workers": args.workers,
        "runs": args.runs,
        "D": args.dim,
        "eta": args.eta,
    }
    try:
        cfg = parse_config(path=args.config, overrides=overrides)
        path = run_command(args.command, cfg)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except TruncationError as err:
        print(f"convergence failure: {err}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
