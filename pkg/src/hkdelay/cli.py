"""Command-line front end: simulate, sweep, rate, and toy subcommands.

Experiment specs are JSON documents (schema in the README).  Randomized
initial data are resolved into explicit vectors before a run, and the
resolved spec is embedded in report.json so any run can be reproduced
bit-for-bit from its own report.  Exit codes: 0 success, 1 configuration
error, 2 blow-up (partial outputs still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, metrics, rates, toy
from .errors import HKDelayError, NonFinite, NonPositiveSeries, SpecError
from .model import (
    DelayKind,
    InitialDatum,
    SystemConfig,
    config_from_dict,
    datum_from_dict,
    psi_floor,
)

DEFAULT_OUTPUTS = ("trajectory", "metrics", "report")
KNOWN_OUTPUTS = ("trajectory", "metrics", "rates", "report")
SWEEP_PARAMS = ("tau", "N", "gamma", "horizon")
CONSENSUS_REL_TOL = 1e-3


@dataclass(frozen=True)
class ExperimentSpec:
    """One fully resolved run: system, datum, integrator, horizon, outputs."""

    config: SystemConfig
    datum: InitialDatum
    integrator: dynamics.IntegratorSpec
    horizon: float
    outputs: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "datum": self.datum.to_dict(),
            "integrator": self.integrator.to_dict(),
            "horizon": self.horizon,
            "outputs": list(self.outputs),
            "seed": self.seed,
        }


def _resolve_datum(raw: dict, config: SystemConfig, seed: int) -> InitialDatum:
    kind = raw.get("kind")
    if kind == "random_uniform":
        low = float(raw.get("low", 0.0))
        high = float(raw.get("high", 1.0))
        rng = np.random.default_rng(seed)
        return InitialDatum.constant(rng.uniform(low, high, (config.n_agents, config.dim)))
    return datum_from_dict(raw)


def load_spec(doc: dict, overrides: dict | None = None) -> ExperimentSpec:
    """Build a resolved ExperimentSpec from a JSON document."""
    overrides = overrides or {}
    if "config" not in doc:
        raise SpecError("config: missing field")
    if "datum" not in doc:
        raise SpecError("datum: missing field")
    config = config_from_dict(doc["config"])
    seed = int(overrides.get("seed", doc.get("seed", 0)))
    datum = _resolve_datum(doc["datum"], config, seed)
    if datum.n_agents != config.n_agents or datum.dim != config.dim:
        raise SpecError(
            f"datum: shape ({datum.n_agents}, {datum.dim}) does not match "
            f"config.n_agents/dim ({config.n_agents}, {config.dim})"
        )
    horizon = float(overrides.get("horizon", doc.get("horizon", 20.0 * config.tau)))
    integ = doc.get("integrator", {})
    dt = float(overrides.get("dt", integ.get("dt", config.tau / 64.0)))
    method = dynamics.Method(integ.get("method", "rk4_steps"))
    outputs = tuple(doc.get("outputs", DEFAULT_OUTPUTS))
    for name in outputs:
        if name not in KNOWN_OUTPUTS:
            raise SpecError(f"outputs: unknown entry {name!r}")
    return ExperimentSpec(
        config=config,
        datum=datum,
        integrator=dynamics.IntegratorSpec(method, dt),
        horizon=horizon,
        outputs=outputs,
        seed=seed,
    )


def load_spec_file(path, overrides: dict | None = None) -> ExperimentSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON (line {exc.lineno}, column {exc.colno})")
    return load_spec(doc, overrides)


@dataclass(frozen=True)
class RunResult:
    spec: ExperimentSpec
    trajectory: dynamics.Trajectory
    series: metrics.MetricSeries
    report: dict
    blow_up_time: float | None


def _fit_window(series: metrics.MetricSeries):
    """Fit window for the empirical rate: mid-run, while d_x is resolvable."""
    t = series.times
    horizon = float(t[-1])
    floor = max(series.d_x0 * 1e-12, 1e-280)
    ok = (t >= 0.1 * horizon) & (t <= 0.9 * horizon) & (series.d_x > floor)
    if ok.sum() < 8:
        return None
    lo = float(t[ok][0])
    hi = float(t[ok][-1])
    return (lo, hi) if hi > lo else None


def _fit_c_emp(series: metrics.MetricSeries):
    window = _fit_window(series)
    if window is None:
        return None
    try:
        return metrics.fit_decay_rate(series.times, series.d_x, window).c_emp
    except NonPositiveSeries:
        return None


def _theoretical_rates(spec: ExperimentSpec, report: rates.PreconditionReport) -> dict:
    out: dict = {}
    config = spec.config
    if report.transmission_normalized.applies and config.n_agents >= 3:
        psi_low = psi_floor(config.influence, 2.0 * report.r_x0)
        res = rates.rate_transmission_normalized(config.n_agents, psi_low, config.tau)
        out["transmission_normalized"] = {"psi_lower": psi_low, **res.to_dict()}
    if report.reaction_small_delay.applies:
        res = rates.rate_reaction_nonsymmetric(report.psi0_lower, config.tau)
        out["reaction_small_delay"] = {"psi0_lower": report.psi0_lower, **res.to_dict()}
    return out


def run_experiment(spec: ExperimentSpec) -> RunResult:
    blow_up = None
    advance = (
        dynamics.integrate
        if spec.integrator.method is dynamics.Method.RK4_STEPS
        else dynamics.integrate_oracle
    )
    try:
        traj = advance(spec.config, spec.datum, spec.horizon, spec.integrator)
    except NonFinite as exc:
        traj = exc.trajectory
        blow_up = exc.time
    series = metrics.compute_metrics(spec.config, traj)
    precond = rates.check_preconditions(spec.config, spec.datum)
    theoretical = _theoretical_rates(spec, precond)
    c_emp = None if blow_up is not None else _fit_c_emp(series)
    tol = CONSENSUS_REL_TOL * max(series.d_x0, 1e-300)
    t_cons = None if blow_up is not None else metrics.consensus_time(series, tol)
    report = {
        "spec": spec.to_dict(),
        "preconditions": precond.to_dict(),
        "rates": theoretical,
        "metrics_summary": {
            "d_x0": series.d_x0,
            "d_x_final": float(series.d_x[-1]),
            "r_x0": precond.r_x0,
            "X0": float(series.X[np.searchsorted(series.times, -1e-12, side="right")]),
            "X_final": float(series.X[-1]),
            "consensus_time": t_cons,
            "consensus_tol": tol,
            "C_emp": c_emp,
        },
        "blow_up_time": blow_up,
        "exit_reason": "ok" if blow_up is None else "blow_up",
    }
    return RunResult(spec, traj, series, report, blow_up)


def write_outputs(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = result.spec.outputs
    if "trajectory" in outputs:
        dynamics.trajectory_to_csv(result.trajectory, out_dir / "trajectory.csv")
    if "metrics" in outputs:
        result.series.to_csv(out_dir / "metrics.csv")
    if "rates" in outputs:
        with open(out_dir / "rates.json", "w") as fh:
            json.dump(result.report["rates"], fh, indent=2, sort_keys=True)
            fh.write("\n")
    if "report" in outputs:
        with open(out_dir / "report.json", "w") as fh:
            json.dump(result.report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def cmd_simulate(args) -> int:
    spec = load_spec_file(args.spec, _overrides(args))
    result = run_experiment(spec)
    write_outputs(result, Path(args.out))
    if result.blow_up_time is not None:
        print(f"blow-up at t={result.blow_up_time:.6g}; partial outputs written", file=sys.stderr)
        return 2
    return 0


def _apply_sweep_value(doc: dict, param: str, value: float) -> dict:
    doc = json.loads(json.dumps(doc))  # deep copy
    if param == "tau":
        doc["config"]["tau"] = value
        if doc["datum"].get("kind") == "sampled":
            raise SpecError("sweep over tau needs a constant or random datum")
        doc.get("integrator", {}).pop("dt", None)
        doc.pop("horizon", None)  # keep horizon proportional to tau
    elif param == "N":
        if value != int(value):
            raise SpecError(f"sweep value for N must be an integer, got {value}")
        doc["config"]["n_agents"] = int(value)
        if doc["datum"].get("kind") != "random_uniform":
            raise SpecError("sweep over N needs a random_uniform datum")
    elif param == "gamma":
        if doc["config"]["influence"].get("kind") != "algebraic_decay":
            raise SpecError("sweep over gamma needs an algebraic_decay influence")
        doc["config"]["influence"]["gamma"] = value
    elif param == "horizon":
        doc["horizon"] = value
    else:
        raise SpecError(f"unknown sweep parameter {param!r} (choose from {SWEEP_PARAMS})")
    return doc


def _sweep_row(doc: dict, param: str, value: float, overrides: dict) -> dict:
    spec = load_spec(_apply_sweep_value(doc, param, value), overrides)
    result = run_experiment(spec)
    regime = ""
    if spec.config.n_agents == 2:
        regime = toy.classify_regime(spec.config.delay_kind, spec.config.tau).value
    summary = result.report["metrics_summary"]
    return {
        "value": value,
        "consensus_time": summary["consensus_time"],
        "C_emp": summary["C_emp"],
        "regime": regime,
        "preconditions": "|".join(
            rates.check_preconditions(spec.config, spec.datum).applicable()
        ),
    }


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise SpecError(f"unknown sweep parameter {args.param!r} (choose from {SWEEP_PARAMS})")
    try:
        with open(args.spec) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {args.spec}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec is not valid JSON (line {exc.lineno}, column {exc.colno})")
    overrides = _overrides(args)
    values = [float(v) for v in args.values]
    rows = []
    if values:
        # tau sweeps drop the fixed dt/horizon; other sweeps keep overrides
        with ThreadPoolExecutor(max_workers=min(8, max(1, len(values)))) as pool:
            rows = list(pool.map(lambda v: _sweep_row(doc, args.param, v, overrides), values))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        fh.write("value,consensus_time,C_emp,regime,preconditions\n")
        for row in rows:
            cells = [format(row["value"], ".17g")]
            for key in ("consensus_time", "C_emp"):
                v = row[key]
                cells.append("" if v is None else format(float(v), ".17g"))
            cells.append(row["regime"])
            cells.append(row["preconditions"])
            fh.write(",".join(cells) + "\n")
    return 0


def cmd_rate(args) -> int:
    measure = rates.Measure.DIRAC_AT_ZERO if args.measure == "dirac" else rates.Measure.UNIFORM_ON_DELAY
    problem = rates.HalanayProblem(args.alpha, args.beta, args.tau, measure)
    result = rates.solve_halanay(problem)
    print(json.dumps({**problem.to_dict(), **result.to_dict()}, sort_keys=True))
    return 0


def cmd_toy(args) -> int:
    kind = DelayKind.TRANSMISSION if args.kind == "transmission" else DelayKind.REACTION
    regime = toy.classify_regime(kind, args.tau)
    root = toy.rightmost_root(kind, args.tau)
    horizon = args.horizon if args.horizon is not None else 40.0 * args.tau
    dt = args.dt if args.dt is not None else args.tau / 64.0
    series = toy.simulate_toy(kind, args.tau, w0=1.0, horizon=horizon, dt=dt)
    forward = series.times > 0.0
    changes = metrics.count_sign_changes(series.w[forward])
    fitted = toy.fitted_decay_rate(series)
    print(
        json.dumps(
            {
                "tau": args.tau,
                "regime": regime.value,
                "rightmost_root": root.to_dict(),
                "sign_changes": changes,
                "fitted_rate": fitted,
            },
            sort_keys=True,
        )
    )
    return 0


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "dt", None) is not None:
        out["dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        out["horizon"] = args.horizon
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--dt", type=float, default=None, help="integrator step")
    common.add_argument("--horizon", type=float, default=None, help="integration horizon")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized data")

    parser = argparse.ArgumentParser(prog="hkdelay", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[common], help="run one experiment spec")
    p_sim.add_argument("spec", help="path to the experiment spec JSON")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", parents=[common], help="sweep one parameter")
    p_sweep.add_argument("spec")
    p_sweep.add_argument("--param", required=True, help=f"one of {SWEEP_PARAMS}")
    p_sweep.add_argument("--values", nargs="*", default=[], help="decimal values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rate = sub.add_parser("rate", parents=[common], help="solve a rate equation")
    p_rate.add_argument("--alpha", type=float, required=True)
    p_rate.add_argument("--beta", type=float, required=True)
    p_rate.add_argument("--tau", type=float, default=1.0)
    p_rate.add_argument("--measure", choices=["dirac", "uniform"], default="dirac")
    p_rate.set_defaults(func=cmd_rate)

    p_toy = sub.add_parser("toy", parents=[common], help="two-agent regime analysis")
    p_toy.add_argument("--tau", type=float, required=True)
    p_toy.add_argument("--kind", choices=["transmission", "reaction"], required=True)
    p_toy.set_defaults(func=cmd_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HKDelayError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
