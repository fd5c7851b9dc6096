"""Right-hand sides and method-of-steps integration for the delayed systems.

The main integrator advances classical RK4 on segments aligned with the
delay (dt divides tau), so every delayed lookup lands on already-computed
history.  Dense output between nodes is cubic Hermite from stored states
and RHS values; on the startup interval the prescribed datum is evaluated
directly.  A deliberately simple explicit-Euler integrator with linear
history interpolation serves as an independent cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import HistoryUnderflow, InvalidConfig, NonFinite, OutOfRange
from .model import (
    DelayKind,
    InitialDatum,
    SystemConfig,
    WeightScheme,
    weights_from_states,
)

BLOW_UP_THRESHOLD = 1e12


class Method(str, Enum):
    RK4_STEPS = "rk4_steps"
    EULER_ORACLE = "euler_oracle"


@dataclass(frozen=True)
class IntegratorSpec:
    """Integration method and step size; dt must divide tau exactly."""

    method: Method
    dt: float

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise InvalidConfig(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "method", Method(self.method))

    def steps_per_delay(self, tau: float) -> int:
        q = round(tau / self.dt)
        if q < 1 or abs(q * self.dt - tau) > 1e-12 * max(1.0, tau):
            raise InvalidConfig(
                f"dt={self.dt:g} must divide tau={tau:g} into an integer step count"
            )
        return int(q)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "dt": self.dt}


def default_spec(config: SystemConfig, method: Method = Method.RK4_STEPS) -> IntegratorSpec:
    return IntegratorSpec(method, config.tau / 64.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense-output solution history on [-tau, T].

    States and RHS values are stored on a uniform grid with grid[0] = -tau;
    sample() interpolates between nodes (cubic Hermite for the RK4 method,
    linear for the Euler oracle) and reproduces stored nodes exactly.  On
    the startup interval the datum itself is evaluated, which is exact.
    """

    grid: np.ndarray  # (n,)
    states: np.ndarray  # (n, N, d)
    derivs: np.ndarray  # (n, N, d)
    config: SystemConfig
    datum: InitialDatum
    interp: str  # "hermite" | "linear"

    @property
    def t_start(self) -> float:
        return float(self.grid[0])

    @property
    def t_end(self) -> float:
        return float(self.grid[-1])

    def sample(self, t: float) -> np.ndarray:
        return _sample_raw(
            self.grid, self.states, self.derivs, self.datum,
            self.interp, self.grid.size, t,
        )


def _sample_raw(grid, states, derivs, datum, interp, n_valid, t):
    t_lo = grid[0]
    t_hi = grid[n_valid - 1]
    pad = 1e-9 * (1.0 + abs(t))
    if t < t_lo - pad or t > t_hi + pad:
        raise OutOfRange(f"sample at t={t:.6g} outside [{t_lo:.6g}, {t_hi:.6g}]")
    t = min(max(t, t_lo), t_hi)
    if t <= 0.0:
        return datum.at(t)
    i = int(np.searchsorted(grid[:n_valid], t, side="right")) - 1
    i = min(max(i, 0), n_valid - 2)
    h = grid[i + 1] - grid[i]
    theta = (t - grid[i]) / h
    if theta == 0.0:
        return states[i].copy()
    if interp == "linear":
        return (1.0 - theta) * states[i] + theta * states[i + 1]
    return _hermite(states[i], states[i + 1], derivs[i], derivs[i + 1], h, theta)


def _hermite(y0, y1, f0, f1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + h * (t3 - 2.0 * t2 + theta) * f0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + h * (t3 - t2) * f1
    )


def velocity_from_states(
    config: SystemConfig, x_now: np.ndarray | None, x_delayed: np.ndarray
) -> np.ndarray:
    """Velocity field from explicit states.

    Transmission: dx_i/dt = sum_j psi_ij (x_delayed_j - x_now_i).
    Reaction:     dx_i/dt = sum_j psi_ij (x_delayed_j - x_delayed_i).
    """
    w = weights_from_states(config, x_now, x_delayed)
    anchor = x_now if config.delay_kind is DelayKind.TRANSMISSION else x_delayed
    return w @ x_delayed - w.sum(axis=1)[:, None] * anchor


def rhs(config: SystemConfig, history, t: float) -> np.ndarray:
    """Instantaneous velocity (N, d) at time t read entirely from history.

    Transmission needs history on [t - tau, t]; reaction reads everything
    at t - tau and so works one delay past the stored horizon.
    """
    transmission = config.delay_kind is DelayKind.TRANSMISSION
    _require_coverage(history, t - config.tau, t if transmission else t - config.tau)
    x_delayed = history.sample(t - config.tau)
    x_now = history.sample(t) if transmission else None
    return velocity_from_states(config, x_now, x_delayed)


def _require_coverage(history, t_lo: float, t_hi: float) -> None:
    pad = 1e-9 * (1.0 + max(abs(t_lo), abs(t_hi)))
    if t_lo < history.t_start - pad or t_hi > history.t_end + pad:
        raise HistoryUnderflow(
            f"history covers [{history.t_start:.6g}, {history.t_end:.6g}], "
            f"lookup needs [{t_lo:.6g}, {t_hi:.6g}]"
        )


def _make_grid(config: SystemConfig, datum: InitialDatum, horizon: float, spec: IntegratorSpec):
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise InvalidConfig(f"horizon must be positive, got {horizon}")
    if datum.n_agents != config.n_agents or datum.dim != config.dim:
        raise InvalidConfig(
            f"datum shape ({datum.n_agents}, {datum.dim}) does not match "
            f"config ({config.n_agents}, {config.dim})"
        )
    datum.require_coverage(config.tau)
    q = spec.steps_per_delay(config.tau)
    n_fwd = int(math.ceil(horizon / spec.dt - 1e-9))
    grid = (np.arange(q + n_fwd + 1) - q) * spec.dt
    return grid, q, n_fwd


def _fill_startup(grid, q, datum):
    n = grid.size
    states = np.empty((n, datum.n_agents, datum.dim))
    derivs = np.empty_like(states)
    for m in range(q + 1):
        states[m] = datum.at(grid[m])
        derivs[m] = datum.slope_at(grid[m])
    return states, derivs


def integrate(
    config: SystemConfig,
    datum: InitialDatum,
    horizon: float,
    spec: IntegratorSpec | None = None,
) -> Trajectory:
    """Integrate the delayed system by RK4 method of steps over [0, horizon].

    Raises NonFinite (carrying the partial trajectory and blow-up time) if
    any state exceeds the blow-up threshold, which is the expected outcome
    in the unstable reaction regime.
    """
    if spec is None:
        spec = default_spec(config)
    if spec.method is not Method.RK4_STEPS:
        raise InvalidConfig("integrate expects an rk4_steps spec")
    grid, q, n_fwd = _make_grid(config, datum, horizon, spec)
    states, derivs = _fill_startup(grid, q, datum)
    dt = spec.dt
    tau = config.tau
    transmission = config.delay_kind is DelayKind.TRANSMISSION

    def lookup(n_valid, t):
        return _sample_raw(grid, states, derivs, datum, "hermite", n_valid, t)

    def vel(x_now, x_del):
        return velocity_from_states(config, x_now if transmission else None, x_del)

    with np.errstate(all="ignore"):
        derivs[q] = vel(states[q], lookup(q + 1, -tau))
        for m in range(q, q + n_fwd):
            t0 = grid[m]
            y0 = states[m]
            xd_half = lookup(m + 1, t0 + 0.5 * dt - tau)
            xd_full = lookup(m + 1, t0 + dt - tau)
            k1 = derivs[m]
            k2 = vel(y0 + 0.5 * dt * k1, xd_half)
            k3 = vel(y0 + 0.5 * dt * k2, xd_half)
            k4 = vel(y0 + dt * k3, xd_full)
            y1 = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y1)) or np.max(np.abs(y1)) > BLOW_UP_THRESHOLD:
                partial = Trajectory(
                    grid[: m + 1].copy(), states[: m + 1].copy(),
                    derivs[: m + 1].copy(), config, datum, "hermite",
                )
                raise NonFinite(float(grid[m + 1]), partial)
            states[m + 1] = y1
            derivs[m + 1] = vel(y1, lookup(m + 2, grid[m + 1] - tau))
    return Trajectory(grid, states, derivs, config, datum, "hermite")


def _oracle_velocity(config: SystemConfig, x_now, x_delayed) -> np.ndarray:
    # Plain double loop over agents with scalar psi evaluations; kept
    # intentionally separate from the vectorized path it cross-checks.
    n = config.n_agents
    classical = config.weight_scheme is WeightScheme.CLASSICAL_SCALED
    out = np.zeros_like(x_delayed)
    for i in range(n):
        base = x_now[i] if config.delay_kind is DelayKind.TRANSMISSION else x_delayed[i]
        vals = []
        for j in range(n):
            if j == i:
                vals.append(0.0)
                continue
            s = math.sqrt(float(((x_delayed[j] - base) ** 2).sum()))
            vals.append(float(config.influence(s)))
        denom = (n - 1) if classical else sum(vals)
        acc = np.zeros(config.dim)
        for j in range(n):
            if j != i:
                acc += (vals[j] / denom) * (x_delayed[j] - base)
        out[i] = acc
    return out


def integrate_oracle(
    config: SystemConfig,
    datum: InitialDatum,
    horizon: float,
    spec: IntegratorSpec | None = None,
) -> Trajectory:
    """Explicit Euler with linear history interpolation (verification path)."""
    if spec is None:
        spec = default_spec(config, Method.EULER_ORACLE)
    if spec.method is not Method.EULER_ORACLE:
        raise InvalidConfig("integrate_oracle expects an euler_oracle spec")
    grid, q, n_fwd = _make_grid(config, datum, horizon, spec)
    states, derivs = _fill_startup(grid, q, datum)
    dt = spec.dt
    tau = config.tau

    def lookup(n_valid, t):
        return _sample_raw(grid, states, derivs, datum, "linear", n_valid, t)

    with np.errstate(all="ignore"):
        for m in range(q, q + n_fwd):
            x_del = lookup(m + 1, grid[m] - tau)
            v = _oracle_velocity(config, states[m], x_del)
            derivs[m] = v
            y1 = states[m] + dt * v
            if not np.all(np.isfinite(y1)) or np.max(np.abs(y1)) > BLOW_UP_THRESHOLD:
                partial = Trajectory(
                    grid[: m + 1].copy(), states[: m + 1].copy(),
                    derivs[: m + 1].copy(), config, datum, "linear",
                )
                raise NonFinite(float(grid[m + 1]), partial)
            states[m + 1] = y1
        derivs[q + n_fwd] = _oracle_velocity(
            config, states[q + n_fwd], lookup(q + n_fwd + 1, grid[q + n_fwd] - tau)
        )
    return Trajectory(grid, states, derivs, config, datum, "linear")


# ---------------------------------------------------------------------------
# Export

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write `t,agent,component,value` rows; times round-trip bit-exactly."""
    with open(path, "w", newline="") as fh:
        fh.write("t,agent,component,value\n")
        for m, t in enumerate(traj.grid):
            ts = _fmt(t)
            for i in range(traj.config.n_agents):
                for k in range(traj.config.dim):
                    fh.write(f"{ts},{i},{k},{_fmt(traj.states[m, i, k])}\n")


def read_trajectory_csv(path):
    """Read back (times, states) from a trajectory CSV."""
    times = []
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,agent,component,value":
            raise InvalidConfig(f"unexpected trajectory CSV header: {header!r}")
        for line in fh:
            t_s, i_s, k_s, v_s = line.rstrip("\n").split(",")
            rows.append((float(t_s), int(i_s), int(k_s), float(v_s)))
            if not times or times[-1] != float(t_s):
                times.append(float(t_s))
    times = np.asarray(times)
    n_agents = max(r[1] for r in rows) + 1
    dim = max(r[2] for r in rows) + 1
    states = np.empty((times.size, n_agents, dim))
    t_index = {t: m for m, t in enumerate(times)}
    for t, i, k, v in rows:
        states[t_index[t], i, k] = v
    return times, states


def trajectory_to_json(traj: Trajectory, path=None) -> dict:
    doc = {
        "config": traj.config.to_dict(),
        "interp": traj.interp,
        "grid": traj.grid.tolist(),
        "states": traj.states.tolist(),
        "derivs": traj.derivs.tolist(),
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh)
    return doc
