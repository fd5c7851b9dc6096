"""System configuration, influence functions, initial data, and
communication-weight evaluation for delayed Hegselmann-Krause dynamics.

Two delay mechanisms are supported: with transmission-type delay an agent
compares its *current* state against delayed states of the others, while
with reaction-type delay the whole comparison happens at the delayed time.
Each combines with either classical 1/(N-1)-scaled weights (row sums at
most one) or row-normalized weights (row sums exactly one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import HistoryUnderflow, InvalidConfig, InvalidDatum, OutOfRange

ROW_SUM_TOL = 1e-12


class DelayKind(str, Enum):
    TRANSMISSION = "transmission"
    REACTION = "reaction"


class WeightScheme(str, Enum):
    CLASSICAL_SCALED = "classical_scaled"
    NORMALIZED = "normalized"


class RowSumContract(str, Enum):
    AT_MOST_ONE = "at_most_one"
    EXACTLY_ONE = "exactly_one"


class InfluenceKind(str, Enum):
    CONSTANT = "constant"
    ALGEBRAIC_DECAY = "algebraic_decay"
    TABLE = "table"


@dataclass(frozen=True, eq=False)
class InfluenceFunction:
    """Distance-dependent communication intensity psi: [0, inf) -> (0, 1].

    Three families: a constant value c, the algebraic decay
    (1 + s^2)^(-gamma), and a tabulated profile with linear interpolation
    between knots and constant extension beyond the last knot.  No
    monotonicity is assumed; evaluation always stays in (0, 1].
    """

    kind: InfluenceKind
    c: float = 1.0
    gamma: float = 1.0
    knots_s: np.ndarray | None = None
    knots_psi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is InfluenceKind.CONSTANT:
            if not (0.0 < self.c <= 1.0):
                raise InvalidConfig(f"influence.c must be in (0, 1], got {self.c}")
        elif self.kind is InfluenceKind.ALGEBRAIC_DECAY:
            if not (self.gamma >= 0.0 and math.isfinite(self.gamma)):
                raise InvalidConfig(f"influence.gamma must be >= 0, got {self.gamma}")
        elif self.kind is InfluenceKind.TABLE:
            s = np.asarray(self.knots_s, dtype=float)
            p = np.asarray(self.knots_psi, dtype=float)
            if s.ndim != 1 or s.size < 2 or p.shape != s.shape:
                raise InvalidConfig("influence.table needs >= 2 (s, psi) pairs")
            if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
                raise InvalidConfig("influence.table grid must start at 0 and increase")
            if np.any(p <= 0.0) or np.any(p > 1.0):
                raise InvalidConfig("influence.table values must be in (0, 1]")
            object.__setattr__(self, "knots_s", s)
            object.__setattr__(self, "knots_psi", p)
        else:
            raise InvalidConfig(f"unknown influence kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float = 1.0) -> "InfluenceFunction":
        return cls(InfluenceKind.CONSTANT, c=float(c))

    @classmethod
    def algebraic_decay(cls, gamma: float = 1.0) -> "InfluenceFunction":
        return cls(InfluenceKind.ALGEBRAIC_DECAY, gamma=float(gamma))

    @classmethod
    def table(cls, samples) -> "InfluenceFunction":
        samples = np.asarray(samples, dtype=float)
        return cls(InfluenceKind.TABLE, knots_s=samples[:, 0], knots_psi=samples[:, 1])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind is InfluenceKind.CONSTANT:
            out = np.full_like(s, self.c)
        elif self.kind is InfluenceKind.ALGEBRAIC_DECAY:
            out = (1.0 + s * s) ** (-self.gamma)
        else:
            out = np.interp(s, self.knots_s, self.knots_psi)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        if self.kind is InfluenceKind.CONSTANT:
            return {"kind": self.kind.value, "c": self.c}
        if self.kind is InfluenceKind.ALGEBRAIC_DECAY:
            return {"kind": self.kind.value, "gamma": self.gamma}
        samples = np.column_stack([self.knots_s, self.knots_psi])
        return {"kind": self.kind.value, "samples": samples.tolist()}


def psi_floor(influence: InfluenceFunction, d: float) -> float:
    """Minimum of the influence function over distances [0, d].

    Exact for the constant and algebraic families (monotone, so the
    minimum sits at an endpoint) and for tabulated profiles (piecewise
    linear attains extrema at knots), hence usable as a certified lower
    bound in the rate formulas.
    """
    if d < 0.0 or not math.isfinite(d):
        raise InvalidConfig(f"psi_floor needs finite d >= 0, got {d}")
    if influence.kind is InfluenceKind.CONSTANT:
        return influence.c
    if influence.kind is InfluenceKind.ALGEBRAIC_DECAY:
        return float((1.0 + d * d) ** (-influence.gamma))
    inside = influence.knots_s <= d
    candidates = [float(influence(d))]
    if np.any(inside):
        candidates.append(float(np.min(influence.knots_psi[inside])))
    candidates.append(float(influence(0.0)))
    return min(candidates)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Full description of one delayed consensus system."""

    n_agents: int
    dim: int
    tau: float
    delay_kind: DelayKind
    weight_scheme: WeightScheme
    influence: InfluenceFunction

    def __post_init__(self):
        if int(self.n_agents) != self.n_agents or self.n_agents < 2:
            raise InvalidConfig(f"n_agents must be an integer >= 2, got {self.n_agents}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidConfig(f"dim must be an integer >= 1, got {self.dim}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise InvalidConfig(f"tau must be a positive real, got {self.tau}")
        object.__setattr__(self, "n_agents", int(self.n_agents))
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "delay_kind", DelayKind(self.delay_kind))
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "dim": self.dim,
            "tau": self.tau,
            "delay_kind": self.delay_kind.value,
            "weight_scheme": self.weight_scheme.value,
            "influence": self.influence.to_dict(),
        }


def has_symmetric_weights(config: SystemConfig) -> bool:
    """True when the weight matrix is symmetric at every time.

    Reaction-type classical weights compare same-time arguments, hence are
    symmetric; normalized weights are symmetric only for a constant psi
    (all entries collapse to 1/(N-1)).
    """
    if config.delay_kind is not DelayKind.REACTION:
        return False
    if config.weight_scheme is WeightScheme.CLASSICAL_SCALED:
        return True
    return config.influence.kind is InfluenceKind.CONSTANT


class DatumKind(str, Enum):
    CONSTANT_PER_AGENT = "constant_per_agent"
    SAMPLED = "sampled"


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """Prescribed continuous trajectories on the startup interval.

    Constant data hold one vector per agent; sampled data carry a strictly
    increasing time grid with per-agent states, evaluated by linear
    interpolation between grid points.
    """

    kind: DatumKind
    values: np.ndarray  # constant kind: (N, d)
    times: np.ndarray | None = None  # sampled kind: (M,)
    samples: np.ndarray | None = None  # sampled kind: (M, N, d)

    @classmethod
    def constant(cls, vectors) -> "InitialDatum":
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        if v.size == 0:
            raise InvalidDatum("constant datum needs at least one agent vector")
        if not np.all(np.isfinite(v)):
            raise InvalidDatum("constant datum contains non-finite values")
        return cls(DatumKind.CONSTANT_PER_AGENT, values=v)

    @classmethod
    def sampled(cls, times, values) -> "InitialDatum":
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.size == 0 or v.size == 0:
            raise InvalidDatum("sampled datum grid is empty")
        if t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise InvalidDatum("sampled datum needs a strictly increasing grid")
        if v.ndim == 2:  # (M, N) shorthand for d = 1
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[0] != t.size:
            raise InvalidDatum("sampled datum values must have shape (M, N, d)")
        if not np.all(np.isfinite(v)):
            raise InvalidDatum("sampled datum contains non-finite values")
        return cls(DatumKind.SAMPLED, values=v[0], times=t, samples=v)

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def require_coverage(self, tau: float) -> None:
        if self.kind is DatumKind.CONSTANT_PER_AGENT:
            return
        pad = 1e-9 * (1.0 + tau)
        if self.times[0] > -tau + pad or self.times[-1] < -pad:
            raise InvalidDatum(
                f"sampled datum spans [{self.times[0]:g}, {self.times[-1]:g}], "
                f"needs [-{tau:g}, 0]"
            )

    def at(self, t: float) -> np.ndarray:
        """State (N, d) at time t on the startup interval."""
        if self.kind is DatumKind.CONSTANT_PER_AGENT:
            return self.values
        ts = self.times
        pad = 1e-9 * (1.0 + abs(t))
        if t < ts[0] - pad or t > ts[-1] + pad:
            raise OutOfRange(f"datum sample at t={t:g} outside [{ts[0]:g}, {ts[-1]:g}]")
        t = min(max(t, ts[0]), ts[-1])
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), ts.size - 2)
        theta = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - theta) * self.samples[i] + theta * self.samples[i + 1]

    def slope_at(self, t: float) -> np.ndarray:
        """Derivative (N, d) of the interpolant; zero for constant data."""
        if self.kind is DatumKind.CONSTANT_PER_AGENT:
            return np.zeros_like(self.values)
        ts = self.times
        i = int(np.searchsorted(ts, min(max(t, ts[0]), ts[-1]), side="right")) - 1
        i = min(max(i, 0), ts.size - 2)
        return (self.samples[i + 1] - self.samples[i]) / (ts[i + 1] - ts[i])

    def to_dict(self) -> dict:
        if self.kind is DatumKind.CONSTANT_PER_AGENT:
            return {"kind": self.kind.value, "vectors": self.values.tolist()}
        return {
            "kind": self.kind.value,
            "times": self.times.tolist(),
            "values": self.samples.tolist(),
        }


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Snapshot of the communication weights with a row-sum contract."""

    entries: np.ndarray
    row_sum_contract: RowSumContract
    tol: float = field(default=ROW_SUM_TOL, repr=False)

    def __post_init__(self):
        w = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", w)
        n = w.shape[0]
        if w.ndim != 2 or w.shape[1] != n:
            raise InvalidConfig("weight matrix must be square")
        if np.any(np.abs(np.diagonal(w)) > 0.0):
            raise InvalidConfig("weight matrix diagonal must be zero")
        if np.any(w < -self.tol):
            raise InvalidConfig("weight matrix entries must be nonnegative")
        sums = w.sum(axis=1)
        if self.row_sum_contract is RowSumContract.EXACTLY_ONE:
            if np.any(np.abs(sums - 1.0) > self.tol):
                raise InvalidConfig(f"row sums must equal 1 within {self.tol:g}")
        else:
            if np.any(sums > 1.0 + self.tol):
                raise InvalidConfig(f"row sums must be <= 1 within {self.tol:g}")

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


def weights_from_states(
    config: SystemConfig, x_now: np.ndarray | None, x_delayed: np.ndarray
) -> np.ndarray:
    """Raw (N, N) weight entries from explicit states.

    Transmission compares x_delayed[j] to x_now[i]; reaction compares
    x_delayed[j] to x_delayed[i].  The diagonal is zero.
    """
    x_delayed = np.asarray(x_delayed, dtype=float)
    if config.delay_kind is DelayKind.TRANSMISSION:
        base = np.asarray(x_now, dtype=float)
    else:
        base = x_delayed
    diff = x_delayed[None, :, :] - base[:, None, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    vals = np.asarray(config.influence(dist), dtype=float)
    np.fill_diagonal(vals, 0.0)
    if config.weight_scheme is WeightScheme.CLASSICAL_SCALED:
        return vals / (config.n_agents - 1)
    return vals / vals.sum(axis=1, keepdims=True)


def eval_weights(config: SystemConfig, history, t: float) -> WeightMatrix:
    """Communication weights at time t, with delayed states read from history.

    The history must cover [t - tau, t]; for transmission-type delay the
    current state enters the weight arguments as well.
    """
    x_delayed = _history_sample(history, t - config.tau)
    x_now = None
    if config.delay_kind is DelayKind.TRANSMISSION:
        x_now = _history_sample(history, t)
    entries = weights_from_states(config, x_now, x_delayed)
    contract = (
        RowSumContract.EXACTLY_ONE
        if config.weight_scheme is WeightScheme.NORMALIZED
        else RowSumContract.AT_MOST_ONE
    )
    return WeightMatrix(entries, contract)


def _history_sample(history, t: float) -> np.ndarray:
    try:
        return history.sample(t)
    except OutOfRange as exc:
        raise HistoryUnderflow(str(exc)) from exc


@dataclass(frozen=True)
class IcassReport:
    """Startup-interval regularity check: slopes against the initial diameter."""

    satisfied: bool
    max_slope: float
    d_x0: float

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "max_slope": self.max_slope,
            "d_x0": self.d_x0,
        }


def _state_diameter(state: np.ndarray) -> float:
    diff = state[None, :, :] - state[:, None, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).max())


def check_icass(datum: InitialDatum, config: SystemConfig) -> IcassReport:
    """Check that startup slopes do not exceed the startup diameter.

    d_x0 is the maximum group diameter over the startup interval; the slope
    bound is the essential sup of per-agent derivative norms (attained on
    grid segments for piecewise-linear data, zero for constant data).
    """
    datum.require_coverage(config.tau)
    if datum.kind is DatumKind.CONSTANT_PER_AGENT:
        d_x0 = _state_diameter(datum.values)
        return IcassReport(satisfied=True, max_slope=0.0, d_x0=d_x0)
    mask = (datum.times >= -config.tau - 1e-9) & (datum.times <= 1e-9)
    idx = np.where(mask)[0]
    if idx.size == 0:
        raise InvalidDatum("sampled datum has no grid points in the startup span")
    d_x0 = max(_state_diameter(datum.samples[i]) for i in idx)
    seg = idx[:-1] if idx.size > 1 else idx[:0]
    max_slope = 0.0
    for i in seg:
        dt = datum.times[i + 1] - datum.times[i]
        step = (datum.samples[i + 1] - datum.samples[i]) / dt
        max_slope = max(max_slope, float(np.sqrt((step * step).sum(axis=1)).max()))
    return IcassReport(satisfied=max_slope <= d_x0, max_slope=max_slope, d_x0=d_x0)


# ---------------------------------------------------------------------------
# JSON codecs (field names mirror the dataclass fields)

def influence_from_dict(d: dict) -> InfluenceFunction:
    kind = d.get("kind")
    if kind == InfluenceKind.CONSTANT.value:
        return InfluenceFunction.constant(d.get("c", 1.0))
    if kind == InfluenceKind.ALGEBRAIC_DECAY.value:
        return InfluenceFunction.algebraic_decay(d.get("gamma", 1.0))
    if kind == InfluenceKind.TABLE.value:
        return InfluenceFunction.table(d["samples"])
    raise InvalidConfig(f"influence.kind: unknown value {kind!r}")


def config_from_dict(d: dict) -> SystemConfig:
    try:
        return SystemConfig(
            n_agents=d["n_agents"],
            dim=d["dim"],
            tau=d["tau"],
            delay_kind=DelayKind(d["delay_kind"]),
            weight_scheme=WeightScheme(d["weight_scheme"]),
            influence=influence_from_dict(d["influence"]),
        )
    except KeyError as exc:
        raise InvalidConfig(f"config.{exc.args[0]}: missing field") from exc
    except ValueError as exc:
        raise InvalidConfig(f"config: {exc}") from exc


def datum_from_dict(d: dict) -> InitialDatum:
    kind = d.get("kind")
    if kind == DatumKind.CONSTANT_PER_AGENT.value:
        return InitialDatum.constant(d["vectors"])
    if kind == DatumKind.SAMPLED.value:
        return InitialDatum.sampled(d["times"], d["values"])
    raise InvalidDatum(f"datum.kind: unknown value {kind!r}")
