"""Diagnostics along trajectories: diameter, radius, mean drift, quadratic
fluctuation, dissipation, Lyapunov functional, and empirical decay fitting.

Conventions: the diameter series is frozen at its startup maximum for
t <= 0; fluctuation and the Lyapunov functional subtract the initial mean
explicitly (it is conserved for symmetric reaction weights).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HistoryUnderflow, NonPositiveSeries
from .model import DelayKind, SystemConfig, has_symmetric_weights, weights_from_states

SIGN_ATOL = 1e-10


def diameter(state: np.ndarray) -> float:
    """Maximum pairwise Euclidean distance of an (N, d) state."""
    state = np.atleast_2d(np.asarray(state, dtype=float))
    diff = state[None, :, :] - state[:, None, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).max())


def radius(state: np.ndarray) -> float:
    """Maximum Euclidean norm over agents."""
    state = np.atleast_2d(np.asarray(state, dtype=float))
    return float(np.sqrt((state * state).sum(axis=1)).max())


def mean(state: np.ndarray) -> np.ndarray:
    """Arithmetic mean over agents, a d-vector."""
    return np.atleast_2d(np.asarray(state, dtype=float)).mean(axis=0)


def fluctuation(state: np.ndarray, mean_ref: np.ndarray) -> float:
    """Quadratic fluctuation around mean_ref: sum |x_i - mean|^2 / (2(N-1))."""
    state = np.atleast_2d(np.asarray(state, dtype=float))
    n = state.shape[0]
    dev = state - np.asarray(mean_ref, dtype=float)[None, :]
    return float((dev * dev).sum() / (2.0 * (n - 1)))


def _dissipation_from_states(config, x_now, x_delayed) -> float:
    w = weights_from_states(config, x_now, x_delayed)
    diff = x_delayed[None, :, :] - x_delayed[:, None, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return float((w * sq).sum() / (2.0 * (config.n_agents - 1)))


def dissipation(config: SystemConfig, trajectory, t: float) -> float:
    """Weighted delayed-disagreement energy at time t."""
    _coverage(trajectory, t - config.tau, t)
    x_delayed = trajectory.sample(t - config.tau)
    x_now = trajectory.sample(t) if config.delay_kind is DelayKind.TRANSMISSION else x_delayed
    return _dissipation_from_states(config, x_now, x_delayed)


def lyapunov(config: SystemConfig, trajectory, t: float, lam: float = 1.0) -> float:
    """Fluctuation plus lam times the double time-integral of dissipation.

    The double integral over {t - tau <= theta <= s <= t} collapses to
    int_{t-tau}^{t} (s - t + tau) D(s) ds, evaluated by composite trapezoid
    on the stored grid (fractional end segments included).
    """
    tau = config.tau
    _coverage(trajectory, t - 2.0 * tau, t)
    mean_ref = mean(trajectory.sample(0.0))
    x_t = fluctuation(trajectory.sample(t), mean_ref)
    g = trajectory.grid
    lo, hi = t - tau, t
    inner = np.where((g > lo + 1e-12) & (g < hi - 1e-12))[0]
    nodes = np.concatenate(([lo], g[inner], [hi]))
    vals = np.array([dissipation(config, trajectory, s) * (s - lo) for s in nodes])
    integral = float(np.sum((nodes[1:] - nodes[:-1]) * (vals[1:] + vals[:-1])) / 2.0)
    return x_t + lam * integral


def _coverage(trajectory, t_lo, t_hi):
    pad = 1e-9 * (1.0 + max(abs(t_lo), abs(t_hi)))
    if t_lo < trajectory.t_start - pad or t_hi > trajectory.t_end + pad:
        raise HistoryUnderflow(
            f"trajectory covers [{trajectory.t_start:.6g}, {trajectory.t_end:.6g}], "
            f"need [{t_lo:.6g}, {t_hi:.6g}]"
        )


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Per-grid-time diagnostic series; undefined entries are NaN."""

    times: np.ndarray
    d_x: np.ndarray
    r_x: np.ndarray
    mean_drift: np.ndarray
    X: np.ndarray
    D: np.ndarray
    L: np.ndarray

    @property
    def d_x0(self) -> float:
        return float(self.d_x[0])

    def to_csv(self, path) -> None:
        cols = [self.d_x, self.r_x, self.mean_drift, self.X, self.D, self.L]
        with open(path, "w", newline="") as fh:
            fh.write("t,d_x,r_x,mean_drift,X,D,L\n")
            for m, t in enumerate(self.times):
                cells = [format(float(t), ".17g")]
                for col in cols:
                    v = col[m]
                    cells.append("" if np.isnan(v) else format(float(v), ".17g"))
                fh.write(",".join(cells) + "\n")


def compute_metrics(
    config: SystemConfig,
    trajectory,
    lam: float = 1.0,
    include_lyapunov: bool | None = None,
) -> MetricSeries:
    """Evaluate all diagnostic series on the trajectory grid.

    The Lyapunov series defaults to on for reaction systems with symmetric
    weights (where its decay is meaningful) and is NaN before t = tau.
    """
    if include_lyapunov is None:
        include_lyapunov = has_symmetric_weights(config)
    g = trajectory.grid
    S = trajectory.states
    n = g.size
    n_agents = config.n_agents
    i0 = int(np.searchsorted(g, -1e-12, side="right"))
    q = i0  # startup nodes 0..i0, with g[i0] == 0

    # chunk the pairwise reduction: the full (n, N, N, d) broadcast is
    # gigabytes at N = 50 over long horizons
    diam_pt = np.empty(n)
    chunk = max(1, int(2_000_000 / max(n_agents * n_agents * config.dim, 1)))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = S[lo:hi, None, :, :] - S[lo:hi, :, None, :]
        pair = np.einsum("tijk,tijk->tij", diff, diff)
        diam_pt[lo:hi] = np.sqrt(pair.max(axis=(1, 2)))
    d0 = float(diam_pt[: i0 + 1].max())
    d_x = diam_pt.copy()
    d_x[: i0 + 1] = d0

    r_x = np.sqrt(np.einsum("tik,tik->ti", S, S)).max(axis=1)
    xbar = S.mean(axis=1)
    drift = np.sqrt(((xbar - xbar[i0]) ** 2).sum(axis=1))
    dev = S - xbar[i0][None, None, :]
    X = np.einsum("tik,tik->t", dev, dev) / (2.0 * (n_agents - 1))

    D = np.full(n, np.nan)
    for m in range(i0, n):
        x_del = S[m - q]
        x_now = S[m] if config.delay_kind is DelayKind.TRANSMISSION else x_del
        D[m] = _dissipation_from_states(config, x_now, x_del)

    L = np.full(n, np.nan)
    if include_lyapunov:
        dt = float(g[1] - g[0])
        # trapezoid of (s - t + tau) D(s) over the q segments ending at m
        wgt = np.arange(q + 1) * dt
        coef = np.ones(q + 1)
        coef[0] = coef[-1] = 0.5
        for m in range(2 * q, n):
            seg = D[m - q : m + 1]
            L[m] = X[m] + lam * dt * float(np.sum(coef * wgt * seg))
    return MetricSeries(g, d_x, r_x, drift, X, D, L)


@dataclass(frozen=True)
class RateFit:
    c_emp: float
    r2: float


def fit_decay_rate(times, series, window) -> RateFit:
    """Least-squares slope of -log(series) against t on [t_a, t_b]."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    t_a, t_b = window
    mask = (times >= t_a) & (times <= t_b)
    if mask.sum() < 2:
        raise NonPositiveSeries("fit window contains fewer than two samples")
    if np.any(series[mask] <= 0.0) or not np.all(np.isfinite(series[mask])):
        raise NonPositiveSeries("series must be strictly positive on the fit window")
    t = times[mask]
    y = -np.log(series[mask])
    t_c = t - t.mean()
    denom = float((t_c * t_c).sum())
    if denom == 0.0:
        return RateFit(0.0, 1.0)
    slope = float((t_c * (y - y.mean())).sum() / denom)
    resid = y - (y.mean() + slope * t_c)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - float((resid * resid).sum()) / ss_tot
    return RateFit(slope, r2)


def count_sign_changes(series, atol: float = SIGN_ATOL) -> int:
    """Strict sign alternations, ignoring entries with |value| < atol."""
    v = np.asarray(series, dtype=float)
    v = v[np.abs(v) >= atol]
    if v.size < 2:
        return 0
    s = np.sign(v)
    return int(np.sum(s[1:] * s[:-1] < 0))


def consensus_time(series: MetricSeries, tol: float):
    """First time from which d_x stays below tol through the horizon end.

    Returns None when the threshold is never sustained.  Times before 0 are
    clamped to 0 (the startup interval is prescribed, not evolved).
    """
    above = np.where(series.d_x >= tol)[0]
    if above.size == 0:
        return 0.0
    last_bad = int(above[-1])
    if last_bad == series.times.size - 1:
        return None
    return max(float(series.times[last_bad + 1]), 0.0)
