"""Decay-rate equations and proof-side quantities.

Solves the Gronwall-Halanay rate equation beta - C = alpha * K(C) for the
two delay kernels in use (Dirac mass at zero and the uniform density on
[0, tau]), derives the theorem-specific rates from it, evaluates the
interval shrink factor with its window iteration, checks which consensus
theorems apply to a configuration, and verifies the convex-combination
diameter bound on explicit instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    InvalidInterval,
    InvalidProblem,
    InvalidWeights,
    OutOfRange,
    PreconditionViolated,
)
from .model import (
    DelayKind,
    IcassReport,
    InitialDatum,
    SystemConfig,
    WeightScheme,
    check_icass,
    has_symmetric_weights,
    weights_from_states,
)
from .metrics import diameter, radius

RESIDUAL_TOL = 1e-12
BRACKET_TOL = 1e-13
SERIES_CUTOFF = 1e-8


class Measure(str, Enum):
    DIRAC_AT_ZERO = "dirac"
    UNIFORM_ON_DELAY = "uniform"


@dataclass(frozen=True)
class HalanayProblem:
    """Rate equation data: u' <= alpha * (delayed average of u) - beta * u."""

    alpha: float
    beta: float
    tau: float
    measure: Measure = Measure.DIRAC_AT_ZERO

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise InvalidProblem(f"alpha > 0 violated (alpha={self.alpha})")
        if not (self.alpha < self.beta):
            raise InvalidProblem(f"alpha < beta violated (alpha={self.alpha}, beta={self.beta})")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise InvalidProblem(f"tau > 0 violated (tau={self.tau})")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "tau": self.tau,
            "measure": self.measure.value,
        }


@dataclass(frozen=True)
class RateResult:
    C: float
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        return {"C": self.C, "residual": self.residual, "iterations": self.iterations}


def _kernel(measure: Measure, c: float, tau: float) -> float:
    """K(C) = integral of exp(C(s + tau)) against the delay kernel."""
    x = c * tau
    if measure is Measure.DIRAC_AT_ZERO:
        return math.exp(x)
    if x < SERIES_CUTOFF:
        # (e^x - 1)/x to second order; avoids 0/0 as C -> 0
        return math.exp(x) * (1.0 + 0.5 * x + x * x / 6.0)
    return math.exp(x) * math.expm1(x) / x


def _kernel_dc(measure: Measure, c: float, tau: float) -> float:
    x = c * tau
    if measure is Measure.DIRAC_AT_ZERO:
        return tau * math.exp(x)
    if x < SERIES_CUTOFF:
        # d/dx of (e^{2x} - e^x)/x via its series
        return tau * (1.5 + (7.0 / 3.0) * x + (15.0 / 8.0) * x * x)
    return tau * ((2.0 * math.exp(2.0 * x) - math.exp(x)) / x
                  - (math.exp(2.0 * x) - math.exp(x)) / (x * x))


def solve_halanay(problem: HalanayProblem) -> RateResult:
    """Unique C in (0, beta - alpha) with beta - C = alpha * K(C).

    The left side decreases and the right side increases without bound, so
    bisection on the bracket is guaranteed; one Newton polish tightens the
    residual below 1e-12.
    """
    a, b, tau, meas = problem.alpha, problem.beta, problem.tau, problem.measure

    def f(c: float) -> float:
        return b - c - a * _kernel(meas, c, tau)

    lo, hi = 0.0, b - a
    iterations = 0
    while hi - lo > BRACKET_TOL:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if iterations > 200:
            break
    c = 0.5 * (lo + hi)
    for _ in range(8):
        fc = f(c)
        if abs(fc) <= 1e-15:
            break
        step = fc / (-1.0 - a * _kernel_dc(meas, c, tau))
        c_new = c - step
        if not (lo <= c_new <= hi):
            c_new = min(max(c_new, lo), hi)
        c = c_new
        iterations += 1
    # keep strictly inside the open interval
    c = min(max(c, 5e-324), (b - a) * (1.0 - 1e-16))
    return RateResult(C=c, residual=f(c), iterations=iterations)


def rate_transmission_normalized(n_agents: int, psi_lower: float, tau: float) -> RateResult:
    """Rate for transmission delay with row-normalized weights.

    Solves 1 - C = (1 - psi_lower (N-2)/(N-1)) e^{C tau}; psi_lower is a
    certified lower bound for the influence values over reachable
    distances.  N = 2 degenerates to alpha = beta and is rejected by the
    solver.
    """
    if not (0.0 < psi_lower <= 1.0):
        raise InvalidProblem(f"psi_lower must be in (0, 1], got {psi_lower}")
    if int(n_agents) != n_agents or n_agents < 2:
        raise InvalidProblem(f"n_agents must be an integer >= 2, got {n_agents}")
    alpha = 1.0 - psi_lower * (n_agents - 2) / (n_agents - 1)
    return solve_halanay(HalanayProblem(alpha, 1.0, tau, Measure.DIRAC_AT_ZERO))


def rate_reaction_nonsymmetric(psi0_lower: float, tau: float) -> RateResult:
    """Rate for reaction delay under the smallness condition 4 tau < psi0.

    Solves psi0 - C = 4 e^{C tau} (e^{C tau} - 1)/C, which is the uniform-
    kernel rate equation with alpha = 4 tau and beta = psi0.
    """
    if not (0.0 < psi0_lower <= 1.0):
        raise InvalidProblem(f"psi0_lower must be in (0, 1], got {psi0_lower}")
    if not (tau > 0.0 and math.isfinite(tau)):
        raise InvalidProblem(f"tau > 0 violated (tau={tau})")
    if 4.0 * tau >= psi0_lower:
        raise PreconditionViolated(
            f"4*tau < psi0_lower violated (4*tau={4.0 * tau:g}, psi0_lower={psi0_lower:g})"
        )
    return solve_halanay(HalanayProblem(4.0 * tau, psi0_lower, tau, Measure.UNIFORM_ON_DELAY))


# ---------------------------------------------------------------------------
# Interval shrink factor and window iteration

@dataclass(frozen=True)
class WindowRecord:
    k: int
    t_lo: float
    t_hi: float
    m: float
    M: float
    D: float
    sigma: float
    gamma: float


@dataclass(frozen=True)
class ShrinkEstimate:
    psi_lower: float
    sigma: float
    gamma: float
    m: float
    M: float
    records: tuple = ()


def shrink_factor(psi_lower: float, tau: float, n_agents: int, m: float, M: float) -> ShrinkEstimate:
    """Explicit per-window contraction factor for a positive 1D group.

    Gamma = (1 - e^{-psi_lower tau/(N-1)})^2 (1 - e^{-sigma}) e^{-6 tau}
            * psi_lower/(N-1),  sigma = min{tau, (M-m)/(2M)}.
    """
    if not (m > 0.0 and m <= M):
        raise InvalidInterval(f"need 0 < m <= M, got m={m}, M={M}")
    if not (0.0 < psi_lower <= 1.0):
        raise InvalidProblem(f"psi_lower must be in (0, 1], got {psi_lower}")
    if not (tau > 0.0 and n_agents >= 2):
        raise InvalidProblem("need tau > 0 and n_agents >= 2")
    sigma = min(tau, (M - m) / (2.0 * M))
    unit = psi_lower / (n_agents - 1)
    gamma = (
        (1.0 - math.exp(-unit * tau)) ** 2
        * (1.0 - math.exp(-sigma))
        * math.exp(-6.0 * tau)
        * unit
    )
    return ShrinkEstimate(psi_lower, sigma, gamma, m, M)


def shrink_iteration(
    trajectory, psi_lower: float, n_windows: int, coordinate: int = 0
) -> ShrinkEstimate:
    """Window bookkeeping for the iterated contraction argument.

    Window k is [(6k - 1) tau, 6k tau]; extrema are read from stored grid
    samples of the chosen coordinate (multi-D handled per coordinate).
    Requires the trajectory to stay strictly positive in that coordinate.
    """
    config = trajectory.config
    tau = config.tau
    if trajectory.t_end + 1e-9 < 6.0 * n_windows * tau:
        raise OutOfRange(
            f"trajectory ends at {trajectory.t_end:g}, "
            f"{n_windows} windows need {6.0 * n_windows * tau:g}"
        )
    g = trajectory.grid
    coord = trajectory.states[:, :, coordinate]
    records = []
    for k in range(n_windows + 1):
        t_lo, t_hi = (6.0 * k - 1.0) * tau, 6.0 * k * tau
        mask = (g >= t_lo - 1e-12 * (1 + abs(t_lo))) & (g <= t_hi + 1e-12 * (1 + abs(t_hi)))
        window = coord[mask]
        m_k = float(window.min())
        M_k = float(window.max())
        est = shrink_factor(psi_lower, tau, config.n_agents, m_k, M_k)
        records.append(WindowRecord(k, t_lo, t_hi, m_k, M_k, M_k - m_k, est.sigma, est.gamma))
    first = records[0]
    return ShrinkEstimate(
        psi_lower, first.sigma, first.gamma, first.m, first.M, tuple(records)
    )


# ---------------------------------------------------------------------------
# Theorem preconditions

@dataclass(frozen=True)
class TheoremCheck:
    name: str
    applies: bool
    reasons: tuple

    def to_dict(self) -> dict:
        return {"applies": self.applies, "reasons": list(self.reasons)}


@dataclass(frozen=True)
class PreconditionReport:
    transmission_classical: TheoremCheck
    transmission_normalized: TheoremCheck
    reaction_symmetric: TheoremCheck
    reaction_small_delay: TheoremCheck
    psi0_lower: float
    icass: IcassReport
    d_x0: float
    r_x0: float

    def checks(self) -> tuple:
        return (
            self.transmission_classical,
            self.transmission_normalized,
            self.reaction_symmetric,
            self.reaction_small_delay,
        )

    def applicable(self) -> tuple:
        return tuple(c.name for c in self.checks() if c.applies)

    def to_dict(self) -> dict:
        return {
            "theorems": {c.name: c.to_dict() for c in self.checks()},
            "psi0_lower": self.psi0_lower,
            "icass": self.icass.to_dict(),
            "d_x0": self.d_x0,
            "r_x0": self.r_x0,
        }


def psi0_lower_bound(config: SystemConfig, datum: InitialDatum) -> float:
    """(N-1) times the smallest off-diagonal weight at t = 0."""
    x0 = datum.at(0.0)
    x_del = datum.at(-config.tau)
    w = weights_from_states(config, x0, x_del)
    off = w[~np.eye(config.n_agents, dtype=bool)]
    return float((config.n_agents - 1) * off.min())


def check_preconditions(config: SystemConfig, datum: InitialDatum) -> PreconditionReport:
    """Which consensus theorems cover this configuration, with reasons."""
    datum.require_coverage(config.tau)
    icass = check_icass(datum, config)
    psi0 = psi0_lower_bound(config, datum)
    startup = _startup_states(config, datum)
    d_x0 = max(diameter(s) for s in startup)
    r_x0 = max(radius(s) for s in startup)
    transmission = config.delay_kind is DelayKind.TRANSMISSION
    reaction = not transmission
    normalized = config.weight_scheme is WeightScheme.NORMALIZED
    symmetric = has_symmetric_weights(config)

    r1: list = [] if transmission else ["delay kind is not transmission"]
    tc = TheoremCheck("transmission_classical", not r1, tuple(r1))

    r2 = list(r1)
    if not normalized:
        r2.append("weights are not row-normalized")
    tn = TheoremCheck("transmission_normalized", not r2, tuple(r2))

    r3: list = [] if reaction else ["delay kind is not reaction"]
    if reaction and not symmetric:
        r3.append("weights are not symmetric")
    if config.tau > 0.5:
        r3.append(f"tau <= 1/2 violated (tau={config.tau:g})")
    rs = TheoremCheck("reaction_symmetric", not r3, tuple(r3))

    r4: list = [] if reaction else ["delay kind is not reaction"]
    if not icass.satisfied:
        r4.append("startup slope bound violated")
    if 4.0 * config.tau >= psi0:
        r4.append(f"4*tau < psi0_lower violated (4*tau={4.0 * config.tau:g}, psi0_lower={psi0:g})")
    rd = TheoremCheck("reaction_small_delay", not r4, tuple(r4))

    return PreconditionReport(tc, tn, rs, rd, psi0, icass, d_x0, r_x0)


def _startup_states(config: SystemConfig, datum: InitialDatum):
    if datum.times is None:
        return [datum.values]
    mask = (datum.times >= -config.tau - 1e-9) & (datum.times <= 1e-9)
    return [datum.samples[i] for i in np.where(mask)[0]]


# ---------------------------------------------------------------------------
# Convex-combination diameter bound

@dataclass(frozen=True)
class ConvexityCheck:
    lhs: float
    rhs: float
    holds: bool


def convexity_bound_check(vectors, eta_i, eta_k, mu: float, i=None, k=None) -> ConvexityCheck:
    """Check |sum_j eta^i_j x_j - sum_j eta^k_j x_j| <= (1 - (N-2) mu) d_x.

    eta_i and eta_k are full length-N weight vectors with a zero self entry
    (at positions i and k, inferred from the zero entries when omitted);
    each must be nonnegative and sum to one, and mu must not exceed any
    weight outside its own self entry.
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = x.shape[0]
    eta_i = np.asarray(eta_i, dtype=float)
    eta_k = np.asarray(eta_k, dtype=float)
    if n < 3:
        raise InvalidWeights(f"need at least 3 vectors, got {n}")
    if eta_i.shape != (n,) or eta_k.shape != (n,):
        raise InvalidWeights("weight vectors must have one entry per vector")
    if np.any(eta_i < -1e-15) or np.any(eta_k < -1e-15):
        raise InvalidWeights("weights must be nonnegative")
    if abs(eta_i.sum() - 1.0) > 1e-9 or abs(eta_k.sum() - 1.0) > 1e-9:
        raise InvalidWeights("weights must sum to one")
    i = int(np.argmin(eta_i)) if i is None else int(i)
    k = int(np.argmin(eta_k)) if k is None else int(k)
    if i == k:
        raise InvalidWeights("the two excluded indices must differ")
    if eta_i[i] > 1e-15 or eta_k[k] > 1e-15:
        raise InvalidWeights("self entries must be zero")
    if mu < 0.0:
        raise InvalidWeights(f"mu must be nonnegative, got {mu}")
    floor = min(
        float(np.delete(eta_i, i).min()),
        float(np.delete(eta_k, k).min()),
    )
    if mu > floor + 1e-12:
        raise InvalidWeights(f"mu={mu:g} exceeds the smallest relevant weight {floor:g}")
    lhs = float(np.linalg.norm(eta_i @ x - eta_k @ x))
    rhs = (1.0 - (n - 2) * mu) * diameter(x)
    return ConvexityCheck(lhs, rhs, lhs <= rhs + 1e-12)


# ---------------------------------------------------------------------------
# Sharpness check: simulate the equality-case scalar delay equation

def simulate_equality_case(
    alpha, beta, tau: float, horizon_delays: int = 10, steps_per_delay: int = 64
):
    """Integrate u' = alpha u(t - tau) - beta u from constant history u = 1.

    alpha and beta broadcast, so a whole parameter grid advances in one
    sweep.  Returns (times, u) with times on [0, horizon] and u of shape
    (n_times,) + broadcast(alpha, beta).  RK4 with cubic Hermite history,
    independent of the transcendental rate solve it is used to check.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    shape = np.broadcast(alpha, beta).shape
    q = int(steps_per_delay)
    h = tau / q
    n = horizon_delays * q
    u = np.empty((n + 1,) + shape)
    f = np.empty_like(u)
    u[0] = 1.0
    f[0] = alpha - beta  # forward derivative at t = 0

    def delayed(j):  # u at node time (j - q) h, exact
        return u[j - q] if j >= q else np.ones(shape)

    def delayed_half(j):  # u at (j - q + 1/2) h
        if j + 1 <= q:
            return np.ones(shape)
        y0, y1 = u[j - q], u[j - q + 1]
        f0, f1 = f[j - q], f[j - q + 1]
        return 0.5 * (y0 + y1) + 0.125 * h * (f0 - f1)

    for m in range(n):
        ud_half = delayed_half(m)
        ud_full = delayed(m + 1)
        k1 = f[m]
        k2 = alpha * ud_half - beta * (u[m] + 0.5 * h * k1)
        k3 = alpha * ud_half - beta * (u[m] + 0.5 * h * k2)
        k4 = alpha * ud_full - beta * (u[m] + h * k3)
        u[m + 1] = u[m] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        f[m + 1] = alpha * ud_full - beta * u[m + 1]
    times = np.arange(n + 1) * h
    return times, u
