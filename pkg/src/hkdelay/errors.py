"""Exception types shared across the package."""


class HKDelayError(Exception):
    """Base class for all package errors."""


class InvalidConfig(HKDelayError, ValueError):
    """System or integrator configuration violates an invariant."""


class InvalidDatum(HKDelayError, ValueError):
    """Initial datum is empty, non-increasing in time, or non-finite."""


class HistoryUnderflow(HKDelayError):
    """A delayed lookup requires history that is not available."""


class OutOfRange(HKDelayError):
    """A sample time lies outside the stored trajectory span."""


class NonFinite(HKDelayError):
    """Integration produced NaN/Inf or exceeded the blow-up threshold.

    Carries the blow-up time and the partial trajectory computed so far.
    """

    def __init__(self, time, trajectory=None):
        super().__init__(f"state became non-finite at t={time:.6g}")
        self.time = time
        self.trajectory = trajectory


class InvalidProblem(HKDelayError, ValueError):
    """Rate problem violates 0 < alpha < beta or tau > 0."""


class PreconditionViolated(HKDelayError):
    """A theorem's smallness condition fails for the given parameters."""


class InvalidInterval(HKDelayError, ValueError):
    """Interval bounds must satisfy 0 < m <= M."""


class InvalidWeights(HKDelayError, ValueError):
    """Convex-combination weights are negative, do not sum to one, or the
    claimed lower bound exceeds an actual weight."""


class NonPositiveSeries(HKDelayError, ValueError):
    """Decay-rate fitting needs a strictly positive series on the window."""


class NoRootFound(HKDelayError):
    """Characteristic-root search did not converge from any start point."""


class SpecError(HKDelayError, ValueError):
    """Experiment spec file is malformed; message names the offending field."""
