"""Drift families, noise schedules, time changes and mean-flow coordinates.

The one-dimensional dynamics studied here are
    dL_t = f(L_t)/t^gamma dt + 1/t^gamma dB_t,   gamma in (1/2, 1],
with f(0) = 0 and f > 0 away from 0.  Two drift families cover the
interesting local behavior at the origin:

    linear    f(x) = k*|x|            (k > 0)
    monomial  f(x) = c*min(|x|,M)^k   (k > 1, capped at M to prevent blow-up)

Time changes make the drift autonomous:
    gamma = 1       t -> e^t,   noise becomes e^{-t/2} dB_t
    gamma in (.5,1) t -> t^{1/(1-gamma)}, noise becomes t^{-gamma/(2(1-gamma))} dB_t

The dichotomy threshold is gamma_tilde(k) = 1/2 + 1/(2k): for gamma at or
below it the process escapes the origin almost surely, strictly above it
converges to the origin with positive probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DriftSpec",
    "NoiseSchedule",
    "ProcessSpec",
    "MeanFlowFrame",
    "drift_eval",
    "time_change_power",
    "time_change_power_inverse",
    "time_change_exp",
    "time_change_exp_inverse",
    "mean_flow_h",
    "z_coordinate",
    "gamma_threshold",
]

LINEAR = "linear"
MONOMIAL = "monomial"

POWER_GAMMA = "power_gamma"          # g(t) = t^-gamma, raw clock
EXP_HALF = "exp_half"                # g(t) = e^{-t/2}, exponential clock
POWER_TRANSFORMED = "power_transformed"  # g(t) = t^{-gamma/(2(1-gamma))}, power clock

CONTINUOUS_H = "continuous"          # h(t) = -t^{1/(1-k)}
DISCRETE_H = "discrete"              # h(n) = -n^{(1-gamma)/(1-k)}


@dataclass(frozen=True)
class DriftSpec:
    """Drift f for one of the two families; always >= 0 and f(0) = 0.

    The monomial drift is frozen at its value at |x| = cap so that the
    simulated SDE cannot explode in finite time; linear drifts stay
    uncapped (escape is caught by the classifier barrier first).
    """

    family: str
    k: float
    c: float = 1.0
    cap: float = 10.0

    def __post_init__(self):
        if self.family not in (LINEAR, MONOMIAL):
            raise ValueError(f"unknown drift family {self.family!r}")
        if self.family == LINEAR and not self.k > 0:
            raise ValueError("linear drift requires k > 0")
        if self.family == MONOMIAL:
            if not self.k > 1:
                raise ValueError("monomial drift requires k > 1")
            if not self.c > 0:
                raise ValueError("monomial drift requires c > 0")
            if not self.cap > 0:
                raise ValueError("monomial drift requires cap > 0")

    def slope_bound(self, x_max: float) -> float:
        """Lipschitz bound of f on {|x| <= x_max} (monomial slope stops at cap)."""
        if self.family == LINEAR:
            return self.k
        reach = min(abs(x_max), self.cap)
        return self.c * self.k * reach ** (self.k - 1.0)


def drift_eval(spec: DriftSpec, x):
    """Evaluate f at x (scalar or ndarray); even in x and nonnegative."""
    ax = np.abs(x)
    if spec.family == LINEAR:
        return spec.k * ax
    return spec.c * np.minimum(ax, spec.cap) ** spec.k


@dataclass(frozen=True)
class NoiseSchedule:
    """Deterministic noise amplitude g(t) > 0, strictly decreasing for t >= 1.

    power_gamma runs on the raw clock, so the drift carries the same
    t^-gamma weight; the two transformed schedules have drift weight 1.
    """

    kind: str
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in (POWER_GAMMA, EXP_HALF, POWER_TRANSFORMED):
            raise ValueError(f"unknown noise schedule {self.kind!r}")
        if not 0.5 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (1/2, 1]")
        if self.kind == POWER_TRANSFORMED and self.gamma >= 1.0:
            raise ValueError("power_transformed requires gamma < 1 "
                             "(gamma = 1 uses the exponential clock)")

    def g(self, t):
        import numpy as np

        if self.kind == POWER_GAMMA:
            return np.asarray(t, dtype=float) ** (-self.gamma)
        if self.kind == EXP_HALF:
            return np.exp(-0.5 * np.asarray(t, dtype=float))
        expo = -self.gamma / (2.0 * (1.0 - self.gamma))
        return np.asarray(t, dtype=float) ** expo

    def drift_weight(self, t):
        import numpy as np

        if self.kind == POWER_GAMMA:
            return np.asarray(t, dtype=float) ** (-self.gamma)
        return np.ones_like(np.asarray(t, dtype=float))

    @property
    def min_t0(self) -> float:
        # power clocks are singular at 0; the exponential clock starts at 0
        return 0.0 if self.kind == EXP_HALF else 1.0

    @property
    def frame(self) -> str:
        if self.kind == POWER_GAMMA:
            return "raw"
        if self.kind == EXP_HALF:
            return "transformed-exp"
        return "transformed-power"


@dataclass(frozen=True)
class ProcessSpec:
    """One SDE instance: drift family, noise schedule, start time and state."""

    drift: DriftSpec
    noise: NoiseSchedule
    t0: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if self.t0 < self.noise.min_t0:
            raise ValueError(
                f"t0 = {self.t0} below {self.noise.min_t0} required by "
                f"schedule {self.noise.kind!r}")


@dataclass(frozen=True)
class MeanFlowFrame:
    """Mean-flow normalization h and the Z = -X/h coordinate.

    continuous: h(t) = -t^{1/(1-k)}   solves h' = |h|^k/(k-1)
    discrete:   h(n) = -n^{(1-gamma)/(1-k)}
    Both are negative and increase to 0, so Z keeps the sign of X.
    """

    variant: str
    k: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.variant not in (CONTINUOUS_H, DISCRETE_H):
            raise ValueError(f"unknown mean-flow variant {self.variant!r}")
        if not self.k > 1:
            raise ValueError("mean flow requires k > 1")
        if self.variant == DISCRETE_H and not 0.5 < self.gamma < 1.0:
            raise ValueError("discrete mean flow requires gamma in (1/2, 1)")

    @property
    def exponent(self) -> float:
        if self.variant == CONTINUOUS_H:
            return 1.0 / (1.0 - self.k)
        return (1.0 - self.gamma) / (1.0 - self.k)


def mean_flow_h(frame: MeanFlowFrame, t):
    """h evaluated at t >= 1; strictly negative, increasing to 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 1.0):
        raise ValueError("mean flow is defined for t >= 1")
    out = -(t ** frame.exponent)
    return float(out) if out.ndim == 0 else out


def z_coordinate(x, frame: MeanFlowFrame, t):
    """Z = -x/h(t); same sign as x because h < 0."""
    return -x / mean_flow_h(frame, t)


def time_change_power(t, gamma: float):
    """Power clock t -> t^{1/(1-gamma)}, a strictly increasing bijection of [1, inf)."""
    if not 0.5 < gamma < 1.0:
        raise ValueError("power time change requires gamma in (1/2, 1); "
                         "gamma = 1 uses the exponential change")
    t = np.asarray(t, dtype=float)
    if np.any(t < 1.0):
        raise ValueError("power time change is defined for t >= 1")
    out = t ** (1.0 / (1.0 - gamma))
    return float(out) if out.ndim == 0 else out


def time_change_power_inverse(t, gamma: float):
    if not 0.5 < gamma < 1.0:
        raise ValueError("power time change requires gamma in (1/2, 1)")
    t = np.asarray(t, dtype=float)
    out = t ** (1.0 - gamma)
    return float(out) if out.ndim == 0 else out


def time_change_exp(t):
    """Exponential clock t -> e^t for the gamma = 1 regime."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("exponential time change is defined for t >= 0")
    out = np.exp(t)
    return float(out) if out.ndim == 0 else out


def time_change_exp_inverse(t):
    t = np.asarray(t, dtype=float)
    out = np.log(t)
    return float(out) if out.ndim == 0 else out


def gamma_threshold(k: float) -> float:
    """Dichotomy threshold 1/2 + 1/(2k); strictly decreasing on [1, inf)."""
    if k < 1.0:
        raise ValueError("threshold is defined for k >= 1")
    return 0.5 + 0.5 / k


def gamma_in_nonconvergent_region(k: float, gamma: float, discrete: bool = False) -> bool:
    """Regime prediction: escape is almost sure at or below the threshold.

    The continuous statements cover equality (gamma <= threshold escapes);
    the discrete ones are strict, so equality is left to the convergent side
    there.  Cells near equality should be treated as boundary cases anyway.
    """
    tilde = gamma_threshold(k)
    if discrete:
        return gamma < tilde
    return gamma <= tilde


def exp_decay_remaining_std(k: float, s: float) -> float:
    """Std dev of int_s^inf e^{-u(k+1/2)} dB_u, i.e. sqrt(e^{-s(2k+1)}/(2k+1))."""
    return math.sqrt(math.exp(-s * (2.0 * k + 1.0)) / (2.0 * k + 1.0))
