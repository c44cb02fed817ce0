"""Discrete stochastic-approximation recursion, bounded noise and the urn process.

The canonical recursion is

    X_{n+1} = X_n + f(X_n)/n^gamma + Y_{n+1}/n^gamma,   gamma in (1/2, 1),

with Y a martingale difference, |Y| <= M almost surely and conditional
variance at least l.  The urn process

    X_{n+1} = (n X_n + 1)/(n + 1)  w.p. f(X_n),  else  n X_n/(n + 1)

is the same recursion in disguise: the step splits into the drift
A_n = (f(X_n) - X_n)/(n+1) and the centered noise g_n/(n+1) where
g_n = 1 - f(X_n) on an add-red step and -f(X_n) otherwise.

The discrete mean-flow normalization is h(n) = -n^{(1-gamma)/(1-k)} with
Z_n = -X_n/h(n); the step-size correction

    a_n = (1/h(n+1) - 1/h(n)) * (k-1)/(1-gamma) * h(n+1) * n^gamma / |h(n)|^{k-1}

uses the exact finite difference of 1/h (no mean-value point to choose)
and tends to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DriftSpec, MeanFlowFrame, drift_eval, mean_flow_h
from .rng import NOISE_CHUNK, TRIAL_CAP, chunk_ranges, make_rng

__all__ = [
    "NoiseSpec",
    "DiscreteTrajectory",
    "UrnSpec",
    "UrnRun",
    "UrnSgdReport",
    "simulate_sgd",
    "sgd_batch",
    "SgdBatchStats",
    "simulate_urn",
    "urn_final_batch",
    "urn_as_sgd_check",
    "z_diagnostics",
    "step_correction",
]

RADEMACHER = "rademacher"
UNIFORM_CENTERED = "uniform_centered"
URN_INDUCED = "urn_induced"


@dataclass(frozen=True)
class NoiseSpec:
    """Bounded martingale-difference noise: |Y| <= M a.s., E[Y|past] = 0.

    rademacher takes values +-M with equal probability (variance floor M^2,
    the extremal case); uniform_centered is uniform on [-M, M] (floor
    M^2/3).  urn_induced denotes the state-dependent g_n realized inside
    the urn simulation; it cannot be sampled i.i.d. here.
    """

    family: str
    M: float = 1.0

    def __post_init__(self):
        if self.family not in (RADEMACHER, UNIFORM_CENTERED, URN_INDUCED):
            raise ValueError(f"unknown noise family {self.family!r}")
        if not self.M > 0:
            raise ValueError("noise bound M must be positive")

    @property
    def variance_floor(self) -> float:
        if self.family == RADEMACHER:
            return self.M ** 2
        if self.family == UNIFORM_CENTERED:
            return self.M ** 2 / 3.0
        raise ValueError("urn-induced noise floor depends on the feedback f")

    def sample_chunk(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == RADEMACHER:
            return (2.0 * rng.integers(0, 2, size=size) - 1.0) * self.M
        if self.family == UNIFORM_CENTERED:
            return rng.uniform(-self.M, self.M, size=size)
        raise ValueError("urn-induced noise is realized by simulate_urn")


@dataclass(eq=False)
class DiscreteTrajectory:
    """States X_{n0..n_end} of the discrete recursion plus the seed."""

    n0: int
    values: np.ndarray
    seed: int

    @property
    def n_end(self) -> int:
        return self.n0 + len(self.values) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n0, self.n0 + len(self.values), dtype=float)


def _effective_drift(drift: DriftSpec, x, shrink_exponent: float | None):
    """f(x), optionally shrunk to min(f(x), |x|^p) for the '<=' recursion form."""
    f = drift_eval(drift, x)
    if shrink_exponent is None:
        return f
    return np.minimum(f, np.abs(x) ** shrink_exponent)


def simulate_sgd(drift: DriftSpec, gamma: float, noise: NoiseSpec | None,
                 x0: float, n0: int, n_end: int, seed: int,
                 shrink_exponent: float | None = None) -> DiscreteTrajectory:
    """Run X_{n+1} = X_n + f(X_n)/n^gamma + Y_{n+1}/n^gamma for n = n0..n_end-1.

    noise=None runs the noise-free recursion.  shrink_exponent p replaces
    the drift by min(f(x), |x|^p), the substitution used to realize the
    '<=' form of the recursion.
    """
    if not 0.5 < gamma < 1.0:
        raise ValueError("discrete recursion requires gamma in (1/2, 1)")
    if not (n0 >= 1 and n_end > n0):
        raise ValueError("need n0 >= 1 and n_end > n0")
    steps = n_end - n0
    values = np.empty(steps + 1)
    x = float(x0)
    values[0] = x
    rng = make_rng(seed) if noise is not None else None
    pos = 0
    for a, b in chunk_ranges(steps):
        width = b - a
        ns = np.arange(n0 + a, n0 + b, dtype=float)
        inv_ng = ns ** (-gamma)
        y = (noise.sample_chunk(rng, width) if noise is not None
             else np.zeros(width))
        for i in range(width):
            step = inv_ng[i]
            fx = float(_effective_drift(drift, x, shrink_exponent))
            # same association as the batched update: x + (f*step + y*step)
            x = x + (fx * step + y[i] * step)
            pos += 1
            values[pos] = x
        if not math.isfinite(x):
            bad = int(np.flatnonzero(~np.isfinite(values[:pos + 1]))[0])
            raise RuntimeError(f"non-finite state at index n = {n0 + bad}")
    return DiscreteTrajectory(n0=n0, values=values, seed=int(seed))


@dataclass(eq=False)
class SgdBatchStats:
    seeds: np.ndarray
    final: np.ndarray
    max_value: np.ndarray
    tail_abs_max: np.ndarray
    tail_from: int


def sgd_batch(drift: DriftSpec, gamma: float, noise: NoiseSpec, x0: float,
              n0: int, n_end: int, seeds,
              tail_from: int | None = None,
              shrink_exponent: float | None = None) -> SgdBatchStats:
    """One recursion per seed, stepped together; per-seed streams match
    simulate_sgd exactly (same chunked consumption)."""
    if not 0.5 < gamma < 1.0:
        raise ValueError("discrete recursion requires gamma in (1/2, 1)")
    seeds = np.asarray(list(seeds), dtype=np.uint64)
    if len(seeds) > TRIAL_CAP:
        parts = [sgd_batch(drift, gamma, noise, x0, n0, n_end,
                           seeds[a:a + TRIAL_CAP], tail_from, shrink_exponent)
                 for a in range(0, len(seeds), TRIAL_CAP)]
        return SgdBatchStats(
            seeds=seeds,
            final=np.concatenate([p.final for p in parts]),
            max_value=np.concatenate([p.max_value for p in parts]),
            tail_abs_max=np.concatenate([p.tail_abs_max for p in parts]),
            tail_from=parts[0].tail_from)
    n_trials = len(seeds)
    steps = n_end - n0
    if tail_from is None:
        tail_from = n0
    rngs = [make_rng(s) for s in seeds]
    x = np.full(n_trials, float(x0))
    max_value = x.copy()
    tail_abs = np.abs(x) if n0 >= tail_from else np.zeros(n_trials)
    tail_abs = tail_abs.copy()
    y = np.empty((n_trials, min(steps, NOISE_CHUNK)))
    for a, b in chunk_ranges(steps):
        width = b - a
        block = y[:, :width]
        for j, rng in enumerate(rngs):
            block[j] = noise.sample_chunk(rng, width)
        ns = np.arange(n0 + a, n0 + b, dtype=float)
        inv_ng = ns ** (-gamma)
        for i in range(width):
            step = inv_ng[i]
            x += _effective_drift(drift, x, shrink_exponent) * step + block[:, i] * step
            np.maximum(max_value, x, out=max_value)
            if n0 + a + i + 1 >= tail_from:
                np.maximum(tail_abs, np.abs(x), out=tail_abs)
        if not np.all(np.isfinite(x)):
            raise RuntimeError(f"non-finite state before index n = {n0 + b}")
    return SgdBatchStats(seeds=seeds, final=x, max_value=max_value,
                         tail_abs_max=tail_abs, tail_from=int(tail_from))


@dataclass(frozen=True)
class UrnSpec:
    """Urn feedback f on [0,1] plus the starting ball counts.

    f_kind is one of "constant" (f = value), "identity" (f(x) = x),
    "power" (f(x) = x^value) or "table" (piecewise-linear through `table`
    on a uniform grid over [0,1]).
    """

    f_kind: str
    value: float = 0.5
    table: tuple = ()
    red0: int = 1
    total0: int = 2

    def __post_init__(self):
        if self.f_kind not in ("constant", "identity", "power", "table"):
            raise ValueError(f"unknown urn feedback {self.f_kind!r}")
        if self.f_kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ValueError("constant feedback must lie in [0, 1]")
        if self.f_kind == "power" and not self.value > 0:
            raise ValueError("power feedback needs a positive exponent")
        if self.f_kind == "table":
            tab = np.asarray(self.table, dtype=float)
            if len(tab) < 2 or np.any(tab < 0) or np.any(tab > 1):
                raise ValueError("table feedback needs >= 2 values in [0, 1]")
        if not (0 < self.red0 < self.total0):
            raise ValueError("need 0 < red0 < total0 so X stays inside (0, 1)")

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.f_kind == "constant":
            out = np.full_like(x, self.value)
        elif self.f_kind == "identity":
            out = x
        elif self.f_kind == "power":
            out = x ** self.value
        else:
            grid = np.linspace(0.0, 1.0, len(self.table))
            out = np.interp(x, grid, np.asarray(self.table, dtype=float))
        return out if out.ndim else float(out)


@dataclass(eq=False)
class UrnRun:
    """Urn trajectory with its stochastic-approximation decomposition.

    values[j] = X_n at n = total0 + j (ratio of exact integer counts);
    drift_part[j] = (f(X_n) - X_n)/(n+1) and noise_part[j] = g_n/(n+1)
    so that X_{n+1} - X_n = drift_part[j] + noise_part[j] exactly in real
    arithmetic.
    """

    spec: UrnSpec
    trajectory: DiscreteTrajectory
    drift_part: np.ndarray
    noise_part: np.ndarray


def simulate_urn(spec: UrnSpec, n_end: int, seed: int) -> UrnRun:
    """Exact urn dynamics on integer ball counts, deterministic in seed."""
    n0 = spec.total0
    if not n_end > n0:
        raise ValueError("n_end must exceed the starting ball count")
    steps = n_end - n0
    values = np.empty(steps + 1)
    drift_part = np.empty(steps)
    noise_part = np.empty(steps)
    red = spec.red0
    total = spec.total0
    values[0] = red / total
    rng = make_rng(seed)
    pos = 0
    for a, b in chunk_ranges(steps):
        u = rng.random(b - a)
        for i in range(b - a):
            x = red / total
            fx = float(spec.f(x))
            add_red = u[i] < fx
            g = (1.0 - fx) if add_red else -fx
            drift_part[pos] = (fx - x) / (total + 1)
            noise_part[pos] = g / (total + 1)
            if add_red:
                red += 1
            total += 1
            pos += 1
            values[pos] = red / total
    traj = DiscreteTrajectory(n0=n0, values=values, seed=int(seed))
    return UrnRun(spec=spec, trajectory=traj,
                  drift_part=drift_part, noise_part=noise_part)


def urn_final_batch(spec: UrnSpec, n_end: int, seeds) -> np.ndarray:
    """Final urn fractions for many seeds; streams match simulate_urn."""
    seeds = np.asarray(list(seeds), dtype=np.uint64)
    if len(seeds) > TRIAL_CAP:
        return np.concatenate(
            [urn_final_batch(spec, n_end, seeds[a:a + TRIAL_CAP])
             for a in range(0, len(seeds), TRIAL_CAP)])
    n_trials = len(seeds)
    rngs = [make_rng(s) for s in seeds]
    red = np.full(n_trials, float(spec.red0))
    total = float(spec.total0)
    steps = n_end - spec.total0
    u = np.empty((n_trials, min(steps, NOISE_CHUNK)))
    for a, b in chunk_ranges(steps):
        width = b - a
        block = u[:, :width]
        for j, rng in enumerate(rngs):
            block[j] = rng.random(width)
        for i in range(width):
            x = red / total
            red += (block[:, i] < spec.f(x)).astype(float)
            total += 1.0
    return red / total


@dataclass(eq=False)
class UrnSgdReport:
    """Pathwise comparison of the urn against its drift+noise decomposition."""

    n_steps: int
    max_abs_gap: float
    first_divergence: int | None
    tolerance: float

    @property
    def pathwise_equal(self) -> bool:
        return self.first_divergence is None


def urn_as_sgd_check(spec: UrnSpec, n_end: int, seed: int,
                     tolerance: float = 1e-12) -> UrnSgdReport:
    """Re-run the urn's uniform draws through the generic recursion
    X' += (f(X') - X')/(n+1) + g_n/(n+1) and compare pathwise."""
    n0 = spec.total0
    steps = n_end - n0
    rng = make_rng(seed)
    red = spec.red0
    total = spec.total0
    x_dec = red / total
    max_gap = 0.0
    first_div = None
    pos = 0
    for a, b in chunk_ranges(steps):
        u = rng.random(b - a)
        for i in range(b - a):
            x_urn = red / total
            fx_dec = float(spec.f(x_dec))
            add_red = u[i] < fx_dec
            g = (1.0 - fx_dec) if add_red else -fx_dec
            x_dec = x_dec + (fx_dec - x_dec) / (total + 1) + g / (total + 1)
            if add_red:
                red += 1
            total += 1
            pos += 1
            gap = abs(red / total - x_dec)
            if gap > max_gap:
                max_gap = gap
            if first_div is None and gap > tolerance:
                first_div = n0 + pos
    return UrnSgdReport(n_steps=steps, max_abs_gap=max_gap,
                        first_divergence=first_div, tolerance=tolerance)


def step_correction(frame: MeanFlowFrame, n) -> np.ndarray:
    """a_n from the exact finite difference of 1/h; tends to 1.

    a_n = (1/h(n+1) - 1/h(n)) * (k-1)/(1-gamma) * h(n+1) * n^gamma / |h(n)|^{k-1}
    """
    if frame.variant != "discrete":
        raise ValueError("step correction lives in the discrete frame")
    n = np.asarray(n, dtype=float)
    h_n = mean_flow_h(frame, n)
    h_n1 = mean_flow_h(frame, n + 1.0)
    out = ((1.0 / h_n1 - 1.0 / h_n) * (frame.k - 1.0) / (1.0 - frame.gamma)
           * h_n1 * n ** frame.gamma / np.abs(h_n) ** (frame.k - 1.0))
    return float(out) if out.ndim == 0 else out


def z_diagnostics(traj: DiscreteTrajectory, frame: MeanFlowFrame):
    """Z_n = -X_n/h(n) for n0..n_end and a_n for n0..n_end-1."""
    n = traj.times
    z = -traj.values / mean_flow_h(frame, n)
    a = step_correction(frame, n[:-1])
    return z, np.asarray(a)
