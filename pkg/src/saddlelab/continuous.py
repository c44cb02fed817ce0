"""Brownian paths, Euler-Maruyama integration and the exactly solvable linear case.

The linear drift k|x| with exponential-clock noise e^{-t/2} solves in closed
form on each sign branch:

    negative branch (x < 0):  X_t = e^{-kt} (e^{ks} X_s + int_s^t e^{u(k-1/2)} dB_u)
    positive branch (x > 0):  X_t = e^{+kt} (e^{-ks} X_s + int_s^t e^{-u(k+1/2)} dB_u)

so marginals are Gaussian with explicit mean factors and integrated
variances, giving an independent oracle for the EM integrator.  Hitting of
the origin reduces to a constant barrier for the Gaussian martingale
G_t = int_s^t e^{u(k-1/2)} dB_u, which is a Brownian motion run at the clock
tau(t) = <G>_t; crossing probabilities between sample nodes then have the
closed Brownian-bridge form exp(-2 a b / dtau), so the Monte Carlo hitting
frequency is unbiased for the continuous-time event.

Batched Monte Carlo runs and single-trajectory runs share one stepping
kernel and one per-trial stream-consumption pattern, so a trial produces
bit-identical values however the work is partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NoiseSchedule, ProcessSpec, drift_eval
from .rng import NOISE_CHUNK, TRIAL_CAP, chunk_ranges, derive_seed, make_rng

__all__ = [
    "TimeGrid",
    "BrownianPath",
    "Trajectory",
    "NonFiniteStateError",
    "brownian_increments",
    "simulate_em",
    "simulate_coupled",
    "quadratic_variation",
    "simulate_linear_exact",
    "linear_exact_batch",
    "linear_hit_zero_mc",
    "em_batch",
    "coupled_violations_batch",
    "EMBatchStats",
]


class NonFiniteStateError(RuntimeError):
    """EM state became NaN/inf; carries the first bad step index."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite state at step {step_index}; "
                         "check drift cap and step size")
        self.step_index = step_index


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t0, t_end]; a non-commensurate horizon gets a short
    final step and is flagged."""

    t0: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")

    def _n_full(self) -> int:
        return int(math.floor((self.t_end - self.t0) / self.dt + 1e-9))

    @property
    def short_last_step(self) -> bool:
        rem = (self.t_end - self.t0) - self._n_full() * self.dt
        return rem > 1e-9 * self.dt

    @property
    def n_steps(self) -> int:
        return self._n_full() + (1 if self.short_last_step else 0)

    def times(self) -> np.ndarray:
        t = self.t0 + self.dt * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t

    def step_sizes(self) -> np.ndarray:
        return np.diff(self.times())


@dataclass(eq=False)
class BrownianPath:
    """Independent N(0, dt_i) increments along a grid, deterministic in seed."""

    grid: TimeGrid
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.increments) != self.grid.n_steps:
            raise ValueError("increment count does not match grid")

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "BrownianPath":
        """Noise-free path, for ODE-reduction checks."""
        return cls(grid=grid, increments=np.zeros(grid.n_steps), seed=0)


@dataclass(eq=False)
class Trajectory:
    """Sampled states along a time grid plus the seed that produced them.

    frame records which clock the values live in ("raw", "transformed-exp"
    or "transformed-power").  first_zero_crossing is set by the exact linear
    sampler: the branch solution represents the |x|-drift dynamics only up
    to that node, so callers truncate there when that reading is intended.
    """

    times: np.ndarray
    values: np.ndarray
    seed: int
    frame: str
    grid: TimeGrid | None = None
    first_zero_crossing: int | None = None

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")


def _standard_normal_chunk(rng: np.random.Generator, width: int) -> np.ndarray:
    return rng.standard_normal(width)


def brownian_increments(grid: TimeGrid, seed: int) -> BrownianPath:
    """Draw the N(0, dt) increments for a grid, consuming the stream in
    NOISE_CHUNK blocks exactly as the batched runners do."""
    rng = make_rng(seed)
    n = grid.n_steps
    z = np.empty(n)
    for a, b in chunk_ranges(n):
        z[a:b] = _standard_normal_chunk(rng, b - a)
    dw = z * np.sqrt(grid.step_sizes())
    return BrownianPath(grid=grid, increments=dw, seed=int(seed))


def _em_chunk(drift, x, wdt, g, dw, start, trackers):
    """Advance state vector x over one chunk of steps (columns of dw).

    wdt and g are the per-step drift weights w*dt and noise amplitudes for
    the whole grid; dw holds the Brownian increments for this chunk.  The
    single-trajectory and batched runners both step through here, which
    pins down one floating-point evaluation order.
    """
    values, max_value, tail_abs, tail_mask = trackers
    width = dw.shape[1]
    for i in range(width):
        step = start + i
        x += drift_eval(drift, x) * wdt[step] + g[step] * dw[:, i]
        if values is not None:
            values[:, step + 1] = x
        if max_value is not None:
            np.maximum(max_value, x, out=max_value)
            if tail_mask[step + 1]:
                np.maximum(tail_abs, np.abs(x), out=tail_abs)
    return x


def simulate_em(spec: ProcessSpec, grid: TimeGrid, path: BrownianPath) -> Trajectory:
    """Euler-Maruyama: x_{i+1} = x_i + f(x_i) w(t_i) dt_i + g(t_i) dW_i.

    w is the schedule's drift weight (t^-gamma on the raw clock, 1 on the
    transformed clocks).  Raises NonFiniteStateError with the offending
    step index if the state leaves the floating-point range.
    """
    if path.grid != grid:
        raise ValueError("path was drawn on a different grid")
    if grid.t0 < spec.noise.min_t0:
        raise ValueError(f"grid starts before t0 = {spec.noise.min_t0} "
                         f"allowed by schedule {spec.noise.kind!r}")
    t = grid.times()
    dt = grid.step_sizes()
    wdt = np.asarray(spec.noise.drift_weight(t[:-1]), dtype=float) * dt
    g = np.asarray(spec.noise.g(t[:-1]), dtype=float)
    n = len(dt)
    values = np.empty((1, n + 1))
    x = np.array([float(spec.x0)])
    values[:, 0] = x
    trackers = (values, None, None, None)
    for a, b in chunk_ranges(n):
        dw = path.increments[a:b].reshape(1, -1)
        x = _em_chunk(spec.drift, x, wdt, g, dw, a, trackers)
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(values[0, :b + 1]))[0])
            raise NonFiniteStateError(bad)
    return Trajectory(times=t, values=values[0], seed=path.seed,
                      frame=spec.noise.frame, grid=grid)


@dataclass(eq=False)
class EMBatchStats:
    """Per-trial summaries from a batched EM run (memory stays O(trials))."""

    seeds: np.ndarray
    final: np.ndarray
    max_value: np.ndarray
    tail_abs_max: np.ndarray
    tail_start: float
    band_entered: np.ndarray | None = None


def em_batch(spec: ProcessSpec, grid: TimeGrid, seeds,
             tail_start: float | None = None,
             band: tuple[float, float] | None = None) -> EMBatchStats:
    """One EM trajectory per seed, stepped together across trials.

    Each trial consumes its own generator stream exactly as
    brownian_increments + simulate_em would, so per-seed results do not
    depend on how trials are grouped or scheduled.
    """
    seeds = np.asarray(list(seeds), dtype=np.uint64)
    if len(seeds) > TRIAL_CAP:
        parts = [em_batch(spec, grid, seeds[a:a + TRIAL_CAP], tail_start, band)
                 for a in range(0, len(seeds), TRIAL_CAP)]
        return EMBatchStats(
            seeds=seeds,
            final=np.concatenate([p.final for p in parts]),
            max_value=np.concatenate([p.max_value for p in parts]),
            tail_abs_max=np.concatenate([p.tail_abs_max for p in parts]),
            tail_start=parts[0].tail_start,
            band_entered=(None if band is None else
                          np.concatenate([p.band_entered for p in parts])))
    n_trials = len(seeds)
    t = grid.times()
    dt = grid.step_sizes()
    sqdt = np.sqrt(dt)
    wdt = np.asarray(spec.noise.drift_weight(t[:-1]), dtype=float) * dt
    g = np.asarray(spec.noise.g(t[:-1]), dtype=float)
    if tail_start is None:
        tail_start = float(t[0])
    tail_mask = t >= tail_start

    rngs = [make_rng(s) for s in seeds]
    x = np.full(n_trials, float(spec.x0))
    max_value = x.copy()
    tail_abs = np.abs(x) if tail_mask[0] else np.zeros(n_trials)
    tail_abs = tail_abs.copy()
    entered = None
    if band is not None:
        entered = (x > band[0]) & (x < band[1])
    n = len(dt)
    dw = np.empty((n_trials, min(n, NOISE_CHUNK)))
    trackers = (None, max_value, tail_abs, tail_mask)
    for a, b in chunk_ranges(n):
        width = b - a
        block = dw[:, :width]
        for j, rng in enumerate(rngs):
            block[j] = _standard_normal_chunk(rng, width)
        block *= sqdt[a:b]
        if entered is None:
            x = _em_chunk(spec.drift, x, wdt, g, block, a, trackers)
        else:
            for i in range(width):
                step = a + i
                x += drift_eval(spec.drift, x) * wdt[step] + g[step] * block[:, i]
                np.maximum(max_value, x, out=max_value)
                if tail_mask[step + 1]:
                    np.maximum(tail_abs, np.abs(x), out=tail_abs)
                entered |= (x > band[0]) & (x < band[1])
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(b)
    return EMBatchStats(seeds=seeds, final=x, max_value=max_value,
                        tail_abs_max=tail_abs, tail_start=float(tail_start),
                        band_entered=entered)


def simulate_coupled(spec_a: ProcessSpec, spec_b: ProcessSpec,
                     x0_a: float, x0_b: float,
                     grid: TimeGrid, path: BrownianPath) -> tuple[Trajectory, Trajectory]:
    """Two EM trajectories driven by the identical Brownian increments."""
    if spec_a.noise != spec_b.noise:
        raise ValueError("coupled processes must share one noise schedule")
    a = simulate_em(ProcessSpec(spec_a.drift, spec_a.noise, grid.t0, x0_a), grid, path)
    b = simulate_em(ProcessSpec(spec_b.drift, spec_b.noise, grid.t0, x0_b), grid, path)
    return a, b


def coupled_violations_batch(spec_a: ProcessSpec, spec_b: ProcessSpec,
                             x0_a: float, x0_b: float, grid: TimeGrid,
                             seeds) -> np.ndarray:
    """First node index where the A >= B ordering fails, per trial (-1: none)."""
    if spec_a.noise != spec_b.noise:
        raise ValueError("coupled processes must share one noise schedule")
    seeds = np.asarray(list(seeds), dtype=np.uint64)
    if len(seeds) > TRIAL_CAP:
        return np.concatenate(
            [coupled_violations_batch(spec_a, spec_b, x0_a, x0_b, grid,
                                      seeds[a:a + TRIAL_CAP])
             for a in range(0, len(seeds), TRIAL_CAP)])
    n_trials = len(seeds)
    t = grid.times()
    dt = grid.step_sizes()
    sqdt = np.sqrt(dt)
    wdt = np.asarray(spec_a.noise.drift_weight(t[:-1]), dtype=float) * dt
    g = np.asarray(spec_a.noise.g(t[:-1]), dtype=float)
    rngs = [make_rng(s) for s in seeds]
    xa = np.full(n_trials, float(x0_a))
    xb = np.full(n_trials, float(x0_b))
    first_violation = np.full(n_trials, -1, dtype=np.int64)
    if np.any(xa < xb):
        first_violation[xa < xb] = 0
    n = len(dt)
    dw = np.empty((n_trials, min(n, NOISE_CHUNK)))
    for a, b in chunk_ranges(n):
        width = b - a
        block = dw[:, :width]
        for j, rng in enumerate(rngs):
            block[j] = _standard_normal_chunk(rng, width)
        block *= sqdt[a:b]
        for i in range(width):
            step = a + i
            noise = g[step] * block[:, i]
            xa += drift_eval(spec_a.drift, xa) * wdt[step] + noise
            xb += drift_eval(spec_b.drift, xb) * wdt[step] + noise
            bad = (xa < xb) & (first_violation < 0)
            if np.any(bad):
                first_violation[bad] = step + 1
    return first_violation


def quadratic_variation(schedule: NoiseSchedule, s: float, t: float) -> float:
    """Closed-form int_s^t g(u)^2 du; t may be inf when the tail integrates."""
    if not math.isinf(t) and t < s:
        raise ValueError("need t >= s")
    if s < schedule.min_t0:
        raise ValueError(f"s below domain start {schedule.min_t0} of {schedule.kind!r}")
    if t == s:
        return 0.0
    if schedule.kind == "exp_half":
        upper = 0.0 if math.isinf(t) else math.exp(-t)
        return math.exp(-s) - upper
    if schedule.kind == "power_gamma":
        expo = 1.0 - 2.0 * schedule.gamma          # < 0 on (1/2, 1]
    else:                                          # power_transformed
        expo = (1.0 - 2.0 * schedule.gamma) / (1.0 - schedule.gamma)
    if expo >= -1e-12 and math.isinf(t):
        raise ValueError("infinite remaining variance: g^2 is not integrable")
    upper = 0.0 if math.isinf(t) else t ** expo
    return (s ** expo - upper) / (-expo)


def _branch_coefficients(k: float, regime: str, times: np.ndarray):
    """Per-interval mean factor and noise std of the branch solution."""
    t = np.asarray(times, dtype=float)
    lo, hi = t[:-1], t[1:]
    if regime == "negative":
        mean = np.exp(-k * (hi - lo))
        a = 2.0 * (k - 0.5)
        if abs(a) < 1e-12:
            var_g = hi - lo                        # k = 1/2 limit
        else:
            var_g = (np.exp(a * hi) - np.exp(a * lo)) / a
        var = np.exp(-2.0 * k * hi) * var_g
    elif regime == "positive":
        mean = np.exp(k * (hi - lo))
        a = 2.0 * k + 1.0
        var_g = (np.exp(-a * lo) - np.exp(-a * hi)) / a
        var = np.exp(2.0 * k * hi) * var_g
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return mean, np.sqrt(np.maximum(var, 0.0))


def linear_exact_batch(k: float, regime: str, x_s, s: float,
                       times, n_paths: int, seed: int):
    """Exact Gaussian sampling of the branch solution at the query times.

    x_s may be a scalar (all paths share the start) or an array of
    per-path starts.  Returns (values, first_crossing): values has shape
    (n_paths, len(times)); first_crossing holds the first node index where
    each path leaves the branch's half-line (-1 if it never does).  The
    full signed path is returned; the |x|-drift reading is valid before
    the crossing and the caller truncates there when that is intended.
    """
    times = np.asarray(times, dtype=float)
    if times[0] < s:
        raise ValueError("query times must start at or after s")
    if np.any(np.diff(times) <= 0):
        raise ValueError("query times must be strictly increasing")
    full = np.concatenate(([s], times))
    mean, std = _branch_coefficients(k, regime, full)
    rng = make_rng(seed)
    values = np.empty((n_paths, len(times)))
    x = np.broadcast_to(np.asarray(x_s, dtype=float), (n_paths,)).copy()
    for j in range(len(times)):
        x = mean[j] * x + std[j] * rng.standard_normal(n_paths)
        values[:, j] = x
    if regime == "negative":
        crossed = values >= 0.0
    else:
        crossed = values <= 0.0
    any_cross = crossed.any(axis=1)
    first = np.where(any_cross, crossed.argmax(axis=1), -1)
    return values, first.astype(np.int64)


def simulate_linear_exact(k: float, regime: str, x_s: float, s: float,
                          times, seed: int) -> Trajectory:
    """One exact path of the branch solution; marks the first sign change."""
    times = np.asarray(times, dtype=float)
    starts_at_s = len(times) > 0 and times[0] == s
    body = times[1:] if starts_at_s else times
    if len(body):
        values, first = linear_exact_batch(k, regime, x_s, s, body, 1, seed)
        vals = values[0]
        cross = int(first[0])
    else:
        vals = np.empty(0)
        cross = -1
    if starts_at_s:
        vals = np.concatenate(([x_s], vals))
        if cross >= 0:
            cross += 1
    crossing = None if cross < 0 else cross
    return Trajectory(times=times, values=vals, seed=int(seed),
                      frame="transformed-exp", grid=None,
                      first_zero_crossing=crossing)


def gaussian_clock(k: float, s: float, t) -> np.ndarray:
    """tau(t) = <G>_t for G_t = int_s^t e^{u(k-1/2)} dB_u (limit form at k=1/2)."""
    t = np.asarray(t, dtype=float)
    a = 2.0 * (k - 0.5)
    if abs(a) < 1e-12:
        return t - s
    return (np.exp(a * t) - np.exp(a * s)) / a


def linear_hit_zero_mc(k: float, x_s: float, s: float, t_end: float,
                       n_paths: int, seed: int, n_grid: int = 64,
                       block: int = 20000) -> tuple[int, int]:
    """Count paths from x_s < 0 that hit the origin by t_end, out of n_paths.

    The origin is the constant barrier b = -e^{ks} x_s for the Gaussian
    martingale G, simulated on a uniform clock grid with the exact bridge
    crossing probability applied between nodes; node-only detection would
    undercount by O(sqrt(dtau)), far more than the Monte Carlo error here.
    """
    if x_s >= 0:
        raise ValueError("hitting probe starts from a negative state")
    b = -math.exp(k * s) * x_s
    tau_end = float(gaussian_clock(k, s, t_end))
    dtau = tau_end / n_grid
    hits = 0
    done = 0
    batch_index = 0
    while done < n_paths:
        m = min(block, n_paths - done)
        rng = make_rng(derive_seed(seed, batch_index))
        incr = rng.standard_normal((m, n_grid)) * math.sqrt(dtau)
        w = np.cumsum(incr, axis=1)
        crossed = (w >= b).any(axis=1)
        alive = np.flatnonzero(~crossed)
        if len(alive):
            w_alive = np.concatenate((np.zeros((len(alive), 1)), w[alive]), axis=1)
            p_bridge = np.exp(-2.0 * (b - w_alive[:, :-1]) * (b - w_alive[:, 1:]) / dtau)
            u = rng.random((len(alive), n_grid))
            crossed[alive] = (u < p_bridge).any(axis=1)
        hits += int(crossed.sum())
        done += m
        batch_index += 1
    return hits, n_paths
