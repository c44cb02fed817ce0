"""Named experiment families, their classifier defaults and the phase sweep.

Each dichotomy experiment pairs a simulator setup with a classifier whose
band and barrier are set from the regime's own scales:

* linear, k >= 1/2 (escape is a.s.): no path converges, so a low barrier
  at |x0| detects departure with no false-escape risk; the band sits two
  decades below it.
* linear, k < 1/2: converging paths decay like e^{-kt} times an
  O(sigma_inf) Gaussian prefactor, so the band is 3 sigma_inf e^{-k t_tail}
  and the barrier stays at the global default, far outside any
  still-converging path's range.
* monomial (continuous) and the discrete recursion: converging paths track
  the mean flow, so the band is a small multiple of |h(tail start)|,
  clipped at 0.1 to stay well under the barrier.

Experiment runners are plain frozen dataclasses mapping a block of trial
seeds to outcomes, so they pickle cleanly onto worker processes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import continuous as cont
from . import discrete as disc
from .analysis import (ClassifierConfig, MCResult, PhaseCell, classify_stats,
                       estimate_probability)
from .model import DriftSpec, NoiseSchedule, ProcessSpec
from .rng import derive_seed

__all__ = [
    "ExperimentConfig",
    "linear_classifier",
    "monomial_classifier",
    "discrete_classifier",
    "LinearDichotomyRunner",
    "MonomialDichotomyRunner",
    "DiscreteDichotomyRunner",
    "run_dichotomy",
    "run_urn_experiment",
    "phase_sweep",
]


def linear_classifier(k: float, x0: float, t0: float, t_end: float,
                      tail_fraction: float = 0.2,
                      eps_conv: float | None = None,
                      barrier: float | None = None) -> ClassifierConfig:
    """Classifier defaults for the exponential-clock linear experiment."""
    if k >= 0.5:
        barrier = abs(x0) if barrier is None else barrier
        eps = barrier / 100.0 if eps_conv is None else eps_conv
    else:
        barrier = 3.0 if barrier is None else barrier
        if eps_conv is None:
            t_tail = t0 + (1.0 - tail_fraction) * (t_end - t0)
            sigma_inf = math.sqrt(1.0 / (1.0 - 2.0 * k))
            eps = min(3.0 * sigma_inf * math.exp(-k * t_tail), 0.9 * barrier)
        else:
            eps = eps_conv
    return ClassifierConfig(eps_conv=eps, barrier=barrier,
                            tail_fraction=tail_fraction)


def monomial_classifier(k: float, t0: float, t_end: float,
                        tail_fraction: float = 0.2,
                        eps_conv: float | None = None,
                        barrier: float | None = None) -> ClassifierConfig:
    """Band scaled to the mean-flow magnitude |h| at the tail start."""
    barrier = 3.0 if barrier is None else barrier
    if eps_conv is None:
        t_tail = t0 + (1.0 - tail_fraction) * (t_end - t0)
        eps_conv = min(2.5 * t_tail ** (1.0 / (1.0 - k)), 0.1)
    return ClassifierConfig(eps_conv=eps_conv, barrier=barrier,
                            tail_fraction=tail_fraction)


def discrete_classifier(k: float, gamma: float, n0: int, n_end: int,
                        tail_fraction: float = 0.2,
                        eps_conv: float | None = None,
                        barrier: float | None = None) -> ClassifierConfig:
    """Band scaled to the discrete mean flow (1-gamma) n^{-(1-gamma)}."""
    barrier = 3.0 if barrier is None else barrier
    if eps_conv is None:
        n_tail = n0 + (1.0 - tail_fraction) * (n_end - n0)
        eps_conv = min(3.0 * (1.0 - gamma) * n_tail ** (-(1.0 - gamma)), 0.1)
    return ClassifierConfig(eps_conv=eps_conv, barrier=barrier,
                            tail_fraction=tail_fraction)


@dataclass(frozen=True)
class LinearDichotomyRunner:
    k: float
    x0: float
    t0: float
    t_end: float
    dt: float
    cfg: ClassifierConfig

    @property
    def spec(self) -> ProcessSpec:
        return ProcessSpec(DriftSpec("linear", self.k), NoiseSchedule("exp_half"),
                           t0=self.t0, x0=self.x0)

    def __call__(self, seeds):
        grid = cont.TimeGrid(self.t0, self.t_end, self.dt)
        stats = cont.em_batch(self.spec, grid, seeds,
                              tail_start=self.cfg.tail_start(self.t0, self.t_end))
        return classify_stats(stats.max_value, stats.tail_abs_max, self.cfg)


@dataclass(frozen=True)
class MonomialDichotomyRunner:
    k: float
    gamma: float
    c: float
    cap: float
    x0: float
    t0: float
    t_end: float
    dt: float
    cfg: ClassifierConfig
    raw_frame: bool = False

    @property
    def spec(self) -> ProcessSpec:
        schedule = (NoiseSchedule("power_gamma", self.gamma) if self.raw_frame
                    else NoiseSchedule("power_transformed", self.gamma))
        return ProcessSpec(DriftSpec("monomial", self.k, self.c, self.cap),
                           schedule, t0=self.t0, x0=self.x0)

    def __call__(self, seeds):
        grid = cont.TimeGrid(self.t0, self.t_end, self.dt)
        stats = cont.em_batch(self.spec, grid, seeds,
                              tail_start=self.cfg.tail_start(self.t0, self.t_end))
        return classify_stats(stats.max_value, stats.tail_abs_max, self.cfg)


@dataclass(frozen=True)
class DiscreteDichotomyRunner:
    k: float
    gamma: float
    c: float
    cap: float
    noise_family: str
    noise_bound: float
    x0: float
    n0: int
    n_end: int
    cfg: ClassifierConfig

    def __call__(self, seeds):
        drift = DriftSpec("monomial", self.k, self.c, self.cap)
        noise = disc.NoiseSpec(self.noise_family, self.noise_bound)
        tail_from = self.n0 + (1.0 - self.cfg.tail_fraction) * (self.n_end - self.n0)
        stats = disc.sgd_batch(drift, self.gamma, noise, self.x0,
                               self.n0, self.n_end, seeds,
                               tail_from=int(tail_from))
        return classify_stats(stats.max_value, stats.tail_abs_max, self.cfg)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description; every field has a default and a
    round trip through to_dict/from_dict is exact."""

    kind: str = "simulate"
    model: str = "continuous"          # continuous | discrete (simulate/sweep)
    family: str = "monomial"           # linear | monomial (simulate)
    k: float = 2.0
    gamma: float = 0.9
    c: float = 1.0
    cap: float = 10.0
    noise: str = "rademacher"          # discrete noise family
    noise_bound: float = 1.0
    x0: float = -0.2
    t0: float = 1.0
    dt: float = 1e-3
    horizon: float = 200.0
    n0: int = 10
    steps: int = 1_000_000
    trials: int = 500
    seed: int = 0
    eps_conv: float | None = None      # None: per-experiment default rule
    barrier: float | None = None
    tail_fraction: float = 0.2
    k_values: tuple = (1.5, 2.0, 3.0)
    gamma_values: tuple = (0.55, 0.65, 0.75, 0.85, 0.95)
    urn_f: str = "identity"
    urn_value: float = 0.5
    urn_table: tuple = ()
    urn_red0: int = 1
    urn_total0: int = 2
    raw_frame: bool = False
    dump_trajectories: bool = False
    dump_max: int = 10
    out_format: str = "csv"            # csv | json
    out_dir: str = "."
    jobs: int = 1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["k_values"] = list(self.k_values)
        d["gamma_values"] = list(self.gamma_values)
        d["urn_table"] = list(self.urn_table)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        for key in ("k_values", "gamma_values", "urn_table"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(eq=False)
class DichotomyOutput:
    config: ExperimentConfig
    classifier: ClassifierConfig
    result: MCResult
    k: float
    gamma: float
    prediction: str
    boundary: bool


def _runner_kind(config: ExperimentConfig) -> str:
    if config.kind == "linear-dichotomy":
        return "linear"
    if config.kind == "monomial-dichotomy":
        return "monomial"
    if config.kind == "discrete-dichotomy":
        return "discrete"
    if config.model == "discrete":
        return "discrete"
    return "linear" if config.family == "linear" else "monomial"


def _build_runner(config: ExperimentConfig, k: float, gamma: float):
    kind = _runner_kind(config)
    if kind == "linear":
        cfg = linear_classifier(k, config.x0, config.t0, config.horizon,
                                config.tail_fraction, config.eps_conv,
                                config.barrier)
        runner = LinearDichotomyRunner(k=k, x0=config.x0, t0=config.t0,
                                       t_end=config.horizon, dt=config.dt, cfg=cfg)
    elif kind == "monomial":
        cfg = monomial_classifier(k, config.t0, config.horizon,
                                  config.tail_fraction, config.eps_conv,
                                  config.barrier)
        runner = MonomialDichotomyRunner(k=k, gamma=gamma, c=config.c,
                                         cap=config.cap, x0=config.x0,
                                         t0=config.t0, t_end=config.horizon,
                                         dt=config.dt, cfg=cfg,
                                         raw_frame=config.raw_frame)
    else:
        n_end = config.n0 + config.steps
        cfg = discrete_classifier(k, gamma, config.n0, n_end,
                                  config.tail_fraction, config.eps_conv,
                                  config.barrier)
        runner = DiscreteDichotomyRunner(k=k, gamma=gamma, c=config.c,
                                         cap=config.cap,
                                         noise_family=config.noise,
                                         noise_bound=config.noise_bound,
                                         x0=config.x0, n0=config.n0,
                                         n_end=n_end, cfg=cfg)
    return runner, cfg


def _validate_hypotheses(config: ExperimentConfig, k: float, gamma: float):
    kind = _runner_kind(config)
    if kind == "linear":
        if not k > 0:
            raise ValueError("linear dichotomy requires k > 0 "
                             "(drift lower-bound hypothesis)")
        return
    if kind == "monomial":
        if not k > 1:
            raise ValueError("monomial dichotomy requires k > 1 "
                             "(degenerate-saddle hypothesis)")
        if not 0.5 < gamma < 1.0:
            raise ValueError("continuous power-clock dichotomy requires "
                             "gamma in (1/2, 1); gamma = 1 is the linear "
                             "exponential-clock regime")
        return
    if not k > 1:
        raise ValueError("discrete dichotomy requires k > 1 "
                         "(degenerate-saddle hypothesis)")
    if not 0.5 < gamma < 1.0:
        raise ValueError("discrete dichotomy requires gamma in (1/2, 1) "
                         "(step-size hypothesis)")


def run_dichotomy(config: ExperimentConfig, k: float | None = None,
                  gamma: float | None = None,
                  base_seed: int | None = None) -> DichotomyOutput:
    """Run one dichotomy cell: N classified trials plus the regime prediction."""
    k = config.k if k is None else k
    gamma = config.gamma if gamma is None else gamma
    base_seed = config.seed if base_seed is None else base_seed
    _validate_hypotheses(config, k, gamma)
    runner, cfg = _build_runner(config, k, gamma)
    payload = {"runner": dataclasses.asdict(runner), "kind": config.kind,
               "trials": config.trials}
    result = estimate_probability(runner, config.trials, base_seed,
                                  jobs=config.jobs, payload=payload)
    kind = _runner_kind(config)
    if kind == "linear":
        prediction = "nonconvergence" if k >= 0.5 else "convergence"
        boundary = abs(k - 0.5) <= 0.01
    else:
        prediction, boundary = PhaseCell.predict(k, gamma, kind == "discrete")
    return DichotomyOutput(config=config, classifier=cfg, result=result,
                           k=k, gamma=gamma, prediction=prediction,
                           boundary=boundary)


def phase_sweep(config: ExperimentConfig) -> list[PhaseCell]:
    """One PhaseCell per (k, gamma) grid point, row-major over k then gamma.

    Cell seeds derive from (base seed, cell index), so the table is
    reproducible cell-by-cell and independent of worker count.
    """
    cells = []
    discrete_model = config.model == "discrete"
    sweep_cfg = dataclasses.replace(config, kind="sweep")
    index = 0
    for k in config.k_values:
        for gamma in config.gamma_values:
            out = run_dichotomy(sweep_cfg, k=k, gamma=gamma,
                                base_seed=derive_seed(config.seed, index))
            cells.append(PhaseCell(k=k, gamma=gamma, prediction=out.prediction,
                                   boundary=out.boundary, result=out.result))
            index += 1
    return cells


@dataclass(eq=False)
class UrnOutput:
    config: ExperimentConfig
    spec: disc.UrnSpec
    n_trials: int
    final_mean: float
    final_std: float
    near_half_fraction: float
    decomposition_max_gap: float


def run_urn_experiment(config: ExperimentConfig) -> UrnOutput:
    """Urn Monte Carlo: final-fraction statistics plus a pathwise
    decomposition audit on the first trial's seed."""
    spec = disc.UrnSpec(config.urn_f, value=config.urn_value,
                        table=config.urn_table, red0=config.urn_red0,
                        total0=config.urn_total0)
    n_end = config.urn_total0 + config.steps
    seeds = [derive_seed(config.seed, i) for i in range(config.trials)]
    finals = disc.urn_final_batch(spec, n_end, seeds)
    audit = disc.urn_as_sgd_check(spec, min(n_end, config.urn_total0 + 1000),
                                  seeds[0])
    return UrnOutput(config=config, spec=spec, n_trials=config.trials,
                     final_mean=float(finals.mean()),
                     final_std=float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
                     near_half_fraction=float((np.abs(finals - 0.5) < 0.05).mean()),
                     decomposition_max_gap=audit.max_abs_gap)
