import math

import numpy as np
import pytest

from saddlelab.discrete import (NoiseSpec, sgd_batch, simulate_sgd,
                                step_correction, z_diagnostics)
from saddlelab.model import DriftSpec, MeanFlowFrame, mean_flow_h
from saddlelab.rng import NOISE_CHUNK, chunk_ranges, derive_seed, make_rng

MONO = DriftSpec("monomial", 2.0, 1.0, 10.0)


class TestNoiseSpec:
    def test_rademacher_support_and_bound(self):
        noise = NoiseSpec("rademacher", 1.0)
        rng = make_rng(10)
        draws = noise.sample_chunk(rng, 1_000_000)
        assert np.all(np.abs(draws) <= noise.M)
        assert set(np.unique(draws)) == {-1.0, 1.0}
        assert noise.variance_floor == 1.0

    def test_uniform_bound_and_floor(self):
        noise = NoiseSpec("uniform_centered", 2.0)
        rng = make_rng(11)
        draws = noise.sample_chunk(rng, 1_000_000)
        assert np.all(np.abs(draws) <= 2.0)
        assert noise.variance_floor == pytest.approx(4.0 / 3.0)
        assert abs(draws.var() - 4.0 / 3.0) < 0.01

    def test_martingale_mean(self):
        noise = NoiseSpec("rademacher", 1.0)
        rng = make_rng(12)
        draws = noise.sample_chunk(rng, 1_000_000)
        se = 1.0 / math.sqrt(len(draws))
        assert abs(draws.mean()) <= 4 * se

    def test_urn_induced_not_directly_sampleable(self):
        noise = NoiseSpec("urn_induced", 1.0)
        with pytest.raises(ValueError):
            noise.sample_chunk(make_rng(0), 10)
        with pytest.raises(ValueError):
            noise.variance_floor
        with pytest.raises(ValueError):
            simulate_sgd(MONO, 0.9, noise, -0.2, 1, 100, 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec("gaussian", 1.0)
        with pytest.raises(ValueError):
            NoiseSpec("rademacher", 0.0)


class TestSgdRecursion:
    def test_zero_noise_matches_hand_rolled(self):
        gamma, x0, n0, n_end = 0.6, -0.5, 1, 11
        traj = simulate_sgd(MONO, gamma, None, x0, n0, n_end, seed=0)
        steps = np.arange(n0, n_end, dtype=float) ** (-gamma)
        x = x0
        expected = [x]
        for step in steps:
            fx = 1.0 * np.minimum(abs(x), 10.0) ** 2.0
            x = x + (fx * step + 0.0 * step)
            expected.append(x)
        assert np.array_equal(traj.values, np.array(expected))

    def test_rademacher_steps_have_exact_magnitude(self):
        gamma, x0, n0, n_end, seed = 0.7, -0.3, 1, 400, 77
        noise = NoiseSpec("rademacher", 1.0)
        traj = simulate_sgd(MONO, gamma, noise, x0, n0, n_end, seed)
        rng = make_rng(seed)
        draws = np.concatenate([noise.sample_chunk(rng, b - a)
                                for a, b in chunk_ranges(n_end - n0)])
        assert np.all(np.abs(draws) == 1.0)
        steps = np.arange(n0, n_end, dtype=float) ** (-gamma)
        x = x0
        for i, (step, y) in enumerate(zip(steps, draws)):
            fx = float(1.0 * np.minimum(abs(x), 10.0) ** 2.0)
            x = x + (fx * step + y * step)
            assert x == traj.values[i + 1]

    def test_determinism(self):
        noise = NoiseSpec("rademacher", 1.0)
        a = simulate_sgd(MONO, 0.9, noise, -0.2, 10, 4000, 5)
        b = simulate_sgd(MONO, 0.9, noise, -0.2, 10, 4000, 5)
        assert np.array_equal(a.values, b.values)

    def test_batch_matches_single_bit_exact(self):
        noise = NoiseSpec("rademacher", 1.0)
        seeds = [derive_seed(800, i) for i in range(6)]
        stats = sgd_batch(MONO, 0.9, noise, -0.2, 10, 3 * NOISE_CHUNK + 50,
                          seeds, tail_from=20_000)
        for i, s in enumerate(seeds):
            traj = simulate_sgd(MONO, 0.9, noise, -0.2, 10,
                                3 * NOISE_CHUNK + 50, s)
            assert traj.values[-1] == stats.final[i]
            assert traj.values.max() == stats.max_value[i]
            tail = np.abs(traj.values[traj.times >= 20_000]).max()
            assert tail == stats.tail_abs_max[i]

    def test_shrink_option_bounds_drift(self):
        # min(f, |x|^p) can only slow the climb
        plain = simulate_sgd(MONO, 0.8, None, -0.5, 1, 200, 0)
        shrunk = simulate_sgd(MONO, 0.8, None, -0.5, 1, 200, 0,
                              shrink_exponent=3.0)
        assert np.all(shrunk.values <= plain.values + 1e-15)
        same = simulate_sgd(MONO, 0.8, None, -0.5, 1, 200, 0,
                            shrink_exponent=2.0)
        assert np.array_equal(same.values, plain.values)

    def test_gamma_domain(self):
        for bad in (0.5, 1.0, 1.2):
            with pytest.raises(ValueError):
                simulate_sgd(MONO, bad, None, -0.2, 1, 10, 0)

    def test_index_domain(self):
        with pytest.raises(ValueError):
            simulate_sgd(MONO, 0.9, None, -0.2, 0, 10, 0)
        with pytest.raises(ValueError):
            simulate_sgd(MONO, 0.9, None, -0.2, 10, 10, 0)


class TestZDiagnostics:
    def test_z_is_minus_one_on_mean_flow(self):
        frame = MeanFlowFrame("discrete", 2.0, 0.9)
        n = np.arange(5, 50)
        traj_values = mean_flow_h(frame, n.astype(float))
        traj = simulate_sgd(MONO, 0.9, None, traj_values[0], 5, 49, 0)
        traj.values[:] = traj_values
        z, _ = z_diagnostics(traj, frame)
        assert np.allclose(z, -1.0, rtol=1e-12)

    def test_sign_matches_state(self):
        frame = MeanFlowFrame("discrete", 2.0, 0.9)
        traj = simulate_sgd(MONO, 0.9, NoiseSpec("rademacher", 1.0),
                            -0.2, 10, 2000, 3)
        z, _ = z_diagnostics(traj, frame)
        assert np.all((traj.values < 0) == (z < 0))
        assert np.all((traj.values == 0) == (z == 0))

    def test_step_correction_tends_to_one(self):
        frame = MeanFlowFrame("discrete", 2.0, 0.9)
        a = step_correction(frame, np.array([1e4, 1e5, 1e6]))
        assert np.all(np.abs(a - 1.0) < 0.01)
        closer = step_correction(frame, 1e6)
        assert abs(closer - 1.0) < abs(step_correction(frame, 1e4) - 1.0)

    def test_step_correction_requires_discrete_frame(self):
        with pytest.raises(ValueError):
            step_correction(MeanFlowFrame("continuous", 2.0), 10)
