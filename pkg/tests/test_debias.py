import numpy as np
import pytest

from matbandit import ExperimentConfig
from matbandit.debias import UnbiasedState, batch_average_oracle, debias_step, debias_surrogate
from matbandit.exceptions import PropensityError
from matbandit.harness import _shared_setup
from matbandit.model import realize_reward, sample_context
from matbandit.online import OnlineInference
from matbandit.policy import draw_action, propensity


def _pair(rng, d=6):
    return np.stack([rng.standard_normal((d, d)), rng.standard_normal((d, d))])


def test_unplayed_arm_absorbs_sgd_estimate(rng):
    m = _pair(rng)
    X = rng.standard_normal((6, 6))
    np.testing.assert_array_equal(debias_surrogate(m[1], X, 2.0, 0, 0.3, 1), m[1])


def test_zero_residual(rng):
    m = _pair(rng)
    X = rng.standard_normal((6, 6))
    y = float(np.vdot(m[1], X))
    np.testing.assert_allclose(debias_surrogate(m[1], X, y, 1, 0.3, 1), m[1], atol=1e-14)


def test_played_arm_weight(rng):
    m = _pair(rng)
    X = rng.standard_normal((6, 6))
    residual = 1.0 - float(np.vdot(m[0], X))
    np.testing.assert_allclose(debias_surrogate(m[0], X, 1.0, 0, 0.8, 0), m[0] + residual / 0.2 * X)


def test_first_step_equals_surrogate(rng):
    m = _pair(rng)
    X = rng.standard_normal((6, 6))
    state = debias_step(UnbiasedState.from_initial(*_pair(rng)), m, X, 0.4, 1, 0.7)
    assert state.t == 1
    for arm in (0, 1):
        np.testing.assert_allclose(state.M_unbs[arm], debias_surrogate(m[arm], X, 0.4, 1, 0.7, arm), rtol=1e-14)


def test_streaming_matches_batch_average(rng):
    state = UnbiasedState.from_initial(np.zeros((6, 6)), np.zeros((6, 6)))
    surrogates = [[], []]
    for _ in range(1000):
        m = _pair(rng)
        X = rng.standard_normal((6, 6))
        y, a, pi = float(rng.standard_normal()), int(rng.integers(2)), float(rng.uniform(0.05, 0.95))
        for arm in (0, 1):
            surrogates[arm].append(debias_surrogate(m[arm], X, y, a, pi, arm))
        debias_step(state, m, X, y, a, pi)
    for arm in (0, 1):
        ref = batch_average_oracle(surrogates[arm])
        assert np.linalg.norm(state.M_unbs[arm] - ref) / np.linalg.norm(ref) < 1e-10


class TestBatchAverage:
    def test_single(self, rng):
        m = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(batch_average_oracle([m]), m)

    def test_two_equal(self, rng):
        m = rng.standard_normal((3, 4))
        np.testing.assert_allclose(batch_average_oracle([m, m]), m, rtol=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            batch_average_oracle([])


@pytest.mark.parametrize("pi", [0.0, 1.0])
def test_degenerate_propensity(rng, pi):
    state = UnbiasedState.from_initial(np.zeros((6, 6)), np.zeros((6, 6)))
    with pytest.raises(PropensityError):
        debias_step(state, _pair(rng), rng.standard_normal((6, 6)), 0.0, 1, pi)


def test_surrogate_mean_zero(small_truth):
    """Fresh draws with the past frozen: the surrogate is centered at the truth."""
    rng = np.random.default_rng(3)
    m_sgd = np.array(small_truth.M) + 0.05 * rng.standard_normal((2, 8, 8))
    reps = 20_000
    total = np.zeros((2, 8, 8))
    total_sq = np.zeros((2, 8, 8))
    for _ in range(reps):
        X = sample_context(8, 8, rng)
        pi = propensity(m_sgd[1], m_sgd[0], X, 0.1)
        a = draw_action(pi, rng)
        y, _ = realize_reward(small_truth, X, a, rng)
        for arm in (0, 1):
            inc = debias_surrogate(m_sgd[arm], X, y, a, pi, arm) - small_truth.M[arm]
            total[arm] += inc
            total_sq[arm] += inc * inc
    mean = total / reps
    se = np.sqrt((total_sq / reps - mean**2) / reps)
    assert np.all(np.abs(mean) < 4 * se)


@pytest.mark.slow
def test_debiased_average_removes_sgd_bias():
    cfg = ExperimentConfig(d1=20, d2=20, n=1000)
    truth, m_init = _shared_setup(cfg)
    M = np.array(truth.M)
    seeds = 200
    sgd_err = np.empty((seeds, 2, 20, 20))
    unb_err = np.empty((seeds, 2, 20, 20))
    for s in range(seeds):
        rng = np.random.default_rng(1000 + s)
        engine = OnlineInference(m_init, cfg.r, cfg.epsilon, cfg.schedule(), cfg.build_targets())
        for _ in range(cfg.n):
            X = sample_context(20, 20, rng)
            pi = engine.propensity(X)
            a = draw_action(pi, rng)
            y, _ = realize_reward(truth, X, a, rng)
            engine.update(X, a, y)
        sgd_err[s] = np.array(engine.m_sgd) - M
        unb_err[s] = engine.unbiased.M_unbs - M
    for arm in (0, 1):
        sgd_bias = sgd_err[:, arm].mean(axis=0)
        # the entry where the low-rank SGD iterate is most biased
        j = np.unravel_index(np.abs(sgd_bias).argmax(), sgd_bias.shape)
        unb = unb_err[:, arm][(slice(None),) + j]
        assert abs(unb.mean()) <= abs(sgd_bias[j]) / 3
        assert abs(np.mean(unb / unb.std())) < 0.15
