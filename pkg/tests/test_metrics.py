import math

import numpy as np
import pytest

from bdris.channel import (AVAILABLE, BLOCKED, NetworkScenario, PowerConfig,
                           effective_channels, sample_channels, stream_rng,
                           zf_precoder)
from bdris.circuit import CircuitParams, build_codebook
from bdris.errors import DegenerateChannelError
from bdris.metrics import (ResultRow, SweepSpec, TrialResult, aggregate,
                           evaluate_received_powers, frequency_sweep,
                           network_sum_power, received_power, run_monte_carlo,
                           sum_power_per_bs, sum_spectral_efficiency_outdated)
from bdris.optimizer import ObjectiveWeights, configure_fc

PARAMS = CircuitParams.defaults()


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def scenario(direct=BLOCKED, users=((25.0, 10.0),), m=6):
    return NetworkScenario(
        bs_positions=((0.0, 0.0),), user_positions=(tuple(users),),
        ris_position=(40.0, 20.0), m=m, frequencies=(7.4e9,),
        eta_direct=3.5, eta_reflected=2.5, direct_links=direct)


class TestReceivedPower:
    def test_zero_reflection_blocked_gives_zero(self):
        sc = scenario(BLOCKED)
        ch = sample_channels(sc, 4, stream_rng(0, 0))
        eff = effective_channels(ch, 0, np.zeros((4, 4)))
        assert np.all(eff == 0)

    def test_single_user_matched_filter_equality(self):
        # with one user the zero-forcing precoder is the matched filter, so
        # the received power hits the Cauchy-Schwarz bound ||e||^2 P alpha
        sc = scenario(BLOCKED)
        ch = sample_channels(sc, 4, stream_rng(0, 1))
        rng = np.random.default_rng(1)
        theta = crandn(rng, 4, 4)
        theta = theta + theta.T
        power = PowerConfig.uniform(sc, 0.1, 1e-7)
        result = evaluate_received_powers(ch, [theta], power)
        eff = effective_channels(ch, 0, theta)
        assert result.user_powers[0][0] == pytest.approx(
            np.linalg.norm(eff) ** 2 * 0.1, rel=1e-12)

    def test_matches_naive_scalar_evaluation(self):
        rng = np.random.default_rng(2)
        e = crandn(rng, 6)
        p = crandn(rng, 6)
        expected = abs(sum(e[i] * p[i] for i in range(6))) ** 2 * 0.2 * 0.5
        assert received_power(e, p, 0.2, 0.5) == pytest.approx(expected, rel=1e-12)

    def test_linear_in_power_and_alpha(self):
        rng = np.random.default_rng(3)
        e, p = crandn(rng, 4), crandn(rng, 4)
        base = received_power(e, p, 0.1, 0.5)
        assert received_power(e, p, 0.3, 0.5) == pytest.approx(3 * base, rel=1e-12)
        assert received_power(e, p, 0.1, 1.0) == pytest.approx(2 * base, rel=1e-12)


class TestSums:
    def test_single_user_sums(self):
        result = TrialResult(user_powers=((0.25,), (0.5,)))
        assert sum_power_per_bs(result) == (0.25, 0.5)
        assert network_sum_power(result) == 0.75

    def test_hand_computed_two_by_two(self):
        result = TrialResult(user_powers=((1e-3, 2e-3), (4e-3, 8e-3)))
        assert sum_power_per_bs(result) == pytest.approx((3e-3, 12e-3), rel=1e-12)
        assert network_sum_power(result) == pytest.approx(15e-3, rel=1e-12)

    def test_network_sum_equals_sum_of_per_bs(self):
        rng = np.random.default_rng(4)
        powers = tuple(tuple(rng.uniform(size=2)) for _ in range(3))
        result = TrialResult(user_powers=powers)
        assert network_sum_power(result) == pytest.approx(
            sum(sum_power_per_bs(result)), rel=1e-12)


class TestSpectralEfficiencyOutdated:
    def test_zero_reflection_matches_interference_free(self):
        sc = scenario(AVAILABLE, users=((25.0, 10.0), (35.0, 0.0)))
        ch = sample_channels(sc, 4, stream_rng(5, 0))
        power = PowerConfig.uniform(sc, 0.1, 1e-7)
        se = sum_spectral_efficiency_outdated(ch, 0, np.zeros((4, 4)), power)
        # reference: perfect zero-forcing on the true (direct-only) channels
        eff = effective_channels(ch, 0, np.zeros((4, 4)))
        prec = zf_precoder(eff)
        expected = sum(
            math.log2(1 + abs(eff[k] @ prec[:, k]) ** 2 * 0.1 * 0.5 / 1e-7)
            for k in range(2))
        assert se == pytest.approx(expected, rel=1e-9)

    def test_noise_monotonicity(self):
        sc = scenario(AVAILABLE, users=((25.0, 10.0), (35.0, 0.0)))
        ch = sample_channels(sc, 4, stream_rng(5, 1))
        rng = np.random.default_rng(6)
        theta = crandn(rng, 4, 4)
        theta = theta + theta.T
        p1 = PowerConfig.uniform(sc, 0.1, 1e-7)
        p2 = PowerConfig.uniform(sc, 0.1, 1e-6)
        assert (sum_spectral_efficiency_outdated(ch, 0, theta, p1)
                > sum_spectral_efficiency_outdated(ch, 0, theta, p2))

    def test_matches_brute_force_sinr(self):
        sc = scenario(AVAILABLE, users=((25.0, 10.0), (35.0, 0.0)))
        ch = sample_channels(sc, 3, stream_rng(5, 2))
        rng = np.random.default_rng(7)
        theta = crandn(rng, 3, 3)
        theta = theta + theta.T
        power = PowerConfig.uniform(sc, 0.1, 1e-7)
        se = sum_spectral_efficiency_outdated(ch, 0, theta, power)
        prec = zf_precoder(effective_channels(ch, 0, np.zeros((3, 3))))
        actual = effective_channels(ch, 0, theta)
        expected = 0.0
        for k in range(2):
            sig = abs(actual[k] @ prec[:, k]) ** 2 * 0.1 * 0.5
            intf = sum(abs(actual[k] @ prec[:, u]) ** 2 * 0.1 * 0.5
                       for u in range(2) if u != k)
            expected += math.log2(1 + sig / (intf + 1e-7))
        assert se == pytest.approx(expected, rel=1e-12)

    def test_interference_positive_with_nonzero_reflection(self):
        sc = scenario(AVAILABLE, users=((25.0, 10.0), (35.0, 0.0)))
        power = PowerConfig.uniform(sc, 0.1, 1e-7)
        for t in range(5):
            ch = sample_channels(sc, 4, stream_rng(8, t))
            rng = np.random.default_rng(t)
            theta = crandn(rng, 4, 4)
            theta = theta + theta.T
            prec = zf_precoder(effective_channels(ch, 0, np.zeros((4, 4))))
            actual = effective_channels(ch, 0, theta)
            leakage = abs(actual[0] @ prec[:, 1]) ** 2
            assert leakage > 0

    def test_synchronized_zf_interference_negligible(self):
        sc = scenario(BLOCKED, users=((25.0, 10.0), (35.0, 0.0)), m=8)
        for t in range(5):
            ch = sample_channels(sc, 4, stream_rng(9, t))
            rng = np.random.default_rng(t)
            theta = crandn(rng, 4, 4)
            theta = theta + theta.T
            eff = effective_channels(ch, 0, theta)
            prec = zf_precoder(eff)
            cross = eff @ prec
            signal = min(abs(cross[k, k]) ** 2 for k in range(2))
            interference = max(abs(cross[0, 1]) ** 2, abs(cross[1, 0]) ** 2)
            assert interference < 1e-8 * signal


class TestAggregation:
    def test_mean_and_stderr(self):
        mean, stderr = aggregate([1.0, 2.0, 3.0, 4.0])
        assert mean == 2.5
        assert stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)

    def test_single_sample(self):
        assert aggregate([5.0]) == (5.0, 0.0)

    def test_constant_metric(self):
        mean, stderr = aggregate([2.0] * 50)
        assert mean == 2.0 and stderr == 0.0


class TestRunMonteCarlo:
    def test_single_trial_reproduces_point_value(self):
        spec = SweepSpec("x", (1.0,), 1, ("a",))
        result = run_monte_carlo(spec, lambda v, a, t, att: {"m": 42.0})
        assert result.rows == (ResultRow("x", 1.0, "a", "m", 42.0, 0.0, 1),)

    def test_substream_stability(self):
        def point(value, arch, trial, attempt):
            return {"m": float(stream_rng(3, trial, attempt=attempt).uniform())}

        few = run_monte_carlo(SweepSpec("x", (0,), 4, ("a",)), point)
        many = run_monte_carlo(SweepSpec("x", (0,), 8, ("a",)), point)
        # the first half of the draws is identical, so the 4-trial mean can be
        # reconstructed from the 8-trial draws
        draws = [float(stream_rng(3, t).uniform()) for t in range(8)]
        assert few.mean_of(0, "a", "m") == pytest.approx(np.mean(draws[:4]))
        assert many.mean_of(0, "a", "m") == pytest.approx(np.mean(draws))

    def test_degenerate_trials_redrawn(self):
        def point(value, arch, trial, attempt):
            if trial == 0 and attempt == 0:
                raise DegenerateChannelError("forced")
            return {"m": float(attempt)}

        result = run_monte_carlo(SweepSpec("x", (0,), 100, ("a",)), point)
        assert result.mean_of(0, "a", "m") == pytest.approx(1.0 / 100)

    def test_too_many_degenerate_trials_fail(self):
        def point(value, arch, trial, attempt):
            raise DegenerateChannelError("always")

        with pytest.raises(RuntimeError):
            run_monte_carlo(SweepSpec("x", (0,), 100, ("a",)), point)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec("x", (), 5, ("a",))
        with pytest.raises(ValueError):
            SweepSpec("x", (1,), 0, ("a",))


class TestFrequencySweep:
    def test_consistency_at_target(self):
        sc = scenario(BLOCKED)
        ch = sample_channels(sc, 6, stream_rng(10, 0))
        weights = ObjectiveWeights(mu=(1.0,), nu=((1.0,),))
        f_star = 7.4e9
        cb = build_codebook(f_star, 6, (0.1e-12, 2e-12), (0.001e-12, 0.6e-12), PARAMS)
        configured = configure_fc(ch, weights, cb, PARAMS)
        power = PowerConfig.uniform(sc, 0.1, 1e-7)
        sweep = frequency_sweep(configured, ch, 0, np.array([7.0e9, f_star, 8.0e9]), power)
        theta = configured.scattering_at(f_star)
        at_target = evaluate_received_powers(ch, [theta], power).user_powers[0][0]
        assert sweep[1, 0] == pytest.approx(at_target, rel=1e-12)
        assert sweep.shape == (3, 1)
