"""Monte Carlo engine: trial mechanics, determinism, estimates."""

import math

import numpy as np
import pytest

from vlf.bounds import VlfParams, channel_stats, universal_schedule
from vlf.channel import Dmc, GaussianChannel, bsc
from vlf.engine import (
    SchemeConfig,
    aggregate_outcomes,
    empirical_mi_passage_times,
    estimate_channel,
    info_density_passage_times,
    run_monte_carlo,
    simulate_trial,
    sprt,
    trial_outcomes,
)
from vlf.errors import (
    HorizonExceeded,
    HorizonTooSmall,
    InsufficientTraining,
    StateExplosion,
    VlfError,
)

LN2 = math.log(2.0)
CH = bsc(0.11)
UNIFORM2 = np.array([0.5, 0.5])


def _params(log2m=8.0, g1=8.0, g2=14.0, a=3.0, eps0=0.0):
    return VlfParams(log_m=log2m * LN2, gamma1=g1, gamma2=g2,
                     a_accept=a, a_reject=a, eps0=eps0)


def _cfg(**kw):
    base = dict(variant="vlf_dmc", channel=CH, px=UNIFORM2,
                params=_params(), seed=0)
    base.update(kw)
    return SchemeConfig(**base)


class TestSprt:
    def test_accepts_at_first_strict_upcrossing(self):
        decision, steps, s = sprt([0.5, 0.6, 2.1, 9.9], 3.0, 3.0)
        assert (decision, steps) == ("accept", 3)
        assert s == pytest.approx(3.2)

    def test_rejects_on_downcrossing(self):
        decision, steps, s = sprt([-4.0], 3.0, 3.0)
        assert (decision, steps) == ("reject", 1)
        assert s == pytest.approx(-4.0)

    def test_landing_exactly_on_threshold_continues(self):
        decision, steps, _ = sprt([1.0, 1.0, 1.0], 2.0, 2.0)
        assert (decision, steps) == ("accept", 3)

    def test_exhausted_stream_raises(self):
        with pytest.raises(HorizonExceeded):
            sprt([0.1, -0.1, 0.1], 3.0, 3.0)

    def test_step_budget_raises(self):
        with pytest.raises(HorizonExceeded):
            sprt(iter([0.1] * 100), 3.0, 3.0, n_max=5)

    def test_thresholds_must_be_positive(self):
        with pytest.raises(VlfError):
            sprt([1.0], 0.0, 3.0)
        with pytest.raises(VlfError):
            sprt([1.0], 3.0, -1.0)


class TestConfigValidation:
    def test_unknown_variant(self):
        with pytest.raises(VlfError):
            _cfg(variant="vlf_quantum")

    def test_channel_kind_must_match_variant(self):
        with pytest.raises(VlfError):
            _cfg(variant="vlf_awgn")  # finite-alphabet channel given
        with pytest.raises(VlfError):
            _cfg(variant="vlf_dmc", channel=GaussianChannel(1.0), px=None)

    def test_input_distribution_must_fit_channel(self):
        with pytest.raises(VlfError):
            _cfg(px=np.array([0.2, 0.3, 0.5]))
        with pytest.raises(VlfError):
            _cfg(px=np.array([0.9, 0.3]))

    def test_binary_specialization_needs_binary_channel(self):
        tri = Dmc(np.full((3, 3), 1.0 / 3.0))
        with pytest.raises(VlfError):
            _cfg(variant="uvlf_bsc", channel=tri,
                 px=np.full(3, 1.0 / 3.0), training_len=10)

    def test_training_shorter_than_input_alphabet(self):
        with pytest.raises(InsufficientTraining):
            _cfg(variant="uvlf_dmc", training_len=1)

    def test_horizon_below_safety_floor(self):
        with pytest.raises(HorizonTooSmall):
            run_monte_carlo(_cfg(n_max=10), 1)

    def test_second_phase_cap_must_exceed_one(self):
        with pytest.raises(VlfError):
            _cfg(c2=1.0)

    def test_horizon_multiplier_positive(self):
        with pytest.raises(VlfError):
            _cfg(n_max_mult=0.0)

    def test_bad_competitor_mode(self):
        with pytest.raises(VlfError):
            _cfg(competitor_mode="psychic")

    def test_trial_count_validated(self):
        with pytest.raises(VlfError):
            run_monte_carlo(_cfg(), 0)


class TestCompetitorModeResolution:
    def test_huge_message_count_cannot_run_literally(self):
        cfg = _cfg(params=_params(log2m=100.0, g1=72.0, g2=76.0, a=5.0),
                   competitor_mode="literal")
        with pytest.raises(StateExplosion):
            run_monte_carlo(cfg, 1)

    def test_gaussian_universal_has_no_large_scale_strategy(self):
        cfg = SchemeConfig(
            variant="uvlf_awgn", channel=GaussianChannel(1.0), px=None,
            params=_params(log2m=100.0, g1=75.0, g2=80.0, a=4.0),
            training_len=32, seed=0, competitor_mode="ensemble",
        )
        with pytest.raises(StateExplosion):
            run_monte_carlo(cfg, 1)

    def test_binary_specialization_ensemble_needs_uniform_input(self):
        cfg = _cfg(variant="uvlf_bsc", px=np.array([0.7, 0.3]),
                   training_len=16, competitor_mode="ensemble")
        with pytest.raises(StateExplosion):
            run_monte_carlo(cfg, 1)


class TestTrainingEstimates:
    def test_deterministic_given_seed_and_trial(self):
        cfg = _cfg(variant="uvlf_dmc", training_len=100)
        a = estimate_channel(cfg, trial_index=7)
        b = estimate_channel(cfg, trial_index=7)
        c = estimate_channel(cfg, trial_index=8)
        np.testing.assert_array_equal(a.kernel, b.kernel)
        assert not np.array_equal(a.kernel, c.kernel)

    def test_training_budget_split_across_inputs(self):
        cfg = _cfg(variant="uvlf_dmc", training_len=7)
        est = estimate_channel(cfg)
        np.testing.assert_array_equal(est.counts, [4, 3])
        np.testing.assert_allclose(est.kernel.sum(axis=1), [1.0, 1.0])

    def test_long_training_concentrates_on_the_true_kernel(self):
        cfg = _cfg(variant="uvlf_dmc", training_len=1_000_000)
        est = estimate_channel(cfg)
        assert float(np.max(np.abs(est.kernel - CH.matrix))) < 0.005

    def test_gaussian_noise_variance_estimate(self):
        cfg = SchemeConfig(
            variant="uvlf_awgn", channel=GaussianChannel(1.0, 2.0), px=None,
            params=_params(log2m=6.0, g1=6.0, g2=10.0, a=3.0),
            training_len=10_000, seed=3,
        )
        est = estimate_channel(cfg)
        assert est.kernel is None
        assert 0.95 * 2.0 <= est.noise_variance <= 1.05 * 2.0


class TestTrialOutcomes:
    def test_lengths_partition_the_stopping_time(self):
        cfg = _cfg()
        for o in trial_outcomes(cfg, 200):
            if o.stopped_at_zero:
                assert o.tau == 0
            else:
                assert o.tau == o.len_c1 + o.len_ht + o.len_c2
            assert o.energy == 0.0  # finite-alphabet runs carry no power cost

    def test_stop_at_time_zero_always(self):
        cfg = _cfg(params=_params(eps0=1.0))
        outs = list(trial_outcomes(cfg, 50))
        assert all(o.stopped_at_zero and o.tau == 0 for o in outs)
        assert not any(o.correct for o in outs)

    def test_honest_time_zero_guesses_uniformly(self):
        cfg = _cfg(params=VlfParams(LN2, 8.0, 14.0, 3.0, 3.0, eps0=1.0),
                   honest_time_zero=True)
        est = run_monte_carlo(cfg, 2000)
        # guessing one of two messages: about half the trials decode right
        assert 0.4 <= 1.0 - est.eps_hat <= 0.6

    def test_near_noiseless_channel_decodes_fast_and_clean(self):
        clean = bsc(1e-4)
        cfg = SchemeConfig(
            variant="vlf_dmc", channel=clean, px=UNIFORM2,
            params=VlfParams(LN2, 0.6, 1.2, 3.0, 3.0), seed=1,
        )
        est = run_monte_carlo(cfg, 500)
        assert est.eps_hat == 0.0
        # one symbol clears the first threshold, one confirms
        assert 1.9 <= est.n_hat <= 3.0
        assert est.censor_rate == 0.0

    def test_single_trial_interval_is_degenerate(self):
        est = run_monte_carlo(_cfg(), 1)
        assert est.degenerate
        assert math.isnan(est.n_lo) and math.isnan(est.n_hi)

    def test_simulate_trial_matches_generator(self):
        cfg = _cfg()
        gen = list(trial_outcomes(cfg, 5))
        solo = [simulate_trial(cfg, i) for i in range(5)]
        assert gen == solo


class TestDeterminismAndAggregation:
    def test_worker_count_does_not_change_the_estimate(self):
        cfg = _cfg()
        a = run_monte_carlo(cfg, 400, workers=1)
        b = run_monte_carlo(cfg, 400, workers=2)
        assert a == b

    def test_streaming_aggregation_equals_batch(self):
        cfg = _cfg()
        streamed = aggregate_outcomes(cfg, trial_outcomes(cfg, 300))
        batch = run_monte_carlo(cfg, 300)
        assert streamed == batch

    def test_different_seeds_differ(self):
        a = run_monte_carlo(_cfg(seed=1), 200)
        b = run_monte_carlo(_cfg(seed=2), 200)
        assert a.n_hat != b.n_hat


class TestCompetitorStrategiesAgree:
    def test_small_scale_and_large_scale_runs_are_consistent(self):
        common = dict(params=_params(log2m=6.0, g1=7.0, g2=12.0, a=3.0))
        lit = run_monte_carlo(_cfg(competitor_mode="literal", **common), 4000)
        ens = run_monte_carlo(_cfg(competitor_mode="ensemble", **common), 4000)
        # same protocol, two competitor implementations: CIs must overlap
        assert lit.eps_lo <= ens.eps_hi and ens.eps_lo <= lit.eps_hi
        assert lit.n_lo <= ens.n_hi and ens.n_lo <= lit.n_hi


class TestAllVariantsRun:
    @pytest.mark.parametrize(
        "variant,channel,px,training",
        [
            ("vlf_dmc", CH, UNIFORM2, 0),
            ("uvlf_dmc", CH, UNIFORM2, 64),
            ("uvlf_bsc", CH, UNIFORM2, 64),
            ("vlf_awgn", GaussianChannel(1.0), None, 0),
            ("uvlf_awgn", GaussianChannel(1.0), None, 64),
        ],
    )
    def test_every_variant_completes(self, variant, channel, px, training):
        gaussian = isinstance(channel, GaussianChannel)
        cfg = SchemeConfig(
            variant=variant, channel=channel, px=px,
            params=_params(log2m=6.0, g1=8.0, g2=13.0, a=3.0),
            training_len=training, seed=5,
        )
        est = run_monte_carlo(cfg, 200)
        assert est.trials == 200
        assert est.eps_hat <= 0.5
        assert est.censor_rate <= 0.05
        assert (est.power_hat is not None) == gaussian
        if gaussian:
            assert 0.5 <= est.power_hat <= 1.5


class TestSecondPhaseCap:
    def test_tight_cap_censors_slow_continuations(self):
        common = dict(
            variant="uvlf_bsc", training_len=64,
            params=_params(log2m=6.0, g1=7.0, g2=10.0, a=3.0),
        )
        relaxed = run_monte_carlo(_cfg(**common), 2000)
        tight = run_monte_carlo(_cfg(c2=1.0001, **common), 2000)
        assert tight.censor_rate > relaxed.censor_rate


class TestPassageTimeHelpers:
    def test_adaptive_statistic_slope_near_inverse_drift(self):
        taus = empirical_mi_passage_times(CH, UNIFORM2, 20.0, 5000, seed=4)
        ratio = float(taus.mean()) / 20.0
        assert 2.6 <= ratio <= 3.2  # near 1/C = 2.885

    def test_known_statistic_obeys_overshoot_bound(self):
        s = channel_stats(CH, UNIFORM2)
        taus = info_density_passage_times(CH, UNIFORM2, 20.0, 5000, seed=4)
        mean = float(taus.mean())
        se = float(taus.std(ddof=1)) / math.sqrt(taus.size)
        assert mean <= (20.0 + s.b) / s.drift + 4 * se
        assert mean >= 20.0 / s.drift - 4 * se

    def test_adaptive_statistic_crosses_earlier_from_estimation_bias(self):
        # the plug-in statistic overestimates information at finite length,
        # so its crossing times sit slightly below the known-statistic ones
        emp = empirical_mi_passage_times(CH, UNIFORM2, 20.0, 3000, seed=9)
        known = info_density_passage_times(CH, UNIFORM2, 20.0, 3000, seed=9)
        assert float(emp.mean()) < float(known.mean())
