import dataclasses

import numpy as np
import pytest

from golden_sessions import GOLDEN_CONFIG, build_golden, make_log
from opresponse.errors import ConfigError, ContractError, ExtractionError
from opresponse.features import (
    ExtractionConfig,
    accuracy_mse,
    assign_performance,
    config_from_json,
    config_to_json,
    consequence_rank,
    count_alarm_activations,
    count_events,
    detect_spike_onset,
    extract_features,
    interaction_counts,
    overall_performance,
    reaction_time,
    read_features,
    recovery_time,
    response_time,
    write_features,
)
from opresponse.sessions import FeatureVector, Group, Performance, Scenario


@pytest.fixture(scope="module")
def golden():
    logs, expected = build_golden()
    return logs, expected


class TestGoldenSuite:
    """Hand-traced sessions must reproduce their feature rows exactly."""

    def test_all_sessions_match(self, golden):
        logs, expected = golden
        vectors = [extract_features(log, GOLDEN_CONFIG) for log in logs]
        vectors = assign_performance(vectors, GOLDEN_CONFIG)
        for got, want in zip(vectors, expected):
            assert got == want, f"mismatch for {want.participant_id}"

    def test_extraction_is_deterministic(self, golden):
        logs, _ = golden
        once = [extract_features(log, GOLDEN_CONFIG) for log in logs]
        twice = [extract_features(log, GOLDEN_CONFIG) for log in logs]
        assert once == twice


def _s1_log(series, **kw):
    return make_log("PX", Group.G1, Scenario.S1, series, **kw)


class TestReactionTime:
    def test_step_at_240_with_fault_at_60(self):
        log = _s1_log({"MNitsel_1": [(0.0, 0.0), (240.0, 1.0)]})
        assert reaction_time(log, GOLDEN_CONFIG) == 180.0

    def test_constant_zero_switch_is_absent(self):
        log = _s1_log({"MNitsel_1": [(0.0, 0.0), (500.0, 0.0)]})
        assert reaction_time(log, GOLDEN_CONFIG) is None

    def test_transition_exactly_at_fault_start_is_zero(self):
        log = _s1_log({"MNitsel_1": [(0.0, 0.0), (60.0, 1.0)]})
        assert reaction_time(log, GOLDEN_CONFIG) == 0.0

    def test_pre_fault_transition_is_ignored(self):
        log = _s1_log({"MNitsel_1": [(0.0, 0.0), (30.0, 1.0)]})
        assert reaction_time(log, GOLDEN_CONFIG) is None

    def test_missing_switch_variable_raises(self):
        log = _s1_log({"PSERB_1": [(0.0, 0.99)]})
        with pytest.raises(ExtractionError, match="MNitsel_1"):
            reaction_time(log, GOLDEN_CONFIG)


class TestResponseTime:
    def test_s1_last_adjustment(self):
        log = _s1_log({"MmanNit_1": [(0.0, 5.0), (200.0, 6.0), (320.0, 7.0)]})
        assert response_time(log, GOLDEN_CONFIG) == 260.0

    def test_s2_never_switched_is_absent(self):
        log = make_log("PX", Group.G1, Scenario.S2,
                       {"Nitsel_1": [(0.0, 0.0), (500.0, 0.0)]})
        assert response_time(log, GOLDEN_CONFIG) is None

    def test_s3_last_action_before_spike(self):
        series = [(0.0, 67.0), (10.0, 67.2), (20.0, 67.1), (30.0, 67.3),
                  (40.0, 67.2), (50.0, 67.1), (300.0, 65.0), (700.0, 64.0),
                  (750.0, 80.0), (1080.0, 80.0)]
        log = make_log("PX", Group.G1, Scenario.S3, {"Toutrec2c_1": series},
                       duration=1080.0)
        assert response_time(log, GOLDEN_CONFIG) == 640.0

    def test_s3_without_spike_is_full_survival(self):
        series = [(0.0, 67.0), (10.0, 67.1), (20.0, 67.0), (30.0, 67.1),
                  (400.0, 66.0), (1080.0, 66.0)]
        log = make_log("PX", Group.G1, Scenario.S3, {"Toutrec2c_1": series},
                       duration=1080.0)
        assert response_time(log, GOLDEN_CONFIG) == 1020.0


class TestSpikeDetector:
    def test_onset_is_first_jump_above_noise_multiple(self):
        series = ((0.0, 1.0), (10.0, 1.2), (20.0, 1.0), (30.0, 1.2), (40.0, 1.0),
                  (50.0, 1.2), (100.0, 1.3), (200.0, 9.9))
        # pre-fault |diffs| = 0.2 each, median 0.2; threshold 1.0
        assert detect_spike_onset(series, 60.0, 5.0) == 200.0

    def test_flat_pre_fault_makes_any_rise_a_spike(self):
        series = ((0.0, 1.0), (30.0, 1.0), (100.0, 1.1), (200.0, 5.0))
        assert detect_spike_onset(series, 60.0, 5.0) == 100.0

    def test_no_spike_returns_none(self):
        series = ((0.0, 1.0), (10.0, 1.4), (100.0, 1.5), (200.0, 1.6))
        assert detect_spike_onset(series, 60.0, 5.0) is None


class TestRecoveryTime:
    def test_rise_then_clear(self):
        log = _s1_log({"All2_1": [(0.0, 0.0), (100.0, 1.0), (400.0, 0.0)]})
        assert recovery_time(log, GOLDEN_CONFIG) == 340.0

    def test_alarm_never_activates_is_absent(self):
        log = _s1_log({"All2_1": [(0.0, 0.0), (500.0, 0.0)]})
        assert recovery_time(log, GOLDEN_CONFIG) is None

    def test_last_clear_wins_after_reactivation(self):
        log = _s1_log({"All2_1": [(0.0, 0.0), (100.0, 1.0), (200.0, 0.0),
                                  (300.0, 1.0), (450.0, 0.0)]})
        assert recovery_time(log, GOLDEN_CONFIG) == 390.0

    def test_s3_is_contract_error(self):
        log = make_log("PX", Group.G1, Scenario.S3,
                       {"All2_1": [(0.0, 0.0)]}, duration=1080.0)
        with pytest.raises(ContractError):
            recovery_time(log, GOLDEN_CONFIG)


class TestAccuracy:
    def test_exact_target_gives_zero(self):
        log = _s1_log({"FN2serb1O_1": [(0.0, 0.0), (100.0, 10.0), (500.0, 10.0)]})
        assert accuracy_mse(log, GOLDEN_CONFIG) == 0.0

    def test_offset_of_two_gives_four(self):
        log = _s1_log({"FN2serb1O_1": [(0.0, 0.0), (100.0, 12.0), (500.0, 12.0)]})
        assert accuracy_mse(log, GOLDEN_CONFIG) == 4.0

    def test_window_averages_post_adjustment_samples(self):
        log = _s1_log({"FN2serb1O_1": [(0.0, 0.0), (100.0, 11.0), (500.0, 11.0),
                                       (520.0, 11.0)]})
        # last change at 100; window values all 11 -> (11-10)^2 = 1
        assert accuracy_mse(log, GOLDEN_CONFIG) == 1.0

    def test_never_adjusted_is_absent(self):
        log = _s1_log({"FN2serb1O_1": [(0.0, 12.0), (500.0, 12.0)]})
        assert accuracy_mse(log, GOLDEN_CONFIG) is None

    def test_unset_midpoint_is_config_error(self):
        cfg = ExtractionConfig()
        log = _s1_log({"FN2serb1O_1": [(0.0, 0.0), (100.0, 12.0)]})
        with pytest.raises(ConfigError, match="S1"):
            accuracy_mse(log, cfg)


class TestAlarmCounting:
    def test_reactivation_counts_twice(self):
        grid = [0.0, 1.0, 2.0, 3.0, 4.0]
        values = [0.0, 1.0, 1.0, 0.0, 1.0]
        log = _s1_log({"All2_1": list(zip(grid, values))})
        assert count_alarm_activations(log) == 2

    def test_all_zero_series_count_zero(self):
        log = _s1_log({"All2_1": [(0.0, 0.0), (10.0, 0.0)],
                       "All3_1": [(0.0, 0.0)]})
        assert count_alarm_activations(log) == 0

    def test_two_series_with_one_activation_each(self):
        log = _s1_log({"All2_1": [(0.0, 0.0), (10.0, 1.0)],
                       "All3_1": [(0.0, 0.0), (20.0, 1.0)]})
        assert count_alarm_activations(log) == 2

    def test_initial_high_state_counts_as_activation(self):
        log = _s1_log({"All2_1": [(0.0, 1.0), (10.0, 1.0)]})
        assert count_alarm_activations(log) == 1

    def test_additive_over_disjoint_series(self):
        rng = np.random.default_rng(3)
        grid = np.arange(30, dtype=float)
        a = list(zip(grid, (rng.random(30) < 0.4).astype(float)))
        b = list(zip(grid, (rng.random(30) < 0.4).astype(float)))
        both = _s1_log({"All2_1": a, "All3_1": b})
        only_a = _s1_log({"All2_1": a})
        only_b = _s1_log({"All3_1": b})
        assert count_alarm_activations(both) == (
            count_alarm_activations(only_a) + count_alarm_activations(only_b)
        )


class TestInteractionCounts:
    def test_three_rising_edges_silenced(self):
        log = _s1_log({"sAll": [(0.0, 0.0), (10.0, 1.0), (20.0, 0.0),
                                (30.0, 1.0), (40.0, 0.0), (50.0, 1.0)]})
        silenced, _, _, _ = interaction_counts(log, GOLDEN_CONFIG)
        assert silenced == 3

    def test_g1_session_has_no_procedure_count(self):
        log = _s1_log({"proclis_1": [(0.0, 0.0), (10.0, 1.0)]})
        *_, procedures = interaction_counts(log, GOLDEN_CONFIG)
        assert procedures is None

    def test_missing_series_count_zero(self):
        log = _s1_log({})
        assert interaction_counts(log, GOLDEN_CONFIG) == (0, 0, 0, None)

    def test_enumerated_state_series_counts_hops(self):
        assert count_events(((0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 2.0), (4.0, 3.0))) == 3


def _pressure_log(min_pressure, emergency=0.0):
    return _s1_log({
        "PSERB_1": [(0.0, 0.99), (300.0, min_pressure), (599.0, 0.99)],
        "emmerO_1": [(0.0, 0.0), (320.0, emergency)],
    })


class TestConsequence:
    @pytest.mark.parametrize("min_p,emergency,rank", [
        (0.985, 0.0, 1),
        (0.976, 0.0, 2),
        (0.9799, 0.0, 2),
        (0.974, 0.0, 3),
        (0.9695, 0.0, 4),
        (0.985, 1.0, 4),
        (0.9695, 1.0, 5),
    ])
    def test_ladder(self, min_p, emergency, rank):
        assert consequence_rank(_pressure_log(min_p, emergency), GOLDEN_CONFIG) == rank

    def test_boundary_impurity_band_lower_edge_is_impurity(self):
        # exactly 0.975 sits inside [0.975, 0.980)
        assert consequence_rank(_pressure_log(0.975), GOLDEN_CONFIG) == 2

    def test_boundary_shutdown_level_inclusive(self):
        assert consequence_rank(_pressure_log(0.970), GOLDEN_CONFIG) == 4

    def test_s3_below_threshold_is_safe(self):
        log = make_log("PX", Group.G1, Scenario.S3,
                       {"TMAXREATORE_1": [(0.0, 320.0), (500.0, 350.0)]},
                       duration=1080.0)
        assert consequence_rank(log, GOLDEN_CONFIG) == 1

    def test_s3_overheat(self):
        log = make_log("PX", Group.G1, Scenario.S3,
                       {"TMAXREATORE_1": [(0.0, 320.0), (500.0, 400.0)]},
                       duration=1080.0)
        assert consequence_rank(log, GOLDEN_CONFIG) == 5

    def test_monotone_in_min_pressure(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            a, b = sorted(rng.uniform(0.96, 0.99, size=2))
            lower = consequence_rank(_pressure_log(a), GOLDEN_CONFIG)
            higher = consequence_rank(_pressure_log(b), GOLDEN_CONFIG)
            assert lower >= higher


class TestOverallPerformance:
    def _vector(self, scenario, recovery=None, response=None, consequence=1):
        return FeatureVector("PX", Group.G1, scenario,
                             recovery_time_s=recovery, response_time_s=response,
                             consequence=consequence)

    def test_cohort_percentile_optimal(self):
        cohort = [self._vector(Scenario.S1, recovery=r) for r in (100, 200, 300, 400)]
        got = overall_performance(cohort[0], cohort, GOLDEN_CONFIG)
        assert got is Performance.OPTIMAL

    def test_cohort_percentile_good_and_poor(self):
        cohort = [self._vector(Scenario.S1, recovery=r) for r in (100, 200, 300, 400)]
        # P25 = 175, P50 = 250 under linear interpolation
        assert overall_performance(cohort[1], cohort, GOLDEN_CONFIG) is Performance.GOOD
        assert overall_performance(cohort[2], cohort, GOLDEN_CONFIG) is Performance.POOR

    def test_s3_full_survival_safe_is_optimal(self):
        fv = self._vector(Scenario.S3, response=1080.0, consequence=1)
        assert overall_performance(fv, [fv], GOLDEN_CONFIG) is Performance.OPTIMAL

    def test_s3_survival_870_is_good(self):
        fv = self._vector(Scenario.S3, response=870.0, consequence=1)
        assert overall_performance(fv, [fv], GOLDEN_CONFIG) is Performance.GOOD

    def test_s3_long_survival_with_overheat_is_poor(self):
        fv = self._vector(Scenario.S3, response=950.0, consequence=5)
        assert overall_performance(fv, [fv], GOLDEN_CONFIG) is Performance.POOR

    def test_exact_percentile_boundaries_follow_conventions(self):
        # sorted times [100,200,200,400]: P25 = 175, P50 = 200 under linear
        # interpolation; a recovery exactly at P50 is Good, not Poor, and
        # one exactly at P25 is Optimal
        cohort = [self._vector(Scenario.S1, recovery=r) for r in (100, 200, 200, 400)]
        at_p50 = self._vector(Scenario.S1, recovery=200.0)
        assert overall_performance(at_p50, cohort, GOLDEN_CONFIG) is Performance.GOOD
        tight = [self._vector(Scenario.S1, recovery=r) for r in (100, 100, 100, 200)]
        at_p25 = self._vector(Scenario.S1, recovery=100.0)
        assert overall_performance(at_p25, tight, GOLDEN_CONFIG) is Performance.OPTIMAL

    def test_s3_survival_thresholds_are_inclusive_exclusive(self):
        exactly_900 = self._vector(Scenario.S3, response=900.0, consequence=1)
        assert overall_performance(exactly_900, [exactly_900], GOLDEN_CONFIG) is Performance.OPTIMAL
        exactly_850 = self._vector(Scenario.S3, response=850.0, consequence=1)
        assert overall_performance(exactly_850, [exactly_850], GOLDEN_CONFIG) is Performance.GOOD
        just_below = self._vector(Scenario.S3, response=849.99, consequence=1)
        assert overall_performance(just_below, [just_below], GOLDEN_CONFIG) is Performance.POOR

    def test_empty_cohort_is_contract_error(self):
        fv = self._vector(Scenario.S1, recovery=100.0)
        with pytest.raises(ContractError):
            overall_performance(fv, [], GOLDEN_CONFIG)


class TestTranslationInvariance:
    def test_time_metrics_shift_with_fault_start(self, ):
        logs, _ = build_golden()
        for log in logs:
            shifted_series = {
                name: tuple((t + 37.5, v) for t, v in pts)
                for name, pts in log.series.items()
            }
            shifted = dataclasses.replace(
                log,
                meta=dataclasses.replace(
                    log.meta,
                    fault_start_s=log.meta.fault_start_s + 37.5,
                    duration_s=log.meta.duration_s + 37.5,
                ),
                series=shifted_series,
            )
            base = extract_features(log, GOLDEN_CONFIG)
            moved = extract_features(shifted, GOLDEN_CONFIG)
            assert moved.reaction_time_s == base.reaction_time_s
            assert moved.recovery_time_s == base.recovery_time_s
            assert moved.response_time_s == base.response_time_s


class TestFeaturesFile:
    def test_round_trip_preserves_rows(self, tmp_path, golden):
        logs, expected = golden
        path = tmp_path / "features.csv"
        write_features(expected, path)
        assert read_features(path) == list(expected)

    def test_absent_values_are_empty_cells(self, tmp_path, golden):
        _, expected = golden
        path = tmp_path / "features.csv"
        write_features(expected, path)
        lines = path.read_text().splitlines()
        p05 = next(line for line in lines if line.startswith("P05"))
        # recovery_time is the sixth column and absent for P05
        assert p05.split(",")[5] == ""


class TestConfigRoundTrip:
    def test_json_round_trip(self):
        text = config_to_json(GOLDEN_CONFIG)
        assert config_from_json(text) == GOLDEN_CONFIG

    def test_bad_cohort_mode_rejected(self):
        with pytest.raises(ConfigError):
            ExtractionConfig(cohort_mode="sideways")
