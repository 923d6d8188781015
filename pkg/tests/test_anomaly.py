import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from overdensity.anomaly import (
    Event,
    ScoreConfig,
    background_density,
    scan_profile,
    score_events,
    signal_density,
    summarize,
)
from overdensity.errors import ConfigError, InputError

# Background quadrature for sigma=250, 10 points, default half-exclusion:
# the ten points span +/-500 and the two innermost (+/-55.6) are dropped.
# Offsets and Gaussian weights recomputed by hand from exp(-d^2/(2*250^2)).
QUAD_OFFSETS = [-500.0, -388.8888888888889, -277.77777777777777,
                -166.66666666666666, 166.66666666666666, 277.77777777777777,
                388.8888888888889, 500.0]
QUAD_WEIGHTS = [0.03815024889640867, 0.08407050051260147, 0.1520559174633599,
                0.2257233331276301, 0.2257233331276301, 0.1520559174633599,
                0.08407050051260147, 0.03815024889640867]


def test_background_quadrature_frozen_values():
    offsets, weights = ScoreConfig().background_quadrature()
    assert_allclose(offsets, QUAD_OFFSETS, rtol=0, atol=1e-9)
    assert_allclose(weights, QUAD_WEIGHTS, rtol=1e-12, atol=0)
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_score_config_validation():
    with pytest.raises(ConfigError):
        ScoreConfig(sigma=0.0).validate()
    with pytest.raises(ConfigError):
        ScoreConfig(n_quad=1).validate()
    with pytest.raises(ConfigError):
        ScoreConfig(thresholds=()).validate()
    with pytest.raises(ConfigError):
        ScoreConfig(thresholds=(1.5, -1.0)).validate()
    with pytest.raises(ConfigError):
        # exclusion wider than the whole quadrature window
        ScoreConfig(sigma=1.0, exclusion_halfwidth=3.0).validate()
    with pytest.raises(ConfigError):
        ScoreConfig(signal_sigma=-0.5).validate()


def test_smooth_background_scores_near_one(toy_model, toy_dataset):
    cfg = ScoreConfig(sigma=0.15, thresholds=(1.5,))
    report = score_events(toy_model, toy_dataset.event_arrays(), cfg)
    background = toy_dataset.labels == 0
    med = np.median(report.alphas[background])
    assert 0.8 < med < 1.2
    # the injected blob floats to the top
    assert np.mean(report.alphas[~background]) > np.percentile(
        report.alphas[background], 95)


def test_alpha_is_exactly_the_density_ratio(toy_model, toy_dataset):
    cfg = ScoreConfig(sigma=0.15, thresholds=(1.5,))
    X, m = toy_dataset.event_arrays()
    report = score_events(toy_model, (X[:40], m[:40]), cfg)
    for i in (0, 7, 39):
        p_sig, _ = signal_density(toy_model, X[i], m[i], cfg)
        p_bg, _ = background_density(toy_model, X[i], m[i], cfg)
        assert report.p_signal[i] == p_sig
        assert report.p_background[i] == p_bg
        assert report.alphas[i] == p_sig / p_bg


def test_event_objects_match_stacked_arrays(toy_model, toy_dataset):
    X, m = toy_dataset.event_arrays()
    events = [Event(features=X[i], m=m[i]) for i in range(25)]
    cfg = ScoreConfig(sigma=0.15, thresholds=(1.5,))
    a = score_events(toy_model, events, cfg)
    b = score_events(toy_model, (X[:25], m[:25]), cfg)
    assert np.array_equal(a.alphas, b.alphas)


def test_selections_are_nested(toy_model, toy_dataset):
    cfg = ScoreConfig(sigma=0.15, thresholds=(2.5, 1.1, 1.7))
    report = score_events(toy_model, toy_dataset.event_arrays(), cfg)
    assert report.thresholds == (1.1, 1.7, 2.5)
    loose = set(report.selections[1.1])
    mid = set(report.selections[1.7])
    tight = set(report.selections[2.5])
    assert tight <= mid <= loose


def test_thread_count_does_not_change_results(toy_model, toy_dataset):
    cfg = ScoreConfig(sigma=0.15, thresholds=(1.5,))
    a = score_events(toy_model, toy_dataset.event_arrays(), cfg, threads=1)
    b = score_events(toy_model, toy_dataset.event_arrays(), cfg, threads=4)
    assert np.array_equal(a.alphas, b.alphas)
    assert np.array_equal(a.p_background, b.p_background)


def test_underflow_far_outside_support(toy_model):
    # a feature value hundreds of sigmas off support underflows both
    # densities; alpha gets the sentinel and the flag
    report = score_events(toy_model, (np.array([[1e8]]), np.array([0.5])),
                          ScoreConfig(sigma=0.15, thresholds=(1.5,)))
    assert report.underflow[0]
    assert np.isinf(report.alphas[0])


def test_signal_smoothing_changes_the_numerator(toy_model, toy_dataset):
    X, m = toy_dataset.event_arrays()
    plain = ScoreConfig(sigma=0.15, thresholds=(1.5,))
    smooth = ScoreConfig(sigma=0.15, thresholds=(1.5,), signal_sigma=0.02)
    a = score_events(toy_model, (X[:10], m[:10]), plain)
    b = score_events(toy_model, (X[:10], m[:10]), smooth)
    assert np.array_equal(a.p_background, b.p_background)
    assert not np.array_equal(a.p_signal, b.p_signal)
    assert_allclose(a.p_signal, b.p_signal, rtol=0.25)


def test_summarize_by_hand():
    X = np.array([[1.0, 2.0], [3.0, 6.0]])
    m = np.array([10.0, 20.0])
    s = summarize((X, m), [0, 1], ["m", "a", "b"])
    assert s.n_selected == 2
    assert not s.degenerate
    by_name = {st.name: st for st in s.stats}
    assert by_name["m"].mean == 15.0
    assert by_name["m"].std == pytest.approx(7.0710678118654755, abs=1e-14)
    assert by_name["m"].sem == pytest.approx(5.0, abs=1e-14)
    assert by_name["a"].mean == 2.0
    assert by_name["b"].sem == pytest.approx(2.0, abs=1e-14)


def test_summarize_edge_cases():
    X = np.array([[1.0], [2.0]])
    m = np.array([5.0, 6.0])
    empty = summarize((X, m), [], ["m", "x"])
    assert empty.n_selected == 0
    assert empty.message == "no events pass cut"
    single = summarize((X, m), [1], ["m", "x"])
    assert single.degenerate
    assert single.stats[0].mean == 6.0
    assert single.stats[0].std == 0.0
    with pytest.raises(InputError):
        summarize((X, m), [0], ["just_m"])


def test_scan_profile_by_hand():
    alphas = np.array([1.0, 2.0, 4.0, 0.5])
    m = np.array([0.05, 0.15, 0.17, 0.35])
    report = type("R", (), {})()
    report.alphas = alphas
    rows = scan_profile(report, (np.zeros((4, 1)), m), bin_width=0.1)
    assert len(rows) == 4
    assert rows[0].m_lo == 0.0 and rows[0].count == 1 and rows[0].alpha_max == 1.0
    assert rows[1].count == 2
    assert rows[1].alpha_max == 4.0
    # numpy linear-interpolated percentile between 2.0 and 4.0
    assert rows[1].alpha_p99 == pytest.approx(2.0 + 0.99 * 2.0, abs=1e-12)
    assert rows[2].count == 0
    assert rows[2].alpha_max is None and rows[2].alpha_p99 is None
    assert rows[3].count == 1


def test_scan_profile_empty_and_mismatched(toy_model):
    report = score_events(toy_model, (np.zeros((0, 1)), np.zeros(0)),
                          ScoreConfig(sigma=0.15, thresholds=(1.5,)))
    assert report.alphas.size == 0
    assert scan_profile(report, (np.zeros((0, 1)), np.zeros(0)), 0.1) == []
    with pytest.raises(InputError):
        scan_profile(report, (np.zeros((3, 1)), np.arange(3.0)), 0.1)


@given(st.floats(min_value=0.01, max_value=10.0),
       st.integers(min_value=2, max_value=24),
       st.floats(min_value=0.0, max_value=1.9))
def test_quadrature_weights_always_normalize(sigma, n_quad, excl_frac):
    cfg = ScoreConfig(sigma=sigma, n_quad=n_quad,
                      exclusion_halfwidth=excl_frac * sigma)
    offsets, weights = cfg.background_quadrature()
    assert offsets.size == weights.size
    assert np.all(np.abs(offsets) <= 2.0 * sigma + 1e-12)
    assert np.all(np.abs(offsets) >= excl_frac * sigma - 1e-12)
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(weights > 0)
