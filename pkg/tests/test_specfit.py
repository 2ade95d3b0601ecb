import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from djtransmon import models, specfit
from djtransmon.errors import ConfigError, DegenerateFitError, FitError
from djtransmon.specfit import (
    ExtractionConfig,
    ScanParseError,
    TransitionRow,
    TransitionTable,
    TwoToneScan,
    average_over_amplitude,
    extract_transitions,
    fit_exponential_decay,
    fit_lorentzian,
    fit_ramsey,
    load_scan,
    lorentzian,
    save_scan,
    synthesize_scan,
)
from djtransmon.tables import read_csv, write_csv

FREQ = np.linspace(4.9, 5.1, 201)


# --------------------------------------------------------------------------
# scan I/O


@settings(max_examples=15)
@given(nfl=st.integers(1, 3), na=st.integers(1, 3), nf=st.integers(2, 6), seed=st.integers(0, 2**31 - 1))
def test_scan_round_trip(tmp_path_factory, nfl, na, nf, seed):
    rng = np.random.default_rng(seed)
    scan = TwoToneScan(np.sort(rng.uniform(0, 0.5, nfl)) + np.arange(nfl) * 1e-3,
                       np.arange(1, na + 1) / na, np.linspace(4, 6, nf), rng.normal(size=(nfl, na, nf)))
    path = save_scan(scan, tmp_path_factory.mktemp("scan") / "s.csv")
    back = load_scan(path)
    for name in ("flux", "amp", "freq", "response"):
        np.testing.assert_allclose(getattr(back, name), getattr(scan, name), rtol=1e-8)


def test_scan_axis_validation():
    with pytest.raises(ConfigError):
        TwoToneScan([0.0, 0.2, 0.1], [1.0], [5.0, 5.1], np.zeros((3, 1, 2)))
    with pytest.raises(ConfigError):
        TwoToneScan([0.0], [1.0], [5.0, 5.1], np.full((1, 1, 2), np.nan))
    with pytest.raises(ConfigError):
        TwoToneScan([0.0], [1.0], [5.0, 5.1], np.zeros((1, 2, 2)))


def _write_rows(tmp_path, rows):
    return write_csv(tmp_path / "scan.csv", specfit.SCAN_HEADER, rows)


def test_misordered_rows_name_the_row(tmp_path):
    rows = [(0.0, 1.0, 5.0, 0.1), (0.0, 1.0, 5.1, 0.2), (0.1, 1.0, 5.1, 0.3), (0.1, 1.0, 5.0, 0.4)]
    with pytest.raises(ScanParseError) as exc:
        load_scan(_write_rows(tmp_path, rows))
    assert exc.value.row == 3


def test_non_numeric_and_incomplete_rows(tmp_path):
    with pytest.raises(ScanParseError) as exc:
        load_scan(_write_rows(tmp_path, [(0.0, 1.0, 5.0, 0.1), (0.0, 1.0, 5.1, "x")]))
    assert exc.value.row == 2
    with pytest.raises(ScanParseError):
        load_scan(_write_rows(tmp_path, [(0.0, 1.0, 5.0, 0.1), (0.0, 1.0, 5.1, 0.2), (0.1, 1.0, 5.0, 0.1)]))
    bad = tmp_path / "h.csv"
    bad.write_text("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(ScanParseError):
        load_scan(bad)


# --------------------------------------------------------------------------
# amplitude averaging


def test_averaging_reduces_noise_by_sqrt_m():
    rng = np.random.default_rng(1)
    m, sigma = 16, 0.2
    scan = TwoToneScan([0.0], np.arange(m), np.arange(4000.0), rng.normal(0, sigma, (1, m, 4000)))
    avg = average_over_amplitude(scan)
    assert avg.shape == (1, 4000)
    assert avg.std() == pytest.approx(sigma / math.sqrt(m), rel=0.05)


def test_amplitude_window_selection_and_empty_window():
    resp = np.arange(12.0).reshape(1, 3, 4)
    scan = TwoToneScan([0.0], [0.1, 0.2, 0.3], [1, 2, 3, 4], resp)
    np.testing.assert_allclose(average_over_amplitude(scan, (0.15, 0.3)), resp[:, 1:].mean(axis=1))
    with pytest.raises(ConfigError):
        average_over_amplitude(scan, (0.5, 0.6))


@given(st.floats(0.1, 10), st.floats(-5, 5))
def test_averaging_commutes_with_affine_maps(a, b):
    rng = np.random.default_rng(0)
    resp = rng.normal(size=(2, 3, 5))
    scan = TwoToneScan([0.0, 0.1], [1, 2, 3], np.arange(5.0), resp)
    scaled = TwoToneScan([0.0, 0.1], [1, 2, 3], np.arange(5.0), a * resp + b)
    np.testing.assert_allclose(average_over_amplitude(scaled), a * average_over_amplitude(scan) + b, atol=1e-9)


# --------------------------------------------------------------------------
# Lorentzian fits


def test_lorentzian_shape():
    assert lorentzian(5.0, 5.0, 0.01, 2.0, 1.0) == 3.0
    assert lorentzian(5.01, 5.0, 0.01, 2.0, 1.0) == pytest.approx(2.0)


def test_noiseless_fit_exact():
    fit = fit_lorentzian(FREQ, lorentzian(FREQ, 5.0123, 0.004, 1.0, 0.2))
    assert fit.f0 == pytest.approx(5.0123, abs=1e-9)
    assert fit.gamma == pytest.approx(0.004, rel=1e-6)


def test_dip_fitted_with_negative_amplitude():
    fit = fit_lorentzian(FREQ, lorentzian(FREQ, 4.97, 0.005, -0.5, 1.0))
    assert fit.amplitude < 0 and fit.f0 == pytest.approx(4.97, abs=1e-8)


@given(st.floats(0.1, 100), st.floats(-10, 10))
def test_fit_centre_invariant_under_affine_response(a, b):
    rng = np.random.default_rng(5)
    y = lorentzian(FREQ, 5.02, 0.004, 1.0, 0.0) + rng.normal(0, 0.03, FREQ.size)
    f1 = fit_lorentzian(FREQ, y)
    f2 = fit_lorentzian(FREQ, a * y + b)
    assert f2.f0 == pytest.approx(f1.f0, abs=1e-7)
    assert f2.f0_err == pytest.approx(f1.f0_err, rel=1e-4)


def test_monte_carlo_error_bars_are_calibrated():
    rng = np.random.default_rng(7)
    pulls = []
    for _ in range(60):
        y = lorentzian(FREQ, 5.0, 0.005, 1.0, 0.0) + rng.normal(0, 0.05, FREQ.size)
        fit = fit_lorentzian(FREQ, y)
        pulls.append((fit.f0 - 5.0) / fit.f0_err)
    pulls = np.array(pulls)
    assert abs(pulls.mean()) < 0.4
    assert 0.7 < pulls.std() < 1.4


def test_flat_and_short_traces_rejected():
    with pytest.raises(FitError):
        fit_lorentzian(FREQ, np.ones_like(FREQ))
    with pytest.raises(FitError):
        fit_lorentzian(FREQ, np.random.default_rng(0).normal(0, 1, FREQ.size))
    with pytest.raises(ConfigError):
        fit_lorentzian(FREQ[:4], FREQ[:4])


def test_peak_outside_window_is_a_fit_error():
    f = np.linspace(5.0, 5.05, 60)
    with pytest.raises(FitError):
        fit_lorentzian(f, lorentzian(f, 4.98, 0.02, 1.0, 0.0))


# --------------------------------------------------------------------------
# tables and configs


def test_transition_table_round_trip(tmp_path):
    t = TransitionTable([TransitionRow(0.0, "f01", 5.1, 1e-4), TransitionRow(0.0, "f02/2", 4.9, 2e-4)])
    back = TransitionTable.from_csv(t.to_csv(tmp_path / "t.csv"))
    assert back.rows == t.rows
    assert back.labels_at(0.0) == ["f01", "f02/2"]
    np.testing.assert_array_equal(back.fluxes, [0.0])


def test_transition_table_validation():
    with pytest.raises(ConfigError):
        TransitionTable([TransitionRow(0.0, "f05/5", 5.0, 0.0)])
    with pytest.raises(ConfigError):
        TransitionTable([TransitionRow(0.0, "f01", -1.0, 0.0)])
    with pytest.raises(ConfigError):
        TransitionTable([TransitionRow(0.0, "f01", 5.0, 0.0), TransitionRow(0.0, "f01", 5.1, 0.0)])


def test_extraction_config_round_trip_and_validation(tmp_path):
    doc = {"transitions": [{"label": "f01", "amp_window": [0.1, 0.4],
                            "windows": [{"phi_e_phi0": 0.0, "freq_GHz": [5.0, 5.1]}]}]}
    cfg = ExtractionConfig.from_dict(doc)
    assert ExtractionConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ExtractionConfig.from_dict({"transitions": [{"label": "f9"}]})
    with pytest.raises(ConfigError):
        ExtractionConfig.from_dict({"transitions": [{"label": "f01", "windows": [
            {"phi_e_phi0": 0.0, "freq_GHz": [5.1, 5.0]}]}]})
    with pytest.raises(ConfigError):
        ExtractionConfig.from_dict({})


# --------------------------------------------------------------------------
# end-to-end extraction


def _config(centers, fluxes, half_width=0.015, amp_windows=None):
    trans = {}
    for x, lines in zip(fluxes, centers):
        for label, f in lines.items():
            trans.setdefault(label, []).append({"phi_e_phi0": float(x), "freq_GHz": [f - half_width, f + half_width]})
    aw = amp_windows or {}
    return ExtractionConfig.from_dict({"transitions": [
        {"label": k, "amp_window": aw.get(k), "windows": v} for k, v in trans.items()]})


def test_model_generated_scan_recovers_transitions(cd2):
    fluxes = [0.0, 0.15, 0.31]
    centers = []
    for x in fluxes:
        s = models.spectrum("two-mode", cd2, x)
        centers.append({lab: s.observable(lab) for lab in ("f01", "f02/2", "f03/3")})
    lo = min(min(c.values()) for c in centers) - 0.05
    hi = max(max(c.values()) for c in centers) + 0.05
    freqs = np.arange(lo, hi, 0.0005)
    amps = np.linspace(0.05, 1.0, 12)
    scan = synthesize_scan(fluxes, amps, freqs, centers, noise=0.02, rng=0)
    cfg = _config(centers, fluxes, amp_windows={"f01": [0.0, 0.3], "f02/2": [0.3, 1.0], "f03/3": [0.5, 1.0]})
    table = extract_transitions(scan, cfg)
    assert not table.failures
    assert len(table) == 9
    for r in table.rows:
        truth = centers[fluxes.index(r.phi_e_phi0)][r.label]
        assert abs(r.freq - truth) < 5e-4
        assert np.isfinite(r.err) and r.err > 0


def test_close_lines_are_separated_by_windows():
    centers = [{"f01": 5.000, "f02/2": 5.030}]
    freqs = np.arange(4.95, 5.08, 0.0005)
    scan = synthesize_scan([0.5], np.linspace(0.05, 1, 10), freqs, centers, noise=0.01, rng=2)
    table = extract_transitions(scan, _config(centers, [0.5], half_width=0.012))
    got = {r.label: r.freq for r in table.rows}
    assert got["f01"] == pytest.approx(5.000, abs=1e-3)
    assert got["f02/2"] == pytest.approx(5.030, abs=1e-3)


def test_failures_recorded_not_tabulated():
    freqs = np.arange(4.9, 5.1, 0.001)
    scan = synthesize_scan([0.0, 0.1], [0.5, 1.0], freqs, [{"f01": 5.0}, {}], noise=0.01, rng=3)
    cfg = _config([{"f01": 5.0}, {"f01": 5.0}], [0.0, 0.1])
    table = extract_transitions(scan, cfg)
    assert [r.phi_e_phi0 for r in table.rows] == [0.0]
    assert [(f.phi_e_phi0, f.label) for f in table.failures] == [(0.1, "f01")]


def test_empty_scan_gives_empty_table():
    scan = TwoToneScan(np.empty(0), [1.0], [5.0, 5.1], np.empty((0, 1, 2)))
    table = extract_transitions(scan, _config([{"f01": 5.05}], [0.0]))
    assert len(table) == 0 and not table.failures


def test_written_table_has_no_nan(tmp_path):
    freqs = np.arange(4.9, 5.1, 0.001)
    scan = synthesize_scan([0.0, 0.1], [0.5, 1.0], freqs, [{"f01": 5.0}, {}], noise=0.01, rng=3)
    table = extract_transitions(scan, _config([{"f01": 5.0}, {"f01": 5.0}], [0.0, 0.1]))
    _, rows = read_csv(table.to_csv(tmp_path / "t.csv"))
    assert all(v.lower() != "nan" and v != "" for row in rows for v in row)


# --------------------------------------------------------------------------
# coherence


def test_t1_recovery():
    t = np.linspace(0, 60, 61)
    rng = np.random.default_rng(4)
    y = 0.8 * np.exp(-t / 17.0) + 0.1 + rng.normal(0, 0.005, t.size)
    fit = fit_exponential_decay(t, y)
    assert fit.T1 == pytest.approx(17.0, abs=4 * fit.stderr["T1"])
    assert fit.stderr["T1"] < 0.5


def test_t1_degenerate_inputs():
    t = np.linspace(0, 10, 20)
    with pytest.raises(DegenerateFitError):
        fit_exponential_decay(t, np.ones_like(t))
    with pytest.raises(ConfigError):
        fit_exponential_decay(t[:3], t[:3])


def test_ramsey_recovery():
    t = np.linspace(0, 8, 161)
    rng = np.random.default_rng(6)
    y = 0.4 * np.exp(-t / 3.0) * np.cos(2 * np.pi * 1.3 * t + 0.3) + 0.5 + rng.normal(0, 0.01, t.size)
    fit = fit_ramsey(t, y)
    assert fit.detuning == pytest.approx(1.3, abs=0.01)
    assert fit.T2star == pytest.approx(3.0, rel=0.1)
    assert fit.phase == pytest.approx(0.3, abs=0.05)


def test_ramsey_without_oscillation_is_degenerate():
    t = np.linspace(0, 8, 100)
    with pytest.raises(DegenerateFitError):
        fit_ramsey(t, np.full_like(t, 0.5))
