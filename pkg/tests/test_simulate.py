from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farsm.errors import ConfigError
from farsm.simulate import (PURPOSE_BENCH, BerPoint, SimConfig,
                            portsel_benchmark, ratio_histogram,
                            ratio_histograms, run_ber_sweep,
                            run_ber_sweep_multi, run_trial, stream_id,
                            wilson_interval, worker_count, write_ber_csv)

FAST = dict(snr_db=(2.0,), portsel="tmd")


def test_wilson_frozen_values():
    lo, hi = wilson_interval(5, 1000)
    assert lo == pytest.approx(0.0021375355273244599, rel=1e-12)
    assert hi == pytest.approx(0.011650955373375113, rel=1e-12)
    lo0, hi0 = wilson_interval(0, 1000)
    assert lo0 == 0.0
    assert hi0 == pytest.approx(0.0038267584855551241, rel=1e-12)
    lo1, hi1 = wilson_interval(1000, 1000)
    assert hi1 == 1.0 and lo1 == pytest.approx(1 - hi0, rel=1e-12)


@given(errors=st.integers(0, 500), extra=st.integers(0, 10_000))
def test_wilson_brackets_the_estimate(errors, extra):
    n = 500 + extra
    lo, hi = wilson_interval(errors, n)
    assert 0.0 <= lo <= errors / n <= hi <= 1.0


def test_stream_id_layout():
    assert stream_id(0) == 0
    assert stream_id(5, redraw=1) == 5 + (1 << 40)
    assert stream_id(5, redraw=0, purpose=PURPOSE_BENCH) == 5 + (2 << 48)
    with pytest.raises(ValueError):
        stream_id(1 << 40)
    with pytest.raises(ValueError):
        stream_id(0, redraw=256)


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="N_a must be >= N_r"):
        SimConfig(n_a=2, n_r=4).validate()
    with pytest.raises(ConfigError, match="power of two"):
        SimConfig(n_r=3).validate()
    with pytest.raises(ConfigError, match="mod_order"):
        SimConfig(mod_order=8).validate()
    with pytest.raises(ConfigError, match="N > N_b > N_a"):
        SimConfig(portsel="mce-tmd", n_b=16).validate()
    with pytest.raises(ConfigError, match="N_a=5 exceeds the port count"):
        SimConfig(n1=2, n2=2, n_a=5, n_r=4).validate()
    with pytest.raises(ConfigError, match="tmd or mce-tmd"):
        SimConfig(n1=5, n2=5, portsel="optimal").validate()
    with pytest.raises(ConfigError, match="select_snr_db is required"):
        SimConfig(precoder="mmse", portsel="optimal").validate()
    with pytest.raises(ConfigError, match="gamma"):
        SimConfig(gamma=1.5).validate()
    with pytest.raises(ConfigError, match="SNR point"):
        SimConfig(snr_db=()).validate()
    # valid default passes and returns itself
    cfg = SimConfig()
    assert cfg.validate() is cfg


def test_variant_names():
    assert SimConfig().variant == "fa-rsm-zf-optimal-mld"
    assert SimConfig(baseline=True, precoder="mmse",
                     detector="rttd").variant == "rsm-mmse-rttd"


def test_bits_accounting():
    cfg = SimConfig(mod_order=16, n_r=4)
    assert cfg.bits_per_use == 6
    sw = run_ber_sweep(replace(cfg, **FAST, trials=600))
    assert sw.points[0].bits == 600 * 6
    assert sw.points[0].trials == 600


def test_sweep_is_deterministic():
    cfg = SimConfig(**FAST, trials=600)
    a = run_ber_sweep(cfg)
    b = run_ber_sweep(cfg)
    assert a == b


def test_seed_changes_results():
    a = run_ber_sweep(SimConfig(**FAST, trials=2000, master_seed=0))
    b = run_ber_sweep(SimConfig(**FAST, trials=2000, master_seed=1))
    assert a.points[0].bit_errors != b.points[0].bit_errors


def test_thread_count_does_not_change_results(monkeypatch):
    cfg = SimConfig(trials=5000, snr_db=(0.0, 6.0), portsel="tmd")
    monkeypatch.delenv("FARSM_THREADS", raising=False)
    serial = run_ber_sweep(cfg)
    monkeypatch.setenv("FARSM_THREADS", "4")
    assert worker_count() == 4
    threaded = run_ber_sweep(cfg)
    assert serial == threaded


def test_worker_count_rejects_garbage(monkeypatch):
    monkeypatch.setenv("FARSM_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.setenv("FARSM_THREADS", "-2")
    with pytest.raises(ConfigError):
        worker_count()


def test_run_trial_matches_sweep_counts():
    cfg = SimConfig(trials=128, snr_db=(4.0,), portsel="mce-tmd",
                    precoder="mmse", detector="rttd")
    sweep = run_ber_sweep(cfg)
    errors = 0
    for t in range(cfg.trials):
        res = run_trial(cfg, 4.0, t)
        errors += int(np.sum(res.tx_bits != res.rx_bits))
    assert errors == sweep.points[0].bit_errors


def test_run_trial_is_reproducible():
    cfg = SimConfig(portsel="tmd")
    a = run_trial(cfg, 3.0, 41)
    b = run_trial(cfg, 3.0, 41)
    assert np.array_equal(a.tx_bits, b.tx_bits)
    assert np.array_equal(a.rx_bits, b.rx_bits)


def test_multi_detector_equals_single_runs():
    cfg = SimConfig(trials=1500, snr_db=(5.0,), precoder="mmse",
                    portsel="tmd")
    multi = run_ber_sweep_multi(cfg, ("mld", "med", "rttd"))
    for det, sweep in multi.items():
        single = run_ber_sweep(replace(cfg, detector=det))
        assert sweep == single


def test_ber_monotone_in_snr_smoke():
    sw = run_ber_sweep(SimConfig(trials=4000, snr_db=(0.0, 6.0, 12.0),
                                 portsel="tmd"))
    bers = [p.ber for p in sw.points]
    assert bers[0] > bers[-1]


def test_noiseless_mode_is_error_free():
    # 200 dB SNR: noise scaled by 1e-10, far below any decision boundary
    sw = run_ber_sweep(SimConfig(trials=400, snr_db=(200.0,), portsel="tmd",
                                 mod_order=64))
    assert sw.points[0].bit_errors == 0
    assert sw.points[0].ci_low == 0.0


def test_ratio_histograms_counts_and_edges():
    cfg = SimConfig(trials=2000, snr_db=(-5.0, 10.0), precoder="mmse",
                    portsel="tmd", bins=20)
    hists = ratio_histograms(cfg)
    assert len(hists) == 2
    for h in hists:
        assert h.counts.sum() == h.total == 2000
        assert h.bin_edges.shape == (21,)
        assert (np.diff(h.bin_edges) > 0).all()
        assert h.bin_edges[0] == 0.0 and h.bin_edges[-1] == 1.0
        assert 0.0 <= h.median <= 1.0
    # low SNR skews high, high SNR skews low
    assert hists[0].median > hists[1].median


def test_ratio_histogram_single_point_wrapper():
    cfg = SimConfig(precoder="mmse", portsel="tmd", bins=10)
    h = ratio_histogram(cfg, -5.0, 800)
    assert h.snr_db == -5.0
    assert h.total == 800


def test_ratio_histogram_requires_mmse():
    with pytest.raises(ConfigError, match="MMSE"):
        ratio_histograms(SimConfig(trials=10, precoder="zf", portsel="tmd"))


def test_baseline_has_no_selection_and_higher_errors():
    cfg = SimConfig(trials=5000, snr_db=(8.0,), portsel="tmd")
    fa = run_ber_sweep(cfg)
    bl = run_ber_sweep(replace(cfg, baseline=True))
    assert bl.variant == "rsm-zf-mld"
    assert bl.points[0].bit_errors > fa.points[0].bit_errors


def test_wide_aperture_first_ports_match_baseline():
    # W1=W2=50: ports decorrelate, so taking the first N_a ports is the
    # i.i.d. system in distribution; compare via confidence intervals
    cfg = SimConfig(trials=20_000, snr_db=(4.0,), w1=50.0, w2=50.0,
                    portsel="first")
    fa = run_ber_sweep(cfg).points[0]
    bl = run_ber_sweep(replace(cfg, baseline=True)).points[0]
    assert fa.ci_low < bl.ci_high and bl.ci_low < fa.ci_high


def test_write_ber_csv_schema(tmp_path):
    sw = run_ber_sweep(SimConfig(**FAST, trials=600))
    path = tmp_path / "out.csv"
    with open(path, "w") as fh:
        write_ber_csv(fh, [sw])
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "variant,snr_db,trials,bits,bit_errors,ber,ci_low,ci_high"
    row = lines[1].split(",")
    assert row[0] == "fa-rsm-zf-tmd-mld"
    assert int(row[4]) == sw.points[0].bit_errors


def test_berpoint_consistency():
    sw = run_ber_sweep(SimConfig(**FAST, trials=1000))
    p = sw.points[0]
    assert isinstance(p, BerPoint)
    assert p.ber == p.bit_errors / p.bits
    assert p.ci_low <= p.ber <= p.ci_high
    assert p.symbol_errors <= p.trials
    assert p.bit_errors <= p.symbol_errors * SimConfig().bits_per_use


def test_portsel_benchmark_counts():
    rows = portsel_benchmark(SimConfig(), repeats=5)
    by_name = {r.algorithm: r for r in rows}
    assert by_name["optimal"].evaluations == 1820
    assert by_name["tmd"].evaluations == 12
    assert by_name["mce-tmd"].evaluations == 12
    for r in rows:
        assert r.median_seconds > 0


def test_dump_channels_hook(tmp_path):
    path = tmp_path / "chan.csv"
    cfg = SimConfig(trials=3, snr_db=(5.0,), portsel="tmd",
                    dump_channels=str(path))
    run_ber_sweep(cfg)
    rows = np.loadtxt(path, delimiter=",")
    assert rows.shape == (3 * 4 * 16, 5)
    assert set(rows[:, 0]) == {0.0, 1.0, 2.0}
