import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from spme_ident.excitation import (SOC_POINTS, CalibrationError, SignalError, SignalSpec,
                                   biased_sinusoid_current, calibrate_current_amplitude,
                                   clean_voltage, current_series, generate_dataset, load_dataset,
                                   local_signal, multiharmonic_current, peak_deviation,
                                   resolve_soc_point, save_dataset, soc_points, wide_signal)


# ------------------------------------------------------------------- signals

def test_local_defaults():
    s = local_signal()
    assert s.frequencies == (0.1, 1.0, 10.0, 100.0)
    assert s.fs == 4000.0 and s.n_samples == 40000


@given(st.lists(st.sampled_from([0.1, 1.0, 10.0, 100.0]), min_size=1, max_size=4,
                unique=True), st.floats(0.01, 50.0))
def test_multiharmonic_zero_mean_over_fundamental(freqs, amp):
    s = SignalSpec("multiharmonic", 4000.0, 1.0 / min(freqs), tuple(freqs), (amp,) * len(freqs))
    assert abs(multiharmonic_current(s).mean()) <= 1e-12 * amp * len(freqs)


def test_single_harmonic_is_pure_sine():
    s = SignalSpec("multiharmonic", 1000.0, 2.0, (3.0,), (2.5,))
    np.testing.assert_array_equal(multiharmonic_current(s), 2.5 * np.sin(2 * np.pi * 3.0 * s.time()))


def test_wide_signal_defaults():
    s = wide_signal()
    i = biased_sinusoid_current(s)
    assert i[0] == 24.0 and i.size == 1000
    assert i.mean() == pytest.approx(24.0, rel=1e-9)
    flat = biased_sinusoid_current(wide_signal(amplitude=0.0))
    np.testing.assert_array_equal(flat, 24.0)


def test_constant_signal():
    s = SignalSpec("constant", 1.0, 10.0, bias=-3.0)
    np.testing.assert_array_equal(current_series(s), -3.0)


@pytest.mark.parametrize("kwargs", [
    dict(kind="multiharmonic", fs=150.0, duration=10.0, frequencies=(0.1, 100.0),
         amplitudes=(1.0, 1.0)),
    dict(kind="multiharmonic", fs=4000.0, duration=5.0, frequencies=(0.1,), amplitudes=(1.0,)),
    dict(kind="biased-sinusoid", fs=1.0, duration=1000.0, frequencies=(1e-3, 2e-3),
         amplitudes=(1.0, 1.0)),
    dict(kind="square", fs=1.0, duration=1.0),
    dict(kind="multiharmonic", fs=10.0, duration=1.0, frequencies=(1.0,), amplitudes=()),
])
def test_invalid_specs(kwargs):
    with pytest.raises(SignalError):
        SignalSpec(**kwargs)


def test_generator_rejects_wrong_kind():
    with pytest.raises(SignalError):
        multiharmonic_current(wide_signal())
    with pytest.raises(SignalError):
        biased_sinusoid_current(local_signal())


def test_spec_dict_round_trip():
    s = local_signal(0.25)
    assert SignalSpec.from_dict(s.to_dict()) == s


# ---------------------------------------------------------------- SoC points

def test_soc_points_table():
    pts = soc_points()
    assert len(pts) == 11
    assert pts[0] == (0.80, 0.51) and pts[-1] == (0.19, 0.87)
    steps = np.diff([p[0] for p in pts])
    assert np.all((steps >= -0.0700001) & (steps <= -0.0599999))
    assert steps.mean() == pytest.approx(-0.061)
    assert resolve_soc_point(3) == SOC_POINTS[2]
    assert resolve_soc_point((0.5, 0.6)) == (0.5, 0.6)
    with pytest.raises(ValueError):
        resolve_soc_point(12)


# ---------------------------------------------------------------- calibration

@pytest.fixture(scope="module")
def calibrated(params):
    return calibrate_current_amplitude(0.008, 6, params)


def test_calibration_hits_target(calibrated, params, theta):
    _, v = clean_voltage(local_signal(calibrated), 6, theta, params)
    assert 7.84e-3 <= peak_deviation(v) <= 8.16e-3


def test_calibration_near_linear(calibrated, params):
    half = calibrate_current_amplitude(0.004, 6, params)
    assert half == pytest.approx(0.5 * calibrated, rel=0.05)


@pytest.mark.parametrize("target", [0.0, -1e-3])
def test_calibration_rejects_degenerate_target(target, params):
    with pytest.raises(CalibrationError):
        calibrate_current_amplitude(target, 6, params)


def test_calibration_unreachable_target(params):
    with pytest.raises(CalibrationError):
        calibrate_current_amplitude(0.008, 6, params, max_amplitude=0.01)


def test_zero_bias_response_returns_to_rest(calibrated, params, theta):
    s = local_signal(calibrated, duration=20.0)
    _, v = clean_voltage(s, 6, theta, params)
    assert abs(v[40000] - v[0]) < 1e-3


# ------------------------------------------------------------------- datasets

def _small_signal():
    return local_signal(0.2, fs=400.0, duration=10.0, frequencies=(0.1, 1.0, 10.0))


def test_reference_noise_level(params, theta):
    ds = generate_dataset(_small_signal(), 6, theta, params, 1.0, 7, response_amplitude=0.008)
    assert ds.sigma2 == pytest.approx(1.6e-9, rel=1e-12)


def test_zero_noise_is_identity(params, theta):
    ds = generate_dataset(_small_signal(), 6, theta, params, 0.0, 7)
    np.testing.assert_array_equal(ds.v_noisy, ds.v_clean)
    assert ds.sigma2 == 0.0


def test_same_seed_same_bytes(tmp_path, params, theta):
    paths = []
    for k in range(2):
        ds = generate_dataset(_small_signal(), 6, theta, params, 1.0, 99)
        paths.append(save_dataset(ds, tmp_path / f"d{k}"))
    for a, b in zip(*paths):
        assert a.read_bytes() == b.read_bytes()
    other = generate_dataset(_small_signal(), 6, theta, params, 1.0, 100)
    assert not np.array_equal(other.v_noisy, ds.v_noisy)


def test_dataset_round_trip_bit_exact(tmp_path, params, theta):
    ds = generate_dataset(_small_signal(), (0.43, 0.73), theta, params, 1.0, 3, label="x")
    save_dataset(ds, tmp_path / "x")
    back = load_dataset(tmp_path / "x.csv")
    for col in ("t", "current", "v_clean", "v_noisy"):
        assert getattr(back, col).tobytes() == getattr(ds, col).tobytes()
    assert (back.sigma2, back.seed, back.label, back.x_n0, back.x_p0) == \
        (ds.sigma2, ds.seed, ds.label, ds.x_n0, ds.x_p0)
    assert back.signal == ds.signal and back.theta_true == ds.theta_true
    assert back.node_counts == ds.node_counts


def test_sample_variance_and_normality(params, theta):
    s = SignalSpec("constant", 100.0, 1000.0, bias=0.0)
    ds = generate_dataset(s, 6, theta, params, 1.0, 2024, response_amplitude=0.008)
    noise = ds.v_noisy - ds.v_clean
    assert noise.size >= 100_000
    assert noise.var() == pytest.approx(ds.sigma2, rel=0.2)
    assert abs(stats.skew(noise)) < 0.1
    assert abs(stats.kurtosis(noise)) < 0.2


def test_negative_noise_rejected(params, theta):
    with pytest.raises(ValueError):
        generate_dataset(_small_signal(), 6, theta, params, -1.0, 0)
