import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excavator_dynamics.errors import BadBand, EpisodeTooShort, MalformedEpisode, RankDeficient, TooShort
from excavator_dynamics.hydraulics import PressurePair
from excavator_dynamics.kinematics import JointAngles, JointRates
from excavator_dynamics.signals import (
    AlignedSample,
    Episode,
    band_power,
    derive_accelerations,
    polyfit,
    psd,
    read_episode_csv,
    write_episode_csv,
)

RATE = 50.0


def make_episode(qd_boom, q_boom=None, n=None, payload=None, rate=RATE, metadata=None):
    qd_boom = np.asarray(qd_boom, dtype=float)
    n = qd_boom.size if n is None else n
    t = np.arange(n) / rate
    q_boom = np.cumsum(qd_boom) / rate if q_boom is None else q_boom
    rng = np.random.default_rng(0)
    return Episode(
        t=t,
        q=JointAngles(q_boom, -1.5 + 0 * t, -1.0 + 0 * t, 0 * t),
        qd=JointRates(qd_boom, 0.2 * np.sin(t), 0 * t, 0.1 + 0 * t),
        pressures={
            "boom": PressurePair(1e7 + rng.normal(0, 1e4, n), 5e5 + 0 * t),
            "stick": PressurePair(5e5 + 0 * t, 8e6 + rng.normal(0, 1e4, n)),
        },
        payload=payload,
        metadata=metadata or {},
    )


# acceleration fit ------------------------------------------------------------

def test_constant_velocity_gives_zero_acceleration():
    ep = make_episode(np.full(40, 0.3))
    al = derive_accelerations(ep)
    np.testing.assert_allclose(al.qdd.boom, 0.0, atol=1e-12)
    np.testing.assert_allclose(al.q.boom, np.convolve(ep.q.boom, np.ones(5) / 5, "valid"), rtol=1e-12)
    assert len(al) == len(ep) - 4


@pytest.mark.parametrize("k", [-2.0, 0.1, 3.5])
def test_velocity_ramp_slope_is_exact(k):
    t = np.arange(60) / RATE
    al = derive_accelerations(make_episode(k * t))
    np.testing.assert_allclose(al.qdd.boom, k, rtol=1e-10)


def test_sinusoid_derivative_within_two_percent():
    t = np.arange(500) / RATE
    w = 2 * np.pi * 1.0
    al = derive_accelerations(make_episode(np.sin(w * t)))
    err = al.qdd.boom - w * np.cos(w * al.t)
    assert np.max(np.abs(err)) < 0.02 * w


def test_pressures_and_timestamps_are_window_means():
    ep = make_episode(np.linspace(0, 1, 30))
    al = derive_accelerations(ep, window=5)
    np.testing.assert_allclose(al.t, ep.t[2:-2], rtol=1e-12)
    np.testing.assert_allclose(al.pressures["boom"].p1, np.convolve(ep.pressures["boom"].p1, np.ones(5) / 5, "valid"))


def test_aligned_episode_indexing():
    al = derive_accelerations(make_episode(np.linspace(0, 1, 30)))
    s = al[3]
    assert isinstance(s, AlignedSample)
    assert s.qdd.boom == pytest.approx(al.qdd.boom[3])


def test_too_short_for_window():
    with pytest.raises(EpisodeTooShort):
        derive_accelerations(make_episode(np.zeros(4)))


@settings(max_examples=50, deadline=None)
@given(c=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_acceleration_unchanged_by_velocity_offset(c, seed):
    v = np.random.default_rng(seed).normal(size=30)
    a = derive_accelerations(make_episode(v)).qdd.boom
    b = derive_accelerations(make_episode(v + c)).qdd.boom
    np.testing.assert_allclose(a, b, atol=1e-9)


# episodes --------------------------------------------------------------------

def test_episode_needs_two_samples():
    with pytest.raises(EpisodeTooShort):
        make_episode(np.zeros(1))


def test_episode_rejects_non_monotone_time():
    ep = make_episode(np.zeros(10))
    with pytest.raises(MalformedEpisode):
        Episode(t=ep.t[::-1], q=ep.q, qd=ep.qd, pressures=ep.pressures)


def test_episode_rejects_irregular_sampling():
    ep = make_episode(np.zeros(10))
    t = ep.t.copy()
    t[5] += 0.003
    with pytest.raises(MalformedEpisode):
        Episode(t=t, q=ep.q, qd=ep.qd, pressures=ep.pressures)


# spectra ---------------------------------------------------------------------

def test_psd_tone_peak():
    t = np.arange(2048) / RATE
    s = psd(np.sin(2 * np.pi * 2.0 * t), RATE)
    df = s.freqs[1] - s.freqs[0]
    assert abs(s.freqs[np.argmax(s.power)] - 2.0) <= df


def test_psd_white_noise_parseval():
    x = np.random.default_rng(1).normal(0, 1.7, 20000)
    s = psd(x, RATE)
    assert band_power(s, 0.0, RATE / 2) == pytest.approx(1.7**2, rel=0.1)


def test_psd_zero_signal():
    s = psd(np.zeros(300), RATE)
    assert np.all(s.power == 0)


def test_psd_too_short():
    with pytest.raises(TooShort):
        psd(np.zeros(63), RATE)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(-100, 100), seed=st.integers(0, 100))
def test_psd_scales_quadratically(k, seed):
    x = np.random.default_rng(seed).normal(size=400)
    np.testing.assert_allclose(psd(k * x, RATE).power, k**2 * psd(x, RATE).power, rtol=1e-9, atol=1e-300)


def test_band_power_tone_inside_and_outside():
    t = np.arange(4096) / RATE
    tone = np.sin(2 * np.pi * 1.5 * t)
    s = psd(tone, RATE)
    assert band_power(s, 0.5, 3.0) == pytest.approx(0.5, rel=0.02)
    far = psd(np.sin(2 * np.pi * 10.0 * t), RATE)
    assert band_power(far, 0.5, 3.0) < 1e-4 * 0.5


def test_band_power_zero_width():
    s = psd(np.random.default_rng(2).normal(size=500), RATE)
    assert band_power(s, 1.3, 1.3) == 0.0


@pytest.mark.parametrize("lo, hi", [(-0.1, 1.0), (2.0, 1.0), (1.0, 30.0)])
def test_band_power_bad_band(lo, hi):
    s = psd(np.random.default_rng(2).normal(size=500), RATE)
    with pytest.raises(BadBand):
        band_power(s, lo, hi)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0, 8), b=st.floats(0, 8), c=st.floats(0, 8))
def test_band_power_additive(a, b, c):
    lo, mid, hi = sorted((a, b, c))
    s = psd(np.random.default_rng(3).normal(size=600), RATE)
    total = band_power(s, lo, hi)
    assert band_power(s, lo, mid) + band_power(s, mid, hi) == pytest.approx(total, rel=1e-9, abs=1e-15)


# polynomial fits --------------------------------------------------------------

def test_polyfit_exact_quadratic():
    x = np.linspace(-0.6, 0.8, 40)
    p = polyfit(x, 2.0 - 3.0 * x + 0.5 * x**2, 2)
    np.testing.assert_allclose(p.coef, [2.0, -3.0, 0.5], atol=1e-9)


def test_polyfit_constant():
    x = np.linspace(0, 1, 20)
    p = polyfit(x, np.full(20, 4.2), 2)
    np.testing.assert_allclose(p.coef[0], 4.2, rtol=1e-12)
    np.testing.assert_allclose(p.coef[1:], 0.0, atol=1e-9)


def test_polyfit_noisy_line_slope():
    rng = np.random.default_rng(5)
    x = np.linspace(0, 10, 1000)
    sigma = 0.3
    y = 1.0 + 0.7 * x + rng.normal(0, sigma, x.size)
    slope = polyfit(x, y, 1).coef[1]
    se = sigma / np.sqrt(np.sum((x - x.mean()) ** 2))
    assert abs(slope - 0.7) < 3 * se


def test_polyfit_rank_deficient():
    with pytest.raises(RankDeficient):
        polyfit(np.ones(10), np.arange(10.0), 1)


# CSV -------------------------------------------------------------------------

def test_csv_round_trip_bit_exact(tmp_path):
    v = np.random.default_rng(6).normal(size=50)
    ep = make_episode(v, payload=np.full(50, 512.5), metadata={"machine_id": "x", "seed": "3"})
    path = tmp_path / "ep.csv"
    write_episode_csv(ep, path)
    back = read_episode_csv(path)
    np.testing.assert_array_equal(back.t, ep.t)
    np.testing.assert_array_equal(back.qd.boom, ep.qd.boom)
    np.testing.assert_array_equal(back.pressures["stick"].p2, ep.pressures["stick"].p2)
    assert back.true_payload == 512.5
    assert back.metadata["machine_id"] == "x"
    write_episode_csv(back, tmp_path / "again.csv")
    data = lambda p: [line for line in p.read_text().splitlines() if not line.startswith("#")]
    assert data(tmp_path / "again.csv") == data(path)


def test_csv_header_columns(tmp_path):
    path = tmp_path / "ep.csv"
    write_episode_csv(make_episode(np.zeros(5)), path)
    header = path.read_text().splitlines()[0]
    assert header == (
        "t,theta_boom,theta_stick,theta_bucket,theta_cab,omega_boom,omega_stick,omega_bucket,"
        "omega_cab,p1_boom,p2_boom,p1_stick,p2_stick"
    )


@pytest.mark.parametrize(
    "text",
    [
        "",
        "t,theta_boom\n0,1\n",
        "t,theta_boom,theta_stick,theta_bucket,theta_cab,omega_boom,omega_stick,omega_bucket,omega_cab,"
        "p1_boom,p2_boom,p1_stick,p2_stick\n0,1,2,3,4,5,6,7,8,9,10,11,x\n",
    ],
)
def test_csv_malformed(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises((MalformedEpisode, EpisodeTooShort)):
        read_episode_csv(path)
