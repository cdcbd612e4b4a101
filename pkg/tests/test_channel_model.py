import numpy as np
import pytest

from gmimo.channel_model import (
    ChannelSet,
    ObservationBlock,
    ScenarioConfig,
    check_assumptions,
    generate_channels,
    load_channels,
    load_known_channels,
    load_observations,
    sample_observations,
    save_channels,
    save_observations,
    scale_to_sir,
)
from gmimo.errors import ZeroInterference
from gmimo.matrix_core import RngStream, gram

from conftest import scenario


def _power(A):
    return float(np.vdot(A, A).real)


def test_scenario_shapes(reference_channels):
    ch = reference_channels
    assert ch.B.shape == (10, 4, 8)
    assert ch.G.shape == (10, 4, 12)
    assert ch.H.shape == (10, 4, 4)


def test_unit_sir_balances_power():
    ch = generate_channels(scenario(sir_db=0.0, seed=3))
    for H, B in zip(ch.H, ch.B):
        assert _power(B) == pytest.approx(_power(H), rel=1e-10)


def test_generation_is_deterministic():
    a = generate_channels(scenario(seed=5))
    b = generate_channels(scenario(seed=5))
    np.testing.assert_array_equal(a.H, b.H)
    np.testing.assert_array_equal(a.G, b.G)
    c = generate_channels(scenario(seed=6))
    assert not np.array_equal(a.H, c.H)


def test_more_slots_extend_the_sequence():
    short = generate_channels(scenario(T=3, seed=2))
    long = generate_channels(scenario(T=7, seed=2))
    np.testing.assert_array_equal(long.H[:3], short.H)
    np.testing.assert_array_equal(long.G[:3], short.G)


def test_gram_of_g_is_interference_plus_noise(reference_channels):
    ch = reference_channels
    for B, GG in zip(ch.B, ch.GG):
        np.testing.assert_allclose(GG, gram(B) + ch.sigma2 * np.eye(4), atol=1e-12)


def test_channels_are_read_only(reference_channels):
    with pytest.raises(ValueError):
        reference_channels.H[0, 0, 0] = 1.0


def test_scale_to_sir(rng):
    # tr(HH^H) = 4, tr(BB^H) = 1, ratio already 4
    B = np.array([[1.0, 0], [0, 0]])
    np.testing.assert_array_equal(scale_to_sir(np.eye(4)[:2, :4] * np.sqrt(2), B, 4.0), B)
    H = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    out = scale_to_sir(H, B, 10.0)
    assert _power(H) / _power(out) == pytest.approx(10.0, rel=1e-10)
    np.testing.assert_allclose(scale_to_sir(H, 7.5 * B, 10.0), out, rtol=1e-13)
    with pytest.raises(ZeroInterference):
        scale_to_sir(H, np.zeros((4, 8)), 1.0)
    with pytest.raises(ValueError):
        scale_to_sir(H, B, 0.0)


def test_observation_second_moment(reference_channels):
    ch = reference_channels
    M = 15
    S = np.stack([sample_observations(ch, M, RngStream(0, i)).sample_covariances()
                  for i in range(2000)])
    mean = S.mean(axis=0)
    se = S.std(axis=0) / np.sqrt(len(S))
    assert np.all(np.abs(mean - ch.GG) <= 5 * se + 1e-12)


def test_white_noise_observations():
    sigma2 = 0.3
    G = np.hstack([np.zeros((4, 2)), np.sqrt(sigma2) * np.eye(4)])[None]
    ch = ChannelSet(H=np.zeros((1, 4, 4)), G=G)
    M = 20000
    Y = sample_observations(ch, M, RngStream(1, 0)).Y[0]
    ratio = np.trace(Y @ Y.conj().T).real / (M * sigma2)
    assert ratio == pytest.approx(4.0, rel=0.02)


def test_observation_stream_advances(reference_channels):
    stream = RngStream(4, 0)
    a = sample_observations(reference_channels, 15, stream)
    b = sample_observations(reference_channels, 15, stream)
    assert not np.array_equal(a.Y, b.Y)


def test_check_assumptions(reference_channels):
    rep = check_assumptions(reference_channels, 15)
    assert rep.passed
    assert rep["lambda_min_GG>=sigma2"].passed
    assert rep["rank_H"].value["p"] == [4] * 10
    assert not check_assumptions(reference_channels, 4)["M>N"].passed


def test_rank_reported_for_thin_channel():
    ch = generate_channels(scenario(n0=2, seed=8))
    rep = check_assumptions(ch, 15)
    assert rep["rank_H"].value == {"p": [2] * 10, "strict_margin": True}


def test_scenario_validation():
    with pytest.raises(ValueError):
        scenario(M=4)
    with pytest.raises(ValueError):
        ScenarioConfig(N=4, n0=4, M=15, T=1, K=2, nk=(1,), sigma2=0.1, sir_linear=1.0)
    cfg = scenario()
    assert cfg.sigma2 == pytest.approx(0.1)
    assert cfg.n == 12


def test_directory_roundtrip(tmp_path, reference_channels):
    ch = reference_channels
    save_channels(ch, tmp_path / "ch", M=15)
    back = load_channels(tmp_path / "ch")
    np.testing.assert_array_equal(back.H, ch.H)
    np.testing.assert_array_equal(back.G, ch.G)
    assert back.sigma2 == ch.sigma2
    np.testing.assert_array_equal(load_known_channels(tmp_path / "ch"), ch.H)

    obs = sample_observations(ch, 15, RngStream(0, 0))
    save_observations(obs, tmp_path / "obs")
    np.testing.assert_array_equal(load_observations(tmp_path / "obs").Y, obs.Y)

    (tmp_path / "ch" / "H_1.cmat").write_text("4 3 complex\n" + "0+0i 0+0i 0+0i\n" * 4)
    with pytest.raises(ValueError):
        load_known_channels(tmp_path / "ch")


def test_observation_block_validation():
    with pytest.raises(ValueError):
        ObservationBlock(np.zeros((4, 15)))
