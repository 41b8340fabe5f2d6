import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gfnoma.network import (ConfigError, NetworkConfig, dbm_to_watts, distance_cdf, distance_pdf,
                            intensity, joint_coefficients, received_power, sample_realization,
                            watts_to_dbm)


def test_units():
    assert dbm_to_watts(20) == pytest.approx(0.1)
    assert dbm_to_watts(-110) == pytest.approx(1e-14)
    assert watts_to_dbm(1e-3) == pytest.approx(0.0)


class TestConfig:
    def test_defaults_match_reference_cell(self, table1):
        assert (table1.n_devices, table1.preamble_len, table1.d0, table1.d1) == (240, 120, 10, 150)
        assert table1.tx_power == pytest.approx(dbm_to_watts(20))
        assert table1.noise_power == pytest.approx(dbm_to_watts(-110))

    @pytest.mark.parametrize("kw", [
        dict(d0=150.0), dict(d0=0.0), dict(alpha=2.0), dict(n_devices=1), dict(p_act=1.5),
        dict(c1=1.5), dict(c2=0.0), dict(c3=-1.0), dict(tx_power=0.0), dict(noise_power=-1.0),
        dict(antenna_eff=0.0), dict(m_subbands=7), dict(eps_tail=1.0), dict(preamble_len=0),
        dict(d1=math.inf),
    ])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ConfigError):
            NetworkConfig(**kw)

    def test_digest_is_stable_and_sensitive(self, table1):
        assert table1.digest() == NetworkConfig().digest()
        assert table1.digest() != table1.with_(alpha=4.5).digest()

    def test_area_gap(self, table1):
        assert table1.area_gap == 22400.0


class TestIntensity:
    def test_reference_cell(self, table1):
        assert intensity(table1) == pytest.approx(24.0)

    def test_silent(self, table1):
        assert intensity(table1.with_(p_act=0.0)) == 0.0

    def test_product(self):
        assert intensity(NetworkConfig(n_devices=1000, p_act=0.05)) == pytest.approx(50.0)


class TestDistanceLaw:
    def test_endpoints(self, table1):
        assert distance_cdf(table1, 10.0) == 0.0
        assert distance_cdf(table1, 150.0) == 1.0

    def test_interior_value(self, table1):
        assert distance_cdf(table1, 100.0) == pytest.approx(9900 / 22400, rel=1e-15)

    def test_pdf_integrates_to_cdf(self, table1):
        from gfnoma.specfun import integrate_adaptive
        got = integrate_adaptive(lambda r: distance_pdf(table1, r), 10.0, 100.0)
        assert got == pytest.approx(distance_cdf(table1, 100.0), rel=1e-12)

    def test_out_of_range(self, table1):
        with pytest.raises(ConfigError):
            distance_cdf(table1, 9.0)
        with pytest.raises(ConfigError):
            distance_pdf(table1, 151.0)


class TestSampling:
    def test_silent_network(self, table1):
        rng = np.random.default_rng(1)
        cfg = table1.with_(p_act=0.0)
        assert all(sample_realization(cfg, rng).k_active == 0 for _ in range(50))

    def test_count_moments_and_histogram(self, table1):
        rng = np.random.default_rng(2)
        k = np.array([sample_realization(table1, rng).k_active for _ in range(100_000)])
        assert abs(k.mean() - 24.0) < 3 * math.sqrt(24.0 / k.size)
        edges = np.arange(10, 40)
        obs = np.array([np.count_nonzero(k <= 10)] + [np.count_nonzero(k == e) for e in edges[1:]]
                       + [np.count_nonzero(k >= 40)])
        p = np.concatenate([[stats.poisson.cdf(10, 24)], stats.poisson.pmf(edges[1:], 24),
                            [stats.poisson.sf(39, 24)]])
        chi = stats.chisquare(obs, p * k.size)
        assert chi.pvalue > 0.01

    def test_distance_ks(self, table1):
        rng = np.random.default_rng(3)
        r = []
        while len(r) < 100_000:
            r.extend(sample_realization(table1, rng).distances.tolist())
        r = np.array(r[:100_000])
        ks = stats.kstest(r, lambda x: (np.clip(x, 10, 150) ** 2 - 100.0) / 22400.0)
        assert ks.statistic < 0.01

    def test_structure(self, table1):
        rng = np.random.default_rng(4)
        for _ in range(200):
            real = sample_realization(table1, rng)
            assert len(set(real.identities.tolist())) == real.k_active
            assert real.activity.sum() == real.k_active
            assert np.all((real.distances >= 10) & (real.distances <= 150))
            assert np.all(real.fading >= 0)

    def test_determinism(self, table1):
        a = sample_realization(table1, np.random.default_rng(7))
        b = sample_realization(table1, np.random.default_rng(7))
        for f in ("identities", "distances", "fading", "phases"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_count_never_exceeds_population(self):
        cfg = NetworkConfig(n_devices=3, p_act=1.0)
        rng = np.random.default_rng(5)
        assert max(sample_realization(cfg, rng).k_active for _ in range(500)) <= 3

    def test_fractional_population_rejected(self):
        with pytest.raises(ConfigError):
            sample_realization(NetworkConfig(n_devices=240.5), np.random.default_rng(0))


class TestReceivedPower:
    def test_zero_fading(self, table1):
        assert received_power(table1, 50.0, 0.0) == 0.0

    def test_near_edge_value(self, table1):
        assert received_power(table1, 10.0, 1.0) == pytest.approx(1e-5, rel=1e-14)

    def test_doubling_distance(self, table1):
        assert received_power(table1, 40.0, 1.0) == pytest.approx(received_power(table1, 20.0, 1.0) / 16)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(10, 149), st.floats(0.01, 1.0), st.floats(0, 10), st.floats(0.1, 10))
    def test_monotone_and_linear(self, r, dr, xi, k):
        cfg = NetworkConfig()
        p = received_power(cfg, r, xi)
        assert received_power(cfg, r + dr, xi) <= p
        assert received_power(cfg, r, k * xi) == pytest.approx(k * p, rel=1e-12, abs=1e-300)
        assert received_power(cfg.with_(tx_power=k * cfg.tx_power), r, xi) == pytest.approx(
            k * p, rel=1e-12, abs=1e-300)

    def test_phase_leaves_power_alone(self, table1):
        real = sample_realization(table1, np.random.default_rng(9))
        q = joint_coefficients(real, table1)
        assert np.allclose(np.abs(q[real.identities]) ** 2,
                           received_power(table1, real.distances, real.fading), rtol=1e-13)
        assert np.count_nonzero(q) == real.k_active
