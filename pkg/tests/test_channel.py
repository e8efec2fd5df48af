"""Channel models, capacity, and information density."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlf.channel import (
    Dmc,
    GaussianChannel,
    bsc,
    capacity,
    control_pair,
    entropy,
    gaussian_information_density,
    information_density_table,
    kl_divergence,
    load_dmc,
    mutual_information,
    output_distribution,
    parse_channel_spec,
)
from vlf.errors import NotADistribution, VlfError

UNIFORM2 = np.array([0.5, 0.5])


def _h2(p):
    return -p * math.log(p) - (1 - p) * math.log1p(-p)


def _random_dist(draw_floats):
    v = np.array(draw_floats, dtype=float) + 1e-9
    return v / v.sum()


class TestEntropyAndDivergence:
    def test_uniform_entropy_is_log_alphabet_size(self):
        for k in (2, 3, 7):
            assert entropy(np.full(k, 1.0 / k)) == pytest.approx(math.log(k))

    def test_point_mass_entropy_is_zero(self):
        assert entropy(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0)

    def test_divergence_of_identical_distributions_is_zero(self):
        p = np.array([0.2, 0.3, 0.5])
        assert kl_divergence(p, p) == pytest.approx(0.0)

    @given(
        st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
        st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
    )
    @settings(max_examples=50, deadline=None)
    def test_divergence_is_nonnegative(self, a, b):
        p, q = _random_dist(a), _random_dist(b)
        assert kl_divergence(p, q) >= -1e-12

    def test_divergence_known_value(self):
        p = np.array([0.89, 0.11])
        q = np.array([0.11, 0.89])
        expect = 0.78 * math.log(0.89 / 0.11)
        assert kl_divergence(p, q) == pytest.approx(expect, rel=1e-12)


class TestCapacity:
    def test_binary_symmetric_capacity_formula(self):
        c, px = capacity(bsc(0.11))
        assert c == pytest.approx(math.log(2) - _h2(0.11), abs=1e-9)
        assert c == pytest.approx(0.3466318436, abs=1e-9)
        np.testing.assert_allclose(px, UNIFORM2, atol=1e-6)

    def test_capacity_matches_mutual_information_at_its_input(self):
        dmc = Dmc(np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]))
        c, px = capacity(dmc)
        assert mutual_information(px, dmc) == pytest.approx(c, abs=1e-8)

    def test_capacity_dominates_any_fixed_input(self):
        dmc = Dmc(np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]))
        c, _ = capacity(dmc)
        for px in ([0.5, 0.5], [0.9, 0.1], [0.2, 0.8]):
            assert mutual_information(np.array(px), dmc) <= c + 1e-9

    def test_gaussian_capacity(self):
        assert GaussianChannel(1.0).capacity == pytest.approx(
            0.5 * math.log(2.0)
        )
        assert GaussianChannel(3.0, 1.5).snr == pytest.approx(2.0)


class TestMutualInformation:
    def test_identical_rows_give_zero(self):
        dmc = Dmc(np.array([[0.3, 0.7], [0.3, 0.7]]))
        assert mutual_information(UNIFORM2, dmc) == pytest.approx(0.0, abs=1e-12)

    def test_near_noiseless_channel_approaches_log_alphabet(self):
        dmc = bsc(1e-9)
        assert mutual_information(UNIFORM2, dmc) == pytest.approx(
            math.log(2), abs=1e-7
        )

    def test_mean_information_density_is_mutual_information(self):
        dmc = bsc(0.11)
        dens = information_density_table(UNIFORM2, dmc)
        joint = UNIFORM2[:, None] * dmc.matrix
        assert float((joint * dens).sum()) == pytest.approx(
            mutual_information(UNIFORM2, dmc), abs=1e-12
        )

    def test_output_distribution_marginalizes_joint(self):
        dmc = Dmc(np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]))
        px = np.array([0.4, 0.6])
        np.testing.assert_allclose(
            output_distribution(px, dmc), px @ dmc.matrix
        )


class TestControlPair:
    def test_binary_symmetric_pair_and_divergence(self):
        xa, xr, d = control_pair(bsc(0.11))
        assert {xa, xr} == {0, 1}
        assert d == pytest.approx(1.6307780556, abs=1e-9)

    def test_pair_maximizes_divergence(self):
        dmc = Dmc(np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.4, 0.4, 0.2]]))
        xa, xr, d = control_pair(dmc)
        best = max(
            kl_divergence(dmc.matrix[i], dmc.matrix[j])
            for i in range(3)
            for j in range(3)
            if i != j
        )
        assert d == pytest.approx(best, abs=1e-12)


class TestGaussianInformationDensity:
    def test_mean_density_matches_capacity_by_quadrature(self):
        chan = GaussianChannel(1.0)
        # E over x ~ N(0, P), y = x + z: two-dimensional Gauss-Hermite grid
        from numpy.polynomial.hermite_e import hermegauss

        nodes, weights = hermegauss(80)
        weights = weights / math.sqrt(2 * math.pi)
        x = nodes[:, None] * math.sqrt(chan.power)
        z = nodes[None, :] * math.sqrt(chan.noise_variance)
        dens = np.vectorize(gaussian_information_density)(chan, x, x + z)
        mean = float((weights[:, None] * weights[None, :] * dens).sum())
        assert mean == pytest.approx(chan.capacity, abs=1e-6)

    def test_density_is_symmetric_in_sign(self):
        chan = GaussianChannel(2.0)
        a = gaussian_information_density(chan, 1.3, 0.4)
        b = gaussian_information_density(chan, -1.3, -0.4)
        assert a == pytest.approx(b, rel=1e-12)


class TestParsingAndValidation:
    def test_parse_bsc_and_awgn(self):
        ch = parse_channel_spec("bsc:0.11")
        assert isinstance(ch, Dmc)
        np.testing.assert_allclose(ch.matrix, [[0.89, 0.11], [0.11, 0.89]])
        g = parse_channel_spec("awgn:2.5")
        assert isinstance(g, GaussianChannel)
        assert g.snr == pytest.approx(2.5)

    def test_parse_dmc_file_roundtrip(self, tmp_path):
        path = tmp_path / "chan.csv"
        path.write_text("0.7 0.2 0.1\n0.1 0.3 0.6\n")
        ch = parse_channel_spec(f"dmc:{path}")
        np.testing.assert_allclose(
            ch.matrix, [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]
        )

    def test_bad_specs_raise(self, tmp_path):
        for spec in ("noise:0.1", "bsc:1.2", "awgn:-1", "bsc:abc", "bsc"):
            with pytest.raises(VlfError):
                parse_channel_spec(spec)
        bad = tmp_path / "bad.csv"
        bad.write_text("0.5 0.4\n0.5 0.5\n")
        with pytest.raises(VlfError):
            load_dmc(str(bad))

    def test_dmc_rejects_nonstochastic_matrices(self):
        with pytest.raises(NotADistribution):
            Dmc(np.array([[0.5, 0.6], [0.5, 0.5]]))
        with pytest.raises(VlfError):
            Dmc(np.array([[1.0, 0.0], [0.0, 1.0]]))  # zeros break log kernels

    def test_gaussian_rejects_bad_parameters(self):
        with pytest.raises(VlfError):
            GaussianChannel(0.0)
        with pytest.raises(VlfError):
            GaussianChannel(1.0, -1.0)
