import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tmsqkd.errors import UnphysicalStateError
from tmsqkd.protocol import (
    ChannelParams,
    DetectorParams,
    ProtocolParams,
    alice_bob_covariance,
    apply_channel,
    bob_detection,
    distance_to_transmittance,
    lossy_channel,
    mutual_information,
    optimal_gain_pure,
    transmittance_to_distance,
)
from tmsqkd.states import EprSpec, two_mode_squeezed_vacuum
from tmsqkd.symplectic import apply_symplectic, beamsplitter, direct_sum, submatrix

params = st.builds(
    ProtocolParams,
    V0=st.floats(0.05, 1.0),
    delta_V0=st.floats(0.0, 30.0),
    delta_V=st.floats(0.0, 200.0),
    g=st.floats(0.0, 1.5),
)


def gaussian_mi_oracle(gamma, q):
    # I = H(A) + H(B) - H(A, B) for the classical Gaussian pair in quadrature q
    idx = [q, 2 + q]
    cov = gamma[np.ix_(idx, idx)]
    return 0.5 * np.log2(cov[0, 0] * cov[1, 1] / np.linalg.det(cov))


def dilated_channel(gamma, eta, eps):
    # entangling cloner: Bob's mode meets one arm of an EPR pair on a beamsplitter
    w = 1 + eta * eps / (1 - eta)
    full = direct_sum(gamma, two_mode_squeezed_vacuum(w))
    out = apply_symplectic(full, beamsplitter(eta, 1, 2, 4))
    return submatrix(out, [0, 1])


class TestAliceBob:
    def test_coherent(self):
        g = alice_bob_covariance(ProtocolParams.coherent(3.0))
        assert np.allclose(np.diag(g), [3, 3, 4, 4])
        assert g[0, 2] == 3 and g[1, 3] == -3

    def test_coherent_textbook_model(self):
        dv = 7.3
        textbook = np.block([[dv * np.eye(2), dv * np.diag([1, -1])],
                             [dv * np.diag([1, -1]), (dv + 1) * np.eye(2)]])
        assert np.allclose(alice_bob_covariance(ProtocolParams.coherent(dv)), textbook, atol=1e-12)

    def test_pure_epr_gain_one(self):
        g = alice_bob_covariance(ProtocolParams(V0=0.5, g=1.0))
        assert np.isclose(g[0, 0], 1.25) and np.isclose(g[2, 2], 1.25)
        assert np.isclose(g[0, 2], 0.75) and np.isclose(g[1, 3], -0.75)

    def test_optimal_gain_correlation(self):
        assert np.isclose(alice_bob_covariance(ProtocolParams(V0=0.5, g=0.6))[0, 2], 0.45)

    def test_validation(self):
        with pytest.raises(ValueError):
            ProtocolParams(V0=1.5)
        with pytest.raises(ValueError):
            ProtocolParams(g=2.0)
        with pytest.raises(ValueError):
            ProtocolParams(delta_V=-1)

    def test_total_modulation(self):
        p = ProtocolParams.from_source(EprSpec(3.5, 8.2)).with_total_modulation(23.4)
        assert np.isclose(p.total_modulation, 23.4)
        assert np.isclose(p.delta_V, 23.4 - (p.v_epr - 1))
        with pytest.raises(ValueError):
            p.with_total_modulation(1.0)

    @given(params)
    def test_weighted_data_covariance_is_psd(self, p):
        # Alice's weighted record is classical data: a valid covariance,
        # though not necessarily a quantum state
        assert np.linalg.eigvalsh(alice_bob_covariance(p)).min() >= -1e-9 * p.delta_V - 1e-12


class TestOptimalGain:
    def test_values(self):
        assert optimal_gain_pure(1.0) == 0.0
        assert np.isclose(optimal_gain_pure(1.25), 0.6)
        assert np.isclose(optimal_gain_pure(1e6), 1.0, atol=1e-9)
        with pytest.raises(ValueError):
            optimal_gain_pure(0.5)


class TestChannel:
    def test_identity(self):
        g = alice_bob_covariance(ProtocolParams(V0=0.5, delta_V=2, g=0.3))
        assert np.array_equal(apply_channel(g, ChannelParams()), g)

    def test_full_loss(self):
        g = apply_channel(alice_bob_covariance(ProtocolParams.coherent(5)), ChannelParams(0.0))
        assert np.allclose(g[2:, 2:], np.eye(2))
        assert np.allclose(g[:2, 2:], 0)

    def test_example(self):
        g = apply_channel(alice_bob_covariance(ProtocolParams.coherent(3)), ChannelParams(0.95, 0.45))
        assert np.isclose(g[2, 2], 0.95 * 4.45 + 0.05)

    def test_matches_dilation(self, rng):
        for _ in range(20):
            p = ProtocolParams(V0=rng.uniform(0.1, 1), delta_V=rng.uniform(0, 50), g=rng.uniform(0, 1))
            gamma = submatrix(direct_sum(two_mode_squeezed_vacuum(p.v_epr)), [0, 1])
            eta, eps = rng.uniform(0.05, 0.99), rng.uniform(0, 0.5)
            assert np.allclose(lossy_channel(gamma, 1, eta, eps), dilated_channel(gamma, eta, eps))

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ChannelParams(1.2)
        with pytest.raises(ValueError):
            ChannelParams(0.5, -0.1)

    def test_from_loss(self):
        assert np.isclose(ChannelParams.from_loss_db(10).eta, 0.1)
        assert np.isclose(ChannelParams(0.1).loss_db, 10)


class TestDetector:
    def test_ideal(self):
        g = alice_bob_covariance(ProtocolParams.coherent(3))
        assert np.array_equal(bob_detection(g, DetectorParams()), g)

    def test_efficiency(self):
        g = bob_detection(alice_bob_covariance(ProtocolParams.coherent(3)), DetectorParams(0.85))
        assert np.isclose(g[2, 2], 0.85 * 4 + 0.15)

    def test_noise_composition(self):
        g = bob_detection(alice_bob_covariance(ProtocolParams.coherent(3)), DetectorParams(0.85, 0.05, 0.2))
        assert np.isclose(g[2, 2], 0.85 * 4 + 0.15 + 0.25)

    def test_matches_beamsplitter_with_epr_input(self):
        d = DetectorParams(0.8, 0.1, 0.3)
        gamma = alice_bob_covariance(ProtocolParams.coherent(4))
        vn = 1 + d.added_noise / (1 - d.efficiency)
        full = direct_sum(gamma, two_mode_squeezed_vacuum(vn))
        out = submatrix(apply_symplectic(full, beamsplitter(d.efficiency, 1, 2, 4)), [0, 1])
        assert np.allclose(bob_detection(gamma, d), out)

    def test_channel_then_detector_compose(self, rng):
        gamma = alice_bob_covariance(ProtocolParams(V0=0.3, delta_V=8, g=0.7))
        c, d = ChannelParams(0.6, 0.2), DetectorParams(0.9, 0.05, 1.0)
        composed = gamma.copy()
        t = c.eta * d.efficiency
        composed[2:, :] *= np.sqrt(t)
        composed[:, 2:] *= np.sqrt(t)
        composed[2:, 2:] += (d.efficiency * (c.eta * c.epsilon + 1 - c.eta) + 1 - d.efficiency
                             + d.added_noise) * np.eye(2)
        assert np.allclose(bob_detection(apply_channel(gamma, c), d), composed, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            DetectorParams(0.0)
        with pytest.raises(ValueError):
            DetectorParams(0.9, -1)


class TestMutualInformation:
    def test_uncorrelated(self):
        assert mutual_information(np.diag([2.0, 2.0, 3.0, 3.0])) == 0.0

    def test_coherent_one_bit(self):
        assert abs(mutual_information(alice_bob_covariance(ProtocolParams.coherent(3.0))) - 1.0) < 1e-12

    def test_gaussian_oracle(self, rng):
        for _ in range(50):
            p = ProtocolParams(V0=rng.uniform(0.1, 1), delta_V0=rng.uniform(0, 5),
                               delta_V=rng.uniform(0, 50), g=rng.uniform(0.01, 1.5))
            g = apply_channel(alice_bob_covariance(p), ChannelParams(rng.uniform(0.01, 1), rng.uniform(0, 1)))
            for q, b in enumerate("xp"):
                assert np.isclose(mutual_information(g, b), gaussian_mi_oracle(g, q), rtol=1e-10)

    def test_pure_epr_optimal_gain(self):
        g = alice_bob_covariance(ProtocolParams(V0=0.5, g=0.6))
        expected = 0.5 * np.log2(1.25 / (1.25 - 0.45 ** 2 / 0.45))
        assert np.isclose(mutual_information(g), expected)
        assert np.isclose(mutual_information(g), gaussian_mi_oracle(g, 0))

    @given(params, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_basis_symmetry(self, p, eta, eps):
        g = apply_channel(alice_bob_covariance(p), ChannelParams(eta, eps))
        assert np.isclose(mutual_information(g, "x"), mutual_information(g, "p"), rtol=1e-12, atol=1e-14)

    def test_monotone_in_eta(self):
        p = ProtocolParams(V0=0.4, delta_V0=1.0, delta_V=20, g=0.8)
        values = [mutual_information(apply_channel(alice_bob_covariance(p), ChannelParams(eta, 0.1)))
                  for eta in np.linspace(0, 1, 21)]
        assert np.all(np.diff(values) >= -1e-12)

    def test_rejects_excess_correlation(self):
        bad = np.array([[1, 0, 2, 0], [0, 1, 0, -2], [2, 0, 1, 0], [0, -2, 0, 1.0]])
        with pytest.raises(UnphysicalStateError):
            mutual_information(bad, "x")


def test_distance():
    assert distance_to_transmittance(0) == 1.0
    assert np.isclose(distance_to_transmittance(50), 0.1)
    assert np.isclose(distance_to_transmittance(15), 10 ** -0.3)
    assert np.isclose(transmittance_to_distance(0.1), 50)
    with pytest.raises(ValueError):
        distance_to_transmittance(-1)
