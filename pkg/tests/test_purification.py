import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from oracles import entropy
from tmsqkd.errors import SolverError, UnphysicalStateError
from tmsqkd.protocol import ChannelParams, DetectorParams, ProtocolParams, alice_bob_covariance
from tmsqkd.purification import (
    MeasuredTwoModeMatrix,
    PurificationParams,
    analytic_start,
    attach_detector,
    detector_dilation,
    four_mode_elements,
    four_mode_matrix,
    solve_purification,
    start_schedule,
    theoretical_purification,
)
from tmsqkd.security import holevo_bound
from tmsqkd.states import EprSpec, two_mode_squeezed_vacuum
from tmsqkd.symplectic import purity_residual, submatrix, symplectic_eigenvalues

EXPERIMENT = ProtocolParams.from_source(EprSpec(3.5, 8.2), g=0.873).with_total_modulation(23.4)


def random_params(rng):
    return PurificationParams(
        r1=rng.uniform(-1.5, 1.5), r2=rng.uniform(-1.5, 1.5),
        V1=rng.uniform(1, 30), V2=rng.uniform(1, 30),
        T1=rng.uniform(0, 1), T2=rng.uniform(0, 1),
    )


def random_protocol(rng):
    return ProtocolParams(V0=rng.uniform(0.05, 1), delta_V0=rng.choice([0.0, rng.uniform(0, 10)]),
                          delta_V=rng.choice([0.0, rng.uniform(0, 100)]), g=rng.uniform(0.05, 1.5))


def measured(gamma):
    return MeasuredTwoModeMatrix.from_covariance(submatrix(gamma, [0, 1]))


class TestMeasuredMatrix:
    def test_round_trip(self):
        m = MeasuredTwoModeMatrix(3, 4, 5, 6, 1, -2)
        assert MeasuredTwoModeMatrix.from_covariance(m.to_covariance()) == m

    def test_rejects_cross_terms(self):
        g = two_mode_squeezed_vacuum(2.0)
        g[0, 3] = g[3, 0] = 1e-3
        with pytest.raises(UnphysicalStateError):
            MeasuredTwoModeMatrix.from_covariance(g)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            MeasuredTwoModeMatrix.from_covariance(np.eye(2))


class TestFourMode:
    def test_vacuum(self):
        p = PurificationParams(0, 0, 1, 1, 0.37, 0.81)
        assert np.allclose(four_mode_matrix(p), np.eye(8), atol=1e-14)

    def test_random_pure(self, rng):
        for _ in range(100):
            g = four_mode_matrix(random_params(rng))
            assert np.allclose(symplectic_eigenvalues(g), 1.0, atol=1e-8)

    def test_closed_form_matches_construction(self, rng):
        for _ in range(200):
            p = random_params(rng)
            m = measured(four_mode_matrix(p, check=False))
            built = np.array([m.va_x, m.vb_x, m.va_p, m.vb_p, m.c_x, m.c_p])
            assert np.allclose(four_mode_elements(p), built, rtol=1e-10, atol=1e-10)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PurificationParams(0, 0, 0.5, 1, 0.5, 0.5)
        with pytest.raises(ValueError):
            PurificationParams(0, 0, 1, 1, 1.5, 0.5)


class TestSolve:
    def test_round_trip(self, rng):
        for _ in range(50):
            m = measured(four_mode_matrix(random_params(rng)))
            res = solve_purification(m)
            assert res.residual < 1e-8
            assert res.purity_residual < 1e-6

    def test_analytic_start_is_exact(self, rng):
        for _ in range(50):
            p = random_params(rng)
            target = four_mode_elements(p)
            m = MeasuredTwoModeMatrix(target[0], target[2], target[1], target[3], target[4], target[5])
            got = four_mode_elements(analytic_start(m))
            assert np.allclose(got, target, rtol=1e-8, atol=1e-8)

    def test_pure_epr(self):
        m = MeasuredTwoModeMatrix.from_covariance(two_mode_squeezed_vacuum(1.25))
        res = solve_purification(m)
        assert np.allclose(submatrix(res.covariance, [0, 1]), m.to_covariance(), atol=1e-6)

    def test_experimental_matrix(self):
        res = solve_purification(MeasuredTwoModeMatrix.from_covariance(alice_bob_covariance(EXPERIMENT)))
        assert res.residual < 1e-6
        assert np.allclose(symplectic_eigenvalues(res.covariance), 1.0, atol=1e-6)

    def test_deterministic(self):
        m = MeasuredTwoModeMatrix.from_covariance(alice_bob_covariance(EXPERIMENT))
        a, b = solve_purification(m), solve_purification(m)
        assert a.params == b.params
        assert np.array_equal(a.covariance, b.covariance)

    def test_multistart_without_analytic_seed(self, rng):
        # the Sobol schedule alone must also reach the target
        from tmsqkd import purification as pur
        p = random_params(rng)
        m = measured(four_mode_matrix(p))
        original = pur.analytic_start
        pur.analytic_start = lambda _: (_ for _ in ()).throw(ValueError("disabled"))
        try:
            res = solve_purification(m)
        finally:
            pur.analytic_start = original
        assert res.residual < 1e-6
        assert res.start_index >= 0

    def test_schedule_is_fixed(self):
        a, b = start_schedule(), start_schedule()
        assert len(a) == 32 and a == b
        for s in a:
            assert -3 <= s.r1 <= 3 and 1 <= s.V1 <= 50 and 0.01 <= s.T1 <= 0.99

    def test_unphysical_input(self):
        with pytest.raises(UnphysicalStateError):
            solve_purification(MeasuredTwoModeMatrix(0.5, 0.5, 0.5, 0.5, 0, 0))

    def test_failure_reports_best_residual(self):
        m = MeasuredTwoModeMatrix.from_covariance(two_mode_squeezed_vacuum(3.0))
        with pytest.raises(SolverError) as info:
            solve_purification(m, n_starts=1, tol=-1.0)
        assert info.value.best_residual is not None


class TestDetectorDilation:
    @pytest.mark.parametrize("eff,noise", [(1.0, 0.0), (0.85, 0.0), (0.85, 0.3), (1.0, 2.0),
                                           (0.999, 40.0), (0.5, 50.0)])
    def test_reproduces_detector_map(self, eff, noise):
        t, vn, k = detector_dilation(DetectorParams(eff, 0.0, noise))
        assert vn >= 1.0 and 0 < t <= 1
        # Bob variance V -> t V + (1 - t) vn must equal k (eff V + 1 - eff + noise)
        for v in (1.0, 7.0):
            assert np.isclose(t * v + (1 - t) * vn, k * (eff * v + 1 - eff + noise))

    def test_ideal_has_no_ancilla(self):
        state = attach_detector(two_mode_squeezed_vacuum(2.0), DetectorParams())
        assert state.detector_mode is None and state.n_modes == 2


class TestTheoretical:
    def test_reduces_to_epr(self):
        state = theoretical_purification(ProtocolParams(V0=0.5, g=1.0), DetectorParams())
        assert np.allclose(submatrix(state.covariance, [0, 1]), two_mode_squeezed_vacuum(1.25), atol=1e-12)
        assert state.purity_residual() < 1e-9

    def test_mode_counts(self):
        assert theoretical_purification(ProtocolParams(V0=0.5, delta_V=2, g=0.5), DetectorParams()).n_modes == 5
        impure = ProtocolParams(V0=0.5, delta_V0=1, delta_V=2, g=0.5)
        assert theoretical_purification(impure, DetectorParams()).n_modes == 7
        assert theoretical_purification(impure, DetectorParams(0.9, 0.1)).n_modes == 9

    def test_purity(self, rng):
        for _ in range(200):
            p = random_protocol(rng)
            d = DetectorParams(rng.uniform(0.5, 1), 0.0, rng.choice([0.0, rng.uniform(0, 50)]))
            for basis in "xp":
                assert theoretical_purification(p, d, basis).purity_residual() < 1e-6

    def test_reproduces_analytic_model(self, rng):
        # Bob's block and the measured-basis entries of Alice's data are exact
        for _ in range(100):
            p = random_protocol(rng)
            ab = alice_bob_covariance(p)
            for q, basis in enumerate("xp"):
                sub = submatrix(theoretical_purification(p, DetectorParams(), basis).covariance, [0, 1])
                assert np.allclose(sub[2:, 2:], ab[2:, 2:], rtol=1e-9, atol=1e-9)
                for i, j in ((q, q), (q, 2 + q)):
                    assert np.isclose(sub[i, j], ab[i, j], rtol=1e-9, atol=1e-9)

    def test_overflow_guard(self):
        with pytest.raises(ValueError, match="modulation_transmittance"):
            theoretical_purification(ProtocolParams(V0=0.5, delta_V=100, g=0.5), DetectorParams(),
                                     modulation_transmittance=1 - 1e-7)

    def test_no_data_rejected(self):
        with pytest.raises(ValueError):
            theoretical_purification(ProtocolParams(V0=0.5), DetectorParams())

    def test_transmittance_independence(self):
        p, c = ProtocolParams(V0=0.3, delta_V0=1.0, delta_V=30, g=0.7), ChannelParams(0.4, 0.1)
        chis = []
        for tm in (0.5, 0.9, 0.99):
            s = theoretical_purification(p, DetectorParams(0.9), modulation_transmittance=tm)
            chis.append(holevo_bound(s.after_channel(c), s.bob_mode))
        assert np.ptp(chis) < 1e-8


@given(st.floats(0.05, 1.0), st.floats(0.0, 10.0), st.floats(0.0, 100.0), st.floats(0.05, 1.5),
       st.floats(0.01, 1.0), st.floats(0.0, 1.0))
@example(0.16474233768341068, 7.8e-169, 0.0, 1.0, 1.0, 0.0)  # impurity below rounding
def test_holevo_independent_of_purification(v0, dv0, dv, g, eta, eps):
    p = ProtocolParams(V0=v0, delta_V0=dv0, delta_V=dv, g=g)
    c = ChannelParams(eta, eps)
    theo = theoretical_purification(p, DetectorParams())
    four = attach_detector(solve_purification(measured(theo.covariance)).covariance, DetectorParams())
    a = holevo_bound(theo.after_channel(c), theo.bob_mode)
    b = holevo_bound(four.after_channel(c), four.bob_mode)
    assert abs(a - b) < 1e-5


def test_entropy_of_trusted_state_matches_oracle(rng):
    p = random_protocol(rng)
    s = theoretical_purification(p, DetectorParams(0.8, 0.0, 1.0))
    g = s.after_channel(ChannelParams(0.3, 0.2))
    from tmsqkd.security import von_neumann_entropy
    assert np.isclose(von_neumann_entropy(g), entropy(g), atol=1e-7)
    assert purity_residual(s.covariance) < 1e-6
