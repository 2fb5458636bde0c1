import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tmsqkd.errors import UnphysicalStateError
from tmsqkd.states import (
    EprSpec,
    SqueezedSourceSpec,
    db_to_variance,
    epr_from_squeezers,
    experimental_epr,
    joint_quadrature_variances,
    squeezed_vacuum,
    thermal_state,
    two_mode_squeezed_vacuum,
    variance_to_db,
)
from tmsqkd.symplectic import is_physical, symplectic_eigenvalues


def test_db_conversions():
    assert db_to_variance(0) == 1.0
    assert np.isclose(db_to_variance(3), 10 ** -0.3)
    assert np.isclose(db_to_variance(8.2, "antisqueezing"), 10 ** 0.82)
    assert np.isclose(variance_to_db(10 ** -0.35), -3.5)
    with pytest.raises(ValueError):
        db_to_variance(-1)
    with pytest.raises(ValueError):
        db_to_variance(1, "sideways")


class TestSqueezedVacuum:
    def test_vacuum(self):
        assert np.array_equal(squeezed_vacuum(SqueezedSourceSpec(1.0)), np.eye(2))

    def test_pure(self):
        g = squeezed_vacuum(SqueezedSourceSpec(0.5))
        assert np.allclose(g, np.diag([0.5, 2.0]))
        assert np.allclose(symplectic_eigenvalues(g), [1.0])

    def test_impure(self):
        g = squeezed_vacuum(SqueezedSourceSpec(0.5, 1.0))
        assert np.allclose(g, np.diag([0.5, 3.0]))
        assert np.allclose(symplectic_eigenvalues(g), [np.sqrt(1.5)])

    def test_p_orientation(self):
        assert np.allclose(squeezed_vacuum(SqueezedSourceSpec(0.5), "p"), np.diag([2.0, 0.5]))

    def test_from_db(self):
        s = SqueezedSourceSpec.from_db(3.0, 6.0)
        assert np.isclose(s.V0, 10 ** -0.3)
        assert np.isclose(s.antisqueezed, 10 ** 0.6)

    def test_validation(self):
        with pytest.raises(ValueError):
            SqueezedSourceSpec(0.0)
        with pytest.raises(ValueError):
            SqueezedSourceSpec(0.5, -1.0)


class TestEpr:
    def test_vacuum_inputs(self):
        vac = SqueezedSourceSpec(1.0)
        assert np.allclose(epr_from_squeezers(vac, vac), np.eye(4))

    def test_pure_inputs(self):
        s = SqueezedSourceSpec(0.5)
        g = epr_from_squeezers(s, s)
        assert np.allclose(g, two_mode_squeezed_vacuum(1.25), atol=1e-14)
        assert np.isclose(g[0, 2], 0.75) and np.isclose(g[1, 3], -0.75)
        assert np.allclose(symplectic_eigenvalues(g), 1.0, atol=1e-9)

    def test_impurity_preserved(self):
        s = SqueezedSourceSpec(0.5, 0.8)
        assert np.all(symplectic_eigenvalues(epr_from_squeezers(s, s)) > 1.0)

    def test_experimental_values(self):
        g = experimental_epr(EprSpec(3.5, 8.2))
        assert np.allclose(np.diag(g), (10 ** -0.35 + 10 ** 0.82) / 2)
        assert np.isclose(g[0, 0], 3.5268, atol=1e-4)
        assert is_physical(g)

    def test_experimental_vacuum(self):
        assert np.allclose(experimental_epr(EprSpec(0.0, 0.0)), np.eye(4))

    def test_rejects_antisqueezing_below_squeezing(self):
        with pytest.raises(UnphysicalStateError):
            EprSpec(3.0, 1.0)

    @given(st.floats(0.0, 15.0), st.floats(0.0, 10.0))
    def test_joint_variances_round_trip(self, tms, extra):
        spec = EprSpec(tms, tms + extra)
        minus_x, plus_p, plus_x, minus_p = joint_quadrature_variances(experimental_epr(spec))
        for v, db in ((minus_x, -tms), (plus_p, -tms), (plus_x, tms + extra), (minus_p, tms + extra)):
            assert abs(variance_to_db(v) - db) < 1e-9

    @given(st.floats(0.01, 1.0), st.floats(0.0, 30.0))
    def test_constructors_physical(self, v0, dv0):
        s = SqueezedSourceSpec(v0, dv0)
        assert is_physical(squeezed_vacuum(s))
        assert is_physical(epr_from_squeezers(s, s))


def test_thermal_and_tmsv_validation():
    assert np.array_equal(thermal_state(2.0), np.diag([2.0, 2.0]))
    with pytest.raises(UnphysicalStateError):
        thermal_state(0.5)
    with pytest.raises(UnphysicalStateError):
        two_mode_squeezed_vacuum(0.9)
