"""Holevo bound and asymptotic reverse-reconciliation key rate.

Every mode other than the channel environment is trusted: Alice's source,
her modulation and Bob's detector. Purifying the trusted modes therefore
leaves Eve holding exactly the purification of their joint state after the
channel, so ``S(E) = S(trusted)`` and ``S(E|b) = S(trusted | b)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SolverError, UnphysicalStateError
from .protocol import IDEAL_DETECTOR, alice_bob_covariance, apply_channel, bob_detection, mutual_information
from .purification import (
    MeasuredTwoModeMatrix,
    attach_detector,
    solve_purification,
    theoretical_purification,
)
from .symplectic import PHYSICAL_TOL, condition_on_homodyne, submatrix, symplectic_eigenvalues

BASIS_TOL = 1e-9


def g_function(x):
    """Entropy of a thermal state with mean photon number ``x``, in bits."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12):
        raise ValueError(f"mean photon number must be non-negative, got {x.min()}")
    x = np.clip(x, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (x + 1) * np.log2(x + 1) - np.where(x > 0, x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
    return out if out.ndim else float(out)


def von_neumann_entropy(gamma):
    """Entropy of a Gaussian state, ``Σ g((ν_k - 1)/2)`` in bits."""
    nu = symplectic_eigenvalues(gamma)
    if nu[-1] < 1.0 - PHYSICAL_TOL:
        raise UnphysicalStateError(
            f"state has symplectic eigenvalue {nu[-1]:.6g} < 1",
            min_symplectic_eigenvalue=float(nu[-1]),
        )
    # g has infinite slope at 0, so rounding noise on pure modes is removed
    nu = np.where(np.abs(nu - 1.0) <= PHYSICAL_TOL, 1.0, nu)
    return float(np.sum(g_function((nu - 1.0) / 2.0)))


def holevo_bound(trusted, bob_mode, quadrature="x"):
    """Information Eve holds on Bob's homodyne record.

    Parameters
    ----------
    trusted : ndarray
        Covariance of all trusted modes after the channel, whose global
        purification is Eve's system.
    bob_mode : int
        Mode that Bob homodynes.
    quadrature : {"x", "p"}
    """
    s_e = von_neumann_entropy(trusted)
    s_e_given_b = von_neumann_entropy(condition_on_homodyne(trusted, bob_mode, quadrature))
    return s_e - s_e_given_b


@dataclass(frozen=True)
class SecurityReport:
    """Key rate in bits per state with its two ingredients."""

    i_ab: float
    chi_be: float
    basis: str
    inputs: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def key_rate(self):
        return self.i_ab - self.chi_be

    @property
    def key_rate_clamped(self):
        return max(0.0, self.key_rate)

    def as_dict(self):
        return {
            "i_ab": self.i_ab,
            "chi_be": self.chi_be,
            "key_rate": self.key_rate,
            "key_rate_clamped": self.key_rate_clamped,
            "basis": self.basis,
            "inputs": self.inputs,
            "diagnostics": self.diagnostics,
        }


def _received(gamma_ab, c, d):
    return bob_detection(apply_channel(gamma_ab, c), d)


def _chi_theoretical(p, c, d, basis, purification):
    if p.g == 0.0 and p.delta_V == 0.0:
        # Eve's information depends only on Bob's input; any weighting will do
        p = replace(p, g=min(1.0, p.g_max))
    state = theoretical_purification(p, d, basis)
    if purification == "four_mode":
        solved = solve_purification(
            MeasuredTwoModeMatrix.from_covariance(submatrix(state.covariance, [0, 1]))
        )
        state = attach_detector(solved.covariance, d, label="four-mode")
        diag = {"purification": "four_mode", "solver_residual": solved.residual,
                "solver_start": solved.start_index}
    elif purification == "theoretical":
        diag = {"purification": "theoretical"}
    else:
        raise ValueError(f"unknown purification {purification!r}")
    diag["purity_residual"] = state.purity_residual()
    diag["n_modes"] = state.n_modes
    chi = holevo_bound(state.after_channel(c), state.bob_mode, basis)
    return chi, diag


def key_rate(p, c, d=IDEAL_DETECTOR, basis="x", check_basis=True, purification="theoretical"):
    """Asymptotic reverse-reconciliation key rate ``I_AB - χ_BE``.

    Parameters
    ----------
    p : ProtocolParams
    c : ChannelParams
    d : DetectorParams
    basis : {"x", "p"}
        Quadrature in which the rate is reported.
    check_basis : bool
        Also evaluate the other quadrature and require both to agree.
    purification : {"theoretical", "four_mode"}
        Pure state used for Eve's information: the direct emulation of the
        protocol, or the interferometric four-mode state fitted to it.

    Returns
    -------
    SecurityReport
    """
    gamma = _received(alice_bob_covariance(p), c, d)
    i_ab = mutual_information(gamma, basis)
    chi, diag = _chi_theoretical(p, c, d, basis, purification)
    if check_basis:
        other = "p" if basis == "x" else "x"
        i_other = mutual_information(gamma, other)
        chi_other, _ = _chi_theoretical(p, c, d, other, purification)
        gap = abs((i_ab - chi) - (i_other - chi_other))
        diag["basis_gap"] = float(gap)
        if gap > BASIS_TOL * max(1.0, abs(i_ab)):
            raise SolverError(f"x and p key rates differ by {gap:.3g} bits")
    inputs = {
        "V0": p.V0, "delta_V0": p.delta_V0, "delta_V": p.delta_V, "g": p.g,
        "eta": c.eta, "epsilon": c.epsilon,
        "detector_efficiency": d.efficiency, "detector_noise": d.added_noise,
    }
    return SecurityReport(float(i_ab), float(chi), basis, inputs, diag)


def key_rate_from_matrix(gamma_ab, c, d=IDEAL_DETECTOR, basis="x", solved=None):
    """Key rate for a measured pre-channel two-mode matrix.

    ``gamma_ab`` holds Alice's data and Bob's mode before the channel; it
    must be a physical state without x-p cross terms, since Eve's
    information is obtained from its interferometric purification.
    ``solved`` reuses a purification of ``gamma_ab`` computed earlier.
    """
    gamma_ab = np.asarray(gamma_ab, dtype=float)
    m = MeasuredTwoModeMatrix.from_covariance(gamma_ab)
    i_ab = mutual_information(_received(gamma_ab, c, d), basis)
    if solved is None:
        solved = solve_purification(m)
    state = attach_detector(solved.covariance, d, label="four-mode")
    chi = holevo_bound(state.after_channel(c), state.bob_mode, basis)
    diag = {
        "purification": "four_mode",
        "solver_residual": solved.residual,
        "solver_start": solved.start_index,
        "purity_residual": state.purity_residual(),
    }
    inputs = {"eta": c.eta, "epsilon": c.epsilon,
              "detector_efficiency": d.efficiency, "detector_noise": d.added_noise}
    return SecurityReport(float(i_ab), float(chi), basis, inputs, diag)
