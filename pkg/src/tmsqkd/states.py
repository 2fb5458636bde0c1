"""Constructors for the Gaussian states used by the protocol."""

from dataclasses import dataclass

import numpy as np

from .errors import UnphysicalStateError
from .symplectic import apply_symplectic, beamsplitter, direct_sum


def db_to_variance(db, sense="squeezing"):
    """Convert a noise level in dB relative to shot noise into SNU."""
    if db < 0:
        raise ValueError(f"dB value must be non-negative, got {db}")
    if sense == "squeezing":
        return 10.0 ** (-db / 10.0)
    if sense == "antisqueezing":
        return 10.0 ** (db / 10.0)
    raise ValueError(f"sense must be 'squeezing' or 'antisqueezing', got {sense!r}")


def variance_to_db(variance):
    """Signed dB value of a variance: negative below shot noise."""
    return 10.0 * np.log10(variance)


@dataclass(frozen=True)
class SqueezedSourceSpec:
    """Single-mode squeezed source.

    Attributes
    ----------
    V0 : float
        Variance of the squeezed quadrature (SNU).
    delta_V0 : float
        Excess noise on the antisqueezed quadrature, whose variance is
        ``1/V0 + delta_V0``.
    """

    V0: float
    delta_V0: float = 0.0

    def __post_init__(self):
        if not self.V0 > 0:
            raise ValueError(f"V0 must be positive, got {self.V0}")
        if self.delta_V0 < 0:
            raise ValueError(f"delta_V0 must be non-negative, got {self.delta_V0}")
        if self.antisqueezed < self.V0:
            raise ValueError("antisqueezed variance below squeezed variance")

    @property
    def antisqueezed(self):
        return 1.0 / self.V0 + self.delta_V0

    @property
    def is_pure(self):
        return self.delta_V0 == 0.0

    @classmethod
    def from_db(cls, squeezing_db, antisqueezing_db=None):
        """Build from measured squeezing/antisqueezing levels in dB."""
        V0 = db_to_variance(squeezing_db, "squeezing")
        if antisqueezing_db is None:
            return cls(V0)
        anti = db_to_variance(antisqueezing_db, "antisqueezing")
        return cls(V0, max(anti - 1.0 / V0, 0.0))


@dataclass(frozen=True)
class EprSpec:
    """Two-mode squeezed source described by its joint-quadrature noise.

    ``tms_db`` is the noise reduction of ``(x1 - x2)/√2`` and
    ``(p1 + p2)/√2``; ``anti_db`` the noise increase of the conjugate
    combinations.
    """

    tms_db: float
    anti_db: float

    def __post_init__(self):
        if self.tms_db < 0:
            raise ValueError(f"tms_db must be non-negative, got {self.tms_db}")
        if self.anti_db < self.tms_db:
            raise UnphysicalStateError(
                f"antisqueezing ({self.anti_db} dB) below squeezing ({self.tms_db} dB)"
            )

    def source_spec(self):
        """Equivalent pair of identical squeezers."""
        V0 = db_to_variance(self.tms_db, "squeezing")
        anti = db_to_variance(self.anti_db, "antisqueezing")
        # anti >= 1/V0 is guaranteed by validation; clip rounding residue
        return SqueezedSourceSpec(V0, max(anti - 1.0 / V0, 0.0))


def vacuum(n=1):
    return np.eye(2 * n)


def thermal_state(V):
    """Single-mode thermal state ``diag(V, V)``."""
    if V < 1.0:
        raise UnphysicalStateError(f"thermal variance {V} below vacuum")
    return np.diag([float(V), float(V)])


def two_mode_squeezed_vacuum(V):
    """Pure EPR state with local variance ``V``.

    x quadratures are positively and p quadratures negatively correlated.
    """
    if V < 1.0:
        raise UnphysicalStateError(f"EPR variance {V} below vacuum")
    c = np.sqrt(max(V * V - 1.0, 0.0))
    return np.array([
        [V, 0.0, c, 0.0],
        [0.0, V, 0.0, -c],
        [c, 0.0, V, 0.0],
        [0.0, -c, 0.0, V],
    ])


def squeezed_vacuum(spec, orientation="x"):
    """Single-mode squeezed state, squeezed along ``orientation``."""
    if orientation == "x":
        return np.diag([spec.V0, spec.antisqueezed])
    if orientation == "p":
        return np.diag([spec.antisqueezed, spec.V0])
    raise ValueError(f"orientation must be 'x' or 'p', got {orientation!r}")


def epr_from_squeezers(spec1, spec2):
    """Interfere an x-squeezed and a p-squeezed mode on a 50:50 beamsplitter."""
    gamma = direct_sum(squeezed_vacuum(spec1, "x"), squeezed_vacuum(spec2, "p"))
    return apply_symplectic(gamma, beamsplitter(0.5, 0, 1, 2))


def experimental_epr(spec):
    """Symmetric EPR state reproducing measured joint-quadrature noise.

    Impurity is split evenly between the two modes, so the local variance
    is the mean of the squeezed and antisqueezed joint variances.
    """
    src = spec.source_spec()
    return epr_from_squeezers(src, src)


def joint_quadrature_variances(gamma):
    """Variances of ``(x1-x2)/√2``, ``(p1+p2)/√2``, ``(x1+x2)/√2``, ``(p1-p2)/√2``."""
    g = np.asarray(gamma)
    minus_x = 0.5 * (g[0, 0] + g[2, 2] - 2 * g[0, 2])
    plus_p = 0.5 * (g[1, 1] + g[3, 3] + 2 * g[1, 3])
    plus_x = 0.5 * (g[0, 0] + g[2, 2] + 2 * g[0, 2])
    minus_p = 0.5 * (g[1, 1] + g[3, 3] - 2 * g[1, 3])
    return minus_x, plus_p, plus_x, minus_p
