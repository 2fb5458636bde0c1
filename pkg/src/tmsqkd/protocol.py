"""Prepare-and-measure model of the squeezed-plus-modulated protocol.

Alice homodynes one arm of an EPR source and adds an independent Gaussian
displacement to the other arm, which travels to Bob. Her key data is the
weighted sum ``x_M + g x_HD`` of modulation and homodyne records. The
matrices built here describe the second moments of Alice's *data* together
with Bob's mode; Alice's block is a classical covariance and need not obey
the uncertainty principle.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import UnphysicalStateError
from .states import EprSpec, SqueezedSourceSpec

DB_PER_KM = 0.2
DEFAULT_G_MAX = 1.5


@dataclass(frozen=True)
class ProtocolParams:
    """Source and modulation settings (all variances in SNU).

    Attributes
    ----------
    V0 : float
        Squeezed-quadrature variance of each squeezer, in (0, 1].
    delta_V0 : float
        Excess antisqueezing noise of each squeezer.
    delta_V : float
        Variance of the classical Gaussian modulation.
    g : float
        Weight of Alice's homodyne data in her key variable.
    g_max : float
        Upper end of the range searched when optimizing ``g``.
    """

    V0: float = 1.0
    delta_V0: float = 0.0
    delta_V: float = 0.0
    g: float = 0.0
    g_max: float = DEFAULT_G_MAX

    def __post_init__(self):
        if not 0.0 < self.V0 <= 1.0:
            raise ValueError(f"V0 must lie in (0, 1], got {self.V0}")
        if self.delta_V0 < 0 or self.delta_V < 0:
            raise ValueError("noise and modulation variances must be non-negative")
        if not 0.0 <= self.g <= self.g_max:
            raise ValueError(f"g must lie in [0, {self.g_max}], got {self.g}")

    @classmethod
    def coherent(cls, delta_V, **kw):
        """Plain coherent-state protocol with modulation ``delta_V``."""
        return cls(V0=1.0, delta_V0=0.0, delta_V=delta_V, g=0.0, **kw)

    @classmethod
    def from_source(cls, source, delta_V=0.0, g=0.0, **kw):
        """Build from a :class:`SqueezedSourceSpec` or :class:`EprSpec`."""
        if isinstance(source, EprSpec):
            source = source.source_spec()
        if not isinstance(source, SqueezedSourceSpec):
            raise TypeError(f"unsupported source description {source!r}")
        return cls(V0=source.V0, delta_V0=source.delta_V0, delta_V=delta_V, g=g, **kw)

    @property
    def v_epr(self):
        """Local variance of each EPR arm."""
        return 0.5 * ((1.0 + self.V0 ** 2) / self.V0 + self.delta_V0)

    @property
    def c_epr(self):
        """Magnitude of the EPR quadrature correlation."""
        return 0.5 * ((1.0 - self.V0 ** 2) / self.V0 + self.delta_V0)

    @property
    def total_modulation(self):
        """Variance of Bob's input mode above shot noise."""
        return self.v_epr - 1.0 + self.delta_V

    def with_total_modulation(self, total):
        """Copy whose classical modulation tops the EPR noise up to ``total``."""
        added = total - (self.v_epr - 1.0)
        if added < 0:
            raise ValueError(
                f"total modulation {total} SNU is below the EPR contribution "
                f"{self.v_epr - 1.0:.6g} SNU"
            )
        return replace(self, delta_V=added)


@dataclass(frozen=True)
class ChannelParams:
    """Lossy, noisy channel; ``epsilon`` is referred to the channel input."""

    eta: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")

    @classmethod
    def from_distance(cls, km, epsilon=0.0, db_per_km=DB_PER_KM):
        return cls(distance_to_transmittance(km, db_per_km), epsilon)

    @classmethod
    def from_loss_db(cls, loss_db, epsilon=0.0):
        return cls(10.0 ** (-loss_db / 10.0), epsilon)

    @property
    def loss_db(self):
        return -10.0 * np.log10(self.eta) if self.eta > 0 else np.inf


@dataclass(frozen=True)
class DetectorParams:
    """Bob's homodyne detector; all of its imperfections are trusted."""

    efficiency: float = 1.0
    electronic_noise: float = 0.0
    trusted_added_noise: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.electronic_noise < 0 or self.trusted_added_noise < 0:
            raise ValueError("detector noise must be non-negative")

    @property
    def added_noise(self):
        """Total trusted noise referred to Bob's output, in SNU."""
        return self.electronic_noise + self.trusted_added_noise

    @property
    def is_ideal(self):
        return self.efficiency == 1.0 and self.added_noise == 0.0


IDEAL_DETECTOR = DetectorParams()


def alice_bob_covariance(p):
    """Covariance of Alice's weighted data and Bob's mode before the channel.

    Returns the 4x4 matrix with blocks ``V_A·I``, ``C_AB·σ_z``, ``V_B·I``.
    """
    w, k = p.v_epr, p.c_epr
    va = p.g ** 2 * w + p.delta_V
    c = p.g * k + p.delta_V
    vb = w + p.delta_V
    return np.array([
        [va, 0.0, c, 0.0],
        [0.0, va, 0.0, -c],
        [c, 0.0, vb, 0.0],
        [0.0, -c, 0.0, vb],
    ])


def optimal_gain_pure(v_epr):
    """Best weight ``√(V²-1)/V`` for a pure EPR source of variance ``V``."""
    if v_epr < 1.0:
        raise ValueError(f"EPR variance must be >= 1, got {v_epr}")
    return np.sqrt(v_epr ** 2 - 1.0) / v_epr


def lossy_channel(gamma, mode, eta, epsilon=0.0):
    """Send ``mode`` of a multimode state through a thermal-loss channel.

    The mode's block maps to ``η(γ_B + ε) + (1 - η)`` and its correlations
    with every other mode scale by ``√η``.
    """
    gamma = np.array(gamma, dtype=float)
    idx = [2 * mode, 2 * mode + 1]
    root = np.sqrt(eta)
    gamma[idx, :] *= root
    gamma[:, idx] *= root
    gamma[np.ix_(idx, idx)] += (eta * epsilon + 1.0 - eta) * np.eye(2)
    return gamma


def apply_channel(gamma_ab, c):
    """Apply the channel to Bob's mode (mode 1) of a two-mode matrix."""
    return lossy_channel(gamma_ab, 1, c.eta, c.epsilon)


def bob_detection(gamma, d, mode=1):
    """Fold Bob's trusted detector into the covariance of his data.

    Bob's block maps to ``η_d V + (1 - η_d) + noise`` and correlations
    scale by ``√η_d``. This is the map that a beamsplitter of transmittance
    ``η_d`` fed with an EPR arm of variance ``1 + noise/(1 - η_d)`` produces.
    """
    gamma = np.array(gamma, dtype=float)
    idx = [2 * mode, 2 * mode + 1]
    root = np.sqrt(d.efficiency)
    gamma[idx, :] *= root
    gamma[:, idx] *= root
    gamma[np.ix_(idx, idx)] += (1.0 - d.efficiency + d.added_noise) * np.eye(2)
    return gamma


def mutual_information(gamma_ab, basis=None):
    """Shannon information between Alice's and Bob's data, bits per state.

    ``basis`` selects the x or p quadrature; ``None`` averages both.
    """
    if basis is None:
        return 0.5 * (mutual_information(gamma_ab, "x") + mutual_information(gamma_ab, "p"))
    q = {"x": 0, "p": 1}[basis]
    va, vb, c = gamma_ab[q, q], gamma_ab[2 + q, 2 + q], gamma_ab[q, 2 + q]
    if va == 0.0 and c == 0.0:
        return 0.0
    if va <= 0.0 or vb <= 0.0:
        raise UnphysicalStateError("non-positive variance in mutual information")
    cond = vb - c * c / va
    if cond <= 0.0:
        raise UnphysicalStateError(
            f"conditional variance {cond:.6g} is not positive; correlations exceed variances"
        )
    return 0.5 * np.log2(vb / cond)


def distance_to_transmittance(km, db_per_km=DB_PER_KM):
    """Fiber transmittance after ``km`` kilometres."""
    if km < 0:
        raise ValueError(f"distance must be non-negative, got {km}")
    return 10.0 ** (-db_per_km * km / 10.0)


def transmittance_to_distance(eta, db_per_km=DB_PER_KM):
    return -10.0 * np.log10(eta) / db_per_km
