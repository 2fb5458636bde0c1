"""Pure global states whose reduction is a given two-mode state.

Two constructions are provided:

* :func:`four_mode_matrix` / :func:`solve_purification`: two EPR sources
  feeding a Mach-Zehnder interferometer with a squeezer in each arm. Its six
  parameters can reproduce any two-mode state with uncorrelated x and p
  quadratures on the output modes A and B.
* :func:`theoretical_purification`: the analytic model of the protocol:
  modulation emulated by coupling Bob's mode to a strong EPR pair and the
  weighting of Alice's data emulated with a squeezed ancilla.

Bob's trusted detector is purified by :func:`attach_detector`.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import SolverError, UnphysicalStateError
from .protocol import lossy_channel
from .states import two_mode_squeezed_vacuum
from .symplectic import (
    apply_symplectic,
    beamsplitter,
    direct_sum,
    purity_residual,
    require_physical,
    squeezer,
    submatrix,
)

log = logging.getLogger(__name__)

CROSS_TERM_TOL = 1e-6
PURITY_TOL = 1e-6
SOLVE_TOL = 1e-6
N_STARTS = 32
MAX_HALVINGS = 40
MAX_ENTANGLED_VARIANCE = 1e8
DETECTOR_VARIANCE_CAP = 1e3


@dataclass(frozen=True)
class MeasuredTwoModeMatrix:
    """Two-mode covariance with vanishing x-p cross terms (SNU)."""

    va_x: float
    va_p: float
    vb_x: float
    vb_p: float
    c_x: float
    c_p: float

    def to_covariance(self):
        return np.array([
            [self.va_x, 0.0, self.c_x, 0.0],
            [0.0, self.va_p, 0.0, self.c_p],
            [self.c_x, 0.0, self.vb_x, 0.0],
            [0.0, self.c_p, 0.0, self.vb_p],
        ])

    def as_vector(self):
        return np.array([self.va_x, self.vb_x, self.va_p, self.vb_p, self.c_x, self.c_p])

    @classmethod
    def from_covariance(cls, gamma, tol=CROSS_TERM_TOL):
        g = np.asarray(gamma, dtype=float)
        if g.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {g.shape}")
        cross = max(abs(g[0, 1]), abs(g[2, 3]), abs(g[0, 3]), abs(g[1, 2]))
        if cross > tol:
            raise UnphysicalStateError(
                f"x-p cross terms up to {cross:.3g} exceed {tol:g}; not of the measured form"
            )
        return cls(g[0, 0], g[1, 1], g[2, 2], g[3, 3], g[0, 2], g[1, 3])


@dataclass(frozen=True)
class PurificationParams:
    """Settings of the two-source interferometric purification."""

    r1: float
    r2: float
    V1: float
    V2: float
    T1: float
    T2: float

    def __post_init__(self):
        if self.V1 < 1.0 or self.V2 < 1.0:
            raise ValueError("EPR variances must be >= 1")
        if not (0.0 <= self.T1 <= 1.0 and 0.0 <= self.T2 <= 1.0):
            raise ValueError("transmittances must lie in [0, 1]")

    def as_vector(self):
        return np.array([self.r1, self.r2, self.V1, self.V2, self.T1, self.T2])


def four_mode_elements(p):
    """Closed-form A/B entries of the four-mode state.

    Returns ``(va_x, vb_x, va_p, vb_p, c_x, c_p)``.
    """
    s1, s2 = np.exp(p.r1), np.exp(p.r2)
    t1 = np.sqrt(p.T1 * (1.0 - p.T1))
    t2 = np.sqrt(p.T2 * (1.0 - p.T2))
    a = (p.V1 - p.V2) / (s1 * s2)
    b = (p.V1 - p.V2) * s1 * s2
    d = p.T1 * (p.V1 - p.V2)
    plus, minus = p.V2 + d, p.V1 - d
    va_x = -2 * a * t1 * t2 + p.T2 * plus / s1 ** 2 + (1 - p.T2) * minus / s2 ** 2
    vb_x = 2 * a * t1 * t2 + p.T2 * minus / s2 ** 2 + (1 - p.T2) * plus / s1 ** 2
    va_p = -2 * b * t1 * t2 + p.T2 * s1 ** 2 * plus + (1 - p.T2) * s2 ** 2 * minus
    vb_p = 2 * b * t1 * t2 + p.T2 * s2 ** 2 * minus + (1 - p.T2) * s1 ** 2 * plus
    c_x = a * t1 * (1 - 2 * p.T2) + t2 * (minus / s2 ** 2 - plus / s1 ** 2)
    c_p = b * t1 * (1 - 2 * p.T2) + t2 * (s2 ** 2 * minus - s1 ** 2 * plus)
    return np.array([va_x, vb_x, va_p, vb_p, c_x, c_p])


def _constructive_four_mode(p):
    # mode order after the direct sum: (e1, C, e2, D) -> (A, B, C, D)
    gamma = direct_sum(two_mode_squeezed_vacuum(p.V1), two_mode_squeezed_vacuum(p.V2))
    gamma = submatrix(gamma, [0, 2, 1, 3])
    s = (
        beamsplitter(p.T2, 0, 1, 4)
        @ squeezer(-p.r1, 0, 4)
        @ squeezer(-p.r2, 1, 4)
        @ beamsplitter(p.T1, 0, 1, 4)
    )
    return apply_symplectic(gamma, s)


def four_mode_matrix(p, check=True):
    """Pure four-mode state (A, B, C, D) of the interferometric purification.

    Built from its optical components; with ``check`` the A/B entries are
    compared with the closed-form expressions.
    """
    gamma = _constructive_four_mode(p)
    if check:
        built = MeasuredTwoModeMatrix.from_covariance(submatrix(gamma, [0, 1]), tol=np.inf)
        vec = np.array([built.va_x, built.vb_x, built.va_p, built.vb_p, built.c_x, built.c_p])
        closed = four_mode_elements(p)
        scale = np.maximum(1.0, np.abs(closed))
        if np.max(np.abs(vec - closed) / scale) > 1e-8:
            raise SolverError("constructive four-mode state disagrees with closed-form elements")
    return gamma


def _target_vector(m):
    return np.array([m.va_x, m.vb_x, m.va_p, m.vb_p, m.c_x, m.c_p])


def _rotation_angle(w):
    return np.arctan2(w[0, 1], w[0, 0])


def _quarter_turns(angle):
    k = int(np.floor(angle / (0.5 * np.pi)))
    return k, angle - k * 0.5 * np.pi


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def analytic_start(m):
    """Interferometer settings from a direct decomposition of ``m``.

    Writes the x block as ``X diag(V1, V2) Xᵀ`` and the p block as
    ``X⁻ᵀ diag(V1, V2) X⁻¹`` and factors ``X`` into beamsplitter,
    squeezer, beamsplitter. Used as the first start of the solver.
    """
    gx = np.array([[m.va_x, m.c_x], [m.c_x, m.vb_x]])
    gp = np.array([[m.va_p, m.c_p], [m.c_p, m.vb_p]])
    ex, ux = np.linalg.eigh(gx)
    if ex[0] <= 0:
        raise UnphysicalStateError("x block is not positive definite")
    root = ux @ np.diag(np.sqrt(ex)) @ ux.T
    nsq, u = np.linalg.eigh(root @ gp @ root)
    if nsq[0] <= 0:
        raise UnphysicalStateError("p block is not positive definite")
    nu = np.sqrt(nsq)
    x = root @ u @ np.diag(nu ** -0.5)
    w, sig, zt = np.linalg.svd(x)
    flip = np.diag([1.0, -1.0])
    if np.linalg.det(w) < 0:
        w, zt = w @ flip, flip @ zt
    k, phi = _quarter_turns(_rotation_angle(w))
    if k % 2:
        sig = sig[::-1]
    y = _rot(k * 0.5 * np.pi) @ zt
    if np.linalg.det(y) < 0:
        y = y @ flip
    j, psi = _quarter_turns(_rotation_angle(y))
    q = _rot(j * 0.5 * np.pi)
    # right factor q (signed permutation) reorders the symplectic eigenvalues
    v = np.abs(np.diag(q @ np.diag(nu) @ q.T))
    return PurificationParams(
        r1=float(-np.log(sig[0])),
        r2=float(-np.log(sig[1])),
        V1=float(max(v[0], 1.0)),
        V2=float(max(v[1], 1.0)),
        T1=float(np.clip(np.cos(psi) ** 2, 0.0, 1.0)),
        T2=float(np.clip(np.cos(phi) ** 2, 0.0, 1.0)),
    )


_EPS = 1e-14


def _to_unconstrained(p):
    v1, v2 = max(p.V1 - 1.0, _EPS), max(p.V2 - 1.0, _EPS)
    t1 = np.clip(p.T1, _EPS, 1 - _EPS)
    t2 = np.clip(p.T2, _EPS, 1 - _EPS)
    return np.array([
        p.r1, p.r2, np.log(v1), np.log(v2),
        np.log(t1 / (1 - t1)), np.log(t2 / (1 - t2)),
    ])


def _from_unconstrained(u):
    u = np.clip(u, -700, 700)
    return PurificationParams(
        r1=float(u[0]), r2=float(u[1]),
        V1=float(1.0 + np.exp(u[2])), V2=float(1.0 + np.exp(u[3])),
        T1=float(1.0 / (1.0 + np.exp(-u[4]))), T2=float(1.0 / (1.0 + np.exp(-u[5]))),
    )


def _residual(u, target):
    with np.errstate(over="ignore", invalid="ignore"):
        r = four_mode_elements(_from_unconstrained(u)) - target
    return np.where(np.isfinite(r), r, 1e300)


def _jacobian(u, target, r0):
    jac = np.empty((6, 6))
    for i in range(6):
        h = 1e-7 * max(1.0, abs(u[i]))
        up = u.copy()
        up[i] += h
        dn = u.copy()
        dn[i] -= h
        jac[:, i] = (_residual(up, target) - _residual(dn, target)) / (2 * h)
    return jac


def _newton(u, target, max_iter=100, stop=1e-13):
    r = _residual(u, target)
    cost = float(r @ r)
    scale = max(1.0, float(np.max(np.abs(target))))
    for _ in range(max_iter):
        if np.sqrt(cost) <= stop * scale:
            break
        jac = _jacobian(u, target, r)
        if not np.all(np.isfinite(jac)):
            break
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        lam = 1.0
        for _ in range(MAX_HALVINGS):
            trial = u + lam * step
            rt = _residual(trial, target)
            ct = float(rt @ rt)
            if ct < cost:
                break
            lam *= 0.5
        else:
            break
        u, r, cost = trial, rt, ct
    return u, float(np.max(np.abs(r)))


def start_schedule(n_starts=N_STARTS):
    """Deterministic starts over r in [-3, 3], V in [1, 50], T in [0.01, 0.99]."""
    pts = qmc.Sobol(d=6, scramble=False).random(n_starts)
    lo = np.array([-3, -3, 1, 1, 0.01, 0.01])
    hi = np.array([3, 3, 50, 50, 0.99, 0.99])
    x = lo + pts * (hi - lo)
    return [PurificationParams(*row) for row in x]


@dataclass(frozen=True)
class PurificationResult:
    params: PurificationParams
    covariance: np.ndarray = field(repr=False)
    residual: float
    purity_residual: float
    start_index: int
    starts_tried: int


def solve_purification(m, n_starts=N_STARTS, tol=SOLVE_TOL):
    """Find interferometer settings reproducing the two-mode state ``m``.

    Starts are tried in a fixed order (the analytic decomposition first,
    then a Sobol sequence); the first one whose damped Gauss-Newton run
    brings every entry within ``tol`` SNU of ``m`` is accepted.

    Raises
    ------
    UnphysicalStateError
        If ``m`` is not a valid two-mode covariance matrix.
    SolverError
        If no start converges; ``best_residual`` reports the closest miss.
    """
    require_physical(m.to_covariance(), "two-mode state to purify")
    target = _target_vector(m)
    starts = []
    try:
        starts.append(analytic_start(m))
    except (UnphysicalStateError, ValueError, np.linalg.LinAlgError):
        log.debug("analytic start unavailable for %s", m)
    starts.extend(start_schedule(n_starts))
    best = (np.inf, None, -1)
    for i, start in enumerate(starts):
        u, res = _newton(_to_unconstrained(start), target)
        if res < best[0]:
            best = (res, u, i)
        if res < tol:
            params = _from_unconstrained(u)
            gamma = four_mode_matrix(params)
            return PurificationResult(
                params=params,
                covariance=gamma,
                residual=res,
                purity_residual=purity_residual(gamma),
                start_index=i,
                starts_tried=i + 1,
            )
    raise SolverError(
        f"purification did not converge after {len(starts)} starts "
        f"(best residual {best[0]:.3g} SNU)",
        best_residual=best[0],
    )


def detector_dilation(d):
    """Beamsplitter transmittance, ancilla EPR variance and output scale for Bob.

    A beamsplitter of transmittance ``T`` fed with an EPR arm of variance
    ``V_N`` maps Bob's variance to ``k (η_d V + 1 - η_d + noise)`` and his
    correlations to ``√(k η_d)`` times their value. Since rescaling Bob's
    record changes neither information quantity, ``k < 1`` is used whenever
    ``k = 1`` would need a badly conditioned or impossible ancilla.
    """
    e, noise = d.efficiency, d.added_noise
    if noise == 0.0:
        return e, 1.0, 1.0
    if e < 1.0:
        vn = 1.0 + noise / (1.0 - e)
        if vn <= DETECTOR_VARIANCE_CAP:
            return e, vn, 1.0
    k = max(0.5, 1.0 / (1.0 + noise))
    vn = max(1.0, k * (1.0 - e + noise) / (1.0 - k * e))
    return k * e, vn, k


@dataclass(frozen=True)
class PurifiedState:
    """Pure state of every trusted mode before the channel.

    ``detector_mode`` is the ancilla that meets Bob's mode on his detector
    beamsplitter (transmittance ``detector_transmittance``) after the
    channel, or ``None`` for an ideal detector.
    """

    covariance: np.ndarray = field(repr=False)
    alice_mode: int = 0
    bob_mode: int = 1
    detector_mode: int | None = None
    detector_transmittance: float = 1.0
    label: str = ""

    @property
    def n_modes(self):
        return self.covariance.shape[0] // 2

    def purity_residual(self):
        return purity_residual(self.covariance)

    def after_channel(self, channel):
        """Trusted-mode covariance after the channel and Bob's detector."""
        gamma = lossy_channel(self.covariance, self.bob_mode, channel.eta, channel.epsilon)
        if self.detector_mode is not None:
            s = beamsplitter(self.detector_transmittance, self.bob_mode, self.detector_mode, self.n_modes)
            gamma = apply_symplectic(gamma, s)
        return gamma


def attach_detector(gamma, d, alice_mode=0, bob_mode=1, label=""):
    """Append the EPR ancilla purifying Bob's detector to a pure state."""
    t, vn, _ = detector_dilation(d)
    if t == 1.0:
        return PurifiedState(np.asarray(gamma, dtype=float), alice_mode, bob_mode, label=label)
    n = gamma.shape[0] // 2
    full = direct_sum(gamma, two_mode_squeezed_vacuum(vn))
    return PurifiedState(full, alice_mode, bob_mode, n, t, label)


def _epr_source(p):
    """EPR pair on modes (0, 1) plus partner modes purifying squeezer noise."""
    nu = np.sqrt(1.0 + p.V0 * p.delta_V0)
    if nu == 1.0:
        gamma = np.diag([p.V0, 1.0 / p.V0, 1.0 / p.V0, p.V0])
        extra = 0
    else:
        # each squeezer = thermal nu squeezed; its purifying partner sits at 2, 3
        pair = two_mode_squeezed_vacuum(nu)
        gamma = submatrix(direct_sum(pair, pair), [0, 2, 1, 3])
        r = 0.5 * np.log(p.V0 / nu)
        gamma = apply_symplectic(gamma, squeezer(r, 0, 4) @ squeezer(-r, 1, 4))
        extra = 2
    n = 2 + extra
    gamma = apply_symplectic(gamma, beamsplitter(0.5, 0, 1, n))
    return gamma, extra


def _alice_weights(w, k, v_e, t_m, var_t, cov_t):
    # coefficients (alpha, beta) on A and C of Alice's data with minimal variance
    a_cov = np.sqrt(t_m) * k
    b_cov = np.sqrt(1.0 - t_m) * np.sqrt(max(v_e * v_e - 1.0, 0.0))
    den = a_cov ** 2 / w + b_cov ** 2 / v_e
    if den <= 0.0 or cov_t == 0.0:
        return 0.0, 0.0, var_t
    lam = cov_t / den
    alpha, beta = lam * a_cov / w, lam * b_cov / v_e
    deficit = var_t - cov_t ** 2 / den
    if deficit < -1e-12 * max(1.0, var_t):
        raise SolverError(f"Alice's data cannot be emulated (variance deficit {deficit:.3g})")
    return alpha, beta, max(deficit, 0.0)


def theoretical_purification(p, d, basis="x", modulation_transmittance=0.9,
                             ancilla_variance=0.1):
    """Pure state emulating the analytic protocol in one measurement basis.

    Mode layout: 0 = Alice (A), 1 = Bob (B), 2/3 = modulation EPR pair
    (C, D), 4 = squeezed ancilla (F), then partners purifying squeezer
    noise (if any) and Bob's detector ancilla pair (if the detector is
    not ideal).

    Bob's mode meets D on a beamsplitter of transmittance
    ``modulation_transmittance``; the EPR variance of (C, D) is chosen so
    Bob's input variance equals ``V_EPR + ΔV`` exactly. Alice's record is
    the homodyne of a combination of A, C and the ancilla F (squeezed to
    ``ancilla_variance`` along ``basis``) whose statistics reproduce the
    weighted data ``x_M + g x_HD`` in ``basis``.
    """
    q = {"x": 0, "p": 1}[basis]
    if not 0.0 < modulation_transmittance < 1.0:
        raise ValueError("modulation_transmittance must lie in (0, 1)")
    w, k = p.v_epr, p.c_epr
    var_t = p.g ** 2 * w + p.delta_V
    cov_t = p.g * k + p.delta_V
    if var_t <= 0.0:
        raise ValueError("Alice holds no data (g = 0 and no modulation)")

    src, extra = _epr_source(p)
    n = 5 + extra
    if p.delta_V > 0.0:
        t_m = modulation_transmittance
        v_e = w + p.delta_V / (1.0 - t_m)
        if v_e > MAX_ENTANGLED_VARIANCE:
            suggested = 1.0 - p.delta_V / (MAX_ENTANGLED_VARIANCE - w)
            raise ValueError(
                f"modulation EPR variance {v_e:.3g} too large; use "
                f"modulation_transmittance <= {suggested:.6g}"
            )
    else:
        t_m, v_e = 1.0, 1.0
    sq = np.diag([ancilla_variance, 1.0 / ancilla_variance])
    if q == 1:
        sq = sq[::-1, ::-1]
    # direct sum orders modes (A, B, partners..., C, D, F); move partners last
    gamma = direct_sum(src, two_mode_squeezed_vacuum(v_e), sq)
    order = [0, 1, 2 + extra, 3 + extra, 4 + extra] + [2 + i for i in range(extra)]
    gamma = submatrix(gamma, order)

    s = beamsplitter(t_m, 1, 3, n)
    alpha, beta, deficit = _alice_weights(w, k, v_e, t_m, var_t, cov_t)
    phi2 = deficit / ancilla_variance
    ab2 = alpha ** 2 + beta ** 2
    norm2 = ab2 + phi2
    t_a = alpha ** 2 / ab2 if ab2 > 0 else 1.0
    t_g = ab2 / norm2
    r = 0.5 * np.log(norm2) * (1 if q == 0 else -1)
    s = squeezer(r, 0, n) @ beamsplitter(t_g, 0, 4, n) @ beamsplitter(t_a, 0, 2, n) @ s
    gamma = apply_symplectic(gamma, s)
    return attach_detector(gamma, d, label=f"theoretical-{basis}")
