"""Inner optimizations, threshold solvers and parameter sweeps."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import NoThresholdError, TmsQkdError
from .protocol import DB_PER_KM, IDEAL_DETECTOR, ChannelParams, distance_to_transmittance
from .purification import MeasuredTwoModeMatrix, solve_purification
from .security import key_rate, key_rate_from_matrix

log = logging.getLogger(__name__)

GAIN_TOL = 1e-5
NOISE_TOL = 1e-4
NOISE_MAX = 50.0
NOISE_TOL_SNU = 1e-4
LOSS_TOL_DB = 0.01
LOSS_CAP_DB = 60.0
PRESCAN_POINTS = 32
MAX_EXPANSIONS = 20
THREADS_ENV = "TMSQKD_THREADS"


def _rate(p, c, d):
    return key_rate(p, c, d, check_basis=False).key_rate


def _argmax(values):
    # first index of the maximum: ties go to the smallest parameter value
    return int(np.argmax(np.asarray(values)))


def _refine(f, grid, values, tol):
    """Bounded scalar maximization around the best grid point."""
    i = _argmax(values)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best_x, best_f = grid[i], values[i]
    if hi > lo:
        res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": tol})
        if -res.fun > best_f:
            best_x, best_f = float(res.x), float(-res.fun)
    return best_x, best_f


def is_unimodal(values, atol=1e-12):
    """True if ``values`` rise (weakly) to a single peak and then fall."""
    diffs = np.diff(values)
    signs = np.where(diffs > atol, 1, np.where(diffs < -atol, -1, 0))
    signs = signs[signs != 0]
    return bool(np.all(np.diff(signs) <= 0))


def optimize_gain(p, c, d=IDEAL_DETECTOR, tol=GAIN_TOL):
    """Weight ``g`` in ``[0, g_max]`` maximizing the key rate.

    A 32-point scan locates the best grid cell, which is then refined by a
    bounded Brent search to ``tol``. If the scan is not unimodal the result
    is still the refined grid maximum; the flag is logged.

    Returns
    -------
    (float, float)
        Optimal gain and the key rate it achieves.
    """
    def f(g):
        return _rate(replace(p, g=float(g)), c, d)

    grid = np.linspace(0.0, p.g_max, PRESCAN_POINTS)
    values = [f(g) for g in grid]
    if not is_unimodal(values):
        log.debug("gain scan is not unimodal for %s, %s", p, c)
    return _refine(f, grid, values, tol)


def optimize_bob_noise(p, c, d=IDEAL_DETECTOR, tol=NOISE_TOL, noise_max=NOISE_MAX):
    """Trusted noise added to Bob's data that maximizes the key rate.

    Scans ``{0}`` plus a logarithmic grid up to ``noise_max`` SNU, then
    refines the best cell. Returns ``(noise, key_rate)``.
    """
    def f(n):
        return _rate(p, c, replace(d, trusted_added_noise=float(n)))

    return _scan_noise(f, tol, noise_max)


def optimize_bob_noise_for_matrix(gamma_ab, c, d=IDEAL_DETECTOR, basis="x", tol=NOISE_TOL,
                                  noise_max=NOISE_MAX):
    """:func:`optimize_bob_noise` for a measured pre-channel two-mode matrix."""
    solved = solve_purification(MeasuredTwoModeMatrix.from_covariance(gamma_ab))

    def f(n):
        dn = replace(d, trusted_added_noise=float(n))
        return key_rate_from_matrix(gamma_ab, c, dn, basis, solved=solved).key_rate

    return _scan_noise(f, tol, noise_max)


def _scan_noise(f, tol, noise_max):
    grid = np.concatenate([[0.0], np.logspace(-3, np.log10(noise_max), 24)])
    values = [f(n) for n in grid]
    return _refine(f, grid, values, tol)


@dataclass(frozen=True)
class OptimizedPoint:
    """Best settings found for one operating point."""

    protocol: object
    detector: object
    key_rate: float

    @property
    def g(self):
        return self.protocol.g

    @property
    def bob_noise(self):
        return self.detector.trusted_added_noise


def optimize_parameters(p, c, d=IDEAL_DETECTOR, optimize_g=True, optimize_bob_noise_flag=True,
                        cycles=2, joint=False):
    """Coordinate ascent over the gain and Bob's added noise.

    With ``joint`` the coordinate result is polished by a Nelder-Mead search
    over both parameters together; it is kept only if it improves the rate.
    """
    rate = _rate(p, c, d)
    for _ in range(cycles if optimize_g and optimize_bob_noise_flag else 1):
        if optimize_g:
            g, rate = optimize_gain(p, c, d)
            p = replace(p, g=g)
        if optimize_bob_noise_flag:
            n, rate = optimize_bob_noise(p, c, d)
            d = replace(d, trusted_added_noise=n)
    if joint and optimize_g and optimize_bob_noise_flag:
        def neg(v):
            g = float(np.clip(v[0], 0.0, p.g_max))
            n = float(np.clip(v[1], 0.0, NOISE_MAX))
            return -_rate(replace(p, g=g), c, replace(d, trusted_added_noise=n))
        res = minimize(neg, [p.g, d.trusted_added_noise], method="Nelder-Mead",
                       options={"xatol": GAIN_TOL, "fatol": 1e-12})
        if -res.fun > rate:
            g = float(np.clip(res.x[0], 0.0, p.g_max))
            n = float(np.clip(res.x[1], 0.0, NOISE_MAX))
            p, d, rate = replace(p, g=g), replace(d, trusted_added_noise=n), float(-res.fun)
    return OptimizedPoint(p, d, rate)


@dataclass(frozen=True)
class ThresholdResult:
    """Root of the optimized key rate along one parameter.

    ``value`` is the midpoint of the final bracket ``(lower, upper)``, where
    the rate is positive at ``lower`` and not positive at ``upper``. When
    ``cap_hit`` is set the rate stayed positive up to ``upper`` and
    ``value`` is that cap.
    """

    value: float
    lower: float
    upper: float
    key_rate: float
    iterations: int
    g: float
    bob_noise: float
    unit: str
    cap_hit: bool = False
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "value": self.value, "lower": self.lower, "upper": self.upper,
            "key_rate": self.key_rate, "iterations": self.iterations,
            "g": self.g, "bob_noise": self.bob_noise, "unit": self.unit,
            "cap_hit": self.cap_hit, **self.extra,
        }


def _bisect(f, lo, hi, tol):
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid).key_rate > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, hi, it


def _optimizer(p, d, optimize_g, optimize_noise):
    def evaluate(c):
        return optimize_parameters(p, c, d, optimize_g, optimize_noise)
    return evaluate


def tolerable_excess_noise(p, d=IDEAL_DETECTOR, eta=0.1, optimize_g=True, optimize_bob_noise=True,
                           tol=NOISE_TOL_SNU, bracket=(0.0, 5.0)):
    """Largest channel excess noise with a positive optimized key rate.

    Raises
    ------
    NoThresholdError
        If the rate is not positive at zero excess noise, or stays positive
        after 20 doublings of the bracket.
    """
    evaluate = _optimizer(p, d, optimize_g, optimize_bob_noise)

    def f(eps):
        return evaluate(ChannelParams(eta, eps))

    lo, hi = bracket
    if f(lo).key_rate <= 0:
        raise NoThresholdError(f"key rate not positive at epsilon = {lo} (eta = {eta})")
    for _ in range(MAX_EXPANSIONS):
        if f(hi).key_rate <= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NoThresholdError(f"key rate still positive at epsilon = {hi}")
    lo, hi, it = _bisect(f, lo, hi, tol)
    mid = 0.5 * (lo + hi)
    best = f(mid)
    return ThresholdResult(mid, lo, hi, best.key_rate, it, best.g, best.bob_noise, "SNU")


def max_tolerable_loss(p, d=IDEAL_DETECTOR, epsilon=0.0, optimize_g=True, optimize_bob_noise=True,
                       tol=LOSS_TOL_DB, cap=LOSS_CAP_DB, db_per_km=DB_PER_KM):
    """Largest channel loss in dB with a positive optimized key rate.

    The search is capped at ``cap`` dB; if the rate is still positive there
    the result carries ``cap_hit=True``. ``extra["km"]`` converts the loss
    to fiber length at ``db_per_km``.
    """
    evaluate = _optimizer(p, d, optimize_g, optimize_bob_noise)

    def f(loss_db):
        return evaluate(ChannelParams.from_loss_db(loss_db, epsilon))

    if f(0.0).key_rate <= 0:
        raise NoThresholdError(f"key rate not positive without loss (epsilon = {epsilon})")
    at_cap = f(cap)
    if at_cap.key_rate > 0:
        return ThresholdResult(cap, cap, cap, at_cap.key_rate, 0, at_cap.g, at_cap.bob_noise,
                               "dB", cap_hit=True, extra={"km": cap / db_per_km})
    lo, hi, it = _bisect(f, 0.0, cap, tol)
    mid = 0.5 * (lo + hi)
    best = f(mid)
    return ThresholdResult(mid, lo, hi, best.key_rate, it, best.g, best.bob_noise, "dB",
                           extra={"km": mid / db_per_km})


SWEEP_VARIABLES = ("distance_km", "eta", "epsilon", "modulation", "squeezing_db")


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional scan of the optimized key rate.

    ``modulation_mode`` decides whether the ``modulation`` axis (and the
    fixed ``protocol.delta_V``) means the added classical variance
    (``"added"``) or Bob's total variance above shot noise (``"total"``).
    """

    variable: str
    start: float
    stop: float
    points: int
    protocol: object
    channel: ChannelParams = ChannelParams()
    detector: object = IDEAL_DETECTOR
    scale: str = "linear"
    optimize_g: bool = True
    optimize_bob_noise: bool = True
    modulation_mode: str = "added"
    db_per_km: float = DB_PER_KM

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if self.points > 1 and not self.start < self.stop:
            raise ValueError("sweep range needs start < stop")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("log sweeps need a positive start")
        if self.modulation_mode not in ("added", "total"):
            raise ValueError("modulation_mode must be 'added' or 'total'")

    def grid(self):
        if self.points == 1:
            return np.array([float(self.start)])
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)

    def point(self, x):
        """Protocol and channel settings at grid value ``x``."""
        p, c = self.protocol, self.channel
        if self.variable == "distance_km":
            c = replace(c, eta=distance_to_transmittance(x, self.db_per_km))
        elif self.variable == "eta":
            c = replace(c, eta=float(x))
        elif self.variable == "epsilon":
            c = replace(c, epsilon=float(x))
        elif self.variable == "squeezing_db":
            p = replace(p, V0=10.0 ** (-x / 10.0))
        if self.variable == "modulation":
            p = replace(p, delta_V=float(x))
        if self.modulation_mode == "total":
            p = p.with_total_modulation(p.delta_V)
        return p, c


SWEEP_COLUMNS = ("x", "key_rate", "g_opt", "noise_opt", "i_ab", "chi_be", "error")


@dataclass(frozen=True)
class SweepRow:
    x: float
    key_rate: float
    g_opt: float
    noise_opt: float
    i_ab: float
    chi_be: float
    error: str = ""


def _sweep_point(spec, x):
    try:
        p, c = spec.point(x)
        best = optimize_parameters(p, c, spec.detector, spec.optimize_g, spec.optimize_bob_noise)
        rep = key_rate(best.protocol, c, best.detector, check_basis=False)
        return SweepRow(float(x), rep.key_rate, best.g, best.bob_noise, rep.i_ab, rep.chi_be)
    except (TmsQkdError, ValueError, ArithmeticError) as exc:
        nan = float("nan")
        return SweepRow(float(x), nan, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sweep(spec, threads=None):
    """Evaluate the optimized key rate on every grid point of ``spec``.

    Points may be evaluated concurrently; rows are always returned in grid
    order and failures are recorded in the row's ``error`` field.
    """
    xs = spec.grid()
    threads = default_threads() if threads is None else threads
    if threads <= 1:
        return [_sweep_point(spec, x) for x in xs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda x: _sweep_point(spec, x), xs))


def max_secure_distance(rows):
    """Largest swept value with a positive key rate, or ``None``."""
    good = [r.x for r in rows if not r.error and r.key_rate > 0]
    return max(good) if good else None
