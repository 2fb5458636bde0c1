"""Seeded sampling of the prepare-and-measure pipeline.

Each protocol run yields, per state, Alice's modulation draw ``x_M``, her
homodyne outcome ``x_HD`` on the kept EPR arm and Bob's outcome ``x_B``,
together with the measured quadrature. Samples are drawn from the exact
zero-mean Gaussian law of these three records, so their second moments are
those of the analytic model.

Random numbers come from ``numpy.random.Generator`` driven by the
counter-based Philox bit generator; normals use numpy's ziggurat transform.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .protocol import IDEAL_DETECTOR, ChannelParams
from .purification import MeasuredTwoModeMatrix
from .security import key_rate_from_matrix

BASES = ("x", "p")
MIN_SAMPLES_PER_BASIS = 100
FRAME_MAGIC = b"TMSQ"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<4sIQ")
CSV_HEADER = ("basis", "x_M", "x_HD", "x_B")


@dataclass(frozen=True)
class RunConfig:
    """Settings of one simulated acquisition.

    ``schedule`` is ``"blocks"`` (all x samples, then all p samples, as in
    a sequential measurement) or ``"interleaved"`` (alternating x, p).
    """

    protocol: object
    channel: ChannelParams = ChannelParams()
    detector: object = IDEAL_DETECTOR
    n_samples: int = 200_000
    seed: int = 0
    schedule: str = "blocks"

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.schedule not in ("blocks", "interleaved"):
            raise ValueError(f"schedule must be 'blocks' or 'interleaved', got {self.schedule!r}")


@dataclass(frozen=True)
class SampleBlock:
    """Per-state records; ``basis`` holds 0 for x and 1 for p."""

    x_M: np.ndarray = field(repr=False)
    x_HD: np.ndarray = field(repr=False)
    x_B: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.basis)
        if not (len(self.x_M) == len(self.x_HD) == len(self.x_B) == n):
            raise ValueError("sample columns have different lengths")
        for col in (self.x_M, self.x_HD, self.x_B):
            if not np.all(np.isfinite(col)):
                raise ValueError("samples must be finite")
        if np.any((self.basis != 0) & (self.basis != 1)):
            raise ValueError("basis flags must be 0 (x) or 1 (p)")

    def __len__(self):
        return len(self.basis)

    def select(self, basis):
        """Records measured in ``basis`` (``"x"`` or ``"p"``)."""
        mask = self.basis == BASES.index(basis)
        return SampleBlock(self.x_M[mask], self.x_HD[mask], self.x_B[mask], self.basis[mask])


def record_covariance(p, c, d, basis="x"):
    """Exact covariance of ``(x_M, x_HD, x_B)`` in one basis.

    In the p basis the displacement enters Bob's mode with a minus sign and
    the EPR correlation is negative, which gives Alice's weighted data the
    ``σ_z`` correlation pattern of the analytic matrix.
    """
    sign = 1.0 if basis == "x" else -1.0
    t = np.sqrt(c.eta * d.efficiency)
    vb = d.efficiency * (c.eta * (p.v_epr + p.delta_V + c.epsilon) + 1.0 - c.eta)
    vb += 1.0 - d.efficiency + d.added_noise
    return np.array([
        [p.delta_V, 0.0, sign * t * p.delta_V],
        [0.0, p.v_epr, sign * t * p.c_epr],
        [sign * t * p.delta_V, sign * t * p.c_epr, vb],
    ])


def _factor(cov):
    # Cholesky factor; records with zero variance get an all-zero row
    live = np.diag(cov) > 0
    out = np.zeros_like(cov)
    out[np.ix_(live, live)] = np.linalg.cholesky(cov[np.ix_(live, live)])
    return out


def basis_schedule(n, schedule="blocks"):
    if schedule == "blocks":
        return (np.arange(n) >= (n + 1) // 2).astype(np.uint8)
    return (np.arange(n) % 2).astype(np.uint8)


def simulate_run(cfg):
    """Draw ``cfg.n_samples`` records of the pipeline."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    basis = basis_schedule(cfg.n_samples, cfg.schedule)
    z = rng.standard_normal((cfg.n_samples, 3))
    out = np.empty_like(z)
    for k, b in enumerate(BASES):
        mask = basis == k
        factor = _factor(record_covariance(cfg.protocol, cfg.channel, cfg.detector, b))
        out[mask] = z[mask] @ factor.T
    return SampleBlock(out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(), basis)


def weighted_alice(block, g):
    """Alice's key variable ``x_M + g x_HD``."""
    return block.x_M + g * block.x_HD


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance of Alice's weighted data and Bob's record."""

    matrix: MeasuredTwoModeMatrix
    stderr: MeasuredTwoModeMatrix
    n_x: int
    n_p: int


def _moments(a, b):
    n = len(a)
    cov = np.cov(a, b, ddof=1)
    va, vb, c = cov[0, 0], cov[1, 1], cov[0, 1]
    root = np.sqrt(2.0 / (n - 1))
    se_c = np.sqrt((va * vb + c * c) / (n - 1))
    return (va, vb, c), (va * root, vb * root, se_c)


def estimate_covariance(block, g):
    """Unbiased covariance estimate with Gaussian standard errors.

    Variance errors are ``V √(2/(n-1))``; covariance errors are
    ``√((V_A V_B + C²)/(n-1))``.
    """
    est, err, counts = {}, {}, {}
    for b in BASES:
        sub = block.select(b)
        n = len(sub)
        if n < MIN_SAMPLES_PER_BASIS:
            raise ValueError(f"only {n} samples in the {b} basis; need {MIN_SAMPLES_PER_BASIS}")
        est[b], err[b] = _moments(weighted_alice(sub, g), sub.x_B)
        counts[b] = n

    def pack(d):
        return MeasuredTwoModeMatrix(
            va_x=float(d["x"][0]), va_p=float(d["p"][0]),
            vb_x=float(d["x"][1]), vb_p=float(d["p"][1]),
            c_x=float(d["x"][2]), c_p=float(d["p"][2]),
        )

    return CovarianceEstimate(pack(est), pack(err), counts["x"], counts["p"])


FIELDS = ("va_x", "va_p", "vb_x", "vb_p", "c_x", "c_p")


def key_rate_with_uncertainty(estimate, c, d=IDEAL_DETECTOR, basis="x", rel_step=1e-4):
    """Key rate of an estimated pre-channel matrix and its standard error.

    The error is propagated linearly from the per-entry standard errors,
    treating entries as independent.
    """
    m = estimate.matrix
    base = key_rate_from_matrix(m.to_covariance(), c, d, basis).key_rate
    var = 0.0
    for name in FIELDS:
        value, se = getattr(m, name), getattr(estimate.stderr, name)
        h = rel_step * max(abs(value), 1.0)
        up = key_rate_from_matrix(_shifted(m, name, h).to_covariance(), c, d, basis).key_rate
        dn = key_rate_from_matrix(_shifted(m, name, -h).to_covariance(), c, d, basis).key_rate
        var += ((up - dn) / (2 * h) * se) ** 2
    return base, float(np.sqrt(var))


def _shifted(m, name, h):
    values = {f: getattr(m, f) for f in FIELDS}
    values[name] += h
    return MeasuredTwoModeMatrix(**values)


@dataclass(frozen=True)
class Ellipse:
    """Ellipse ``2σ`` of a 2-D Gaussian cloud; ``angle`` in radians from the first axis."""

    center: tuple
    semi_major: float
    semi_minor: float
    angle: float

    @property
    def eccentricity(self):
        return float(np.sqrt(max(0.0, 1.0 - (self.semi_minor / self.semi_major) ** 2)))

    @property
    def axis_ratio(self):
        return self.semi_major / self.semi_minor


def covariance_ellipse(a, b, n_std=2.0):
    cov = np.cov(a, b, ddof=1)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    major = vecs[:, 1]
    return Ellipse(
        center=(float(np.mean(a)), float(np.mean(b))),
        semi_major=float(n_std * np.sqrt(vals[1])),
        semi_minor=float(n_std * np.sqrt(vals[0])),
        angle=float(np.arctan2(major[1], major[0])),
    )


@dataclass(frozen=True)
class ScatterTable:
    """Plot-ready cloud of ``(x_A, x_B)`` in one basis."""

    x_a: np.ndarray = field(repr=False)
    x_b: np.ndarray = field(repr=False)
    ellipse: Ellipse
    shot_noise_radius: float


def scatter_export(block, g, normalization="snu", basis="x"):
    """Weighted Alice data against Bob's data, with reference shapes.

    ``normalization="snu"`` keeps shot-noise units; ``"standardized"``
    divides each axis by its sample standard deviation. The shot-noise
    circle has the radius ``2`` of a two-standard-deviation vacuum contour.
    """
    sub = block.select(basis)
    xa, xb = weighted_alice(sub, g), sub.x_B
    if normalization == "standardized":
        xa, xb = xa / np.std(xa, ddof=1), xb / np.std(xb, ddof=1)
    elif normalization != "snu":
        raise ValueError(f"normalization must be 'snu' or 'standardized', got {normalization!r}")
    return ScatterTable(xa, xb, covariance_ellipse(xa, xb), 2.0)


def uncorrelated_control(table, seed=0):
    """Isotropic cloud with the same total variance as ``table``.

    The draw is whitened so its sample covariance is exactly
    ``(V_A + V_B)/2`` times the identity.
    """
    n = len(table.x_a)
    total = 0.5 * (np.var(table.x_a, ddof=1) + np.var(table.x_b, ddof=1))
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n, 2))
    z -= z.mean(axis=0)
    chol = np.linalg.cholesky(np.cov(z.T, ddof=1))
    z = np.linalg.solve(chol, z.T).T * np.sqrt(total)
    return ScatterTable(z[:, 0], z[:, 1], covariance_ellipse(z[:, 0], z[:, 1]), 2.0)


def write_samples_csv(block, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for b, m, h, x in zip(block.basis, block.x_M, block.x_HD, block.x_B):
            w.writerow((BASES[b], f"{m:.12g}", f"{h:.12g}", f"{x:.12g}"))


def read_samples_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4 or row[0] not in BASES:
                raise ValueError(f"{path}:{lineno}: malformed sample row")
            try:
                rows.append((BASES.index(row[0]), float(row[1]), float(row[2]), float(row[3])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric sample value") from None
    data = np.array(rows, dtype=float).reshape(-1, 4)
    return SampleBlock(data[:, 1], data[:, 2], data[:, 3], data[:, 0].astype(np.uint8))


def write_samples_binary(block, path):
    """Binary frame: magic, version (u32), count (u64), then rows of
    ``(basis, x_M, x_HD, x_B)`` as little-endian float64."""
    rows = np.column_stack([block.basis.astype("<f8"), block.x_M, block.x_HD, block.x_B])
    with open(path, "wb") as fh:
        fh.write(_FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, len(block)))
        fh.write(rows.astype("<f8").tobytes())


def read_samples_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FRAME_HEADER.size:
        raise ValueError(f"{path}: truncated frame header")
    magic, version, count = _FRAME_HEADER.unpack_from(raw)
    if magic != FRAME_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FRAME_VERSION:
        raise ValueError(f"{path}: unsupported frame version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_FRAME_HEADER.size)
    if body.size != 4 * count:
        raise ValueError(f"{path}: expected {count} rows, found {body.size / 4:g}")
    rows = body.reshape(count, 4)
    return SampleBlock(rows[:, 1].copy(), rows[:, 2].copy(), rows[:, 3].copy(),
                       rows[:, 0].astype(np.uint8))
