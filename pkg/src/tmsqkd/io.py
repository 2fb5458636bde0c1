"""File formats: covariance matrices, reports, tables and run manifests."""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TmsQkdError
from .symplectic import require_physical

SCHEMA_VERSION = 1
ORDERINGS = ("interleaved", "by-mode", "by-quadrature")
MANIFEST_SUFFIX = ".manifest.json"


class FileFormatError(TmsQkdError, ValueError):
    """An input file does not follow the expected schema."""


@dataclass
class CovarianceFile:
    """Covariance matrix in interleaved ordering with free-form metadata."""

    matrix: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_modes(self):
        return self.matrix.shape[0] // 2


def _reorder(n, ordering):
    # index map taking the file ordering to (x1, p1, x2, p2, ...)
    if ordering in ("interleaved", "by-mode"):
        return np.arange(2 * n)
    return np.array([q * n + m for m in range(n) for q in range(2)])


def save_covariance(path, gamma, metadata=None, ordering="interleaved"):
    """Write ``gamma`` (interleaved) to a JSON covariance file.

    ``ordering="by-quadrature"`` stores ``(x1, ..., xN, p1, ..., pN)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}")
    n = gamma.shape[0] // 2
    idx = np.argsort(_reorder(n, ordering))
    stored = gamma[np.ix_(idx, idx)]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n_modes": n,
        "ordering": ordering,
        "units": "SNU",
        "entries": [float(v) for v in stored.ravel()],
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _field(doc, name, kind, path):
    if name not in doc:
        raise FileFormatError(f"{path}: missing field '{name}'")
    value = doc[name]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise FileFormatError(f"{path}: field '{name}' has the wrong type")
    return value


def load_covariance(path, check_physical=True):
    """Read a covariance file and return it in interleaved ordering.

    Raises
    ------
    FileFormatError
        Invalid JSON (with line and column), missing or mistyped fields,
        wrong units or a non-symmetric matrix.
    UnphysicalStateError
        If ``check_physical`` and the matrix violates the uncertainty
        principle; the message reports the minimum symplectic eigenvalue.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: top level must be an object")
    version = _field(doc, "schema_version", int, path)
    if version != SCHEMA_VERSION:
        raise FileFormatError(f"{path}: unsupported schema_version {version}")
    units = _field(doc, "units", str, path)
    if units != "SNU":
        raise FileFormatError(f"{path}: units must be 'SNU', got {units!r}")
    ordering = _field(doc, "ordering", str, path)
    if ordering not in ORDERINGS:
        raise FileFormatError(f"{path}: unknown ordering {ordering!r}")
    n = _field(doc, "n_modes", int, path)
    entries = _field(doc, "entries", list, path)
    if n < 1 or len(entries) != 4 * n * n:
        raise FileFormatError(f"{path}: expected {4 * n * n} entries for {n} modes, got {len(entries)}")
    for i, v in enumerate(entries):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise FileFormatError(f"{path}: entry {i} is not a finite number")
    stored = np.array(entries, dtype=float).reshape(2 * n, 2 * n)
    perm = _reorder(n, ordering)
    gamma = stored[np.ix_(perm, perm)]
    scale = max(1.0, float(np.max(np.abs(gamma))))
    if np.max(np.abs(gamma - gamma.T)) > 1e-10 * scale:
        raise FileFormatError(f"{path}: matrix is not symmetric")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise FileFormatError(f"{path}: metadata must be an object")
    if check_physical:
        require_physical(gamma, f"{path}")
    return CovarianceFile(gamma, metadata)


def round_sig(value, digits=12):
    """Round floats (recursively) to ``digits`` significant digits."""
    if isinstance(value, dict):
        return {k: round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return round_sig(value.tolist(), digits)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{digits}g}")
    return value


def dumps_report(obj):
    """Deterministic JSON text with 12-significant-digit numbers."""
    return json.dumps(round_sig(obj), indent=2, sort_keys=True) + "\n"


def format_number(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.12g}"


def write_table(path, columns, rows):
    """CSV with a fixed header and 12-significant-digit numbers."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_number(v) for v in row])


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to regenerate an artifact bit-exactly.

    ``argv`` is the command line as invoked; ``inputs`` and ``outputs`` map
    the paths that appear in it to SHA-256 digests.
    """

    subcommand: str
    argv: list
    parameters: dict
    version: str
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "subcommand": self.subcommand,
            "argv": list(self.argv),
            "parameters": round_sig(self.parameters),
            "version": self.version,
            "seed": self.seed,
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
        }

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        try:
            return cls(doc["subcommand"], doc["argv"], doc["parameters"], doc["version"],
                       doc.get("seed"), doc.get("inputs", {}), doc.get("outputs", {}))
        except KeyError as exc:
            raise FileFormatError(f"{path}: missing field {exc}") from None


def manifest_path(artifact):
    return Path(str(artifact) + MANIFEST_SUFFIX)
