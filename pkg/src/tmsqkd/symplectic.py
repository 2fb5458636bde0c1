"""Linear algebra for Gaussian states in the covariance-matrix picture.

Conventions used throughout the package:

* quadratures are interleaved, ``(x1, p1, x2, p2, ...)``;
* variances are in shot-noise units (SNU), so the vacuum is the identity;
* a covariance matrix is a plain ``(2N, 2N)`` float array.
"""

import numpy as np
from numba import njit

from .errors import UnphysicalStateError

SYMMETRY_RTOL = 1e-10
PHYSICAL_TOL = 1e-9
JACOBI_TOL = 1e-12


def symplectic_form(n):
    """Return the ``2n x 2n`` symplectic form ``⊕ [[0, 1], [-1, 0]]``."""
    if n < 1:
        raise ValueError(f"number of modes must be >= 1, got {n}")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def n_modes(gamma):
    """Number of modes of a covariance matrix, validating its shape."""
    gamma = np.asarray(gamma)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
        raise ValueError(f"expected a (2N, 2N) matrix, got shape {gamma.shape}")
    return gamma.shape[0] // 2


def _check_symmetric(gamma):
    scale = max(1.0, float(np.max(np.abs(gamma))))
    if np.max(np.abs(gamma - gamma.T)) > SYMMETRY_RTOL * scale:
        raise UnphysicalStateError("covariance matrix is not symmetric")


@njit(cache=True)
def _jacobi_eigenvalues(a, tol, max_sweeps):
    # Cyclic Jacobi on a symmetric matrix; returns (eigenvalues, converged).
    a = a.copy()
    n = a.shape[0]
    norm = np.sqrt(np.sum(a * a))
    converged = False
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) <= tol * norm:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
    out = np.empty(n)
    for i in range(n):
        out[i] = a[i, i]
    return out, converged


def jacobi_eigenvalues(a, tol=JACOBI_TOL, max_sweeps=100):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Iteration stops once the off-diagonal Frobenius norm drops below
    ``tol`` times the norm of the matrix. Eigenvalues are returned in
    ascending order.
    """
    a = np.ascontiguousarray(a, dtype=float)
    vals, converged = _jacobi_eigenvalues(a, tol, max_sweeps)
    if not converged:
        raise ArithmeticError("Jacobi iteration did not converge")
    return np.sort(vals)


def symplectic_eigenvalues(gamma):
    """Symplectic spectrum of a positive-definite covariance matrix.

    The ``N`` values ``ν_k`` are the moduli of the eigenvalues ``±iν_k`` of
    ``Ωγ``. They are obtained as square roots of the (doubly degenerate)
    eigenvalues of the symmetric matrix ``Lᵀ Ω γ Ωᵀ L`` with ``γ = L Lᵀ``,
    which is similar to ``γ^{1/2} Ω γ Ωᵀ γ^{1/2}``.

    Returns
    -------
    ndarray
        Symplectic eigenvalues in descending order.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = n_modes(gamma)
    _check_symmetric(gamma)
    gamma = 0.5 * (gamma + gamma.T)
    try:
        chol = np.linalg.cholesky(gamma)
    except np.linalg.LinAlgError:
        raise UnphysicalStateError("covariance matrix is not positive definite") from None
    omega = symplectic_form(n)
    m = chol.T @ omega @ gamma @ omega.T @ chol
    m = 0.5 * (m + m.T)
    squares = jacobi_eigenvalues(m)[::-1]
    # eigenvalues come in equal pairs; average each pair
    paired = 0.5 * (squares[0::2] + squares[1::2])
    return np.sqrt(np.clip(paired, 0.0, None))


def is_physical(gamma, tol=PHYSICAL_TOL):
    """True iff ``gamma`` is a valid covariance matrix (``γ + iΩ ≥ 0``)."""
    try:
        nu = symplectic_eigenvalues(gamma)
    except (UnphysicalStateError, ValueError):
        return False
    return bool(nu[-1] >= 1.0 - tol)


def require_physical(gamma, what="covariance matrix"):
    """Raise :class:`UnphysicalStateError` unless ``gamma`` is physical."""
    try:
        nu = symplectic_eigenvalues(gamma)
    except UnphysicalStateError as exc:
        raise UnphysicalStateError(f"{what}: {exc}") from None
    if nu[-1] < 1.0 - PHYSICAL_TOL:
        raise UnphysicalStateError(
            f"{what} violates the uncertainty principle "
            f"(minimum symplectic eigenvalue {nu[-1]:.6g} < 1)",
            min_symplectic_eigenvalue=float(nu[-1]),
        )
    return nu


def purity_residual(gamma):
    """Largest deviation of a symplectic eigenvalue from 1."""
    return float(np.max(np.abs(symplectic_eigenvalues(gamma) - 1.0)))


def _check_mode(mode, n):
    if not 0 <= mode < n:
        raise ValueError(f"mode index {mode} out of range for {n} modes")


def beamsplitter(transmittance, mode_a, mode_b, n):
    """Beamsplitter acting identically on both quadratures.

    Maps ``a -> √T a + √(1-T) b`` and ``b -> -√(1-T) a + √T b``.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    _check_mode(mode_a, n)
    _check_mode(mode_b, n)
    if mode_a == mode_b:
        raise ValueError("beamsplitter needs two distinct modes")
    t = np.sqrt(transmittance)
    r = np.sqrt(1.0 - transmittance)
    s = np.eye(2 * n)
    for q in range(2):
        i, j = 2 * mode_a + q, 2 * mode_b + q
        s[i, i] = t
        s[i, j] = r
        s[j, i] = -r
        s[j, j] = t
    return s


def squeezer(r, mode, n):
    """Single-mode squeezer ``diag(e^r, e^-r)`` on ``mode``.

    Acting on the vacuum it yields ``diag(e^{2r}, e^{-2r})``.
    """
    _check_mode(mode, n)
    s = np.eye(2 * n)
    s[2 * mode, 2 * mode] = np.exp(r)
    s[2 * mode + 1, 2 * mode + 1] = np.exp(-r)
    return s


def apply_symplectic(gamma, s):
    """Transform a covariance matrix, ``γ -> S γ Sᵀ``."""
    gamma = np.asarray(gamma, dtype=float)
    s = np.asarray(s, dtype=float)
    if gamma.shape != s.shape:
        raise ValueError(f"dimension mismatch: {gamma.shape} vs {s.shape}")
    out = s @ gamma @ s.T
    return 0.5 * (out + out.T)


def is_symplectic(s, tol=1e-10):
    """Check ``S Ω Sᵀ = Ω`` elementwise within ``tol``."""
    s = np.asarray(s, dtype=float)
    omega = symplectic_form(s.shape[0] // 2)
    return bool(np.max(np.abs(s @ omega @ s.T - omega)) <= tol)


def mode_indices(modes):
    """Row/column indices of the quadratures of ``modes``, in order."""
    return [2 * m + q for m in modes for q in range(2)]


def submatrix(gamma, modes):
    """Reduced covariance matrix of an ordered subset of modes."""
    gamma = np.asarray(gamma, dtype=float)
    n = n_modes(gamma)
    modes = list(modes)
    if not modes or len(set(modes)) != len(modes):
        raise ValueError(f"invalid mode subset {modes}")
    for m in modes:
        _check_mode(m, n)
    idx = mode_indices(modes)
    return gamma[np.ix_(idx, idx)].copy()


def direct_sum(*blocks):
    """Block-diagonal covariance matrix of independent subsystems."""
    size = sum(np.shape(b)[0] for b in blocks)
    out = np.zeros((size, size))
    k = 0
    for b in blocks:
        d = np.shape(b)[0]
        out[k:k + d, k:k + d] = b
        k += d
    return out


def condition_on_homodyne(gamma, measured_mode, quadrature="x"):
    """Covariance of the remaining modes after homodyning one mode.

    Implements ``γ_rest - σ (X γ_m X)^MP σᵀ`` where the Moore-Penrose
    inverse of the rank-one projected block is ``diag(1/γ_m[q, q], 0)``
    (quadrature slot ``q``). The result does not depend on the outcome.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = n_modes(gamma)
    _check_mode(measured_mode, n)
    if n < 2:
        raise ValueError("conditioning needs at least two modes")
    q = {"x": 0, "p": 1}[quadrature]
    k = 2 * measured_mode + q
    var = gamma[k, k]
    if not var > 0.0:
        raise UnphysicalStateError(f"measured quadrature variance {var} is not positive")
    rest = mode_indices([m for m in range(n) if m != measured_mode])
    sigma = gamma[rest, k]
    out = gamma[np.ix_(rest, rest)] - np.outer(sigma, sigma) / var
    return 0.5 * (out + out.T)
