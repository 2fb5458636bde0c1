"""Reference calculations coded independently of the library internals."""

import numpy as np


def omega(n):
    return np.kron(np.eye(n), [[0.0, 1.0], [-1.0, 0.0]])


def nu_complex(gamma):
    # symplectic spectrum from the complex eigenvalues of i Ω γ
    n = gamma.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(1j * omega(n) @ gamma).real))
    return ev[::2]


def entropy(gamma):
    total = 0.0
    for nu in nu_complex(gamma):
        x = max((nu - 1) / 2, 0.0)
        if x > 1e-15:
            total += (x + 1) * np.log2(x + 1) - x * np.log2(x)
    return total


def tmsv(v):
    c = np.sqrt(v * v - 1)
    return np.array([[v, 0, c, 0], [0, v, 0, -c], [c, 0, v, 0], [0, -c, 0, v]])


def bs(t, i, j, n):
    s = np.eye(2 * n)
    a, b = np.sqrt(t), np.sqrt(1 - t)
    for q in range(2):
        s[2 * i + q, 2 * i + q] = a
        s[2 * i + q, 2 * j + q] = b
        s[2 * j + q, 2 * i + q] = -b
        s[2 * j + q, 2 * j + q] = a
    return s


def block_diag(*blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    k = 0
    for b in blocks:
        out[k:k + b.shape[0], k:k + b.shape[0]] = b
        k += b.shape[0]
    return out


def eve_holevo_cloner(bob_input_var, eta, eps):
    """Eve's information on Bob's x outcome, computed on Eve's modes.

    Bob's input is one arm of a pure EPR pair of variance
    ``bob_input_var``; the channel is an entangling cloner whose EPR pair
    (variance ``1 + η ε/(1 - η)``) Eve keeps.
    Modes: 0 = reference arm, 1 = Bob, 2 = Eve's injected arm, 3 = Eve's kept arm.
    """
    w = 1 + eta * eps / (1 - eta)
    g = block_diag(tmsv(bob_input_var), tmsv(w))
    s = bs(eta, 1, 2, 4)
    g = s @ g @ s.T
    eve = [4, 5, 6, 7]
    s_e = entropy(g[np.ix_(eve, eve)])
    k = 2  # Bob's x quadrature
    cond = g - np.outer(g[:, k], g[k, :]) / g[k, k]
    s_e_b = entropy(cond[np.ix_(eve, eve)])
    return s_e - s_e_b


def coherent_eb_rate(delta_v, eta, eps):
    """Reverse-reconciliation rate of Gaussian-modulated coherent states."""
    v = delta_v + 1
    vb = eta * (v + eps) + 1 - eta
    i_ab = 0.5 * np.log2(vb / (1 + eta * eps))
    return i_ab - eve_holevo_cloner(v, eta, eps), i_ab


def coherent_ab_side_rate(delta_v, eta, eps):
    """Same rate with Eve's entropies taken from the purified Alice-Bob state.

    Valid at ``eta = 1`` where the cloner picture degenerates.
    """
    v = delta_v + 1
    vb = eta * (v + eps) + 1 - eta
    c = np.sqrt(eta * (v * v - 1))
    g = np.array([[v, 0, c, 0], [0, v, 0, -c], [c, 0, vb, 0], [0, -c, 0, vb]])
    k = 2
    cond = g - np.outer(g[:, k], g[k, :]) / g[k, k]
    s_e_b = entropy(cond[:2, :2])
    i_ab = 0.5 * np.log2(vb / (1 + eta * eps))
    return i_ab - (entropy(g) - s_e_b), i_ab
