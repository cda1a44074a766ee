"""Independent reference computations used by the tests.

Nothing here imports the package's numerical routines; each oracle is a
brute-force or textbook evaluation of the same quantity.
"""

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm, fractional_matrix_power, null_space


def tlm_rate_matrix(beta1, beta2=0.1, eps=(0.0, 50.0, 40.0), gammas=(1.0, 1.0, 1.0)):
    """Population generator W (dp/dt = W p) for the maser, levels (g, e_A, e_B)."""
    eg, ea, eb = eps
    g1, g2, g3 = gammas
    k = np.zeros((3, 3))  # k[i, j]: rate i -> j
    k[1, 0] = g1
    k[0, 1] = g1 * np.exp(-beta1 * (ea - eg))
    k[1, 2] = g2
    k[2, 1] = g2 * np.exp(-beta2 * (ea - eb))
    k[2, 0] = g3
    k[0, 2] = g3
    W = k.T.copy()
    np.fill_diagonal(W, -k.sum(axis=1))
    return W


def tlm_populations(beta1, **kw):
    v = null_space(tlm_rate_matrix(beta1, **kw))[:, 0]
    return v / v.sum()


def kmb_quadrature(pi, A, B, n=200):
    """Gauss-Legendre evaluation of int_0^1 Tr[pi^s A pi^(1-s) B] ds."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    total = 0.0
    for sk, wk in zip(s, w):
        total += 0.5 * wk * np.trace(fractional_matrix_power(pi, sk) @ A @ fractional_matrix_power(pi, 1 - sk) @ B)
    return float(np.real(total))


def kubo_mori_quadrature(pi, F, n=200):
    """Gauss-Legendre evaluation of int_0^1 pi^s F pi^(1-s) ds."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    out = np.zeros_like(F, dtype=complex)
    for sk, wk in zip(s, w):
        out += 0.5 * wk * fractional_matrix_power(pi, sk) @ F @ fractional_matrix_power(pi, 1 - sk)
    return out


def colvec(X):
    return np.asarray(X).reshape(-1, order="F")


def drazin_integral(L, pi, A, tau_max, n):
    """Composite Simpson rule for int_0^tau_max e^{L t} (pi Tr A - A) dt on n intervals."""
    d = pi.shape[0]
    t = np.linspace(0.0, tau_max, n + 1)
    E = expm(L * (t[1] - t[0]))
    y = colvec(pi * np.trace(A) - A)
    vals = np.empty((n + 1, d * d), dtype=complex)
    for k in range(n + 1):
        vals[k] = y
        y = E @ y
    return simpson(vals, x=t, axis=0).reshape(d, d, order="F")


def random_hermitian(rng, d, scale=1.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (X + X.conj().T)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    X = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def coherent_qubit_config(omega=1.0, drive=0.3, gamma=0.5, beta=("param", 0)):
    """Driven, damped qubit with a coherent steady state; beta may be bound to a control."""
    H = [[0.5 * omega, drive], [drive, -0.5 * omega]]
    b = {"param": beta[1]} if isinstance(beta, tuple) else beta
    return {
        "schema_version": 1,
        "dim": 2,
        "hamiltonian": H,
        "channels": [{"A": [[0, 1], [0, 0]], "gamma": gamma, "beta": b, "omega": omega, "bath": "hot"}],
        "param_names": ["beta"],
    }
