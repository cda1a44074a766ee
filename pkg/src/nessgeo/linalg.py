"""Dense operator algebra on density matrices and observables.

Operators are vectorized by column stacking throughout the package:
``vec(X)[i + d*j] = X[i, j]``, so that ``vec(A X B) = kron(B.T, A) @ vec(X)``.
All spectral routines accept stacks of matrices with shape ``(..., d, d)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ShapeError, SupportError, SupportWarning

P_FLOOR = 1e-14
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-12
_SERIES_CUTOFF = 1e-8


def vec(X):
    """Column-stack an operator (or a stack of operators)."""
    X = np.asarray(X)
    return np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (-1,))


def unvec(v, d=None):
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.shape[-1])))
    if d * d != v.shape[-1]:
        raise ShapeError(f"vector of length {v.shape[-1]} is not a vectorized square matrix")
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


def spre(A):
    """Superoperator of left multiplication, X -> A X."""
    A = np.asarray(A)
    return np.kron(np.eye(A.shape[0]), A)


def spost(B):
    """Superoperator of right multiplication, X -> X B."""
    B = np.asarray(B)
    return np.kron(B.T, np.eye(B.shape[0]))


def dag(X):
    return np.conj(np.swapaxes(X, -1, -2))


def hermitize(X):
    return 0.5 * (X + dag(X))


def hermiticity_defect(X):
    X = np.asarray(X)
    return float(np.max(np.abs(X - dag(X)), initial=0.0))


def trace(X):
    return np.trace(X, axis1=-2, axis2=-1)


def trace_distance(rho, sigma):
    ev = np.linalg.eigvalsh(hermitize(np.asarray(rho) - np.asarray(sigma)))
    return 0.5 * np.sum(np.abs(ev), axis=-1)


def _as_matrix(X):
    data = getattr(X, "data", X)
    data = np.asarray(data)
    if data.ndim < 2 or data.shape[-1] != data.shape[-2]:
        raise ShapeError(f"expected square matrix, got shape {data.shape}")
    return data


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"density matrix must be square, got {data.shape}")
        if hermiticity_defect(data) > HERMITIAN_TOL:
            raise ShapeError("density matrix is not Hermitian")
        if abs(np.trace(data) - 1.0) > TRACE_TOL:
            raise ShapeError(f"density matrix trace {np.trace(data).real!r} != 1")
        if np.linalg.eigvalsh(data)[0] < -PSD_TOL:
            raise ShapeError("density matrix has a negative eigenvalue")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, X):
        """Hermitize and trace-normalize ``X`` before validating."""
        X = hermitize(np.asarray(X, dtype=complex))
        return cls(X / np.trace(X).real)

    @property
    def dim(self):
        return self.data.shape[0]

    @cached_property
    def eig(self):
        return np.linalg.eigh(self.data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True, eq=False)
class HermitianObservable:
    data: np.ndarray
    units: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"observable must be square, got {data.shape}")
        if hermiticity_defect(data) > HERMITIAN_TOL * max(1.0, np.max(np.abs(data))):
            raise ShapeError("observable is not Hermitian")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self):
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def log_mean(p, q):
    """Logarithmic mean (p - q) / (log p - log q), equal to p on the diagonal."""
    p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.log(p) - np.log(q)
        # log1p of the exact difference avoids cancellation when p ~ q
        close = np.abs(x) < 0.5
        x = np.where(close, np.log1p((p - q) / np.where(close, q, 1.0)), x)
    near = np.abs(x) < _SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(near, 0.0, (p - q) / np.where(near, 1.0, x))
    # q * (e^x - 1) / x expanded around x = 0
    series = q * (1.0 + x / 2.0 + x * x / 6.0)
    return np.where(near, series, out)


@dataclass(frozen=True, eq=False)
class SpectralCache:
    """Eigen-decomposition of a (stack of) positive operators with KMB weights."""

    p: np.ndarray
    U: np.ndarray
    clamped: bool

    @cached_property
    def weights(self):
        return log_mean(self.p[..., :, None], self.p[..., None, :])

    @cached_property
    def log_p(self):
        return np.log(self.p)

    def to_eigenbasis(self, X):
        return dag(self.U) @ X @ self.U

    def from_eigenbasis(self, X):
        return self.U @ X @ dag(self.U)

    def log(self):
        return self.from_eigenbasis(self.log_p[..., :, None] * np.eye(self.p.shape[-1]))


def spectral(rho, floor=P_FLOOR, warn=True):
    """Eigenvalues and eigenvectors of ``rho`` with eigenvalues clamped at ``floor``."""
    rho = _as_matrix(rho)
    p, U = np.linalg.eigh(hermitize(rho))
    clamped = bool(np.any(p < floor))
    if clamped and warn:
        warnings.warn(f"eigenvalues below {floor:g} clamped", SupportWarning, stacklevel=2)
    return SpectralCache(np.maximum(p, floor), U, clamped)


def matrix_log(rho, floor=P_FLOOR):
    return spectral(rho, floor).log()


def matrix_entropy_functions(rho):
    """Von Neumann entropy and matrix logarithm of ``rho``.

    The entropy uses ``0 log 0 = 0`` on the raw spectrum; the logarithm is taken
    on the clamped spectrum.
    """
    rho = _as_matrix(rho)
    p_raw = np.linalg.eigvalsh(hermitize(rho))
    pos = np.where(p_raw > 0, p_raw, 1.0)
    S = -np.sum(np.where(p_raw > 0, p_raw * np.log(pos), 0.0), axis=-1)
    return S, matrix_log(rho)


def von_neumann_entropy(rho):
    return matrix_entropy_functions(rho)[0]


def relative_entropy(rho, sigma):
    """D(rho || sigma) = Tr[rho (log rho - log sigma)]."""
    rho = _as_matrix(rho)
    S, _ = matrix_entropy_functions(rho)
    return float(np.real(-S - np.trace(rho @ matrix_log(sigma))))


def _check_hermitian(*ops):
    for X in ops:
        scale = max(1.0, float(np.max(np.abs(X), initial=0.0)))
        if hermiticity_defect(X) > 1e-10 * scale:
            raise ShapeError("operator is not Hermitian")


def kmb_inner(pi, A, B):
    """Kubo-Mori-Bogoliubov inner product <A, B>_pi = int_0^1 Tr[pi^s A^dag pi^(1-s) B] ds.

    Evaluated in the eigenbasis of ``pi`` as ``sum_xy w_xy conj(A_xy) B_xy``
    with ``w`` the logarithmic-mean weights of the eigenvalues.
    """
    pi, A, B = _as_matrix(pi), _as_matrix(A), _as_matrix(B)
    _check_hermitian(A, B)
    sc = spectral(pi)
    At, Bt = sc.to_eigenbasis(A), sc.to_eigenbasis(B)
    return float(np.real(np.sum(sc.weights * np.conj(At) * Bt)))


def kubo_mori(pi, F):
    """Forward map J_pi[F] = int_0^1 pi^s F pi^(1-s) ds."""
    sc = spectral(_as_matrix(pi))
    return sc.from_eigenbasis(sc.weights * sc.to_eigenbasis(_as_matrix(F)))


def log_derivative(pi, dpi, support_tol=1e-10):
    """Logarithmic derivative F with J_pi[F] = dpi (inverse Kubo-Mori map).

    In the eigenbasis of ``pi``, ``F_xy = dpi_xy / w_xy``. Raises
    :class:`SupportError` if ``dpi`` has weight on eigenvectors whose
    eigenvalue lies below the probability floor.
    """
    pi, dpi = _as_matrix(pi), _as_matrix(dpi)
    if abs(np.trace(dpi)) > 1e-10 * max(1.0, np.max(np.abs(dpi), initial=0.0)):
        raise ShapeError("perturbation must be traceless")
    p_raw = np.linalg.eigvalsh(hermitize(pi))
    sc = spectral(pi, warn=False)
    dt = sc.to_eigenbasis(dpi)
    if sc.clamped:
        outside = p_raw < P_FLOOR
        leak = np.abs(dt[np.ix_(outside, outside)])
        if leak.size and leak.max() > support_tol:
            raise SupportError("perturbation has weight outside the support of pi")
        warnings.warn("log-derivative evaluated with clamped eigenvalues", SupportWarning, stacklevel=2)
    return hermitize(sc.from_eigenbasis(dt / sc.weights))
