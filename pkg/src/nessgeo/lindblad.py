"""Lindblad models, Liouvillian assembly, steady states and the Drazin inverse."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    ConditioningError,
    ModelError,
    NonUniqueSteadyState,
    NoSteadyState,
    ShapeError,
)
from .linalg import DensityMatrix, dag, hermitize, spost, spre, trace, unvec, vec

Scalar = Union[float, Callable[[np.ndarray], np.ndarray]]

SVD_TOL = 1e-10
COND_MAX = 1e12


def param(index):
    """Coefficient that reads control parameter ``index`` from a (stack of) vectors."""

    def read(lam):
        return np.asarray(lam, dtype=float)[..., index]

    read.param_index = index
    return read


def _evaluate(x, lam):
    lam = np.asarray(lam, dtype=float)
    if callable(x):
        return np.asarray(x(lam), dtype=float)
    return np.full(lam.shape[:-1], float(x))


@dataclass(frozen=True, eq=False)
class Channel:
    """Jump operator with forward rate ``rate`` and reverse rate ``rate*exp(-beta*omega)``.

    ``beta = 0`` is the infinite-temperature flag: forward and reverse rates
    coincide and the bath carries no entropy flux.
    """

    jump: np.ndarray
    rate: Scalar
    beta: Scalar = 0.0
    omega: float = 0.0
    bath: str = ""

    def __post_init__(self):
        A = np.array(self.jump, dtype=complex)
        A.setflags(write=False)
        object.__setattr__(self, "jump", A)

    def forward(self, lam):
        return _evaluate(self.rate, lam)

    def inverse_temperature(self, lam):
        return _evaluate(self.beta, lam)

    def reverse(self, lam):
        return self.forward(lam) * np.exp(-self.inverse_temperature(lam) * self.omega)


def dissipator(A):
    """Superoperator of X -> A X A^dag - {A^dag A, X}/2."""
    A = np.asarray(A, dtype=complex)
    AdA = dag(A) @ A
    return np.kron(np.conj(A), A) - 0.5 * spre(AdA) - 0.5 * spost(AdA)


def commutator_super(H):
    """Superoperator of X -> -i [H, X]."""
    return -1j * (spre(H) - spost(H))


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """GKLS generator parameterized by a control vector.

    ``hamiltonian`` is either a fixed matrix or a callable of the control
    vector. Rates and inverse temperatures of the channels may depend on the
    controls through callables (see :func:`param`).
    """

    dim: int
    hamiltonian: Union[np.ndarray, Callable]
    channels: tuple = ()
    nparams: int = 0
    param_names: tuple = ()
    bounds: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not callable(self.hamiltonian):
            H = np.array(self.hamiltonian, dtype=complex)
            if H.shape != (self.dim, self.dim):
                raise ShapeError(f"Hamiltonian shape {H.shape} does not match dim {self.dim}")
            if np.max(np.abs(H - dag(H)), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H))):
                raise ShapeError("Hamiltonian is not Hermitian")
            H.setflags(write=False)
            object.__setattr__(self, "hamiltonian", H)
        for ch in self.channels:
            if ch.jump.shape != (self.dim, self.dim):
                raise ShapeError(f"jump operator shape {ch.jump.shape} does not match dim {self.dim}")
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"lambda{i + 1}" for i in range(self.nparams)))

    @property
    def is_affine(self):
        """True when only scalar rates depend on the controls."""
        return not callable(self.hamiltonian)

    @property
    def baths(self):
        names = []
        for ch in self.channels:
            if ch.bath not in names:
                names.append(ch.bath)
        return names

    def as_lambda(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape[-1] != self.nparams:
            raise ShapeError(f"expected {self.nparams} control parameters, got shape {lam.shape}")
        return lam

    def hamiltonian_at(self, lam):
        lam = self.as_lambda(lam)
        if callable(self.hamiltonian):
            if lam.ndim == 1:
                return np.asarray(self.hamiltonian(lam), dtype=complex)
            return np.stack([np.asarray(self.hamiltonian(x), dtype=complex) for x in lam])
        return np.broadcast_to(self.hamiltonian, lam.shape[:-1] + self.hamiltonian.shape)

    def rates(self, lam):
        """Forward and reverse rates, each with shape ``lam.shape[:-1] + (nchannels,)``."""
        lam = self.as_lambda(lam)
        fwd = np.stack([ch.forward(lam) for ch in self.channels], axis=-1) if self.channels else np.zeros(lam.shape[:-1] + (0,))
        rev = np.stack([ch.reverse(lam) for ch in self.channels], axis=-1) if self.channels else np.zeros(lam.shape[:-1] + (0,))
        return fwd, rev

    def check_rates(self, lam):
        fwd, rev = self.rates(lam)
        if not (np.all(np.isfinite(fwd)) and np.all(np.isfinite(rev))):
            raise ModelError("non-finite rate")
        if np.any(fwd < 0) or np.any(rev < 0):
            raise ModelError("negative rate")
        return fwd, rev

    @cached_property
    def superoperator_basis(self):
        """Stack [-i[H,.], D[A_1], D[A_1^dag], D[A_2], ...] for affine models."""
        if not self.is_affine:
            raise ModelError("superoperator basis requires a fixed Hamiltonian")
        terms = [commutator_super(self.hamiltonian)]
        for ch in self.channels:
            terms.append(dissipator(ch.jump))
            terms.append(dissipator(dag(ch.jump)))
        basis = np.stack(terms)
        basis.setflags(write=False)
        return basis

    def coefficients(self, lam):
        """Coefficients multiplying :attr:`superoperator_basis`."""
        fwd, rev = self.check_rates(lam)
        inter = np.empty(fwd.shape[:-1] + (2 * fwd.shape[-1],))
        inter[..., 0::2] = fwd
        inter[..., 1::2] = rev
        ones = np.ones(fwd.shape[:-1] + (1,))
        return np.concatenate([ones, inter], axis=-1)

    def liouvillian_matrix(self, lam):
        lam = self.as_lambda(lam)
        if self.is_affine:
            return np.tensordot(self.coefficients(lam), self.superoperator_basis, axes=(-1, 0))
        if lam.ndim > 1:
            return np.stack([self.liouvillian_matrix(x) for x in lam])
        fwd, rev = self.check_rates(lam)
        L = commutator_super(self.hamiltonian_at(lam))
        for ch, gp, gm in zip(self.channels, fwd, rev):
            L = L + gp * dissipator(ch.jump) + gm * dissipator(dag(ch.jump))
        return L

    def bath_dissipators(self, lam):
        """Per-bath dissipator superoperators at a single control point."""
        lam = self.as_lambda(lam)
        fwd, rev = self.check_rates(lam)
        D = self.dim * self.dim
        out = {b: np.zeros((D, D), dtype=complex) for b in self.baths}
        for ch, gp, gm in zip(self.channels, fwd, rev):
            out[ch.bath] += gp * dissipator(ch.jump) + gm * dissipator(dag(ch.jump))
        return out


@dataclass(frozen=True, eq=False)
class Superoperator:
    data: np.ndarray
    kind: str = "other"

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"superoperator must be square, got {data.shape}")
        d = int(round(np.sqrt(data.shape[0])))
        if d * d != data.shape[0]:
            raise ShapeError(f"superoperator size {data.shape[0]} is not a square")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self):
        return int(round(np.sqrt(self.data.shape[0])))

    def apply(self, X):
        X = np.asarray(getattr(X, "data", X))
        return unvec(vec(X) @ self.data.T, self.dim)

    def adjoint(self):
        return Superoperator(dag(self.data), kind="adjoint")

    def spectrum(self):
        ev = np.linalg.eigvals(self.data)
        return ev[np.argsort(-ev.real, kind="stable")]

    def trace_preservation_defect(self):
        return float(np.max(np.abs(vec(np.eye(self.dim)) @ self.data), initial=0.0))


def build_liouvillian(model: LindbladModel, lam=()) -> Superoperator:
    """Vectorized GKLS generator of ``model`` at control point ``lam``."""
    lam = model.as_lambda(lam)
    if lam.ndim != 1:
        raise ShapeError("build_liouvillian takes a single control point")
    return Superoperator(model.liouvillian_matrix(lam), kind="liouvillian")


def _data(L):
    return L.data if isinstance(L, Superoperator) else np.asarray(L)


def steady_state(L) -> DensityMatrix:
    """Unique fixed point of ``L``, checked through its singular values."""
    M = _data(L)
    d = int(round(np.sqrt(M.shape[0])))
    _, s, Vh = np.linalg.svd(M)
    small = s < SVD_TOL * s[0]
    if not np.any(small):
        raise NoSteadyState(f"smallest singular value {s[-1]:.3e} is not numerically zero")
    if np.count_nonzero(small) > 1:
        raise NonUniqueSteadyState(f"kernel dimension {np.count_nonzero(small)}")
    rho = unvec(np.conj(Vh[-1]), d)
    rho = hermitize(rho / np.trace(rho))
    res = np.max(np.abs(M @ vec(rho)))
    if res > 1e-10 * max(1.0, s[0]):
        raise NoSteadyState(f"steady-state residual {res:.3e}")
    return DensityMatrix(rho)


def steady_state_stack(Ls):
    """Fixed points of a stack of Liouvillians, assuming unique kernels.

    Uses the rank-one update ``L + vec(1/d) vec(1)^T``, which is nonsingular
    whenever the kernel of ``L`` is one-dimensional.
    """
    Ls = np.asarray(Ls)
    D = Ls.shape[-1]
    d = int(round(np.sqrt(D)))
    w = vec(np.eye(d))
    u = w / d
    M = Ls + u[:, None] * w[None, :]
    rhs = np.broadcast_to(u, Ls.shape[:-1])
    x = np.linalg.solve(M, rhs[..., None])[..., 0]
    rho = unvec(x, d)
    return hermitize(rho / trace(rho)[..., None, None])


def _augmented(M):
    d = int(round(np.sqrt(M.shape[0])))
    return np.vstack([M, vec(np.eye(d))[None, :]]), d


def drazin_apply(L, pi, A, cond_max=COND_MAX):
    """Drazin inverse of ``L`` applied to ``A``.

    Returns the traceless ``y`` with ``L[y] = A - pi Tr[A]``, found as the
    least-squares solution of ``L`` stacked with the trace functional.
    """
    M = _data(L)
    Maug, d = _augmented(M)
    pi = np.asarray(getattr(pi, "data", pi))
    A = np.asarray(getattr(A, "data", A))
    b = A - pi * np.trace(A)
    rhs = np.concatenate([vec(b), [0.0]])
    y, _, _, s = np.linalg.lstsq(Maug, rhs, rcond=None)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > cond_max:
        raise ConditioningError(f"augmented system condition number {cond:.3e}", cond=cond)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    res = np.linalg.norm(M @ y - vec(b))
    if res > 1e-10 * scale:
        raise ConditioningError(f"Drazin residual {res / scale:.3e} relative", cond=cond)
    return unvec(y, d)


def drazin_matrix(L, pi, cond_max=COND_MAX) -> Superoperator:
    """Drazin inverse as a superoperator matrix (same augmented solve, all columns)."""
    M = _data(L)
    Maug, d = _augmented(M)
    D = M.shape[0]
    pi = np.asarray(getattr(pi, "data", pi))
    proj = np.eye(D) - np.outer(vec(pi), vec(np.eye(d)))
    rhs = np.vstack([proj, np.zeros((1, D))])
    X, _, _, s = np.linalg.lstsq(Maug, rhs, rcond=None)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > cond_max:
        raise ConditioningError(f"augmented system condition number {cond:.3e}", cond=cond)
    return Superoperator(X, kind="drazin")


def spectral_gap(L):
    """Smallest decay rate |Re| among the nonzero Liouvillian eigenvalues."""
    ev = np.linalg.eigvals(_data(L))
    order = np.argsort(np.abs(ev))
    rest = ev[order[1:]]
    return float(np.min(np.abs(rest.real)))


def check_unique_ness_spectrum(L, tol=1e-10):
    """True if exactly one eigenvalue is numerically zero and all others decay."""
    ev = np.linalg.eigvals(_data(L))
    scale = np.max(np.abs(ev))
    zero = np.abs(ev) < tol * scale
    return bool(np.count_nonzero(zero) == 1 and np.all(ev[~zero].real < 0))
