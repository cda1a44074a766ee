"""Quantum Fisher information in time, generalized variances and speed-limit audits."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, SupportWarning
from .linalg import dag, hermitize, log_mean

MEAN_FLOOR = 1e-14
SLACK_TOL = 1e-10
INTEGRATED_TOL = 1e-8


class MonotoneFunctionKind(enum.Enum):
    SLD = "sld"
    WY = "wy"
    KMB = "kmb"
    HM = "hm"

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self is MonotoneFunctionKind.SLD:
            return (1.0 + x) / 2.0
        if self is MonotoneFunctionKind.WY:
            return ((1.0 + np.sqrt(x)) / 2.0) ** 2
        if self is MonotoneFunctionKind.KMB:
            return log_mean(x, np.ones_like(x))
        return 2.0 * x / (1.0 + x)

    def mean(self, p, q):
        """Symmetric mean ``m_f(p, q) = p f(q/p)``, finite as either argument vanishes."""
        p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        if self is MonotoneFunctionKind.SLD:
            return 0.5 * (p + q)
        if self is MonotoneFunctionKind.WY:
            return 0.25 * (np.sqrt(np.maximum(p, 0)) + np.sqrt(np.maximum(q, 0))) ** 2
        if self is MonotoneFunctionKind.KMB:
            pos = (p > 0) & (q > 0)
            safe_p, safe_q = np.where(pos, p, 1.0), np.where(pos, q, 1.0)
            return np.where(pos, log_mean(safe_p, safe_q), 0.0)
        s = p + q
        return np.where(s > 0, 2.0 * p * q / np.where(s > 0, s, 1.0), 0.0)

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            return cls[str(name).upper()]


def _eig(rho):
    p, U = np.linalg.eigh(hermitize(np.asarray(getattr(rho, "data", rho))))
    return np.maximum(p, 0.0), U


def _weights(p, kind, warn=True):
    m = kind.mean(p[..., :, None], p[..., None, :])
    dropped = m < MEAN_FLOOR
    if warn and np.any(dropped):
        warnings.warn(f"{int(dropped.sum())} terms with f-mean below {MEAN_FLOOR:g} dropped", SupportWarning,
                      stacklevel=3)
    return m, dropped


def qfi_time(rho, rho_dot, kind=MonotoneFunctionKind.SLD):
    """Quantum Fisher information of the curve ``rho(t)`` for the metric ``kind``.

    ``sum_xy |rho_dot_xy|^2 / m_f(p_x, p_y)`` in the eigenbasis of ``rho``.
    Accepts stacks.
    """
    kind = MonotoneFunctionKind.parse(kind)
    p, U = _eig(rho)
    m, dropped = _weights(p, kind)
    Rt = dag(U) @ np.asarray(rho_dot) @ U
    terms = np.abs(Rt) ** 2 / np.where(dropped, 1.0, m)
    return np.sum(np.where(dropped, 0.0, terms), axis=(-1, -2))


def generalized_variance(rho, A, kind=MonotoneFunctionKind.SLD):
    """``sum_xy m_f(p_x, p_y) |(A - <A>)_xy|^2`` in the eigenbasis of ``rho``."""
    kind = MonotoneFunctionKind.parse(kind)
    rho = np.asarray(getattr(rho, "data", rho))
    A = np.asarray(getattr(A, "data", A))
    p, U = _eig(rho)
    mean = np.real(np.trace(rho @ A, axis1=-2, axis2=-1))
    A0 = A - mean[..., None, None] * np.eye(A.shape[-1])
    At = dag(U) @ A0 @ U
    m = kind.mean(p[..., :, None], p[..., None, :])
    return np.sum(m * np.abs(At) ** 2, axis=(-1, -2))


def _trap(y, h):
    return float(h * (np.sum(y) - 0.5 * (y[0] + y[-1]))) if len(y) > 1 else 0.0


@dataclass(frozen=True, eq=False)
class SpeedRecord:
    kind: MonotoneFunctionKind
    times: np.ndarray
    qfi: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    pi_ex_abs: np.ndarray
    slack: np.ndarray
    integrals: dict = field(default_factory=dict)

    @property
    def ell(self):
        return self.integrals["ell"]

    COLUMNS = ("t", "kind", "qfi", "v", "sigma_phi", "abs_pi_ex_rate", "slack")

    def rows(self):
        for k in range(len(self.times)):
            yield (self.times[k], self.kind.value, self.qfi[k], self.v[k], self.sigma[k], self.pi_ex_abs[k],
                   self.slack[k])


def _potential(steady):
    p, U = np.linalg.eigh(hermitize(steady))
    p = np.maximum(p, 1e-14)
    return -(U @ (np.log(p)[..., :, None] * dag(U)))


def speed_limit_audit(trajectory, model=None, protocol=None, kind=MonotoneFunctionKind.SLD, check=True):
    """Pointwise and integrated excess-flux speed limits along a trajectory.

    The potential is ``Phi = -log pi_lambda(t)`` from the trajectory's
    instantaneous steady states; ``rho_dot`` is the exact generator action.
    With ``check`` a violated bound raises :class:`BoundViolation`.
    """
    kind = MonotoneFunctionKind.parse(kind)
    rho, rd = trajectory.states, trajectory.rho_dot
    phi = _potential(trajectory.steady)
    I = qfi_time(rho, rd, kind)
    v = np.sqrt(np.maximum(I, 0.0))
    sigma = np.sqrt(np.maximum(generalized_variance(rho, phi, kind), 0.0))
    pi_ex = np.abs(np.real(np.einsum("kij,kji->k", rd, phi)))
    slack = sigma * v - pi_ex
    ratio = np.where(sigma > 0, pi_ex / np.where(sigma > 0, sigma, 1.0), 0.0)
    h = trajectory.h
    ints = {
        "ell": 0.5 * _trap(v, h),
        "int_abs_pi_ex": _trap(pi_ex, h),
        "int_ratio": _trap(ratio, h),
    }
    ints["integrated_slack"] = 2 * ints["ell"] - ints["int_ratio"]
    rec = SpeedRecord(kind, trajectory.times, I, v, sigma, pi_ex, slack, ints)
    if check:
        k = int(np.argmin(slack))
        if slack[k] < -SLACK_TOL:
            raise BoundViolation(f"{kind.value} speed limit violated at t = {trajectory.times[k]:g}",
                                 worst_time=float(trajectory.times[k]), slack=float(slack[k]))
        if ints["integrated_slack"] < -INTEGRATED_TOL:
            raise BoundViolation(f"{kind.value} integrated bound violated",
                                 worst_time=float(trajectory.times[-1]), slack=ints["integrated_slack"])
    return rec


def observable_speed_audit(trajectory, A, kind=MonotoneFunctionKind.SLD):
    """Slack of ``|d<A>/dt| <= sigma_f[A] v_f`` at every grid point of ``trajectory``."""
    kind = MonotoneFunctionKind.parse(kind)
    A = np.asarray(getattr(A, "data", A))
    rate = np.abs(np.real(np.einsum("kij,ji->k", trajectory.rho_dot, A)))
    v = np.sqrt(np.maximum(qfi_time(trajectory.states, trajectory.rho_dot, kind), 0.0))
    sigma = np.sqrt(np.maximum(generalized_variance(trajectory.states, A, kind), 0.0))
    return sigma * v - rate


def statistical_length(trajectory, kind=MonotoneFunctionKind.SLD):
    kind = MonotoneFunctionKind.parse(kind)
    v = np.sqrt(np.maximum(qfi_time(trajectory.states, trajectory.rho_dot, kind), 0.0))
    return 0.5 * _trap(v, trajectory.h)
