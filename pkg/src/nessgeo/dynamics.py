"""Time-dependent propagation, relaxation runs and the slow-driving expansion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import IntegrationError, RelaxationTimeout, ShapeError, Unsupported
from .lindblad import (
    LindbladModel,
    build_liouvillian,
    drazin_apply,
    spectral_gap,
    steady_state,
    steady_state_stack,
)
from .linalg import dag, hermitize, trace, unvec, vec
from .protocols import (  # noqa: F401  re-exported
    LinearProtocol,
    Protocol,
    Sin2Protocol,
    TabulatedProtocol,
    constant_protocol,
)

TRACE_DRIFT_MAX = 1e-6
CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States on a uniform grid with generator actions and instantaneous steady states."""

    times: np.ndarray
    lam: np.ndarray
    states: np.ndarray
    rho_dot: np.ndarray
    steady: np.ndarray
    limit: Optional[np.ndarray] = None

    @property
    def h(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    @property
    def final(self):
        return self.states[-1]

    @property
    def trace_drift(self):
        return float(np.max(np.abs(trace(self.states) - 1.0)))

    @property
    def hermiticity_drift(self):
        return float(np.max(np.abs(self.states - dag(self.states))))

    def __len__(self):
        return len(self.times)


def _as_state(rho0, d):
    rho0 = np.asarray(getattr(rho0, "data", rho0), dtype=complex)
    if rho0.shape != (d, d):
        raise ShapeError(f"initial state shape {rho0.shape} does not match dim {d}")
    return rho0


def _check_step(model, lam, h):
    ev = np.linalg.eigvals(model.liouvillian_matrix(lam))
    if h * np.max(np.abs(ev)) > 2.5:
        raise IntegrationError(
            f"step {h:g} outside the RK4 stability region (h*|lambda|max = {h * np.max(np.abs(ev)):.2f}); use more steps"
        )


def _run(model, lam_of, y0, t0, h, steps, backend, chunk=CHUNK):
    """Integrate on ``steps`` uniform steps; ``lam_of`` maps times to control vectors."""
    d = model.dim
    D = d * d
    rk4 = kernels.get_rk4(backend)
    ys = np.empty((steps + 1, D), dtype=complex)
    ydot = np.empty((steps + 1, D), dtype=complex)
    pis = np.empty((steps + 1, d, d), dtype=complex)
    lams = np.empty((steps + 1, model.nparams))
    ys[0] = y0
    for s in range(0, max(steps, 1), chunk):
        n = min(chunk, steps - s)
        sub_t = t0 + h * (s + 0.5 * np.arange(2 * n + 1))
        sub_lam = lam_of(sub_t)
        Ls = np.ascontiguousarray(model.liouvillian_matrix(sub_lam), dtype=complex)
        if n > 0:
            buf = np.empty((n + 1, D), dtype=complex)
            rk4(Ls, ys[s].copy(), h, buf)
            ys[s + 1 : s + n + 1] = buf[1:]
        grid = Ls[0::2]
        ydot[s : s + n + 1] = np.einsum("kij,kj->ki", grid, ys[s : s + n + 1])
        pis[s : s + n + 1] = steady_state_stack(grid)
        lams[s : s + n + 1] = sub_lam[0::2]
    states = unvec(ys, d)
    drift = np.max(np.abs(trace(states) - 1.0))
    if drift > TRACE_DRIFT_MAX:
        raise IntegrationError(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_MAX:g}; use a smaller step")
    times = t0 + h * np.arange(steps + 1)
    return times, lams, states, unvec(ydot, d), pis


def propagate(model: LindbladModel, protocol: Protocol, rho0, steps: int, backend=None) -> Trajectory:
    """Integrate the master equation along ``protocol`` with fixed-step classical RK4.

    The generator is refreshed at the start, midpoint and end of every step.
    No trace renormalization is applied; drift beyond 1e-6 raises
    :class:`IntegrationError`.
    """
    if steps < 100:
        raise ValueError("propagate needs at least 100 steps")
    if protocol.nparams != model.nparams:
        raise ShapeError("protocol and model parameter counts differ")
    rho0 = _as_state(rho0, model.dim)
    h = protocol.duration / steps
    _check_step(model, protocol.start, h)
    _check_step(model, protocol.end, h)
    times, lams, states, rdot, pis = _run(model, protocol.value, vec(rho0), 0.0, h, steps, backend)
    return Trajectory(times, lams, states, rdot, pis)


def _sigma_na(rho, rho_dot, log_pi):
    p, U = np.linalg.eigh(hermitize(rho))
    log_rho = U @ (np.log(np.maximum(p, 1e-300))[..., :, None] * dag(U))
    return -np.real(trace(rho_dot @ (log_rho - log_pi)))


def relax(model: LindbladModel, lam, rho0, threshold=1e-12, h=None, t0=0.0, backend=None) -> Trajectory:
    """Propagate at fixed ``lam`` until the nonadiabatic entropy production rate drops below ``threshold``.

    The returned trajectory stops at the first grid point below the
    threshold; its ``limit`` is the steady state at ``lam``.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    lam = model.as_lambda(lam)
    L = build_liouvillian(model, lam)
    pi = steady_state(L).data
    rho0 = _as_state(rho0, model.dim)
    gap = spectral_gap(L)
    ev_max = float(np.max(np.abs(np.linalg.eigvals(L.data))))
    if h is None:
        h = min(0.01 / gap, 0.5 / ev_max)
    t_max = 100.0 / gap
    w, V = np.linalg.eigh(pi)
    log_pi = V @ np.diag(np.log(w)) @ dag(V)

    def lam_of(t):
        return np.broadcast_to(lam, np.shape(t) + lam.shape)

    pieces = []
    y = vec(rho0)
    t = t0
    while True:
        n = int(min(CHUNK, np.ceil((t0 + t_max - t) / h)))
        times, lams, states, rdot, pis = _run(model, lam_of, y, t, h, max(n, 0), backend)
        rate = _sigma_na(states, rdot, log_pi)
        below = np.flatnonzero(rate < threshold)
        if below.size:
            k = below[0] + 1
            pieces.append((times[:k], lams[:k], states[:k], rdot[:k], pis[:k]))
            break
        pieces.append((times[:-1], lams[:-1], states[:-1], rdot[:-1], pis[:-1]))
        t = times[-1]
        y = vec(states[-1])
        if t >= t0 + t_max - 0.5 * h:
            raise RelaxationTimeout(f"nonadiabatic rate {rate[-1]:.3e} still above {threshold:g} at t = {t:g}")
    parts = [np.concatenate(a) for a in zip(*pieces)]
    return Trajectory(*parts, limit=pi)


def dpi_dlambda(model: LindbladModel, lam, rel_step=1e-5):
    """Parameter derivatives of the steady state, shape ``(nparams, d, d)``.

    Central differences with step ``rel_step * max(|lam_mu|, 1)``,
    Richardson-extrapolated once.
    """
    lam = model.as_lambda(lam)
    n = model.nparams
    steps = rel_step * np.maximum(np.abs(lam), 1.0)
    offsets = []
    for mu in range(n):
        e = np.zeros(n)
        e[mu] = steps[mu]
        offsets += [lam + e, lam - e, lam + 2 * e, lam - 2 * e]
    if not offsets:
        return np.zeros((0, model.dim, model.dim), dtype=complex)
    pis = steady_state_stack(model.liouvillian_matrix(np.array(offsets))).reshape(n, 4, model.dim, model.dim)
    d1 = (pis[:, 0] - pis[:, 1]) / (2 * steps[:, None, None])
    d2 = (pis[:, 2] - pis[:, 3]) / (4 * steps[:, None, None])
    return hermitize((4 * d1 - d2) / 3)


def _first_order(model, protocol, t):
    lam = protocol.value(t)
    L = build_liouvillian(model, lam)
    pi = steady_state(L).data
    pidot = np.tensordot(protocol.velocity(t), dpi_dlambda(model, lam), axes=(0, 0))
    return L, pi, drazin_apply(L, pi, pidot)


def slow_driving_state(model: LindbladModel, protocol: Protocol, t, order=1):
    """Steady state plus the first (or first two) slow-driving corrections at time ``t``."""
    if order not in (1, 2):
        raise Unsupported(f"slow-driving order {order} not implemented")
    T = protocol.duration
    if not 0.0 <= t <= T:
        raise ValueError("t outside the protocol interval")
    L, pi, d1 = _first_order(model, protocol, t)
    rho = pi + d1
    if order == 2:
        dt = 1e-4 * T
        if t - dt >= 0 and t + dt <= T:
            fp = _first_order(model, protocol, t + dt)[2]
            fm = _first_order(model, protocol, t - dt)[2]
            deriv = (fp - fm) / (2 * dt)
        else:
            sgn = 1.0 if t - dt < 0 else -1.0
            f1 = _first_order(model, protocol, t + sgn * dt)[2]
            f2 = _first_order(model, protocol, t + 2 * sgn * dt)[2]
            deriv = sgn * (-3 * d1 + 4 * f1 - f2) / (2 * dt)
        rho = rho + drazin_apply(L, pi, deriv)
    return hermitize(rho)
