"""Thermodynamic geometry on control space.

The friction tensor is evaluated in batches: for ``K`` control points all
shifted Liouvillians needed by the finite-difference steady-state derivative
are assembled at once and solved together. Drazin solves in the batch use
the nonsingular matrix ``L + vec(pi) vec(1)^T``, which maps traceless
operators to the traceless solution of ``L[y] = b``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.linalg import expm

from .errors import (
    ConditioningError,
    GeodesicNoConvergence,
    MetricSingular,
    ShapeError,
    TailWarning,
)
from .lindblad import build_liouvillian, spectral_gap, steady_state, steady_state_stack
from .linalg import dag, log_mean, unvec, vec
from .protocols import Protocol, TabulatedProtocol, constant_protocol

FD_REL_STEP = 1e-5
CHRISTOFFEL_REL_STEP = 1e-4
TAU_UNDEFINED_BELOW = 1e-12
CACHE_QUANTUM = 1e-12


@dataclass(frozen=True, eq=False)
class FrictionTensor:
    """Friction tensor and its factors at one control point.

    ``tau`` holds NaN where the corresponding Fisher entry is too small to
    divide by; ``tau_defined`` marks the valid entries.
    """

    lam: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    I: np.ndarray
    tau: np.ndarray
    pi: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None

    @property
    def tau_defined(self):
        return np.isfinite(self.tau)

    @property
    def n(self):
        return self.xi.shape[0]

    def speed2(self, v):
        v = np.asarray(v, dtype=float)
        return float(v @ self.zeta @ v)


def _fd_offsets(lam, rel_step):
    """Central-difference points at steps h and 2h for every parameter."""
    K, n = lam.shape
    h = rel_step * np.maximum(np.abs(lam), 1.0)
    eye = np.eye(n)
    shifts = np.stack([eye, -eye, 2 * eye, -2 * eye], axis=1)  # (n, 4, n)
    pts = lam[:, None, None, :] + shifts[None] * h[:, :, None, None]
    return pts.reshape(K * n * 4, n), h


def _nonsingular(M, pi):
    d = pi.shape[-1]
    one = vec(np.eye(d))
    return M + vec(pi)[..., :, None] * one[None, :]


def _friction_batch(model, lam, rel_step=FD_REL_STEP, keep_ops=False):
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    K, n = lam.shape
    if n != model.nparams:
        raise ShapeError(f"expected {model.nparams} parameters, got {n}")
    d = model.dim
    M = model.liouvillian_matrix(lam)
    pi = steady_state_stack(M)
    pts, h = _fd_offsets(lam, rel_step)
    shifted = steady_state_stack(model.liouvillian_matrix(pts)).reshape(K, n, 4, d, d)
    d1 = (shifted[:, :, 0] - shifted[:, :, 1]) / (2 * h[:, :, None, None])
    d2 = (shifted[:, :, 2] - shifted[:, :, 3]) / (4 * h[:, :, None, None])
    dpi = (4 * d1 - d2) / 3
    dpi = 0.5 * (dpi + dag(dpi))

    p, U = np.linalg.eigh(pi)
    if np.any(p <= 0):
        raise MetricSingular("steady state is not full rank; the log-derivative is undefined")
    w = log_mean(p[:, :, None], p[:, None, :])
    Ud = dag(U)[:, None]
    dpi_t = Ud @ dpi @ U[:, None]
    F_t = dpi_t / w[:, None]
    F = U[:, None] @ F_t @ Ud
    I = np.real(np.einsum("kaxy,kbxy->kab", np.conj(F_t) * w[:, None], F_t))

    A = _nonsingular(M, pi)
    # remove finite-difference trace noise: b = dpi - pi Tr[dpi]
    tr = np.trace(dpi, axis1=-2, axis2=-1)
    b = vec(dpi - tr[..., None, None] * pi[:, None])
    Y = np.linalg.solve(A[:, None], b[..., None])[..., 0]
    res = np.linalg.norm(np.einsum("kij,knj->kni", M, Y) - b, axis=-1)
    scale = np.maximum(np.linalg.norm(b, axis=-1), np.finfo(float).tiny)
    if np.any(res > 1e-9 * scale):
        raise ConditioningError("Drazin solve inaccurate in friction evaluation", cond=float(np.max(res / scale)))
    Y = unvec(Y, d)
    # xi[mu, nu] = -Tr[F^nu L+[d_mu pi]]
    xi = -np.real(np.einsum("kvij,kmji->kmv", F, Y))
    zeta = 0.5 * (xi + np.swapaxes(xi, -1, -2))
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(np.abs(I) > TAU_UNDEFINED_BELOW, xi / I, np.nan)
    out = dict(lam=lam, xi=xi, zeta=zeta, I=I, tau=tau, pi=pi)
    if keep_ops:
        out["F"] = F
    return out


def metric_stack(model, lams, rel_step=FD_REL_STEP):
    """Symmetric friction tensors for a stack of control points, shape ``(K, n, n)``."""
    return _friction_batch(model, lams, rel_step)["zeta"]


def friction_stack(model, lams, rel_step=FD_REL_STEP):
    """Dict of batched ``xi``, ``zeta``, ``I``, ``tau`` and ``pi`` arrays."""
    return _friction_batch(model, lams, rel_step)


@lru_cache(maxsize=8192)
def _friction_cached(model, key, rel_step):
    lam = np.asarray(key, dtype=float) * CACHE_QUANTUM
    return _friction_batch(model, lam[None], rel_step, keep_ops=True)


def friction_at(model, lam, rel_step=FD_REL_STEP, cache=True) -> FrictionTensor:
    """Friction tensor, KMB Fisher matrix and relaxation-time matrix at ``lam``.

    Results are cached on ``lam`` quantized to 1e-12.
    """
    lam = model.as_lambda(lam)
    if cache:
        key = tuple(np.rint(lam / CACHE_QUANTUM).astype(np.int64).tolist())
        r = _friction_cached(model, key, rel_step)
    else:
        r = _friction_batch(model, lam[None], rel_step, keep_ops=True)
    return FrictionTensor(lam.copy(), r["xi"][0], r["zeta"][0], r["I"][0], r["tau"][0], r["pi"][0], r["F"][0])


def kmb_correlator(pi, F, G):
    """Batched KMB inner products between stacks ``F`` (..., d, d) and ``G``."""
    p, U = np.linalg.eigh(pi)
    w = log_mean(p[:, None], p[None, :])
    Ft = dag(U) @ F @ U
    Gt = dag(U) @ G @ U
    return np.real(np.sum(w * np.conj(Ft) * Gt, axis=(-1, -2)))


def green_kubo_xi(model, lam, tau_max=None, quad_step=None, return_correlator=False):
    """Friction tensor from the time integral of the KMB correlator.

    ``C_mn(t) = <F^m, e^{L^dag t}[F^n]>`` is sampled on a uniform grid with the
    exact step propagator of the adjoint generator, integrated by the
    trapezoid rule with the Euler-Maclaurin end correction, and closed with
    an exponential tail ``C(tau_max)/g`` at the slowest decay rate ``g``.
    """
    lam = model.as_lambda(lam)
    L = build_liouvillian(model, lam)
    M = L.data
    g = spectral_gap(L)
    if tau_max is None:
        tau_max = 30.0 / g
    if tau_max < 20.0 / g:
        raise ValueError(f"tau_max must be at least 20/gap = {20.0 / g:g}")
    ev_max = float(np.max(np.abs(np.linalg.eigvals(M))))
    if quad_step is None:
        quad_step = min(0.01 / g, 0.05 / ev_max)
    N = int(np.ceil(tau_max / quad_step))
    h = tau_max / N
    ft = friction_at(model, lam)
    pi, F = ft.pi, ft.F
    n, d = F.shape[0], model.dim

    Madj = dag(M)
    E = expm(Madj * h)
    # <F^m, G>_pi is linear in G: the row vec(J_pi[F^m])^H turns each step into one matmul
    pw, U = np.linalg.eigh(pi)
    w = log_mean(pw[:, None], pw[None, :])
    W = np.conj(vec(U @ (w * (dag(U) @ F @ U)) @ dag(U)))  # (n, D)
    Y = vec(F).T  # (D, n)
    C = np.empty((N + 1, n, n))
    for k in range(N + 1):
        C[k] = np.real(W @ Y)
        Y = E @ Y
    dC0 = kmb_correlator(pi, F[:, None], unvec((Madj @ vec(F).T).T, d)[None, :])
    dCN = (3 * C[-1] - 4 * C[-2] + C[-3]) / (2 * h)
    integral = h * (C.sum(axis=0) - 0.5 * (C[0] + C[-1])) - h * h / 12 * (dCN - dC0)
    tail = C[-1] / g
    big = np.abs(tail) > 0.01 * np.maximum(np.abs(integral), np.finfo(float).tiny)
    if np.any(big & (np.abs(tail) > 1e-14)):
        warnings.warn(f"Green-Kubo tail correction exceeds 1% (max {np.max(np.abs(tail)):.3e})", TailWarning,
                      stacklevel=2)
    xi = integral + tail
    if return_correlator:
        return xi, h * np.arange(N + 1), C
    return xi


def christoffel(model, lam, h=None, scale=None):
    """Christoffel symbols ``G[a, b, c]`` of the friction metric.

    Metric derivatives by central differences with step ``h`` (default
    ``1e-4 * scale``), Richardson-extrapolated once.
    """
    lam = model.as_lambda(lam)
    return _christoffel_batch(model, lam[None], h, scale)[0]


def _christoffel_batch(model, lams, h=None, scale=None):
    lams = np.atleast_2d(lams)
    K, n = lams.shape
    if scale is None:
        scale = np.maximum(np.abs(lams), 1.0)
    step = np.broadcast_to(CHRISTOFFEL_REL_STEP * np.asarray(scale) if h is None else np.asarray(h, float), (K, n))
    eye = np.eye(n)
    shifts = np.stack([eye, -eye, 2 * eye, -2 * eye], axis=1)
    pts = lams[:, None, None, :] + shifts[None] * step[:, :, None, None]
    allpts = np.concatenate([lams, pts.reshape(-1, n)])
    Z = metric_stack(model, allpts)
    zc = Z[:K]
    zs = Z[K:].reshape(K, n, 4, n, n)
    st = step[:, :, None, None]
    d1 = (zs[:, :, 0] - zs[:, :, 1]) / (2 * st)
    d2 = (zs[:, :, 2] - zs[:, :, 3]) / (4 * st)
    dz = (4 * d1 - d2) / 3  # dz[k, e, i, j] = d_e zeta_ij
    cond = np.linalg.cond(zc)
    if np.any(~np.isfinite(cond) | (cond > 1e10)):
        raise MetricSingular(f"friction metric ill-conditioned (cond = {np.max(cond):.3e})")
    inv = np.linalg.inv(zc)
    # lowered symbols [k, e, b, c] = 1/2 (d_b z_ce + d_c z_be - d_e z_bc)
    low = 0.5 * (np.einsum("kbce->kebc", dz) + np.einsum("kcbe->kebc", dz) - dz)
    return np.einsum("kae,kebc->kabc", inv, low)


@dataclass(frozen=True, eq=False)
class GeodesicSolution:
    protocol: Protocol
    action: float
    length: float
    speed_defect: float
    route: str = ""
    cs_ratio: float = 1.0

    @property
    def mean_speed(self):
        return self.length / self.protocol.duration


def path_speed(model, protocol, grid_n=2001):
    """Times and local thermodynamic speed sqrt(v^T zeta v) on a uniform grid."""
    t = np.linspace(0.0, protocol.duration, grid_n)
    lam = protocol.value(t)
    v = protocol.velocity(t)
    Z = metric_stack(model, lam)
    s2 = np.einsum("ki,kij,kj->k", v, Z, v)
    return t, np.sqrt(np.maximum(s2, 0.0)), s2


def path_action_and_length(model, protocol, grid_n=2001):
    """Trapezoid action int v^T zeta v dt and length int sqrt(v^T zeta v) dt."""
    t, s, s2 = path_speed(model, protocol, grid_n)
    h = t[1] - t[0]
    trap = lambda y: float(h * (y.sum() - 0.5 * (y[0] + y[-1])))  # noqa: E731
    return trap(s2), trap(s)


def _ratio_from_speed(t, s):
    # action*T/l^2 written as 1 + weighted variance / mean^2, which cannot round below 1
    w = np.full_like(s, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    T = w.sum()
    mean = np.dot(w, s) / T
    if mean == 0.0:
        return 1.0
    return float(1.0 + np.dot(w, (s - mean) ** 2) / (T * mean * mean))


def cauchy_schwarz_ratio(model, protocol, grid_n=2001):
    """action * T / length^2 on the trapezoid grid; 1 exactly for constant speed."""
    t, s, _ = path_speed(model, protocol, grid_n)
    return _ratio_from_speed(t, s)


def _solution(model, protocol, grid_n, route):
    t, s, s2 = path_speed(model, protocol, grid_n)
    h = t[1] - t[0]
    action = float(h * (s2.sum() - 0.5 * (s2[0] + s2[-1])))
    length = float(h * (s.sum() - 0.5 * (s[0] + s[-1])))
    defect = float(np.max(np.abs(s - length / protocol.duration)))
    return GeodesicSolution(protocol, action, length, defect, route, _ratio_from_speed(t, s))


def geodesic_arclength(model, lam_i, lam_f, T, grid_n=2001):
    """Single-parameter geodesic by inverting the cumulative thermodynamic length.

    sqrt(m) is splined on ``grid_n`` points, its antiderivative gives the
    length coordinate s(lambda), and the protocol is the cubic Hermite
    interpolant through ``(T s/l, lambda, l / (T sqrt(m)))``.
    """
    if model.nparams != 1:
        raise ShapeError("arc-length construction needs a single control parameter")
    a, b = float(np.ravel(lam_i)[0]), float(np.ravel(lam_f)[0])
    if a == b:
        return GeodesicSolution(constant_protocol([a], T), 0.0, 0.0, 0.0, "arclength")
    beta = np.linspace(a, b, grid_n)
    m = metric_stack(model, beta[:, None])[:, 0, 0]
    if np.any(~(m > 0)):
        raise MetricSingular("metric not positive along the path")
    root = np.sqrt(m)
    u = np.abs(beta - a)
    s = CubicSpline(u, root).antiderivative()(u)
    if np.any(np.diff(s) <= 0):
        raise MetricSingular("cumulative length is not monotone")
    ell = s[-1]
    times = T * s / ell
    times[0], times[-1] = 0.0, T
    vel = np.sign(b - a) * ell / (T * root)
    proto = TabulatedProtocol(times, beta, vel, form="geodesic")
    return _solution(model, proto, grid_n, "arclength")


def _geodesic_rhs(model, n):
    def rhs(_, y):
        lam, v = y[:n], y[n:]
        G = _christoffel_batch(model, lam[None])[0]
        return np.concatenate([v, -np.einsum("abc,b,c->a", G, v, v)])

    return rhs


def _shoot(model, lam_i, v0, T, rtol, box=None):
    n = len(lam_i)
    events = None
    if box is not None:
        lo, hi = box

        def leave(_, y):
            return min(np.min(y[:n] - lo), np.min(hi - y[:n]))

        leave.terminal = True
        events = leave
    sol = solve_ivp(_geodesic_rhs(model, n), (0.0, T), np.concatenate([lam_i, v0]), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-3, dense_output=True, events=events)
    if sol.status != 0:
        raise GeodesicNoConvergence(f"geodesic integration stopped early: {sol.message}")
    return sol


def _box(model, lam_i, lam_f, factor=4.0):
    span = np.maximum(np.abs(lam_f - lam_i), 1e-12)
    lo = np.minimum(lam_i, lam_f) - factor * span
    hi = np.maximum(lam_i, lam_f) + factor * span
    if model.bounds:
        b = np.asarray(model.bounds, dtype=float)
        lo, hi = np.maximum(lo, b[:, 0]), np.minimum(hi, b[:, 1])
    return lo, hi


def _initial_velocity(model, lam_i, lam_f, T, n_pts=65):
    """Straight-line direction scaled so the line would be traversed at constant metric speed."""
    d = lam_f - lam_i
    s = np.linspace(0.0, 1.0, n_pts)
    Z = metric_stack(model, lam_i + s[:, None] * d)
    speed = np.sqrt(np.maximum(np.einsum("i,kij,j->k", d, Z, d), 0.0))
    ell = trapezoid(speed, s)
    return d * ell / (T * max(speed[0], np.finfo(float).tiny))


def _attempt(model, lam_i, lam_f, v, T, rtol, box=None):
    try:
        sol = _shoot(model, lam_i, v, T, rtol, box)
    except (GeodesicNoConvergence, ConditioningError, MetricSingular, np.linalg.LinAlgError):
        return None, None
    return sol, sol.y[: len(lam_i), -1] - lam_f


def geodesic_multiparam(model, lam_i, lam_f, T, shoot_tol=1e-8, max_iter=100, grid_n=2001, rtol=1e-10):
    """Geodesic by shooting on the initial velocity.

    The geodesic equation is integrated with DOP853; the endpoint mismatch
    is driven to ``shoot_tol`` by Newton steps with a finite-difference
    Jacobian and backtracking. The first guess points along the straight
    line with the speed that would traverse its metric length in ``T``.
    """
    lam_i = model.as_lambda(lam_i).astype(float)
    lam_f = model.as_lambda(lam_f).astype(float)
    n = len(lam_i)
    if np.allclose(lam_i, lam_f, rtol=0, atol=0):
        return GeodesicSolution(constant_protocol(lam_i, T), 0.0, 0.0, 0.0, "shooting")
    box = _box(model, lam_i, lam_f)
    v = _initial_velocity(model, lam_i, lam_f, T)
    sol, miss = _attempt(model, lam_i, lam_f, v, T, rtol, box)
    if sol is None:
        raise GeodesicNoConvergence("geodesic from the initial velocity guess left the model domain")
    for it in range(max_iter + 1):
        if np.linalg.norm(miss) < shoot_tol:
            break
        if it == max_iter:
            raise GeodesicNoConvergence(
                f"shooting did not converge in {max_iter} iterations; try geodesic_arclength for one parameter")
        J = np.empty((n, n))
        dv = 1e-6 * max(np.linalg.norm(v), 1e-12)
        for j in range(n):
            vp = v.copy()
            vp[j] += dv
            _, mp = _attempt(model, lam_i, lam_f, vp, T, rtol, box)
            if mp is None:
                raise GeodesicNoConvergence("shooting Jacobian left the model domain")
            J[:, j] = (mp - miss) / dv
        step = np.linalg.solve(J, -miss)
        # backtrack until the mismatch decreases
        for _ in range(30):
            s_new, m_new = _attempt(model, lam_i, lam_f, v + step, T, rtol, box)
            if s_new is not None and np.linalg.norm(m_new) < np.linalg.norm(miss):
                break
            step = 0.5 * step
        else:
            raise GeodesicNoConvergence("shooting stalled; try geodesic_arclength for one parameter")
        v, sol, miss = v + step, s_new, m_new
    times = np.linspace(0.0, T, grid_n)
    y = sol.sol(times)
    vals, vels = y[:n].T.copy(), y[n:].T.copy()
    vals[0], vals[-1] = lam_i, lam_f
    proto = TabulatedProtocol(times, vals, vels, form="geodesic")
    return _solution(model, proto, grid_n, "shooting")
