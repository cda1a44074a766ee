"""Entropy accounting along trajectories.

Sign conventions: ``heat_currents`` returns the energy current *into* the
system from each bath, ``J_a = Tr[H D_a(rho)]``; the entropy flux to the
environment is ``Pi_dot = -sum_a beta_a J_a``, so an infinite-temperature
bath (``beta = 0``) carries none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import Trajectory, relax
from .errors import LedgerInconsistency
from .linalg import P_FLOOR, dag, hermitize, trace

SIGMA_NA_FLOOR = -1e-12
HATANO_SASA_TOL = 1e-8
FD_TOL = 1e-8
BOUNDARY_TOL = 1e-6


def _log_stack(X, floor=P_FLOOR):
    p, U = np.linalg.eigh(hermitize(np.asarray(X)))
    p_raw = p
    p = np.maximum(p, floor)
    return p_raw, U @ (np.log(p)[..., :, None] * dag(U))


def _entropy(p_raw):
    pos = np.where(p_raw > 0, p_raw, 1.0)
    return -np.sum(np.where(p_raw > 0, p_raw * np.log(pos), 0.0), axis=-1)


def _tr(A, B):
    return np.real(np.einsum("...ij,...ji->...", A, B))


def sigma_na_rate(rho_dot, rho, pi):
    """Nonadiabatic entropy production rate -Tr[rho_dot (log rho - log pi)]."""
    _, log_rho = _log_stack(rho)
    _, log_pi = _log_stack(pi)
    return -_tr(np.asarray(rho_dot), log_rho - log_pi)


def excess_flux_rate(rho_dot, pi):
    """Excess entropy flux rate Tr[rho_dot log pi]."""
    _, log_pi = _log_stack(pi)
    return _tr(np.asarray(rho_dot), log_pi)


def _heisenberg_energy_terms(H, A):
    """Operators K with Tr[H D[A](rho)] = Tr[K rho]."""
    AdA = dag(A) @ A
    return dag(A) @ H @ A - 0.5 * (H @ AdA + AdA @ H)


def heat_currents(model, lam, rho):
    """Energy current into the system from each bath, keyed by bath name.

    ``lam`` and ``rho`` may be stacks (``(N, n)`` and ``(N, d, d)``).
    """
    lam = model.as_lambda(lam)
    rho = np.asarray(getattr(rho, "data", rho))
    fwd, rev = model.rates(lam)
    H = model.hamiltonian_at(lam)
    out = {b: np.zeros(rho.shape[:-2]) for b in model.baths}
    for x, ch in enumerate(model.channels):
        A = ch.jump
        Kp = _heisenberg_energy_terms(H, A)
        Km = _heisenberg_energy_terms(H, dag(A))
        out[ch.bath] = out[ch.bath] + fwd[..., x] * _tr(Kp, rho) + rev[..., x] * _tr(Km, rho)
    return out


def bath_inverse_temperatures(model, lam):
    lam = model.as_lambda(lam)
    betas = {}
    for ch in model.channels:
        betas.setdefault(ch.bath, ch.inverse_temperature(lam))
    return betas


def entropy_flux(model, lam, rho):
    J = heat_currents(model, lam, rho)
    betas = bath_inverse_temperatures(model, lam)
    return -sum(betas[b] * J[b] for b in J)


def _trapezoid(y, h):
    y = np.asarray(y)
    if len(y) < 2:
        return 0.0
    return float(h * (np.sum(y) - 0.5 * (y[0] + y[-1])))


def _cumtrapz(y, h):
    y = np.asarray(y)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return out


def fd_entropy_rate(S, h):
    """Fourth-order central differences of S; NaN on the two edge points at each end."""
    out = np.full_like(S, np.nan)
    if len(S) >= 5:
        out[2:-2] = (-S[4:] + 8 * S[3:-1] - 8 * S[1:-3] + S[:-4]) / (12 * h)
    return out


@dataclass(frozen=True, eq=False)
class EntropyLedger:
    """Per-grid entropy rates and their integrals over one trajectory segment."""

    times: np.ndarray
    lam: np.ndarray
    S: np.ndarray
    dS_dt: np.ndarray
    dS_dt_fd: np.ndarray
    sigma: np.ndarray
    sigma_na: np.ndarray
    sigma_ad: np.ndarray
    pi_total: np.ndarray
    pi_ex: np.ndarray
    pi_hk: np.ndarray
    heat: dict
    phi_mean: np.ndarray
    rel_entropy: np.ndarray
    integrals: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    tail: Optional["EntropyLedger"] = None

    def cumulative(self, name):
        return _cumtrapz(getattr(self, name), self.times[1] - self.times[0])

    COLUMNS = (
        "t", "S", "dS_dt", "sigma_rate", "sigma_na_rate", "sigma_ad_rate",
        "pi_rate", "pi_ex_rate", "pi_hk_rate", "phi_mean", "rel_entropy",
    )

    def table(self):
        """Column names and a 2-D array, one row per grid time.

        Columns: t, lambda_1..n, S, dS_dt, sigma_rate, sigma_na_rate,
        sigma_ad_rate, pi_rate, pi_ex_rate, pi_hk_rate, phi_mean,
        rel_entropy, then one heat_<bath> column per bath.
        """
        n = self.lam.shape[1]
        names = ["t"] + [f"lambda_{i + 1}" for i in range(n)] + list(self.COLUMNS[1:])
        cols = [self.times] + [self.lam[:, i] for i in range(n)] + [
            self.S, self.dS_dt, self.sigma, self.sigma_na, self.sigma_ad,
            self.pi_total, self.pi_ex, self.pi_hk, self.phi_mean, self.rel_entropy,
        ]
        for b, J in self.heat.items():
            names.append(f"heat_{b}")
            cols.append(J)
        return names, np.column_stack(cols)


def _segment(traj: Trajectory, model):
    h = traj.h
    p_rho, log_rho = _log_stack(traj.states)
    _, log_pi = _log_stack(traj.steady)
    rd = traj.rho_dot
    S = _entropy(p_rho)
    dS = -_tr(rd, log_rho)
    s_na = -_tr(rd, log_rho - log_pi)
    p_ex = _tr(rd, log_pi)
    heat = heat_currents(model, traj.lam, traj.states)
    betas = bath_inverse_temperatures(model, traj.lam)
    p_tot = -sum(betas[b] * heat[b] for b in heat) if heat else np.zeros_like(S)
    sigma = dS + p_tot
    s_ad = sigma - s_na
    phi = -_tr(traj.states, log_pi)
    rel = -S + phi
    return EntropyLedger(
        times=traj.times, lam=traj.lam, S=S, dS_dt=dS, dS_dt_fd=fd_entropy_rate(S, h),
        sigma=sigma, sigma_na=s_na, sigma_ad=s_ad, pi_total=p_tot, pi_ex=p_ex, pi_hk=s_ad,
        heat=heat, phi_mean=phi, rel_entropy=rel,
    )


def _worst(name, values, times, tol, message):
    k = int(np.nanargmax(values))
    if values[k] > tol:
        raise LedgerInconsistency(
            f"{message}: {values[k]:.3e} > {tol:g} at t = {times[k]:g}",
            worst_index=k, worst_time=float(times[k]), residual=float(values[k]),
        )


def ledger_for(trajectory: Trajectory, model, protocol=None, relax_tail=True, threshold=1e-12,
               check=True, fd_tol=FD_TOL, boundary_tol=BOUNDARY_TOL) -> EntropyLedger:
    """Fill an :class:`EntropyLedger` for a driven trajectory.

    With ``relax_tail`` the final state is relaxed at the final control
    point; the pure-relaxation excess flux is then available both from the
    endpoint formula and from integrating the tail, and the boundary
    identity <Phi>|_0^T = Delta S(pi) + Pi_ex^(B) is checked when the run
    started in its steady state. With ``check``, violated identities raise
    :class:`LedgerInconsistency` naming the worst grid point.
    """
    led = _segment(trajectory, model)
    h = trajectory.h
    t = trajectory.times
    res = {}
    res["sigma_na_min"] = float(np.min(led.sigma_na))
    hs = np.abs(led.dS_dt + led.pi_ex - led.sigma_na)
    res["hatano_sasa"] = float(np.max(hs))
    fd = np.abs(led.dS_dt_fd - led.dS_dt)
    res["dS_fd"] = float(np.nanmax(fd)) if np.any(np.isfinite(fd)) else 0.0
    split = np.abs(led.pi_total - (led.pi_ex + led.pi_hk))
    res["flux_split"] = float(np.max(split))

    pi0, piT = trajectory.steady[0], trajectory.steady[-1]
    p0, log_pi0 = _log_stack(pi0)
    pT, log_piT = _log_stack(piT)
    S_pi0, S_piT = _entropy(p0), _entropy(pT)
    rhoT = trajectory.final
    ints = {
        "Sigma_na": _trapezoid(led.sigma_na, h),
        "Sigma_ad": _trapezoid(led.sigma_ad, h),
        "Sigma": _trapezoid(led.sigma, h),
        "Pi_ex_A": _trapezoid(led.pi_ex, h),
        "Pi_hk": _trapezoid(led.pi_hk, h),
        "delta_S_pi": float(S_piT - S_pi0),
        "delta_S_rho": float(led.S[-1] - led.S[0]),
        "phi_boundary": float(-_tr(rhoT, log_piT) + _tr(trajectory.states[0], log_pi0)),
        "Pi_ex_B": float(-_tr(rhoT - piT, log_piT)),
    }
    tail = None
    if relax_tail:
        rx = relax(model, trajectory.lam[-1], rhoT, threshold=threshold, h=h, t0=float(t[-1]))
        tail = _segment(rx, model)
        ints["Pi_ex_B_tail"] = _trapezoid(tail.pi_ex, h)
        ints["Sigma_na_tail"] = _trapezoid(tail.sigma_na, h)
        ints["Sigma_ad_tail"] = _trapezoid(tail.sigma_ad, h)
        ints["Pi_ex"] = ints["Pi_ex_A"] + ints["Pi_ex_B_tail"]
        res["pi_ex_b_routes"] = abs(ints["Pi_ex_B"] - ints["Pi_ex_B_tail"])
        res["sigma_na_min"] = min(res["sigma_na_min"], float(np.min(tail.sigma_na)))
        if float(np.max(np.abs(trajectory.states[0] - pi0))) < 1e-10:
            res["boundary"] = abs(ints["phi_boundary"] - (ints["delta_S_pi"] + ints["Pi_ex_B_tail"]))
    else:
        ints["Pi_ex"] = ints["Pi_ex_A"] + ints["Pi_ex_B"]

    if check:
        _worst("sigma_na", -led.sigma_na, t, -SIGMA_NA_FLOOR, "negative nonadiabatic entropy production")
        _worst("hatano_sasa", hs, t, HATANO_SASA_TOL, "Hatano-Sasa identity residual")
        if np.any(np.isfinite(fd)):
            _worst("dS_fd", np.where(np.isfinite(fd), fd, -np.inf), t, fd_tol, "entropy rate cross-check")
        _worst("flux_split", split, t, HATANO_SASA_TOL, "flux splitting residual")
        if tail is not None:
            _worst("sigma_na_tail", -tail.sigma_na, tail.times, -SIGMA_NA_FLOOR,
                   "negative nonadiabatic entropy production in relaxation")
            if res["pi_ex_b_routes"] > boundary_tol:
                raise LedgerInconsistency(
                    f"pure-relaxation excess flux routes differ by {res['pi_ex_b_routes']:.3e}",
                    worst_index=len(t) - 1, worst_time=float(t[-1]), residual=res["pi_ex_b_routes"])
            if res.get("boundary", 0.0) > boundary_tol:
                raise LedgerInconsistency(
                    f"boundary identity residual {res['boundary']:.3e}",
                    worst_index=len(t) - 1, worst_time=float(t[-1]), residual=res["boundary"])
    return EntropyLedger(**{**led.__dict__, "integrals": ints, "residuals": res, "tail": tail})
