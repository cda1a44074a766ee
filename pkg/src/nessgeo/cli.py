"""Command-line entry point.

Usage::

    nessgeo <command> [--config PATH] [--model PATH] [--out DIR] [--seed N] [--gamma-T X] ...

Commands: ``steady``, ``simulate``, ``metric-sweep``, ``geodesic``,
``figure2``, ``bounds``. Settings resolve as flags > ``--config`` file >
defaults. Exit codes: 0 success, 1 usage, 2 model or numerical error,
3 speed-limit violation; failures print one JSON object on stderr.

CSV layouts (header row always present, columns in this order):

* ``steady.csv``: lambda_1..n, i, j, re, im (one row per matrix element)
* ``spectrum.csv``: k, re, im (Liouvillian eigenvalues, sorted)
* ``ledger_<protocol>.csv``: t, lambda_1..n, S, dS_dt, sigma_rate,
  sigma_na_rate, sigma_ad_rate, pi_rate, pi_ex_rate, pi_hk_rate, phi_mean,
  rel_entropy, heat_<bath> per bath
* ``speed_<protocol>.csv``: t, kind, qfi, v, sigma_phi, abs_pi_ex_rate, slack
* ``metric_sweep.csv``: beta1, m_numeric, m_closed, I, tau, rel_gap
  (single-parameter maser); otherwise point, lambda_1..n, mu, nu, xi,
  zeta, I, tau
* ``geodesic.csv``: t, lambda_1..n, lambda_dot_1..n
* ``protocols.csv``: protocol, t, lambda
* ``cumulative.csv``: protocol, t, quantity, value with quantity in
  {exact, slow_driving}

Every CSV is accompanied by ``<name>.json`` holding the resolved settings,
tolerances, package version and wall time.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import propagate
from .errors import BoundViolation, NessGeoError
from .geometry import (
    friction_stack,
    geodesic_arclength,
    geodesic_multiparam,
    metric_stack,
)
from .lindblad import build_liouvillian, steady_state
from .models import ThreeLevelMaserSpec, build_tlm, load_model, model_from_config, naive_protocols, tlm_closed_form
from .speed_limits import MonotoneFunctionKind, speed_limit_audit
from .thermo import ledger_for

DEFAULTS = {
    "model": "tlm",
    "tlm": {},
    "controls": ["beta1"],
    "out": "out",
    "seed": 0,
    "gamma_T": 200.0,
    "lambda": None,
    "lambda_start": None,
    "lambda_end": None,
    "steps_per_time": 100,
    "min_steps": 2000,
    "grid_n": 2001,
    "points": 50,
    "protocol": "linear",
    "kinds": ["sld", "wy", "kmb", "hm"],
    "relax_tail": True,
    "tolerances": {"bound_slack": 1e-10, "metric_rel_gap": 1e-6},
}

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_BOUND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _write_csv(out: Path, name, header, rows, settings, t0):
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    side = {
        "file": path.name,
        "version": __version__,
        "settings": settings,
        "tolerances": settings.get("tolerances", {}),
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    (out / f"{name}.json").write_text(json.dumps(side, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _resolve(args):
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        try:
            file_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        for k, v in file_cfg.items():
            if k == "tolerances":
                cfg["tolerances"].update(v)
            else:
                cfg[k.replace("-", "_")] = v
    flags = {
        "model": args.model,
        "out": args.out,
        "seed": args.seed,
        "gamma_T": args.gamma_T,
        "lambda": args.lam,
        "lambda_start": args.lambda_start,
        "lambda_end": args.lambda_end,
        "grid_n": args.grid_n,
        "points": args.points,
        "protocol": args.protocol,
        "kinds": args.kinds,
        "steps_per_time": args.steps_per_time,
    }
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    if any(not (t > 0) for t in cfg["tolerances"].values()):
        raise UsageError("tolerances must be positive")
    if not cfg["gamma_T"] > 0:
        raise UsageError("--gamma-T must be positive")
    return cfg


def _model(cfg):
    """Model, characteristic rate, default endpoints and the maser spec (or None)."""
    src = cfg["model"]
    if src == "tlm":
        spec = ThreeLevelMaserSpec(**{**cfg["tlm"], "controls": tuple(cfg["controls"])})
        model = build_tlm(spec)
        start = spec.point
        end = start.copy()
        if "beta1" in spec.controls:
            end[spec.controls.index("beta1")] = 0.039
        return model, spec.gamma1, start, end, spec
    model = model_from_config(src) if isinstance(src, dict) else load_model(src)
    zero = np.zeros(model.nparams)
    return model, 1.0, zero, zero, None


def _point(cfg, key, default, n):
    v = cfg.get(key)
    arr = np.asarray(default if v is None else v, dtype=float).reshape(-1)
    if arr.size != n:
        raise UsageError(f"{key} needs {n} values, got {arr.size}")
    return arr


def _steps(cfg, T):
    return max(int(cfg["min_steps"]), int(np.ceil(cfg["steps_per_time"] * T)), 100)


def _protocol(model, name, a, b, T, grid_n):
    lin, sin2 = naive_protocols(a, b, T)
    if name == "linear":
        return lin
    if name == "sin2":
        return sin2
    if name == "geodesic":
        if model.nparams == 1:
            return geodesic_arclength(model, a[0], b[0], T, grid_n).protocol
        return geodesic_multiparam(model, a, b, T, grid_n=grid_n).protocol
    raise UsageError(f"unknown protocol {name!r}")


def _ledger_rows(led):
    names, table = led.table()
    return names, table.tolist()


def _speed_rows(records):
    rows = []
    for rec in records:
        rows.extend(rec.rows())
    return rows


def cmd_steady(cfg, out, t0):
    model, _, start, _, _ = _model(cfg)
    lam = _point(cfg, "lambda", start, model.nparams)
    L = build_liouvillian(model, lam)
    pi = steady_state(L).data
    d = model.dim
    rows = [[*lam, i, j, pi[i, j].real, pi[i, j].imag] for i in range(d) for j in range(d)]
    header = [f"lambda_{k + 1}" for k in range(model.nparams)] + ["i", "j", "re", "im"]
    _write_csv(out, "steady", header, rows, cfg, t0)
    ev = np.linalg.eigvals(L.data)
    ev = ev[np.lexsort((np.round(ev.imag, 12), np.round(ev.real, 12)))][::-1]
    _write_csv(out, "spectrum", ["k", "re", "im"], [[k, e.real, e.imag] for k, e in enumerate(ev)], cfg, t0)
    return EXIT_OK


def _trajectory(model, protocol, cfg):
    T = protocol.duration
    pi0 = steady_state(build_liouvillian(model, protocol.start)).data
    return propagate(model, protocol, pi0, _steps(cfg, T))


def cmd_simulate(cfg, out, t0):
    model, gamma, start, end, _ = _model(cfg)
    a = _point(cfg, "lambda_start", start, model.nparams)
    b = _point(cfg, "lambda_end", end, model.nparams)
    T = cfg["gamma_T"] / gamma
    proto = _protocol(model, cfg["protocol"], a, b, T, cfg["grid_n"])
    traj = _trajectory(model, proto, cfg)
    led = ledger_for(traj, model, proto, relax_tail=cfg["relax_tail"])
    names, rows = _ledger_rows(led)
    _write_csv(out, f"ledger_{cfg['protocol']}", names, rows, {**cfg, "integrals": led.integrals}, t0)
    return EXIT_OK


def cmd_metric_sweep(cfg, out, t0):
    model, _, start, end, spec = _model(cfg)
    a = _point(cfg, "lambda_start", start, model.nparams)
    b = _point(cfg, "lambda_end", end, model.nparams)
    s = np.linspace(0.0, 1.0, int(cfg["points"]))
    lams = a + s[:, None] * (b - a)
    fr = friction_stack(model, lams)
    if spec is not None and spec.controls == ("beta1",):
        m_closed, _, _ = tlm_closed_form(spec, lams[:, 0])
        m_num = fr["zeta"][:, 0, 0]
        gap = np.abs(m_num - m_closed) / m_closed
        rows = [[lams[k, 0], m_num[k], m_closed[k], fr["I"][k, 0, 0], fr["tau"][k, 0, 0], gap[k]]
                for k in range(len(s))]
        _write_csv(out, "metric_sweep", ["beta1", "m_numeric", "m_closed", "I", "tau", "rel_gap"], rows,
                   {**cfg, "max_rel_gap": float(gap.max())}, t0)
        return EXIT_OK
    n = model.nparams
    rows = [[k, *lams[k], mu, nu, fr["xi"][k, mu, nu], fr["zeta"][k, mu, nu], fr["I"][k, mu, nu],
             fr["tau"][k, mu, nu]] for k in range(len(s)) for mu in range(n) for nu in range(n)]
    header = ["point"] + [f"lambda_{i + 1}" for i in range(n)] + ["mu", "nu", "xi", "zeta", "I", "tau"]
    _write_csv(out, "metric_sweep", header, rows, cfg, t0)
    return EXIT_OK


def cmd_geodesic(cfg, out, t0):
    model, gamma, start, end, _ = _model(cfg)
    a = _point(cfg, "lambda_start", start, model.nparams)
    b = _point(cfg, "lambda_end", end, model.nparams)
    T = cfg["gamma_T"] / gamma
    n = model.nparams
    if n == 1:
        sol = geodesic_arclength(model, a[0], b[0], T, cfg["grid_n"])
    else:
        sol = geodesic_multiparam(model, a, b, T, grid_n=cfg["grid_n"])
    t = np.linspace(0.0, T, int(cfg["grid_n"]))
    vals, vels = sol.protocol.value(t), sol.protocol.velocity(t)
    rows = [[t[k], *vals[k], *vels[k]] for k in range(len(t))]
    header = ["t"] + [f"lambda_{i + 1}" for i in range(n)] + [f"lambda_dot_{i + 1}" for i in range(n)]
    meta = {**cfg, "action": sol.action, "length": sol.length, "speed_defect": sol.speed_defect, "route": sol.route}
    _write_csv(out, "geodesic", header, rows, meta, t0)
    return EXIT_OK


def _cumulative(y, h):
    c = np.zeros_like(y)
    c[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return c


def cmd_figure2(cfg, out, t0):
    cfg = {**cfg, "model": "tlm", "controls": ["beta1"]}
    model, gamma, start, end, spec = _model(cfg)
    a = _point(cfg, "lambda_start", start, 1)
    b = _point(cfg, "lambda_end", end, 1)
    T = cfg["gamma_T"] / gamma
    kinds = [MonotoneFunctionKind.parse(k) for k in cfg["kinds"]]
    lin, sin2 = naive_protocols(a, b, T)
    geo = geodesic_arclength(model, a[0], b[0], T, cfg["grid_n"]).protocol
    protos = {"geodesic": geo, "linear": lin, "sin2": sin2}
    n_out = int(cfg["grid_n"])
    proto_rows, cum_rows, summary = [], [], {}
    for name, proto in protos.items():
        traj = _trajectory(model, proto, cfg)
        led = ledger_for(traj, model, proto, relax_tail=cfg["relax_tail"])
        stride = max(1, (len(traj.times) - 1) // (n_out - 1))
        idx = np.arange(0, len(traj.times), stride)
        t = traj.times[idx]
        v = proto.velocity(t)
        Z = metric_stack(model, proto.value(t))
        slow = _cumulative(np.einsum("ki,kij,kj->k", v, Z, v), t[1] - t[0])
        exact = led.cumulative("sigma_na")[idx]
        for k, tk in enumerate(t):
            proto_rows.append([name, tk, proto.value(tk)[0]])
            cum_rows.append([name, tk, "exact", exact[k]])
            cum_rows.append([name, tk, "slow_driving", slow[k]])
        names, rows = _ledger_rows(led)
        _write_csv(out, f"ledger_{name}", names, rows, {**cfg, "integrals": led.integrals}, t0)
        recs = [speed_limit_audit(traj, model, proto, k, check=False) for k in kinds]
        _write_csv(out, f"speed_{name}", list(recs[0].COLUMNS), _speed_rows(recs), cfg, t0)
        summary[name] = {"exact": float(exact[-1]), "slow_driving": float(slow[-1])}
    _write_csv(out, "protocols", ["protocol", "t", "lambda"], proto_rows, cfg, t0)
    _write_csv(out, "cumulative", ["protocol", "t", "quantity", "value"], cum_rows, {**cfg, "final": summary}, t0)
    return EXIT_OK


def cmd_bounds(cfg, out, t0):
    model, gamma, start, end, _ = _model(cfg)
    a = _point(cfg, "lambda_start", start, model.nparams)
    b = _point(cfg, "lambda_end", end, model.nparams)
    T = cfg["gamma_T"] / gamma
    proto = _protocol(model, cfg["protocol"], a, b, T, cfg["grid_n"])
    traj = _trajectory(model, proto, cfg)
    tol = cfg["tolerances"]["bound_slack"]
    recs, failures = [], []
    for k in cfg["kinds"]:
        rec = speed_limit_audit(traj, model, proto, k, check=False)
        recs.append(rec)
        worst = int(np.argmin(rec.slack))
        if rec.slack[worst] < -tol or rec.integrals["integrated_slack"] < -tol:
            failures.append((rec.kind.value, float(traj.times[worst]), float(rec.slack[worst])))
    _write_csv(out, "bounds", list(recs[0].COLUMNS), _speed_rows(recs),
               {**cfg, "integrals": {r.kind.value: r.integrals for r in recs}}, t0)
    if failures:
        kind, tw, sl = min(failures, key=lambda f: f[2])
        raise BoundViolation(f"{kind} speed limit violated at t = {tw:g}", worst_time=tw, slack=sl)
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "simulate": cmd_simulate,
    "metric-sweep": cmd_metric_sweep,
    "geodesic": cmd_geodesic,
    "figure2": cmd_figure2,
    "bounds": cmd_bounds,
}


def _floats(text):
    return [float(x) for x in text.split(",")]


def build_parser():
    p = _Parser(prog="nessgeo", description="Thermodynamic geometry of driven open quantum systems")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--model", help="JSON model file (default: built-in three-level maser)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--gamma-T", dest="gamma_T", type=float, help="protocol duration in units of 1/gamma")
        s.add_argument("--lambda", dest="lam", type=_floats, help="comma-separated control point")
        s.add_argument("--lambda-start", dest="lambda_start", type=_floats)
        s.add_argument("--lambda-end", dest="lambda_end", type=_floats)
        s.add_argument("--grid-n", dest="grid_n", type=int)
        s.add_argument("--points", type=int)
        s.add_argument("--steps-per-time", dest="steps_per_time", type=int)
        s.add_argument("--protocol", choices=["linear", "sin2", "geodesic"])
        s.add_argument("--kinds", type=lambda t: t.split(","))
    return p


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("worst_time", "slack", "residual", "worst_index", "cond"):
        val = getattr(exc, attr, None)
        if val is not None:
            payload[attr] = val
    print(json.dumps(payload, default=float), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        cfg = _resolve(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, time.perf_counter())
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except BoundViolation as exc:
        return _fail(EXIT_BOUND, exc)
    except (NessGeoError, ValueError, KeyError, TypeError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_MODEL, exc)


if __name__ == "__main__":
    sys.exit(main())
