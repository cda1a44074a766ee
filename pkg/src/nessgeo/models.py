"""Model zoo: the three-level maser, its closed forms, naive protocols and config ingestion."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ModelError, ShapeError
from .lindblad import Channel, LindbladModel, param
from .protocols import LinearProtocol, Sin2Protocol

# Fig. 2 set-up of the maser, in units where gamma = 1
FIG2_BETA1_START = 0.001
FIG2_BETA1_END = 0.039
FIG2_DURATION = 200.0

CONFIG_SCHEMA_VERSION = 1

G, EA, EB = 0, 1, 2


def _ketbra(i, j, d=3):
    X = np.zeros((d, d), dtype=complex)
    X[i, j] = 1.0
    return X


@dataclass(frozen=True)
class ThreeLevelMaserSpec:
    """Three-level maser with two thermal baths and an infinite-temperature work bath.

    Levels are ordered ``(g, e_A, e_B)``. ``controls`` names the inverse
    temperatures exposed as control parameters, in order.
    """

    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 1.0
    eps_g: float = 0.0
    eps_a: float = 50.0
    eps_b: float = 40.0
    beta1: float = FIG2_BETA1_START
    beta2: float = 0.1
    controls: tuple = ("beta1",)

    def __post_init__(self):
        if not self.eps_a > self.eps_b > self.eps_g:
            raise ModelError("level ordering eps_A > eps_B > eps_g violated")
        if min(self.gamma1, self.gamma2, self.gamma3) < 0:
            raise ModelError("negative rate")
        for c in self.controls:
            if c not in ("beta1", "beta2"):
                raise ModelError(f"unknown control {c!r}")

    @property
    def omega1(self):
        return self.eps_a - self.eps_g

    @property
    def omega2(self):
        return self.eps_a - self.eps_b

    @property
    def omega3(self):
        return self.eps_b - self.eps_g

    @property
    def point(self):
        """Control vector built from this instance's inverse temperatures."""
        return np.array([getattr(self, c) for c in self.controls])


def fig2_spec(**overrides):
    return ThreeLevelMaserSpec(**overrides)


def build_tlm(spec: ThreeLevelMaserSpec) -> LindbladModel:
    H = np.diag([spec.eps_g, spec.eps_a, spec.eps_b]).astype(complex)
    idx = {name: i for i, name in enumerate(spec.controls)}
    beta1 = param(idx["beta1"]) if "beta1" in idx else spec.beta1
    beta2 = param(idx["beta2"]) if "beta2" in idx else spec.beta2
    channels = (
        Channel(_ketbra(G, EA), spec.gamma1, beta1, spec.omega1, bath="bath1"),
        Channel(_ketbra(EB, EA), spec.gamma2, beta2, spec.omega2, bath="bath2"),
        Channel(_ketbra(G, EB), spec.gamma3, 0.0, spec.omega3, bath="work"),
    )
    return LindbladModel(
        dim=3,
        hamiltonian=H,
        channels=channels,
        nparams=len(spec.controls),
        param_names=tuple(spec.controls),
        bounds=tuple((0.0, np.inf) for _ in spec.controls),
    )


def tlm_closed_form(spec: ThreeLevelMaserSpec, beta1):
    """Closed-form metric, KMB Fisher information and relaxation time along beta1.

    Evaluated in log space. Requires equal channel rates. Returns
    ``(m, I_kmb, tau)``, each broadcast against ``beta1``.
    """
    if not (spec.gamma1 == spec.gamma2 == spec.gamma3):
        raise ModelError("closed form assumes gamma1 = gamma2 = gamma3")
    b1 = np.asarray(beta1, dtype=float)
    b2 = spec.beta2
    eg, ea, eb = spec.eps_g, spec.eps_a, spec.eps_b
    gamma, w1 = spec.gamma1, spec.omega1
    z = np.logaddexp(b2 * eb, b2 * ea)
    s1 = np.logaddexp(b1 * eg, np.log(2.0) + b1 * ea)
    s3 = logsumexp(
        np.stack(np.broadcast_arrays(b1 * eg + b2 * eb, b1 * eg + b2 * ea, b2 * eb + b1 * ea)), axis=0
    )
    log_m = 2 * np.log(w1) + 2 * b1 * (eg + ea) + z - np.log(gamma) - 3 * s1 - s3
    log_i = 2 * np.log(w1) + b1 * (2 * eg + ea) + z - 2 * s1 - s3
    tau = 1.0 / (gamma * (2.0 + np.exp(-b1 * w1)))
    return np.exp(log_m), np.exp(log_i), tau


def naive_protocols(start, end, duration):
    """Linear and sin^2 ramps between the same endpoints."""
    return LinearProtocol(start, end, duration), Sin2Protocol(start, end, duration)


class OperatingRegime(enum.Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    BOUNDARY = "boundary"


def classify_regime(spec: ThreeLevelMaserSpec, beta1=None, tol=1e-12):
    beta1 = spec.beta1 if beta1 is None else beta1
    gap = spec.omega2 / spec.omega1 - beta1 / spec.beta2
    if abs(gap) <= tol:
        return OperatingRegime.BOUNDARY
    return OperatingRegime.ENGINE if gap > 0 else OperatingRegime.REFRIGERATOR


def _matrix(obj, d, what):
    if isinstance(obj, dict):
        re = np.asarray(obj.get("real", np.zeros((d, d))), dtype=float)
        im = np.asarray(obj.get("imag", np.zeros((d, d))), dtype=float)
        M = re + 1j * im
    else:
        M = np.asarray(obj, dtype=float).astype(complex)
    if M.shape != (d, d):
        raise ShapeError(f"{what} has shape {M.shape}, expected {(d, d)}")
    return M


def _config_beta(value):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinite_temperature"):
            return 0.0, None
        raise ModelError(f"unrecognized beta {value!r}")
    if isinstance(value, dict):
        k = int(value["param"])
        return param(k), k
    return float(value), None


def model_from_config(cfg: dict) -> LindbladModel:
    """Build a model from a parsed JSON config document.

    Schema (``schema_version`` 1)::

        {"schema_version": 1, "dim": d,
         "hamiltonian": [[...]] or {"real": [[...]], "imag": [[...]]},
         "channels": [{"A": matrix, "gamma": rate, "beta": number | "inf" | {"param": k},
                       "omega": energy, "bath": optional name}],
         "param_names": optional list}

    ``"beta": "inf"`` flags an infinite-temperature bath (equal forward and
    reverse rates, no entropy flux); ``{"param": k}`` reads control k.
    """
    if "schema_version" not in cfg:
        raise ModelError("model config is missing schema_version")
    if int(cfg["schema_version"]) != CONFIG_SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {cfg['schema_version']!r}")
    missing = [k for k in ("dim", "hamiltonian") if k not in cfg]
    if missing:
        raise ModelError(f"model config is missing {', '.join(missing)}")
    d = int(cfg["dim"])
    H = _matrix(cfg["hamiltonian"], d, "hamiltonian")
    channels = []
    used = [-1]
    for i, ch in enumerate(cfg.get("channels", [])):
        missing = [k for k in ("A", "gamma") if k not in ch]
        if missing:
            raise ModelError(f"channel {i} is missing {', '.join(missing)}")
        gamma = float(ch["gamma"])
        if gamma < 0:
            raise ModelError(f"channel {i} has a negative rate")
        beta, k = _config_beta(ch.get("beta", "inf"))
        if k is not None:
            used.append(k)
        channels.append(
            Channel(_matrix(ch["A"], d, f"channel {i} jump"), gamma, beta, float(ch.get("omega", 0.0)),
                    bath=str(ch.get("bath", f"bath{i + 1}")))
        )
    names = tuple(cfg.get("param_names", ()))
    nparams = max(max(used) + 1, len(names))
    return LindbladModel(dim=d, hamiltonian=H, channels=channels, nparams=nparams, param_names=names)


def load_model(path) -> LindbladModel:
    with open(Path(path)) as fh:
        return model_from_config(json.load(fh))


def tlm_config(spec: ThreeLevelMaserSpec):
    """JSON config document equivalent to :func:`build_tlm` with no controls."""
    H = np.diag([spec.eps_g, spec.eps_a, spec.eps_b])
    def jump(i, j):
        return _ketbra(i, j).real.tolist()
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "dim": 3,
        "hamiltonian": H.tolist(),
        "channels": [
            {"A": jump(G, EA), "gamma": spec.gamma1, "beta": spec.beta1, "omega": spec.omega1, "bath": "bath1"},
            {"A": jump(EB, EA), "gamma": spec.gamma2, "beta": spec.beta2, "omega": spec.omega2, "bath": "bath2"},
            {"A": jump(G, EB), "gamma": spec.gamma3, "beta": "inf", "omega": spec.omega3, "bath": "work"},
        ],
    }
