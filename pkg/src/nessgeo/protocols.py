"""Control protocols lambda(t) on [0, T] with velocity access."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator


class Protocol:
    """Base class: subclasses implement ``_value`` and ``_velocity`` on clamped times.

    ``value(t)`` and ``velocity(t)`` accept scalars or arrays of times and
    return arrays with a trailing parameter axis.
    """

    form = "generic"

    def __init__(self, duration, nparams):
        if not duration > 0:
            raise ValueError("protocol duration must be positive")
        self.duration = float(duration)
        self.nparams = int(nparams)

    def _clamp(self, t):
        return np.clip(np.asarray(t, dtype=float), 0.0, self.duration)

    def value(self, t):
        return self._value(self._clamp(t))

    def velocity(self, t):
        return self._velocity(self._clamp(t))

    @property
    def start(self):
        return self.value(0.0)

    @property
    def end(self):
        return self.value(self.duration)

    def tabulate(self, n=2001):
        t = np.linspace(0.0, self.duration, n)
        return t, self.value(t), self.velocity(t)

    def __repr__(self):
        return f"{type(self).__name__}(T={self.duration:g}, start={self.start}, end={self.end})"


class _Endpoints(Protocol):
    def __init__(self, start, end, duration):
        self._a = np.atleast_1d(np.asarray(start, dtype=float))
        self._b = np.atleast_1d(np.asarray(end, dtype=float))
        if self._a.shape != self._b.shape:
            raise ValueError("endpoint shapes differ")
        super().__init__(duration, self._a.size)

    def _shape(self, t, f):
        return self._a + np.multiply.outer(f, self._b - self._a)


class LinearProtocol(_Endpoints):
    form = "linear"

    def _value(self, t):
        return self._shape(t, t / self.duration)

    def _velocity(self, t):
        return np.multiply.outer(np.ones_like(t), (self._b - self._a) / self.duration)


class Sin2Protocol(_Endpoints):
    """lambda(t) = a + (b - a) sin^2(pi t / 2T); zero velocity at both ends."""

    form = "sin2"

    def _value(self, t):
        return self._shape(t, np.sin(0.5 * np.pi * t / self.duration) ** 2)

    def _velocity(self, t):
        rate = 0.5 * np.pi / self.duration * np.sin(np.pi * t / self.duration)
        return np.multiply.outer(rate, self._b - self._a)


def constant_protocol(point, duration):
    return LinearProtocol(point, point, duration)


class TabulatedProtocol(Protocol):
    """Knot-interpolated protocol.

    Without knot velocities the path is a monotone cubic (PCHIP) interpolant;
    with them it is the cubic Hermite spline through (value, velocity) pairs.
    """

    form = "tabulated"

    def __init__(self, times, values, velocities=None, form=None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times[0] != 0.0:
            raise ValueError("tabulated protocol must start at t = 0")
        super().__init__(times[-1], values.shape[1])
        self.times = times
        self.values = values
        if velocities is None:
            self._spline = PchipInterpolator(times, values, axis=0)
        else:
            velocities = np.asarray(velocities, dtype=float).reshape(values.shape)
            self._spline = CubicHermiteSpline(times, values, velocities, axis=0)
        self._deriv = self._spline.derivative()
        if form is not None:
            self.form = form

    def _value(self, t):
        return self._spline(t)

    def _velocity(self, t):
        return self._deriv(t)


def velocity_consistency(protocol, n=20, rng=None, rel_step=1e-6):
    """Worst relative mismatch between ``velocity`` and central differences of ``value``."""
    rng = np.random.default_rng(0) if rng is None else rng
    T = protocol.duration
    ts = rng.uniform(0.05 * T, 0.95 * T, n)
    h = rel_step * T
    worst = 0.0
    for t in ts:
        fd = (protocol.value(t + h) - protocol.value(t - h)) / (2 * h)
        v = protocol.velocity(t)
        scale = max(np.max(np.abs(v)), np.max(np.abs(protocol.end - protocol.start)) / T, 1e-300)
        worst = max(worst, float(np.max(np.abs(fd - v)) / scale))
    return worst
