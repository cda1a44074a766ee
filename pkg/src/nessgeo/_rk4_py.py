"""Pure-NumPy RK4 stepping; same contract as the compiled ``_rk4.rk4_chunk``."""

import numpy as np


def rk4_chunk(Ls, y0, h, out):
    n = (Ls.shape[0] - 1) // 2
    y = np.array(y0, dtype=complex)
    out[0] = y
    for k in range(n):
        L0, Lm, L1 = Ls[2 * k], Ls[2 * k + 1], Ls[2 * k + 2]
        k1 = L0 @ y
        k2 = Lm @ (y + 0.5 * h * k1)
        k3 = Lm @ (y + 0.5 * h * k2)
        k4 = L1 @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
