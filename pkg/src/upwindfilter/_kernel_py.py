"""Reference numpy implementation of the stencil sum.

The arithmetic order matches ``_kernel_ext.pyx`` exactly, so both backends
produce bit-identical results.
"""
from __future__ import annotations

import numpy as np


def _gather(tiled, nx, ny, ox, oy, w, aligned):
    # ``tiled`` is the field repeated 2x2, so every periodic shift is a view
    ox, oy = int(ox), int(oy)
    a = tiled[ox:ox + nx, oy:oy + ny]
    if aligned:
        return a
    b = tiled[ox + 1:ox + 1 + nx, oy:oy + ny]
    c = tiled[ox:ox + nx, oy + 1:oy + 1 + ny]
    d = tiled[ox + 1:ox + 1 + nx, oy + 1:oy + 1 + ny]
    return w[0] * a + w[1] * b + w[2] * c + w[3] * d


def stencil_sum(packed, gp, gm, threads=1):
    """``out = sum_d omega_d sum_k c_k ((S+ gp_d + gm_d) - gp_d - S- gm_d)``."""
    D, nx, ny = gp.shape
    out = np.zeros((nx, ny))
    for d in range(D):
        s = np.zeros((nx, ny))
        g_p, g_m = gp[d], gm[d]
        tp, tm = np.tile(g_p, (2, 2)), np.tile(g_m, (2, 2))
        for k in range(packed.node_start[d], packed.node_start[d + 1]):
            al = bool(packed.aligned[k])
            sp = _gather(tp, nx, ny, packed.pox[k], packed.poy[k], packed.pw[k], al)
            sm = _gather(tm, nx, ny, packed.mox[k], packed.moy[k], packed.mw[k], al)
            s += packed.coef[k] * (((sp + g_m) - g_p) - sm)
        out += packed.omega[d] * s
    return out
