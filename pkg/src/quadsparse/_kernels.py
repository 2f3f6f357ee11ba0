"""Compiled inner loops for coordinate descent over tile columns.

A column touches the contiguous block of cells of its tile, so a coordinate
update reads and writes ``|tile|`` residual entries.  A sweep over every tile
costs ``n * (k + 1)``.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def cd_sweep(order, b, resid, mask, w, colsq, lam, m0s, m1s, m2s, k, nonneg, snap):
    """One cyclic pass of soft-thresholded coordinate updates.

    ``resid`` holds ``(z - D b) * mask`` and is updated in place.  Minimizes
    ``0.5 * ||mask * (z - D b)||^2 + lam * ||b||_1`` coordinate-wise, with
    ``b >= 0`` when ``nonneg``.  A coordinate whose correlation clears ``lam``
    by no more than ``snap`` is set to zero, so rounding noise in the residual
    cannot leave ~1e-17 coefficients in the support.  Returns the largest
    ``|delta b_j| * ||D_j||``.
    """
    side = 1 << k
    biggest = 0.0
    for t in order:
        cs = colsq[t]
        if cs <= 0.0:
            continue
        m0 = m0s[t]
        h = 1 << (k - m0)
        r0 = m2s[t] * h
        c0 = m1s[t] * h
        s = 0.0
        for rr in range(r0, r0 + h):
            base = rr * side
            for cc in range(c0, c0 + h):
                s += resid[base + cc]
        old = b[t]
        u = w[t] * s + cs * old
        if u - lam > snap:
            new = (u - lam) / cs
        elif u + lam < -snap and not nonneg:
            new = (u + lam) / cs
        else:
            new = 0.0
        if new != old:
            d = (new - old) * w[t]
            for rr in range(r0, r0 + h):
                base = rr * side
                for cc in range(c0, c0 + h):
                    resid[base + cc] -= d * mask[base + cc]
            b[t] = new
            step = abs(new - old) * np.sqrt(cs)
            if step > biggest:
                biggest = step
    return biggest
