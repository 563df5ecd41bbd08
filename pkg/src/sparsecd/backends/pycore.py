"""Pure-NumPy coordinate-descent kernels.

Reference implementation of the hot loops; the compiled backend in
``_cdcore`` mirrors these update rules exactly (same cycling order, same
closed forms).  Used automatically when the extension is unavailable or when
``SPARSECD_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np

from ..penalties import min_curvature, scaled_threshold

_BASE_BY_CODE = {0: "lasso", 1: "mcp", 2: "scad"}


def cd_cycle(X, w, rw, beta, v, target, lam1, lam2, gamma, pen):
    """One ascending pass of coordinate updates over ``target``.

    X is the standardized design (n x p), rw the working residual, v the
    per-column curvature (1 for gaussian columns, x_j' w x_j / n under
    majorization weights w).  Curvatures below the convexity floor of the
    penalty are clamped, which damps the step without moving its fixed
    point.  beta and rw are updated in place; returns the largest absolute
    coefficient change of the pass.
    """
    n = X.shape[0]
    base = _BASE_BY_CODE[pen]
    amin = min_curvature(gamma, lam2, base)
    wrw = rw if w is None else w * rw
    maxdiff = 0.0
    for j in target:
        vj = v[j]
        if vj <= 0.0:  # flagged constant column
            continue
        a = vj if vj > amin else amin
        xj = X[:, j]
        bj = beta[j]
        zj = xj.dot(wrw) / n + a * bj
        bnew = scaled_threshold(zj, lam1, gamma, a + lam2, base)
        diff = bnew - bj
        if diff != 0.0:
            beta[j] = bnew
            rw -= diff * xj
            if w is not None:
                wrw -= diff * (w * xj)
            ad = abs(diff)
            if ad > maxdiff:
                maxdiff = ad
    return maxdiff


def group_cycle(X, w, rw, beta, starts, ends, target, mult, v, lam1, gamma, pen):
    """One pass of blockwise updates over the groups listed in ``target``.

    Assumes group-orthonormalized blocks, so the curvature v is a scalar
    shared by every column of a group (clamped to the convexity floor like
    the scalar kernel).  mult carries the per-group penalty multipliers
    (sqrt of group size).  Returns the largest absolute per-coefficient
    change.
    """
    n = X.shape[0]
    base = _BASE_BY_CODE[pen]
    a = max(v, min_curvature(gamma, 0.0, base))
    wrw = rw if w is None else w * rw
    maxdiff = 0.0
    for g in target:
        lo, hi = starts[g], ends[g]
        Xg = X[:, lo:hi]
        bg = beta[lo:hi]
        zg = Xg.T.dot(wrw) / n + a * bg
        t = float(np.sqrt(zg.dot(zg)))
        if t > 0.0:
            tnew = scaled_threshold(t, lam1 * mult[g], gamma, a, base)
            bnew = (tnew / t) * zg
        else:
            bnew = np.zeros_like(zg)
        diff = bnew - bg
        ad = float(np.max(np.abs(diff))) if diff.size else 0.0
        if ad > 0.0:
            beta[lo:hi] = bnew
            upd = Xg.dot(diff)
            rw -= upd
            if w is not None:
                wrw -= w * upd
            if ad > maxdiff:
                maxdiff = ad
    return maxdiff
