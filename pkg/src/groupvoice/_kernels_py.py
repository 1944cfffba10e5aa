"""Pure-Python/numpy versions of the hot kernels.

Signatures and results mirror ``_kernels.pyx``; the compiled module is
preferred when it can be imported (see :mod:`groupvoice.kernels`).
"""
import math

import numpy as np

LOGCOSH = 0
GAUSS = 1


def fixed_point_terms(w, zt, contrast):
    """Sample expectations used by one FastICA fixed-point step.

    Parameters
    ----------
    w : ndarray, shape (k,)
        Current unit direction in whitened space.
    zt : ndarray, shape (n_samples, k)
        Whitened data, one row per sample.
    contrast : int
        ``LOGCOSH`` (g = tanh) or ``GAUSS`` (g(u) = u exp(-u^2/2)).

    Returns
    -------
    ex_g : ndarray, shape (k,)
        E{z g(w'z)}
    e_dg : float
        E{g'(w'z)}
    """
    u = zt @ w
    if contrast == LOGCOSH:
        g = np.tanh(u)
        dg = 1.0 - g * g
    elif contrast == GAUSS:
        e = np.exp(-0.5 * u * u)
        g = u * e
        dg = (1.0 - u * u) * e
    else:
        raise ValueError(f"unknown contrast id {contrast}")
    n = zt.shape[0]
    return (zt.T @ g) / n, float(dg.sum() / n)


def spread_specific_loudness(core, zup, rns, usl):
    """Spread core loudness over the critical-band-rate axis.

    Walks the approximated critical bands (the last one empty) and adds the
    level-dependent upper masking slopes.

    Returns
    -------
    segments : ndarray, shape (m, 4)
        Rows ``(z_start, z_end, n_start, n_end)`` of the piecewise-linear
        pattern, contiguous from 0 to ``zup[-1]`` Bark.
    total : float
        Exact area under the pattern.
    """
    segs = []
    total = 0.0
    z1 = 0.0
    n1 = 0.0
    n2 = 0.0
    z2 = 0.0
    last = len(rns) - 1
    j = last
    for i in range(len(zup)):
        zu = zup[i]
        ig = min(max(i - 1, 0), usl.shape[1] - 1)
        nc = core[i]
        while z1 < zu:
            if n1 <= nc:
                if n1 < nc:
                    j = 0
                    while j < last and rns[j] >= nc:
                        j += 1
                z2 = zu
                n2 = nc
                total += n2 * (z2 - z1)
                segs.append((z1, z2, n2, n2))
            else:
                n2 = rns[j]
                if n2 < nc:
                    n2 = nc
                slope = usl[j, ig]
                dz = (n1 - n2) / slope
                z2 = z1 + dz
                if z2 > zu:
                    z2 = zu
                    dz = z2 - z1
                    n2 = n1 - dz * slope
                total += dz * (n1 + n2) / 2.0
                segs.append((z1, z2, n1, n2))
            while n2 <= rns[j] and j < last:
                j += 1
            z1 = z2
            n1 = n2
    return np.asarray(segs, dtype=float).reshape(-1, 4), max(total, 0.0)


def track_cycle_boundaries(crossings, periods):
    """Chain positive-going zero crossings into successive glottal cycles.

    From the current boundary ``b`` with local period ``p`` the next boundary
    is the crossing nearest to ``b + p`` among those in ``(b + p/2, b + 3p/2]``.
    When no crossing qualifies the chain breaks and restarts at the next
    crossing beyond the search window.

    Parameters
    ----------
    crossings : ndarray
        Sorted fractional sample positions.
    periods : ndarray
        Local period (samples) at each crossing.

    Returns
    -------
    bounds : ndarray of float
    chain : ndarray of int
        Chain index per boundary; cycles only join boundaries of equal chain.
    """
    n = len(crossings)
    bounds = []
    chain = []
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    cid = 0
    i = 0
    bounds.append(crossings[0])
    chain.append(cid)
    while True:
        p = periods[i]
        b = crossings[i]
        expected = b + p
        hi = expected + 0.5 * p
        lo = b + 0.5 * p
        best = -1
        bestd = math.inf
        k = i + 1
        while k < n and crossings[k] <= hi:
            if crossings[k] > lo:
                d = abs(crossings[k] - expected)
                if d < bestd:
                    bestd = d
                    best = k
            k += 1
        if best >= 0:
            i = best
        else:
            if k >= n:
                break
            cid += 1
            i = k
        bounds.append(crossings[i])
        chain.append(cid)
    return np.asarray(bounds, dtype=float), np.asarray(chain, dtype=np.int64)


def successive_abs_diff(values, runs):
    """Sum and count of |v[i+1] - v[i]| over pairs inside one run."""
    v = np.asarray(values, dtype=float)
    r = np.asarray(runs)
    if len(v) < 2:
        return 0.0, 0
    same = r[1:] == r[:-1]
    d = np.abs(np.diff(v))[same]
    # cumsum adds left to right like the compiled loop; sum() is pairwise
    total = float(np.cumsum(d)[-1]) if len(d) else 0.0
    return total, int(same.sum())


def pq_deviation(values, runs, order):
    """Sum and count of |centre - K-point mean| over windows inside one run.

    The mean deviation is accumulated relative to the centre, so a constant
    window gives exactly zero.
    """
    total = 0.0
    count = 0
    half = (order - 1) // 2
    n = len(values)
    for i in range(n - order + 1):
        if runs[i] != runs[i + order - 1]:
            continue
        c = values[i + half]
        acc = 0.0
        for j in range(order):
            acc += values[i + j] - c
        total += abs(acc) / order
        count += 1
    return total, count
