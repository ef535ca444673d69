"""Hot loops: synchronous pAC propagation and exhaustive enumeration.

Each kernel has a numba ``@njit`` build and a pure numpy/Python fallback.
Set ``PROBARC_DISABLE_NUMBA=1`` (or run without numba installed) to use the
fallback; :data:`BACKEND` reports which one is active. The two propagation
paths agree to rounding error, not bit for bit, since numpy's reductions
may reassociate sums.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by whichever backend is active
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("PROBARC_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")
BACKEND = "numba" if USE_NUMBA else "numpy"

# mode codes shared with pac.py
STANDARD, BOOLEAN, PELEG = 0, 1, 2
# status codes
CONVERGED, MAX_ITER, OSCILLATING, WIPEOUT, NON_FINITE = 0, 1, 2, 3, 4


def _identity(fn):
    return fn


njit = numba.njit(cache=True, nogil=True) if USE_NUMBA else _identity


# -- propagation: loop form (numba) -----------------------------------------

# products are rescaled whenever their largest entry leaves this band; only
# ratios within one vector matter, and long loopy runs otherwise underflow
_TINY, _HUGE = 1e-100, 1e100


def _rescale(vec):
    mx = 0.0
    for i in range(vec.shape[0]):
        if vec[i] > mx:
            mx = vec[i]
    if mx > 0.0 and (mx < _TINY or mx > _HUGE):
        for i in range(vec.shape[0]):
            vec[i] /= mx


def _round_loops(mode, arc_src, arc_dst, arc_rev, arc_mat, dst_start, prior, msg, sup, F):
    """One synchronous round: supports from ``msg``, then beliefs.

    Returns the index of the first wiped variable, or -1.
    """
    n_arcs = arc_src.shape[0]
    mmax = prior.shape[1]
    for a in range(n_arcs):
        mat = arc_mat[a]
        for j in range(mmax):
            s = 0.0
            for i in range(mmax):
                s += mat[j, i] * msg[a, i]
            if mode == BOOLEAN and s > 0.0:
                s = 1.0
            sup[a, j] = s
    n = prior.shape[0]
    wiped = -1
    for v in range(n):
        row = F[v]
        for j in range(mmax):
            row[j] = prior[v, j]
        for a in range(dst_start[v], dst_start[v + 1]):
            for j in range(mmax):
                row[j] *= sup[a, j]
            _rescale(row)
        total = 0.0
        for j in range(mmax):
            total += row[j]
        if total == 0.0:
            if wiped < 0:
                wiped = v
        elif mode == BOOLEAN:
            for j in range(mmax):
                row[j] = 1.0 if row[j] > 0.0 else 0.0
        else:
            for j in range(mmax):
                row[j] /= total
    return wiped


def _messages_loops(mode, arc_src, arc_rev, dst_start, prior, sup, msg):
    """``msg[a] = F_u / S[rev(a)]`` for ``a = (u -> v)``, zero where that support is 0.

    Computed as the prior times every other support into ``u``, which equals
    the quotient wherever it is defined and needs no division.
    """
    n_arcs = arc_src.shape[0]
    mmax = prior.shape[1]
    for a in range(n_arcs):
        u = arc_src[a]
        r = arc_rev[a]
        out = msg[a]
        for i in range(mmax):
            out[i] = prior[u, i]
        for b in range(dst_start[u], dst_start[u + 1]):
            if b != r:
                for i in range(mmax):
                    out[i] *= sup[b, i]
                _rescale(out)
        total = 0.0
        for i in range(mmax):
            if sup[r, i] <= 0.0:
                out[i] = 0.0
            total += out[i]
        if mode == BOOLEAN:
            for i in range(mmax):
                out[i] = 1.0 if out[i] > 0.0 else 0.0
        elif total > 0.0:
            # message scale never reaches a normalised belief
            for i in range(mmax):
                out[i] /= total


def _residuals_loops(F_new, F_old, out):
    worst = 0.0
    for v in range(F_new.shape[0]):
        r = 0.0
        for j in range(F_new.shape[1]):
            d = F_new[v, j] - F_old[v, j]
            r += d * d
        out[v] = r
        if r > worst:
            worst = r
    return worst


def _finite(a):
    for x in a.flat:
        if not np.isfinite(x):
            return False
    return True


def _propagate_loops(mode, arc_src, arc_dst, arc_rev, arc_mat, dst_start, unary,
                     msg, F_init, eps, max_iter, window, history):
    n, mmax = unary.shape
    n_arcs = arc_src.shape[0]
    sup = np.zeros((n_arcs, mmax))
    F = np.zeros((n, mmax))
    F_old = F_init.copy()
    F_old2 = F_init.copy()
    prior = unary.copy()
    res = np.zeros(n)
    if not _finite(msg):
        return NON_FINITE, 0, F, sup, -1
    if mode == PELEG:
        prior = unary * F_init
    wiped = _round_loops(mode, arc_src, arc_dst, arc_rev, arc_mat, dst_start, prior, msg, sup, F)
    if wiped >= 0:
        return WIPEOUT, 0, F, sup, wiped
    if not _finite(F):
        return NON_FINITE, 0, F, sup, -1
    streak = 0
    for k in range(1, max_iter + 1):
        _messages_loops(mode, arc_src, arc_rev, dst_start, prior, sup, msg)
        F_old2[:, :] = F_old
        F_old[:, :] = F
        if mode == PELEG:
            prior = unary * F_old
        wiped = _round_loops(mode, arc_src, arc_dst, arc_rev, arc_mat, dst_start, prior, msg, sup, F)
        if wiped >= 0:
            return WIPEOUT, k, F, sup, wiped
        if not (_finite(F) and _finite(msg)):
            return NON_FINITE, k, F, sup, -1
        r1 = _residuals_loops(F, F_old, res)
        history[k - 1] = r1
        if r1 <= eps:
            return CONVERGED, k, F, sup, -1
        if window > 0 and k >= 2:
            r2 = _residuals_loops(F, F_old2, res)
            if r2 <= eps:
                streak += 1
                if streak >= window:
                    return OSCILLATING, k, F, sup, -1
            else:
                streak = 0
    return MAX_ITER, max_iter, F, sup, -1


# -- propagation: vectorised form (numpy fallback) --------------------------
# Products are taken in log space so they cannot underflow.


def _log(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(a)


def _exp_rows(L):
    """exp of each row shifted so its maximum is 0; all -inf rows stay zero."""
    mx = L.max(axis=1, keepdims=True)
    return np.exp(L - np.where(np.isfinite(mx), mx, 0.0))


def _round_numpy(mode, arc_dst, arc_mat, prior, msg):
    sup = np.einsum("aji,ai->aj", arc_mat, msg)
    if mode == BOOLEAN:
        sup = (sup > 0.0).astype(np.float64)
    L = _log(prior)
    np.add.at(L, arc_dst, _log(sup))
    F = _exp_rows(L)
    total = F.sum(axis=1)
    dead = np.flatnonzero(total == 0.0)
    if mode == BOOLEAN:
        F = (F > 0.0).astype(np.float64)
    else:
        np.divide(F, total[:, None], out=F, where=total[:, None] > 0.0)
    return F, sup, (int(dead[0]) if dead.size else -1)


def _messages_numpy(mode, arc_src, arc_rev, dst_start, prior, sup):
    logs = _log(sup)
    logp = _log(prior)
    out = np.zeros_like(sup)
    for u in range(prior.shape[0]):
        lo, hi = dst_start[u], dst_start[u + 1]
        if lo == hi:
            continue
        block = logs[lo:hi]
        zero = np.zeros((1, block.shape[1]))
        # leave-one-out sums without subtraction, so -inf entries stay exact
        pre = np.cumsum(np.vstack([zero, block[:-1]]), axis=0)
        suf = np.cumsum(np.vstack([block[1:], zero])[::-1], axis=0)[::-1]
        cav = _exp_rows(logp[u] + pre + suf)
        cav[sup[lo:hi] <= 0.0] = 0.0
        out[arc_rev[lo:hi]] = cav
    if mode == BOOLEAN:
        return (out > 0.0).astype(np.float64)
    total = out.sum(axis=1, keepdims=True)
    np.divide(out, total, out=out, where=total > 0.0)
    return out


def _propagate_numpy(mode, arc_src, arc_dst, arc_rev, arc_mat, dst_start, unary,
                     msg, F_init, eps, max_iter, window, history):
    if not np.isfinite(msg).all():
        return NON_FINITE, 0, np.zeros_like(unary), np.zeros((len(arc_src), unary.shape[1])), -1
    prior = unary * F_init if mode == PELEG else unary
    F, sup, wiped = _round_numpy(mode, arc_dst, arc_mat, prior, msg)
    if wiped >= 0:
        return WIPEOUT, 0, F, sup, wiped
    if not np.isfinite(F).all():
        return NON_FINITE, 0, F, sup, -1
    F_old = F_init
    streak = 0
    for k in range(1, max_iter + 1):
        msg[:] = _messages_numpy(mode, arc_src, arc_rev, dst_start, prior, sup)
        F_old2, F_old = F_old, F
        prior = unary * F_old if mode == PELEG else unary
        F, sup, wiped = _round_numpy(mode, arc_dst, arc_mat, prior, msg)
        if wiped >= 0:
            return WIPEOUT, k, F, sup, wiped
        if not (np.isfinite(F).all() and np.isfinite(msg).all()):
            return NON_FINITE, k, F, sup, -1
        r1 = float(((F - F_old) ** 2).sum(axis=1).max(initial=0.0))
        history[k - 1] = r1
        if r1 <= eps:
            return CONVERGED, k, F, sup, -1
        if window > 0 and k >= 2:
            r2 = float(((F - F_old2) ** 2).sum(axis=1).max(initial=0.0))
            if r2 <= eps:
                streak += 1
                if streak >= window:
                    return OSCILLATING, k, F, sup, -1
            else:
                streak = 0
    return MAX_ITER, max_iter, F, sup, -1


# -- exhaustive enumeration -------------------------------------------------


def _enumerate_loops(sizes, unary, compat, has_edge, cap, first_only):
    """Depth-first enumeration in ascending variable order.

    ``cap < 0`` means unbounded. Returns ``(total, usage, truncated,
    first_solution)``; enumeration stops once ``total > cap``.
    """
    n = sizes.shape[0]
    mmax = unary.shape[1]
    usage = np.zeros((n, mmax), dtype=np.int64)
    assign = np.full(n, -1, dtype=np.int64)
    first = np.full(n, -1, dtype=np.int64)
    total = 0
    if n == 0:
        return 1, usage, False, first
    depth = 0
    while depth >= 0:
        x = depth
        v = assign[x] + 1
        found = False
        while v < sizes[x]:
            if unary[x, v]:
                ok = True
                for y in range(x):
                    if has_edge[x, y] and not compat[x, y, v, assign[y]]:
                        ok = False
                        break
                if ok:
                    found = True
                    break
            v += 1
        if not found:
            assign[x] = -1
            depth -= 1
            continue
        assign[x] = v
        if depth == n - 1:
            total += 1
            if total == 1:
                first[:] = assign
            for y in range(n):
                usage[y, assign[y]] += 1
            if (cap >= 0 and total > cap) or first_only:
                return total, usage, True, first
        else:
            depth += 1
    return total, usage, False, first


if USE_NUMBA:
    _rescale = njit(_rescale)
    _round_loops = njit(_round_loops)
    _messages_loops = njit(_messages_loops)
    _residuals_loops = njit(_residuals_loops)
    _finite = njit(_finite)
    propagate_kernel = njit(_propagate_loops)
    enumerate_kernel = njit(_enumerate_loops)
else:
    propagate_kernel = _propagate_numpy
    enumerate_kernel = _enumerate_loops

# both paths stay importable for cross-checking and benchmarking
propagate_loops_py = _propagate_loops
propagate_numpy = _propagate_numpy
