"""Hot inner loops used by the certification and sparse modules.

Each kernel has two implementations with identical semantics: a loop version
compiled by numba and a vectorised numpy version.  ``numba_enabled()`` picks
one at call time, so tests can compare both paths in the same process.
"""
import math

import numpy as np

from ._accel import njit, numba_enabled

__all__ = ["direction_stats", "topk_support", "pnorm_rows"]


# ---------------------------------------------------------------------------
# p-norms of rows
# ---------------------------------------------------------------------------

def _pnorm_rows_numpy(V, p):
    if np.isinf(p):
        return np.max(np.abs(V), axis=1)
    if p == 1.0:
        return np.sum(np.abs(V), axis=1)
    if p == 2.0:
        return np.sqrt(np.sum(V * V, axis=1))
    return np.sum(np.abs(V) ** p, axis=1) ** (1.0 / p)


@njit
def _pnorm(v, p):
    n = v.shape[0]
    if math.isinf(p):
        best = 0.0
        for i in range(n):
            a = abs(v[i])
            if a > best:
                best = a
        return best
    if p == 1.0:
        acc = 0.0
        for i in range(n):
            acc += abs(v[i])
        return acc
    if p == 2.0:
        acc = 0.0
        for i in range(n):
            acc += v[i] * v[i]
        return math.sqrt(acc)
    acc = 0.0
    for i in range(n):
        acc += abs(v[i]) ** p
    return acc ** (1.0 / p)


@njit
def _pnorm_rows_loop(V, p):
    out = np.empty(V.shape[0])
    for r in range(V.shape[0]):
        out[r] = _pnorm(V[r], p)
    return out


def pnorm_rows(V, p=2.0):
    V = np.ascontiguousarray(V, dtype=float)
    if numba_enabled():
        return _pnorm_rows_loop(V, float(p))
    return _pnorm_rows_numpy(V, float(p))


# ---------------------------------------------------------------------------
# direction statistics for beta / delta / theta
# ---------------------------------------------------------------------------

def _direction_stats_numpy(A, B, p):
    na = _pnorm_rows_numpy(A, p)
    nb = _pnorm_rows_numpy(B, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        dirdist = _pnorm_rows_numpy(A / na[:, None] - B / nb[:, None], p)
        reldev = _pnorm_rows_numpy(A - B, p) / nb
        a2 = A / np.sqrt(np.sum(A * A, axis=1))[:, None]
        b2 = B / np.sqrt(np.sum(B * B, axis=1))[:, None]
        c = np.sum(a2 * b2, axis=1)
        s = np.sqrt(np.sum((a2 - c[:, None] * b2) ** 2, axis=1))
        angle = np.arctan2(s, c)
    return na, nb, dirdist, reldev, angle


@njit
def _direction_stats_loop(A, B, p):
    N, m = A.shape
    na = np.empty(N)
    nb = np.empty(N)
    dirdist = np.empty(N)
    reldev = np.empty(N)
    angle = np.empty(N)
    tmp = np.empty(m)
    for r in range(N):
        a = A[r]
        b = B[r]
        na_r = _pnorm(a, p)
        nb_r = _pnorm(b, p)
        na[r] = na_r
        nb[r] = nb_r
        for j in range(m):
            tmp[j] = a[j] / na_r - b[j] / nb_r
        dirdist[r] = _pnorm(tmp, p)
        for j in range(m):
            tmp[j] = a[j] - b[j]
        reldev[r] = _pnorm(tmp, p) / nb_r
        la = 0.0
        lb = 0.0
        for j in range(m):
            la += a[j] * a[j]
            lb += b[j] * b[j]
        la = math.sqrt(la)
        lb = math.sqrt(lb)
        c = 0.0
        for j in range(m):
            c += (a[j] / la) * (b[j] / lb)
        s = 0.0
        for j in range(m):
            d = a[j] / la - c * (b[j] / lb)
            s += d * d
        angle[r] = math.atan2(math.sqrt(s), c)
    return na, nb, dirdist, reldev, angle


def direction_stats(A, B, p=2.0):
    """Row-wise comparison of derivative images ``A`` against linear images ``B``.

    Returns ``(|a|, |b|, |a/|a| - b/|b||, |a - b|/|b|, angle)`` per row, with
    all norms taken in the ``p``-norm except the angle, which is Euclidean and
    computed with ``atan2`` so that nearly parallel rows keep full precision.
    """
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    if numba_enabled():
        return _direction_stats_loop(A, B, float(p))
    return _direction_stats_numpy(A, B, float(p))


# ---------------------------------------------------------------------------
# top-s support selection (weighted magnitudes, lowest index wins ties)
# ---------------------------------------------------------------------------

def _topk_support_numpy(W, s):
    order = np.argsort(-W, axis=1, kind="stable")[:, :s]
    return np.sort(order, axis=1)


@njit
def _topk_support_loop(W, s):
    N, n = W.shape
    out = np.empty((N, s), dtype=np.int64)
    taken = np.zeros(n, dtype=np.bool_)
    for r in range(N):
        for j in range(n):
            taken[j] = False
        for k in range(s):
            best = -1
            bestval = -1.0
            for j in range(n):
                if not taken[j] and W[r, j] > bestval:
                    bestval = W[r, j]
                    best = j
            taken[best] = True
        k = 0
        for j in range(n):
            if taken[j]:
                out[r, k] = j
                k += 1
    return out


def topk_support(W, s):
    """Indices of the ``s`` largest entries of each row of ``W`` (sorted ascending).

    ``W`` must be non-negative.  Equal values are resolved in favour of the
    lower index, matching a stable descending sort.
    """
    W = np.ascontiguousarray(np.atleast_2d(W), dtype=float)
    s = int(s)
    if s <= 0:
        return np.empty((W.shape[0], 0), dtype=np.int64)
    s = min(s, W.shape[1])
    if numba_enabled():
        return _topk_support_loop(W, s)
    return _topk_support_numpy(W, s).astype(np.int64)
