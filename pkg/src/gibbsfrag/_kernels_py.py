"""Pure numpy versions of the routines in ``_kernels.pyx``.

The partition sampler consumes the same uniforms in the same order and uses the
same summation order, so both backends return identical labels.
"""

import numpy as np

_BISECT_STEPS = 30


def _log_a(a, u):
    return (a * np.log(np.sin(a * u)) + (1.0 - a) * np.log(np.sin((1.0 - a) * u))
            - np.log(np.sin(u))) / (1.0 - a)


def _u_at(a, v, la0):
    lo = np.zeros_like(v)
    hi = np.full_like(v, np.pi)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        below = _log_a(a, mid) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(v <= la0, 0.0, 0.5 * (lo + hi))


def _edges(a, logc, la0):
    vs = -logc
    top = np.maximum(vs + 5.0, np.logaddexp(la0, np.log(40.0) - logc))
    return [_u_at(a, vs - 45.0, la0), _u_at(a, vs - 4.0, la0),
            _u_at(a, vs, la0), _u_at(a, top, la0)]


def _panel_sum(a, edges, x, w, integrand):
    tot = np.zeros_like(edges[0])
    for p in range(3):
        half = 0.5 * (edges[p + 1] - edges[p])
        mid = 0.5 * (edges[p + 1] + edges[p])
        u = mid[:, None] + half[:, None] * x[None, :]
        ok = half > 0.0
        if not ok.any():
            continue
        u = np.where(ok[:, None], u, np.pi / 2)
        vals = integrand(_log_a(a, u))
        tot = tot + np.where(ok, (vals * w[None, :]).sum(axis=1) * half, 0.0)
    return tot


def ml_pdf_zolo(alpha, s, x, w):
    s = np.asarray(s, dtype=float)
    la0 = (alpha * np.log(alpha) + (1 - alpha) * np.log(1 - alpha)) / (1 - alpha)
    logc = np.log(s) / (1.0 - alpha)
    edges = _edges(alpha, logc, la0)
    tot = _panel_sum(alpha, edges, x, w,
                     lambda la: np.exp(la - np.exp(la + logc[:, None])))
    return np.exp(alpha * logc) / (np.pi * (1.0 - alpha)) * tot


def ml_sf_zolo(alpha, s, x, w):
    s = np.asarray(s, dtype=float)
    la0 = (alpha * np.log(alpha) + (1 - alpha) * np.log(1 - alpha)) / (1 - alpha)
    logc = np.log(s) / (1.0 - alpha)
    edges = _edges(alpha, logc, la0)
    edges[0] = np.zeros_like(edges[0])
    tot = _panel_sum(alpha, edges, x, w, lambda la: np.exp(-np.exp(la + logc[:, None])))
    return tot / np.pi


def gibbs_sample(V, alpha, table_idx, groups, unif):
    V = np.asarray(V, dtype=float)
    unif = np.asarray(unif, dtype=float)
    B, n = unif.shape
    table_idx = np.broadcast_to(np.asarray(table_idx, dtype=np.int64), (B,))
    groups = np.broadcast_to(np.asarray(groups, dtype=np.int64), (B, n))
    rows = np.arange(B)
    cols = np.arange(n)
    size = np.zeros((B, n), dtype=np.int64)
    bgrp = np.zeros((B, n), dtype=np.int64)
    gm = np.zeros((B, n), dtype=np.int64)
    gk = np.zeros((B, n), dtype=np.int64)
    nb = np.zeros(B, dtype=np.int64)
    labels = np.empty((B, n), dtype=np.int64)
    for i in range(n):
        g = groups[:, i]
        m = gm[rows, g]
        j = gk[rows, g]
        wj = V[table_idx, m + 1, j]
        wn = V[table_idx, m + 1, j + 1]
        live = (cols[None, :] < nb[:, None]) & (bgrp == g[:, None])
        weights = np.where(live, (size - alpha) * wj[:, None], 0.0)
        cum = np.add.accumulate(weights, axis=1)
        total = cum[:, -1] + wn
        target = unif[:, i] * total
        hit = target[:, None] < cum
        pick = np.where(hit.any(axis=1), hit.argmax(axis=1), nb)
        pick = np.where(m > 0, pick, nb)
        new = pick == nb
        size[rows, pick] = np.where(new, 1, size[rows, pick] + 1)
        bgrp[rows, pick] = np.where(new, g, bgrp[rows, pick])
        gk[rows, g] = np.where(new, j + 1, j)
        gm[rows, g] = m + 1
        nb = nb + new
        labels[:, i] = pick
    return labels
