"""Independent reference computations used by the tests.

Nothing here imports the package's information or optimization code; every
quantity is summed directly from the channel tables.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np
from numba import njit


def h2(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _h_last(p: np.ndarray) -> np.ndarray:
    out = np.zeros(p.shape[:-1])
    for idx in range(p.shape[-1]):
        q = p[..., idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            out -= np.where(q > 0, q * np.log2(np.where(q > 0, q, 1)), 0.0)
    return out


def brute_mi(joint: dict) -> float:
    """I(A;B) for a dict {(a, b): p} by explicit summation."""
    pa, pb = {}, {}
    for (a, b), p in joint.items():
        pa[a] = pa.get(a, 0) + p
        pb[b] = pb.get(b, 0) + p
    total = 0.0
    for (a, b), p in joint.items():
        if p > 0:
            total += p * math.log2(p / (pa[a] * pb[b]))
    return total


def direct_terms(pmf_in: np.ndarray, composed: np.ndarray) -> dict:
    """Mode-conditioned informations by explicit 5-variable summation."""
    nx1, nx2, _, ny, ny1 = composed.shape
    out = {}
    p_mode = pmf_in.sum(axis=(0, 1))
    for mode, name in ((0, "l"), (1, "t")):
        pm = p_mode[mode]
        x1_y1, x1_y, x1_yy1, x1x2_y, x2_y = {}, {}, {}, {}, {}
        cond = {}  # x2 -> {(x1, y): p}
        for x1, x2, y, y1 in product(range(nx1), range(nx2), range(ny), range(ny1)):
            if pm <= 0:
                continue
            p = pmf_in[x1, x2, mode] * composed[x1, x2, mode, y, y1] / pm
            if p == 0:
                continue
            for dct, key in ((x1_y1, (x1, y1)), (x1_y, (x1, y)), (x1_yy1, (x1, (y, y1))),
                             (x1x2_y, ((x1, x2), y)), (x2_y, (x2, y))):
                dct[key] = dct.get(key, 0) + p
            c = cond.setdefault(x2, {})
            c[(x1, y)] = c.get((x1, y), 0) + p
        out[f"i_x1_y1_{name}"] = brute_mi(x1_y1) if pm > 0 else 0.0
        out[f"i_x1_y_{name}"] = brute_mi(x1_y) if pm > 0 else 0.0
        out[f"i_x1_yy1_{name}"] = brute_mi(x1_yy1) if pm > 0 else 0.0
        out[f"i_x2_y_{name}"] = brute_mi(x2_y) if pm > 0 else 0.0
        cmi = 0.0
        for x2, c in cond.items():
            w = sum(c.values())
            cmi += w * brute_mi({k: v / w for k, v in c.items()})
        out[f"i_x1_y_given_x2_{name}"] = cmi
    x3_y = {}
    for x1, x2, x3, y, y1 in product(range(nx1), range(nx2), range(2), range(ny), range(ny1)):
        p = pmf_in[x1, x2, x3] * composed[x1, x2, x3, y, y1]
        if p:
            x3_y[(x3, y)] = x3_y.get((x3, y), 0) + p
    out["i_x3_y"] = brute_mi(x3_y)
    out["p_l"] = float(p_mode[0])
    return out


def simplex4_lattice(m: int) -> np.ndarray:
    pts = [(i, j, k, m - i - j - k) for i in range(m + 1) for j in range(m + 1 - i)
           for k in range(m + 1 - i - j)]
    return np.array(pts, dtype=np.float64) / m


def grid_oracle_binary(bc: np.ndarray, ma: np.ndarray, objective: str = "degraded",
                       m: int = 100) -> float:
    """Exact maximum over the lattice {0, 1/m, ..., 1} of
    (p(X3=l), p(x1=1|l), p(x1,x2|t)) for a binary-input channel.

    ``bc`` is p_l(y, y1 | x1) with shape (2, |Y|, |Y1|); ``ma`` is
    p_t(y | x1, x2) with shape (2, 2, |Y|).  Lattice points are skipped only
    when an upper bound proves they cannot beat the incumbent.
    """
    grid = np.arange(m + 1) / m
    # listen-mode terms on p(x1=1|l)
    a = np.stack([1 - grid, grid], axis=1)            # (A, 2)
    w_y = bc.sum(axis=2)                               # (2, Y)
    w_y1 = bc.sum(axis=1)                              # (2, Y1)
    py_l = a @ w_y
    hy_x1_l = a @ _h_last(w_y)
    i_y_l = _h_last(py_l) - hy_x1_l
    i_y1_l = _h_last(a @ w_y1) - a @ _h_last(w_y1)
    # transmit-mode terms on p(x1, x2 | t) ordered (00, 01, 10, 11)
    b = simplex4_lattice(m)
    bx = b.reshape(-1, 2, 2)
    p_x2y = np.zeros((len(b), 2, ma.shape[2]))
    for x1 in range(2):
        for x2 in range(2):
            p_x2y[:, x2, :] += bx[:, x1, x2, None] * ma[x1, x2][None, :]
    p_x2 = bx.sum(axis=1)
    h_y_x2 = _h_last(p_x2y.reshape(len(b), -1)) - _h_last(p_x2)
    h_y_x1x2 = np.zeros(len(b))
    hm = _h_last(ma)
    for x1 in range(2):
        for x2 in range(2):
            h_y_x1x2 += bx[:, x1, x2] * hm[x1, x2]
    py_t = p_x2y.sum(axis=1)
    r1t = h_y_x2 - h_y_x1x2
    r2t = _h_last(py_t) - h_y_x2

    if objective == "deterministic":
        order = np.argsort(-r1t, kind="stable")
        return _scan_deterministic(grid, i_y_l, i_y1_l, np.ascontiguousarray(r1t[order]),
                                   np.ascontiguousarray(r2t[order]))
    if ma.shape[2] != 2:
        raise ValueError("random-schedule oracle needs a binary destination alphabet")
    # bucket the transmit lattice by q = p(y=1|t); inside a bucket sort by r1t
    q = py_t[:, 1]
    n_buckets = 256
    by_q = np.argsort(q, kind="stable")
    chunks = np.array_split(by_q, n_buckets)
    starts = np.zeros(n_buckets + 1, dtype=np.int64)
    order = []
    for i, c in enumerate(chunks):
        c = c[np.argsort(-r1t[c], kind="stable")]
        order.append(c)
        starts[i + 1] = starts[i] + len(c)
    order = np.concatenate(order)
    q_s = np.ascontiguousarray(q[order])
    r1t_s = np.ascontiguousarray(r1t[order])
    hyx12_s = np.ascontiguousarray(h_y_x1x2[order])
    q_lo = np.array([q_s[starts[i]:starts[i + 1]].min() for i in range(n_buckets)])
    q_hi = np.array([q_s[starts[i]:starts[i + 1]].max() for i in range(n_buckets)])
    a_max = np.array([r1t_s[starts[i]] for i in range(n_buckets)])
    d_min = np.array([hyx12_s[starts[i]:starts[i + 1]].min() for i in range(n_buckets)])
    return _scan_random(grid, i_y1_l, hy_x1_l, np.ascontiguousarray(py_l[:, 1]),
                        starts, q_lo, q_hi, a_max, d_min, q_s, r1t_s, hyx12_s)


@njit(cache=True)
def _hb(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@njit(cache=True)
def _scan_random(grid, i_y1_l, hy_x1_l, q_l, starts, q_lo, q_hi, a_max, d_min, q_s, r1t_s, hyx12_s):
    # value = min(lam*I(X1;Y1|l) + mu*r1t, h(mix) - lam*H(Y|X1,l) - mu*H(Y|X1,X2,t))
    best = -1.0
    nbk = starts.shape[0] - 1
    for il in range(grid.shape[0]):
        lam = grid[il]
        mu = 1.0 - lam
        for ia in range(grid.shape[0]):
            first = lam * i_y1_l[ia]
            c2 = -lam * hy_x1_l[ia]
            base_mix = lam * q_l[ia]
            for k in range(nbk):
                lo = base_mix + mu * q_lo[k]
                hi = base_mix + mu * q_hi[k]
                # h is concave: its max on [lo, hi] is at the point nearest 1/2
                mid = 0.5 if lo <= 0.5 <= hi else (lo if lo > 0.5 else hi)
                hcap = _hb(mid)
                if first + mu * a_max[k] <= best or c2 - mu * d_min[k] + hcap <= best:
                    continue
                for j in range(starts[k], starts[k + 1]):
                    ub1 = first + mu * r1t_s[j]
                    if ub1 <= best:
                        break
                    partial = c2 - mu * hyx12_s[j]
                    if partial + hcap <= best:
                        continue
                    v2 = partial + _hb(base_mix + mu * q_s[j])
                    v = ub1 if ub1 < v2 else v2
                    if v > best:
                        best = v
    return best


@njit(cache=True)
def _scan_deterministic(grid, i_y_l, i_y1_l, r1t_s, r2t_s):
    best = -1.0
    nb = r1t_s.shape[0]
    for il in range(grid.shape[0]):
        lam = grid[il]
        mu = 1.0 - lam
        for ia in range(grid.shape[0]):
            first = lam * (i_y1_l[ia] - i_y_l[ia])
            base = lam * i_y_l[ia]
            for j in range(nb):
                if base + first + mu * r1t_s[j] <= best:
                    break
                second = mu * r2t_s[j]
                v = base + mu * r1t_s[j] + (first if first < second else second)
                if v > best:
                    best = v
    return best
