"""Maximization over products of probability simplices.

Objectives have the form ``base + min(first, second)`` where each part is a
smooth function of the blocks.  The search is a coarse lattice sweep, a
projected coordinate ascent from the best lattice points, and an epigraph
SLSQP polish that can walk along the ridge where ``first == second``.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.optimize import minimize

TIE_TOL = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class SplitObjective(Protocol):
    block_sizes: tuple[int, ...]

    def parts(self, *blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...


@dataclass
class OptimizerOptions:
    grid_resolution: int = 20
    restarts: int = 4
    ascent_iterations: int = 50
    seed: int = 0
    random_starts: int = 0
    grid_budget: int = 2_000_000
    polish: bool = True
    workers: int | None = None


@dataclass
class OptimResult:
    value: float
    blocks: list[np.ndarray]
    diagnostics: dict = field(default_factory=dict)


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("HDRELAY_THREADS")
    return max(1, int(env)) if env else 1


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All points of the ``k``-simplex with coordinates in ``{0, 1/m, ..., 1}``.

    Rows come out in lexicographic order.
    """
    if k == 1:
        return np.ones((1, 1))
    rows = []
    for cuts in itertools.combinations(range(m + k - 1), k - 1):
        prev = -1
        comp = []
        for c in cuts:
            comp.append(c - prev - 1)
            prev = c
        comp.append(m + k - 2 - prev)
        rows.append(comp)
    pts = np.array(rows, dtype=np.float64) / m
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def simplex_grid_size(k: int, m: int) -> int:
    return math.comb(m + k - 1, k - 1)


def value_of(obj: SplitObjective, blocks: Sequence[np.ndarray]) -> float:
    base, first, second = obj.parts(*blocks)
    return float(base + np.minimum(first, second))


def _move(p: np.ndarray, i: int, t: float) -> np.ndarray:
    """Set coordinate ``i`` to ``t`` and rescale the rest to keep the sum at one."""
    rest = p.copy()
    rest[i] = 0.0
    s = rest.sum()
    if s > 0:
        rest *= (1.0 - t) / s
    else:
        rest[:] = (1.0 - t) / (len(p) - 1)
        rest[i] = 0.0
    rest[i] = t
    return rest


def golden_max(f: Callable[[float], float], lo: float = 0.0, hi: float = 1.0, tol: float = 1e-7):
    """Golden-section search for a maximum of ``f`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _lex_less(x: list[np.ndarray], y: list[np.ndarray]) -> bool:
    fx = np.concatenate([np.ravel(b) for b in x])
    fy = np.concatenate([np.ravel(b) for b in y])
    diff = np.nonzero(fx != fy)[0]
    return bool(diff.size) and fx[diff[0]] < fy[diff[0]]


def _better(v: float, blocks, best_v: float, best_blocks) -> bool:
    if best_blocks is None or v > best_v + TIE_TOL:
        return True
    return abs(v - best_v) <= TIE_TOL and _lex_less(blocks, best_blocks)


def coordinate_ascent(obj, blocks, free, iterations, tol=1e-12):
    blocks = [b.copy() for b in blocks]
    current = value_of(obj, blocks)
    sweeps = 0
    for sweeps in range(1, iterations + 1):
        start = current
        for k in free:
            size = len(blocks[k])
            coords = range(size) if size > 2 else range(1)
            for i in coords:
                def g(t, k=k, i=i):
                    trial = list(blocks)
                    trial[k] = _move(blocks[k], i, t)
                    return value_of(obj, trial)

                t_best, v_best = golden_max(g)
                for t_edge in (0.0, 1.0):
                    v_edge = g(t_edge)
                    if v_edge > v_best:
                        t_best, v_best = t_edge, v_edge
                if v_best > current + 1e-15:
                    blocks[k] = _move(blocks[k], i, t_best)
                    current = value_of(obj, blocks)
        if current - start <= tol:
            break
    return blocks, current, sweeps


def _project(blocks: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for b in blocks:
        b = np.clip(b, 0.0, None)
        s = b.sum()
        out.append(b / s if s > 0 else np.full_like(b, 1.0 / len(b)))
    return out


def epigraph_polish(obj, blocks, free):
    """Maximize ``t`` subject to ``t <= base + first`` and ``t <= base + second``."""
    sizes = [len(blocks[k]) for k in free]
    offsets = np.cumsum([0] + sizes)

    def unpack(z):
        out = list(blocks)
        for j, k in enumerate(free):
            out[k] = z[offsets[j]:offsets[j + 1]]
        return out

    def branch(z, which):
        base, first, second = obj.parts(*unpack(z[:-1]))
        return float(base + (first if which == 0 else second)) - z[-1]

    z0 = np.concatenate([blocks[k] for k in free] + [[value_of(obj, blocks)]])
    cons = [
        {"type": "ineq", "fun": branch, "args": (0,)},
        {"type": "ineq", "fun": branch, "args": (1,)},
    ]
    for j in range(len(free)):
        lo, hi = offsets[j], offsets[j + 1]
        cons.append({"type": "eq", "fun": lambda z, lo=lo, hi=hi: z[lo:hi].sum() - 1.0})
    bounds = [(0.0, 1.0)] * (len(z0) - 1) + [(None, None)]
    try:
        res = minimize(lambda z: -z[-1], z0, method="SLSQP", bounds=bounds,
                       constraints=cons, options={"maxiter": 200, "ftol": 1e-12})
    except (ValueError, FloatingPointError):
        return blocks, value_of(obj, blocks)
    cand = _project(unpack(res.x[:-1]))
    full = list(blocks)
    for k in free:
        full[k] = cand[k]
    return full, value_of(obj, full)


def _refine(obj, start, free, opts: OptimizerOptions):
    start_value = value_of(obj, start)
    blocks, value, sweeps = coordinate_ascent(obj, start, free, opts.ascent_iterations)
    polished = False
    if opts.polish and free:
        cand, v = epigraph_polish(obj, blocks, free)
        if v > value + 1e-13:
            polished = True
            blocks, value, extra = coordinate_ascent(obj, cand, free, opts.ascent_iterations)
            sweeps += extra
    return blocks, value, {
        "start": start_value, "end": value, "improvement": value - start_value,
        "sweeps": sweeps, "polished": polished,
    }


def _lattice_resolutions(obj, fixed, opts) -> list[int]:
    res = [opts.grid_resolution] * len(obj.block_sizes)

    def count(r):
        total = 1
        for k, (s, m) in enumerate(zip(obj.block_sizes, r)):
            total *= 1 if k in fixed else simplex_grid_size(s, m)
        return total

    while count(res) > opts.grid_budget:
        sizes = [0 if k in fixed else simplex_grid_size(s, m)
                 for k, (s, m) in enumerate(zip(obj.block_sizes, res))]
        k = int(np.argmax(sizes))
        if res[k] <= 1:
            break
        res[k] -= 1
    return res


def lattice_values(obj: SplitObjective, grids: list[np.ndarray]) -> np.ndarray:
    """Objective on the Cartesian product of per-block lattices, in C order."""
    nb = len(grids)
    shape = tuple(len(g) for g in grids)
    out = np.empty(shape)
    inner = min(nb, 2)
    outer_axes = range(nb - inner)
    for idx in itertools.product(*(range(shape[a]) for a in outer_axes)):
        args = [grids[a][i] for a, i in zip(outer_axes, idx)]
        if inner == 2:
            args.append(grids[-2][:, None, :])
            args.append(grids[-1][None, :, :])
        else:
            args.append(grids[-1])
        base, first, second = obj.parts(*args)
        out[idx] = base + np.minimum(first, second)
    return out


def maximize(
    obj: SplitObjective,
    opts: OptimizerOptions | None = None,
    fixed: dict[int, np.ndarray] | None = None,
    extra_starts: Sequence[Sequence[np.ndarray]] = (),
) -> OptimResult:
    """Best-effort global maximization of ``base + min(first, second)``."""
    opts = opts or OptimizerOptions()
    fixed = {k: np.asarray(v, dtype=np.float64) for k, v in (fixed or {}).items()}
    free = [k for k in range(len(obj.block_sizes)) if k not in fixed]

    res = _lattice_resolutions(obj, fixed, opts)
    grids = [fixed[k][None, :] if k in fixed else simplex_grid(s, m)
             for k, (s, m) in enumerate(zip(obj.block_sizes, res))]
    values = lattice_values(obj, grids)
    flat = values.ravel()
    order = np.argsort(-flat, kind="stable")
    # lattices are lexicographic, so among near-ties the lowest C-order index wins
    first = int(np.flatnonzero(flat >= flat[order[0]] - TIE_TOL)[0])
    order = np.concatenate([[first], order[order != first]])

    starts = []
    for pos in order[: max(1, opts.restarts)]:
        idx = np.unravel_index(pos, values.shape)
        starts.append([grids[k][i].copy() for k, i in enumerate(idx)])
    grid_best_blocks = starts[0]
    grid_best = float(flat[order[0]])

    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.random_starts):
        starts.append([fixed[k].copy() if k in fixed else rng.dirichlet(np.ones(s))
                       for k, s in enumerate(obj.block_sizes)])
    for st in extra_starts:
        starts.append([fixed[k].copy() if k in fixed else np.asarray(b, dtype=np.float64)
                       for k, b in enumerate(st)])

    def run(st):
        return _refine(obj, st, free, opts)

    workers = worker_count(opts.workers)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(st) for st in starts]

    best_v, best_blocks = grid_best, grid_best_blocks
    for blocks, v, _ in results:
        if _better(v, blocks, best_v, best_blocks):
            best_v, best_blocks = v, blocks

    return OptimResult(
        value=best_v,
        blocks=best_blocks,
        diagnostics={
            "grid_resolution": res,
            "grid_points": int(flat.size),
            "grid_best": grid_best,
            # best lattice values on the first and last point of block 0
            "block0_edges": (float(values[0].max()), float(values[-1].max())),
            "restarts": [r[2] for r in results],
        },
    )
