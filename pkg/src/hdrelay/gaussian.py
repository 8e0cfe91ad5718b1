"""Gaussian half-duplex relay channel: closed-form rates and (alpha, beta) search.

The relay listens a fraction ``alpha`` of the time.  ``beta`` is the share of
source power that is coherent with the relay while it transmits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .optim import OptimizerOptions, maximize

BC_SWEEP_POINTS = 10_000
_LN2 = np.log(2.0)


def capacity_fn(x):
    """``C(x) = 0.5 log2(1 + x)`` in bits; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("C(x) needs x >= 0")
    out = 0.5 * np.log1p(arr) / _LN2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianParams:
    p1: float
    p2: float
    sigma2: float
    sigma1_2: float
    alpha: float = 0.5
    beta: float = 0.0

    def __post_init__(self):
        if self.p1 <= 0 or self.sigma2 <= 0 or self.sigma1_2 <= 0:
            raise ValueError("p1 and both noise variances must be positive")
        if self.p2 < 0:
            raise ValueError("p2 must be nonnegative")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class GaussianRates:
    r1l: float
    r2l: float
    r1t: float
    r2t: float
    total: float
    bound_kind: str
    clamped: bool = False


def _total(alpha, r1l, r2l, r1t, r2t):
    return alpha * r1l + (1 - alpha) * r1t + np.minimum(alpha * r2l, (1 - alpha) * r2t)


def _log_ratio(num, den):
    """``0.5 log2((1 + den + num) / (1 + den))`` without cancellation."""
    return 0.5 * np.log1p(num / (1.0 + den)) / _LN2


def _transmit_rates(g: GaussianParams, beta=None):
    beta = g.beta if beta is None else beta
    private = (1 - beta) * g.p1 / g.sigma2
    r1t = capacity_fn(private)
    # C((p1 + p2 + 2 sqrt(beta p1 p2)) / sigma2) - C(private), as one log ratio
    extra = beta * g.p1 + g.p2 + 2.0 * np.sqrt(beta) * np.sqrt(g.p1) * np.sqrt(g.p2)
    r2t = _log_ratio(extra / g.sigma2, private)
    return r1t, r2t


def outer_rates(g: GaussianParams) -> GaussianRates:
    r1l = capacity_fn(g.p1 / g.sigma2)
    r2l = float(_log_ratio(g.p1 / g.sigma1_2, g.p1 / g.sigma2))
    r1t, r2t = _transmit_rates(g)
    return GaussianRates(r1l, r2l, r1t, r2t, float(_total(g.alpha, r1l, r2l, r1t, r2t)), "outer")


def inner_rates(g: GaussianParams) -> GaussianRates:
    """Decode-forward rates.  A relay noisier than the destination gives a
    negative relay increment; it is clamped to 0 and ``clamped`` is set."""
    r1l = capacity_fn(g.p1 / g.sigma2)
    gap = g.p1 * (g.sigma2 - g.sigma1_2) / (g.sigma1_2 * g.sigma2)
    raw = float(_log_ratio(gap, g.p1 / g.sigma2))
    r2l = max(raw, 0.0)
    r1t, r2t = _transmit_rates(g)
    return GaussianRates(r1l, r2l, r1t, r2t, float(_total(g.alpha, r1l, r2l, r1t, r2t)), "inner", raw < 0)


def rates(g: GaussianParams, kind: str) -> GaussianRates:
    if kind == "outer":
        return outer_rates(g)
    if kind == "inner":
        return inner_rates(g)
    raise ValueError(f"kind must be 'outer' or 'inner', got {kind!r}")


class _AlphaBetaObjective:
    """``total(alpha, beta)`` split as base + min(first, second) on two 2-simplices."""

    block_sizes = (2, 2)

    def __init__(self, g: GaussianParams, kind: str):
        r = rates(g, kind)
        self.r1l, self.r2l = r.r1l, r.r2l
        self.g = g

    def parts(self, a_block, b_block):
        alpha = a_block[..., 0]
        beta = np.clip(b_block[..., 0], 0.0, 1.0)
        r1t, r2t = _transmit_rates(self.g, beta)
        return alpha * self.r1l + (1 - alpha) * r1t, alpha * self.r2l, (1 - alpha) * r2t


@dataclass(frozen=True)
class AlphaBetaOptimum:
    alpha: float
    beta: float
    total: float
    grid_best: float
    rates: GaussianRates


def optimize_alpha_beta(g_base: GaussianParams, kind: str = "outer", grid: int = 200,
                        workers: int | None = None) -> AlphaBetaOptimum:
    """Maximize the total rate over the unit square: a ``grid`` x ``grid``
    sweep followed by local refinement from the best grid points."""
    obj = _AlphaBetaObjective(g_base, kind)
    opts = OptimizerOptions(grid_resolution=grid - 1, restarts=4, grid_budget=grid * grid, workers=workers)
    res = maximize(obj, opts)
    alpha, beta = float(res.blocks[0][0]), float(res.blocks[1][0])
    g = replace(g_base, alpha=min(max(alpha, 0.0), 1.0), beta=min(max(beta, 0.0), 1.0))
    return AlphaBetaOptimum(g.alpha, g.beta, res.value, res.diagnostics["grid_best"], rates(g, kind))


def alpha_sweep(g_base: GaussianParams, step: float = 0.05) -> list[dict]:
    """Outer and inner rates along an alpha grid at the base beta."""
    count = int(round(1.0 / step))
    rows = []
    for i in range(count + 1):
        g = replace(g_base, alpha=min(i * step, 1.0))
        o, inn = outer_rates(g), inner_rates(g)
        rows.append({
            "alpha": g.alpha, "beta": g.beta,
            "r1l": o.r1l, "r2l_outer": o.r2l, "r2l_inner": inn.r2l, "r1t": o.r1t, "r2t": o.r2t,
            "total_outer": o.total, "total_inner": inn.total, "inner_clamped": inn.clamped,
        })
    return rows


# --- Gaussian BC region -------------------------------------------------------


def _bc_slack(theta, r_dest, r_relay, p1, sigma2, sigma1_2):
    relay = capacity_fn(theta * p1 / sigma1_2) - r_relay
    dest = capacity_fn((1 - theta) * p1 / (theta * p1 + sigma2)) - r_dest
    return relay, dest


def bc_region_slack(rate_pair, p1: float, sigma2: float, sigma1_2: float) -> tuple[float, float]:
    """Largest ``min`` slack of the two superposition constraints over the
    power split ``theta``, and the maximizing ``theta``.

    The relay constraint grows and the destination constraint shrinks with
    ``theta``, so after the sweep the crossing is refined by bisection.
    """
    if sigma1_2 >= sigma2:
        raise ValueError("the relay must be the stronger receiver (sigma1^2 < sigma^2)")
    r_dest, r_relay = map(float, rate_pair)
    thetas = np.linspace(0.0, 1.0, BC_SWEEP_POINTS + 1)
    relay, dest = _bc_slack(thetas, r_dest, r_relay, p1, sigma2, sigma1_2)
    slack = np.minimum(relay, dest)
    k = int(np.argmax(slack))
    best_theta, best = float(thetas[k]), float(slack[k])
    lo, hi = thetas[max(k - 1, 0)], thetas[min(k + 1, len(thetas) - 1)]
    diff = lambda t: np.subtract(*_bc_slack(t, r_dest, r_relay, p1, sigma2, sigma1_2))
    if diff(lo) < 0 < diff(hi):
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if diff(mid) < 0:
                lo = mid
            else:
                hi = mid
        for t in (lo, hi):
            v = float(min(_bc_slack(t, r_dest, r_relay, p1, sigma2, sigma1_2)))
            if v > best:
                best, best_theta = v, float(t)
    return best, best_theta


def bc_region_membership(rate_pair, p1: float, sigma2: float, sigma1_2: float, tol: float = 1e-12) -> bool:
    """True iff ``(r_dest, r_relay)`` is achievable on the Gaussian BC by superposition."""
    return bc_region_slack(rate_pair, p1, sigma2, sigma1_2)[0] >= -tol


def check_region_claim(p1: float, sigma2: float, sigma1_2: float, p2: float = 1.0,
                       alpha: float = 0.5, beta: float = 0.0) -> dict:
    """Test the claim that neither listen-mode rate pair is BC-achievable.

    Returns the pairs, their slacks and ``claim_holds``; a pair found inside
    the region is reported as a counterexample rather than raised.
    """
    g = GaussianParams(p1, p2, sigma2, sigma1_2, alpha, beta)
    out, inn = outer_rates(g), inner_rates(g)
    record = {"p1": p1, "sigma2": sigma2, "sigma1_2": sigma1_2, "counterexamples": []}
    for name, r in (("outer", out), ("inner", inn)):
        slack, theta = bc_region_slack((r.r1l, r.r2l), p1, sigma2, sigma1_2)
        inside = slack >= -1e-12
        record[name] = {"pair": (r.r1l, r.r2l), "slack": slack, "theta": theta, "inside": inside}
        if inside:
            record["counterexamples"].append(name)
    record["claim_holds"] = not record["counterexamples"]
    return record

