"""Full-duplex relay channels consistent with a half-duplex channel's components.

A full-duplex channel ``p0(y, y1 | x1, x2)`` is consistent with the BC and MA
components when its destination marginal equals ``p_t(y | x1, x2)`` and its
relay marginal equals the BC relay link ``p_l(y1 | x1)`` for every ``x2``.
Physically degraded examples are built as ``p_l(y1|x1) k(y|y1,x2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .bounds import compare_schedules
from .channel_core import (
    BroadcastComponent,
    ChannelError,
    ConditionalPmf,
    HalfDuplexRelayChannel,
    MultipleAccessComponent,
    check_physically_degraded,
)
from .info_metrics import conditional_mi
from .optim import OptimizerOptions, maximize
from .bounds import _h

MARGINAL_TOL = 1e-8


class ConstructionInfeasible(ChannelError):
    """No kernel ``k(y | y1, x2)`` reproduces the MA component.

    ``residual`` is the best sup-norm mismatch found and ``rows`` lists the
    ``(x1, x2, y)`` entries whose mismatch exceeds the tolerance.
    """

    def __init__(self, residual: float, rows: list, kernel: np.ndarray):
        self.residual = residual
        self.rows = rows
        self.kernel = kernel
        super().__init__(f"no degraded full-duplex channel: residual {residual:.3g} on rows {rows[:8]}")


@dataclass(frozen=True)
class FullDuplexChannel:
    """``pmf`` has axes ``(x1, x2, y, y1)``."""

    pmf: ConditionalPmf
    provenance: str = "user_supplied"
    kernel: np.ndarray | None = field(default=None, compare=False)

    def check_marginals(self, bc: BroadcastComponent, ma: MultipleAccessComponent, tol: float = MARGINAL_TOL) -> dict:
        t = self.pmf.table
        dest = np.max(np.abs(t.sum(axis=3) - ma.pmf.table))
        relay = np.max(np.abs(t.sum(axis=2) - bc.relay_marginal[:, None, :]))
        return {"destination": float(dest), "relay": float(relay), "ok": bool(dest <= tol and relay <= tol)}


def check_quiet_consistency(ch: HalfDuplexRelayChannel, tol: float = 1e-9) -> bool:
    """True iff the source-destination link while listening equals the MA
    component with the relay sending the quiet symbol."""
    listen = ch.bc.destination_marginal
    quiet = ch.transmit_table[:, ch.quiet_index, :]
    return bool(np.max(np.abs(listen - quiet)) <= tol)


def _constraint_matrix(w1: np.ndarray, ny: int):
    """Equalities on ``vec(K)`` (row-major ``K[y1, y]``): ``W1 K = P`` then unit row sums."""
    nx1, ny1 = w1.shape
    a_mix = np.kron(w1, np.eye(ny))                    # (nx1*ny, ny1*ny)
    a_rows = np.kron(np.eye(ny1), np.ones((1, ny)))    # (ny1, ny1*ny)
    return a_mix, a_rows


def _solve_kernel(w1: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Stochastic ``K`` minimizing ``max |W1 K - target|`` (LP), then polished."""
    nx1, ny1 = w1.shape
    ny = target.shape[1]
    nv = ny1 * ny
    a_mix, a_rows = _constraint_matrix(w1, ny)
    b = target.ravel()
    # variables: vec(K), t ; minimize t
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    ones = np.ones((a_mix.shape[0], 1))
    a_ub = np.vstack([np.hstack([a_mix, -ones]), np.hstack([-a_mix, -ones])])
    b_ub = np.concatenate([b, -b])
    a_eq = np.hstack([a_rows, np.zeros((ny1, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.ones(ny1),
                  bounds=[(0, None)] * (nv + 1), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    k = res.x[:nv] if res.x is not None else np.full(nv, 1.0 / ny)
    k = _polish(k, a_mix, a_rows, b)
    k = np.clip(k, 0.0, None).reshape(ny1, ny)
    return k / k.sum(axis=1, keepdims=True)


def _polish(k: np.ndarray, a_mix: np.ndarray, a_rows: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares correction on the support of ``k`` that removes solver
    round-off while keeping every entry nonnegative."""
    a = np.vstack([a_mix, a_rows])
    rhs = np.concatenate([b, np.ones(a_rows.shape[0])])
    support = k > 1e-12
    if not support.any():
        return k
    delta, *_ = np.linalg.lstsq(a[:, support], rhs - a @ k, rcond=None)
    cand = k.copy()
    cand[support] += delta
    if cand.min() >= -1e-15:
        before = np.max(np.abs(a @ k - rhs))
        after = np.max(np.abs(a @ np.clip(cand, 0, None) - rhs))
        if after <= before:
            return np.clip(cand, 0.0, None)
    return k


def construct_degraded_fullduplex(bc: BroadcastComponent, ma: MultipleAccessComponent,
                                  tol: float = MARGINAL_TOL) -> FullDuplexChannel:
    """Find ``k(y | y1, x2)`` with ``sum_y1 p_l(y1|x1) k(y|y1,x2) = p_t(y|x1,x2)``.

    Each ``x2`` gives an independent linear feasibility problem, solved as a
    sup-norm residual LP.  Raises :class:`ConstructionInfeasible` when the
    best residual exceeds ``tol``.
    """
    if bc.x1_alphabet != ma.x1_alphabet or bc.y_alphabet != ma.y_alphabet:
        raise ChannelError("alphabet mismatch")
    w1 = bc.relay_marginal
    p_t = ma.pmf.table
    nx1, nx2, ny = p_t.shape
    ny1 = w1.shape[1]
    kernel = np.zeros((nx2, ny1, ny))
    for x2 in range(nx2):
        kernel[x2] = _solve_kernel(w1, p_t[:, x2, :])
    recon = np.einsum("ab,cbd->acd", w1, kernel)          # (x1, x2, y)
    err = np.abs(recon - p_t)
    residual = float(err.max())
    if residual > tol:
        rows = [tuple(int(i) for i in idx) for idx in zip(*np.nonzero(err > tol))]
        raise ConstructionInfeasible(residual, rows, kernel)
    p0 = np.einsum("ab,cbd->acdb", w1, kernel)             # (x1, x2, y, y1)
    p0 = p0 / p0.sum(axis=(2, 3), keepdims=True)
    return FullDuplexChannel(ConditionalPmf(p0, 2, tol=1e-9), "constructed_degraded", kernel)


class _FullDuplexObjective:
    """``min{I(X1;Y1|X2), I(X1,X2;Y)}`` on the flattened ``p(x1, x2)`` simplex."""

    def __init__(self, bc: BroadcastComponent, ma: MultipleAccessComponent):
        self.w1 = bc.relay_marginal
        self.pt = ma.pmf.table
        self.nx1, self.nx2 = self.pt.shape[:2]
        self.block_sizes = (self.nx1 * self.nx2,)
        self.h_w1 = _h(self.w1)
        self.h_pt = _h(self.pt)

    def terms(self, p):
        p2 = p.reshape(p.shape[:-1] + (self.nx1, self.nx2))
        # I(X1;Y1|X2) = sum_x2 [H(Y1|x2) p(x2)] - H(Y1|X1)
        p_x2y1 = np.einsum("...ab,ac->...bc", p2, self.w1)
        h_y1_x2 = _h(p_x2y1.reshape(p_x2y1.shape[:-2] + (-1,))) - _h(p2.sum(axis=-2))
        h_y1_x1 = (p2.sum(axis=-1) * self.h_w1).sum(axis=-1)
        i_relay = h_y1_x2 - h_y1_x1
        p_y = np.einsum("...ab,aby->...y", p2, self.pt)
        i_dest = _h(p_y) - (p2 * self.h_pt).sum(axis=(-2, -1))
        return i_relay, i_dest

    def parts(self, p):
        i_relay, i_dest = self.terms(p)
        return np.zeros_like(i_relay), i_relay, i_dest


@dataclass
class FullDuplexCapacity:
    value: float
    argmax: np.ndarray
    relay_term: float
    destination_term: float
    diagnostics: dict = field(default_factory=dict)


def fullduplex_degraded_capacity(bc: BroadcastComponent, ma: MultipleAccessComponent,
                                 opts: OptimizerOptions | None = None) -> FullDuplexCapacity:
    """Capacity of every degraded full-duplex channel built from ``(bc, ma)``:
    ``max_{p(x1,x2)} min{I(X1;Y1|X2), I(X1,X2;Y)}``."""
    obj = _FullDuplexObjective(bc, ma)
    res = maximize(obj, opts)
    p = res.blocks[0]
    i_relay, i_dest = obj.terms(p)
    return FullDuplexCapacity(res.value, p.reshape(obj.nx1, obj.nx2), float(i_relay), float(i_dest),
                              dict(res.diagnostics))


def fullduplex_terms(fd: FullDuplexChannel, p_x1x2: np.ndarray) -> tuple[float, float]:
    """``I(X1;Y1|X2)`` and ``I(X1,X2;Y)`` read off a full-duplex pmf directly."""
    joint = np.asarray(p_x1x2)[:, :, None, None] * fd.pmf.table      # (x1, x2, y, y1)
    return conditional_mi(joint, (0,), (3,), (1,)), conditional_mi(joint, (0, 1), (2,))


@dataclass
class FullHalfComparison:
    c_full: float
    c_half_random: float
    c_half_deterministic: float
    quiet_consistent: bool
    constructible: bool
    violations: list = field(default_factory=list)

    @property
    def ordering(self) -> str:
        pairs = sorted((("full", self.c_full), ("half_random", self.c_half_random),
                        ("half_deterministic", self.c_half_deterministic)), key=lambda kv: -kv[1])
        return " >= ".join(name for name, _ in pairs)


def compare_full_vs_half(ch: HalfDuplexRelayChannel, opts: OptimizerOptions | None = None,
                         tol: float = 5e-3) -> FullHalfComparison:
    """Full-duplex capacity against the optimized half-duplex rates.

    When the quiet symbol is consistent and a degraded full-duplex channel
    exists, the full-duplex capacity is expected to be at least the
    random-schedule half-duplex capacity; a shortfall beyond ``tol`` is
    logged in ``violations`` rather than raised.  Without a degraded
    realization ``c_full`` is only the formula's value and no claim is checked.
    """
    if not check_physically_degraded(ch.bc).degraded:
        raise ChannelError("bc not degraded")
    try:
        construct_degraded_fullduplex(ch.bc, ch.ma)
        constructible = True
    except ConstructionInfeasible:
        constructible = False
    full = fullduplex_degraded_capacity(ch.bc, ch.ma, opts)
    sched = compare_schedules(ch, opts, objective="degraded")
    out = FullHalfComparison(full.value, sched.random.value, sched.deterministic.value,
                             check_quiet_consistency(ch), constructible)
    if out.quiet_consistent and out.constructible and out.c_full < out.c_half_random - tol:
        out.violations.append({
            "claim": "full-duplex capacity >= half-duplex capacity under quiet consistency",
            "c_full": out.c_full, "c_half_random": out.c_half_random,
            "shortfall": out.c_half_random - out.c_full,
        })
    if out.c_half_random < out.c_half_deterministic - 1e-6:
        out.violations.append({"claim": "random schedule >= fixed schedule",
                               "gap": out.c_half_random - out.c_half_deterministic})
    if out.c_half_random - out.c_half_deterministic > 1.0 + 1e-9:
        out.violations.append({"claim": "schedule gap <= 1 bit",
                               "gap": out.c_half_random - out.c_half_deterministic})
    return out
