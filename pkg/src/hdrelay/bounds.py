"""Cut-set outer bounds, decode-forward rates and their maximization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr

from .channel_core import (
    ChannelError,
    HalfDuplexRelayChannel,
    InputDistribution,
    check_physically_degraded,
    validate_input_distribution,
)
from .info_metrics import (
    RateBreakdown,
    conditional_mi,
    mode_conditioned_terms,
    mode_rates,
    rate_breakdown,
    transmit_joint,
)
from .optim import OptimizerOptions, maximize

OBJECTIVES = ("general", "degraded", "decode_forward", "deterministic")


@dataclass(frozen=True)
class ScheduleParams:
    """Deterministic schedule: the relay listens a fraction ``alpha`` of the time."""

    alpha: float
    listen_dist: np.ndarray
    transmit_dist: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ChannelError(f"alpha must lie in [0, 1], got {self.alpha}")
        listen = np.asarray(self.listen_dist, dtype=np.float64)
        transmit = np.asarray(self.transmit_dist, dtype=np.float64)
        for name, p in (("listen_dist", listen), ("transmit_dist", transmit)):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ChannelError(f"{name} is not a pmf")
        object.__setattr__(self, "listen_dist", listen)
        object.__setattr__(self, "transmit_dist", transmit)

    def to_input_distribution(self, quiet_index: int) -> InputDistribution:
        return InputDistribution.from_modes(self.alpha, self.listen_dist, self.transmit_dist, quiet_index)

    @classmethod
    def from_input_distribution(cls, d: InputDistribution) -> "ScheduleParams":
        return cls(d.p_listen, d.listen_x1(), d.transmit_x1x2())


def _check_degraded(ch: HalfDuplexRelayChannel):
    if not check_physically_degraded(ch.bc).degraded:
        raise ChannelError("bc not degraded")


def _check_input(d: InputDistribution, ch: HalfDuplexRelayChannel):
    if not validate_input_distribution(d, ch, tol=1e-9):
        raise ChannelError("input distribution violates the quiet-symbol constraint")


def outer_bound_general(d: InputDistribution, ch: HalfDuplexRelayChannel) -> float:
    """Cut-set bound specialized to the half-duplex channel (any BC component)."""
    _check_input(d, ch)
    t = mode_conditioned_terms(d, ch)
    pl, pt = t.p_listen, t.p_transmit
    return pt * t.i_x1_y_given_x2_transmit + min(
        pl * t.i_x1_yy1_listen,
        t.i_x3_y + pt * t.i_x2_y_transmit + pl * t.i_x1_y_listen,
    )


def outer_bound_degraded(d: InputDistribution, ch: HalfDuplexRelayChannel) -> float:
    """Cut-set bound when the BC component is physically degraded."""
    _check_degraded(ch)
    _check_input(d, ch)
    t = mode_conditioned_terms(d, ch)
    pl, pt = t.p_listen, t.p_transmit
    return pt * t.i_x1_y_given_x2_transmit + min(
        pl * t.i_x1_y1_listen,
        t.i_x3_y + pt * t.i_x2_y_transmit + pl * t.i_x1_y_listen,
    )


def achievable_decode_forward(d: InputDistribution, ch: HalfDuplexRelayChannel) -> float:
    """Rate of block Markov decode-forward with a message-dependent schedule."""
    _check_input(d, ch)
    b = rate_breakdown(d, ch)
    pl, pt = b.p_listen, b.p_transmit
    return pl * b.r1l + pt * b.r1t + min(pl * b.r2l, b.schedule_info + pt * b.r2t)


def deterministic_schedule_rate(sp: ScheduleParams, ch: HalfDuplexRelayChannel) -> float:
    """Rate with a fixed listen/transmit pattern of listen fraction ``alpha``."""
    r1l, r1t, r2l, r2t = mode_rates(sp.listen_dist, sp.transmit_dist, ch)
    a = sp.alpha
    return a * r1l + (1.0 - a) * r1t + min(a * r2l, (1.0 - a) * r2t)


def ma_sum_information(p_x1x2, ch: HalfDuplexRelayChannel) -> float:
    """``I(X1, X2; Y | t)``, the MA sum-rate constraint."""
    return conditional_mi(transmit_joint(p_x1x2, ch), (0, 1), (2,))


# --- vectorized objective over (lambda, p(x1|l), p(x1,x2|t)) ------------------


_LN2 = np.log(2.0)


def _h(p: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis, broadcasting over the rest."""
    return entr(p).sum(axis=-1) / _LN2


_row_entropies = _h


class HalfDuplexObjective:
    """Closed-form bound evaluation on the parameterization that enforces the
    quiet-symbol constraint exactly.

    Blocks: ``(lambda, 1 - lambda)``, ``p(x1 | l)`` and ``p(x1, x2 | t)``
    flattened row-major.
    """

    def __init__(self, ch: HalfDuplexRelayChannel, kind: str):
        if kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {kind!r}; choose from {OBJECTIVES}")
        if kind == "degraded":
            _check_degraded(ch)
        self.kind = kind
        self.ch = ch
        nx1, nx2, _ = ch.input_shape
        self.nx1, self.nx2 = nx1, nx2
        self.block_sizes = (2, nx1, nx1 * nx2)
        lt = ch.listen_table
        self.w_full = lt.reshape(nx1, -1)
        self.w_y = lt.sum(axis=2)
        self.w_y1 = lt.sum(axis=1)
        self.h_full = _row_entropies(self.w_full)
        self.h_y = _row_entropies(self.w_y)
        self.h_y1 = _row_entropies(self.w_y1)
        self.pt = ch.transmit_table
        self.h_pt = _row_entropies(self.pt)

    def listen_parts(self, a):
        """``I(X1;Y|l)``, ``I(X1;Y1|l)``, ``I(X1;Y,Y1|l)`` and ``p(y|l)``."""
        py = a @ self.w_y
        i_y = _h(py) - a @ self.h_y
        i_y1 = _h(a @ self.w_y1) - a @ self.h_y1
        i_full = _h(a @ self.w_full) - a @ self.h_full
        return i_y, i_y1, i_full, py

    def transmit_parts(self, b):
        """``I(X1;Y|X2,t)``, ``I(X2;Y|t)`` and ``p(y|t)``."""
        b2 = b.reshape(b.shape[:-1] + (self.nx1, self.nx2))
        p_x2y = (b2[..., None] * self.pt).sum(axis=-3)
        p_x2 = b2.sum(axis=-2)
        h_y_x2 = _h(p_x2y.reshape(p_x2y.shape[:-2] + (-1,))) - _h(p_x2)
        h_y_x1x2 = b @ self.h_pt.ravel()
        py = p_x2y.sum(axis=-2)
        r1t = h_y_x2 - h_y_x1x2
        r2t = _h(py) - h_y_x2
        return r1t, r2t, py

    def parts(self, lam_block, a, b):
        lam = lam_block[..., 0]
        i_y, i_y1, i_full, py_l = self.listen_parts(a)
        r1t, r2t, py_t = self.transmit_parts(b)
        lt = lam[..., None]
        mix = lt * py_l + (1.0 - lt) * py_t
        sched = _h(mix) - lam * _h(py_l) - (1.0 - lam) * _h(py_t)
        mu = 1.0 - lam
        if self.kind == "general":
            return mu * r1t, lam * i_full, sched + mu * r2t + lam * i_y
        if self.kind == "degraded":
            return mu * r1t, lam * i_y1, sched + mu * r2t + lam * i_y
        base = lam * i_y + mu * r1t
        if self.kind == "decode_forward":
            return base, lam * (i_y1 - i_y), sched + mu * r2t
        return base, lam * (i_y1 - i_y), mu * r2t

    def blocks_from(self, d: InputDistribution) -> list[np.ndarray]:
        lam = d.p_listen
        return [np.array([lam, 1.0 - lam]), d.listen_x1(), d.transmit_x1x2().ravel()]

    def to_input(self, blocks) -> InputDistribution:
        lam = float(blocks[0][0])
        return InputDistribution.from_modes(
            lam, blocks[1], blocks[2].reshape(self.nx1, self.nx2), self.ch.quiet_index
        )

    def value(self, blocks) -> float:
        base, first, second = self.parts(*blocks)
        return float(base + np.minimum(first, second))


@dataclass
class BoundResult:
    value: float
    argmax: InputDistribution
    breakdown: RateBreakdown
    diagnostics: dict = field(default_factory=dict)
    schedule: ScheduleParams | None = None


def evaluate(objective: str, d: InputDistribution, ch: HalfDuplexRelayChannel) -> float:
    if objective == "general":
        return outer_bound_general(d, ch)
    if objective == "degraded":
        return outer_bound_degraded(d, ch)
    if objective == "decode_forward":
        return achievable_decode_forward(d, ch)
    if objective == "deterministic":
        return deterministic_schedule_rate(ScheduleParams.from_input_distribution(d), ch)
    raise ValueError(f"unknown objective {objective!r}")


def optimize_bound(
    ch: HalfDuplexRelayChannel,
    objective: str = "degraded",
    opts: OptimizerOptions | None = None,
    fixed_listen: float | None = None,
    extra_starts=(),
) -> BoundResult:
    """Maximize a bound over admissible input distributions.

    ``fixed_listen`` pins ``p(X3=l)``; ``extra_starts`` are additional
    input distributions (or schedules) to refine from.
    """
    obj = HalfDuplexObjective(ch, objective)
    fixed = {}
    if fixed_listen is not None:
        fixed[0] = np.array([fixed_listen, 1.0 - fixed_listen])
    starts = []
    for st in extra_starts:
        if isinstance(st, ScheduleParams):
            st = st.to_input_distribution(ch.quiet_index)
        starts.append(obj.blocks_from(st))
    res = maximize(obj, opts, fixed=fixed, extra_starts=starts)
    d = obj.to_input(res.blocks)
    sp = ScheduleParams.from_input_distribution(d)
    if objective == "deterministic":
        r1l, r1t, r2l, r2t = mode_rates(sp.listen_dist, sp.transmit_dist, ch)
        breakdown = RateBreakdown(r1l, r1t, r2l, r2t, 0.0, sp.alpha, 1.0 - sp.alpha)
    else:
        breakdown = rate_breakdown(d, ch)
    diag = dict(res.diagnostics, objective=objective)
    if fixed_listen is None:
        # block 0 runs from (0, 1) to (1, 0): never listen, then always listen
        never, always = diag.pop("block0_edges")
        diag.update(boundary_never_listen=never, boundary_always_listen=always,
                    interior_optimum=bool(res.value > max(never, always) + 1e-9))
    else:
        diag.pop("block0_edges")
    return BoundResult(
        value=res.value, argmax=d, breakdown=breakdown, diagnostics=diag,
        schedule=sp if objective == "deterministic" else None,
    )


@dataclass
class ScheduleComparison:
    random: BoundResult
    deterministic: BoundResult

    @property
    def gap(self) -> float:
        return self.random.value - self.deterministic.value


def compare_schedules(
    ch: HalfDuplexRelayChannel, opts: OptimizerOptions | None = None, objective: str = "decode_forward"
) -> ScheduleComparison:
    """Optimize the random- and fixed-schedule rates with shared settings.

    The fixed-schedule optimum is a feasible start for the random-schedule
    search, so the comparison cannot invert through search noise alone.
    """
    det = optimize_bound(ch, "deterministic", opts)
    rnd = optimize_bound(ch, objective, opts, extra_starts=[det.argmax])
    return ScheduleComparison(random=rnd, deterministic=det)
