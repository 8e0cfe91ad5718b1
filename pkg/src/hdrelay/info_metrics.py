"""Entropies and mutual informations (in bits) of the induced joint pmf."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_core import (
    LISTEN,
    TRANSMIT,
    ChannelError,
    HalfDuplexRelayChannel,
    InputDistribution,
)

VARIABLES = ("x1", "x2", "x3", "y", "y1")


def entropy(p, axis=None) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    if axis is None:
        p = p.ravel()
        axis = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


def _marginal_entropy(joint: np.ndarray, keep: tuple[int, ...]) -> float:
    if not keep:
        return 0.0
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    return float(entropy(joint.sum(axis=drop)))


def conditional_mi(joint, a_axes, b_axes, c_axes=()) -> float:
    """``I(A; B | C)`` for a joint pmf array, computed from marginal entropies."""
    joint = np.asarray(joint, dtype=np.float64)
    a, b, c = tuple(a_axes), tuple(b_axes), tuple(c_axes)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("variable groups must be disjoint")
    value = (
        _marginal_entropy(joint, tuple(sorted(a + c)))
        + _marginal_entropy(joint, tuple(sorted(b + c)))
        - _marginal_entropy(joint, tuple(sorted(a + b + c)))
        - _marginal_entropy(joint, tuple(sorted(c)))
    )
    return max(value, 0.0) if value > -1e-12 else value


def mutual_information(joint, a_axes=(0,), b_axes=(1,)) -> float:
    return conditional_mi(joint, a_axes, b_axes)


class JointDistribution:
    """Pmf over ``(x1, x2, x3, y, y1)`` with named-variable accessors."""

    def __init__(self, pmf: np.ndarray):
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 5:
            raise ChannelError("joint pmf must have five axes (x1, x2, x3, y, y1)")
        if abs(pmf.sum() - 1.0) > 1e-9:
            raise ChannelError(f"joint pmf sums to {pmf.sum():.12g}")
        self.pmf = pmf

    @staticmethod
    def _axes(names) -> tuple[int, ...]:
        if isinstance(names, str):
            names = (names,)
        return tuple(VARIABLES.index(n) for n in names)

    def marginal(self, *names: str) -> np.ndarray:
        keep = self._axes(names)
        drop = tuple(i for i in range(5) if i not in keep)
        m = self.pmf.sum(axis=drop)
        # reorder to the requested order
        order = np.argsort(np.argsort(keep))
        return np.transpose(m, order) if m.ndim > 1 else m

    def prob(self, name: str, value: int) -> float:
        return float(np.take(self.marginal(name), value))

    def condition(self, name: str, value: int) -> "JointDistribution | None":
        """Joint conditioned on ``name == value``; None for a null event."""
        ax = VARIABLES.index(name)
        sl = np.zeros_like(self.pmf)
        idx = [slice(None)] * 5
        idx[ax] = value
        sl[tuple(idx)] = self.pmf[tuple(idx)]
        total = sl.sum()
        if total <= 0:
            return None
        return JointDistribution(sl / total)

    def mi(self, a, b, given=()) -> float:
        return conditional_mi(self.pmf, self._axes(a), self._axes(b), self._axes(given))

    def entropy(self, *names: str) -> float:
        return float(entropy(self.marginal(*names)))


def induce_joint(d: InputDistribution, ch: HalfDuplexRelayChannel) -> JointDistribution:
    if d.shape != ch.input_shape:
        raise ChannelError(f"input shape {d.shape} does not match channel {ch.input_shape}")
    return JointDistribution(d.pmf[..., None, None] * ch.composed.table)


@dataclass(frozen=True)
class ModeTerms:
    """Mode-conditioned informations, unweighted by the mode probabilities."""

    i_x1_y1_listen: float
    i_x1_y_listen: float
    i_x1_yy1_listen: float
    i_x1_y_given_x2_transmit: float
    i_x2_y_transmit: float
    i_x1x2_y_transmit: float
    i_x3_y: float
    p_listen: float

    @property
    def p_transmit(self) -> float:
        return 1.0 - self.p_listen


def mode_conditioned_terms(d: InputDistribution, ch: HalfDuplexRelayChannel) -> ModeTerms:
    joint = induce_joint(d, ch)
    listen = joint.condition("x3", LISTEN)
    transmit = joint.condition("x3", TRANSMIT)

    def _mi(j, a, b, given=()):
        return 0.0 if j is None else j.mi(a, b, given)

    return ModeTerms(
        i_x1_y1_listen=_mi(listen, "x1", "y1"),
        i_x1_y_listen=_mi(listen, "x1", "y"),
        i_x1_yy1_listen=_mi(listen, "x1", ("y", "y1")),
        i_x1_y_given_x2_transmit=_mi(transmit, "x1", "y", ("x2",)),
        i_x2_y_transmit=_mi(transmit, "x2", "y"),
        i_x1x2_y_transmit=_mi(transmit, ("x1", "x2"), "y"),
        i_x3_y=joint.mi("x3", "y"),
        p_listen=joint.prob("x3", LISTEN),
    )


@dataclass(frozen=True)
class RateBreakdown:
    """Per-mode flow rates in bits per channel use of the respective mode.

    ``r2l`` is negative when the destination hears the source better than
    the relay does (possible only for non-degraded BC components).
    """

    r1l: float
    r1t: float
    r2l: float
    r2t: float
    schedule_info: float
    p_listen: float
    p_transmit: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def breakdown_from_terms(t: ModeTerms) -> RateBreakdown:
    return RateBreakdown(
        r1l=t.i_x1_y_listen,
        r1t=t.i_x1_y_given_x2_transmit,
        r2l=t.i_x1_y1_listen - t.i_x1_y_listen,
        r2t=t.i_x2_y_transmit,
        schedule_info=t.i_x3_y,
        p_listen=t.p_listen,
        p_transmit=t.p_transmit,
    )


def rate_breakdown(d: InputDistribution, ch: HalfDuplexRelayChannel) -> RateBreakdown:
    return breakdown_from_terms(mode_conditioned_terms(d, ch))


def listen_joint(p_x1, ch: HalfDuplexRelayChannel) -> np.ndarray:
    """``p(x1, y, y1 | l)`` from a listen-mode source pmf."""
    return np.asarray(p_x1, dtype=np.float64)[:, None, None] * ch.listen_table


def transmit_joint(p_x1x2, ch: HalfDuplexRelayChannel) -> np.ndarray:
    """``p(x1, x2, y | t)`` from a transmit-mode input pmf."""
    return np.asarray(p_x1x2, dtype=np.float64)[:, :, None] * ch.transmit_table


def mode_rates(p_x1_listen, p_x1x2_transmit, ch: HalfDuplexRelayChannel) -> tuple[float, float, float, float]:
    """``(r1l, r1t, r2l, r2t)`` from the two mode-conditional input pmfs."""
    jl = listen_joint(p_x1_listen, ch)
    jt = transmit_joint(p_x1x2_transmit, ch)
    r1l = conditional_mi(jl, (0,), (1,))
    r2l = conditional_mi(jl, (0,), (2,)) - r1l
    r1t = conditional_mi(jt, (0,), (2,), (1,))
    r2t = conditional_mi(jt, (1,), (2,))
    return r1l, r1t, r2l, r2t
