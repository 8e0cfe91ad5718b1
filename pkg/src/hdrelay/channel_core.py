"""Alphabets, conditional pmfs and the half-duplex relay channel.

A half-duplex relay channel is assembled from a broadcast (BC) component
``p_l(y, y1 | x1)``, active while the relay listens, and a multiple-access
(MA) component ``p_t(y | x1, x2)``, active while it transmits.  The relay
state ``x3`` takes the values ``"l"`` and ``"t"``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

X3_SYMBOLS = ("l", "t")
LISTEN = 0
TRANSMIT = 1

NORM_TOL = 1e-9
INGEST_TOL = 1e-6


class ChannelError(ValueError):
    """Raised when a channel or distribution violates its invariants."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __init__(self, symbols: Iterable):
        syms = tuple(str(s) for s in symbols)
        if not syms:
            raise ChannelError("alphabet must be non-empty")
        if len(set(syms)) != len(syms):
            raise ChannelError(f"alphabet labels must be unique: {syms}")
        object.__setattr__(self, "symbols", syms)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, label) -> bool:
        return str(label) in self.symbols

    def index(self, label) -> int:
        try:
            return self.symbols.index(str(label))
        except ValueError:
            raise ChannelError(f"symbol {label!r} not in alphabet {self.symbols}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class ConditionalPmf:
    """A table ``p(outputs | inputs)``; the first ``n_inputs`` axes index inputs.

    Every slice over the output axes must sum to one within ``tol``.
    """

    def __init__(self, table, n_inputs: int, tol: float = NORM_TOL):
        table = np.asarray(table, dtype=np.float64)
        if not 0 <= n_inputs < table.ndim:
            raise ChannelError("need at least one output axis")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ChannelError("pmf entries must be finite and nonnegative")
        out_axes = tuple(range(n_inputs, table.ndim))
        sums = table.sum(axis=out_axes)
        worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
        if worst > tol:
            raise ChannelError(f"pmf slices do not sum to 1 (max deviation {worst:.3g})")
        self._table = _frozen(table)
        self.n_inputs = n_inputs

    @property
    def table(self) -> np.ndarray:
        return self._table

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self._table.shape[: self.n_inputs]

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self._table.shape[self.n_inputs:]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ConditionalPmf)
            and self.n_inputs == other.n_inputs
            and self._table.shape == other._table.shape
            and bool(np.array_equal(self._table, other._table))
        )

    def __repr__(self) -> str:
        return f"ConditionalPmf(inputs={self.input_shape}, outputs={self.output_shape})"


@dataclass(frozen=True)
class BroadcastComponent:
    """Listen-mode channel ``p_l(y, y1 | x1)``; table shape ``(|X1|, |Y|, |Y1|)``."""

    x1_alphabet: Alphabet
    y_alphabet: Alphabet
    y1_alphabet: Alphabet
    pmf: ConditionalPmf

    def __post_init__(self):
        expected = (len(self.x1_alphabet), len(self.y_alphabet), len(self.y1_alphabet))
        if self.pmf.table.shape != expected or self.pmf.n_inputs != 1:
            raise ChannelError(f"BC table shape {self.pmf.table.shape} != {expected}")

    @property
    def relay_marginal(self) -> np.ndarray:
        """``p_l(y1 | x1)``."""
        return self.pmf.table.sum(axis=1)

    @property
    def destination_marginal(self) -> np.ndarray:
        """``p_l(y | x1)``."""
        return self.pmf.table.sum(axis=2)


@dataclass(frozen=True)
class MultipleAccessComponent:
    """Transmit-mode channel ``p_t(y | x1, x2)``; table shape ``(|X1|, |X2|, |Y|)``."""

    x1_alphabet: Alphabet
    x2_alphabet: Alphabet
    y_alphabet: Alphabet
    pmf: ConditionalPmf

    def __post_init__(self):
        expected = (len(self.x1_alphabet), len(self.x2_alphabet), len(self.y_alphabet))
        if self.pmf.table.shape != expected or self.pmf.n_inputs != 2:
            raise ChannelError(f"MA table shape {self.pmf.table.shape} != {expected}")


@dataclass(frozen=True)
class HalfDuplexRelayChannel:
    bc: BroadcastComponent
    ma: MultipleAccessComponent
    quiet: str
    erasure: str
    composed: ConditionalPmf = field(repr=False)

    @property
    def x1(self) -> Alphabet:
        return self.bc.x1_alphabet

    @property
    def x2(self) -> Alphabet:
        return self.ma.x2_alphabet

    @property
    def y(self) -> Alphabet:
        return self.bc.y_alphabet

    @property
    def y1(self) -> Alphabet:
        return self.bc.y1_alphabet

    @property
    def quiet_index(self) -> int:
        return self.x2.index(self.quiet)

    @property
    def erasure_index(self) -> int:
        return self.y1.index(self.erasure)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (len(self.x1), len(self.x2), 2)

    @property
    def listen_table(self) -> np.ndarray:
        """``p_l(y, y1 | x1)``."""
        return self.bc.pmf.table

    @property
    def transmit_table(self) -> np.ndarray:
        """``p_t(y | x1, x2)``."""
        return self.ma.pmf.table


def compose_half_duplex(
    bc: BroadcastComponent, ma: MultipleAccessComponent, quiet, erasure
) -> HalfDuplexRelayChannel:
    """Build ``p(y, y1 | x1, x2, x3)`` from the two component channels.

    In listen mode the BC table is copied for every relay input; in transmit
    mode the relay output is the erasure symbol with probability one.
    """
    if bc.x1_alphabet != ma.x1_alphabet:
        raise ChannelError("alphabet mismatch: BC and MA source alphabets differ")
    if bc.y_alphabet != ma.y_alphabet:
        raise ChannelError("alphabet mismatch: BC and MA destination alphabets differ")
    if quiet not in ma.x2_alphabet:
        raise ChannelError(f"quiet symbol {quiet!r} not in relay input alphabet")
    if erasure not in bc.y1_alphabet:
        raise ChannelError(f"erasure symbol {erasure!r} not in relay output alphabet")
    e = bc.y1_alphabet.index(erasure)
    mass = float(bc.pmf.table[:, :, e].max())
    if mass > 0.0:
        raise ChannelError(f"erasure symbol has BC mass (max {mass:.3g})")

    nx1, ny, ny1 = bc.pmf.table.shape
    nx2 = len(ma.x2_alphabet)
    table = np.zeros((nx1, nx2, 2, ny, ny1))
    table[:, :, LISTEN] = bc.pmf.table[:, None]
    table[:, :, TRANSMIT, :, e] = ma.pmf.table
    return HalfDuplexRelayChannel(
        bc=bc, ma=ma, quiet=str(quiet), erasure=str(erasure),
        composed=ConditionalPmf(table, n_inputs=3),
    )


@dataclass(frozen=True)
class DegradednessReport:
    degraded: bool
    p_y1_given_x1: ConditionalPmf
    p_y_given_y1: ConditionalPmf | None
    max_deviation: float


def check_physically_degraded(bc: BroadcastComponent, tol: float = 1e-7) -> DegradednessReport:
    """Test whether ``p_l(y, y1 | x1) = p_l(y | y1) p_l(y1 | x1)``.

    For every relay output with non-negligible probability the conditional
    ``p(y | y1, x1)`` is compared across source symbols in sup-norm.
    """
    joint = bc.pmf.table
    w1 = joint.sum(axis=1)  # (x1, y1)
    ny = joint.shape[1]
    kernel = np.full((joint.shape[2], ny), 1.0 / ny)
    worst = 0.0
    for j in range(joint.shape[2]):
        rows = w1[:, j] > tol
        if not rows.any():
            continue
        cond = joint[rows, :, j] / w1[rows, j][:, None]
        weights = w1[rows, j]
        avg = weights @ cond / weights.sum()
        worst = max(worst, float(np.max(np.abs(cond - avg))))
        kernel[j] = avg / avg.sum()
    degraded = worst <= tol
    return DegradednessReport(
        degraded=degraded,
        p_y1_given_x1=ConditionalPmf(w1, 1, tol=1e-8),
        p_y_given_y1=ConditionalPmf(kernel, 1, tol=1e-8) if degraded else None,
        max_deviation=worst,
    )


class InputDistribution:
    """Joint source/relay pmf ``p(x1, x2, x3)`` stored with shape ``(|X1|, |X2|, 2)``."""

    def __init__(self, pmf, tol: float = NORM_TOL):
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 3 or pmf.shape[2] != 2:
            raise ChannelError(f"input pmf must have shape (|X1|, |X2|, 2), got {pmf.shape}")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ChannelError("input pmf entries must be finite and nonnegative")
        if abs(pmf.sum() - 1.0) > tol:
            raise ChannelError(f"input pmf sums to {pmf.sum():.12g}")
        self._pmf = _frozen(pmf)

    @classmethod
    def from_modes(cls, p_listen: float, listen_x1, transmit_x1x2, quiet_index: int):
        """Assemble from ``p(X3=l)``, ``p(x1 | l)`` and ``p(x1, x2 | t)``.

        The relay input in listen mode is pinned to the quiet symbol.
        """
        listen_x1 = np.asarray(listen_x1, dtype=np.float64)
        transmit = np.asarray(transmit_x1x2, dtype=np.float64)
        pmf = np.zeros(transmit.shape + (2,))
        pmf[:, quiet_index, LISTEN] = p_listen * listen_x1
        pmf[:, :, TRANSMIT] = (1.0 - p_listen) * transmit
        return cls(pmf)

    @property
    def pmf(self) -> np.ndarray:
        return self._pmf

    @property
    def shape(self) -> tuple[int, ...]:
        return self._pmf.shape

    @property
    def p_listen(self) -> float:
        return float(self._pmf[:, :, LISTEN].sum())

    @property
    def p_transmit(self) -> float:
        return float(self._pmf[:, :, TRANSMIT].sum())

    def mode_conditional(self, mode: int) -> np.ndarray:
        """``p(x1, x2 | x3=mode)``; uniform when the mode has zero probability."""
        part = self._pmf[:, :, mode]
        total = part.sum()
        if total <= 0:
            return np.full(part.shape, 1.0 / part.size)
        return part / total

    def listen_x1(self) -> np.ndarray:
        return self.mode_conditional(LISTEN).sum(axis=1)

    def transmit_x1x2(self) -> np.ndarray:
        return self.mode_conditional(TRANSMIT)

    def __repr__(self) -> str:
        return f"InputDistribution(shape={self.shape}, p_listen={self.p_listen:.4g})"


def validate_input_distribution(
    d: InputDistribution, channel: HalfDuplexRelayChannel, tol: float = NORM_TOL
) -> bool:
    """True iff ``d`` is normalized and silent (quiet symbol) while listening."""
    if d.shape != channel.input_shape:
        raise ChannelError(f"input shape {d.shape} does not match channel {channel.input_shape}")
    if abs(d.pmf.sum() - 1.0) > tol:
        return False
    listen = d.pmf[:, :, LISTEN]
    p_l = listen.sum()
    if p_l <= tol:
        return True
    cond_x2 = listen.sum(axis=0) / p_l
    target = np.zeros_like(cond_x2)
    target[channel.quiet_index] = 1.0
    return bool(np.max(np.abs(cond_x2 - target)) <= tol)


# --- construction helpers ---------------------------------------------------


def make_channel(
    x1: Sequence, x2: Sequence, y: Sequence, y1: Sequence,
    bc_table, ma_table, quiet, erasure, tol: float = NORM_TOL,
) -> HalfDuplexRelayChannel:
    a_x1, a_x2, a_y, a_y1 = Alphabet(x1), Alphabet(x2), Alphabet(y), Alphabet(y1)
    bc = BroadcastComponent(a_x1, a_y, a_y1, ConditionalPmf(bc_table, 1, tol))
    ma = MultipleAccessComponent(a_x1, a_x2, a_y, ConditionalPmf(ma_table, 2, tol))
    return compose_half_duplex(bc, ma, quiet, erasure)


def _renormalize(table: np.ndarray, n_inputs: int, what: str) -> np.ndarray:
    out_axes = tuple(range(n_inputs, table.ndim))
    sums = table.sum(axis=out_axes, keepdims=True)
    dev = float(np.max(np.abs(sums - 1.0)))
    if dev > INGEST_TOL:
        raise ChannelError(f"{what}: rows sum to 1 only within {dev:.3g} (> {INGEST_TOL})")
    if dev > NORM_TOL:
        warnings.warn(f"{what}: renormalizing rows (max deviation {dev:.3g})", stacklevel=3)
        table = table / sums
    return table


def channel_from_dict(spec: dict) -> HalfDuplexRelayChannel:
    """Parse the JSON channel-spec layout (``bc[x1][y][y1]``, ``ma[x1][x2][y]``)."""
    missing = [k for k in ("x1", "x2", "y", "y1", "quiet", "erasure", "bc", "ma") if k not in spec]
    if missing:
        raise ChannelError(f"channel spec missing fields: {', '.join(missing)}")
    try:
        bc = np.array(spec["bc"], dtype=np.float64)
        ma = np.array(spec["ma"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ChannelError(f"field 'bc'/'ma': not a rectangular numeric array ({exc})") from None
    shape_bc = (len(spec["x1"]), len(spec["y"]), len(spec["y1"]))
    shape_ma = (len(spec["x1"]), len(spec["x2"]), len(spec["y"]))
    if bc.shape != shape_bc:
        raise ChannelError(f"field 'bc': shape {bc.shape}, expected {shape_bc}")
    if ma.shape != shape_ma:
        raise ChannelError(f"field 'ma': shape {ma.shape}, expected {shape_ma}")
    bc = _renormalize(bc, 1, "field 'bc'")
    ma = _renormalize(ma, 2, "field 'ma'")
    return make_channel(
        spec["x1"], spec["x2"], spec["y"], spec["y1"], bc, ma, spec["quiet"], spec["erasure"]
    )


def channel_to_dict(ch: HalfDuplexRelayChannel) -> dict:
    return {
        "x1": list(ch.x1.symbols),
        "x2": list(ch.x2.symbols),
        "y": list(ch.y.symbols),
        "y1": list(ch.y1.symbols),
        "quiet": ch.quiet,
        "erasure": ch.erasure,
        "bc": ch.listen_table.tolist(),
        "ma": ch.transmit_table.tolist(),
    }


def load_channel(path) -> HalfDuplexRelayChannel:
    with open(path) as fh:
        return channel_from_dict(json.load(fh))


def save_channel(ch: HalfDuplexRelayChannel, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch), indent=2))


def distribution_from_dict(spec: dict, ch: HalfDuplexRelayChannel) -> InputDistribution:
    """Parse ``{"pmf": [x1][x2][x3]}`` with ``x3`` ordered ``(l, t)``."""
    if "pmf" not in spec:
        raise ChannelError("distribution file missing field 'pmf'")
    try:
        pmf = np.array(spec["pmf"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ChannelError(f"field 'pmf': not a rectangular numeric array ({exc})") from None
    if pmf.shape != ch.input_shape:
        raise ChannelError(f"field 'pmf': shape {pmf.shape}, expected {ch.input_shape}")
    total = pmf.sum()
    if abs(total - 1.0) > INGEST_TOL:
        raise ChannelError(f"field 'pmf': sums to {total:.9g}")
    return InputDistribution(pmf / total)


def distribution_to_dict(d: InputDistribution) -> dict:
    return {"pmf": d.pmf.tolist()}
