"""Monte Carlo simulation of random block Markov decode-forward coding.

Two schemes are simulated:

* the layered block Markov code: ``B`` blocks, a message-dependent relay
  schedule ``x3(s)``, a relay codeword ``x2(w, s)`` carrying the bin of the
  previous relay message, and a source codeword ``x1(u, v | w, s)`` split into
  a listen part (depends on ``v``) and a transmit part (depends on ``u``);
* the flow-oriented two-slot scheme: a superposition BC code while the relay
  listens, then an MA code while it forwards.

Decoders use strong joint typicality.  A decoding step succeeds only when
the transmitted index is typical and no other index is; an empty or
ambiguous candidate set is an error.  Because of that rule the search can
stop at the first typical impostor, which keeps above-capacity runs cheap.

Every trial draws a fresh code from the ensemble.  Random streams are keyed
by ``(seed, trial, role, ...)`` so results do not depend on worker count or
on the order in which codeword chunks are touched.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import ScheduleParams
from .channel_core import LISTEN, TRANSMIT, ChannelError, HalfDuplexRelayChannel, InputDistribution
from .info_metrics import mode_rates, rate_breakdown
from .optim import worker_count

CHUNK = 4096
DEFAULT_BUDGET = 1 << 27

# stream roles for SeedSequence spawn keys
_MSG, _X3, _X2, _PART, _LISTEN_CB, _TRANSMIT_CB = range(6)
_CLOUD, _SAT, _FWD, _FRESH = range(10, 14)

BLOCK_MARKOV_STEPS = ("relay_v", "dest_ws", "dest_u", "dest_v_resolve")
FLOW_STEPS = ("relay", "dest_slot1", "dest_forward", "dest_slot2")


class CodebookBudgetError(ChannelError):
    """A codebook table that must be materialized exceeds the entry budget."""


def codebook_size(n: int, rate: float) -> int:
    """``ceil(2^(n R))`` with a guard against float noise at integer exponents."""
    x = n * rate
    if abs(x - round(x)) < 1e-9:
        return 1 << int(round(x))
    return int(math.ceil(2.0 ** x))


@dataclass(frozen=True)
class CodeParams:
    n: int
    B: int
    R1: float
    R2: float
    R3: float
    R4: float
    epsilon: float = 0.1
    seed: int = 0
    deterministic_schedule: bool = False
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length n must be at least 1")
        if self.B < 2:
            raise ValueError("need at least B = 2 blocks")
        for name in ("R1", "R2", "R3", "R4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.deterministic_schedule and self.R4 > 0:
            raise ValueError("a fixed schedule carries no index: R4 must be 0")

    @property
    def R0(self) -> float:
        return self.R3 + self.R4

    @property
    def rate(self) -> float:
        return self.R1 + self.R2

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        """Codebook sizes ``(M1, M2, M3, M4)`` for ``u``, ``v``, ``w`` and ``s``."""
        return tuple(codebook_size(self.n, r) for r in (self.R1, self.R2, self.R3, self.R4))

    def config_hash(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _draw(rng: np.random.Generator, probs: np.ndarray, count: int) -> np.ndarray:
    """``count`` rows drawn with a per-coordinate law ``probs`` of shape ``(m, k)``.
    Zero-probability symbols are never drawn."""
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=-1)
    cdf[:, -1] = np.inf
    u = rng.random((count, probs.shape[0]), dtype=np.float32)
    return (u[..., None] >= cdf[None, :, :-1]).sum(axis=-1).astype(np.int16)


def _draw_iid(rng: np.random.Generator, p: np.ndarray, count: int, m: int) -> np.ndarray:
    cdf = np.cumsum(np.asarray(p, dtype=np.float64))[:-1]
    u = rng.random((count, m), dtype=np.float32)
    out = np.zeros((count, m), dtype=np.int16)
    for c in cdf:           # alphabets are small, so a few comparisons beat searchsorted
        out += u >= c
    return out


# --- typicality ----------------------------------------------------------------


def typicality_mask(tuples: np.ndarray, reference: np.ndarray, epsilon: float) -> np.ndarray:
    """Row-wise strong typicality of joint-symbol indices.

    ``tuples`` has shape ``(K, m)`` with entries indexing ``reference.ravel()``.
    A row passes when every empirical frequency is within ``epsilon`` of the
    reference and no zero-probability tuple occurs.  Rows of length 0 pass.
    """
    tuples = np.atleast_2d(tuples)
    k, m = tuples.shape
    ref = np.asarray(reference, dtype=np.float64).ravel()
    a = ref.size
    if m == 0:
        return np.ones(k, dtype=bool)
    ok = np.ones(k, dtype=bool)
    zero = ref <= 0
    if zero.any():
        # support check first: it is cheap and rejects most impostors
        ok = ~zero[tuples].any(axis=1)
    live = np.flatnonzero(ok)
    if live.size == 0:
        return ok
    sub = tuples[live].astype(np.int64)
    flat = (sub + (np.arange(live.size, dtype=np.int64) * a)[:, None]).ravel()
    counts = np.bincount(flat, minlength=live.size * a).reshape(live.size, a)
    ok[live] = np.all(np.abs(counts / m - ref) <= epsilon + 1e-12, axis=1)
    return ok


def typical_set_test(sequences, reference, epsilon: float) -> bool:
    """True iff the aligned symbol sequences are jointly ``epsilon``-typical
    with respect to the joint pmf ``reference`` (one axis per sequence)."""
    seqs = [np.asarray(s, dtype=np.int64).ravel() for s in sequences]
    if len({len(s) for s in seqs}) > 1:
        raise ValueError(f"sequence lengths differ: {[len(s) for s in seqs]}")
    reference = np.asarray(reference, dtype=np.float64)
    if reference.ndim != len(seqs):
        raise ValueError("reference needs one axis per sequence")
    idx = np.ravel_multi_index(tuple(seqs), reference.shape) if seqs[0].size else seqs[0]
    return bool(typicality_mask(idx[None, :], reference, epsilon)[0])


def _unique_decode(truth: int, size: int, rows, test) -> tuple[bool, int]:
    """Apply the unique-typicality rule with early exit.

    ``rows(lo, hi)`` yields candidate rows for indices ``lo..hi-1`` and
    ``test(rows)`` returns their typicality mask.  Returns ``(success,
    candidates_seen)`` where success means ``truth`` is the only typical
    index.
    """
    if not test(rows(truth, truth + 1))[0]:
        return False, 1
    seen = 1
    for lo in range(0, size, CHUNK):
        hi = min(lo + CHUNK, size)
        mask = test(rows(lo, hi))
        if lo <= truth < hi:
            mask[truth - lo] = False
        seen += hi - lo
        if mask.any():
            return False, seen
    return True, seen


def _unique_decode_subset(truth: int, members: np.ndarray, rows_for, test) -> bool:
    """Unique-typicality rule over an explicit candidate list ``members``."""
    if truth not in members:
        return False
    if not test(rows_for(np.array([truth])))[0]:
        return False
    others = members[members != truth]
    for lo in range(0, len(others), CHUNK):
        if test(rows_for(others[lo:lo + CHUNK])).any():
            return False
    return True


# --- the layered block Markov code --------------------------------------------


def fixed_schedule(n: int, alpha: float) -> np.ndarray:
    """``floor(alpha n)`` listen slots followed by transmit slots."""
    x3 = np.full(n, TRANSMIT, dtype=np.int16)
    x3[: int(math.floor(alpha * n + 1e-12))] = LISTEN
    return x3


class Codebook:
    """One draw of the random code for a single trial.

    The schedule, relay codewords and partition are materialized; source
    codeword parts are produced lazily per ``(w, s)`` in chunks of
    ``CHUNK`` indices, each chunk from its own keyed random stream.
    """

    def __init__(self, d: InputDistribution, p: CodeParams, ch: HalfDuplexRelayChannel, trial: int = 0):
        if d.shape != ch.input_shape:
            raise ChannelError(f"input shape {d.shape} does not match channel {ch.input_shape}")
        self.params, self.trial = p, trial
        n = p.n
        self.M1, self.M2, self.M3, self.M4 = p.sizes
        eager = self.M3 * self.M4 * n + self.M4 * n + self.M2
        if eager > p.budget:
            raise CodebookBudgetError(
                f"codebook needs {eager} materialized entries (M1={self.M1}, M2={self.M2}, "
                f"M3={self.M3}, M4={self.M4}, n={n}) > budget {p.budget}"
            )
        self.p_listen = d.p_listen
        self.listen_x1 = d.listen_x1()
        self.transmit_x1x2 = d.transmit_x1x2()
        self.quiet = ch.quiet_index
        seed = p.seed

        if p.deterministic_schedule:
            self.x3_sequences = fixed_schedule(n, self.p_listen)[None, :]
        else:
            p_x3 = np.array([self.p_listen, 1.0 - self.p_listen])
            self.x3_sequences = _draw_iid(_rng(seed, trial, _X3), p_x3, self.M4, n)

        p_x2_t = self.transmit_x1x2.sum(axis=0)
        self.x2_sequences = np.empty((self.M3, self.M4, n), dtype=np.int16)
        for s in range(self.M4):
            listen = self.x3_sequences[s] == LISTEN
            rows = _draw_iid(_rng(seed, trial, _X2, s), p_x2_t, self.M3, n)
            rows[:, listen] = self.quiet
            self.x2_sequences[:, s, :] = rows
        n_cells = self.M3 * self.M4
        self.partition = _rng(seed, trial, _PART).integers(0, n_cells, size=self.M2)
        order = np.argsort(self.partition, kind="stable")
        bounds = np.searchsorted(self.partition[order], np.arange(n_cells + 1))
        self._members = (order, bounds)

        # p(x1 | x2, t) rows, uniform where x2 has no mass (never drawn)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = self.transmit_x1x2 / p_x2_t[None, :]
        cond[:, p_x2_t <= 0] = 1.0 / cond.shape[0]
        self._x1_given_x2 = cond.T
        self._cache: dict = {}

    # partition ------------------------------------------------------------
    def cell(self, v: int) -> tuple[int, int]:
        c = int(self.partition[v])
        return c // self.M4, c % self.M4

    def members(self, w: int, s: int) -> np.ndarray:
        order, bounds = self._members
        c = w * self.M4 + s
        return np.sort(order[bounds[c]:bounds[c + 1]])

    # coordinates ----------------------------------------------------------
    def listen_coords(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.x3_sequences[s] == LISTEN)

    def transmit_coords(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.x3_sequences[s] == TRANSMIT)

    # lazily generated source parts ----------------------------------------
    def _chunk(self, role: int, w: int, s: int, c: int, size: int) -> np.ndarray:
        key = (role, w, s, c)
        block = self._cache.get(key)
        if block is None:
            if len(self._cache) >= 8:
                self._cache.pop(next(iter(self._cache)))
            block = self._cache[key] = self._make_chunk(role, w, s, c, size)
        return block

    def _make_chunk(self, role: int, w: int, s: int, c: int, size: int) -> np.ndarray:
        lo = c * CHUNK
        count = min(CHUNK, size - lo)
        rng = _rng(self.params.seed, self.trial, role, w, s, c)
        if role == _LISTEN_CB:
            m = len(self.listen_coords(s))
            return _draw_iid(rng, self.listen_x1, count, m)
        coords = self.transmit_coords(s)
        x2 = self.x2_sequences[w, s, coords]
        return _draw(rng, self._x1_given_x2[x2], count)

    def _rows(self, role: int, size: int, w: int, s: int, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        chunks = idx // CHUNK
        out = None
        for c in np.unique(chunks):
            block = self._chunk(role, w, s, int(c), size)
            sel = chunks == c
            part = block[idx[sel] - c * CHUNK]
            if out is None:
                out = np.empty((len(idx), block.shape[1]), dtype=np.int16)
            out[sel] = part
        return out

    def x1_listen(self, w: int, s: int, v) -> np.ndarray:
        """Listen-coordinate parts ``x1(v | w, s)`` on ``B_n(s)``, one row per ``v``."""
        return self._rows(_LISTEN_CB, self.M2, w, s, np.atleast_1d(v))

    def x1_transmit(self, w: int, s: int, u) -> np.ndarray:
        """Transmit-coordinate parts ``x1(u | w, s)`` on ``A_n(s)``, one row per ``u``."""
        return self._rows(_TRANSMIT_CB, self.M1, w, s, np.atleast_1d(u))

    def codeword(self, u: int, v: int, w: int, s: int) -> np.ndarray:
        """Full source sequence ``x1(u, v | w, s)``."""
        x = np.empty(self.params.n, dtype=np.int16)
        x[self.listen_coords(s)] = self.x1_listen(w, s, v)[0]
        x[self.transmit_coords(s)] = self.x1_transmit(w, s, u)[0]
        return x


def generate_codebook(d: InputDistribution, p: CodeParams, ch: HalfDuplexRelayChannel, trial: int = 0) -> Codebook:
    return Codebook(d, p, ch, trial)


class _References:
    """Joint pmfs used by the typicality decoders."""

    def __init__(self, d: InputDistribution, ch: HalfDuplexRelayChannel):
        a = d.listen_x1()
        b = d.transmit_x1x2()
        self.ny, self.ny1 = len(ch.y), len(ch.y1)
        self.nx2 = len(ch.x2)
        self.x1_y1_l = a[:, None] * ch.bc.relay_marginal
        self.x1_y_l = a[:, None] * ch.bc.destination_marginal
        self.x1x2_y_t = b[:, :, None] * ch.transmit_table
        joint = d.pmf[..., None, None] * ch.composed.table
        self.x2x3_y = joint.sum(axis=(0, 4))
        flat = ch.composed.table.reshape(ch.composed.table.shape[:3] + (-1,))
        cdf = np.cumsum(flat, axis=-1)
        cdf[..., -1] = np.inf
        self.cdf = cdf


def _transmit_block(ref: _References, rng, x1, x2, x3):
    rows = ref.cdf[x1, x2, x3]
    u = rng.random(len(x1))
    idx = (u[:, None] >= rows[:, :-1]).sum(axis=1)
    return idx // ref.ny1, idx % ref.ny1


def relay_decode(cb: Codebook, ref: _References, y1: np.ndarray, w: int, s: int, truth: int, eps: float) -> bool:
    """Step 1: unique ``v`` with ``(x1(v|w,s), y1)`` typical on ``B_n(s)``."""
    coords = cb.listen_coords(s)
    obs = y1[coords].astype(np.int64)

    def test(rows):
        return typicality_mask(rows.astype(np.int64) * ref.ny1 + obs, ref.x1_y1_l, eps)

    return _unique_decode(truth, cb.M2, lambda lo, hi: cb.x1_listen(w, s, np.arange(lo, hi)), test)[0]


def dest_decode_cell(cb: Codebook, ref: _References, y: np.ndarray, truth: tuple[int, int], eps: float) -> bool:
    """Step 2: unique ``(w, s)`` with ``(x2(w,s), x3(s), y)`` typical over the block."""
    x2 = cb.x2_sequences.reshape(cb.M3 * cb.M4, -1).astype(np.int64)
    x3 = np.tile(cb.x3_sequences.astype(np.int64), (cb.M3, 1))
    tuples = (x2 * 2 + x3) * ref.ny + y.astype(np.int64)
    t = truth[0] * cb.M4 + truth[1]
    return _unique_decode(t, cb.M3 * cb.M4, lambda lo, hi: tuples[lo:hi],
                          lambda rows: typicality_mask(rows, ref.x2x3_y, eps))[0]


def dest_decode_u(cb: Codebook, ref: _References, y: np.ndarray, w: int, s: int, truth: int, eps: float) -> bool:
    """Step 3: unique ``u`` with ``(x1(u|w,s), x2(w,s), y)`` typical on ``A_n(s)``."""
    coords = cb.transmit_coords(s)
    x2 = cb.x2_sequences[w, s, coords].astype(np.int64)
    obs = x2 * ref.ny + y[coords].astype(np.int64)
    stride = ref.nx2 * ref.ny

    def test(rows):
        return typicality_mask(rows.astype(np.int64) * stride + obs, ref.x1x2_y_t, eps)

    return _unique_decode(truth, cb.M1, lambda lo, hi: cb.x1_transmit(w, s, np.arange(lo, hi)), test)[0]


def dest_resolve_v(cb: Codebook, ref: _References, y_prev: np.ndarray, prev_cell: tuple[int, int],
                   cell: tuple[int, int], truth: int, eps: float) -> bool:
    """Step 4: the unique member of bin ``S_{w,s}`` in the ambiguity set of ``y_prev``."""
    w0, s0 = prev_cell
    coords = cb.listen_coords(s0)
    obs = y_prev[coords].astype(np.int64)

    def test(rows):
        return typicality_mask(rows.astype(np.int64) * ref.ny + obs, ref.x1_y_l, eps)

    return _unique_decode_subset(truth, cb.members(*cell), lambda v: cb.x1_listen(w0, s0, v), test)


@dataclass
class SimReport:
    scheme: str
    trials: int
    block_errors: int
    step_errors: dict
    n: int
    B: int
    rates: tuple
    nominal_rate: float
    epsilon: float
    seed: int
    config_hash: str = ""

    def __post_init__(self):
        if self.block_errors > self.trials:
            raise ValueError("block_errors cannot exceed trials")

    @property
    def block_error_rate(self) -> float:
        return self.block_errors / self.trials if self.trials else float("nan")

    @property
    def empirical_rate(self) -> float:
        """Delivered bits per channel use, counting the final block's overhead."""
        if self.scheme == "block_markov":
            return self.nominal_rate * (self.B - 1) / self.B
        return self.nominal_rate

    def step_rate(self, step: str) -> float:
        per_trial = self.B - 1 if self.scheme == "block_markov" else 1
        total = self.trials * per_trial
        return self.step_errors[step] / total if total else float("nan")

    def __getattr__(self, name):
        steps = self.__dict__.get("step_errors", {})
        if name in steps:
            return steps[name]
        raise AttributeError(name)

    def csv_fields(self) -> list[str]:
        steps = BLOCK_MARKOV_STEPS if self.scheme == "block_markov" else FLOW_STEPS
        return csv_header(self.scheme, len(self.rates), steps)

    def csv_row(self) -> list:
        steps = BLOCK_MARKOV_STEPS if self.scheme == "block_markov" else FLOW_STEPS
        rate = self.block_error_rate
        return [self.config_hash, self.scheme, self.n, self.B, *[_fmt(r) for r in self.rates],
                self.epsilon, self.seed, self.trials, *[self.step_errors[s] for s in steps],
                self.block_errors, _fmt(rate) if self.trials else "", _fmt(self.empirical_rate)]


def csv_header(scheme: str, n_rates: int, steps=None) -> list[str]:
    steps = steps or (BLOCK_MARKOV_STEPS if scheme == "block_markov" else FLOW_STEPS)
    names = ["R1", "R2", "R3", "R4"] if scheme == "block_markov" else ["R_dest", "R_relay", "R_fresh"]
    return ["config_hash", "scheme", "n", "B", *names[:n_rates], "epsilon", "seed", "trials",
            *steps, "block_errors", "block_error_rate", "empirical_rate"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _block_markov_trial(ch, d, p: CodeParams, ref: _References, trial: int, genie: bool, want_trace: bool):
    cb = Codebook(d, p, ch, trial)
    rng = _rng(p.seed, trial, _MSG)
    B, eps = p.B, p.epsilon
    u = rng.integers(0, cb.M1, size=B)
    v = rng.integers(0, cb.M2, size=B)
    u[-1] = 0
    v[-1] = 0
    errs = dict.fromkeys(BLOCK_MARKOV_STEPS, 0)
    u_ok = np.zeros(B - 1, dtype=bool)
    v_ok = np.zeros(B - 1, dtype=bool)
    trace = []

    v_prev = 0          # v_0, known to everyone
    relay_prev = 0      # the relay's estimate of v_{i-1}
    dest_prev_cell = cb.cell(0)
    y_prev = None
    for i in range(B):
        w_src, s_src = cb.cell(v_prev)
        w_rel, s_rel = cb.cell(relay_prev)
        x1 = cb.codeword(int(u[i]), int(v[i]), w_src, s_src)
        x3 = cb.x3_sequences[s_rel]
        x2 = cb.x2_sequences[w_rel, s_rel]
        y, y1 = _transmit_block(ref, rng, x1, x2, x3)

        if i < B - 1:
            ok = genie or relay_decode(cb, ref, y1, w_rel, s_rel, int(v[i]), eps)
            if not ok:
                errs["relay_v"] += 1
            # a failed relay forwards some other index; any wrong index has a uniformly random bin
            relay_next = int(v[i]) if ok else (int(v[i]) + 1) % cb.M2
        else:
            relay_next = 0

        if i == 0:
            cell_hat = dest_prev_cell
        else:
            ok = genie or dest_decode_cell(cb, ref, y, (w_rel, s_rel), eps)
            cell_hat = (w_rel, s_rel) if ok else None
            if cell_hat != (w_src, s_src):
                errs["dest_ws"] += 1
        u_hat = None
        if i < B - 1:
            if cell_hat is not None and (genie or dest_decode_u(cb, ref, y, *cell_hat, int(u[i]), eps)):
                u_hat = int(u[i])
                u_ok[i] = True
            else:
                errs["dest_u"] += 1
        v_hat = None
        if i >= 1:
            if cell_hat is not None and dest_prev_cell is not None and (genie or dest_resolve_v(
                    cb, ref, y_prev, dest_prev_cell, cell_hat, int(v[i - 1]), eps)):
                v_hat = int(v[i - 1])
                v_ok[i - 1] = True
            else:
                errs["dest_v_resolve"] += 1
        if want_trace:
            trace.append({
                "block": i + 1,
                "encoder": (int(u[i]), int(v_prev), w_src, s_src),
                "destination": (u_hat if i < B - 1 else int(u[i]),
                                v_hat if i >= 1 else 0,
                                *(cell_hat if cell_hat is not None else (None, None))),
            })
        v_prev, relay_prev = int(v[i]), relay_next
        dest_prev_cell, y_prev = cell_hat, y

    block_error = not (u_ok.all() and v_ok.all())
    return errs, block_error, trace


def _run_trials(fn, trials: int, workers: int | None):
    nw = worker_count(workers)
    if nw > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(t) for t in range(trials)]


def run_block_markov(ch: HalfDuplexRelayChannel, d: InputDistribution, p: CodeParams, trials: int,
                     workers: int | None = None, genie: bool = False, trace: bool = False):
    """Simulate ``trials`` independent B-block transmissions.

    With ``genie`` every decoding step is forced to the transmitted index,
    which exercises only the index bookkeeping.  With ``trace`` the return
    value is ``(report, traces)`` where each trace lists, per block, the
    encoder's ``(u_i, v_{i-1}, w_i, s_i)`` and the destination's estimates.
    """
    ref = _References(d, ch)
    if trials:
        Codebook(d, p, ch, 0)  # budget check up front
    results = _run_trials(lambda t: _block_markov_trial(ch, d, p, ref, t, genie, trace), trials, workers)
    steps = dict.fromkeys(BLOCK_MARKOV_STEPS, 0)
    block_errors = 0
    for errs, be, _ in results:
        for k in steps:
            steps[k] += errs[k]
        block_errors += int(be)
    M1, M2 = p.sizes[:2]
    report = SimReport(
        scheme="block_markov", trials=trials, block_errors=block_errors, step_errors=steps,
        n=p.n, B=p.B, rates=(p.R1, p.R2, p.R3, p.R4),
        nominal_rate=math.log2(M1 * M2) / p.n, epsilon=p.epsilon, seed=p.seed,
        config_hash=p.config_hash(),
    )
    if trace:
        return report, [r[2] for r in results]
    return report


# --- rate allocation -----------------------------------------------------------


def rate_allocation(d: InputDistribution, ch: HalfDuplexRelayChannel, margin: float):
    """Rates ``(R1, R2, R3, R4)`` meeting the four decoding constraints with slack.

    ``R1 = m p_t I(X1;Y|X2,t)``, ``R0 = m (I(X3;Y) + p_t I(X2;Y|t))`` split
    evenly into ``R3`` and ``R4``, and
    ``R2 = m min{p_l I(X1;Y1|l), p_l I(X1;Y|l) + R0}``.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    b = rate_breakdown(d, ch)
    pl, pt = b.p_listen, b.p_transmit
    r0 = margin * (b.schedule_info + pt * b.r2t)
    r1 = margin * pt * b.r1t
    r2 = margin * min(pl * (b.r1l + b.r2l), pl * b.r1l + r0)
    return r1, max(r2, 0.0), r0 / 2.0, r0 / 2.0


def fixed_schedule_allocation(sp: ScheduleParams, ch: HalfDuplexRelayChannel, margin: float):
    """Rates for the block Markov code with the fixed schedule of ``sp``.

    ``R4 = 0`` and ``R3 = m (1-a) I(X2;Y|t)``.  ``R2`` is ``m`` times the
    unscaled right-hand side ``min{a I(X1;Y1|l), a I(X1;Y|l) + (1-a) I(X2;Y|t)}``,
    which still leaves every constraint slack and makes ``R1 + R2`` equal
    ``m`` times the fixed-schedule rate exactly.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    r1l, r1t, r2l, r2t = mode_rates(sp.listen_dist, sp.transmit_dist, ch)
    a = sp.alpha
    r1 = margin * (1 - a) * r1t
    r2 = margin * min(a * (r1l + r2l), a * r1l + (1 - a) * r2t)
    return r1, max(r2, 0.0), margin * (1 - a) * r2t, 0.0


def check_constraints(d: InputDistribution, ch: HalfDuplexRelayChannel, rates) -> dict:
    """Slack of each decoding constraint (positive means satisfied strictly)."""
    R1, R2, R3, R4 = rates
    b = rate_breakdown(d, ch)
    pl, pt = b.p_listen, b.p_transmit
    R0 = R3 + R4
    return {
        "relay": pl * (b.r1l + b.r2l) - R2,
        "bin": b.schedule_info + pt * b.r2t - R0,
        "source": pt * b.r1t - R1,
        "resolve": pl * b.r1l + R0 - R2,
    }


# --- flow-oriented two-slot scheme ----------------------------------------------


@dataclass(frozen=True)
class FlowRates:
    dest: float      # source -> destination while the relay listens
    relay: float     # source -> relay while listening, forwarded afterwards
    fresh: float     # source -> destination while the relay transmits
    beta: float      # satellite share of the superposition code

    @property
    def total(self) -> float:
        return self.dest + self.relay + self.fresh


def flow_rates(sp: ScheduleParams, ch: HalfDuplexRelayChannel, margin: float, beta: float | None = None) -> FlowRates:
    r1l, r1t, r2l, r2t = mode_rates(sp.listen_dist, sp.transmit_dist, ch)
    a = sp.alpha
    rd = margin * a * r1l
    rr = margin * max(min(a * r2l, (1 - a) * r2t), 0.0)
    rs = margin * (1 - a) * r1t
    if beta is None:
        beta = _balanced_beta(rd, rr, r1l, r1l + r2l)
    return FlowRates(rd, rr, rs, beta)


def _balanced_beta(rd: float, rr: float, i_dest: float, i_relay: float) -> float:
    """Share that equalizes the load on the cloud (destination) and satellite
    (relay) layers of the time-sharing superposition code."""
    if rr <= 0:
        return 0.0
    if rd <= 0 or i_dest <= 0:
        return 1.0
    return rr * i_dest / (rd * i_relay + rr * i_dest)


def _cloud_law(p_x1: np.ndarray, beta: float):
    """Cloud alphabet ``X1 + {*}``: ``u = x1`` with probability ``1-beta`` (the
    satellite copies it) and ``u = *`` with probability ``beta`` (the
    satellite draws ``x1`` afresh).  Returns ``p(u)`` and ``p(x1 | u)``."""
    k = len(p_x1)
    p_u = np.append((1 - beta) * p_x1, beta)
    sat = np.zeros((k + 1, k))
    sat[:k, :] = np.eye(k)
    sat[k, :] = p_x1
    return p_u, sat


def _flow_trial(ch: HalfDuplexRelayChannel, sp: ScheduleParams, fr: FlowRates, n: int,
                eps: float, seed: int, trial: int, sizes):
    Md, Mr, Ms = sizes
    n1 = int(math.floor(sp.alpha * n + 1e-12))
    n2 = n - n1
    rng = _rng(seed, trial, _MSG)
    md, mr, ms = (int(rng.integers(0, m)) for m in sizes)
    errs = dict.fromkeys(FLOW_STEPS, 0)
    k = len(ch.x1)
    ny, ny1 = len(ch.y), len(ch.y1)

    # slot 1: superposition code over the BC component
    p_u, sat = _cloud_law(sp.listen_dist, fr.beta)
    joint_u_x1 = p_u[:, None] * sat                              # (U, X1)
    w_y1 = ch.bc.relay_marginal
    w_y = ch.bc.destination_marginal
    ref_u_y = joint_u_x1 @ w_y                                   # (U, Y)
    ref_u_y1 = joint_u_x1 @ w_y1                                 # (U, Y1)
    ref_u_x1_y1 = joint_u_x1[:, :, None] * w_y1[None, :, :]      # (U, X1, Y1)

    def clouds(lo, hi):
        return _chunked(lambda c: _draw_iid(_rng(seed, trial, _CLOUD, c), p_u, _csize(c, Md), n1), lo, hi)

    def satellites(cloud, lo, hi):
        rows = sat[clouds(cloud, cloud + 1)[0]]
        return _chunked(lambda c: _draw(_rng(seed, trial, _SAT, cloud, c), rows, _csize(c, Mr)), lo, hi)

    u_true = clouds(md, md + 1)[0]
    x1_s1 = satellites(md, mr, mr + 1)[0]
    lt = ch.listen_table.reshape(k, -1)
    cdf = np.cumsum(lt, axis=1)
    cdf[:, -1] = np.inf
    idx = (rng.random(n1)[:, None] >= cdf[x1_s1][:, :-1]).sum(axis=1)
    y_s1, y1_s1 = idx // ny1, idx % ny1

    dest_ok = _unique_decode(md, Md, clouds,
                             lambda r: typicality_mask(r.astype(np.int64) * ny + y_s1, ref_u_y, eps))[0]
    if not dest_ok:
        errs["dest_slot1"] += 1
    relay_ok = _unique_decode(md, Md, clouds,
                              lambda r: typicality_mask(r.astype(np.int64) * ny1 + y1_s1, ref_u_y1, eps))[0]
    if relay_ok:
        relay_ok = _unique_decode(
            mr, Mr, lambda lo, hi: satellites(md, lo, hi),
            lambda r: typicality_mask((u_true.astype(np.int64) * k + r) * ny1 + y1_s1, ref_u_x1_y1, eps),
        )[0]
    if not relay_ok:
        errs["relay"] += 1
    mr_relay = mr if relay_ok else (mr + 1) % Mr

    # slot 2: MA code, relay forwards its flow while the source adds a fresh one
    b = sp.transmit_dist
    p_x2 = b.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        x1_given_x2 = (b / p_x2[None, :]).T
    x1_given_x2[p_x2 <= 0] = 1.0 / k

    def relay_words(lo, hi):
        return _chunked(lambda c: _draw_iid(_rng(seed, trial, _FWD, c), p_x2, _csize(c, Mr), n2), lo, hi)

    def fresh_words(x2_row, lo, hi):
        rows = x1_given_x2[x2_row]
        return _chunked(lambda c: _draw(_rng(seed, trial, _FRESH, mr, c), rows, _csize(c, Ms)), lo, hi)

    x2_sent = relay_words(mr_relay, mr_relay + 1)[0]
    x2_src = relay_words(mr, mr + 1)[0]
    x1_s2 = fresh_words(x2_src, ms, ms + 1)[0]
    tt = ch.transmit_table
    cdf2 = np.cumsum(tt, axis=2)
    cdf2[..., -1] = np.inf
    y_s2 = (rng.random(n2)[:, None] >= cdf2[x1_s2, x2_sent][:, :-1]).sum(axis=1)

    ref_x2_y = (b[:, :, None] * tt).sum(axis=0)
    ref_x1x2_y = b[:, :, None] * tt
    fwd_ok = relay_ok and _unique_decode(
        mr, Mr, relay_words, lambda r: typicality_mask(r.astype(np.int64) * ny + y_s2, ref_x2_y, eps))[0]
    if not fwd_ok:
        errs["dest_forward"] += 1
    fresh_ok = fwd_ok and _unique_decode(
        ms, Ms, lambda lo, hi: fresh_words(x2_src, lo, hi),
        lambda r: typicality_mask((r.astype(np.int64) * len(ch.x2) + x2_src) * ny + y_s2, ref_x1x2_y, eps),
    )[0]
    if not fresh_ok:
        errs["dest_slot2"] += 1
    return errs, not (dest_ok and fwd_ok and fresh_ok)


def _csize(c: int, total: int) -> int:
    return min(CHUNK, total - c * CHUNK)


def _chunked(make, lo: int, hi: int) -> np.ndarray:
    parts = []
    for c in range(lo // CHUNK, (hi - 1) // CHUNK + 1):
        block = make(c)
        a = max(lo - c * CHUNK, 0)
        b = min(hi - c * CHUNK, block.shape[0])
        parts.append(block[a:b])
    return np.concatenate(parts, axis=0)


def run_flow_oriented(ch: HalfDuplexRelayChannel, sp: ScheduleParams, margin: float, n: int, trials: int,
                      seed: int = 0, epsilon: float = 0.1, beta: float | None = None,
                      workers: int | None = None) -> SimReport:
    """Two-slot scheme: a superposition BC code for ``floor(alpha n)`` uses, then
    an MA code; each slot is decoded at its end with no state across frames."""
    from .channel_core import check_physically_degraded

    if not check_physically_degraded(ch.bc).degraded:
        raise ChannelError("bc not degraded")
    fr = flow_rates(sp, ch, margin, beta)
    sizes = tuple(codebook_size(n, r) for r in (fr.dest, fr.relay, fr.fresh))
    results = _run_trials(lambda t: _flow_trial(ch, sp, fr, n, epsilon, seed, t, sizes), trials, workers)
    steps = dict.fromkeys(FLOW_STEPS, 0)
    block_errors = 0
    for errs, be in results:
        for k2 in steps:
            steps[k2] += errs[k2]
        block_errors += int(be)
    blob = json.dumps({"alpha": sp.alpha, "margin": margin, "n": n, "seed": seed, "eps": epsilon,
                       "beta": fr.beta}, sort_keys=True).encode()
    return SimReport(
        scheme="flow", trials=trials, block_errors=block_errors, step_errors=steps, n=n, B=1,
        rates=(fr.dest, fr.relay, fr.fresh), nominal_rate=math.log2(sizes[0] * sizes[1] * sizes[2]) / n,
        epsilon=epsilon, seed=seed, config_hash=hashlib.sha256(blob).hexdigest()[:12],
    )
