"""Ready-made channels used in examples, tests and the CLI."""

from __future__ import annotations

import numpy as np

from .channel_core import HalfDuplexRelayChannel, make_channel


def bsc(p: float) -> np.ndarray:
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def degraded_bc_table(p_y1_given_x1, p_y_given_y1) -> np.ndarray:
    """``p_l(y, y1 | x1)`` for a cascade, with an extra all-zero erasure column."""
    w1 = np.asarray(p_y1_given_x1, dtype=np.float64)
    k = np.asarray(p_y_given_y1, dtype=np.float64)
    nx1, ny1 = w1.shape
    table = np.zeros((nx1, k.shape[1], ny1 + 1))
    table[:, :, :ny1] = np.einsum("ab,bc->acb", w1, k)
    return table


def binary_labels(k: int) -> list[str]:
    return [str(i) for i in range(k)]


def bsc_deg(p_relay: float = 0.1, p_second: float = 0.1, p_ma: float = 0.05) -> HalfDuplexRelayChannel:
    """Binary cascade BC (BSC into the relay, BSC onward) and XOR-then-BSC MA."""
    bc = degraded_bc_table(bsc(p_relay), bsc(p_second))
    ma = np.zeros((2, 2, 2))
    for x1 in range(2):
        for x2 in range(2):
            ma[x1, x2] = bsc(p_ma)[x1 ^ x2]
    return make_channel(
        ["0", "1"], ["0", "1"], ["0", "1"], ["0", "1", "e"], bc, ma, quiet="0", erasure="e"
    )


def noiseless(k: int = 2) -> HalfDuplexRelayChannel:
    """Noiseless components: the destination sees the pair ``(x1, x2)``.

    While listening the destination sees ``(x1, q)`` and the relay sees ``x1``.
    """
    labels = binary_labels(k)
    sep = "" if k <= 10 else ","   # multi-digit labels need a separator to stay unique
    y = [f"{a}{sep}{b}" for a in labels for b in labels]
    bc = np.zeros((k, k * k, k + 1))
    ma = np.zeros((k, k, k * k))
    for a in range(k):
        bc[a, a * k + 0, a] = 1.0
        for b in range(k):
            ma[a, b, a * k + b] = 1.0
    return make_channel(labels, labels, y, labels + ["e"], bc, ma, quiet="0", erasure="e")


def _stochastic(rng: np.random.Generator, rows: int, cols: int, concentration: float = 1.0):
    return rng.dirichlet(np.full(cols, concentration), size=rows)


def random_degraded(
    rng: np.random.Generator, nx1: int = 2, nx2: int = 2, ny: int = 2, ny1: int = 2,
    quiet_consistent: bool = False,
) -> HalfDuplexRelayChannel:
    """Random physically degraded channel; optionally ``p_t(y|x1,q)`` matches the BC link."""
    w1 = _stochastic(rng, nx1, ny1)
    k = _stochastic(rng, ny1, ny)
    bc = degraded_bc_table(w1, k)
    ma = _stochastic(rng, nx1 * nx2, ny).reshape(nx1, nx2, ny)
    if quiet_consistent:
        ma[:, 0, :] = w1 @ k
    return make_channel(
        binary_labels(nx1), binary_labels(nx2), binary_labels(ny),
        binary_labels(ny1) + ["e"], bc, ma, quiet="0", erasure="e",
    )


def random_fullduplex_compatible(
    rng: np.random.Generator, nx1: int = 2, nx2: int = 2, ny: int = 2, ny1: int = 2,
) -> HalfDuplexRelayChannel:
    """Random degraded channel whose MA component is ``p_l(y1|x1) k(y|y1,x2)``
    with ``k(.|.,q)`` equal to the BC's onward link, so a degraded
    full-duplex realization exists and the quiet symbol is consistent."""
    w1 = _stochastic(rng, nx1, ny1)
    k = _stochastic(rng, nx2 * ny1, ny).reshape(nx2, ny1, ny)
    bc = degraded_bc_table(w1, k[0])
    ma = np.einsum("ab,cbd->acd", w1, k)
    return make_channel(
        binary_labels(nx1), binary_labels(nx2), binary_labels(ny),
        binary_labels(ny1) + ["e"], bc, ma, quiet="0", erasure="e",
    )


def random_input(rng: np.random.Generator, ch: HalfDuplexRelayChannel, p_listen=None):
    from .channel_core import InputDistribution

    nx1, nx2, _ = ch.input_shape
    lam = rng.uniform() if p_listen is None else p_listen
    a = rng.dirichlet(np.ones(nx1))
    b = rng.dirichlet(np.ones(nx1 * nx2)).reshape(nx1, nx2)
    return InputDistribution.from_modes(lam, a, b, ch.quiet_index)


def erasure_relay(
    e_relay: float = 0.2, e_onward: float = 0.3, e_source: float = 0.5, e_forward: float = 0.2,
    k: int = 2,
) -> HalfDuplexRelayChannel:
    """Erasure links with a relay that pays off.

    While listening the relay sees ``x1`` erased with probability ``e_relay``
    and the destination sees the relay's view erased again with probability
    ``e_onward``.  While transmitting the destination sees the pair
    ``(x1, x2)``, each coordinate erased independently (``e_source``,
    ``e_forward``).  Outputs are labelled ``"ab"`` with ``"?"`` for erasure.
    """
    labels = binary_labels(k)
    ext = labels + ["?"]
    y = [a + b for a in ext for b in ext]
    y_index = {lab: i for i, lab in enumerate(y)}
    y1 = ext + ["e"]
    bc = np.zeros((k, len(y), len(y1)))
    ma = np.zeros((k, k, len(y)))
    for a in range(k):
        seen = labels[a] + "?"
        bc[a, y_index[seen], a] = (1 - e_relay) * (1 - e_onward)
        bc[a, y_index["??"], a] = (1 - e_relay) * e_onward
        bc[a, y_index["??"], k] = e_relay
        for b in range(k):
            for ea, pa in ((False, 1 - e_source), (True, e_source)):
                for eb, pb in ((False, 1 - e_forward), (True, e_forward)):
                    lab = ("?" if ea else labels[a]) + ("?" if eb else labels[b])
                    ma[a, b, y_index[lab]] += pa * pb
    return make_channel(labels, labels, y, y1, bc, ma, quiet="0", erasure="e")
