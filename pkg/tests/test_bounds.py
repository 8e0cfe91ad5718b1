import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_oracle_binary, h2

from hdrelay import catalog
from hdrelay.bounds import (
    HalfDuplexObjective,
    ScheduleParams,
    achievable_decode_forward,
    compare_schedules,
    deterministic_schedule_rate,
    evaluate,
    ma_sum_information,
    optimize_bound,
    outer_bound_degraded,
    outer_bound_general,
)
from hdrelay.channel_core import ChannelError, InputDistribution, make_channel
from hdrelay.info_metrics import mode_conditioned_terms
from hdrelay.optim import (
    OptimizerOptions,
    golden_max,
    maximize,
    simplex_grid,
    simplex_grid_size,
)

from conftest import uniform_input


@given(st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_bounds_coincide_on_degraded_channels(seed):
    rng = np.random.default_rng(seed)
    ch = catalog.random_degraded(rng)
    d = catalog.random_input(rng, ch)
    g = outer_bound_general(d, ch)
    assert outer_bound_degraded(d, ch) == pytest.approx(g, abs=1e-9)
    assert achievable_decode_forward(d, ch) == pytest.approx(g, abs=1e-9)


@given(st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_closed_form_objective_matches_information_terms(seed):
    rng = np.random.default_rng(seed)
    ch = catalog.random_degraded(rng)
    d = catalog.random_input(rng, ch)
    for kind in ("general", "degraded", "decode_forward", "deterministic"):
        obj = HalfDuplexObjective(ch, kind)
        assert obj.value(obj.blocks_from(d)) == pytest.approx(evaluate(kind, d, ch), abs=1e-10)


def test_listen_only_reduces_to_direct_link(bsc_deg):
    d = uniform_input(bsc_deg, 1.0)
    # the relay never speaks, so only the source-destination cascade counts
    assert outer_bound_degraded(d, bsc_deg) == pytest.approx(1 - h2(0.18), abs=1e-12)
    assert achievable_decode_forward(d, bsc_deg) == pytest.approx(1 - h2(0.18), abs=1e-12)


def test_transmit_only_is_ma_conditional_rate(bsc_deg):
    d = uniform_input(bsc_deg, 0.0)
    t = mode_conditioned_terms(d, bsc_deg)
    assert outer_bound_degraded(d, bsc_deg) == pytest.approx(t.i_x1_y_given_x2_transmit, abs=1e-12)


def test_ma_sum_information_chain(bsc_deg):
    p = np.full((2, 2), 0.25)
    t = mode_conditioned_terms(uniform_input(bsc_deg, 0.0), bsc_deg)
    assert ma_sum_information(p, bsc_deg) == pytest.approx(
        t.i_x1_y_given_x2_transmit + t.i_x2_y_transmit, abs=1e-12)


def test_deterministic_rate_ignores_schedule_information(bsc_deg):
    sp = ScheduleParams(0.5, np.full(2, 0.5), np.full((2, 2), 0.25))
    d = sp.to_input_distribution(bsc_deg.quiet_index)
    assert deterministic_schedule_rate(sp, bsc_deg) <= achievable_decode_forward(d, bsc_deg) + 1e-12


def test_schedule_params_validated():
    with pytest.raises(ChannelError):
        ScheduleParams(1.2, np.full(2, 0.5), np.full((2, 2), 0.25))
    with pytest.raises(ChannelError):
        ScheduleParams(0.5, np.array([0.7, 0.7]), np.full((2, 2), 0.25))


def test_loud_listening_rejected(bsc_deg):
    pmf = np.full(bsc_deg.input_shape, 1 / 8)
    with pytest.raises(ChannelError, match="quiet"):
        outer_bound_general(InputDistribution(pmf), bsc_deg)


def test_degraded_objective_refuses_non_degraded_bc():
    wy, wy1 = catalog.bsc(0.05), catalog.bsc(0.4)
    bc = np.zeros((2, 2, 3))
    bc[:, :, :2] = wy[:, :, None] * wy1[:, None, :]
    ch = make_channel("01", "01", "01", ["0", "1", "e"], bc, np.full((2, 2, 2), 0.5), "0", "e")
    with pytest.raises(ChannelError):
        optimize_bound(ch, "degraded")
    assert optimize_bound(ch, "general").value > 0


def test_unknown_objective(bsc_deg):
    with pytest.raises(ValueError):
        HalfDuplexObjective(bsc_deg, "cutset")


def test_bsc_deg_optimum_is_transmit_heavy(bsc_deg):
    res = optimize_bound(bsc_deg, "degraded")
    assert res.value == pytest.approx(grid_oracle_binary(bsc_deg.listen_table, bsc_deg.transmit_table), abs=5e-3)
    assert res.value >= 1 - h2(0.18)


def test_fixed_listen_is_respected(bsc_deg):
    res = optimize_bound(bsc_deg, "decode_forward", fixed_listen=0.3)
    assert res.argmax.p_listen == pytest.approx(0.3, abs=1e-12)


def test_deterministic_result_carries_schedule(bsc_deg):
    res = optimize_bound(bsc_deg, "deterministic")
    assert res.schedule is not None
    assert deterministic_schedule_rate(res.schedule, bsc_deg) == pytest.approx(res.value, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_random_schedule_dominates(seed):
    ch = catalog.random_degraded(np.random.default_rng(seed))
    cmp = compare_schedules(ch, objective="degraded")
    assert cmp.gap >= -1e-6
    assert cmp.gap <= 1.0


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("objective", ["degraded", "deterministic"])
def test_optimizer_matches_grid_oracle(seed, objective):
    ch = catalog.random_degraded(np.random.default_rng(100 + seed))
    oracle = grid_oracle_binary(ch.listen_table, ch.transmit_table, objective, m=60)
    got = optimize_bound(ch, objective).value
    # the lattice maximum can only trail the continuous one
    assert got >= oracle - 1e-9
    assert got <= oracle + 5e-3


# --- optimizer plumbing ------------------------------------------------------


@pytest.mark.parametrize("k, m", [(1, 5), (2, 4), (3, 3), (4, 6)])
def test_simplex_grid(k, m):
    g = simplex_grid(k, m)
    assert g.shape == (simplex_grid_size(k, m), k)
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == len(g)
    assert all(tuple(a) < tuple(b) for a, b in zip(g, g[1:]))


def test_golden_max_finds_parabola_peak():
    x, fx = golden_max(lambda t: -(t - 0.3) ** 2)
    assert x == pytest.approx(0.3, abs=1e-6) and fx == pytest.approx(0.0, abs=1e-12)


class _FlatObjective:
    """Constant objective: every point ties, so the tie-break alone decides."""

    block_sizes = (2, 3)

    def parts(self, a, b):
        z = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]))
        return z, z + 1.0, z + 2.0


def test_ties_resolve_to_lexicographically_smallest():
    res = maximize(_FlatObjective(), OptimizerOptions(grid_resolution=4, restarts=3))
    assert res.value == 1.0
    np.testing.assert_array_equal(res.blocks[0], [0.0, 1.0])
    np.testing.assert_array_equal(res.blocks[1], [0.0, 0.0, 1.0])


def test_worker_count_does_not_change_result(bsc_deg):
    a = optimize_bound(bsc_deg, "degraded", OptimizerOptions(workers=1, restarts=4))
    b = optimize_bound(bsc_deg, "degraded", OptimizerOptions(workers=3, restarts=4))
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmax.pmf, b.argmax.pmf)


def test_boundary_schedules_reported(bsc_deg):
    diag = optimize_bound(bsc_deg, "degraded").diagnostics
    assert diag["boundary_always_listen"] == pytest.approx(1 - h2(0.18), abs=1e-9)
    # the XOR transmit link beats the cascade, so the never-listen edge wins here
    assert diag["boundary_never_listen"] == pytest.approx(1 - h2(0.05), abs=1e-9)
    assert not diag["interior_optimum"]


def test_interior_optimum_flagged():
    ch = catalog.erasure_relay()
    diag = optimize_bound(ch, "degraded").diagnostics
    assert diag["interior_optimum"]
