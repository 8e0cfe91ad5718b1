import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrelay import catalog
from hdrelay.channel_core import (
    LISTEN,
    TRANSMIT,
    Alphabet,
    BroadcastComponent,
    ChannelError,
    ConditionalPmf,
    InputDistribution,
    MultipleAccessComponent,
    channel_from_dict,
    channel_to_dict,
    check_physically_degraded,
    compose_half_duplex,
    distribution_from_dict,
    load_channel,
    make_channel,
    save_channel,
    validate_input_distribution,
)


def test_alphabet_rejects_duplicates_and_empty():
    with pytest.raises(ChannelError):
        Alphabet(["a", "a"])
    with pytest.raises(ChannelError):
        Alphabet([])
    a = Alphabet([0, 1])
    assert a.index("1") == 1 and "0" in a and len(a) == 2
    with pytest.raises(ChannelError):
        a.index("x")


@pytest.mark.parametrize("table, ok", [
    ([[0.5, 0.5], [1.0, 0.0]], True),
    ([[0.5, 0.6], [1.0, 0.0]], False),
    ([[1.5, -0.5], [1.0, 0.0]], False),
])
def test_conditional_pmf_normalization(table, ok):
    if ok:
        assert ConditionalPmf(table, 1).input_shape == (2,)
    else:
        with pytest.raises(ChannelError):
            ConditionalPmf(table, 1)


def test_conditional_pmf_is_immutable():
    p = ConditionalPmf([[0.5, 0.5]], 1)
    with pytest.raises(ValueError):
        p.table[0, 0] = 1.0


def test_composed_transmit_slice_is_ma_on_erasure(bsc_deg):
    ch = bsc_deg
    comp = ch.composed.table
    e = ch.erasure_index
    np.testing.assert_array_equal(comp[:, :, TRANSMIT, :, e], ch.transmit_table)
    others = np.delete(comp[:, :, TRANSMIT], e, axis=-1)
    assert np.all(others == 0)


def test_composed_listen_slice_ignores_relay_input(bsc_deg):
    comp = bsc_deg.composed.table
    np.testing.assert_array_equal(comp[:, 0, LISTEN], comp[:, 1, LISTEN])
    np.testing.assert_array_equal(comp[:, 0, LISTEN], bsc_deg.listen_table)


def test_erasure_with_bc_mass_rejected():
    bc = catalog.degraded_bc_table(catalog.bsc(0.1), catalog.bsc(0.1))
    bc[:, 0, :2] *= 0.99
    bc[:, 0, 2] = 1 - bc[:, :, :].sum(axis=(1, 2)) + bc[:, 0, 2]
    ma = np.full((2, 2, 2), 0.5)
    with pytest.raises(ChannelError, match="erasure symbol has BC mass"):
        make_channel("01", "01", "01", ["0", "1", "e"], bc, ma, quiet="0", erasure="e")


def test_quiet_symbol_must_exist():
    bc = catalog.degraded_bc_table(catalog.bsc(0.1), catalog.bsc(0.1))
    with pytest.raises(ChannelError, match="quiet"):
        make_channel("01", "01", "01", ["0", "1", "e"], bc, np.full((2, 2, 2), 0.5), quiet="z", erasure="e")


def test_alphabet_mismatch_rejected():
    bc = BroadcastComponent(Alphabet("01"), Alphabet("01"), Alphabet("01e"),
                            ConditionalPmf(catalog.degraded_bc_table(catalog.bsc(0.1), catalog.bsc(0.1)), 1))
    ma = MultipleAccessComponent(Alphabet("ab"), Alphabet("01"), Alphabet("01"),
                                 ConditionalPmf(np.full((2, 2, 2), 0.5), 2))
    with pytest.raises(ChannelError, match="alphabet mismatch"):
        compose_half_duplex(bc, ma, "0", "e")


def test_cascade_is_degraded_and_factors_recovered(bsc_deg):
    rep = check_physically_degraded(bsc_deg.bc)
    assert rep.degraded
    np.testing.assert_allclose(rep.p_y_given_y1.table[:2], catalog.bsc(0.1), atol=1e-9)
    np.testing.assert_allclose(rep.p_y1_given_x1.table[:, :2], catalog.bsc(0.1), atol=1e-9)


def test_independent_outputs_not_degraded():
    # Y = BSC(0.05)(X1) and Y1 = BSC(0.4)(X1), conditionally independent given X1
    wy, wy1 = catalog.bsc(0.05), catalog.bsc(0.4)
    bc = np.zeros((2, 2, 3))
    bc[:, :, :2] = wy[:, :, None] * wy1[:, None, :]
    ch = make_channel("01", "01", "01", ["0", "1", "e"], bc, np.full((2, 2, 2), 0.5), "0", "e")
    rep = check_physically_degraded(ch.bc)
    assert not rep.degraded and rep.p_y_given_y1 is None


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_identity_relay_link_always_degraded(seed):
    rng = np.random.default_rng(seed)
    k = rng.dirichlet(np.ones(3), size=2)
    ch = make_channel("01", "01", "abc", ["0", "1", "e"],
                      catalog.degraded_bc_table(np.eye(2), k), np.full((2, 2, 3), 1 / 3), "0", "e")
    assert check_physically_degraded(ch.bc).degraded


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_random_cascade_factors_within_tolerance(seed):
    rng = np.random.default_rng(seed)
    w1 = rng.dirichlet(np.ones(3), size=2)
    k = rng.dirichlet(np.ones(2), size=3)
    ch = make_channel("01", "01", "01", ["a", "b", "c", "e"],
                      catalog.degraded_bc_table(w1, k), np.full((2, 2, 2), 0.5), "0", "e")
    rep = check_physically_degraded(ch.bc)
    assert rep.degraded
    np.testing.assert_allclose(rep.p_y_given_y1.table[:3], k, atol=1e-9)


def test_validate_input_distribution_cases(bsc_deg):
    ch = bsc_deg
    good = InputDistribution.from_modes(0.5, [0.5, 0.5], np.full((2, 2), 0.25), ch.quiet_index)
    assert validate_input_distribution(good, ch)
    pmf = good.pmf.copy()
    pmf[:, 1, LISTEN] = 0.1 * pmf[:, 0, LISTEN]
    pmf[:, 0, LISTEN] *= 0.9
    assert not validate_input_distribution(InputDistribution(pmf), ch)
    never = InputDistribution.from_modes(0.0, [0.5, 0.5], np.full((2, 2), 0.25), ch.quiet_index)
    assert validate_input_distribution(never, ch)
    with pytest.raises(ChannelError):
        validate_input_distribution(InputDistribution(np.full((3, 2, 2), 1 / 12)), ch)


def test_json_round_trip_bit_exact(tmp_path, bsc_deg):
    path = tmp_path / "ch.json"
    save_channel(bsc_deg, path)
    back = load_channel(path)
    np.testing.assert_array_equal(back.composed.table, bsc_deg.composed.table)
    assert back.quiet == bsc_deg.quiet and back.y1.symbols == bsc_deg.y1.symbols


def test_ingestion_renormalizes_small_drift_with_warning(bsc_deg):
    spec = channel_to_dict(bsc_deg)
    spec["ma"][0][0][0] += 5e-7
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ch = channel_from_dict(spec)
    assert any("renormalizing" in str(w.message) for w in caught)
    np.testing.assert_allclose(ch.transmit_table.sum(axis=2), 1.0, atol=1e-12)


def test_ingestion_rejects_large_drift(bsc_deg):
    spec = channel_to_dict(bsc_deg)
    spec["ma"][0][0][0] += 1e-3
    with pytest.raises(ChannelError, match="field 'ma'"):
        channel_from_dict(spec)


def test_missing_field_named(bsc_deg):
    spec = channel_to_dict(bsc_deg)
    del spec["quiet"]
    with pytest.raises(ChannelError, match="quiet"):
        channel_from_dict(json.loads(json.dumps(spec)))


def test_distribution_shape_checked(bsc_deg):
    with pytest.raises(ChannelError, match="shape"):
        distribution_from_dict({"pmf": [[0.5, 0.5]]}, bsc_deg)


@pytest.mark.parametrize("k", [2, 11, 16])
def test_noiseless_labels_unique(k):
    ch = catalog.noiseless(k)
    assert len(ch.y) == k * k and check_physically_degraded(ch.bc).degraded
