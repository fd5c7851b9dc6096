import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hkdelay import (
    DelayKind,
    InfluenceFunction,
    InitialDatum,
    InvalidConfig,
    InvalidDatum,
    RowSumContract,
    SystemConfig,
    WeightMatrix,
    WeightScheme,
    check_icass,
    eval_weights,
    psi_floor,
    weights_from_states,
)
from hkdelay.model import config_from_dict, datum_from_dict

from conftest import make_config


class FrozenHistory:
    """Constant-in-time history for weight/RHS evaluation."""

    def __init__(self, state):
        self.state = np.asarray(state, dtype=float)
        self.t_start = -1e9
        self.t_end = 1e9

    def sample(self, t):
        return self.state


# ---------------------------------------------------------------------------
# influence functions and psi_floor

def test_constant_influence_floor_is_c():
    psi = InfluenceFunction.constant(0.7)
    for d in (0.0, 0.5, 10.0):
        assert psi_floor(psi, d) == 0.7


def test_algebraic_decay_values_and_floor():
    psi = InfluenceFunction.algebraic_decay(1.0)
    assert psi(0.0) == 1.0
    assert psi(1.0) == pytest.approx(0.5, abs=1e-15)
    # monotone decreasing, so the floor sits at the right endpoint
    assert psi_floor(psi, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_table_floor_finds_interior_dip():
    samples = [(0.0, 1.0), (1.0, 0.3), (2.0, 0.8), (3.0, 0.9)]
    psi = InfluenceFunction.table(samples)
    # oracle: dense scan of the piecewise-linear interpolant; the scan can
    # miss a knot by up to half its spacing, slopes here are below 1
    for d in (0.5, 1.0, 1.7, 2.5, 4.0):
        grid = np.linspace(0.0, d, 20001)
        scan_min = float(np.min(psi(grid)))
        assert psi_floor(psi, d) <= scan_min + 1e-12
        assert psi_floor(psi, d) >= scan_min - d / 20000.0
    assert psi_floor(psi, 2.0) == pytest.approx(0.3, abs=1e-15)


def test_table_extends_constant_beyond_last_knot():
    psi = InfluenceFunction.table([(0.0, 1.0), (1.0, 0.5)])
    assert psi(5.0) == 0.5


@given(
    gamma=st.floats(min_value=0.0, max_value=5.0),
    d1=st.floats(min_value=0.0, max_value=20.0),
    d2=st.floats(min_value=0.0, max_value=20.0),
)
def test_psi_floor_nonincreasing_and_anchored(gamma, d1, d2):
    psi = InfluenceFunction.algebraic_decay(gamma)
    lo, hi = sorted((d1, d2))
    assert psi_floor(psi, hi) <= psi_floor(psi, lo) + 1e-15
    assert psi_floor(psi, 0.0) == psi(0.0)


@given(s=st.floats(min_value=0.0, max_value=1e6))
def test_influence_range(s):
    for psi in (
        InfluenceFunction.constant(0.4),
        InfluenceFunction.algebraic_decay(0.8),
        InfluenceFunction.table([(0.0, 0.9), (2.0, 0.2), (5.0, 1.0)]),
    ):
        v = psi(s)
        assert 0.0 < v <= 1.0


def test_influence_validation():
    with pytest.raises(InvalidConfig):
        InfluenceFunction.constant(0.0)
    with pytest.raises(InvalidConfig):
        InfluenceFunction.constant(1.5)
    with pytest.raises(InvalidConfig):
        InfluenceFunction.algebraic_decay(-1.0)
    with pytest.raises(InvalidConfig):
        InfluenceFunction.table([(0.5, 1.0), (1.0, 0.5)])  # grid must start at 0
    with pytest.raises(InvalidConfig):
        InfluenceFunction.table([(0.0, 1.0), (1.0, 0.0)])  # psi must stay positive


# ---------------------------------------------------------------------------
# weight evaluation

def test_two_agents_normalized_weights_are_one():
    config = make_config(n_agents=2, weight_scheme=WeightScheme.NORMALIZED)
    hist = FrozenHistory([[0.0], [7.3]])
    w = eval_weights(config, hist, 1.0)
    assert w.entries[0, 1] == 1.0
    assert w.entries[1, 0] == 1.0
    assert w.row_sum_contract is RowSumContract.EXACTLY_ONE


def test_three_agents_classical_constant_influence():
    config = make_config(
        n_agents=3,
        weight_scheme=WeightScheme.CLASSICAL_SCALED,
        influence=InfluenceFunction.constant(1.0),
    )
    hist = FrozenHistory([[0.0], [1.0], [5.0]])
    w = eval_weights(config, hist, 0.7)
    off = w.entries[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.5, atol=0.0)
    assert np.allclose(w.row_sums(), 1.0, atol=1e-15)
    assert w.row_sum_contract is RowSumContract.AT_MOST_ONE


def test_three_agents_normalized_matches_scalar_evaluation():
    # independent scalar evaluation of psi(s) = 1/(1+s^2) at fixed positions
    config = make_config(n_agents=3, dim=1, tau=0.5)
    pos = np.array([[0.0], [1.0], [3.0]])
    hist = FrozenHistory(pos)
    got = eval_weights(config, hist, 2.0).entries

    def psi(s):
        return 1.0 / (1.0 + s * s)

    for i in range(3):
        vals = {j: psi(abs(pos[j, 0] - pos[i, 0])) for j in range(3) if j != i}
        tot = sum(vals.values())
        for j, v in vals.items():
            assert got[i, j] == pytest.approx(v / tot, abs=1e-15)
    assert np.allclose(got.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=8),
    d=st.integers(min_value=1, max_value=3),
    kind=st.sampled_from(list(DelayKind)),
    scheme=st.sampled_from(list(WeightScheme)),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_row_sum_contract_random_states(n, d, kind, scheme, seed):
    rng = np.random.default_rng(seed)
    config = make_config(n_agents=n, dim=d, delay_kind=kind, weight_scheme=scheme)
    x_now = rng.normal(size=(n, d))
    x_del = rng.normal(size=(n, d))
    w = weights_from_states(config, x_now, x_del)
    sums = w.sum(axis=1)
    assert np.all(np.diagonal(w) == 0.0)
    if scheme is WeightScheme.NORMALIZED:
        assert np.all(np.abs(sums - 1.0) <= 1e-12)
    else:
        assert np.all(sums <= 1.0 + 1e-12)


def test_normalized_weights_scale_invariant(rng):
    n, d = 5, 2
    x_now = rng.normal(size=(n, d))
    x_del = rng.normal(size=(n, d))
    for c in (0.013, 0.4, 1.0):
        base = make_config(n_agents=n, dim=d, influence=InfluenceFunction.constant(1.0))
        scaled = make_config(n_agents=n, dim=d, influence=InfluenceFunction.constant(c))
        w1 = weights_from_states(base, x_now, x_del)
        w2 = weights_from_states(scaled, x_now, x_del)
        assert np.all(np.abs(w1 - w2) <= 1e-12)


def test_classical_reaction_weights_symmetric_exactly(rng):
    config = make_config(
        n_agents=6,
        dim=3,
        delay_kind=DelayKind.REACTION,
        weight_scheme=WeightScheme.CLASSICAL_SCALED,
    )
    x_del = rng.normal(size=(6, 3))
    w = weights_from_states(config, None, x_del)
    assert np.array_equal(w, w.T)


def test_weight_matrix_contract_enforced():
    bad = np.array([[0.0, 0.6, 0.6], [0.3, 0.0, 0.3], [0.3, 0.3, 0.0]])
    with pytest.raises(InvalidConfig):
        WeightMatrix(bad, RowSumContract.AT_MOST_ONE)
    with pytest.raises(InvalidConfig):
        WeightMatrix(np.eye(3), RowSumContract.AT_MOST_ONE)  # nonzero diagonal


# ---------------------------------------------------------------------------
# initial data

def test_icass_constant_datum_trivially_satisfied():
    config = make_config(tau=1.0)
    datum = InitialDatum.constant([[0.0], [1.0], [2.0]])
    rep = check_icass(datum, config)
    assert rep.satisfied and rep.max_slope == 0.0
    assert rep.d_x0 == pytest.approx(2.0)


def test_icass_identical_constant_agents_degenerate():
    config = make_config(n_agents=2, tau=1.0)
    times = [-1.0, -0.5, 0.0]
    vals = [[[3.0], [3.0]]] * 3
    rep = check_icass(InitialDatum.sampled(times, vals), config)
    assert rep.d_x0 == 0.0
    assert rep.satisfied  # slope is zero here


def test_icass_two_agent_linear_ramp():
    # agent 1 fixed at 0, agent 2 ramps 1 -> 2 on [-1, 0]
    config = make_config(n_agents=2, tau=1.0)
    datum = InitialDatum.sampled([-1.0, 0.0], [[[0.0], [1.0]], [[0.0], [2.0]]])
    rep = check_icass(datum, config)
    assert rep.d_x0 == pytest.approx(2.0)
    assert rep.max_slope == pytest.approx(1.0)
    assert rep.satisfied


def test_icass_violated_by_steep_ramp():
    config = make_config(n_agents=2, tau=1.0)
    datum = InitialDatum.sampled([-1.0, 0.0], [[[0.0], [0.1]], [[0.0], [0.2]]])
    rep = check_icass(datum, config)  # slope 0.1 vs diameter 0.2: fine
    assert rep.satisfied
    steep = InitialDatum.sampled([-1.0, -0.9, 0.0], [[[0.0], [0.1]], [[0.0], [0.5]], [[0.0], [0.2]]])
    rep = check_icass(steep, config)
    assert rep.max_slope == pytest.approx(4.0)
    assert not rep.satisfied


def test_sampled_datum_validation():
    with pytest.raises(InvalidDatum):
        InitialDatum.sampled([], [])
    with pytest.raises(InvalidDatum):
        InitialDatum.sampled([-1.0, -1.0], [[[0.0]], [[0.0]]])
    with pytest.raises(InvalidDatum):
        InitialDatum.sampled([-1.0, 0.0], [[[np.inf]], [[0.0]]])


def test_datum_interpolates_linearly():
    datum = InitialDatum.sampled([-1.0, 0.0], [[[0.0], [1.0]], [[0.0], [2.0]]])
    assert datum.at(-0.5)[1, 0] == pytest.approx(1.5, abs=1e-15)
    assert np.allclose(datum.slope_at(-0.25)[1], [1.0])


def test_datum_coverage_required():
    config = make_config(n_agents=2, tau=2.0)
    datum = InitialDatum.sampled([-1.0, 0.0], [[[0.0], [1.0]], [[0.0], [2.0]]])
    with pytest.raises(InvalidDatum):
        check_icass(datum, config)


# ---------------------------------------------------------------------------
# config validation and JSON codecs

def test_config_validation():
    psi = InfluenceFunction.constant(1.0)
    with pytest.raises(InvalidConfig):
        SystemConfig(1, 1, 0.5, DelayKind.TRANSMISSION, WeightScheme.NORMALIZED, psi)
    with pytest.raises(InvalidConfig):
        SystemConfig(3, 0, 0.5, DelayKind.TRANSMISSION, WeightScheme.NORMALIZED, psi)
    with pytest.raises(InvalidConfig):
        SystemConfig(3, 1, 0.0, DelayKind.TRANSMISSION, WeightScheme.NORMALIZED, psi)


def test_config_dict_round_trip():
    config = make_config(n_agents=4, dim=2, tau=0.25)
    again = config_from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()


def test_datum_dict_round_trip():
    datum = InitialDatum.sampled([-1.0, -0.25, 0.0], np.zeros((3, 2, 2)) + [[1.0, 2.0], [3.0, 4.0]])
    again = datum_from_dict(datum.to_dict())
    assert np.array_equal(again.times, datum.times)
    assert np.array_equal(again.samples, datum.samples)
    const = InitialDatum.constant([[1.0, 2.0]])
    assert np.array_equal(datum_from_dict(const.to_dict()).values, const.values)
