"""Extrinsic information transfer curves, thresholds, and MC oracles."""

import numpy as np
import pytest

from becstop.enumerators import EnsembleSpec
from becstop.exit_analysis import (
    SUCCESS_MI,
    THRESHOLD_WIDTH,
    ExitCurve,
    ThresholdResult,
    compound_outer_exit,
    exit_accumulator,
    exit_feedforward,
    exit_repetition,
    inner_accumulator_curve,
    mc_exit_chain,
    mc_exit_repetition,
    mi_combine,
    threshold,
)


# ---------------------------------------------------------------------------
# closed-form constituent curves
# ---------------------------------------------------------------------------


def test_accumulator_halfway_fixed_point():
    # state erasure solves f = (1/2)(1 - (1-f)/2), so f = 1/3
    i_eu, i_ex = exit_accumulator(0.5, 0.5)
    assert i_eu == pytest.approx(4.0 / 9.0, abs=1e-15)
    assert i_ex == pytest.approx(5.0 / 9.0, abs=1e-15)


def test_accumulator_corners():
    assert exit_accumulator(0.0, 0.0) == (0.0, 0.0)
    assert exit_accumulator(1.0, 1.0) == (1.0, 1.0)
    i_eu, i_ex = exit_accumulator(0.0, 1.0)
    assert i_eu == 1.0  # known outputs pin every state
    assert i_ex == 0.0  # own symbol still needs its input
    i_eu, i_ex = exit_accumulator(1.0, 0.0)
    # slope-one recursion: full state erasure survives
    assert i_eu == 0.0 and i_ex == 0.0


def test_mi_domain_checks():
    with pytest.raises(ValueError):
        exit_accumulator(-0.1, 0.5)
    with pytest.raises(ValueError):
        exit_feedforward(0.5, 1.1)
    with pytest.raises(ValueError):
        exit_repetition(1, 0.5)
    with pytest.raises(ValueError):
        mi_combine([0.5, 2.0])


def test_repetition_combiner():
    assert exit_repetition(3, 0.5) == pytest.approx(0.75)
    assert exit_repetition(2, 0.0) == 0.0
    assert exit_repetition(4, 1.0) == 1.0
    assert mi_combine([0.5, 0.5]) == pytest.approx(0.75)
    assert mi_combine([]) == 0.0


def test_feedforward_is_transposed_accumulator():
    for a in np.linspace(0, 1, 9):
        for b in np.linspace(0, 1, 9):
            eu, ex = exit_feedforward(a, b)
            eu2, ex2 = exit_accumulator(b, a)
            assert ex == pytest.approx(eu2, abs=1e-15)
            assert eu == pytest.approx(ex2, abs=1e-15)


@pytest.mark.parametrize("kind,i_au,i_ax", [
    ("acc", 0.5, 0.5),
    ("acc", 0.3, 0.7),
    ("ff", 0.6, 0.4),
])
def test_closed_form_matches_mc_oracle(kind, i_au, i_ax):
    fn = exit_accumulator if kind == "acc" else exit_feedforward
    want_eu, want_ex = fn(i_au, i_ax)
    got_eu, se_eu, got_ex, se_ex = mc_exit_chain(kind, i_au, i_ax, seed=2)
    assert abs(got_eu - want_eu) <= 3 * se_eu + 2e-4
    assert abs(got_ex - want_ex) <= 3 * se_ex + 2e-4


def test_repetition_matches_mc_oracle():
    want = exit_repetition(3, 0.5)
    got, se = mc_exit_repetition(3, 0.5, trials=200000, seed=1)
    assert abs(got - want) <= 3 * se + 1e-4


def test_mc_oracle_deterministic():
    a = mc_exit_chain("acc", 0.4, 0.6, chains=4, chain_len=800, seed=5)
    b = mc_exit_chain("acc", 0.4, 0.6, chains=4, chain_len=800, seed=5)
    assert a == b


# ---------------------------------------------------------------------------
# compound curves
# ---------------------------------------------------------------------------


def test_outer_curve_single_stage_is_repetition():
    grid = np.linspace(0, 1, 21)
    curve = compound_outer_exit(EnsembleSpec("rma", q=3, L=1), grid)
    for x, v in zip(curve.grid, curve.values):
        assert v == pytest.approx(exit_repetition(3, float(x)), abs=1e-15)
    assert all(curve.converged)
    assert curve.label_out == "i_ex_outer"


def test_outer_curve_monotone_and_bounded():
    grid = np.linspace(0, 1, 41)
    for spec in (EnsembleSpec("rma", q=3, L=2),
                 EnsembleSpec("hcc", q=4, hcc_type=2, q1=1)):
        curve = compound_outer_exit(spec, grid)
        vals = curve.values
        assert np.all(vals >= -1e-12) and np.all(vals <= 1 + 1e-12)
        assert np.all(np.diff(vals) >= -1e-12)
        assert all(curve.converged)


def test_outer_curve_direct_branches_need_channel():
    spec = EnsembleSpec("hcc", q=4, hcc_type=3)
    with pytest.raises(ValueError):
        compound_outer_exit(spec, [0.5])
    curve = compound_outer_exit(spec, [0.0, 0.5, 1.0], p_ch=0.4)
    assert curve.values.shape == (3,)
    fed = compound_outer_exit(spec, [0.5], p_ch=0.2).values[0]
    starved = compound_outer_exit(spec, [0.5], p_ch=0.9).values[0]
    assert fed >= starved


def test_inner_curve_endpoints_and_monotonicity():
    grid = np.linspace(0, 1, 31)
    clear = inner_accumulator_curve(0.0, grid)
    assert np.allclose(clear.values, 1.0)
    # fully erased channel plus free boundaries: states never resolve
    noisy = inner_accumulator_curve(1.0, grid)
    assert np.allclose(noisy.values, 0.0)
    mid = inner_accumulator_curve(0.5, grid)
    assert np.all(np.diff(mid.values) >= -1e-12)
    assert mid.values[-1] == 1.0


def test_exit_curve_validation():
    with pytest.raises(ValueError):
        ExitCurve(grid=np.array([0.0]), values=np.array([1.5]),
                  label_in="a", label_out="b", converged=(True,))


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


def test_threshold_basics_and_ordering():
    t3 = threshold(EnsembleSpec("rma", q=3, L=2))
    assert isinstance(t3, ThresholdResult)
    assert 0.0 < t3.p_star < 1.0
    assert t3.tolerance == THRESHOLD_WIDTH
    assert t3.iterations > 0
    # stronger repetition tolerates more erasure
    t4 = threshold(EnsembleSpec("rma", q=4, L=2))
    assert t4.p_star > t3.p_star
    assert SUCCESS_MI < 1.0


def test_threshold_guards():
    with pytest.raises(NotImplementedError):
        threshold(EnsembleSpec("rma", q=3, L=2, lam="2/3"))
    with pytest.raises(ValueError):
        ThresholdResult(spec=EnsembleSpec("rma", q=3, L=2), p_star=1.2,
                        iterations=1, tolerance=1e-5)
