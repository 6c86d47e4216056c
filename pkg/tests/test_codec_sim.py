"""Encoders, trellis erasure resolution, decoder, and Monte Carlo harness."""

import itertools

import numpy as np
import pytest

from becstop.brute_force import max_stopping_set_within
from becstop.codec_sim import (
    ACC_MODULE,
    FF_MODULE,
    CodeInstance,
    DecodeResult,
    ErasurePattern,
    TrellisModule,
    bec_transmit,
    chain_extrinsic_flags,
    constituent_map_erase,
    encode,
    encode_layers,
    iterative_decode,
    monte_carlo,
    sample_instance,
)
from becstop.enumerators import EnsembleSpec


def identity_instance(spec, n):
    k = n // spec.q
    if spec.family == "rma":
        perms = (tuple(range(n)),) * spec.L
    else:
        m = (spec.q - len(spec.channel_branches)) * k
        perms = (tuple(range(k)),) * spec.q + (tuple(range(m)),)
    return CodeInstance(spec, n, perms)


# ---------------------------------------------------------------------------
# trellis resolution
# ---------------------------------------------------------------------------


def test_trellis_module_rejects_duplicate_edges():
    with pytest.raises(ValueError):
        TrellisModule((0, 1), ((0, 0, 0, 0), (0, 0, 0, 1)))


def test_map_erase_resolves_accumulator_outputs():
    im, iv, om, ov, ch = constituent_map_erase(
        ACC_MODULE, [1, 1], [1, 1], [0, 0], [0, 0])
    assert ch
    assert om == [1, 1] and ov == [1, 0]
    assert im == [1, 1] and iv == [1, 1]


def test_map_erase_resolves_accumulator_inputs():
    # known outputs pin the state path, so all inputs resolve
    im, iv, om, ov, ch = constituent_map_erase(
        ACC_MODULE, [0, 0, 0], [0, 0, 0], [1, 1, 1], [1, 1, 0])
    assert ch
    assert im == [1, 1, 1] and iv == [1, 0, 1]


def test_map_erase_partial_information():
    # single known output leaves the later input undetermined with a
    # free final state
    im, iv, om, ov, ch = constituent_map_erase(
        ACC_MODULE, [0, 0], [0, 0], [1, 0], [1, 0])
    assert im[0] == 1 and iv[0] == 1
    assert im[1] == 0 and om[1] == 0


def test_map_erase_end_free_flag():
    # pinned final state zero forces the last input of a length-1 chain
    im, iv, _, _, _ = constituent_map_erase(
        ACC_MODULE, [0], [0], [0], [0], end_free=False)
    assert (im, iv) == ([1], [0])
    im, iv, _, _, _ = constituent_map_erase(
        ACC_MODULE, [0], [0], [0], [0], end_free=True)
    assert im == [0]


def test_map_erase_inconsistent_evidence():
    with pytest.raises(RuntimeError):
        constituent_map_erase(ACC_MODULE, [1], [1], [1], [0])


def test_map_erase_feedforward():
    # ff: x_k = u_k + u_{k-1}; knowing both inputs fixes both outputs
    im, iv, om, ov, ch = constituent_map_erase(
        FF_MODULE, [1, 1], [1, 0], [0, 0], [0, 0])
    assert om == [1, 1] and ov == [1, 1]


def test_extrinsic_flags_exclude_own_observation():
    ext_in, ext_out = chain_extrinsic_flags(
        ACC_MODULE, [1, 1], [1, 1], [0, 0], [0, 0])
    # outputs follow from the inputs alone
    assert ext_out == [True, True]
    # inputs are only known through their own priors
    assert ext_in == [False, False]


# ---------------------------------------------------------------------------
# instances and encoding
# ---------------------------------------------------------------------------


def test_encode_rma_identity_interleavers():
    inst = identity_instance(EnsembleSpec("rma", q=2, L=1), 4)
    layers = encode_layers(inst, [1, 0])
    assert layers["v"][0] == [1, 1, 0, 0]
    assert layers["word"] == [1, 0, 0, 0]
    assert encode(inst, [1, 0]) == [1, 0, 0, 0]


def test_encode_rma_two_stages():
    inst = identity_instance(EnsembleSpec("rma", q=2, L=2), 4)
    layers = encode_layers(inst, [1, 0])
    assert layers["v"][1] == [1, 0, 0, 0]
    assert layers["word"] == [1, 1, 1, 1]


def test_encode_hcc_systematic_head():
    spec = EnsembleSpec("hcc", q=3, hcc_type=4)
    inst = identity_instance(spec, 6)
    layers = encode_layers(inst, [1, 0])
    # identity branch rides to the channel ahead of the inner word
    assert layers["word"][:2] == [1, 0]
    assert len(layers["word"]) == 6
    assert layers["c"][0] == [1, 0]


def test_encode_hcc_feedforward_branch():
    spec = EnsembleSpec("hcc", q=3, hcc_type=3)
    inst = identity_instance(spec, 6)
    layers = encode_layers(inst, [1, 1])
    assert layers["c"][0] == [1, 0]  # 1+D on [1, 1]
    assert layers["c"][1] == [1, 0]  # 1/(1+D) on [1, 1]


def test_encode_wrong_info_length():
    inst = identity_instance(EnsembleSpec("rma", q=2, L=1), 4)
    with pytest.raises(ValueError):
        encode(inst, [1, 0, 1])


def test_instance_validation():
    spec = EnsembleSpec("rma", q=2, L=2)
    good = (tuple(range(4)), tuple(range(4)))
    CodeInstance(spec, 4, good)
    with pytest.raises(ValueError):
        CodeInstance(spec, 4, good[:1])
    with pytest.raises(ValueError):
        CodeInstance(spec, 4, (good[0], (0, 0, 1, 2)))
    with pytest.raises(ValueError):
        CodeInstance(spec, 5, good)
    punct = EnsembleSpec("rma", q=2, L=1, lam="1/2")
    with pytest.raises(ValueError):
        CodeInstance(punct, 4, (tuple(range(4)),))
    with pytest.raises(ValueError):
        CodeInstance(punct, 4, (tuple(range(4)),), puncture=(0,))
    with pytest.raises(ValueError):
        CodeInstance(punct, 4, (tuple(range(4)),), puncture=(2, 0))
    inst = CodeInstance(punct, 4, (tuple(range(4)),), puncture=(0, 2))
    assert inst.transmit_len == 2


def test_sample_instance_is_deterministic():
    spec = EnsembleSpec("hcc", q=3, hcc_type=2, q1=1)
    a = sample_instance(spec, 12, 9)
    b = sample_instance(spec, 12, 9)
    assert a == b
    assert a != sample_instance(spec, 12, 10)


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------


def test_bec_transmit_extremes_and_domain():
    rng = np.random.default_rng(0)
    assert bec_transmit([0] * 8, 0.0, rng).erased == ()
    assert bec_transmit([0] * 8, 1.0, rng).erased == tuple(range(8))
    with pytest.raises(ValueError):
        bec_transmit([0] * 8, -0.1, rng)
    with pytest.raises(ValueError):
        ErasurePattern((3, 1))
    with pytest.raises(ValueError):
        ErasurePattern((-1,))


# ---------------------------------------------------------------------------
# iterative decoder vs brute-force residual
# ---------------------------------------------------------------------------


RESIDUAL_CASES = [
    EnsembleSpec("rma", q=3, L=1),
    EnsembleSpec("rma", q=3, L=2),
    EnsembleSpec("hcc", q=3, hcc_type=1),
    EnsembleSpec("hcc", q=3, hcc_type=2, q1=1),
    EnsembleSpec("hcc", q=3, hcc_type=3),
    EnsembleSpec("hcc", q=3, hcc_type=4),
]


@pytest.mark.parametrize("spec", RESIDUAL_CASES, ids=lambda s: s.label())
def test_residual_is_max_stopping_set(spec):
    inst = sample_instance(spec, 6, 11)
    for m in range(1 << inst.transmit_len):
        erased = tuple(t for t in range(inst.transmit_len) if m >> t & 1)
        res = iterative_decode(inst, ErasurePattern(erased))
        want = max_stopping_set_within(inst, erased)
        assert res.residual == want
        assert res.success == (not want)


def test_residual_independent_of_transmitted_word():
    spec = EnsembleSpec("rma", q=3, L=2)
    inst = sample_instance(spec, 12, 2)
    rng = np.random.default_rng(8)
    for _ in range(20):
        info = [int(b) for b in rng.integers(0, 2, size=inst.k)]
        word = encode(inst, info)
        pattern = bec_transmit(word, 0.6, rng)
        res0 = iterative_decode(inst, pattern)
        res1 = iterative_decode(inst, pattern, observed=word)
        assert res0.residual == res1.residual
        assert isinstance(res0, DecodeResult)


def test_residual_schedule_invariant():
    spec = EnsembleSpec("hcc", q=3, hcc_type=3)
    inst = sample_instance(spec, 12, 4)
    rng = np.random.default_rng(1)
    for _ in range(20):
        pattern = bec_transmit([0] * inst.transmit_len, 0.5, rng)
        fwd = iterative_decode(inst, pattern, schedule="forward")
        rev = iterative_decode(inst, pattern, schedule="reverse")
        assert fwd.residual == rev.residual
    with pytest.raises(ValueError):
        iterative_decode(inst, ErasurePattern(()), schedule="zigzag")


def test_residual_monotone_in_erasures():
    spec = EnsembleSpec("rma", q=3, L=2)
    inst = sample_instance(spec, 12, 6)
    rng = np.random.default_rng(5)
    for _ in range(15):
        e_small = set(int(i) for i in rng.choice(12, size=5, replace=False))
        extra = set(int(i) for i in rng.choice(12, size=3, replace=False))
        small = iterative_decode(inst, ErasurePattern(tuple(sorted(e_small))))
        big = iterative_decode(
            inst, ErasurePattern(tuple(sorted(e_small | extra))))
        assert small.residual <= big.residual


def test_decode_rejects_out_of_range_erasure():
    inst = identity_instance(EnsembleSpec("rma", q=2, L=1), 4)
    with pytest.raises(ValueError):
        iterative_decode(inst, ErasurePattern((4,)))


def test_punctured_decode_residual():
    spec = EnsembleSpec("rma", q=2, L=1, lam="1/2")
    inst = CodeInstance(spec, 8, (tuple(range(8)),), puncture=(0, 2, 5, 7))
    for m in range(1 << 4):
        erased = tuple(t for t in range(4) if m >> t & 1)
        res = iterative_decode(inst, ErasurePattern(erased))
        assert res.residual <= set(erased)
        assert res.residual == max_stopping_set_within(inst, erased)


def test_recovered_values_match_codeword():
    spec = EnsembleSpec("hcc", q=3, hcc_type=4)
    inst = sample_instance(spec, 12, 3)
    rng = np.random.default_rng(12)
    info = [int(b) for b in rng.integers(0, 2, size=inst.k)]
    word = encode(inst, info)
    erased = tuple(sorted(int(i) for i in
                          rng.choice(len(word), size=6, replace=False)))
    from becstop.codec_sim import _Decoder
    dec = _Decoder(inst, ErasurePattern(erased), observed=word)
    dec.run()
    for t, val in dec.recovered().items():
        assert val == word[t]


# ---------------------------------------------------------------------------
# Monte Carlo harness
# ---------------------------------------------------------------------------


def test_monte_carlo_rows_and_determinism():
    spec = EnsembleSpec("rma", q=3, L=2)
    rows = monte_carlo(spec, 12, [0.0, 0.4, 1.0], trials=40, seed=17)
    again = monte_carlo(spec, 12, [0.0, 0.4, 1.0], trials=40, seed=17)
    assert rows == again
    assert [r["p"] for r in rows] == [0.0, 0.4, 1.0]
    assert rows[0]["fer"] == 0.0 and rows[0]["avg_residual"] == 0.0
    assert rows[2]["fer"] == 1.0
    for r in rows:
        assert r["fer_ci_low"] <= r["fer"] <= r["fer_ci_high"]
        assert 0.0 <= r["avg_residual"] <= 12.0


def test_monte_carlo_fixed_instance_and_guards():
    spec = EnsembleSpec("rma", q=3, L=1)
    inst = sample_instance(spec, 6, 0)
    rows = monte_carlo(spec, 6, [0.5], trials=25, seed=3,
                       fixed_instance=inst)
    assert len(rows) == 1
    with pytest.raises(ValueError):
        monte_carlo(spec, 6, [0.5], trials=0, seed=3)
