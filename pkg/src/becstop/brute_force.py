"""Desk-scale brute-force oracles, independent of the production code paths.

Everything here recomputes from first principles: constituent support
pairs by codeword enumeration plus union closure, stopping-set
membership by trellis acceptance over all info supports at once, and
ensemble averages by walking chains of closure successors over
enumerated or sampled interleaver tuples.  The production enumerators
and the decoder are validated against these routes in the test suite;
nothing in this module calls them.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .codec_sim import CodeInstance, sample_instance
from .enumerators import EnsembleSpec

MAX_CLOSURE_LEN = 12
MAX_MEMBER_LEN = 18
MAX_WITHIN = 18
MAX_EXHAUSTIVE_PERM = 8
MAX_SUBSET_LEN = 12

# Allowed-input code for an accumulator section given the previous and
# current output bit; codes are bit masks (1 = input 0, 2 = input 1).
# The section state always equals the output bit, so a fixed output
# sequence fixes the whole state sequence.
_TRANS = ((1, 2), (2, 3))


class SupportPair(NamedTuple):
    input_support: frozenset
    output_support: frozenset


# ---------------------------------------------------------------------------
# 1. Constituent support-pair closure
# ---------------------------------------------------------------------------


def _acc_encode(u):
    x = 0
    out = []
    for b in u:
        x ^= b
        out.append(x)
    return out


def _ff_encode(u):
    prev = 0
    out = []
    for b in u:
        out.append(b ^ prev)
        prev = b
    return out


def _closure_pairs(n: int, kind: str, terminated: bool) -> set:
    if n < 1 or n > MAX_CLOSURE_LEN:
        raise ValueError(f"n must be in 1..{MAX_CLOSURE_LEN}")
    if kind not in ("acc", "ff"):
        raise ValueError("kind must be acc or ff")
    pairs = set()
    free = n if not terminated else n - 1
    for bits in range(1 << free):
        u = [(bits >> i) & 1 for i in range(free)]
        if kind == "acc":
            if terminated:
                u.append(sum(u) & 1)  # terminate: even input weight
            x = _acc_encode(u)
        else:
            if terminated:
                u.append(0)  # terminate: last input bit zero
            x = _ff_encode(u)
        pairs.add((frozenset(i for i, b in enumerate(u) if b),
                   frozenset(i for i, b in enumerate(x) if b)))
    frontier = list(pairs)
    while frontier:
        fresh = []
        for a in frontier:
            for b in list(pairs):
                c = (a[0] | b[0], a[1] | b[1])
                if c not in pairs:
                    pairs.add(c)
                    fresh.append(c)
        frontier = fresh
    return {SupportPair(w, s) for (w, s) in pairs}


def closure_support_pairs(n: int, kind: str = "acc",
                          terminated: bool = True) -> set:
    """Support pairs of all subcodes of one constituent code.

    Enumerates the codewords (terminated accumulator: even-weight
    inputs; terminated feedforward: inputs whose last bit is zero;
    unterminated: all inputs), takes their (input support, output
    support) pairs and closes the family under componentwise union.  A
    subcode's support is the union of its generators' supports, so the
    closure is exactly the family of subcode support pairs.
    """
    return _closure_pairs(n, kind, terminated)


@lru_cache(maxsize=64)
def _succ_by_input(n: int, kind: str, terminated: bool) -> dict:
    """Closure output supports grouped by input support.

    The identity constituent pairs every support with itself.  The
    returned dict is cached and must be treated as read-only.
    """
    if kind == "id":
        subs = [frozenset(i for i in range(n) if m >> i & 1)
                for m in range(1 << n)]
        return {s: (s,) for s in subs}
    grouped: dict = {}
    for p in _closure_pairs(n, kind, terminated):
        grouped.setdefault(p.input_support, []).append(p.output_support)
    return {key: tuple(v) for key, v in grouped.items()}


def support_pair_counts(pairs) -> dict:
    """Tally a pair family by (input size, output size)."""
    counts = {}
    for p in pairs:
        key = (len(p.input_support), len(p.output_support))
        counts[key] = counts.get(key, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# 2. Stopping-set membership
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _cand_masks(k: int):
    """masks[i] = bitmask over all 2^k info supports having info bit i."""
    masks = [0] * k
    for cand in range(1 << k):
        for i in range(k):
            if cand >> i & 1:
                masks[i] |= 1 << cand
    return tuple(masks)


def _inverse(perm):
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def _allowed_inputs(out_bits, terminated):
    """Per-section allowed-input codes for a fixed accumulator output."""
    codes = []
    prev = 0
    for b in out_bits:
        codes.append(_TRANS[prev][b])
        prev = b
    if terminated and prev:
        return None
    return codes


def _acc_branch_dp(alive, masks_in_order, out_codes, full, terminated):
    """Accumulator with fixed inputs per candidate and free outputs.

    masks_in_order[i] is the candidate mask whose input bit is 1 at
    section i; out_codes[i] is the allowed-output code.  Returns the
    surviving candidate mask.
    """
    r0, r1 = alive, 0
    for m, o in zip(masks_in_order, out_codes):
        not_m = full ^ m
        nr0 = ((r0 & not_m) | (r1 & m)) if o & 1 else 0
        nr1 = ((r0 & m) | r1) if o & 2 else 0
        r0, r1 = nr0, nr1
        if not (r0 | r1):
            return 0
    return r0 if terminated else (r0 | r1)


def _ff_branch_free_inputs(alive, masks_in_order, in_codes, full):
    """Feedforward with fixed outputs per candidate and free inputs.

    The feedforward pair (W, S) is acceptable iff the accumulator pair
    (S, W) is, so this scans the accumulator chain whose output sequence
    is the candidate's bits and whose input at section i may take any
    value in in_codes[i].
    """
    prev = 0
    for m, o in zip(masks_in_order, in_codes):
        z = full if o & 1 else 0
        w = full if o & 2 else 0
        not_p = full ^ prev
        not_c = full ^ m
        ok = (not_p & not_c & z) | ((prev ^ m) & w) | (prev & m & (z | w))
        alive &= ok
        if not alive:
            return 0
        prev = m
    return alive


def _ff_branch_fixed(alive, masks_in_order, in_bits, full):
    """Feedforward with fixed outputs per candidate and fixed inputs."""
    prev = 0
    for m, b in zip(masks_in_order, in_bits):
        if b:
            bad = (full ^ prev) & (full ^ m)
        else:
            bad = prev ^ m
        alive &= full ^ bad
        if not alive:
            return 0
        prev = m
    return alive


def _word_codes(instance: CodeInstance, s_set):
    """Allowed-value codes for the unpunctured word given transmitted S."""
    codes = [3] * instance.n  # punctured positions are free
    if instance.puncture is not None:
        kept = instance.puncture
    else:
        kept = range(instance.n)
    for t, j in enumerate(kept):
        codes[j] = 2 if t in s_set else 1
    return codes


def _rma_accept(instance: CodeInstance, codes, terminated):
    spec = instance.spec
    n, k, q = instance.n, instance.k, spec.q
    if spec.L > 2:
        raise NotImplementedError(
            "stopping-set membership is exact only up to two accumulator "
            "stages; the chain constraint graph acquires cycles beyond that")
    masks = _cand_masks(k)
    full = (1 << (1 << k)) - 1
    p1 = instance.interleavers[0]
    in_masks = [masks[p1[i] // q] for i in range(n)]
    if spec.L == 1:
        return _acc_branch_dp(full, in_masks, codes, full, terminated) != 0
    if any(c == 3 for c in codes):
        raise NotImplementedError(
            "punctured membership is exact only for a single stage")
    out_bits = [c >> 1 for c in codes]
    allowed = _allowed_inputs(out_bits, terminated)
    if allowed is None:
        return False
    p2 = instance.interleavers[1]
    mid_codes = [0] * n
    for pos, a in zip(p2, allowed):
        mid_codes[pos] = a
    return _acc_branch_dp(full, in_masks, mid_codes, full, terminated) != 0


def _hcc_accept(instance: CodeInstance, codes, terminated):
    spec = instance.spec
    k = instance.k
    if any(c == 3 for c in codes):
        raise NotImplementedError("punctured hcc membership not supported")
    kinds = spec.branch_kinds()
    direct = sorted(spec.channel_branches)
    inner_branches = [l for l in range(spec.q) if l not in spec.channel_branches]
    m = len(inner_branches) * k
    y_codes = codes[len(direct) * k:]
    y_bits = [c >> 1 for c in y_codes]
    allowed = _allowed_inputs(y_bits, terminated)
    if allowed is None:
        return False
    p_in = instance.interleavers[spec.q]
    concat_codes = [0] * m
    for pos, a in zip(p_in, allowed):
        concat_codes[pos] = a
    masks = _cand_masks(k)
    full = (1 << (1 << k)) - 1
    if kinds[0] == "id":
        c0 = codes[:k]
        inv0 = _inverse(instance.interleavers[0])
        widx = 0
        for b in range(k):
            widx |= (c0[inv0[b]] >> 1) << b
        alive = 1 << widx
    else:
        alive = full
    ofs = 0
    for l in range(spec.q):
        perm = instance.interleavers[l]
        in_masks = [masks[perm[i]] for i in range(k)]
        if kinds[l] == "id":
            continue
        if l in spec.channel_branches:
            # feedforward straight to the channel: both sequences fixed
            c_bits = [codes[direct.index(l) * k + i] >> 1 for i in range(k)]
            alive = _ff_branch_fixed(alive, in_masks, c_bits, full)
            if terminated:
                # terminated feedforward: last input bit held at zero
                alive &= full ^ in_masks[-1]
        else:
            o = concat_codes[ofs:ofs + k]
            ofs += k
            if kinds[l] == "acc":
                alive = _acc_branch_dp(alive, in_masks, o, full, terminated)
            else:
                alive = _ff_branch_free_inputs(alive, in_masks, o, full)
                if terminated:
                    alive &= full ^ in_masks[-1]
        if not alive:
            return False
    return alive != 0


def is_stopping_set(instance: CodeInstance, s, terminated: bool = False) -> bool:
    """Whether S (transmitted positions) is a stopping set of the instance.

    True iff some info support extends to a chain of constituent
    support pairs whose final transmitted support is exactly S.  The
    default matches the simulated (unterminated) chains; terminated=True
    matches the closed-form enumerator tables.
    """
    if instance.n > MAX_MEMBER_LEN:
        raise ValueError(f"total output length must be <= {MAX_MEMBER_LEN}")
    s_set = frozenset(s)
    if s_set and (min(s_set) < 0 or max(s_set) >= instance.transmit_len):
        raise ValueError("position out of range")
    codes = _word_codes(instance, s_set)
    if instance.spec.family == "rma":
        return _rma_accept(instance, codes, terminated)
    return _hcc_accept(instance, codes, terminated)


def max_stopping_set_within(instance: CodeInstance, e,
                            terminated: bool = False) -> frozenset:
    """The unique maximum-size stopping set contained in E.

    Walks all subsets of E from large to small, skipping subsets that
    cannot enlarge the running union; the family of stopping sets is
    union-closed, so the union of everything found is itself the unique
    maximum, which is asserted before returning.
    """
    e_list = sorted(set(e))
    if len(e_list) > MAX_WITHIN:
        raise ValueError(f"|E| must be <= {MAX_WITHIN}")
    if e_list and (e_list[0] < 0 or e_list[-1] >= instance.transmit_len):
        raise ValueError("position out of range")
    union: set = set()
    for size in range(len(e_list), 0, -1):
        if len(union) == len(e_list):
            break
        for combo in itertools.combinations(e_list, size):
            s = set(combo)
            if s <= union:
                continue
            if is_stopping_set(instance, s, terminated):
                union |= s
    if not is_stopping_set(instance, union, terminated):
        raise AssertionError("union of stopping subsets is not a stopping "
                             "set; uniqueness violated")
    return frozenset(union)


# ---------------------------------------------------------------------------
# 3. Ensemble averaging over interleavers
# ---------------------------------------------------------------------------


def _interleaver_lengths(spec: EnsembleSpec, n: int):
    k = n // spec.q
    if spec.family == "rma":
        return [n] * spec.L
    return [k] * spec.q + [(spec.q - len(spec.channel_branches)) * k]


def _final_supports(instance: CodeInstance, terminated):
    """Multiplicity of each final unpunctured output support.

    Walks every chain of constituent closure successors: an info
    support, then per stage the closure outputs reachable from the
    interleaved previous support.  One chain is one configuration, so a
    support reachable along several chains keeps its multiplicity; this
    is exactly what the uniform-interleaver composition counts.
    """
    spec = instance.spec
    k = instance.k
    if spec.family == "rma":
        n, q = instance.n, spec.q
        succ = _succ_by_input(n, "acc", terminated)
        final: dict = {}
        for bits in range(1 << k):
            u = {i for i in range(k) if bits >> i & 1}
            p1 = instance.interleavers[0]
            cur = {frozenset(i for i in range(n) if p1[i] // q in u): 1}
            for l in range(spec.L):
                nxt: dict = {}
                for inp, mult in cur.items():
                    for out in succ.get(inp, ()):
                        if l + 1 < spec.L:
                            perm = instance.interleavers[l + 1]
                            out = frozenset(i for i in range(n)
                                            if perm[i] in out)
                        nxt[out] = nxt.get(out, 0) + mult
                cur = nxt
            for out, mult in cur.items():
                final[out] = final.get(out, 0) + mult
        return final
    kinds = spec.branch_kinds()
    direct = sorted(spec.channel_branches)
    feed = [l for l in range(spec.q) if l not in spec.channel_branches]
    m = len(feed) * k
    succ_in = _succ_by_input(m, "acc", terminated)
    p_in = instance.interleavers[spec.q]
    final = {}
    for bits in range(1 << k):
        u = {i for i in range(k) if bits >> i & 1}
        branch_outs = []
        for l in range(spec.q):
            perm = instance.interleavers[l]
            inp = frozenset(i for i in range(k) if perm[i] in u)
            branch_outs.append(_succ_by_input(k, kinds[l],
                                              terminated).get(inp, ()))
        for combo in itertools.product(*branch_outs):
            head = frozenset(direct.index(l) * k + i
                             for l in direct for i in combo[l])
            concat = set()
            for bi, l in enumerate(feed):
                concat.update(bi * k + i for i in combo[l])
            inner_in = frozenset(j for j in range(m) if p_in[j] in concat)
            base = len(direct) * k
            for o_in in succ_in.get(inner_in, ()):
                s = head | {base + t for t in o_in}
                final[s] = final.get(s, 0) + 1
    return final


def chain_configurations(instance: CodeInstance, s,
                         terminated: bool = False) -> int:
    """Number of closure-successor chains whose final support is S.

    Independent route to the same acceptance question as
    is_stopping_set: S is a stopping set iff at least one chain ends
    exactly at S.
    """
    if instance.spec.lam != 1:
        raise NotImplementedError("punctured chains not supported")
    if instance.n > MAX_SUBSET_LEN:
        raise ValueError(f"total output length must be <= {MAX_SUBSET_LEN}")
    return _final_supports(instance, terminated).get(frozenset(s), 0)


def _count_by_size(instance: CodeInstance, terminated):
    nt = instance.transmit_len
    kept = None if instance.puncture is None else frozenset(instance.puncture)
    counts = [0] * (nt + 1)
    for out, mult in _final_supports(instance, terminated).items():
        size = len(out) if kept is None else len(out & kept)
        counts[size] += mult
    return counts


def exhaustive_ensemble_ssef(spec: EnsembleSpec, n: int, samples=None,
                             seed: int = 0, terminated: bool = True):
    """Ensemble-average stopping-set configuration count per size.

    Counts chains of constituent closure successors, so a final support
    reachable from several info supports carries its multiplicity; that
    matches the uniform-interleaver composition exactly.  samples None
    enumerates every interleaver tuple (lengths <= 8) and returns (list
    of exact Fractions, None).  An integer draws that many uniform
    instances and returns (means, standard errors) as arrays.  Closure
    construction bounds the scale, so n <= 12.
    """
    if n > MAX_SUBSET_LEN:
        raise ValueError(f"n must be <= {MAX_SUBSET_LEN}")
    if n % spec.q:
        raise ValueError("q must divide n")
    lens = _interleaver_lengths(spec, n)
    if samples is None:
        if spec.lam != 1:
            raise NotImplementedError("punctured ensembles need sampled mode")
        if max(lens) > MAX_EXHAUSTIVE_PERM:
            raise ValueError(
                f"exhaustive mode needs interleaver lengths <= "
                f"{MAX_EXHAUSTIVE_PERM}")
        totals = [0] * (n + 1)
        num = 0
        for tup in itertools.product(
                *(itertools.permutations(range(ln)) for ln in lens)):
            inst = CodeInstance(spec, n, tuple(tup))
            for h, c in enumerate(_count_by_size(inst, terminated)):
                totals[h] += c
            num += 1
        return [Fraction(t, num) for t in totals], None
    if samples < 2:
        raise ValueError("sampled mode needs at least 2 samples")
    rows = []
    for i in range(samples):
        sub = int(np.random.SeedSequence((seed, i)).generate_state(1)[0])
        inst = sample_instance(spec, n, sub)
        rows.append(_count_by_size(inst, terminated))
    arr = np.array(rows, dtype=float)
    means = arr.mean(axis=0)
    stderr = arr.std(axis=0, ddof=1) / np.sqrt(samples)
    return means, stderr
