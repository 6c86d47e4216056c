"""Concrete encoders, BEC channel, and iterative MAP erasure decoding.

A code instance pins down explicit interleavers (and a puncturing
pattern) for one ensemble member.  Decoding runs exact MAP erasure
resolution per constituent on its two-state trellis chain and sweeps the
constituents round-robin until nothing changes; the surviving erased
transmitted positions are the residual.

Simulated accumulators are unterminated (free final trellis state).
Terminated variants of the same chains back the enumerator validation in
brute_force.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .enumerators import EnsembleSpec

# ---------------------------------------------------------------------------
# 1. Trellis modules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrellisModule:
    """Two-state trellis section: edges are (fromState, in, out, toState)."""

    states: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int], ...]
    extended: bool = False

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            key = e[:3]
            if key in seen:
                raise ValueError("duplicate (from, in, out) edge")
            seen.add(key)


# Accumulator x_k = u_k + x_{k-1}; state is x_{k-1}.
ACC_MODULE = TrellisModule((0, 1), ((0, 0, 0, 0), (0, 1, 1, 1),
                                    (1, 0, 1, 1), (1, 1, 0, 0)))
# Extended variant used for support-pair acceptance: one extra edge lets a
# section carry input support without flipping the output.
ACC_MODULE_EXT = TrellisModule((0, 1), ACC_MODULE.edges + ((1, 1, 1, 1),),
                               extended=True)
# Feedforward x_k = u_k + u_{k-1}; state is u_{k-1}.
FF_MODULE = TrellisModule((0, 1), ((0, 0, 0, 0), (0, 1, 1, 1),
                                   (1, 0, 1, 0), (1, 1, 0, 1)))


@functools.lru_cache(maxsize=None)
def _chain_tables(edges):
    """Lookup tables over (state-set mask, in code, out code).

    Codes are 0, 1, or 2 for unknown.  fwd maps a reachable-set mask to
    the next one, bwd runs the chain backwards, det gives the resolved
    (in, out) values: 0/1 determined, -1 ambiguous, -2 inconsistent.
    """
    codes = (0, 1, 2)

    def ok(label, code):
        return code == 2 or code == label

    def squash(vals):
        if not vals:
            return -2
        if len(vals) == 1:
            return vals.pop()
        return -1

    fwd = [[[0] * 3 for _ in codes] for _ in range(4)]
    bwd = [[[0] * 3 for _ in codes] for _ in range(4)]
    for mask in range(4):
        for ic in codes:
            for oc in codes:
                nxt = 0
                prv = 0
                for (s, u, x, t) in edges:
                    if ok(u, ic) and ok(x, oc):
                        if mask >> s & 1:
                            nxt |= 1 << t
                        if mask >> t & 1:
                            prv |= 1 << s
                fwd[mask][ic][oc] = nxt
                bwd[mask][ic][oc] = prv
    det = [[[[None] * 3 for _ in codes] for _ in range(4)] for _ in range(4)]
    for fm in range(4):
        for bm in range(4):
            for ic in codes:
                for oc in codes:
                    ins, outs = set(), set()
                    for (s, u, x, t) in edges:
                        if (fm >> s & 1) and (bm >> t & 1) and ok(u, ic) \
                                and ok(x, oc):
                            ins.add(u)
                            outs.add(x)
                    det[fm][bm][ic][oc] = (squash(ins), squash(outs))
    return fwd, bwd, det


def _state_sets(module, ci, co, end_free, begin_free=False):
    fwd, bwd, _ = _chain_tables(module.edges)
    n = len(ci)
    fs = [0] * (n + 1)
    f = 3 if begin_free else 1
    fs[0] = f
    for k in range(n):
        f = fwd[f][ci[k]][co[k]]
        if not f:
            raise RuntimeError("inconsistent evidence in trellis chain")
        fs[k + 1] = f
    bs = [0] * (n + 1)
    b = 3 if end_free else 1
    bs[n] = b
    for k in range(n - 1, -1, -1):
        b = bwd[b][ci[k]][co[k]]
        if not b:
            raise RuntimeError("inconsistent evidence in trellis chain")
        bs[k] = b
    return fs, bs


def constituent_map_erase(module: TrellisModule, in_mask, in_val,
                          out_mask, out_val, end_free: bool = True,
                          begin_free: bool = False):
    """Exact MAP erasure resolution on one two-state chain.

    Masks are 0/1 lists (1 = known); values matter only where known.  A
    symbol resolves iff every trellis path consistent with all known
    symbols agrees on it.  Returns (in_mask, in_val, out_mask, out_val,
    changed) with fresh lists.
    """
    im, iv = list(in_mask), list(in_val)
    om, ov = list(out_mask), list(out_val)
    n = len(im)
    ci = [iv[k] if im[k] else 2 for k in range(n)]
    co = [ov[k] if om[k] else 2 for k in range(n)]
    fs, bs = _state_sets(module, ci, co, end_free, begin_free)
    _, _, det = _chain_tables(module.edges)
    changed = False
    for k in range(n):
        din, dout = det[fs[k]][bs[k + 1]][ci[k]][co[k]]
        if not im[k] and din >= 0:
            im[k], iv[k] = 1, din
            changed = True
        if not om[k] and dout >= 0:
            om[k], ov[k] = 1, dout
            changed = True
    return im, iv, om, ov, changed


def chain_extrinsic_flags(module: TrellisModule, in_mask, in_val,
                          out_mask, out_val, end_free: bool = True,
                          begin_free: bool = False):
    """Per-position extrinsic resolvability on a chain.

    Position k of a side counts as extrinsically resolved when it is
    determined by all observations except its own; used by the EXIT
    Monte Carlo oracle.
    """
    n = len(in_mask)
    ci = [in_val[k] if in_mask[k] else 2 for k in range(n)]
    co = [out_val[k] if out_mask[k] else 2 for k in range(n)]
    fs, bs = _state_sets(module, ci, co, end_free, begin_free)
    _, _, det = _chain_tables(module.edges)
    ext_in = [det[fs[k]][bs[k + 1]][2][co[k]][0] >= 0 for k in range(n)]
    ext_out = [det[fs[k]][bs[k + 1]][ci[k]][2][1] >= 0 for k in range(n)]
    return ext_in, ext_out


# ---------------------------------------------------------------------------
# 2. Code instances and encoding
# ---------------------------------------------------------------------------


def _accumulate(bits):
    out = []
    x = 0
    for b in bits:
        x ^= b
        out.append(x)
    return out


def _differentiate(bits):
    out = []
    prev = 0
    for b in bits:
        out.append(b ^ prev)
        prev = b
    return out


@dataclass(frozen=True)
class CodeInstance:
    """One ensemble member: explicit interleavers and puncture pattern.

    Interleaver convention: stage input a[i] = previous[perm[i]].
    rma: L permutations of length n.  hcc: q permutations of length k
    (branch inputs) followed by one of length m (inner input).
    puncture, when set, is the sorted tuple of surviving positions of
    the unpunctured transmitted word.
    """

    spec: EnsembleSpec
    n: int
    interleavers: tuple[tuple[int, ...], ...]
    puncture: tuple[int, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        spec = self.spec
        if self.n % spec.q:
            raise ValueError("q must divide n")
        k = self.n // spec.q
        if spec.family == "rma":
            lens = [self.n] * spec.L
        else:
            m = (spec.q - len(spec.channel_branches)) * k
            lens = [k] * spec.q + [m]
        if len(self.interleavers) != len(lens):
            raise ValueError("wrong number of interleavers")
        for perm, ln in zip(self.interleavers, lens):
            if sorted(perm) != list(range(ln)):
                raise ValueError("interleaver is not a permutation")
        if self.puncture is not None:
            lam_n = Fraction(spec.lam) * self.n
            if lam_n.denominator != 1 or len(self.puncture) != int(lam_n):
                raise ValueError("puncture pattern size must be lam * n")
            if list(self.puncture) != sorted(set(self.puncture)) \
                    or self.puncture[-1] >= self.n or self.puncture[0] < 0:
                raise ValueError("puncture pattern must be sorted unique")
        elif spec.lam != 1:
            raise ValueError("lam < 1 requires a puncture pattern")

    @property
    def k(self) -> int:
        return self.n // self.spec.q

    @property
    def transmit_len(self) -> int:
        return len(self.puncture) if self.puncture is not None else self.n


def sample_instance(spec: EnsembleSpec, n: int, seed: int) -> CodeInstance:
    """Draw uniform interleavers (and puncture pattern) from a fixed seed."""
    rng = np.random.default_rng(np.random.SeedSequence((0x1EAF, seed)))
    if n % spec.q:
        raise ValueError("q must divide n")
    k = n // spec.q
    if spec.family == "rma":
        lens = [n] * spec.L
    else:
        lens = [k] * spec.q + [(spec.q - len(spec.channel_branches)) * k]
    perms = tuple(tuple(int(v) for v in rng.permutation(ln)) for ln in lens)
    puncture = None
    if spec.lam != 1:
        m = int(Fraction(spec.lam) * n)
        puncture = tuple(sorted(int(v) for v in
                                rng.choice(n, size=m, replace=False)))
    return CodeInstance(spec, n, perms, puncture, seed)


def _permute(vec, perm):
    return [vec[p] for p in perm]


def encode_layers(instance: CodeInstance, info_bits):
    """All intermediate words of one encoding, keyed by layer."""
    spec = instance.spec
    k = instance.k
    if len(info_bits) != k:
        raise ValueError(f"info word must have length {k}")
    u = [int(b) & 1 for b in info_bits]
    if spec.family == "rma":
        v = [[u[j // spec.q] for j in range(instance.n)]]
        for perm in instance.interleavers:
            v.append(_accumulate(_permute(v[-1], perm)))
        word = v[-1]
        layers = {"u": u, "v": v}
    else:
        kinds = spec.branch_kinds()
        c = []
        for l in range(spec.q):
            a = _permute(u, instance.interleavers[l])
            if kinds[l] == "acc":
                c.append(_accumulate(a))
            elif kinds[l] == "ff":
                c.append(_differentiate(a))
            else:
                c.append(a)
        direct = sorted(spec.channel_branches)
        inner_branches = [l for l in range(spec.q) if l not in direct]
        mword = [b for l in inner_branches for b in c[l]]
        y = _accumulate(_permute(mword, instance.interleavers[spec.q]))
        word = [b for l in direct for b in c[l]] + y
        layers = {"u": u, "c": c, "y": y}
    if instance.puncture is not None:
        layers["transmitted"] = [word[i] for i in instance.puncture]
    else:
        layers["transmitted"] = word
    layers["word"] = word
    return layers


def encode(instance: CodeInstance, info_bits):
    """Transmitted word (post-puncturing) for one info word."""
    return encode_layers(instance, info_bits)["transmitted"]


# ---------------------------------------------------------------------------
# 3. Channel and decoder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErasurePattern:
    """Sorted set of erased transmitted positions."""

    erased: tuple[int, ...]

    def __post_init__(self):
        if list(self.erased) != sorted(set(self.erased)):
            raise ValueError("erased positions must be sorted and unique")
        if self.erased and self.erased[0] < 0:
            raise ValueError("negative position")


@dataclass(frozen=True)
class DecodeResult:
    residual: frozenset
    iterations: int
    success: bool


def bec_transmit(codeword, p: float, rng) -> ErasurePattern:
    """Erase each position independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    hits = rng.random(len(codeword)) < p
    return ErasurePattern(tuple(int(i) for i in np.nonzero(hits)[0]))


class _Layer:
    __slots__ = ("mask", "val")

    def __init__(self, n):
        self.mask = [0] * n
        self.val = [0] * n


def _chain_pass(module, lay_in, perm, lay_out, end_free=True):
    """One constituent MAP pass; lay_in is viewed through perm."""
    if perm is None:
        im, iv = lay_in.mask, lay_in.val
    else:
        im = [lay_in.mask[p] for p in perm]
        iv = [lay_in.val[p] for p in perm]
    im2, iv2, om2, ov2, changed = constituent_map_erase(
        module, im, iv, lay_out.mask, lay_out.val, end_free=end_free)
    if changed:
        if perm is None:
            lay_in.mask[:], lay_in.val[:] = im2, iv2
        else:
            for i, p in enumerate(perm):
                lay_in.mask[p] = im2[i]
                lay_in.val[p] = iv2[i]
        lay_out.mask[:], lay_out.val[:] = om2, ov2
    return changed


def _rep_pass(u: _Layer, r: _Layer, q: int):
    """Blockwise repetition constraint: u[i] equals every bit of block i."""
    changed = False
    for i in range(len(u.mask)):
        block = range(i * q, (i + 1) * q)
        val = u.val[i] if u.mask[i] else None
        if val is None:
            for j in block:
                if r.mask[j]:
                    val = r.val[j]
                    break
        if val is None:
            continue
        if not u.mask[i]:
            u.mask[i], u.val[i] = 1, val
            changed = True
        for j in block:
            if not r.mask[j]:
                r.mask[j], r.val[j] = 1, val
                changed = True
    return changed


def _equality_pass(u: _Layer, perm, c: _Layer):
    """Identity branch: c[i] = u[perm[i]]."""
    changed = False
    for i, p in enumerate(perm):
        if u.mask[p] and not c.mask[i]:
            c.mask[i], c.val[i] = 1, u.val[p]
            changed = True
        elif c.mask[i] and not u.mask[p]:
            u.mask[p], u.val[p] = 1, c.val[i]
            changed = True
    return changed


class _InnerView(_Layer):
    """Exposes the concatenated branch outputs as one layer."""

    __slots__ = ("layers", "sizes")

    def __init__(self, layers):
        self.layers = layers
        self.sizes = [len(l.mask) for l in layers]
        self.mask = [b for l in layers for b in l.mask]
        self.val = [b for l in layers for b in l.val]

    def push(self):
        ofs = 0
        for l, sz in zip(self.layers, self.sizes):
            l.mask[:] = self.mask[ofs:ofs + sz]
            l.val[:] = self.val[ofs:ofs + sz]
            ofs += sz


class _Decoder:
    """Layer state plus the constituent sweep schedule for one instance."""

    def __init__(self, instance: CodeInstance, pattern: ErasurePattern,
                 observed=None):
        spec = instance.spec
        self.instance = instance
        self.pattern = pattern
        k, n = instance.k, instance.n
        if pattern.erased and pattern.erased[-1] >= instance.transmit_len:
            raise ValueError("erased position out of range")
        if observed is None:
            observed = [0] * instance.transmit_len
        if len(observed) != instance.transmit_len:
            raise ValueError("observed word has the wrong length")
        if spec.family == "rma":
            self.u = _Layer(k)
            self.v = [_Layer(n) for _ in range(spec.L + 1)]
        else:
            self.u = _Layer(k)
            self.c = [_Layer(k) for _ in range(spec.q)]
            self.y = _Layer((spec.q - len(spec.channel_branches)) * k)
        erased = set(pattern.erased)
        for t in range(instance.transmit_len):
            if t in erased:
                continue
            lay, pos = self.word_slot(
                instance.puncture[t] if instance.puncture is not None else t)
            lay.mask[pos], lay.val[pos] = 1, int(observed[t]) & 1

    def word_slot(self, j):
        """Layer and offset holding unpunctured transmitted position j."""
        inst = self.instance
        spec = inst.spec
        if spec.family == "rma":
            return self.v[-1], j
        for l in sorted(spec.channel_branches):
            if j < inst.k:
                return self.c[l], j
            j -= inst.k
        return self.y, j

    def steps(self, schedule):
        inst = self.instance
        spec = inst.spec
        out = []
        if spec.family == "rma":
            out.append(lambda: _rep_pass(self.u, self.v[0], spec.q))
            for l in range(spec.L):
                out.append(lambda l=l: _chain_pass(
                    ACC_MODULE, self.v[l], inst.interleavers[l],
                    self.v[l + 1]))
        else:
            kinds = spec.branch_kinds()
            for l in range(spec.q):
                if kinds[l] == "id":
                    out.append(lambda l=l: _equality_pass(
                        self.u, inst.interleavers[l], self.c[l]))
                else:
                    mod = ACC_MODULE if kinds[l] == "acc" else FF_MODULE
                    out.append(lambda l=l, mod=mod: _chain_pass(
                        mod, self.u, inst.interleavers[l], self.c[l]))
            inner_branches = [l for l in range(spec.q)
                              if l not in spec.channel_branches]

            def inner_step():
                view = _InnerView([self.c[l] for l in inner_branches])
                ch = _chain_pass(ACC_MODULE, view, inst.interleavers[spec.q],
                                 self.y)
                if ch:
                    view.push()
                return ch

            out.append(inner_step)
        return out[::-1] if schedule == "reverse" else out

    def run(self, schedule="forward"):
        steps = self.steps(schedule)
        iterations = 0
        while True:
            iterations += 1
            changed = False
            for s in steps:
                changed |= s()
            if not changed:
                break
            if iterations > 10 * (self.instance.n + 2):
                raise RuntimeError("decoder failed to reach a fixed point")
        return iterations

    def residual(self):
        out = []
        for t in self.pattern.erased:
            j = self.instance.puncture[t] \
                if self.instance.puncture is not None else t
            lay, pos = self.word_slot(j)
            if not lay.mask[pos]:
                out.append(t)
        return frozenset(out)

    def recovered(self):
        """Values resolved for initially erased transmitted positions."""
        out = {}
        for t in self.pattern.erased:
            j = self.instance.puncture[t] \
                if self.instance.puncture is not None else t
            lay, pos = self.word_slot(j)
            if lay.mask[pos]:
                out[t] = lay.val[pos]
        return out


def iterative_decode(instance: CodeInstance, pattern: ErasurePattern,
                     observed=None, schedule: str = "forward") -> DecodeResult:
    """Round-robin constituent MAP sweeps until a sweep resolves nothing.

    observed supplies the values of the non-erased transmitted positions
    (all-zero by default; the residual does not depend on them when the
    observation is consistent with a codeword).  The residual holds the
    erased transmitted positions that remain unresolved.
    """
    if schedule not in ("forward", "reverse"):
        raise ValueError("schedule must be forward or reverse")
    dec = _Decoder(instance, pattern, observed)
    iterations = dec.run(schedule)
    res = dec.residual()
    return DecodeResult(residual=res, iterations=iterations, success=not res)


# ---------------------------------------------------------------------------
# 4. Monte Carlo harness
# ---------------------------------------------------------------------------


def _wilson(successes: int, trials: int, z: float = 1.96):
    if trials == 0:
        return 0.0, 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * ((phat * (1 - phat) / trials
                 + z * z / (4 * trials * trials)) ** 0.5) / denom
    return phat, max(0.0, center - half), min(1.0, center + half)


def monte_carlo(spec: EnsembleSpec, n: int, p_grid, trials: int, seed: int,
                fixed_instance: CodeInstance | None = None):
    """Frame erasure rate and residual statistics over a p grid.

    Fresh interleavers per trial sample the ensemble; fixed_instance pins
    one code.  Each (p index, trial) pair gets its own seed substream,
    so runs are reproducible and extendable.  Every resolved value is
    checked against the transmitted word.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rows = []
    for pi, p in enumerate(p_grid):
        failures = 0
        residual_total = 0
        for t in range(trials):
            ss = np.random.SeedSequence((seed, pi, t))
            rng = np.random.default_rng(ss)
            inst = fixed_instance
            if inst is None:
                inst = sample_instance(spec, n, int(ss.generate_state(1)[0]))
            info = [int(b) for b in rng.integers(0, 2, size=inst.k)]
            layers = encode_layers(inst, info)
            word = layers["transmitted"]
            pattern = bec_transmit(word, p, rng)
            dec = _Decoder(inst, pattern, observed=word)
            dec.run()
            res = dec.residual()
            if res:
                failures += 1
                residual_total += len(res)
            for t2, val in dec.recovered().items():
                if val != word[t2]:
                    raise AssertionError(
                        "decoder recovered a wrong value at position %d" % t2)
        fer, lo, hi = _wilson(failures, trials)
        rows.append({"p": float(p), "fer": fer, "fer_ci_low": lo,
                     "fer_ci_high": hi,
                     "avg_residual": residual_total / trials})
    return rows
