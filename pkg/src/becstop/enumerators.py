"""Support-size enumerating tables for constituent codes and code ensembles.

The central object is a table a[w][h] counting subcode support pairs of a
constituent code: w is the input support size, h the output support size.
Closed forms exist for the terminated accumulator 1/(1+D), its feedforward
transpose 1+D, block repetition, and the identity map.  Ensemble averages
over uniform interleavers are then sequential convolutions of these tables
with binomial denominators, optionally followed by random puncturing.

Two arithmetic backends: exact integers/rationals (default up to block
length EXACT_CROSSOVER) and natural-log float64 arrays beyond that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .numerics import NEG_INF, binom, log_binom_table

# Default block-length crossover from exact rationals to log-domain floats.
EXACT_CROSSOVER = 512


# ---------------------------------------------------------------------------
# 1. Ensemble parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of a concatenated ensemble.

    family "rma": block repetition by q followed by L serial accumulators,
    each behind its own uniform interleaver.  family "hcc": q parallel
    rate-1 branches on the info word followed by one inner accumulator;
    hcc_type selects the branch mix and which branches feed the channel
    directly:
      type 1: q accumulator branches, all feeding the inner code.
      type 2: q1 feedforward branches and q-q1 accumulator branches, all
              feeding the inner code.
      type 3: one feedforward branch sent to the channel, q-1 accumulator
              branches feeding the inner code.
      type 4: one identity (systematic) branch sent to the channel, q-1
              accumulator branches feeding the inner code.
    lam is the surviving fraction under random puncturing of the
    transmitted word (1 means no puncturing).
    """

    family: str
    q: int
    L: int = 1
    hcc_type: int = 0
    q1: int = 1
    lam: Fraction = Fraction(1)

    def __post_init__(self):
        if self.family not in ("rma", "hcc"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if self.family == "rma":
            if self.L < 1:
                raise ValueError("rma needs L >= 1")
        else:
            if self.hcc_type not in (1, 2, 3, 4):
                raise ValueError("hcc_type must be 1..4")
            if self.hcc_type == 2 and not (1 <= self.q1 <= self.q - 1):
                raise ValueError("type-2 needs 1 <= q1 <= q-1")
        lam = Fraction(self.lam)
        object.__setattr__(self, "lam", lam)
        if not (0 < lam <= 1):
            raise ValueError("lam must be in (0, 1]")

    @property
    def channel_branches(self) -> frozenset[int]:
        """Indices of branches wired straight to the channel (hcc only)."""
        if self.family == "hcc" and self.hcc_type in (3, 4):
            return frozenset([0])
        return frozenset()

    def branch_kinds(self) -> list[str]:
        """Constituent kind per branch for hcc specs."""
        if self.family != "hcc":
            raise ValueError("branch_kinds applies to hcc specs")
        t = self.hcc_type
        if t == 1:
            return ["acc"] * self.q
        if t == 2:
            return ["ff"] * self.q1 + ["acc"] * (self.q - self.q1)
        if t == 3:
            return ["ff"] + ["acc"] * (self.q - 1)
        return ["id"] + ["acc"] * (self.q - 1)

    def label(self) -> str:
        if self.family == "rma":
            s = f"rma:q={self.q},L={self.L}"
        else:
            s = f"hcc:type={self.hcc_type},q={self.q}"
            if self.hcc_type == 2:
                s += f",q1={self.q1}"
        if self.lam != 1:
            s += f",lambda={self.lam.numerator}/{self.lam.denominator}"
        return s


# ---------------------------------------------------------------------------
# 2. Constituent support-pair tables
# ---------------------------------------------------------------------------

@dataclass
class SupportTable:
    """Support-pair counts a[w][h] of one constituent code.

    exact=True: data is a list of rows of ints (or Fractions after
    averaging steps).  exact=False: data is a float64 array of natural
    logs with -inf for zero counts.  Rows always include w=0 with
    a[0][0] = 1 and a[0][h>0] = 0.
    """

    in_len: int
    out_len: int
    exact: bool
    data: object

    @property
    def w_max(self) -> int:
        return len(self.data) - 1

    @property
    def h_max(self) -> int:
        return len(self.data[0]) - 1

    def a(self, w: int, h: int):
        """Entry lookup; out-of-range indices count as zero."""
        if w < 0 or h < 0 or w > self.w_max or h > self.h_max:
            return NEG_INF if not self.exact else 0
        v = self.data[w][h]
        return float(v) if not self.exact else v


def _acc_table_exact(n: int, w_max: int, h_max: int) -> list[list[int]]:
    a = [[0] * (h_max + 1) for _ in range(w_max + 1)]
    a[0][0] = 1
    for w in range(2, w_max + 1):
        for h in range(1, h_max + 1):
            s = 0
            for d in range(1, w // 2 + 1):
                c3 = binom(h - d, w - 2 * d)
                if c3:
                    s += binom(n - h, d) * binom(h - 1, d - 1) * c3
            a[w][h] = s
    return a


def _acc_table_log(n: int, w_max: int, h_max: int) -> np.ndarray:
    lb = log_binom_table(n)
    out = np.full((w_max + 1, h_max + 1), NEG_INF)
    out[0, 0] = 0.0
    h = np.arange(h_max + 1)
    w = np.arange(w_max + 1)
    for d in range(1, w_max // 2 + 1):
        col_a = lb[n - h, d]
        col_b = np.where(h >= 1, lb[np.maximum(h - 1, 0), d - 1], NEG_INF)
        rows = h - d
        cols = w - 2 * d
        ok_h = rows >= 0
        ok_w = cols >= 0
        sub = np.full((w_max + 1, h_max + 1), NEG_INF)
        if ok_h.any() and ok_w.any():
            sub[np.ix_(ok_w, ok_h)] = lb[np.ix_(rows[ok_h], cols[ok_w])].T
        np.logaddexp(out, sub + (col_a + col_b)[None, :], out=out)
    return out


def siosef_accumulator(n: int, w_max: int | None = None,
                       h_max: int | None = None,
                       log_domain: bool = False) -> SupportTable:
    """Support-pair table of the terminated length-n accumulator 1/(1+D).

    a[w][h] counts subcode support pairs with input support size w and
    output support size h.  Optional w_max/h_max truncate the table
    (entries below the cut are still exact).
    """
    if n < 1:
        raise ValueError("n must be positive")
    w_max = n if w_max is None else min(w_max, n)
    h_max = n if h_max is None else min(h_max, n)
    if log_domain:
        data = _acc_table_log(n, w_max, h_max)
    else:
        data = _acc_table_exact(n, w_max, h_max)
    return SupportTable(in_len=n, out_len=n, exact=not log_domain, data=data)


def siosef_feedforward(n: int, w_max: int | None = None,
                       h_max: int | None = None,
                       log_domain: bool = False) -> SupportTable:
    """Support-pair table of the terminated length-n feedforward code 1+D.

    The table is the transpose of the accumulator's: input and output
    roles swap.
    """
    acc = siosef_accumulator(n, w_max=h_max, h_max=w_max,
                             log_domain=log_domain)
    if log_domain:
        data = np.asarray(acc.data).T.copy()
    else:
        aw, ah = acc.w_max, acc.h_max
        data = [[acc.data[w][h] for w in range(aw + 1)] for h in range(ah + 1)]
    return SupportTable(in_len=n, out_len=n, exact=not log_domain, data=data)


def siosef_repetition(k: int, q: int, log_domain: bool = False) -> SupportTable:
    """Support-pair table of the blockwise q-fold repetition of k bits.

    Every input support of size w maps to the union of its q-blocks, so
    a[w][q*w] = binom(k, w) and all other entries vanish.
    """
    if k < 1 or q < 1:
        raise ValueError("k and q must be positive")
    if log_domain:
        data = np.full((k + 1, q * k + 1), NEG_INF)
        lb = log_binom_table(k, k)
        for w in range(k + 1):
            data[w, q * w] = lb[k, w]
    else:
        data = [[0] * (q * k + 1) for _ in range(k + 1)]
        for w in range(k + 1):
            data[w][q * w] = binom(k, w)
    return SupportTable(in_len=k, out_len=q * k, exact=not log_domain, data=data)


def siosef_identity(k: int, log_domain: bool = False) -> SupportTable:
    """Support-pair table of the identity map on k bits: a[w][w] = binom(k, w)."""
    return siosef_repetition(k, 1, log_domain=log_domain)


def puncture_siosef(table: SupportTable, lam: Fraction,
                    h_cap: int | None = None) -> SupportTable:
    """Average a support table over uniformly random puncturing.

    A fraction lam of the out_len output positions survives; lam*out_len
    must be an integer.  The returned table counts the expected number of
    pairs by surviving output support size:
      a'[w][h'] = sum_h a[w][h] * C(h,h') * C(N-h, lam*N - h') / C(N, lam*N).
    """
    lam = Fraction(lam)
    if not (0 < lam <= 1):
        raise ValueError("lam must be in (0, 1]")
    n = table.out_len
    lam_n = lam * n
    if lam_n.denominator != 1:
        raise ValueError(f"lam * N = {lam_n} is not an integer")
    m = int(lam_n)
    h_hi = m if h_cap is None else min(h_cap, m)
    if lam == 1:
        return table
    if table.exact:
        den = binom(n, m)
        rows = []
        for w in range(table.w_max + 1):
            row_in = table.data[w]
            row = []
            for hp in range(h_hi + 1):
                s = 0
                for h in range(len(row_in)):
                    v = row_in[h]
                    if v:
                        s += v * binom(h, hp) * binom(n - h, m - hp)
                row.append(s / den if isinstance(s, Fraction) else Fraction(s, den))
            rows.append(row)
        return SupportTable(table.in_len, m, True, rows)
    lb = log_binom_table(n)
    src = np.asarray(table.data)
    h = np.arange(src.shape[1])
    out = np.full((src.shape[0], h_hi + 1), NEG_INF)
    for hp in range(h_hi + 1):
        add = lb[h, hp] + lb[n - h, m - hp]
        out[:, hp] = logsumexp(src + add[None, :], axis=1)
    out -= lb[n, m]
    return SupportTable(table.in_len, m, False, out)


# ---------------------------------------------------------------------------
# 3. Ensemble-average enumerators
# ---------------------------------------------------------------------------

@dataclass
class EnsembleEnumerator:
    """Ensemble-average stopping-set enumerator, resolved by info support.

    table[w][h] is the average number of stopping sets of transmitted
    size h whose info-word support has size w; ssef() sums over w.
    h_cap, when set, marks an exact truncation: entries with h <= h_cap
    are exact, larger sizes are absent.
    """

    spec: EnsembleSpec
    block_len: int
    out_len: int
    exact: bool
    table: object
    h_cap: int | None = None
    _ssef: object = field(default=None, repr=False)

    def ssef(self):
        """Average count of stopping sets per size h (index 0..h_cap or out_len).

        Exact backend: list of Fractions.  Log backend: float64 array of
        natural logs.
        """
        if self._ssef is None:
            if self.exact:
                h_n = len(self.table[0])
                s = [sum(row[h] for row in self.table) for h in range(h_n)]
                self._ssef = [Fraction(v) for v in s]
            else:
                self._ssef = logsumexp(np.asarray(self.table), axis=0)
        return self._ssef


def ssef(enumerator: EnsembleEnumerator):
    """Plain stopping-set size enumerator: table summed over info support."""
    return enumerator.ssef()


def _log_matmul(a: np.ndarray, b: np.ndarray, chunk: int = 32) -> np.ndarray:
    """C[i,j] = logsumexp_k (a[i,k] + b[k,j]) without materializing i*k*j."""
    ni, nk = a.shape
    nj = b.shape[1]
    big = np.full((ni, nj), NEG_INF)
    for k0 in range(0, nk, chunk):
        blk = a[:, k0:k0 + chunk, None] + b[None, k0:k0 + chunk, :]
        np.maximum(big, blk.max(axis=1), out=big)
    safe = np.where(np.isfinite(big), big, 0.0)
    acc = np.zeros((ni, nj))
    with np.errstate(invalid="ignore"):
        for k0 in range(0, nk, chunk):
            blk = a[:, k0:k0 + chunk, None] + b[None, k0:k0 + chunk, :]
            acc += np.exp(blk - safe[:, None, :]).sum(axis=1)
    out = np.where(acc > 0, safe + np.log(np.where(acc > 0, acc, 1.0)), NEG_INF)
    return out


_ACC_LOG_CACHE: dict[tuple[int, int, int], np.ndarray] = {}


def _acc_log_cached(n: int, w_max: int, h_max: int) -> np.ndarray:
    key = (n, w_max, h_max)
    hit = _ACC_LOG_CACHE.get(key)
    if hit is None:
        # One full-size table per n serves every truncation by slicing.
        full = _ACC_LOG_CACHE.get((n, n, n))
        if full is None and (w_max, h_max) == (n, n):
            full = _acc_table_log(n, n, n)
            _ACC_LOG_CACHE[(n, n, n)] = full
        if full is not None:
            hit = full[: w_max + 1, : h_max + 1]
        else:
            hit = _acc_table_log(n, w_max, h_max)
            _ACC_LOG_CACHE[key] = hit
    return hit


def iossef_rma(spec: EnsembleSpec, n: int, h_max: int | None = None,
               log_domain: bool | None = None) -> EnsembleEnumerator:
    """Ensemble-average stopping-set enumerator of an rma ensemble.

    Chains the repetition table through L accumulator tables, each behind
    a uniform interleaver (division by C(n, input size) per stage), then
    applies random puncturing when spec.lam < 1.

    h_max truncates the result at output size h_max.  Truncation is exact
    for unpunctured ensembles because an accumulator stage at most halves
    a support (a[w][h] = 0 for h < ceil(w/2)), so stage l only needs
    sizes up to h_max * 2^(L-l).  Punctured runs always build the full
    final table first.
    """
    if spec.family != "rma":
        raise ValueError("iossef_rma needs an rma spec")
    q, big_l = spec.q, spec.L
    if n % q:
        raise ValueError(f"q={q} must divide n={n}")
    k = n // q
    if log_domain is None:
        log_domain = n > EXACT_CROSSOVER
    punctured = spec.lam != 1
    if h_max is None or punctured:
        caps = [n] * (big_l + 1)
    else:
        caps = [min(n, h_max << (big_l - l)) for l in range(big_l + 1)]

    if log_domain:
        acc = _acc_log_cached(n, caps[0], max(caps[1:], default=caps[0]))
        lbn = log_binom_table(n)[n]
        lbk = log_binom_table(k)[k]
        w_top = min(k, caps[0] // q)
        w_idx = np.arange(w_top + 1)
        t = lbk[w_idx][:, None] + acc[q * w_idx, : caps[1] + 1] \
            - lbn[q * w_idx][:, None]
        # Rows of the repeated word with qw > caps[0] cannot reach h_max.
        if w_top < k:
            t = np.vstack([t, np.full((k - w_top, caps[1] + 1), NEG_INF)])
        for l in range(2, big_l + 1):
            b = acc[: caps[l - 1] + 1, : caps[l] + 1] \
                - lbn[: caps[l - 1] + 1][:, None]
            t = _log_matmul(t[:, : caps[l - 1] + 1], b)
        table = t
    else:
        acc_t = _acc_table_exact(n, caps[0], max(caps[1:], default=caps[0]))
        rows = []
        for w in range(k + 1):
            if q * w > caps[0]:
                rows.append([Fraction(0)] * (caps[1] + 1))
                continue
            ckw = binom(k, w)
            den = binom(n, q * w)
            rows.append([Fraction(ckw * acc_t[q * w][h], den)
                         for h in range(caps[1] + 1)])
        for l in range(2, big_l + 1):
            inv = [Fraction(1, binom(n, hp)) for hp in range(caps[l - 1] + 1)]
            nxt = []
            for row in rows:
                out = [Fraction(0)] * (caps[l] + 1)
                for hp in range(min(len(row), caps[l - 1] + 1)):
                    v = row[hp]
                    if v:
                        f = v * inv[hp]
                        arow = acc_t[hp]
                        for h in range(caps[l] + 1):
                            if arow[h]:
                                out[h] += f * arow[h]
                nxt.append(out)
            rows = nxt
        table = rows

    out_len = n
    h_cap = None if caps[big_l] == n else caps[big_l]
    enum = EnsembleEnumerator(spec, n, out_len, not log_domain, table, h_cap)
    if punctured:
        enum = _puncture_enumerator(enum, spec.lam, h_max)
    return enum


def _puncture_enumerator(enum: EnsembleEnumerator, lam: Fraction,
                         h_max: int | None) -> EnsembleEnumerator:
    tab = SupportTable(0, enum.out_len, enum.exact, enum.table)
    pt = puncture_siosef(tab, lam, h_cap=h_max)
    h_cap = None if h_max is None or h_max >= pt.out_len else h_max
    return EnsembleEnumerator(enum.spec, enum.block_len, pt.out_len,
                              enum.exact, pt.data, h_cap)


def _branch_tables(spec: EnsembleSpec, k: int, log_domain: bool):
    kinds = spec.branch_kinds()
    built = {}
    for kind in set(kinds):
        if kind == "acc":
            built[kind] = siosef_accumulator(k, log_domain=log_domain)
        elif kind == "ff":
            built[kind] = siosef_feedforward(k, log_domain=log_domain)
        else:
            built[kind] = siosef_identity(k, log_domain=log_domain)
    return [built[kind] for kind in kinds]


def iossef_hcc(spec: EnsembleSpec, n: int, h_max: int | None = None,
               log_domain: bool | None = None) -> EnsembleEnumerator:
    """Ensemble-average stopping-set enumerator of an hcc ensemble.

    For each info support size w the branch tables are convolved over the
    branches feeding the inner accumulator (their output supports add up
    inside the inner interleaver), the inner table maps that total
    through the last uniform interleaver, and branches wired straight to
    the channel contribute their own output support to the transmitted
    size.  Every branch interleaver is uniform, which costs one factor
    C(k, w) per branch beyond the first.
    """
    if spec.family != "hcc":
        raise ValueError("iossef_hcc needs an hcc spec")
    q = spec.q
    if n % q:
        raise ValueError(f"q={q} must divide n={n}")
    k = n // q
    if log_domain is None:
        log_domain = n > EXACT_CROSSOVER
    direct = sorted(spec.channel_branches)
    inner_branches = [l for l in range(q) if l not in direct]
    m = len(inner_branches) * k
    tables = _branch_tables(spec, k, log_domain)
    inner = siosef_accumulator(m, log_domain=log_domain)

    if not log_domain:
        rows_out = []
        for w in range(k + 1):
            ckw = binom(k, w)
            g = [1]
            for l in inner_branches:
                row = tables[l].data[w]
                ng = [0] * (len(g) + len(row) - 1)
                for i, gv in enumerate(g):
                    if gv:
                        for j, rv in enumerate(row):
                            if rv:
                                ng[i + j] += gv * rv
                g = ng
            # Average through the inner interleaver and accumulator.
            mixed = [Fraction(0)] * (m + 1)
            for mm in range(min(len(g), m + 1)):
                if g[mm]:
                    f = Fraction(g[mm], binom(m, mm))
                    arow = inner.data[mm]
                    for h in range(m + 1):
                        if arow[h]:
                            mixed[h] += f * arow[h]
            if direct:
                drow = tables[direct[0]].data[w]
                total = [Fraction(0)] * (n + 1)
                for hq in range(len(drow)):
                    if drow[hq]:
                        for h in range(m + 1):
                            if mixed[h]:
                                total[hq + h] += drow[hq] * mixed[h]
            else:
                total = mixed + [Fraction(0)] * (n - m)
            den = ckw ** (q - 1) if w else 1
            rows_out.append([Fraction(v, den) if not isinstance(v, Fraction)
                             else v / den for v in total])
        table = rows_out
    else:
        lbm = log_binom_table(m)[m]
        lbk = log_binom_table(k)[k]
        rows = np.full((k + 1, n + 1), NEG_INF)
        inner_arr = np.asarray(inner.data)
        for w in range(k + 1):
            g = np.ones(1)
            g_log0 = 0.0
            for l in inner_branches:
                row = np.asarray(tables[l].data)[w]
                shift = row.max()
                if shift == NEG_INF:
                    g = None
                    break
                g = np.convolve(g, np.exp(row - shift))
                g_log0 += shift
            if g is None:
                continue
            with np.errstate(divide="ignore"):
                g_log = np.where(g > 0, np.log(np.where(g > 0, g, 1.0)),
                                 NEG_INF) + g_log0
            g_log = g_log[: m + 1] - lbm[: len(g_log[: m + 1])]
            mixed = logsumexp(g_log[:, None] + inner_arr[: len(g_log)], axis=0)
            if direct:
                drow = np.asarray(tables[direct[0]].data)[w]
                tot = np.full(n + 1, NEG_INF)
                for hq in np.nonzero(np.isfinite(drow))[0]:
                    np.logaddexp(tot[hq:hq + m + 1], drow[hq] + mixed,
                                 out=tot[hq:hq + m + 1])
            else:
                tot = np.concatenate([mixed, np.full(n - m, NEG_INF)])
            rows[w] = tot - (q - 1) * lbk[w]
        table = rows

    enum = EnsembleEnumerator(spec, n, n, not log_domain, table, None)
    if spec.lam != 1:
        enum = _puncture_enumerator(enum, spec.lam, h_max)
    return enum


def iossef(spec: EnsembleSpec, n: int, h_max: int | None = None,
           log_domain: bool | None = None) -> EnsembleEnumerator:
    """Family dispatch for iossef_rma / iossef_hcc."""
    if spec.family == "rma":
        return iossef_rma(spec, n, h_max=h_max, log_domain=log_domain)
    return iossef_hcc(spec, n, h_max=h_max, log_domain=log_domain)
