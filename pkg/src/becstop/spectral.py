"""Asymptotic stopping-set spectral shape functions and growth-rate roots.

The normalized log of the average stopping-set enumerator concentrates,
as the block length grows, on the solution of a constrained entropy
maximization.  This module evaluates that supremum for plain and
punctured repeat-accumulate chains and for the four hybrid layouts, and
extracts the largest normalized size below which the supremum stays
zero.

Every curve value is computed by two independent routes and the
disagreement is reported: (a) the stationarity system of the objective,
swept over the free input fraction with all cubic roots kept, seeded
additionally by a max-plus grid scan, plus every combination of
active-boundary families, and (b) stratified multi-start projected
coordinate ascent on the per-stage-maximized envelope.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import optimize

from .numerics import binary_entropy_vec as _H
from .enumerators import EnsembleSpec

TOL_ZERO = 1e-6
TOL_POS = 1e-4
RHO_STEP = 1e-3
BISECT_WIDTH = 1e-5
DISAGREE_TOL = 1e-6
MULTISTARTS = 64
SPECTRAL_SEED = 0x5BEC
_TINY = 1e-300
_INF = float("inf")


# ---------------------------------------------------------------------------
# 1. Stage machinery
# ---------------------------------------------------------------------------


def _ent(coef, x):
    """coef * H(x / coef), continued by 0 as coef -> 0."""
    coef = np.asarray(coef, dtype=float)
    x = np.asarray(x, dtype=float)
    safe = np.where(coef > _TINY, coef, 1.0)
    with np.errstate(all="ignore"):
        ratio = np.clip(x / safe, 0.0, 1.0)
        return np.where(coef > _TINY, coef * _H(ratio), 0.0)


def _stage_bounds(u, v):
    lo = np.maximum(0.0, u - v)
    hi = np.minimum(np.minimum(v, 1.0 - v), 0.5 * u)
    return lo, hi


def _stage_inner(u, v, g):
    """Count exponent of one accumulator stage at split fraction g.

    The three factors count erased-run placements: runs inside the
    complement, starts inside the support, and leftover support weight.
    """
    return _ent(1.0 - v, g) + _ent(v, g) + _ent(v - g, u - 2.0 * g)


def _cubic_roots(c3, c2, c1, c0):
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0, vectorized.

    Returns an array with one extra trailing axis of length 3, padded
    with nan where fewer real roots exist.  c3 must be nonzero.
    """
    c3, c2, c1, c0 = np.broadcast_arrays(
        *(np.asarray(c, dtype=float) for c in (c3, c2, c1, c0)))
    with np.errstate(all="ignore"):
        a = c2 / c3
        b = c1 / c3
        c = c0 / c3
        p = b - a * a / 3.0
        q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
        disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
        shape = a.shape + (3,)
        roots = np.full(shape, np.nan)
        # one real root
        one = disc > 0
        sq = np.sqrt(np.where(one, disc, 0.0))
        t1 = np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq)
        roots[..., 0] = np.where(one, t1 - a / 3.0, np.nan)
        # three real roots (possibly repeated)
        three = ~one
        r = np.sqrt(np.maximum(-p / 3.0, 0.0))
        r3 = np.where(r > 0, r ** 3, 1.0)
        cosarg = np.clip(-q / (2.0 * r3), -1.0, 1.0)
        theta = np.arccos(cosarg) / 3.0
        for k in range(3):
            tk = 2.0 * r * np.cos(theta - 2.0 * np.pi * k / 3.0)
            roots[..., k] = np.where(three, tk - a / 3.0, roots[..., k])
        return np.sort(roots, axis=-1)


def _stage_cubic_roots(u, v):
    """Real stationary points of the stage exponent in g."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c3 = np.full(np.broadcast(u, v).shape, -5.0)
    c2 = 4.0 + 5.0 * u - 5.0 * v
    c1 = -(4.0 * u * (1.0 - v) + u * u)
    c0 = (1.0 - v) * u * u
    return _cubic_roots(c3, c2, c1, c0)


def _stage_inner_max(u, v):
    """Max over feasible g of the stage exponent; (value, argmax).

    Infeasible stages (u > 2v or v > 1) give -inf.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = _stage_bounds(u, v)
    feas = hi >= lo - 1e-14
    lo_s = np.where(feas, lo, 0.0)
    hi_s = np.where(feas, np.maximum(hi, lo_s), lo_s)
    roots = _stage_cubic_roots(u, v)
    roots = np.where(np.isnan(roots), lo_s[..., None], roots)
    cands = np.concatenate([lo_s[..., None], hi_s[..., None],
                            np.clip(roots, lo_s[..., None], hi_s[..., None])],
                           axis=-1)
    vals = _stage_inner(u[..., None], v[..., None], cands)
    idx = np.argmax(vals, axis=-1)
    best = np.take_along_axis(vals, idx[..., None], axis=-1)[..., 0]
    arg = np.take_along_axis(cands, idx[..., None], axis=-1)[..., 0]
    best = np.where(feas, best, -_INF)
    arg = np.where(feas, arg, np.nan)
    return best, arg


# ---------------------------------------------------------------------------
# 2. Objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralPointVars:
    """Argmax variables of one spectral evaluation.

    For the chain ensembles betas runs beta_0..beta_L (beta_0 the input
    fraction, beta_L the stopping-set fraction) and gammas the per-stage
    split fractions.  Hybrid layouts also carry alpha, the branch-output
    mean beta_p and the inner-output fraction delta.
    """

    rho: float
    betas: tuple
    gammas: tuple
    alpha: float | None = None
    beta_p: float | None = None
    delta: float | None = None


@dataclass(frozen=True)
class SpectralResult:
    value: float
    vars: SpectralPointVars | None
    value_stationarity: float
    value_ascent: float
    agreement: float
    disagree: bool
    grad_norm: float | None
    converged: bool


@dataclass(frozen=True)
class Rho0Result:
    rho0: float | None
    never_positive: bool = False
    first_positive: float | None = None


@dataclass(frozen=True)
class SpectralCurve:
    spec: EnsembleSpec
    rho_grid: np.ndarray
    values: np.ndarray
    results: tuple
    rho0: float | None = None


def f_rma(vars: SpectralPointVars, q: int, L: int) -> float:
    """Exponent of the chain objective at explicit variables.

    Raises ValueError when the variables violate the feasibility box
    (entropy arguments outside [0, 1]).
    """
    betas = np.asarray(vars.betas, dtype=float)
    gammas = np.asarray(vars.gammas, dtype=float)
    if betas.shape != (L + 1,) or gammas.shape != (L,):
        raise ValueError("need L+1 betas and L gammas")
    if np.any(betas < -1e-12) or np.any(betas > 1 + 1e-12):
        raise ValueError("betas out of [0, 1]")
    val = float(_H(betas[0])) / q
    for l in range(1, L + 1):
        u, v, g = betas[l - 1], betas[l], gammas[l - 1]
        lo, hi = _stage_bounds(u, v)
        if not lo - 1e-9 <= g <= hi + 1e-9:
            raise ValueError(f"gamma_{l} outside its feasible interval")
        g = min(max(g, lo), hi)
        val += float(_stage_inner(u, v, g)) - float(_H(u))
    return val


def grad_f_rma(vars: SpectralPointVars, q: int, L: int) -> np.ndarray:
    """Analytic gradient [d/d beta_0..beta_{L-1}, d/d gamma_1..gamma_L].

    Valid at interior points only; beta_L is pinned at rho and carries
    no component.
    """
    b = np.asarray(vars.betas, dtype=float)
    g = np.asarray(vars.gammas, dtype=float)
    out = np.empty(2 * L)
    with np.errstate(all="ignore"):
        out[0] = ((1.0 - q) / q) * math.log((1.0 - b[0]) / b[0]) \
            + math.log((b[1] + g[0] - b[0]) / (b[0] - 2.0 * g[0]))
        for l in range(1, L):
            num = (1.0 - b[l] - g[l - 1]) * b[l] ** 2 \
                * (b[l + 1] + g[l] - b[l])
            den = (1.0 - b[l]) ** 2 * (b[l] + g[l - 1] - b[l - 1]) \
                * (b[l] - 2.0 * g[l])
            out[l] = math.log(num / den)
        for l in range(1, L + 1):
            num = (1.0 - b[l] - g[l - 1]) * (b[l - 1] - 2.0 * g[l - 1]) ** 2
            den = g[l - 1] ** 2 * (b[l] + g[l - 1] - b[l - 1])
            out[L + l - 1] = math.log(num / den)
    return out


def _env_rma(q, B):
    """Chain objective with per-stage split maximized out; B is (..., L+1)."""
    val = _H(B[..., 0]) / q
    for l in range(1, B.shape[-1]):
        u = B[..., l - 1]
        v = B[..., l]
        sv, _ = _stage_inner_max(u, v)
        val = val + sv - _H(u)
    return val


def _env_rma_punctured(q, lam, rho_p, B):
    """Punctured chain objective; the final column of B is free."""
    bl = B[..., -1]
    a = lam * rho_p
    c = lam * (1.0 - rho_p)
    feas = (bl >= a - 1e-12) & (bl <= 1.0 - c + 1e-12)
    tail = _ent(bl, a) + _ent(1.0 - bl, c) - float(_H(lam))
    with np.errstate(all="ignore"):
        total = (_env_rma(q, B) + tail) / lam
    return np.where(feas, total, -_INF)


def _hcc_dim(spec: EnsembleSpec) -> int:
    return spec.q if spec.hcc_type == 4 else spec.q + 1


def _env_hcc(spec: EnsembleSpec, rho, X):
    """Hybrid objectives over X rows; layout depends on the type.

    type 1/2: [alpha, beta_1..beta_q]; type 3: [alpha, beta_1 (direct),
    beta_2..beta_q]; type 4: [alpha, beta_2..beta_q].
    """
    q = float(spec.q)
    t = spec.hcc_type
    rho_arr = np.full(X.shape[:-1], float(rho))
    if t in (1, 2):
        al = X[..., 0]
        betas = X[..., 1:]
        bp = betas.mean(axis=-1)
        val = -((q - 1.0) / q) * _H(al)
        q1 = spec.q1 if t == 2 else 0
        for l in range(spec.q):
            if l < q1:
                sv, _ = _stage_inner_max(betas[..., l], al)
            else:
                sv, _ = _stage_inner_max(al, betas[..., l])
            val = val + sv / q
        sv, _ = _stage_inner_max(bp, rho_arr)
        return val + sv - _H(bp)
    if t == 3:
        al = X[..., 0]
        b1 = X[..., 1]
        betas = X[..., 2:]
        delta = (q * rho_arr - b1) / (q - 1.0)
        feas = (delta >= -1e-12) & (delta <= 1.0 + 1e-12)
        delta = np.clip(delta, 0.0, 1.0)
        bp = betas.mean(axis=-1)
        sv_ff, _ = _stage_inner_max(b1, al)
        val = -((q - 1.0) / q) * _H(al) + sv_ff / q
        for l in range(spec.q - 1):
            sv, _ = _stage_inner_max(al, betas[..., l])
            val = val + sv / q
        sv, _ = _stage_inner_max(bp, delta)
        val = val + ((q - 1.0) / q) * (sv - _H(bp))
        return np.where(feas, val, -_INF)
    al = X[..., 0]
    betas = X[..., 1:]
    delta = (q * rho_arr - al) / (q - 1.0)
    feas = (delta >= -1e-12) & (delta <= 1.0 + 1e-12)
    delta = np.clip(delta, 0.0, 1.0)
    bp = betas.mean(axis=-1)
    val = -((q - 2.0) / q) * _H(al)
    for l in range(spec.q - 1):
        sv, _ = _stage_inner_max(al, betas[..., l])
        val = val + sv / q
    sv, _ = _stage_inner_max(bp, delta)
    val = val + ((q - 1.0) / q) * (sv - _H(bp))
    return np.where(feas, val, -_INF)


# ---------------------------------------------------------------------------
# 3. Vectorized projected coordinate ascent
# ---------------------------------------------------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _eval_at(obj, X, d, xs):
    Y = X.copy()
    Y[:, d] = xs
    return obj(Y)


def _golden(obj, X, d, a, b, iters=36):
    h = b - a
    x1 = a + (1.0 - _INVPHI) * h
    x2 = a + _INVPHI * h
    f1 = _eval_at(obj, X, d, x1)
    f2 = _eval_at(obj, X, d, x2)
    for _ in range(iters):
        m = f1 > f2
        b = np.where(m, x2, b)
        a = np.where(m, a, x1)
        x_new = np.where(m, a + (1.0 - _INVPHI) * (b - a),
                         a + _INVPHI * (b - a))
        f_new = _eval_at(obj, X, d, x_new)
        x1o, f1o = x1, f1
        x1 = np.where(m, x_new, x2)
        f1 = np.where(m, f_new, f2)
        x2 = np.where(m, x1o, x_new)
        f2 = np.where(m, f1o, f_new)
    pick = f1 > f2
    return np.where(pick, x1, x2), np.where(pick, f1, f2)


def _ascend(obj, X, bounds_fn, free, sweeps=10, grid=17, tol=1e-13):
    """Coordinate ascent on rows of X; returns (X, values, converged)."""
    rows = np.arange(X.shape[0])
    vals = obj(X)
    gain = _INF
    for _ in range(sweeps):
        prev = vals.copy()
        for d in free:
            lo, hi = bounds_fn(X, d)
            hi = np.maximum(hi, lo)
            ts = np.linspace(0.0, 1.0, grid)
            C = lo[:, None] + ts[None, :] * (hi - lo)[:, None]
            XX = np.repeat(X[:, None, :], grid, axis=1)
            XX[:, :, d] = C
            V = obj(XX.reshape(-1, X.shape[1])).reshape(X.shape[0], grid)
            V = np.where(np.isfinite(V), V, -_INF)
            bi = np.argmax(V, axis=1)
            a = C[rows, np.maximum(bi - 1, 0)]
            b = C[rows, np.minimum(bi + 1, grid - 1)]
            xg, fg = _golden(obj, X, d, a, b)
            cx = np.stack([C[rows, bi], xg, X[:, d]], axis=1)
            cf = np.stack([V[rows, bi], fg, vals], axis=1)
            cf = np.where(np.isfinite(cf), cf, -_INF)
            ci = np.argmax(cf, axis=1)
            X[:, d] = cx[rows, ci]
            vals = cf[rows, ci]
        with np.errstate(invalid="ignore"):
            gain = float(np.max(np.where(np.isfinite(vals) & np.isfinite(prev),
                                         vals - prev, 0.0)))
        if gain < tol:
            break
    return X, vals, gain < 1e-9


# ---------------------------------------------------------------------------
# 4. Chain ensembles: method (b) starts and bounds
# ---------------------------------------------------------------------------


def _rma_bounds(rho, L, lam=None, rho_p=None):
    def bounds(X, d):
        n_rows = X.shape[0]
        if d == 0:
            lo = np.zeros(n_rows)
        else:
            lo = 0.5 * X[:, d - 1]
        if d == L and lam is not None:
            lo = np.maximum(lo, lam * rho_p)
            hi = np.full(n_rows, 1.0 - lam * (1.0 - rho_p))
        else:
            hi = np.minimum(1.0, 2.0 * X[:, d + 1])
        return lo, np.maximum(hi, lo)
    return bounds


def _stable_key(*parts) -> int:
    """Process-independent integer key for seeding substreams."""
    return zlib.crc32(repr(parts).encode("utf-8"))


def _rma_starts(q, L, rho, tag, lam=None, rho_p=None, count=MULTISTARTS):
    """Latin-hypercube starts over the feasible chain polytope."""
    key = _stable_key(q, L, round(float(rho), 12), tag)
    rng = np.random.default_rng(np.random.SeedSequence((SPECTRAL_SEED, key)))
    B = np.empty((count, L + 1))
    if lam is None:
        B[:, L] = rho
    else:
        lo = lam * rho_p
        hi = 1.0 - lam * (1.0 - rho_p)
        u = (rng.permutation(count) + rng.random(count)) / count
        B[:, L] = lo + u * (hi - lo)
    for l in range(L - 1, -1, -1):
        hi = np.minimum(1.0, 2.0 * B[:, l + 1])
        u = (rng.permutation(count) + rng.random(count)) / count
        B[:, l] = u * hi
    # deterministic chains: flat, doubling, and two intermediate slopes
    for i, c in enumerate((1.0, 2.0, 1.4, 0.6)):
        if i >= count:
            break
        last = B[i, L]
        for l in range(L - 1, -1, -1):
            B[i, l] = min(1.0, c * B[i, l + 1])
    return B


# ---------------------------------------------------------------------------
# 5. Chain ensembles: method (a) stationarity sweep and boundary families
# ---------------------------------------------------------------------------


def _stage_cubic_value(u, v, g):
    """The stage stationarity polynomial P(g); zero at interior optima."""
    return (-5.0 * g ** 3 + (4.0 + 5.0 * u - 5.0 * v) * g ** 2
            - (4.0 * u * (1.0 - v) + u * u) * g + (1.0 - v) * u * u)


def _beta_cubic_coeffs(u, A, Bc):
    """Coefficients in v of P(A - Bc*v; u, v), highest power first."""
    c3 = 5.0 * Bc ** 3 - 5.0 * Bc ** 2
    c2 = (-15.0 * A * Bc ** 2 + (4.0 + 5.0 * u) * Bc ** 2
          + 10.0 * A * Bc - 4.0 * u * Bc)
    c1 = (15.0 * A ** 2 * Bc - 2.0 * A * Bc * (4.0 + 5.0 * u)
          - 5.0 * A ** 2 + (4.0 * u + u * u) * Bc + 4.0 * u * A - u * u)
    c0 = (-5.0 * A ** 3 + (4.0 + 5.0 * u) * A ** 2
          - (4.0 * u + u * u) * A + u * u)
    return c3, c2, c1, c0


def _chain_step_coeffs(q, stage, b_prev, g_prev, b_prev2):
    """Linear relation gamma_l = (1+E) b_{l-1}/(1+2E) - beta_l/(1+2E).

    Stage 1 takes E from the input-fraction stationarity, later stages
    from the previous stage's variables.
    """
    with np.errstate(all="ignore"):
        if stage == 1:
            E = ((1.0 - b_prev) / b_prev) ** ((q - 1.0) / q)
        else:
            num = (1.0 - b_prev) ** 2 * (b_prev + g_prev - b_prev2)
            den = (1.0 - b_prev - g_prev) * b_prev ** 2
            E = num / den
        E = np.where(np.isfinite(E) & (E > 0), E, np.nan)
        A = (1.0 + E) * b_prev / (1.0 + 2.0 * E)
        Bc = 1.0 / (1.0 + 2.0 * E)
    return A, Bc


def _chain_solve(q, L, rho, b0, path):
    """Follow one cubic-root path from b0 arrays; nan marks dead chains.

    Returns (betas list, gammas list, gamma_L, residual).
    """
    b0 = np.asarray(b0, dtype=float)
    betas = [b0]
    gammas = []
    b_prev2 = None
    with np.errstate(all="ignore"):
        for stage in range(1, L + 1):
            A, Bc = _chain_step_coeffs(
                q, stage, betas[-1], gammas[-1] if gammas else None, b_prev2)
            if stage == L:
                g_last = A - Bc * rho
                lo, hi = _stage_bounds(betas[-1], np.full_like(b0, rho))
                bad = (g_last < lo - 1e-7) | (g_last > hi + 1e-7)
                g_last = np.where(bad, np.nan, g_last)
                res = _stage_cubic_value(betas[-1], rho, g_last)
                return betas, gammas, g_last, res
            c3, c2, c1, c0 = _beta_cubic_coeffs(betas[-1], A, Bc)
            roots = _cubic_roots(c3, c2, c1, c0)
            bl = roots[..., path[stage - 1]]
            bl = np.where((bl > 1e-12) & (bl < 1.0 - 1e-12), bl, np.nan)
            gl = A - Bc * bl
            lo, hi = _stage_bounds(betas[-1], bl)
            gl = np.where((gl >= lo - 1e-7) & (gl <= hi + 1e-7), gl, np.nan)
            b_prev2 = betas[-1]
            betas.append(bl)
            gammas.append(gl)
    raise AssertionError("unreachable")


def _chain_candidate(q, L, rho, b0_scalar, path):
    """Reconstruct explicit variables for one solved chain."""
    betas, gammas, g_last, _ = _chain_solve(
        q, L, rho, np.array([b0_scalar]), path)
    bs = [float(b[0]) for b in betas] + [float(rho)]
    gs = [float(g[0]) for g in gammas] + [float(g_last[0])]
    if any(math.isnan(x) for x in bs + gs):
        return None
    # project split fractions into their boxes before evaluating
    for l in range(1, L + 1):
        lo, hi = _stage_bounds(bs[l - 1], bs[l])
        if math.isnan(gs[l - 1]):
            return None
        gs[l - 1] = min(max(gs[l - 1], float(lo)), float(hi))
    val = float(_H(np.asarray(bs[0]))) / q
    for l in range(1, L + 1):
        val += float(_stage_inner(bs[l - 1], bs[l], gs[l - 1])) \
            - float(_H(np.asarray(bs[l - 1])))
    return val, tuple(bs), tuple(gs)


def _b0_grid():
    geo = np.geomspace(1e-6, 0.2, 130)
    lin = np.linspace(0.2, 0.999, 130)
    return np.unique(np.concatenate([geo, lin]))


def _interior_candidates(q, L, rho):
    """Stationarity solutions of the chain system, every root path."""
    b0 = _b0_grid()
    cands = []
    paths = list(itertools.product(range(3), repeat=max(L - 1, 0))) or [()]
    for path in paths:
        _, _, _, res = _chain_solve(q, L, rho, b0, path)
        with np.errstate(invalid="ignore"):
            ok = np.isfinite(res[:-1]) & np.isfinite(res[1:]) \
                & (np.sign(res[:-1]) * np.sign(res[1:]) < 0)
        if not np.any(ok):
            continue
        lo = b0[:-1][ok].copy()
        hi = b0[1:][ok].copy()
        flo = res[:-1][ok].copy()
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            _, _, _, fm = _chain_solve(q, L, rho, mid, path)
            with np.errstate(invalid="ignore"):
                same = np.sign(fm) == np.sign(flo)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        for r in 0.5 * (lo + hi):
            cand = _chain_candidate(q, L, rho, float(r), path)
            if cand is not None:
                cands.append(cand)
    return cands


@lru_cache(maxsize=1)
def _dp_env_table():
    """Stage envelope matrix env[i, j] = sup_g inner(b_i, b_j, g) - H(b_i).

    Depends only on the grid, so one build serves every (q, L, rho)
    query; built in row blocks to bound the cubic-solver temporaries.
    """
    g = np.unique(np.concatenate([
        np.geomspace(1e-7, 0.05, 200),
        np.linspace(0.05, 1.0 - 1e-7, 900)]))
    hu = _H(g)
    env = np.empty((g.size, g.size))
    step = 256
    for i0 in range(0, g.size, step):
        blk = slice(i0, min(i0 + step, g.size))
        sv, _ = _stage_inner_max(g[blk][:, None], g[None, :])
        env[blk] = sv - hu[blk][:, None]
    return g, env


def _dp_chain_candidate(q, L, rho):
    """Best chain over the beta grid by max-plus dynamic programming.

    Sorted-index root paths lose continuity in the b0 sweep where a
    stage cubic's discriminant changes sign, which can hide whole
    critical-point families; this scan is immune to that and its output
    seeds the Newton polish of the stationarity system.
    """
    grid, env = _dp_env_table()
    val = _H(grid) / q
    back = []
    for _ in range(L - 1):
        tot = val[:, None] + env
        arg = np.argmax(tot, axis=0)
        back.append(arg)
        val = tot[arg, np.arange(grid.size)]
    sv_last, _ = _stage_inner_max(grid, np.full_like(grid, rho))
    tot = val + sv_last - _H(grid)
    j = int(np.argmax(tot))
    if not np.isfinite(tot[j]):
        return None
    idxs = [j]
    for arg in reversed(back):
        idxs.append(int(arg[idxs[-1]]))
    idxs.reverse()
    X = np.array([[grid[i] for i in idxs] + [rho]])
    X, vals, _ = _ascend(_env_rma_obj(q), X, _rma_bounds(rho, L),
                         list(range(L)), sweeps=8, grid=21)
    if not np.isfinite(vals[0]):
        return None
    bs = tuple(float(b) for b in X[0])
    gs = []
    for l in range(1, L + 1):
        _, ga = _stage_inner_max(np.asarray(bs[l - 1]), np.asarray(bs[l]))
        ga = float(ga)
        if math.isnan(ga):
            return None
        gs.append(ga)
    return float(vals[0]), bs, tuple(gs)


_BOUNDARY_FAMILIES = 4


def _combo_objective(q, rho, fams):
    """Chain objective with every split pinned to one boundary family.

    fams is an integer matrix (rows x L): 0 the lower end, 1 g = beta_l,
    2 g = 1 - beta_l, 3 g = beta_{l-1}/2.
    """
    def obj(B):
        n_all = B.shape[0]
        reps = n_all // fams.shape[0]
        fam_rows = np.repeat(fams, reps, axis=0) if reps > 1 else fams
        val = _H(B[:, 0]) / q
        for l in range(1, B.shape[1]):
            u = B[:, l - 1]
            v = B[:, l]
            lo, hi = _stage_bounds(u, v)
            choice = fam_rows[:, l - 1]
            g = np.where(choice == 0, lo,
                         np.where(choice == 1, v,
                                  np.where(choice == 2, 1.0 - v, 0.5 * u)))
            ok = (hi >= lo - 1e-14) & (g >= lo - 1e-12) & (g <= hi + 1e-12)
            g = np.clip(g, lo, np.maximum(hi, lo))
            sv = _stage_inner(u, v, g) - _H(u)
            val = np.where(ok, val + sv, -_INF)
        return val
    return obj


def _boundary_candidates(q, L, rho):
    """Best value over all 4^L active-boundary combinations."""
    fams = np.array(list(itertools.product(range(_BOUNDARY_FAMILIES),
                                           repeat=L)), dtype=int)
    n_combo = fams.shape[0]
    starts = []
    for c in (1.0, 2.0, 1.4, 0.6):
        row = np.empty(L + 1)
        row[L] = rho
        for l in range(L - 1, -1, -1):
            row[l] = min(1.0, c * row[l + 1])
        starts.append(row)
    X = np.repeat(np.array(starts)[None, :, :], n_combo, axis=0)
    X = X.reshape(-1, L + 1)
    fams_rep = np.repeat(fams, len(starts), axis=0)
    obj = _combo_objective(q, rho, fams_rep)
    X, vals, _ = _ascend(obj, X, _rma_bounds(rho, L), list(range(L)),
                         sweeps=6, grid=13)
    i = int(np.argmax(vals))
    return float(vals[i]), X[i].copy()


def _vars_from_env(q, rho, betas):
    """Explicit argmax variables for an envelope solution."""
    gs = []
    for l in range(1, len(betas)):
        _, g = _stage_inner_max(betas[l - 1], betas[l])
        gs.append(float(g))
    return SpectralPointVars(rho=float(rho), betas=tuple(float(b) for b in betas),
                             gammas=tuple(gs))


def _polish_interior(q, L, rho, betas, gammas):
    """Newton-polish an interior stationary point on the analytic gradient."""
    margin = 1e-7
    bs = list(betas)
    gs = list(gammas)
    for l in range(1, L + 1):
        lo, hi = _stage_bounds(bs[l - 1], bs[l])
        if not (lo + margin < gs[l - 1] < hi - margin):
            return None
        if not (margin < bs[l - 1] < 1 - margin):
            return None

    def fun(x):
        v = SpectralPointVars(rho=rho,
                              betas=tuple(x[:L]) + (rho,),
                              gammas=tuple(x[L:]))
        g = grad_f_rma(v, q, L)
        return np.where(np.isfinite(g), g, 1e6)

    x0 = np.array(bs[:L] + gs)
    try:
        sol = optimize.root(fun, x0, method="hybr", tol=1e-13)
    except Exception:
        return None
    if not sol.success:
        return None
    x = sol.x
    bs2 = list(x[:L]) + [rho]
    gs2 = list(x[L:])
    for l in range(1, L + 1):
        lo, hi = _stage_bounds(bs2[l - 1], bs2[l])
        if not (lo - 1e-10 <= gs2[l - 1] <= hi + 1e-10):
            return None
        gs2[l - 1] = min(max(gs2[l - 1], lo), hi)
    if not all(0 <= b <= 1 for b in bs2):
        return None
    vars2 = SpectralPointVars(rho=rho, betas=tuple(bs2), gammas=tuple(gs2))
    try:
        val = f_rma(vars2, q, L)
    except ValueError:
        return None
    gnorm = float(np.max(np.abs(fun(x))))
    return val, vars2, gnorm


# ---------------------------------------------------------------------------
# 6. Public evaluators
# ---------------------------------------------------------------------------


def r_s_rma(q: int, L: int, rho: float) -> SpectralResult:
    """Spectral shape of the q-fold repetition, L-accumulator chain."""
    if q < 2 or L < 1:
        raise ValueError("need q >= 2 and L >= 1")
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    rho = float(rho)
    # method (a): stationarity sweep + boundary families + zero chain
    zero_b = (0.0,) * L + (rho,)
    best_a = 0.0
    vars_a = SpectralPointVars(rho=rho, betas=zero_b, gammas=(0.0,) * L)
    interior_best = None
    for cand in _interior_candidates(q, L, rho):
        val, bs, gs = cand
        if val > best_a + 1e-15:
            best_a = val
            vars_a = SpectralPointVars(rho=rho, betas=bs, gammas=gs)
            interior_best = cand
    dp = _dp_chain_candidate(q, L, rho)
    if dp is not None and dp[0] > best_a + 1e-15:
        best_a = dp[0]
        vars_a = SpectralPointVars(rho=rho, betas=dp[1], gammas=dp[2])
        interior_best = dp
    grad_norm = None
    if interior_best is not None:
        polished = _polish_interior(q, L, rho, interior_best[1],
                                    interior_best[2])
        if polished is not None and polished[0] >= best_a - 1e-10:
            best_a, vars_a, grad_norm = polished
    bval, bvec = _boundary_candidates(q, L, rho)
    if bval > best_a:
        best_a = bval
        vars_a = _vars_from_env(q, rho, bvec)
        grad_norm = None
    # method (b): multi-start coordinate ascent on the envelope
    X = _rma_starts(q, L, rho, "ascent")
    X, vals, conv = _ascend(_env_rma_obj(q), X, _rma_bounds(rho, L),
                            list(range(L)))
    i = int(np.argmax(vals))
    best_b = max(float(vals[i]), 0.0)
    vars_b = _vars_from_env(q, rho, X[i])
    if best_b > best_a:
        value, vars_best = best_b, vars_b
    else:
        value, vars_best = best_a, vars_a
    agreement = abs(best_a - best_b)
    return SpectralResult(value=value, vars=vars_best,
                          value_stationarity=best_a, value_ascent=best_b,
                          agreement=agreement,
                          disagree=agreement > DISAGREE_TOL,
                          grad_norm=grad_norm, converged=conv)


def _env_rma_obj(q):
    def obj(B):
        return _env_rma(q, B)
    return obj


_PUNCT_KEY = 5e-5
_r_s_exact_cache: dict = {}


@lru_cache(maxsize=200000)
def _r_s_rma_cached(q: int, L: int, rho_key: int) -> float:
    return r_s_rma(q, L, rho_key * _PUNCT_KEY).value


def _r_s_exact(q, L, rho):
    key = (q, L, round(float(rho), 12))
    if key not in _r_s_exact_cache:
        _r_s_exact_cache[key] = r_s_rma(q, L, float(rho)).value
    return _r_s_exact_cache[key]


def _punctured_tail(lam, rho_p, bl):
    a = lam * rho_p
    c = lam * (1.0 - rho_p)
    return float(_ent(np.asarray(bl), a) + _ent(np.asarray(1.0 - bl), c)
                 - _H(np.asarray(lam)))


def _punctured_outer(q, L, lam, rho_p):
    """Nested-sup route: outer scan over the pre-puncturing fraction.

    Quantized scan points evaluate both factors at the same lattice
    value so each candidate is a true value of the joint objective; the
    window endpoints and rho_p itself are evaluated exactly on top.
    """
    lo = lam * rho_p
    hi = 1.0 - lam * (1.0 - rho_p)
    if hi - lo < 1e-12:
        return (_r_s_exact(q, L, rho_p)
                + _punctured_tail(lam, rho_p, rho_p)) / lam, rho_p

    def val_at_key(k):
        bl = k * _PUNCT_KEY
        return (_r_s_rma_cached(q, L, k)
                + _punctured_tail(lam, rho_p, bl)) / lam

    kmin = max(1, math.ceil((lo - 1e-12) / _PUNCT_KEY))
    kmax = min(int(round(1.0 / _PUNCT_KEY)) - 1,
               math.floor((hi + 1e-12) / _PUNCT_KEY))
    stride = max(1, int(round(2e-3 / _PUNCT_KEY)))
    ks = list(range(kmin, kmax + 1, stride))
    if not ks or ks[-1] != kmax:
        ks.append(kmax)
    best_k = max(ks, key=val_at_key)
    lo_k = max(kmin, best_k - stride)
    hi_k = min(kmax, best_k + stride)
    best_v, best_bl = -_INF, rho_p
    for k in range(lo_k, hi_k + 1):
        v = val_at_key(k)
        if v > best_v:
            best_v, best_bl = v, k * _PUNCT_KEY
    for b in (lo, hi, rho_p):
        if lo - 1e-12 <= b <= hi + 1e-12 and 0 < b < 1:
            v = (_r_s_exact(q, L, b) + _punctured_tail(lam, rho_p, b)) / lam
            if v > best_v:
                best_v, best_bl = v, b
    return best_v, best_bl


def r_s_rma_punctured(q: int, L: int, lam, rho_prime: float) -> SpectralResult:
    """Spectral shape after random puncturing to a fraction lam.

    Route (a) decomposes the supremum: optimize the unpunctured chain at
    the pre-puncturing fraction, then scan that fraction against the
    puncturing tail terms.  Route (b) ascends the joint objective with
    the final fraction as one more free coordinate.
    """
    lam = float(Fraction(lam)) if not isinstance(lam, float) else float(lam)
    if not 0 < lam <= 1:
        raise ValueError("lam must be in (0, 1]")
    if not 0 < rho_prime < 1:
        raise ValueError("rho_prime must be in (0, 1)")
    rho_p = float(rho_prime)
    value_a, bl_a = _punctured_outer(q, L, lam, rho_p)
    value_a = max(value_a, 0.0)
    # direct joint ascent
    X = _rma_starts(q, L, rho_p, "punctured", lam=lam, rho_p=rho_p)
    obj = _punct_obj(q, lam, rho_p)
    X, vals, conv = _ascend(obj, X, _rma_bounds(rho_p, L, lam, rho_p),
                            list(range(L + 1)))
    i = int(np.argmax(vals))
    best_b = max(float(vals[i]), 0.0)
    vars_b = _vars_from_env(q, rho_p, X[i])
    value = max(value_a, best_b)
    agreement = abs(value_a - best_b)
    return SpectralResult(value=value, vars=vars_b,
                          value_stationarity=value_a, value_ascent=best_b,
                          agreement=agreement,
                          disagree=agreement > DISAGREE_TOL,
                          grad_norm=None, converged=conv)


def _punct_obj(q, lam, rho_p):
    def obj(B):
        return _env_rma_punctured(q, lam, rho_p, B)
    return obj


def _hcc_bounds(spec: EnsembleSpec, rho):
    q = spec.q
    t = spec.hcc_type
    q1 = spec.q1 if t == 2 else 0

    def bounds(X, d):
        n_rows = X.shape[0]
        lo = np.zeros(n_rows)
        hi = np.ones(n_rows)
        if t in (1, 2):
            if d == 0:
                acc = X[:, 1 + q1:]
                if acc.shape[1]:
                    hi = np.minimum(hi, 2.0 * acc.min(axis=1))
                ff = X[:, 1:1 + q1]
                if ff.shape[1]:
                    lo = np.maximum(lo, 0.5 * ff.max(axis=1))
            elif d - 1 < q1:
                hi = np.minimum(hi, 2.0 * X[:, 0])
            else:
                lo = np.maximum(lo, 0.5 * X[:, 0])
        elif t == 3:
            if d == 0:
                acc = X[:, 2:]
                hi = np.minimum(hi, 2.0 * acc.min(axis=1))
                lo = np.maximum(lo, 0.5 * X[:, 1])
            elif d == 1:
                lo = np.maximum(lo, q * rho - (q - 1.0))
                hi = np.minimum(np.minimum(hi, 2.0 * X[:, 0]), q * rho)
            else:
                lo = np.maximum(lo, 0.5 * X[:, 0])
        else:
            if d == 0:
                acc = X[:, 1:]
                hi = np.minimum(np.minimum(hi, 2.0 * acc.min(axis=1)),
                                q * rho)
                lo = np.maximum(lo, q * rho - (q - 1.0))
            else:
                lo = np.maximum(lo, 0.5 * X[:, 0])
        lo = np.clip(lo, 0.0, 1.0)
        hi = np.clip(hi, 0.0, 1.0)
        return lo, np.maximum(hi, lo)
    return bounds


def _hcc_grid_starts(spec: EnsembleSpec, rho):
    """Deterministic stratified grid over the symmetric slice."""
    q = spec.q
    t = spec.hcc_type
    dim = _hcc_dim(spec)
    al = np.concatenate([np.geomspace(1e-4, 0.2, 16),
                         np.linspace(0.22, 0.98, 14)])
    bp = np.concatenate([np.geomspace(1e-4, 0.2, 16),
                         np.linspace(0.22, 0.98, 14)])
    rowsets = []
    if t == 3:
        b1 = np.linspace(max(0.0, q * rho - (q - 1.0)) + 1e-6,
                         min(1.0, q * rho) - 1e-6, 10)
        mesh = np.stack(np.meshgrid(al, b1, bp, indexing="ij"),
                        axis=-1).reshape(-1, 3)
        X = np.empty((mesh.shape[0], dim))
        X[:, 0] = mesh[:, 0]
        X[:, 1] = mesh[:, 1]
        X[:, 2:] = mesh[:, 2:3]
        rowsets.append(X)
    else:
        mesh = np.stack(np.meshgrid(al, bp, indexing="ij"),
                        axis=-1).reshape(-1, 2)
        X = np.empty((mesh.shape[0], dim))
        X[:, 0] = mesh[:, 0]
        X[:, 1:] = mesh[:, 1:2]
        rowsets.append(X)
    return np.concatenate(rowsets, axis=0)


def _hcc_random_starts(spec: EnsembleSpec, rho, count=MULTISTARTS):
    q = spec.q
    t = spec.hcc_type
    dim = _hcc_dim(spec)
    key = _stable_key(spec.label(), round(float(rho), 12))
    rng = np.random.default_rng(np.random.SeedSequence((SPECTRAL_SEED, key)))
    X = np.empty((count, dim))
    cap = min(1.0, 2.0 * q * rho)
    u = (rng.permutation(count) + rng.random(count)) / count
    bp = np.maximum(u * cap, 1e-6)
    u = (rng.permutation(count) + rng.random(count)) / count
    X[:, 0] = np.maximum(u * np.minimum(1.0, 2.0 * bp), 1e-6)
    for j in range(1, dim):
        jitter = 1.0 + 0.3 * (rng.random(count) - 0.5)
        X[:, j] = np.clip(bp * jitter, 0.5 * X[:, 0], 1.0)
    if t == 3:
        lo = max(0.0, q * rho - (q - 1.0))
        hi = min(1.0, q * rho)
        u = (rng.permutation(count) + rng.random(count)) / count
        X[:, 1] = lo + u * (hi - lo)
    if t == 4:
        lo = max(0.0, q * rho - (q - 1.0))
        X[:, 0] = np.clip(X[:, 0], lo, min(1.0, q * rho))
    return X


def _hcc_vars(spec: EnsembleSpec, rho, x):
    q = spec.q
    t = spec.hcc_type
    al = float(x[0])
    if t in (1, 2):
        betas = tuple(float(b) for b in x[1:])
        bp = sum(betas) / q
        delta = float(rho)
    elif t == 3:
        betas = tuple(float(b) for b in x[1:])
        bp = sum(betas[1:]) / (q - 1)
        delta = (q * rho - betas[0]) / (q - 1)
    else:
        betas = tuple(float(b) for b in x[1:])
        bp = sum(betas) / (q - 1)
        delta = (q * rho - al) / (q - 1)
    return SpectralPointVars(rho=float(rho), betas=betas, gammas=(),
                             alpha=al, beta_p=bp, delta=delta)


def r_s_hcc(spec: EnsembleSpec, rho: float) -> SpectralResult:
    """Spectral shape of a hybrid layout (types 1 to 4)."""
    if spec.family != "hcc":
        raise ValueError("spec must be a hybrid ensemble")
    if spec.lam != 1:
        raise NotImplementedError("punctured hybrid spectra not supported")
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    rho = float(rho)
    dim = _hcc_dim(spec)

    def obj(X):
        return _env_hcc(spec, rho, X)

    bounds = _hcc_bounds(spec, rho)
    # method (a): dense deterministic grid, refine the best rows
    Xg = _hcc_grid_starts(spec, rho)
    vg = obj(Xg)
    vg = np.where(np.isfinite(vg), vg, -_INF)
    top = np.argsort(vg)[-48:]
    Xa = Xg[top].copy()
    Xa, va, conv_a = _ascend(obj, Xa, bounds, list(range(dim)))
    ia = int(np.argmax(va))
    best_a = max(float(va[ia]), 0.0)
    vars_a = _hcc_vars(spec, rho, Xa[ia])
    # method (b): random multi-start ascent
    Xb = _hcc_random_starts(spec, rho)
    Xb, vb, conv_b = _ascend(obj, Xb, bounds, list(range(dim)))
    ib = int(np.argmax(vb))
    best_b = max(float(vb[ib]), 0.0)
    vars_b = _hcc_vars(spec, rho, Xb[ib])
    if best_a >= best_b:
        value, vars_best = best_a, vars_a
    else:
        value, vars_best = best_b, vars_b
    agreement = abs(best_a - best_b)
    return SpectralResult(value=value, vars=vars_best,
                          value_stationarity=best_a, value_ascent=best_b,
                          agreement=agreement,
                          disagree=agreement > DISAGREE_TOL,
                          grad_norm=None, converged=conv_a and conv_b)


def psi(u: float, rho: float) -> float:
    """Single-stage exponent balance -H(u) + sup over the split fraction.

    The supremum is a golden-section scan with endpoint checks; an empty
    feasible interval returns -inf.
    """
    if not 0 < u < 1 or not 0 < rho < 1:
        raise ValueError("u and rho must be in (0, 1)")
    lo, hi = float(max(0.0, u - rho)), float(min(rho, 1.0 - rho, u / 2.0))
    if hi < lo:
        return -_INF

    def inner(g):
        return float(_stage_inner(u, rho, g))

    # coarse bracket first; the objective can touch its max at an endpoint
    grid = np.linspace(lo, hi, 41)
    vals = [inner(g) for g in grid]
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    for _ in range(80):
        m1 = a + (1 - _INVPHI) * (b - a)
        m2 = a + _INVPHI * (b - a)
        if inner(m1) >= inner(m2):
            b = m2
        else:
            a = m1
    best = max(vals[k], inner(0.5 * (a + b)), inner(lo), inner(hi))
    return -float(_H(np.asarray(u))) + best


def extract_rho0(curve_fn, tol_zero: float = TOL_ZERO,
                 tol_pos: float = TOL_POS, drho: float = RHO_STEP,
                 rho_max: float = 0.5,
                 bisect_width: float = BISECT_WIDTH) -> Rho0Result:
    """Largest rho below which the curve stays numerically zero.

    Coarse forward scan to the first clearly positive value, then
    bisection of the transition on the zero tolerance.  The bracket's
    left end is the last grid point still inside the zero tolerance, so
    a shallow rise through the gray zone between the two tolerances
    cannot pin the answer to a grid point.  Positive already at the
    first grid point, or never back inside the zero tolerance before
    the crossing, means no zero region at all.

    The edge describes the exponential rate of the ensemble-average
    enumerator, nothing more.  Turning a zero region into a statement
    about typical ensemble members takes a separate sub-exponential
    configuration-count argument, unavailable when only two copies of
    each information bit enter a depth-two accumulator cascade.  The
    q=2 two-stage chain (edge ~0.024) and the q=3 type-3/type-4
    hybrids (edges ~0.0166 and ~0.0164, one branch bypassing the inner
    code) sit in that regime, so their real zero slivers carry no
    typical-member guarantee.
    """
    if not tol_zero < tol_pos:
        raise ValueError("tol_zero must be below tol_pos")
    last_zero = None
    first_pos = None
    k = 1
    while k * drho < rho_max:
        rho = k * drho
        v = curve_fn(rho)
        if v > tol_pos:
            first_pos = rho
            break
        if v <= tol_zero:
            last_zero = rho
        k += 1
    if first_pos is None:
        return Rho0Result(rho0=rho_max, never_positive=True)
    if last_zero is None:
        return Rho0Result(rho0=None, first_positive=first_pos)
    lo, hi = last_zero, first_pos
    while hi - lo > bisect_width:
        mid = 0.5 * (lo + hi)
        if curve_fn(mid) > tol_zero:
            hi = mid
        else:
            lo = mid
    return Rho0Result(rho0=0.5 * (lo + hi), first_positive=first_pos)


def curve_fn_for(spec: EnsembleSpec):
    """The r_s(rho) evaluator matching a spec, as a plain function."""
    if spec.family == "rma":
        if spec.lam != 1:
            lam = float(spec.lam)
            return lambda rho: r_s_rma_punctured(spec.q, spec.L, lam,
                                                 rho).value
        return lambda rho: r_s_rma(spec.q, spec.L, rho).value
    return lambda rho: r_s_hcc(spec, rho).value


def spectral_curve(spec: EnsembleSpec, rho_grid) -> SpectralCurve:
    """Evaluate the matching spectral shape over a rho grid."""
    grid = np.asarray(list(rho_grid), dtype=float)
    results = []
    for rho in grid:
        if spec.family == "rma":
            if spec.lam != 1:
                results.append(r_s_rma_punctured(spec.q, spec.L,
                                                 float(spec.lam), float(rho)))
            else:
                results.append(r_s_rma(spec.q, spec.L, float(rho)))
        else:
            results.append(r_s_hcc(spec, float(rho)))
    values = np.array([r.value for r in results])
    return SpectralCurve(spec=spec, rho_grid=grid, values=values,
                         results=tuple(results))
