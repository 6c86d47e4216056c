"""Command line driver for the analysis modules.

Subcommands map one-to-one onto the library: ensemble enumerators,
finite-length stopping-distance bounds, spectral shapes and their
growth-rate coefficient, decoding thresholds, EXIT chart data, Monte
Carlo simulation, desk-scale oracle checks, and batch table
regeneration.  Every output carries a provenance header and is
byte-identical across reruns of the same configuration.

Exit codes: 0 success, 1 failed oracle check, 2 configuration or usage
error.  Relative output paths resolve under BECSTOP_OUT_DIR when that
variable is set.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
from decimal import Decimal, localcontext
from fractions import Fraction

import numpy as np

from becstop import __version__
from .brute_force import (closure_support_pairs, exhaustive_ensemble_ssef,
                          max_stopping_set_within, support_pair_counts)
from .codec_sim import CodeInstance, bec_transmit, iterative_decode, \
    monte_carlo, sample_instance
from .enumerators import (EnsembleSpec, iossef, siosef_accumulator,
                          siosef_feedforward)
from .exit_analysis import (compound_outer_exit, inner_accumulator_curve,
                            threshold)
from .finite_bounds import DEFAULT_EPSILON, bound_sweep
from .spectral import (BISECT_WIDTH, RHO_STEP, TOL_POS, TOL_ZERO,
                       curve_fn_for, extract_rho0, r_s_hcc, r_s_rma,
                       r_s_rma_punctured, spectral_curve)

OUT_DIR_ENV = "BECSTOP_OUT_DIR"
EXIT_GRID_POINTS = 201


class ConfigError(ValueError):
    """Bad spec string, config file, or flag combination."""


# ---------------------------------------------------------------------------
# 1. Spec parsing and shared formatting
# ---------------------------------------------------------------------------


def _spec_from_mapping(data) -> EnsembleSpec:
    d = {str(k): v for k, v in dict(data).items()}
    family = str(d.pop("family", "")).strip().lower()
    lam_raw = d.pop("lambda", None)
    try:
        lam = Fraction(1) if lam_raw is None else Fraction(str(lam_raw))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad lambda value {lam_raw!r}: {exc}") from exc
    try:
        if family == "rma":
            q = int(d.pop("q"))
            L = int(d.pop("L", 1))
            extra = sorted(d)
            if extra:
                raise ConfigError(f"unknown rma spec keys: {extra}")
            return EnsembleSpec(family="rma", q=q, L=L, lam=lam)
        if family == "hcc":
            hcc_type = int(d.pop("type"))
            q = int(d.pop("q"))
            q1 = int(d.pop("q1", 1))
            extra = sorted(d)
            if extra:
                raise ConfigError(f"unknown hcc spec keys: {extra}")
            return EnsembleSpec(family="hcc", q=q, hcc_type=hcc_type,
                                q1=q1, lam=lam)
    except KeyError as exc:
        raise ConfigError(f"missing spec key {exc.args[0]!r}") from exc
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown ensemble family {family!r} "
                      "(expected rma or hcc)")


def parse_spec(text: str) -> EnsembleSpec:
    """EnsembleSpec from a compact string or a JSON config file path.

    String grammar: ``rma:q=<int>,L=<int>[,lambda=<p>/<q>]`` or
    ``hcc:type=<1-4>,q=<int>[,q1=<int>]``.  A path to an existing JSON
    file with the same keys (plus ``family``) is accepted instead.
    """
    text = text.strip()
    if os.path.isfile(text):
        try:
            with open(text, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read spec file {text}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"spec file {text} must hold a JSON object")
        return _spec_from_mapping(data)
    family, sep, rest = text.partition(":")
    if not sep:
        raise ConfigError(
            f"bad spec {text!r}: expected family:key=value,... or a file path")
    pairs = {"family": family}
    for item in rest.split(","):
        if not item:
            continue
        key, sep2, val = item.partition("=")
        if not sep2:
            raise ConfigError(f"bad spec item {item!r} (expected key=value)")
        pairs[key.strip()] = val.strip()
    return _spec_from_mapping(pairs)


def _apply_lambda(spec: EnsembleSpec, lam_text) -> EnsembleSpec:
    if lam_text is None:
        return spec
    try:
        lam = Fraction(str(lam_text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad lambda {lam_text!r}: {exc}") from exc
    return dataclasses.replace(spec, lam=lam)


def _f15(x) -> str:
    """Decimal string with 15 significant digits; exact for rationals."""
    if isinstance(x, Fraction):
        with localcontext() as ctx:
            ctx.prec = 15
            d = Decimal(x.numerator) / Decimal(x.denominator)
        return str(d)
    return f"{float(x):.15g}"


def _exp_or_inf(logv: float) -> float:
    if logv == -math.inf:
        return 0.0
    try:
        return math.exp(logv)
    except OverflowError:
        return math.inf


def _prov_fields(command: str, **kw) -> dict:
    fields = {"tool": "becstop", "version": __version__, "command": command}
    fields.update(kw)
    return fields


def _prov_line(fields: dict) -> str:
    body = " ".join(f"{k}={v}" for k, v in fields.items())
    return f"# provenance: {body}"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _resolve_out(path: str) -> str:
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _parse_int_list(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc
    if not vals:
        raise ConfigError("empty integer list")
    return vals


def _parse_float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc
    if not vals:
        raise ConfigError("empty number list")
    return vals


def _slug(label: str) -> str:
    return (label.replace(":", "_").replace(",", "_")
            .replace("=", "").replace("/", "-"))


# ---------------------------------------------------------------------------
# 2. CSV builders shared by direct commands and `tables`
# ---------------------------------------------------------------------------


def _enumerate_texts(spec: EnsembleSpec, n: int, h_max, exact_sidecar: bool):
    enum = iossef(spec, n, h_max=h_max,
                  log_domain=False if exact_sidecar else None)
    coeffs = enum.ssef()
    fields = _prov_fields("enumerate", spec=spec.label(), n=n,
                          backend="exact" if enum.exact else "log")
    lines = [_prov_line(fields), "h,s_h"]
    meta = {"provenance": fields, "spec": spec.label(), "n": n,
            "h_cap": enum.h_cap, "exact_backend": enum.exact}
    if enum.exact:
        for h, v in enumerate(coeffs):
            lines.append(f"{h},{_f15(v)}")
        if exact_sidecar:
            meta["numerators"] = [str(v.numerator) for v in coeffs]
            meta["denominators"] = [str(v.denominator) for v in coeffs]
    else:
        for h, lv in enumerate(coeffs):
            lines.append(f"{h},{_f15(_exp_or_inf(float(lv)))}")
        meta["log_s_h"] = [float(lv) for lv in coeffs]
    return "\n".join(lines) + "\n", _json_text(meta)


def _hmin_texts(spec: EnsembleSpec, n_list, epsilon: float):
    points = bound_sweep(spec, n_list, epsilon=epsilon)
    fields = _prov_fields("hmin-bound", spec=spec.label(),
                          epsilon=_f15(epsilon))
    lines = [_prov_line(fields), "N,hBar,tail"]
    rows = []
    for pt in points:
        lines.append(f"{pt.n},{pt.h_bar},{_f15(pt.tail_value)}")
        rows.append({"n": pt.n, "hBar": pt.h_bar,
                     "tail": float(pt.tail_value), "flag": pt.flag})
    meta = {"provenance": fields, "spec": spec.label(),
            "epsilon": epsilon, "points": rows}
    return "\n".join(lines) + "\n", _json_text(meta)


def _argmax_header(spec: EnsembleSpec, sample_vars) -> list:
    if spec.family == "rma":
        L = spec.L
        return ([f"beta_{l}" for l in range(L + 1)]
                + [f"gamma_{l}" for l in range(1, L + 1)])
    m = len(sample_vars.betas)
    return ["alpha"] + [f"b_{i}" for i in range(1, m + 1)] \
        + ["beta_p", "delta"]


def _argmax_cells(spec: EnsembleSpec, vars_) -> list:
    if vars_ is None:
        width = (2 * spec.L + 1 if spec.family == "rma"
                 else len(_argmax_header(spec, None)))
        return [""] * width
    if spec.family == "rma":
        return [_f15(b) for b in vars_.betas] + [_f15(g) for g in vars_.gammas]
    return ([_f15(vars_.alpha)] + [_f15(b) for b in vars_.betas]
            + [_f15(vars_.beta_p), _f15(vars_.delta)])


def _spectral_text(spec: EnsembleSpec, rho_grid) -> str:
    curve = spectral_curve(spec, rho_grid)
    fields = _prov_fields("spectral", spec=spec.label(),
                          points=len(curve.rho_grid))
    first_vars = next((r.vars for r in curve.results if r.vars is not None),
                      None)
    header = ["rho", "r_s"] + _argmax_header(spec, first_vars) \
        + ["method_gap"]
    lines = [_prov_line(fields), ",".join(header)]
    for rho, res in zip(curve.rho_grid, curve.results):
        cells = [_f15(rho), _f15(res.value)]
        cells += _argmax_cells(spec, res.vars)
        cells.append(_f15(res.agreement))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _rho_grid(rho_min: float, rho_max: float, drho: float) -> list:
    if drho <= 0:
        raise ConfigError("drho must be positive")
    if not 0 < rho_min <= rho_max < 1:
        raise ConfigError("need 0 < rho-min <= rho-max < 1")
    grid = []
    k = 0
    while True:
        rho = rho_min + k * drho
        if rho > rho_max + 1e-12:
            break
        grid.append(min(rho, rho_max))
        k += 1
    return grid


def _rich_point_fn(spec: EnsembleSpec):
    if spec.family == "rma":
        if spec.lam != 1:
            lam = float(spec.lam)
            return lambda rho: r_s_rma_punctured(spec.q, spec.L, lam, rho)
        return lambda rho: r_s_rma(spec.q, spec.L, rho)
    return lambda rho: r_s_hcc(spec, rho)


def _rho0_payload(spec: EnsembleSpec) -> dict:
    res = extract_rho0(curve_fn_for(spec))
    probes = []
    if res.first_positive is not None:
        probes.append(res.first_positive)
    if res.rho0 is not None and not res.never_positive:
        probes.append(max(RHO_STEP, round(res.rho0 - RHO_STEP, 12)))
    if not probes:
        probes.append(RHO_STEP)
    rich = _rich_point_fn(spec)
    gaps = []
    disagree = False
    probe_rows = []
    for rho in probes:
        r = rich(float(rho))
        gaps.append(r.agreement)
        disagree = disagree or r.disagree
        probe_rows.append({"rho": float(rho), "r_s": r.value,
                           "method_gap": r.agreement})
    fields = _prov_fields("rho0", spec=spec.label())
    return {
        "provenance": fields,
        "spec": spec.label(),
        "rho0": "none" if res.rho0 is None else res.rho0,
        "neverPositive": res.never_positive,
        "firstPositive": res.first_positive,
        "tolerances": {"zero": TOL_ZERO, "positive": TOL_POS,
                       "step": RHO_STEP, "bisectWidth": BISECT_WIDTH},
        "agreement": {"probes": probe_rows,
                      "maxMethodGap": max(gaps) if gaps else 0.0,
                      "disagree": disagree},
    }


def _threshold_payload(spec: EnsembleSpec) -> dict:
    res = threshold(spec)
    fields = _prov_fields("threshold", spec=spec.label())
    return {"provenance": fields, "spec": spec.label(), "pStar": res.p_star,
            "iterations": res.iterations, "tolerance": res.tolerance}


def _exit_curves_text(spec: EnsembleSpec, p_ch: float) -> str:
    if not 0.0 <= p_ch <= 1.0:
        raise ConfigError("p-ch must be in [0, 1]")
    grid = np.linspace(0.0, 1.0, EXIT_GRID_POINTS)
    outer = compound_outer_exit(spec, grid, p_ch=p_ch)
    inner = inner_accumulator_curve(p_ch, grid)
    fields = _prov_fields("exit-curves", spec=spec.label(), p_ch=_f15(p_ch))
    lines = [_prov_line(fields), "i_a,outer_i_e,inner_i_e"]
    for a, o, i in zip(grid, outer.values, inner.values):
        lines.append(f"{_f15(a)},{_f15(o)},{_f15(i)}")
    return "\n".join(lines) + "\n"


def _simulate_text(spec: EnsembleSpec, n: int, p_grid, trials: int,
                   seed: int, fixed: CodeInstance | None) -> str:
    rows = monte_carlo(spec, n, p_grid, trials, seed, fixed_instance=fixed)
    fields = _prov_fields("simulate", spec=spec.label(), n=n, trials=trials,
                          seed=seed,
                          interleavers="fixed" if fixed else "sampled")
    lines = [_prov_line(fields), "p,fer,fer_ci_low,fer_ci_high,avg_residual"]
    for r in rows:
        lines.append(",".join(_f15(r[k]) for k in
                              ("p", "fer", "fer_ci_low", "fer_ci_high",
                               "avg_residual")))
    return "\n".join(lines) + "\n"


def _read_perm_file(path: str, spec: EnsembleSpec, n: int):
    try:
        with open(path, encoding="utf-8") as fh:
            raw_lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise ConfigError(f"cannot read interleaver file {path}: {exc}")
    perms = []
    for ln in raw_lines:
        if not ln or ln.startswith("#"):
            continue
        parts = ln.replace(",", " ").split()
        try:
            perms.append(tuple(int(v) for v in parts))
        except ValueError as exc:
            raise ConfigError(f"bad interleaver line {ln!r}") from exc
    try:
        return CodeInstance(spec, n, tuple(perms))
    except ValueError as exc:
        raise ConfigError(f"bad interleaver file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# 3. Oracle checks
# ---------------------------------------------------------------------------


def _check_siosef(n: int) -> dict:
    for kind, table_fn in (("acc", siosef_accumulator),
                           ("ff", siosef_feedforward)):
        table = table_fn(n)
        counts = support_pair_counts(closure_support_pairs(n, kind))
        for w in range(n + 1):
            for h in range(n + 1):
                want = counts.get((w, h), 0)
                got = table.a(w, h)
                if got != want:
                    return {"pass": False,
                            "counterexample": {"kind": kind, "w": w, "h": h,
                                               "table": str(got),
                                               "closure": str(want)}}
    return {"pass": True, "counterexample": None}


def _check_decoder(spec: EnsembleSpec, n: int, seed: int,
                   trials: int) -> dict:
    inst = sample_instance(spec, n, seed)
    if inst.transmit_len > 18:
        raise ConfigError("decoder oracle needs transmit length <= 18")
    zeros = [0] * inst.transmit_len
    checked = 0
    for pi, p in enumerate((0.3, 0.5, 0.7)):
        for t in range(trials):
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, pi, t)))
            pattern = bec_transmit(zeros, p, rng)
            dec = iterative_decode(inst, pattern)
            oracle = max_stopping_set_within(inst, pattern.erased)
            checked += 1
            if frozenset(dec.residual) != oracle:
                return {"pass": False, "patterns": checked,
                        "counterexample": {
                            "p": p, "trial": t,
                            "erased": sorted(pattern.erased),
                            "residual": sorted(dec.residual),
                            "oracle": sorted(oracle)}}
    return {"pass": True, "patterns": checked, "counterexample": None}


def _check_ssef(spec: EnsembleSpec, n: int, seed: int, samples: int) -> dict:
    enum = iossef(spec, n, log_domain=False)
    analytic = enum.ssef()
    try:
        exact, _ = exhaustive_ensemble_ssef(spec, n)
        mode = "exhaustive"
    except (ValueError, NotImplementedError):
        exact = None
        mode = "sampled"
    if exact is not None:
        if len(exact) != len(analytic):
            return {"pass": False, "mode": mode,
                    "counterexample": {"reason": "length mismatch",
                                       "analytic": len(analytic),
                                       "oracle": len(exact)}}
        for h, (a, b) in enumerate(zip(analytic, exact)):
            if a != b:
                return {"pass": False, "mode": mode,
                        "counterexample": {"h": h, "analytic": str(a),
                                           "oracle": str(b)}}
        return {"pass": True, "mode": mode, "counterexample": None}
    means, stderr = exhaustive_ensemble_ssef(spec, n, samples=samples,
                                             seed=seed)
    for h in range(len(means)):
        a = float(analytic[h]) if h < len(analytic) else 0.0
        slack = 3.0 * float(stderr[h]) + 1e-9
        if abs(float(means[h]) - a) > slack:
            return {"pass": False, "mode": mode, "samples": samples,
                    "counterexample": {"h": h, "analytic": a,
                                       "sampled": float(means[h]),
                                       "stderr": float(stderr[h])}}
    return {"pass": True, "mode": mode, "samples": samples,
            "counterexample": None}


# ---------------------------------------------------------------------------
# 4. Batch table regeneration
# ---------------------------------------------------------------------------


def _rho0_table_text(command: str, spec_texts) -> str:
    fields = _prov_fields(command, specs=len(spec_texts))
    lines = [_prov_line(fields),
             "spec,lambda,rho0,first_positive,never_positive"]
    for text in spec_texts:
        spec = parse_spec(text)
        payload = _rho0_payload(spec)
        rho0 = payload["rho0"]
        first = payload["firstPositive"]
        lines.append(",".join([
            spec.label(), str(spec.lam),
            "none" if rho0 == "none" else _f15(rho0),
            "" if first is None else _f15(first),
            str(payload["neverPositive"]).lower()]))
    return "\n".join(lines) + "\n"


def _threshold_table_text(spec_texts) -> str:
    fields = _prov_fields("tables-V", specs=len(spec_texts))
    lines = [_prov_line(fields), "spec,p_star,iterations,tolerance"]
    for text in spec_texts:
        spec = parse_spec(text)
        res = threshold(spec)
        lines.append(f"{spec.label()},{_f15(res.p_star)},{res.iterations},"
                     f"{_f15(res.tolerance)}")
    return "\n".join(lines) + "\n"


def _tables_table1(out_dir: str) -> list:
    specs = [f"rma:q={q},L={L}" for L in (2, 3, 4) for q in range(2, 7)]
    path = os.path.join(out_dir, "table_I.csv")
    _write_text(path, _rho0_table_text("tables-I", specs))
    return [{"file": "table_I.csv",
             "description": "growth-rate coefficients of the plain chain "
                            "ensembles over (L, q)"}]


def _tables_table2(out_dir: str) -> list:
    specs = ["rma:q=3,L=2,lambda=2/3", "rma:q=3,L=2,lambda=50/81",
             "rma:q=3,L=2,lambda=20/33", "rma:q=3,L=3,lambda=100/129",
             "rma:q=3,L=3,lambda=3/4"]
    path = os.path.join(out_dir, "table_II.csv")
    _write_text(path, _rho0_table_text("tables-II", specs))
    return [{"file": "table_II.csv",
             "description": "growth-rate coefficients of punctured q=3 "
                            "chain ensembles"}]


def _tables_table3(out_dir: str) -> list:
    specs = ["rma:q=4,L=2,lambda=3/4", "rma:q=4,L=3,lambda=3/4"]
    path = os.path.join(out_dir, "table_III.csv")
    _write_text(path, _rho0_table_text("tables-III", specs))
    return [{"file": "table_III.csv",
             "description": "growth-rate coefficients of punctured q=4 "
                            "chain ensembles"}]


def _tables_table4(out_dir: str) -> list:
    specs = [f"hcc:type={t},q={q}" for q in (3, 4) for t in (1, 2, 3, 4)]
    path = os.path.join(out_dir, "table_IV.csv")
    _write_text(path, _rho0_table_text("tables-IV", specs))
    return [{"file": "table_IV.csv",
             "description": "growth-rate coefficients of the hybrid "
                            "ensembles, types 1-4"}]


def _tables_table5(out_dir: str) -> list:
    specs = ["rma:q=3,L=2", "rma:q=4,L=2", "rma:q=5,L=2", "rma:q=6,L=2",
             "hcc:type=2,q=4", "hcc:type=3,q=4", "hcc:type=4,q=4",
             "rma:q=3,L=3", "rma:q=3,L=4"]
    path = os.path.join(out_dir, "table_V.csv")
    _write_text(path, _threshold_table_text(specs))
    return [{"file": "table_V.csv",
             "description": "iterative decoding thresholds on the erasure "
                            "channel"}]


def _tables_fig6(out_dir: str) -> list:
    entries = []
    grid = _rho_grid(0.005, 0.30, 0.005)
    for text in ("rma:q=3,L=2", "rma:q=4,L=2", "rma:q=2,L=3"):
        spec = parse_spec(text)
        name = f"fig6_{_slug(spec.label())}.csv"
        _write_text(os.path.join(out_dir, name),
                    _spectral_text(spec, grid))
        entries.append({"file": name,
                        "description": f"spectral shape curve for "
                                       f"{spec.label()}"})
    return entries


def _tables_fig7(out_dir: str) -> list:
    entries = []
    n_grid = list(range(100, 1001, 100))
    for L in (2, 3, 4):
        spec = parse_spec(f"rma:q=4,L={L}")
        name = f"fig7_{_slug(spec.label())}.csv"
        csv_text, _ = _hmin_texts(spec, n_grid, DEFAULT_EPSILON)
        _write_text(os.path.join(out_dir, name), csv_text)
        entries.append({"file": name,
                        "description": f"stopping-distance bound sweep for "
                                       f"{spec.label()}"})
    for L in (2, 3):
        spec = parse_spec(f"rma:q=4,L={L},lambda=3/4")
        name = f"fig7_{_slug(spec.label())}.csv"
        csv_text, _ = _hmin_texts(spec, [500, 1000], DEFAULT_EPSILON)
        _write_text(os.path.join(out_dir, name), csv_text)
        entries.append({"file": name,
                        "description": f"stopping-distance bound sweep for "
                                       f"punctured {spec.label()}"})
    return entries


def _tables_fig8(out_dir: str) -> list:
    spec = parse_spec("rma:q=4,L=2")
    p_ch = 0.5
    name = f"fig8_{_slug(spec.label())}_p0.5.csv"
    _write_text(os.path.join(out_dir, name), _exit_curves_text(spec, p_ch))
    return [{"file": name,
             "description": f"EXIT chart curves for {spec.label()} at "
                            f"channel erasure 0.5"}]


TABLE_BUILDERS = {
    "I": _tables_table1,
    "II": _tables_table2,
    "III": _tables_table3,
    "IV": _tables_table4,
    "V": _tables_table5,
    "fig6": _tables_fig6,
    "fig7": _tables_fig7,
    "fig8": _tables_fig8,
}


def _run_builder(which: str, out_dir: str) -> list:
    return TABLE_BUILDERS[which](out_dir)


# ---------------------------------------------------------------------------
# 5. Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_enumerate(args) -> int:
    spec = parse_spec(args.spec)
    csv_text, sidecar = _enumerate_texts(spec, args.n, args.h_max, args.exact)
    out = _resolve_out(args.out)
    _write_text(out, csv_text)
    _write_text(out + ".json", sidecar)
    return 0


def _cmd_hmin_bound(args) -> int:
    spec = parse_spec(args.spec)
    if not 0 < args.epsilon < 1:
        raise ConfigError("epsilon must be in (0, 1)")
    csv_text, meta = _hmin_texts(spec, _parse_int_list(args.n_list),
                                 args.epsilon)
    out = _resolve_out(args.out)
    _write_text(out, csv_text)
    _write_text(out + ".json", meta)
    return 0


def _cmd_spectral(args) -> int:
    spec = _apply_lambda(parse_spec(args.spec), args.lam)
    grid = _rho_grid(args.rho_min, args.rho_max, args.drho)
    out = _resolve_out(args.out)
    _write_text(out, _spectral_text(spec, grid))
    return 0


def _cmd_rho0(args) -> int:
    spec = _apply_lambda(parse_spec(args.spec), args.lam)
    sys.stdout.write(_json_text(_rho0_payload(spec)))
    return 0


def _cmd_threshold(args) -> int:
    spec = parse_spec(args.spec)
    sys.stdout.write(_json_text(_threshold_payload(spec)))
    return 0


def _cmd_exit_curves(args) -> int:
    spec = parse_spec(args.spec)
    out = _resolve_out(args.out)
    _write_text(out, _exit_curves_text(spec, args.p_ch))
    return 0


def _cmd_simulate(args) -> int:
    spec = parse_spec(args.spec)
    if args.trials < 1:
        raise ConfigError("trials must be positive")
    p_grid = _parse_float_list(args.p_grid)
    if any(not 0 <= p <= 1 for p in p_grid):
        raise ConfigError("p values must be in [0, 1]")
    fixed = None
    if args.fixed_interleavers:
        fixed = _read_perm_file(args.fixed_interleavers, spec, args.n)
    text = _simulate_text(spec, args.n, p_grid, args.trials, args.seed,
                          fixed)
    if args.out:
        _write_text(_resolve_out(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_oracle_check(args) -> int:
    spec = parse_spec(args.spec)
    if args.what == "siosef":
        result = _check_siosef(args.n)
    elif args.what == "decoder":
        result = _check_decoder(spec, args.n, args.seed, args.trials)
    else:
        result = _check_ssef(spec, args.n, args.seed, args.samples)
    payload = {"provenance": _prov_fields("oracle-check", what=args.what,
                                          spec=spec.label(), n=args.n,
                                          seed=args.seed),
               "what": args.what, "spec": spec.label(), "n": args.n,
               "seed": args.seed}
    payload.update(result)
    sys.stdout.write(_json_text(payload))
    return 0 if result["pass"] else 1


def _cmd_tables(args) -> int:
    which = list(TABLE_BUILDERS) if args.which == "all" else [args.which]
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    if args.jobs > 1 and len(which) > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_builder, w, out_dir) for w in which]
            for fut in futures:
                entries.extend(fut.result())
    else:
        for w in which:
            entries.extend(_run_builder(w, out_dir))
    entries.sort(key=lambda e: e["file"])
    manifest = {"provenance": _prov_fields("tables", which=args.which,
                                           jobs=args.jobs),
                "which": which, "entries": entries}
    _write_text(os.path.join(out_dir, "manifest.json"),
                _json_text(manifest))
    return 0


# ---------------------------------------------------------------------------
# 6. Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1,
                        help="worker pool size for batch commands")
    parser = argparse.ArgumentParser(
        prog="becstop",
        description="Stopping-set analysis toolkit for concatenated "
                    "ensembles on the erasure channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", parents=[common],
                       help="ensemble-average stopping-set enumerator")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h-max", type=int, default=None,
                   help="truncate the size axis")
    p.add_argument("--out", required=True)
    p.add_argument("--exact", action="store_true",
                   help="force the exact backend and emit rational "
                        "numerator/denominator strings in the sidecar")
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("hmin-bound", parents=[common],
                       help="finite-length stopping-distance quantile sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--n-list", required=True,
                   help="comma-separated block lengths")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_hmin_bound)

    p = sub.add_parser("spectral", parents=[common],
                       help="spectral shape curve over a rho grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--lambda", dest="lam", default=None,
                   help="puncturing fraction, overrides the --spec value")
    p.add_argument("--rho-min", type=float, required=True)
    p.add_argument("--rho-max", type=float, required=True)
    p.add_argument("--drho", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("rho0", parents=[common],
                       help="growth-rate coefficient of the spectral shape")
    p.add_argument("--spec", required=True)
    p.add_argument("--lambda", dest="lam", default=None)
    p.set_defaults(func=_cmd_rho0)

    p = sub.add_parser("threshold", parents=[common],
                       help="iterative decoding threshold")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("exit-curves", parents=[common],
                       help="EXIT chart curve data at one channel erasure")
    p.add_argument("--spec", required=True)
    p.add_argument("--p-ch", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exit_curves)

    p = sub.add_parser("simulate", parents=[common],
                       help="Monte Carlo decoding over a p grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p-grid", required=True,
                   help="comma-separated erasure probabilities")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--fixed-interleavers", default=None,
                   help="file of newline-separated 0-based permutations")
    p.add_argument("--out", default=None,
                   help="CSV path; stdout when omitted")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("oracle-check", parents=[common],
                       help="desk-scale oracle comparison")
    p.add_argument("--what", required=True,
                   choices=("siosef", "decoder", "ssef"))
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50,
                   help="decoder check: patterns per erasure probability")
    p.add_argument("--samples", type=int, default=1000,
                   help="ssef check: sampled interleavers when exhaustive "
                        "averaging is infeasible")
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("tables", parents=[common],
                       help="regenerate the reference tables and curve data")
    p.add_argument("--which", default="all",
                   choices=["all"] + list(TABLE_BUILDERS))
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, NotImplementedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
