"""End-to-end command line checks: parsing, outputs, determinism."""

import json
import os
from fractions import Fraction

import pytest

from becstop.cli import ConfigError, main, parse_spec
from becstop.enumerators import EnsembleSpec


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# spec grammar
# ---------------------------------------------------------------------------


def test_parse_spec_strings():
    assert parse_spec("rma:q=3,L=2") == EnsembleSpec("rma", q=3, L=2)
    assert parse_spec(" rma:q=3,L=2 ") == EnsembleSpec("rma", q=3, L=2)
    got = parse_spec("hcc:type=2,q=4,q1=2")
    assert got == EnsembleSpec("hcc", q=4, hcc_type=2, q1=2)
    punct = parse_spec("rma:q=4,L=2,lambda=3/4")
    assert punct.lam == Fraction(3, 4)
    # round trip through the canonical label
    for text in ("rma:q=3,L=2", "hcc:type=2,q=4,q1=2",
                 "rma:q=4,L=2,lambda=3/4", "hcc:type=4,q=5"):
        assert parse_spec(parse_spec(text).label()) == parse_spec(text)


def test_parse_spec_json_file(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps(
        {"family": "rma", "q": 3, "L": 2, "lambda": "2/3"}))
    spec = parse_spec(str(cfg))
    assert spec == EnsembleSpec("rma", q=3, L=2, lam=Fraction(2, 3))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        parse_spec(str(bad))
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_spec(str(bad))


@pytest.mark.parametrize("text", [
    "bogus",
    "rma",
    "rma:q=x,L=2",
    "rma:q=3,L=2,bad=1",
    "rma:L=2",
    "hcc:type=9,q=4",
    "hcc:type=2,q=4,q1=4",
    "rma:q=3,L=2,lambda=abc",
    "rma:q=3;L=2",
])
def test_parse_spec_rejects(text):
    with pytest.raises(ConfigError):
        parse_spec(text)


def test_bad_spec_exits_2(capsys):
    assert main(["enumerate", "--spec", "bogus", "--n", "6",
                 "--out", "x.csv"]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_subcommand_usage_error():
    with pytest.raises(SystemExit):
        main(["no-such-command"])


# ---------------------------------------------------------------------------
# enumerate
# ---------------------------------------------------------------------------


def test_enumerate_csv_and_sidecar(tmp_path):
    out = tmp_path / "enum.csv"
    argv = ["enumerate", "--spec", "rma:q=3,L=2", "--n", "12",
            "--h-max", "6", "--out", str(out)]
    assert main(argv) == 0
    text = read(out)
    lines = text.splitlines()
    assert lines[0].startswith("# provenance: tool=becstop version=")
    assert "command=enumerate" in lines[0]
    assert lines[1] == "h,s_h"
    assert len(lines) == 2 + 7
    assert lines[2] == "0,1"
    meta = json.loads(read(str(out) + ".json"))
    assert meta["h_cap"] == 6
    assert meta["exact_backend"] is True
    assert meta["spec"] == "rma:q=3,L=2"
    assert "timestamp" not in json.dumps(meta).lower()
    # reruns are byte-identical
    assert main(argv) == 0
    assert read(out) == text


def test_enumerate_exact_sidecar_fractions(tmp_path):
    out = tmp_path / "enum.csv"
    assert main(["enumerate", "--spec", "rma:q=3,L=1", "--n", "6",
                 "--exact", "--out", str(out)]) == 0
    meta = json.loads(read(str(out) + ".json"))
    nums = [int(v) for v in meta["numerators"]]
    dens = [int(v) for v in meta["denominators"]]
    assert nums[0] == 1 and dens[0] == 1
    assert len(nums) == len(dens) == 7


def test_enumerate_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BECSTOP_OUT_DIR", str(tmp_path))
    assert main(["enumerate", "--spec", "rma:q=2,L=1", "--n", "4",
                 "--out", "sub/enum.csv"]) == 0
    assert (tmp_path / "sub" / "enum.csv").exists()
    assert (tmp_path / "sub" / "enum.csv.json").exists()


# ---------------------------------------------------------------------------
# hmin-bound, spectral, rho0, threshold, exit-curves
# ---------------------------------------------------------------------------


def test_hmin_bound_csv(tmp_path):
    out = tmp_path / "bound.csv"
    assert main(["hmin-bound", "--spec", "rma:q=3,L=2", "--n-list", "6,12",
                 "--epsilon", "0.5", "--out", str(out)]) == 0
    lines = read(out).splitlines()
    assert lines[1] == "N,hBar,tail"
    assert len(lines) == 4
    assert lines[2].split(",")[0] == "6"
    meta = json.loads(read(str(out) + ".json"))
    assert len(meta["points"]) == 2
    assert main(["hmin-bound", "--spec", "rma:q=3,L=2", "--n-list", "6",
                 "--epsilon", "2.0", "--out", str(out)]) == 2


def test_spectral_csv(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["spectral", "--spec", "rma:q=2,L=1", "--rho-min", "0.30",
                 "--rho-max", "0.40", "--drho", "0.05",
                 "--out", str(out)]) == 0
    lines = read(out).splitlines()
    assert lines[1] == "rho,r_s,beta_0,beta_1,gamma_1,method_gap"
    assert len(lines) == 5
    for row in lines[2:]:
        cells = row.split(",")
        assert len(cells) == 6
        assert float(cells[1]) >= -1e-6
        assert float(cells[5]) <= 1e-6


def test_rho0_json_degenerate(capsys):
    # weakest chain: already positive at the first scan point
    assert main(["rho0", "--spec", "rma:q=2,L=1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["rho0"] == "none"
    assert payload["neverPositive"] is False
    assert payload["firstPositive"] == pytest.approx(1e-3)
    assert payload["tolerances"]["bisectWidth"] == 1e-5


def test_threshold_json(capsys):
    assert main(["threshold", "--spec", "rma:q=3,L=2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 < payload["pStar"] < 1.0
    assert payload["tolerance"] == 1e-5
    assert payload["iterations"] > 0
    assert payload["provenance"]["command"] == "threshold"


def test_exit_curves_csv(tmp_path):
    out = tmp_path / "exit.csv"
    assert main(["exit-curves", "--spec", "hcc:type=4,q=4", "--p-ch", "0.5",
                 "--out", str(out)]) == 0
    lines = read(out).splitlines()
    assert lines[1] == "i_a,outer_i_e,inner_i_e"
    assert len(lines) == 2 + 201
    first = lines[2].split(",")
    last = lines[-1].split(",")
    assert float(first[0]) == 0.0
    assert float(last[0]) == 1.0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_stdout_and_determinism(capsys):
    argv = ["simulate", "--spec", "rma:q=3,L=1", "--n", "6",
            "--p-grid", "0.3,0.6", "--trials", "8", "--seed", "4"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    lines = first.splitlines()
    assert lines[1] == "p,fer,fer_ci_low,fer_ci_high,avg_residual"
    assert len(lines) == 4
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_simulate_to_file_with_fixed_interleavers(tmp_path):
    perm = tmp_path / "perm.txt"
    perm.write_text("# one stage\n5,4,3,2,1,0\n")
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--spec", "rma:q=3,L=1", "--n", "6",
                 "--p-grid", "0.5", "--trials", "6", "--seed", "1",
                 "--fixed-interleavers", str(perm), "--out", str(out)]) == 0
    assert read(out).splitlines()[1].startswith("p,")
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n")
    assert main(["simulate", "--spec", "rma:q=3,L=1", "--n", "6",
                 "--p-grid", "0.5", "--trials", "6", "--seed", "1",
                 "--fixed-interleavers", str(bad)]) == 2


def test_simulate_rejects_bad_grid():
    assert main(["simulate", "--spec", "rma:q=3,L=1", "--n", "6",
                 "--p-grid", "1.5", "--trials", "5", "--seed", "0"]) == 2
    assert main(["simulate", "--spec", "rma:q=3,L=1", "--n", "6",
                 "--p-grid", "0.5", "--trials", "0", "--seed", "0"]) == 2


# ---------------------------------------------------------------------------
# oracle-check
# ---------------------------------------------------------------------------


def test_oracle_check_siosef(capsys):
    assert main(["oracle-check", "--what", "siosef",
                 "--spec", "rma:q=2,L=1", "--n", "6"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pass"] is True
    assert payload["what"] == "siosef"


def test_oracle_check_decoder(capsys):
    assert main(["oracle-check", "--what", "decoder",
                 "--spec", "rma:q=3,L=2", "--n", "12",
                 "--trials", "6", "--seed", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pass"] is True
    assert payload["patterns"] > 0


def test_oracle_check_ssef_exact(capsys):
    assert main(["oracle-check", "--what", "ssef",
                 "--spec", "rma:q=2,L=1", "--n", "4"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pass"] is True
    assert payload["mode"] == "exhaustive"


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def test_tables_single_which(tmp_path):
    assert main(["tables", "--which", "fig8", "--out-dir",
                 str(tmp_path)]) == 0
    manifest = json.loads(read(tmp_path / "manifest.json"))
    assert manifest["which"] == ["fig8"]
    assert len(manifest["entries"]) == 1
    name = manifest["entries"][0]["file"]
    data = read(tmp_path / name)
    assert data.splitlines()[1] == "i_a,outer_i_e,inner_i_e"
