import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qsfrac.cli import main
from qsfrac.config import ConfigError, compile_expr, parse_config
from qsfrac.corpus import CORPUS, build_config, config_text


BASE = """
version = 1
mesh.nx = 2
mesh.ny = 1
mesh.width = 2.0
mesh.height = 1.0
mesh.dirichlet = left, right
mesh.brittle = rect: 1, 0, 1, 1
toughness.weight = 0.05
boundary.psi = 0: 0; 1: x / 2
time.horizon = 1.0
time.knots = 9
"""


# ---------------------------------------------------------------------------
# parsing and hashing
# ---------------------------------------------------------------------------

def test_parse_and_build():
    cfg = parse_config(BASE)
    problem = cfg.build_problem()
    assert problem.mesh.n_triangles == 4
    assert problem.model.p == 2.0
    assert len(problem.grid) == 9
    assert problem.strategy.kind == "brute_force"
    assert len(problem.initial_crack) == 0


def test_hash_stable_under_reordering_and_whitespace():
    lines = [l for l in BASE.strip().splitlines()]
    reordered = "\n".join(reversed(lines)).replace(" = ", "   =  ")
    h1 = parse_config(BASE).hash
    h2 = parse_config(reordered).hash
    assert h1 == h2
    h3 = parse_config(BASE.replace("0.05", "0.06")).hash
    assert h1 != h3


def test_unknown_key_named_in_error():
    with pytest.raises(ConfigError, match="mesh.depth"):
        parse_config(BASE + "mesh.depth = 3\n")


def test_missing_required_key_named():
    with pytest.raises(ConfigError, match="time.knots"):
        parse_config(BASE.replace("time.knots = 9", ""))


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="line"):
        parse_config("version = 1\nunderspecified\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(BASE + "version = 1\n")


def test_bad_region_spec():
    with pytest.raises(ConfigError, match="mesh.brittle"):
        parse_config(BASE.replace("rect: 1, 0, 1, 1", "rect: 1, 0")).build_problem()


def test_bad_table_entry():
    with pytest.raises(ConfigError, match="boundary.psi"):
        parse_config(BASE.replace("0: 0; 1: x / 2", "0 0")).build_problem()


def test_table_must_reach_horizon():
    with pytest.raises(ConfigError, match="horizon"):
        parse_config(BASE.replace("0: 0; 1: x / 2", "0: 0; 0.5: x")).build_problem()


def test_version_required():
    with pytest.raises(ConfigError, match="version"):
        parse_config(BASE.replace("version = 1", "version = 2"))


def test_expressions_safe_and_vectorized():
    fn = compile_expr("sin(x) + min(y, 2) * sqrt(abs(x))")
    x = np.array([0.0, 1.0, 4.0])
    y = np.array([1.0, 3.0, 0.5])
    expected = np.sin(x) + np.minimum(y, 2) * np.sqrt(np.abs(x))
    assert np.allclose(fn(x, y), expected)
    for bad in ("__import__('os')", "x.__class__", "lambda: 1", "t * x", "open('f')"):
        with pytest.raises(ConfigError):
            compile_expr(bad)


def test_spatially_varying_stiffness():
    cfg = parse_config(BASE + "energy.mu = 1 + x\n")
    problem = cfg.build_problem()
    mu = np.asarray(problem.model.bulk.mu)
    assert mu.shape == (problem.mesh.n_triangles,)
    assert np.allclose(mu, 1.0 + problem.mesh.tri_centroid[:, 0])


def test_explicit_time_grid():
    cfg = parse_config(BASE.replace("time.knots = 9", "time.grid = 0, 0.25, 0.5, 1.0"))
    problem = cfg.build_problem()
    assert np.allclose(problem.grid.knots, [0, 0.25, 0.5, 1.0])


def test_corpus_configs_all_parse():
    for name in list(CORPUS) + ["strip_crackfree"]:
        problem = build_config(name, 8) if name != "strip_crackfree" else None
        if problem is None:
            from qsfrac.config import parse_config as pc

            problem = pc(config_text(name, 8))
        # building the problem exercises every construction path
        (problem.build_problem() if hasattr(problem, "build_problem") else problem)


# ---------------------------------------------------------------------------
# CLI (in-process)
# ---------------------------------------------------------------------------

def test_cli_run_and_audit_roundtrip(tmp_path, capsys):
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    rec_path = tmp_path / "rec.json"
    code = main(["run", "--config", str(cfg_path), "--out", str(rec_path)])
    assert code == 0
    assert rec_path.exists()
    assert rec_path.with_suffix(".csv").exists()
    out = capsys.readouterr().out
    assert "crack jumps" in out

    report_path = tmp_path / "report.json"
    code = main(["audit", "--config", str(cfg_path), "--record", str(rec_path),
                 "--out", str(report_path)])
    assert code == 0
    payload = json.loads(report_path.read_text())
    names = {c["name"]: c["verdict"] for c in payload["checks"]}
    assert names["irreversibility"] == "PASS"
    assert names["energy_balance"] == "PASS"
    assert names["global_stability[oracle]"] == "PASS"
    assert names["structure_identity"] == "PASS"


def test_cli_audit_fails_on_doctored_record(tmp_path, capsys):
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    rec_path = tmp_path / "rec.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    payload = json.loads(rec_path.read_text())
    payload["knots"][3]["energy"]["total"] += 1e-5
    rec_path.write_text(json.dumps(payload))
    code = main(["audit", "--config", str(cfg_path), "--record", str(rec_path)])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_audit_rejects_hash_mismatch(tmp_path, capsys):
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    rec_path = tmp_path / "rec.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    other_cfg = tmp_path / "other.cfg"
    other_cfg.write_text(config_text("strip", 17).replace("0.05", "0.07"))
    code = main(["audit", "--config", str(other_cfg), "--record", str(rec_path)])
    assert code == 2


def test_cli_bad_config_exit_2(tmp_path, capsys):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("version = 1\nmesh.nx = 2\n")
    code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert "mesh.ny" in capsys.readouterr().err


def test_cli_numeric_failure_exit_3(tmp_path, capsys):
    # zero confinement plus a crack candidate that floats: the inner solve
    # raises and the run aborts with the numeric exit code
    cfg_path = tmp_path / "float.cfg"
    cfg_path.write_text("""
version = 1
mesh.nx = 2
mesh.ny = 1
mesh.width = 2.0
mesh.height = 1.0
mesh.dirichlet = left
mesh.brittle = rect: 1, 0, 1, 1
energy.lambda = 0.0
toughness.weight = 0.05
boundary.psi = 0: 0
body.force = 0: 0; 1: 1.0
time.horizon = 1.0
time.knots = 5
""")
    code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "r.json")])
    assert code == 3


def test_cli_envelope(tmp_path, capsys):
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    rec_path = tmp_path / "rec.json"
    env_path = tmp_path / "env.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    code = main(["envelope", "--config", str(cfg_path), "--record", str(rec_path),
                 "--side", "left", "--out", str(env_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "jump knots C = [" in out
    assert "sandwich: left envelope inside the input at every knot: True" in out
    assert env_path.exists()
    # the two sides compose: right envelope of the left-envelope record
    both_path = tmp_path / "both.json"
    code = main(["envelope", "--config", str(cfg_path), "--record", str(env_path),
                 "--side", "right", "--out", str(both_path)])
    assert code == 0
    assert "sandwich: input inside the right envelope at every knot: True" in capsys.readouterr().out


def test_cli_run_overrides(tmp_path, capsys):
    cfg_path = tmp_path / "pair.cfg"
    cfg_path.write_text(config_text("pair", 9))
    rec_path = tmp_path / "rec.json"
    code = main(["run", "--config", str(cfg_path), "--out", str(rec_path),
                 "--dt", "0.25", "--strategy", "greedy"])
    assert code == 0
    payload = json.loads(rec_path.read_text())
    assert payload["grid"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert payload["strategy"]["kind"] == "greedy"
    assert payload["strategy"]["certification"] == "single-edge-stable"


def test_cli_envelope_of_jumpless_record_is_identity(tmp_path, capsys):
    cfg_path = tmp_path / "zero.cfg"
    cfg_path.write_text(config_text("zero_load", 9))
    rec_path = tmp_path / "rec.json"
    env_path = tmp_path / "env.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    assert main(["envelope", "--config", str(cfg_path), "--record", str(rec_path),
                 "--side", "right", "--out", str(env_path)]) == 0
    assert "C = []" in capsys.readouterr().out
    a = json.loads(rec_path.read_text())
    b = json.loads(env_path.read_text())
    assert a["knots"] == b["knots"]


def test_cli_oracle_compare_cooperative(tmp_path, capsys):
    cfg_path = tmp_path / "pair.cfg"
    cfg_path.write_text(config_text("pair", 17))
    code = main(["oracle-compare", "--config", str(cfg_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "worst pairs gap: 0.000e+00" in out
    assert "worst greedy gap:" in out
    # the greedy gap is strictly positive on this instance
    greedy_line = [l for l in out.splitlines() if l.startswith("worst greedy gap")][0]
    assert float(greedy_line.split(":")[1].split(";")[0]) > 0


def test_cli_oracle_compare_refuses_large_instances(tmp_path, capsys):
    cfg_path = tmp_path / "big.cfg"
    cfg_path.write_text("""
version = 1
mesh.nx = 5
mesh.ny = 4
mesh.width = 2.0
mesh.height = 1.0
mesh.brittle = all
toughness.weight = 0.5
boundary.psi = 0: 0; 1: x / 2
time.horizon = 1.0
time.knots = 5
""")
    code = main(["oracle-compare", "--config", str(cfg_path)])
    assert code == 2
    assert "crackable edges" in capsys.readouterr().err


def test_cli_stability_oracle_refusal_on_oversized_instance(tmp_path, capsys):
    cfg_path = tmp_path / "big.cfg"
    cfg_path.write_text("""
version = 1
mesh.nx = 5
mesh.ny = 4
mesh.width = 2.0
mesh.height = 1.0
mesh.brittle = all
toughness.weight = 1e9
boundary.psi = 0: 0; 1: x / 2
strategy.kind = greedy
time.horizon = 1.0
time.knots = 3
""")
    rec_path = tmp_path / "rec.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    code = main(["audit", "--config", str(cfg_path), "--record", str(rec_path),
                 "--checks", "stability", "--level", "oracle"])
    assert code == 2
    assert "limit" in capsys.readouterr().err


def test_cli_auto_level_downgrades_when_large(tmp_path, capsys):
    cfg_path = tmp_path / "big.cfg"
    cfg_path.write_text("""
version = 1
mesh.nx = 5
mesh.ny = 4
mesh.width = 2.0
mesh.height = 1.0
mesh.brittle = all
toughness.weight = 1e9
boundary.psi = 0: 0; 1: x / 2
strategy.kind = greedy
time.horizon = 1.0
time.knots = 3
""")
    rec_path = tmp_path / "rec.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    code = main(["audit", "--config", str(cfg_path), "--record", str(rec_path),
                 "--checks", "stability"])  # auto level, INCONCLUSIVE counts as pass
    assert code == 0
    out = capsys.readouterr().out
    assert "one_edge" in out
    code = main(["audit", "--config", str(cfg_path), "--record", str(rec_path),
                 "--checks", "stability", "--inconclusive", "fail"])
    assert code == 1


def test_cli_thread_count_does_not_change_records(tmp_path):
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    outs = {}
    for threads in ("1", "3"):
        rec_path = tmp_path / f"rec{threads}.json"
        env = dict(os.environ, QSFRAC_THREADS=threads)
        proc = subprocess.run(
            [sys.executable, "-m", "qsfrac", "run", "--config", str(cfg_path),
             "--out", str(rec_path)],
            capture_output=True, text=True, env=env, cwd=str(tmp_path),
        )
        assert proc.returncode == 0, proc.stderr
        outs[threads] = rec_path.read_bytes()
    assert outs["1"] == outs["3"]


def test_cli_oracle_compare_strip_has_no_gap(tmp_path, capsys):
    # a single-edge interface: greedy and exhaustive find the same crossing
    cfg_path = tmp_path / "strip.cfg"
    cfg_path.write_text(config_text("strip", 17))
    assert main(["oracle-compare", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "worst greedy gap: 0.000e+00" in out
    assert "worst pairs gap: 0.000e+00" in out


def test_cli_zero_load_trace_is_flat(tmp_path):
    cfg_path = tmp_path / "zero.cfg"
    cfg_path.write_text(config_text("zero_load", 9))
    rec_path = tmp_path / "rec.json"
    assert main(["run", "--config", str(cfg_path), "--out", str(rec_path)]) == 0
    rows = rec_path.with_suffix(".csv").read_text().splitlines()[1:]
    for row in rows:
        cells = [float(v) for v in row.split(",")[1:6]]
        assert cells == [0.0, 0.0, 0.0, 0.0, 0.0]
