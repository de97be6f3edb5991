import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bipartite_regulation import engine, pgm
from bipartite_regulation.cli import main

ROOT = Path(__file__).resolve().parent.parent
SCEN = ROOT / "scenarios"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_check_graph_four_agent():
    code, out, _ = run_cli("check-graph", str(SCEN / "four_agents.txt"))
    assert code == 0
    assert "structurally balanced: yes" in out
    assert "V1 = {1, 2}" in out and "V2 = {3, 4}" in out
    assert "H^s eigenvalues: 3, 1, 1, 1" in out


def test_check_graph_unbalanced():
    code, out, _ = run_cli("check-graph", str(SCEN / "unbalanced.txt"))
    assert code == 1
    assert "structurally balanced: no" in out
    assert "negative cycle: 3 -> 1 -> 2 -> 3" in out


def test_check_graph_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 1\n1 1 2\n")
    code, _, err = run_cli("check-graph", str(bad))
    assert code == 1 and "self-loop" in err
    code, _, err = run_cli("check-graph", str(tmp_path / "missing.txt"))
    assert code == 1


def test_check_graph_without_spanning_tree(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("0 1 1\n2 1 -1\n")
    code, out, _ = run_cli("check-graph", str(f))
    assert code == 1
    assert "leader spanning tree: no" in out


@pytest.mark.parametrize(
    "poles, beta",
    [("-1,-1", "beta = 1, 2"), ("-1+1i,-1-1i", "beta = 2, 2"), ("-2,-2", "beta = 4, 4")],
)
def test_gains(poles, beta):
    code, out, _ = run_cli("gains", "--order", "2", "--poles", poles)
    assert code == 0
    assert out.splitlines()[0] == beta


def test_gains_rejects_unstable():
    code, _, err = run_cli("gains", "--order", "2", "--poles", "1,-1")
    assert code == 1 and "negative real part" in err


def test_usage_errors():
    assert run_cli()[0] == 1
    assert run_cli("frobnicate")[0] == 1
    assert run_cli("gains", "--order", "2", "--poles", "-1,-1", "--bogus")[0] == 1
    code, _, err = run_cli("turing", "--out", "x.pgm")
    assert code == 1 and "--target" in err


def test_simulate_short(tmp_path):
    cfg = (SCEN / "vdp_pendulums.cfg").read_text().replace("t_final = 30", "t_final = 1")
    (tmp_path / "four_agents.txt").write_text((SCEN / "four_agents.txt").read_text())
    (tmp_path / "run.cfg").write_text(cfg)
    out_csv = tmp_path / "run.csv"
    plots = tmp_path / "plots"
    code, out, err = run_cli("simulate", "--config", str(tmp_path / "run.cfg"),
                             "--out", str(out_csv), "--plot-dir", str(plots))
    assert code == 0, err
    assert out.startswith("mu = 10.47")
    assert "bounded: yes" in out
    data = engine.read_csv(io.StringIO(out_csv.read_text()))
    assert data[("leader", "v1")][0][-1] == pytest.approx(1.0)
    pngs = sorted(p.name for p in plots.iterdir())
    assert pngs and all(p.endswith(".png") for p in pngs)
    # same input, same bytes
    again = tmp_path / "again.csv"
    run_cli("simulate", "--config", str(tmp_path / "run.cfg"), "--out", str(again))
    assert again.read_bytes() == out_csv.read_bytes()


def test_simulate_overrides(tmp_path):
    out_csv = tmp_path / "o.csv"
    code, out, _ = run_cli("simulate", "--config", str(SCEN / "vdp_pendulums.cfg"), "--out", str(out_csv),
                           "--mu", "20", "--dt", "0.01", "--t-final", "0.5")
    assert code == 0
    assert out.startswith("mu = 20\n")


def test_simulate_bad_config(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("graph = four_agents\nwhatever = 3\n")
    code, _, err = run_cli("simulate", "--config", str(f), "--out", str(tmp_path / "o.csv"))
    assert code == 1 and "unknown config key" in err
    f.write_text(f"graph = {SCEN / 'unbalanced.txt'}\n")
    code, _, err = run_cli("simulate", "--config", str(f), "--out", str(tmp_path / "o.csv"))
    assert code == 1


def test_simulate_blowup_exit_code(tmp_path):
    f = tmp_path / "blow.cfg"
    f.write_text("graph = four_agents\npoles = 1,1\n")
    code, _, err = run_cli("simulate", "--config", str(f), "--out", str(tmp_path / "o.csv"))
    assert code == 1  # unstable poles are refused up front
    f.write_text("graph = four_agents\nmu = 1000\ndt = 0.1\nt_final = 20\nv0 = 0.1,0.2\neta0 = ramp\n")
    code, _, err = run_cli("simulate", "--config", str(f), "--out", str(tmp_path / "o.csv"))
    assert code == 2 and "numerical failure" in err
    assert (tmp_path / "o.csv").read_text().startswith("time,entity,series,value\n")


def test_turing_from_pgm(tmp_path):
    target = np.array([[0, 255, 0], [255, 255, 0]])
    src = tmp_path / "in.pgm"
    src.write_bytes(pgm.encode_pgm(target))
    dst = tmp_path / "out.pgm"
    code, out, _ = run_cli("turing", "--target", str(src), "--out", str(dst), "--plot-dir",
                           str(tmp_path / "p"))
    assert code == 0
    assert "sign match 100.00%" in out
    pixels, _ = pgm.read_pgm(dst)
    np.testing.assert_array_equal(pixels, [[0, 255, 0], [255, 255, 0]])
    assert any(p.suffix == ".png" for p in (tmp_path / "p").iterdir())


def test_turing_stripes(tmp_path):
    dst = tmp_path / "s.pgm"
    code, out, _ = run_cli("turing", "--stripes", "16x4", "--out", str(dst), "--t-final", "10")
    assert code == 0 and "sign match 100.00%" in out
    assert dst.read_bytes().startswith(b"P5\n16 4\n255\n")
    assert run_cli("turing", "--stripes", "16by4", "--out", str(dst))[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bipartite_regulation", "gains", "--order", "1",
                           "--poles", "-3"], capture_output=True, text=True, cwd=ROOT)
    assert proc.returncode == 0
    assert proc.stdout.startswith("beta = 3")
