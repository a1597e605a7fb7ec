import csv
import io
from pathlib import Path

import numpy as np
import pytest

import virsdd as v
from virsdd.cli import main, run_sweep, sweep_values
from virsdd.config import RunConfig, describe_keys, parse_config, serialize, with_override

ROOT = Path(__file__).resolve().parents[1]
SHIPPED = ROOT / "configs" / "p0.cfg"


def test_empty_document_is_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.params == v.P0
    eq = v.equilibrium(v.P0)
    d = cfg.delay_spec()
    assert (d.centerT, d.centerV) == (eq.That, eq.Vhat)


def test_round_trip_shipped():
    cfg = parse_config(SHIPPED.read_text())
    assert parse_config(serialize(cfg)) == cfg
    assert cfg.params == v.P0


@pytest.mark.parametrize("text,line,needle", [
    ("model.lambda = -1\n", 1, "lambda"),
    ("# c\nmodel.bogus = 1\n", 2, "unknown key"),
    ("sim.dt = 0.1\nsim.dt = 0.2\n", 2, "duplicate"),
    ("\n\nsim.t_end = abc\n", 3, "expected float"),
    ("delay.family = weird\n", 1, "delay.family"),
    ("init.kind = constant\n", 1, "requires"),
    ("init.T = 1\n", 1, "only used"),
    ("quad.panels = 5\n", 1, "panels"),
    ("just text\n", 1, "expected"),
])
def test_parse_errors(text, line, needle):
    with pytest.raises(v.ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert needle in str(exc.value)
    assert str(exc.value).startswith(f"line {line}: ")


def test_init_kinds():
    c = parse_config("init.kind = constant\n" + "".join(f"init.{n} = {i + 1}\n"
                                                       for i, n in enumerate(("T", "Tstar", "V", "Y", "A"))))
    np.testing.assert_array_equal(c.initial()(0.0), [1, 2, 3, 4, 5])
    r = parse_config("init.kind = random\ninit.seed = 4\n")
    assert np.array_equal(r.initial().values, r.initial().values)
    e = parse_config("init.epsilon = 0.5\n")
    np.testing.assert_allclose(e.initial()(0.0), v.equilibrium(v.P0).as_array() + 0.5)


def test_override():
    cfg = with_override(parse_config(""), "delay.a", 0.3)
    assert cfg.delay.a1 == cfg.delay.a2 == 0.3
    with pytest.raises(v.ConfigError):
        with_override(cfg, "delay.zzz", 1.0)
    assert "model.lambda" in describe_keys()


def test_sweep_values():
    np.testing.assert_array_equal(sweep_values(0.0, 1.0, 3), [0.0, 0.5, 1.0])
    with pytest.raises(v.ConfigError):
        sweep_values(0.0, 1.0, 0)


def test_cli_equilibrium(capsys, tmp_path):
    out = tmp_path / "eq.csv"
    assert main(["equilibrium", "--config", str(SHIPPED), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "H2         = true" in text and "H3         = true" in text
    assert "T_hat" in text and "61.97333" in text
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "That" and float(rows[1][0]) == pytest.approx(61.97333017209012)


def test_cli_equilibrium_hypothesis_failure(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("model.b = 1\n")
    assert main(["equilibrium", "--config", str(cfg)]) == 1
    assert "H2" in capsys.readouterr().err


def test_cli_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", "--config", str(SHIPPED), "--t-end", "2", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    t, y = v.read_csv(a)
    assert t[-1] == pytest.approx(2.0) and y.shape[1] == 5


def test_cli_simulate_empty(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["simulate", "--t-end", "0", "--out", str(out)]) == 0
    assert out.read_text() == "t,T,Tstar,V,Y,A\n"


def test_cli_lyapunov(tmp_path):
    out = tmp_path / "l.csv"
    assert main(["lyapunov", "--t-end", "3", "--functional", "usdd", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,U,D,S,dU_fd,eta,deta_fd" and len(lines) > 10


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["simulate", "--dt", "-1"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("model.lambda = -1\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["sweep"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("sim.t_end = 10\n")
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(cfg), "--sweep-key", "delay.a", "--sweep-from", "0",
                 "--sweep-to", "0.02", "--sweep-steps", "3", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["value", "verdict", "max_dev"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.01, 0.02]
    assert all(r[1] == "decreasing" for r in rows[1:])


def test_sweep_threads_match_serial():
    cfg = parse_config("sim.t_end = 5\n")
    assert run_sweep(cfg, "delay.a", 0.0, 0.5, 4, workers=1) == run_sweep(cfg, "delay.a", 0.0, 0.5, 4, workers=4)


@pytest.mark.slow
def test_cli_verify_shipped(capsys):
    assert main(["verify", "--config", str(SHIPPED)]) == 0
    assert "checks passed" in capsys.readouterr().out
