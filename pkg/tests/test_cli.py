import csv

from nls.cli import main, read_config
from nls.constructions import discrete_ball
from nls.fields import Grid, read_field, write_field


def test_density_descent_and_energy(tmp_path, capsys):
    out, trace = tmp_path / "h.txt", tmp_path / "trace.csv"
    code = main(["minimize-density", "--m", "1", "--kernel", "zero", "--grid", "256,8",
                 "--iters", "50", "--out", str(out), "--trace", str(trace)])
    assert code == 0
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["iter", "energy", "step", "asymmetry"]
    assert read_field(out).mass > 0.999
    assert main(["energy", "--field", str(out)]) == 0
    assert capsys.readouterr().out.startswith("perimeter,repulsion,attraction,total")


def test_round_commands(tmp_path, capsys):
    f = tmp_path / "ball.txt"
    write_field(f, discrete_ball(Grid(1, 4.0, 200), 2.0))
    assert main(["round", "--field", str(f), "--theta", "0.25"]) == 0
    assert "constr5,1" in capsys.readouterr().out
    assert main(["round-seq", "--field", str(f), "--k-max", "3"]) == 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ntrials = 6\nkernel = riesz:0.5\nout = %s\n" % (tmp_path / "rep"))
    assert read_config(cfg)["trials"] == "6"
    assert main(["check", "--name", "lipschitz_R", "--config", str(cfg), "--trials", "8"]) == 0
    rows = (tmp_path / "rep" / "lipschitz_R.csv").read_text().splitlines()
    assert len(rows) == 1 + 8


def test_bad_kernel_is_reported(capsys):
    assert main(["minimize-density", "--kernel", "gauss:1", "--iters", "2"]) == 2
    assert "bad kernel" in capsys.readouterr().err
