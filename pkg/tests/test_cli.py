import math

from ubeas.cli import main
from ubeas.link import MODULATIONS


def write_small_config(path, stages=15, reps=2):
    path.write_text(
        f"num_pairs = 6\nstages = {stages}\nrepetitions = {reps}\nseed = 11\n",
        encoding="utf-8",
    )


def test_run_writes_outputs_and_exits_zero(tmp_path, capsys):
    cfg = tmp_path / "cell.cfg"
    write_small_config(cfg)
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg), "--out", str(out), "--dump-topology"])
    assert code == 0
    for name in ("trajectory.csv", "summary.csv", "satisfaction.csv",
                 "class_power.csv", "class_pdr.csv", "long.csv", "topology.csv"):
        assert (out / name).exists(), name
    assert "casual" in capsys.readouterr().out


def test_run_rejects_invalid_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("z = 0\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "z" in capsys.readouterr().err


def test_bad_cli_usage_is_validation_error(capsys):
    assert main(["run", "--game", "checkers"]) == 1


def test_verify_nash_requires_frozen_channel(tmp_path, capsys):
    cfg = tmp_path / "cell.cfg"
    write_small_config(cfg)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--verify", "nash"])
    assert code == 1
    assert "freeze" in capsys.readouterr().err


def test_verify_nash_passes_on_frozen_run(tmp_path, capsys):
    cfg = tmp_path / "cell.cfg"
    write_small_config(cfg, stages=60, reps=1)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--freeze-fading", "--verify", "nash"])
    assert code == 0
    assert "nash verification passed" in capsys.readouterr().out


def test_verify_pareto_fails_before_convergence(tmp_path, capsys):
    cfg = tmp_path / "cell.cfg"
    write_small_config(cfg, stages=5)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--verify", "pareto"])
    assert code == 2
    assert "verification failed" in capsys.readouterr().err


def test_fit_subcommand(tmp_path, capsys):
    mod = MODULATIONS["16qam"]
    lines = ["sinr,pdr"]
    for g in [0.7 + 0.1 * k for k in range(24)]:
        lines.append(f"{g},{math.exp(-((1.0 / (g * mod.a_c)) ** mod.b_c))}")
    samples = tmp_path / "samples.csv"
    samples.write_text("\n".join(lines), encoding="utf-8")
    assert main(["fit", "--samples", str(samples)]) == 0
    out = capsys.readouterr().out
    assert "a_c = 1.383" in out
    assert "b_c = 6.565" in out


def test_fit_rejects_missing_file(capsys):
    assert main(["fit", "--samples", "/nonexistent/samples.csv"]) == 1


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
