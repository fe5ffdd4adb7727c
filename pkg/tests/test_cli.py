import json

import pytest

from fracnls import cli


def write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_ml_eval_exp_reduction(tmp_path, capsys):
    cfg = write(tmp_path, {"subcommand": "ml-eval", "options": {"beta": 1.0, "z": [1]}})
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert "2.718281828" in capsys.readouterr().out
    assert (tmp_path / "o" / "ml_eval.csv").exists()


@pytest.mark.parametrize("name", cli.preset_names())
def test_presets_validate(name):
    cli.validate(cli.load_preset(name))


def test_shipped_presets():
    assert set(cli.preset_names()) == {"thm11", "masslimit", "smoothing_kpv", "illposed_p3", "illposed_scaled"}


def test_schema_error_reports_field_path(tmp_path, capsys):
    cfg = write(tmp_path, {"subcommand": "solve", "params": {"alpha": -1, "beta": 0.5}, "grid": {"n_points": 64, "length": 10},
                           "mesh": {"T": 1, "m": 4}, "data": {"kind": "gaussian"}, "options": {"bogus": 1}})
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "params/alpha" in err and "bogus" in err


def test_semantic_error_exit_2(tmp_path, capsys):
    # valid JSON shape, but the grid size is not a power of two
    cfg = write(tmp_path, {"subcommand": "linear", "params": {"alpha": 1.5, "beta": 0.75}, "grid": {"n_points": 100, "length": 10},
                           "data": {"kind": "gaussian"}, "options": {"times": [0.1]}})
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "power of two" in capsys.readouterr().err


def test_unknown_preset_and_bad_flags(tmp_path):
    assert cli.main(["--preset", "nope"]) == 2
    assert cli.main(["--preset", "thm11", "--jobs", "0"]) == 2
    assert cli.main(["--preset", "thm11", "--seed", "-1"]) == 2


def test_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write(tmp_path, {"subcommand": "ml-eval", "options": {"z": [0.5]}, "params": {"alpha": 1, "beta": 0.5}})
    assert cli.main(["--config", cfg, "--out", str(blocker / "sub")]) == 2


def small_solve(amp):
    return {"subcommand": "solve", "params": {"alpha": 1.75, "beta": 0.875}, "grid": {"n_points": 128, "length": 50.0},
            "mesh": {"T": 0.5, "m": 32}, "data": {"kind": "gaussian", "norm": amp, "norm_s": 0.25}, "tolerances": {"max_iter": 30}}


def test_solve_then_norms(tmp_path, capsys):
    out = tmp_path / "s"
    assert cli.main(["--config", write(tmp_path, small_solve(0.1)), "--out", str(out)]) == 0
    assert "converged" in capsys.readouterr().out
    rep = json.loads((out / "norms.json").read_text())
    assert rep["residual"] <= 1e-10
    norms = {"subcommand": "norms", "options": {"trajectory": str(out / "trajectory.txt")}}
    assert cli.main(["--config", write(tmp_path, norms, "n.json"), "--out", str(tmp_path / "n")]) == 0
    got = json.loads((tmp_path / "n" / "norms.json").read_text())
    assert got["lambda_T"] == pytest.approx(rep["lambda_T"], rel=1e-12)


def test_nonconvergence_exit_3(tmp_path):
    out = tmp_path / "nc"
    assert cli.main(["--config", write(tmp_path, small_solve(20.0)), "--out", str(out)]) == 3
    assert (out / "history.csv").exists()


def smoothing_cfg():
    return {"subcommand": "smoothing", "params": {"alpha": 2.0, "beta": 1.0},
            "options": {"scales": [3, 4], "n_trials": 3, "n_modes": 16, "x_points": 512}}


def test_smoothing_reproducible(tmp_path):
    cfg = write(tmp_path, smoothing_cfg())
    for d in ("a", "b"):
        assert cli.main(["--config", cfg, "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "smoothing.csv").read_bytes()
    assert a == (tmp_path / "b" / "smoothing.csv").read_bytes()
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "c"), "--seed", "99"]) == 0
    assert a != (tmp_path / "c" / "smoothing.csv").read_bytes()


def test_subcommand_override_and_plots(tmp_path):
    pytest.importorskip("matplotlib")
    d = {"subcommand": "ml-eval", "options": {"p": 3, "eps": 0.6, "N": 64, "n_lam": 9}}
    assert cli.main(["h-func", "--config", write(tmp_path, d), "--out", str(tmp_path / "h"), "--plots"]) == 0
    assert (tmp_path / "h" / "h_func.png").exists()
    summary = json.loads((tmp_path / "h" / "h_func.json").read_text())
    assert summary["max_rel_err"] < 1e-8


def test_illposed_small(tmp_path, capsys):
    d = {"subcommand": "illposed", "params": {"alpha": 1.75, "beta": 0.875},
         "options": {"N_list": [64, 128, 256], "m_nodes": 512}}
    assert cli.main(["--config", write(tmp_path, d), "--out", str(tmp_path / "i")]) == 0
    assert "measured slope" in capsys.readouterr().out
    rep = json.loads((tmp_path / "i" / "growth.json").read_text())
    assert rep["predicted_slope"] == pytest.approx(0.2)


@pytest.mark.slow
@pytest.mark.parametrize("name", cli.preset_names())
def test_presets_run_within_budget(name, tmp_path):
    d = cli.load_preset(name)
    cfg = cli.RunConfig.from_dict(d, out=tmp_path)
    status, msg = cli.run(cfg)
    assert status == 0, msg
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["seconds"] <= d["budget_seconds"]
