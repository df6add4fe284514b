import numpy as np
import pytest

from frachp.cli import ensemble_map, main
from frachp.config import RunConfig, config_lines, parse_config
from frachp.core import Trajectory, make_grid
from frachp.errors import MissingKey, ParseError, UnknownKey
from frachp.integrator import initial_state

REFERENCE_TEXT = """\
# pendulum run at the reference parameter set
system = pendulum
alpha = 0.6
beta = 0.3
t_eval = 0.8
h = 0.0001
n_steps = 7000
seed = 1
"""


def small_config(tmp_path, name="run.cfg", **overrides):
    base = {"system": "pendulum", "alpha": 0.6, "beta": 0.3,
            "t_eval": 0.8, "h": 0.001, "n_steps": 300, "seed": 1,
            "out": str(tmp_path / "out")}
    base.update(overrides)
    text = "\n".join(f"{k} = {v}" for k, v in base.items()) + "\n"
    cfg_path = tmp_path / name
    cfg_path.write_text(text, encoding="utf-8")
    return cfg_path, base


class TestParseConfig:
    def test_reference_parameter_set(self):
        cfg = parse_config(REFERENCE_TEXT)
        assert cfg.system == "pendulum"
        assert cfg.alpha == 0.6 and cfg.beta == 0.3
        assert cfg.t_eval == 0.8 and cfg.h == 0.0001
        assert cfg.n_steps == 7000 and cfg.seed == 1
        # defaults survive
        assert cfg.gamma == "cos" and cfg.plot is True

    def test_alpha_out_of_range_names_key(self):
        with pytest.raises(ParseError, match="alpha"):
            parse_config(REFERENCE_TEXT.replace("alpha = 0.6", "alpha = 1.5"))

    def test_empty_text_missing_key(self):
        with pytest.raises(MissingKey, match="system"):
            parse_config("")

    def test_unknown_key_with_line_number(self):
        text = REFERENCE_TEXT + "alfa = 0.6\n"
        with pytest.raises(UnknownKey, match="line 9.*alfa"):
            parse_config(text)

    def test_malformed_line(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_config("just words\n" + REFERENCE_TEXT)

    def test_bad_value_reports_key(self):
        with pytest.raises(ParseError, match="n_steps"):
            parse_config(REFERENCE_TEXT.replace("n_steps = 7000",
                                            "n_steps = many"))

    def test_levels_minimum(self):
        with pytest.raises(ParseError, match="levels"):
            parse_config(REFERENCE_TEXT + "levels = 2\n")

    def test_vector_values(self):
        cfg = parse_config(REFERENCE_TEXT + "q0 = 1.0, 2.0\np0 = 0.5, -0.5\n")
        assert cfg.q0 == (1.0, 2.0) and cfg.p0 == (0.5, -0.5)

    def test_roundtrip_through_serializer(self):
        cfg = parse_config(REFERENCE_TEXT + "plot = false\ngamma = const\n")
        again = parse_config(config_lines(cfg))
        assert again == cfg


class TestSimulateCommand:
    def test_outputs_and_manifest(self, tmp_path, capsys):
        cfg_path, base = small_config(tmp_path)
        assert main(["simulate", "--config", str(cfg_path)]) == 0
        out = tmp_path / "out"
        for name in ("trajectory.csv", "trajectory_deterministic.csv",
                     "p_vs_n.svg", "phase_qp.svg", "p_vs_n_noisy.svg",
                     "phase_qp_noisy.svg", "run_manifest"):
            assert (out / name).exists(), name
        manifest = (out / "run_manifest").read_text()
        assert "alpha = 0.6" in manifest
        assert "resolved_seed = 1" in manifest
        assert "code_version = " in manifest
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "step,s,q_1,p_1,v_1"
        assert "simulate" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path, _ = small_config(tmp_path)
        main(["simulate", "--config", str(cfg_path),
              "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(cfg_path),
              "--out", str(tmp_path / "b")])
        for name in ("trajectory.csv", "p_vs_n_noisy.svg"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_seed_override_changes_noise_only(self, tmp_path):
        cfg_path, _ = small_config(tmp_path)
        main(["simulate", "--config", str(cfg_path),
              "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(cfg_path), "--seed", "2",
              "--out", str(tmp_path / "b")])
        det = "trajectory_deterministic.csv"
        assert (tmp_path / "a" / det).read_bytes() == \
            (tmp_path / "b" / det).read_bytes()
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() != \
            (tmp_path / "b" / "trajectory.csv").read_bytes()
        man = (tmp_path / "b" / "run_manifest").read_text()
        assert "resolved_seed = 2" in man

    def test_plot_false_skips_svg(self, tmp_path):
        cfg_path, _ = small_config(tmp_path, plot="false")
        main(["simulate", "--config", str(cfg_path)])
        assert not list((tmp_path / "out").glob("*.svg"))

    def test_validation_error_before_outputs(self, tmp_path, capsys):
        cfg_path, _ = small_config(tmp_path, alpha=1.5)
        assert main(["simulate", "--config", str(cfg_path)]) == 1
        assert not (tmp_path / "out").exists()
        assert "error" in capsys.readouterr().err

    def test_guard_violation_is_reported(self, tmp_path, capsys):
        # 300 steps of h = 0.01 reaches past t_eval - 10 h
        cfg_path, _ = small_config(tmp_path, h=0.01)
        assert main(["simulate", "--config", str(cfg_path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_metric_system_runs(self, tmp_path):
        cfg_path, _ = small_config(tmp_path, system="metric:polar",
                                   q0="1.0, 0.2", p0="0.0, 0.1")
        assert main(["simulate", "--config", str(cfg_path)]) == 0
        header = (tmp_path / "out" / "trajectory.csv").read_text() \
            .splitlines()[0]
        assert header == "step,s,q_1,q_2,p_1,p_2,v_1,v_2"


class TestConvergenceCommand:
    def test_slope_and_csv(self, tmp_path, capsys):
        cfg_path, _ = small_config(
            tmp_path, alpha=1.0, beta=1.0, t_eval=10.0, h=0.0004,
            levels=3, n_paths=8, t_end=0.32)
        assert main(["convergence", "--config", str(cfg_path)]) == 0
        lines = (tmp_path / "out" / "convergence.csv").read_text() \
            .splitlines()
        assert lines[0] == "h,mean_error"
        assert len(lines) == 3  # levels - 1 coarse levels vs reference
        out = capsys.readouterr().out
        assert "slope" in out
        man = (tmp_path / "out" / "run_manifest").read_text()
        assert "fitted_slope = " in man


class TestActionCheckCommand:
    def test_pass_on_solution(self, tmp_path, capsys):
        cfg_path, _ = small_config(tmp_path, gamma="const", h=0.0005,
                                   n_steps=1400)
        assert main(["action-check", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "max |dA|" in out
        assert "verdict = PASS" in \
            (tmp_path / "out" / "run_manifest").read_text()

    def test_fail_on_frozen_trajectory(self, tmp_path, capsys):
        from frachp.cli import cmd_action_check
        from frachp.core import FractionalParams
        from frachp.dynamics import pendulum_system
        cfg = RunConfig(system="pendulum", alpha=0.6, beta=0.3, t_eval=0.8,
                        h=0.0005, n_steps=1400, gamma="const",
                        out=str(tmp_path / "out"))
        params = FractionalParams(0.6, 0.3, 0.8)
        grid = make_grid(0.0, 0.0005, 1400, params)
        init = initial_state(pendulum_system(gamma_coupling="const"),
                             [1.0], p0=[0.0])
        frozen = Trajectory(grid, tuple([init] * 1401))
        assert cmd_action_check(cfg, _trajectory_override=frozen) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_noisy_reports_ungated(self, tmp_path, capsys):
        cfg_path, _ = small_config(tmp_path, gamma="cos", n_paths=4,
                                   n_steps=200)
        assert main(["action-check", "--config", str(cfg_path)]) == 0
        out = capsys.readouterr().out
        assert "not gated" in out and "mean |dA|" in out


class TestVolterraCommand:
    def test_summary_paths_and_closed_form(self, tmp_path, capsys):
        cfg_path, _ = small_config(
            tmp_path, beta=1.0, h=0.001, n_steps=1000, n_paths=4,
            mu=0.1, sigma=0.0)
        assert main(["volterra", "--config", str(cfg_path)]) == 0
        out_dir = tmp_path / "out"
        lines = (out_dir / "summary.csv").read_text().splitlines()
        assert lines[0] == "n_paths,mean_XT,var_XT"
        n_paths, mean, var = lines[1].split(",")
        assert n_paths == "4"
        assert float(mean) == pytest.approx(np.exp(0.1), rel=0.01)
        assert float(var) == 0.0
        assert len(list(out_dir.glob("path_*.csv"))) == 4
        assert "closed form" in capsys.readouterr().out

    def test_martingale_note_and_path_cap(self, tmp_path, capsys):
        cfg_path, _ = small_config(tmp_path, beta=0.5, h=0.01, n_steps=100,
                                   n_paths=40, mu=0.0, sigma=0.2)
        assert main(["volterra", "--config", str(cfg_path)]) == 0
        # above the per-path dump cap of 32 only the summary is written
        assert not list((tmp_path / "out").glob("path_*.csv"))
        assert "martingale" in capsys.readouterr().out

    def test_no_singularity_guard(self, tmp_path):
        # the recursion uses the outer time t_{k+1}, so the grid may reach
        # the evaluation time itself
        cfg_path, _ = small_config(tmp_path, beta=0.5, h=0.01,
                                   n_steps=100, t_eval=1.0, n_paths=2)
        assert main(["volterra", "--config", str(cfg_path)]) == 0


class TestEnsembleMap:
    def test_threaded_matches_serial(self, monkeypatch):
        items = list(range(50))
        fn = lambda x: x * x  # noqa: E731
        monkeypatch.delenv("FRACHP_THREADS", raising=False)
        serial = ensemble_map(fn, items)
        monkeypatch.setenv("FRACHP_THREADS", "4")
        assert ensemble_map(fn, items) == serial
        monkeypatch.setenv("FRACHP_THREADS", "0")  # auto worker count
        assert ensemble_map(fn, items) == serial


def test_missing_config_file_is_an_error(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert "error" in capsys.readouterr().err
