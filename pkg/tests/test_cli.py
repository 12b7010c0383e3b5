import json

import numpy as np
import pytest

from oracle_cs import __version__, cli
from oracle_cs.mc import ExperimentConfig, run_sweep
from oracle_cs.noise import White

FAST = ["--n", "64", "--k", "4", "--m", "24", "--trials", "20"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    code, out, _ = run(capsys, "version")
    assert code == 0 and __version__ in out


def test_sweep_white_writes_csv_and_manifest(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "white", *FAST, "--sigma2z-grid", "1e-3,1e-1", "--delta-k", "0", "--delta-k", "0.5", "--out", str(tmp_path))
    assert code == 0
    text = (tmp_path / "white.csv").read_bytes()
    assert b"\r" not in text and text.endswith(b"\n")
    header, data = cli.read_csv(tmp_path / "white.csv")
    assert header == [
        "sigma2_z", "empirical_mse", "std_error", "predicted_mse",
        "lower_dk0.0", "upper_dk0.0", "lower_dk0.5", "upper_dk0.5",
    ]
    assert data.shape == (2, 8)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == ["white.csv"]
    assert manifest["config"]["sigma2_phi"] == 1 / 24
    assert manifest["config"]["delta_k"] == [0.0, 0.5]
    assert manifest["seed"] == 1 and manifest["version"] == __version__


def test_csv_round_trip_is_exact(tmp_path):
    cfg = ExperimentConfig(64, 4, 24, White(24, 0.1), trials=15, seed=4)
    r = run_sweep(cfg, "sigma2_z", [1 / 3, 0.1, 7e-5], [0.0, 0.3])
    rows = cli.sweep_rows(r, correlated=False)
    cli.write_csv(tmp_path / "r.csv", cli.sweep_header(r), rows)
    _, data = cli.read_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(data, np.array(rows))
    np.testing.assert_array_equal(data[:, 1], r.empirical_mse)


def test_sweep_corr_one_file_per_rho(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "corr", *FAST, "--rho", "0.9", "--rho", "0.999", "--sigma2z-grid", "0.01", "--out", str(tmp_path))
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("*.csv")) == ["corr_rho0.9.csv", "corr_rho0.999.csv"]
    header, data = cli.read_csv(tmp_path / "corr_rho0.999.csv")
    assert np.isnan(data[0, 4]) and data[0, 5] > data[0, 3]


def test_sweep_quant_coarse_step_still_valid(tmp_path, capsys):
    code, *_ = run(capsys, "sweep", "quant", *FAST, "--delta-grid", "0.001,5", "--out", str(tmp_path))
    assert code == 0
    header, data = cli.read_csv(tmp_path / "quant.csv")
    assert header[0] == "delta" and np.all(np.isfinite(data))


def test_gnuplot_script(tmp_path, capsys):
    run(capsys, "sweep", "white", *FAST, "--sigma2z-grid", "0.1", "--gnuplot", "--out", str(tmp_path))
    script = (tmp_path / "plot.gp").read_text()
    assert "white.csv" in script and "set datafile separator ','" in script


def test_config_file_precedence(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("# test config\nn = 64\nk = 4\nm = 24\ntrials = 7\nseed = 99\nsigma2z-grid = 0.1, 0.2\n")
    out = tmp_path / "o"
    code, *_ = run(capsys, "sweep", "white", "--config", str(conf), "--seed", "5", "--out", str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["trials"] == 7
    assert manifest["seed"] == 5
    assert manifest["config"]["sigma2z_grid"] == [0.1, 0.2]


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("bogus = 1\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "white", "--config", str(conf)])
    assert info.value.code == 2


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve(cli.build_parser().parse_args(["sweep", "white"]), cli.SWEEP_DEFAULTS)["threads"] == 3
    assert cli.resolve(cli.build_parser().parse_args(["sweep", "white", "--threads", "2"]), cli.SWEEP_DEFAULTS)["threads"] == 2


def test_threads_do_not_change_bytes(tmp_path, capsys):
    for t in ("1", "4"):
        run(capsys, "sweep", "corr", *FAST, "--sigma2z-grid", "0.01,1", "--threads", t, "--out", str(tmp_path / t))
    for name in ("corr_rho0.9.csv", "corr_rho0.999.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "4" / name).read_bytes()


def test_replay_reproduces_bytes(tmp_path, capsys):
    run(capsys, "sweep", "quant", *FAST, "--delta-grid", "0.01,0.1", "--out", str(tmp_path / "a"))
    code, *_ = run(capsys, "replay", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b"), "--threads", "3")
    assert code == 0
    assert (tmp_path / "a" / "quant.csv").read_bytes() == (tmp_path / "b" / "quant.csv").read_bytes()


def test_invalid_flags_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "pink"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "white", "--sigma2z-grid", "a,b"])
    assert info.value.code == 2


def test_sweep_bad_dimensions(tmp_path, capsys):
    code, _, err = run(capsys, "sweep", "white", "--n", "10", "--k", "4", "--m", "24", "--out", str(tmp_path))
    assert code != 0 and "error" in err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "sweep", "white", *FAST, "--sigma2z-grid", "0.1", "--out", str(blocker / "sub"))
    assert code == 1 and "error" in err


def test_check_wishart_default_passes(capsys):
    code, out, _ = run(capsys, "check-wishart")
    assert code == 0
    assert "verdict               = PASS" in out
    assert "predicted_scale       = 0.0011261261261261261" in out


def test_check_wishart_condition(capsys):
    code, _, err = run(capsys, "check-wishart", "--m", "10", "--k", "8")
    assert code == 2 and "M > K + 3" in err


def test_check_wishart_single_trial_inconclusive(capsys):
    code, out, _ = run(capsys, "check-wishart", "--trials", "1")
    assert code == 0 and "INCONCLUSIVE" in out and "empirical_diag_mean" in out


def test_check_wishart_strict_fail(capsys):
    code, out, _ = run(capsys, "check-wishart", "--m", "20", "--k", "4", "--trials", "200", "--tolerance", "1e-9", "--strict")
    assert "FAIL" in out and code == 1


def test_rip_orthonormal_matrix(tmp_path, capsys):
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 4)))
    path = tmp_path / "q.csv"
    np.savetxt(path, q, delimiter=",")
    code, out, _ = run(capsys, "rip", "--matrix", str(path), "--k", "2")
    assert code == 0
    delta = float(out.splitlines()[0].split("=")[1])
    assert delta < 1e-12


def test_rip_generated_matches_both_formulations(capsys):
    from oracle_cs.model import Rng, gen_sensing_matrix
    from oracle_cs.theory import rip_constant_svd

    code, out, _ = run(capsys, "rip", "--k", "2", "--seed", "3", "--threads", "2")
    assert code == 0
    delta = float(out.splitlines()[0].split("=")[1])
    a = gen_sensing_matrix(8, 12, 1 / 8, Rng(3))
    assert delta == pytest.approx(rip_constant_svd(a, 2), abs=1e-10)
    assert "subsets  = 66" in out


def test_rip_k_zero_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["rip", "--k", "0"])
    assert info.value.code == 2


def test_rip_guard_refusal(capsys):
    code, _, err = run(capsys, "rip", "--m", "20", "--n", "40", "--k", "10")
    assert code == 1 and "847660528" in err
