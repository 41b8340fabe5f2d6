import csv
import io
import math
import warnings

import numpy as np
import pytest

from gfnoma import analysis, cli
from gfnoma.aud import amp_threshold, k_max
from gfnoma.harness.anchors import parse_anchors
from gfnoma.harness.calibrate import CalibrationWarning, calibrate_constants
from gfnoma.harness.configfile import (CONFIG_KEYS, config_from_pairs, format_config, parse_pairs,
                                       read_config, write_config)
from gfnoma.harness.montecarlo import Stat, mean_ci, ratio_ci, run_point
from gfnoma.harness.sweep import CSV_HEADER, ExperimentSpec, parse_grid, read_spec, run_sweep, sweep
from gfnoma.network import ConfigError, NetworkConfig, dbm_to_watts
from gfnoma.specfun import QuadratureError


class TestConfigFiles:
    def test_round_trip(self, tmp_path, calibrated):
        cfg = calibrated.with_(tx_power=dbm_to_watts(17.5), alpha=3.7)
        path = tmp_path / "c.cfg"
        write_config(cfg, path, extra={"density_per_km2": "341"})
        back, extra = read_config(path)
        assert extra == {"density_per_km2": "341"}
        for f in ("n_devices", "preamble_len", "alpha", "c2", "c3", "d1"):
            assert getattr(back, f) == pytest.approx(getattr(cfg, f), rel=1e-11)
        assert back.tx_power == pytest.approx(cfg.tx_power, rel=1e-11)

    def test_units_in_keys(self):
        cfg = config_from_pairs(parse_pairs("noise_dbm=-120\ntx_power_dbm=10\np_static_mw=5"))
        assert cfg.noise_power == pytest.approx(1e-15)
        assert cfg.tx_power == pytest.approx(0.01)
        assert cfg.p_static == pytest.approx(5e-3)
        assert {"d1_m", "noise_dbm", "tx_power_dbm"} <= CONFIG_KEYS

    def test_comments_and_errors(self):
        assert parse_pairs("# hi\n alpha = 3.5 # comment\n") == {"alpha": "3.5"}
        with pytest.raises(ConfigError):
            parse_pairs("alpha 3.5")
        with pytest.raises(ConfigError):
            config_from_pairs({"alpha": "abc"})
        with pytest.raises(ConfigError):
            config_from_pairs({"alpha": "1.5"})

    def test_format_lists_every_key(self, table1):
        keys = [line.split("=")[0] for line in format_config(table1).splitlines()]
        assert set(keys) == CONFIG_KEYS


class TestCalibration:
    def test_single_anchor_exact(self, table1):
        anchors = [(table1.with_(n_devices=355), 0.9)]
        cal = calibrate_constants(anchors, c2=4.99)
        assert cal.residuals[0] == pytest.approx(0.0, abs=1e-9)
        assert cal.ok

    def test_validity_of_fit(self, table1):
        cal = calibrate_constants([(table1.with_(n_devices=355), 0.9)], c2=4.99)
        cfg = cal.apply(table1)
        assert k_max(cfg) > 0 and amp_threshold(cfg) > 0

    def test_unreachable_anchors_warn(self, table1):
        anchors = [(table1, 0.99), (table1.with_(n_devices=241), 0.2)]
        with pytest.warns(CalibrationWarning):
            cal = calibrate_constants(anchors, c2=4.99)
        assert not cal.ok and cal.worst > 0.02

    def test_anchor_file(self):
        base, anchors = parse_anchors("tx_power_dbm=20\nanchor: n_devices=355 p_per=0.9\n"
                                      "anchor: tx_power_dbm=14.5 p_per=0.9\n")
        assert base.tx_power == pytest.approx(0.1)
        assert anchors[0][0].n_devices == 355 and anchors[0][1] == 0.9
        assert anchors[1][0].tx_power == pytest.approx(dbm_to_watts(14.5))
        with pytest.raises(ConfigError):
            parse_anchors("alpha=4\n")
        with pytest.raises(ConfigError):
            parse_anchors("anchor: n_devices=300\n")


class TestStatistics:
    def test_mean_ci(self):
        s = mean_ci([1.0, 2.0, 3.0, 4.0])
        assert s.mean == 2.5 and s.n == 4
        assert s.ci_hi - s.mean == pytest.approx(1.959963984540054 * math.sqrt(5 / 3 / 4))
        assert math.isnan(mean_ci([]).mean)

    def test_ratio_ci(self):
        s = ratio_ci([1, 2, 3], [2, 4, 6])
        assert s.mean == pytest.approx(0.5) and s.ci_hi == pytest.approx(0.5)

    def test_order_independent(self):
        x = np.random.default_rng(0).standard_normal(1001) * 1e8 + 1
        assert mean_ci(x).mean == mean_ci(x[::-1]).mean


class TestRunPoint:
    def test_empty_frame(self, calibrated):
        row = run_point(calibrated.with_(p_act=0.0), ["ta_omp"], 1, 0, outputs=("p_per", "rate"))
        assert row.empirical[("ta_omp", "p_per")].mean == 1.0
        assert row.empirical[("ta_omp", "rate")].mean == 0.0

    def test_reference_cell_reliability(self, calibrated):
        row = run_point(calibrated, ["ta_omp"], 1000, 11)
        assert row.empirical[("ta_omp", "p_per")].mean >= 0.9

    def test_deterministic(self, calibrated):
        a = run_point(calibrated, ["ta_omp", "zc_op_baseline"], 40, 3, outputs=("p_per", "nmse", "rate"))
        b = run_point(calibrated, ["ta_omp", "zc_op_baseline"], 40, 3, outputs=("p_per", "nmse", "rate"))
        assert a.empirical == b.empirical

    def test_parallel_matches_serial(self, calibrated):
        kw = dict(outputs=("p_per", "nmse", "rate"), point_index=2)
        a = run_point(calibrated, ["ta_omp", "oracle"], 30, 5, **kw)
        b = run_point(calibrated, ["ta_omp", "oracle"], 30, 5, workers=3, **kw)
        assert a.empirical == b.empirical

    def test_interval_shrinks_with_trials(self, calibrated):
        cfg = calibrated.with_(n_devices=400)
        small = run_point(cfg, ["oracle"], 400, 1, outputs=("rate",), with_analytic=False)
        big = run_point(cfg, ["oracle"], 800, 1, outputs=("rate",), with_analytic=False)
        w1 = small.empirical[("oracle", "rate")]
        w2 = big.empirical[("oracle", "rate")]
        ratio = (w1.ci_hi - w1.ci_lo) / (w2.ci_hi - w2.ci_lo)
        assert ratio == pytest.approx(math.sqrt(2), rel=0.15)

    def test_every_detector_and_output(self, calibrated):
        dets = ["ta_omp", "ta_sp", "lasso", "zc_op_baseline", "oracle"]
        outs = ("p_per", "nmse", "rate", "ee", "apce", "ser")
        row = run_point(calibrated, dets, 6, 0, outputs=outs, with_analytic=False)
        for d in dets:
            assert 0 <= row.empirical[(d, "p_per")].mean <= 1
            assert row.failures[d] == 0
        assert row.empirical[("oracle", "ser")].mean < 0.05

    def test_unknown_detector(self, calibrated):
        with pytest.raises(ValueError):
            run_point(calibrated, ["sbl"], 1, 0)


class TestSweep:
    def test_grid_parsing(self):
        assert parse_grid("240:300:20") == (240.0, 260.0, 280.0, 300.0)
        assert parse_grid("1, 2,5") == (1.0, 2.0, 5.0)
        with pytest.raises(ConfigError):
            parse_grid("1:2:0")

    def test_spec_validation(self, table1):
        with pytest.raises(ConfigError):
            ExperimentSpec(table1, "rho", (1,))
        with pytest.raises(ConfigError):
            ExperimentSpec(table1, "N", (300, 240))
        with pytest.raises(ConfigError):
            ExperimentSpec(table1, "N", ())
        with pytest.raises(ConfigError):
            ExperimentSpec(table1, "N", (240,), trials=0)

    def test_analytic_only_csv(self, tmp_path, calibrated):
        spec = ExperimentSpec(calibrated, "P", (10, 20), detectors=(), outputs=("p_per", "ee"))
        path = tmp_path / "a.csv"
        sweep(spec, path)
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
        assert tuple(rows[0]) == CSV_HEADER
        assert {r[3] for r in rows[1:]} == {"analytic"}
        assert len(rows) == 1 + 2 * 2

    def test_analytic_columns_match_direct_calls(self, calibrated):
        spec = ExperimentSpec(calibrated, "N", (240, 300), detectors=(), outputs=("p_per", "nmse"))
        rep = run_sweep(spec)
        for row in rep.rows:
            cfg = calibrated.with_(n_devices=int(row.value))
            assert row.analytic["p_per"] == analysis.p_per(cfg)
            assert row.analytic["nmse"] == analysis.avg_nmse(cfg)

    def test_spec_file(self, tmp_path):
        p = tmp_path / "s.spec"
        p.write_text("sweep_var=sigma2\ngrid=-120,-110\ntrials=3\ndetectors=ta_omp\n"
                     "c2=4.99\nc3=20\nout=o.csv\n")
        spec = read_spec(p)
        assert spec.config_at(-120).noise_power == pytest.approx(1e-15)
        assert spec.out == str(tmp_path / "o.csv")
        rep = sweep(spec)
        assert (tmp_path / "o.csv").exists() and len(rep.rows) == 2
        p.write_text("grid=1\n")
        with pytest.raises(ConfigError):
            read_spec(p)

    def test_sweep_write_error_surfaces(self, calibrated, tmp_path):
        spec = ExperimentSpec(calibrated, "N", (240,), detectors=())
        with pytest.raises(OSError):
            sweep(spec, tmp_path / "missing" / "x.csv")


class TestCommandLine:
    @pytest.fixture
    def cfg_path(self, tmp_path, calibrated):
        p = tmp_path / "cell.cfg"
        write_config(calibrated, p)
        return p

    def run(self, *argv):
        out = io.StringIO()
        code = cli.main([str(a) for a in argv], out)
        return code, out.getvalue()

    def test_analyze(self, cfg_path):
        code, text = self.run("analyze", cfg_path, "--density-per-km2", 341)
        assert code == 0
        vals = dict(line.split("=", 1) for line in text.splitlines())
        assert float(vals["p_per"]) == pytest.approx(0.96998, rel=1e-4)
        assert "apce" in vals and "mse_j[1]" in vals

    def test_simulate(self, cfg_path, tmp_path):
        out = tmp_path / "sim.csv"
        code, _ = self.run("simulate", cfg_path, "--trials", 5, "--seed", 1, "--detector", "ta_omp",
                           "--detector", "zc_op_baseline", "--out", out)
        assert code == 0
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == CSV_HEADER
        assert {"ta_omp", "zc_op_baseline", "analytic"} <= {r[3] for r in rows[1:]}

    def test_sweep_to_stdout(self, tmp_path):
        p = tmp_path / "s.spec"
        p.write_text("sweep_var=N\ngrid=240,260\ntrials=2\ndetectors=\noutputs=p_per\n")
        code, text = self.run("sweep", p)
        assert code == 0 and text.startswith(",".join(CSV_HEADER))

    def test_optimize(self, cfg_path):
        code, text = self.run("optimize", "ee", cfg_path)
        vals = dict(line.split("=", 1) for line in text.splitlines())
        assert code == 0 and 12 < float(vals["arg_opt_dBm"]) < 14
        code, text = self.run("optimize", "apce", cfg_path, "--density-per-km2", 341)
        assert code == 0 and "constrained_arg_m" in text

    def test_calibrate(self, tmp_path, capsys):
        p = tmp_path / "a.cfg"
        p.write_text("anchor: n_devices=355 p_per=0.9\n")
        code, text = self.run("calibrate", p, "--fix-c2", 4.99)
        assert code == 0 and "c2=4.99" in text
        assert "fitted=0.9000" in capsys.readouterr().err

    def test_exit_codes(self, tmp_path, cfg_path, monkeypatch):
        bad = tmp_path / "bad.cfg"
        bad.write_text("alpha=1.5\n")
        assert self.run("analyze", bad)[0] == 1
        assert self.run("analyze", tmp_path / "nope.cfg")[0] == 3
        assert self.run("optimize", "apce", cfg_path)[0] == 1

        def boom(*a, **k):
            raise QuadratureError("no convergence")
        monkeypatch.setattr(cli.analysis, "analyze", boom)
        assert self.run("analyze", cfg_path)[0] == 2

    def test_module_entry_point(self, cfg_path):
        import subprocess, sys
        res = subprocess.run([sys.executable, "-m", "gfnoma", "analyze", str(cfg_path)],
                             capture_output=True, text=True, timeout=120)
        assert res.returncode == 0 and "p_per=" in res.stdout
