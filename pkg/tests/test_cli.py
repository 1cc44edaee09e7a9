import datetime as dt
import json
import math

import numpy as np
import pytest

from robvol.cli import main
from robvol.config import RunConfig, parse_predictor, validate
from robvol.errors import ConfigError, DataError
from robvol.io_csv import load_returns_csv, read_table
from robvol.pipeline import PredictorConfig, ProxyConfig, build_predictor, build_proxy


def write_returns(path, values, start=dt.date(2019, 1, 1)):
    lines = ["date,return"]
    for i, v in enumerate(values):
        lines.append(f"{(start + dt.timedelta(days=i)).isoformat()},{v!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def returns_file(tmp_path):
    x = np.random.default_rng(0).standard_t(3, 400) * 0.03
    return write_returns(tmp_path / "r.csv", x.tolist()), x


def run_cli(*args):
    return main([str(a) for a in args])


class TestLoadReturns:
    def test_two_rows(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("date,return\n2020-01-01,0.01\n2020-01-02,-0.02", encoding="utf-8")
        s = load_returns_csv(p)
        assert len(s) == 2 and s.dates == ("2020-01-01", "2020-01-02")
        assert s.values.tolist() == [0.01, -0.02]

    @pytest.mark.parametrize("body,line,word", [
        ("2020-01-02,0.01\n2020-01-01,0.02\n", 3, "out-of-order"),
        ("2020-01-01,0.01\n2020-01-01,0.02\n", 3, "duplicate"),
        ("2020-01-01,0.01\n2020-13-01,0.02\n", 3, "date"),
        ("2020-01-01,abc\n", 2, "return value"),
        ("2020-01-01,nan\n", 2, "non-finite"),
        ("2020-01-01,inf\n", 2, "non-finite"),
        ("2020-01-01,0.1,3\n", 2, "fields"),
    ])
    def test_errors_name_line(self, tmp_path, body, line, word):
        p = tmp_path / "bad.csv"
        p.write_text("date,return\n" + body, encoding="utf-8")
        with pytest.raises(DataError, match=rf":{line}: .*{word}"):
            load_returns_csv(p)

    def test_header_and_empty(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("day,ret\n2020-01-01,0.1\n", encoding="utf-8")
        with pytest.raises(DataError, match="header"):
            load_returns_csv(p)
        p.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty"):
            load_returns_csv(p)
        p.write_text("date,return\n", encoding="utf-8")
        with pytest.raises(DataError, match="no data"):
            load_returns_csv(p)

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_returns_csv(tmp_path / "nope.csv")


class TestConfig:
    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match=r"\$\.predictors\[0\]"):
            validate({"version": 1, "predictors": [{"method": "ewma", "half_life": 7, "colour": 1}]})
        with pytest.raises(ConfigError, match="bogus"):
            validate({"version": 1, "bogus": True})

    def test_version_required(self):
        with pytest.raises(ConfigError):
            validate({"losses": ["mse"]})
        with pytest.raises(ConfigError):
            validate({"version": 2})

    def test_nonpositive_half_life(self):
        with pytest.raises(ConfigError, match="half_life"):
            RunConfig.from_doc({"version": 1, "predictors": [{"method": "huber", "half_life": 0}]})

    def test_predictor_spec(self):
        assert parse_predictor("huber:hl=14,z=2") == {"method": "huber", "half_life": 14.0, "z": 2.0}
        assert parse_predictor("ewma:hl=7,m=10")["m"] == 10
        with pytest.raises(ConfigError):
            parse_predictor("huber:zz=3")
        with pytest.raises(ConfigError):
            parse_predictor("huber:hl=abc")

    def test_defaults(self):
        cfg = RunConfig.from_doc({"version": 1})
        assert [p.label for p in cfg.predictors] == ["EWMA_HL7", "EWMA_HL14", "Huber_HL7", "Huber_HL14"]
        assert cfg.fixed_T is None and cfg.losses == ["mse", "ql"]


class TestCommands:
    def test_priming_arithmetic(self, tmp_path):
        x = np.random.default_rng(1).normal(0, 0.03, 732)
        f = write_returns(tmp_path / "btc.csv", x.tolist())
        rc = run_cli("evaluate", "--input", f, "--out-dir", tmp_path / "o",
                     "--predictor", "ewma:hl=14", "--predictor", "huber:hl=14", "--proxy", "huber:hl=7")
        assert rc == 0
        man = json.loads((tmp_path / "o" / "manifest_evaluate.json").read_text())
        assert man["priming"] == {"backward": 28, "forward": 14}
        assert man["T_effective"] == 732 - 28 - 14

    def test_perfect_predictor(self, tmp_path):
        f = write_returns(tmp_path / "c.csv", [0.01] * 80)
        assert run_cli("evaluate", "--input", f, "--out-dir", tmp_path / "o", "--predictor", "ewma:hl=7",
                       "--proxy", "ewma") == 0
        header, rows = read_table(tmp_path / "o" / "evaluate.csv")
        rec = dict(zip(header, rows[0]))
        for loss in ("mse", "ql"):
            assert float(rec[f"{loss}.EWMA.raw"]) == pytest.approx(0.0, abs=1e-20)
            assert float(rec[f"{loss}.EWMA.beta"]) == pytest.approx(1.0, rel=1e-12)

    def test_scaled_le_raw_in_every_cell(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "version": 1,
            "simulation": {"T": 400, "model": {"kind": "constant", "level": 4e-4, "innovation": "student_t", "df": 4}},
            "proxies": [{"method": "ewma"}, {"method": "huber"}, {"method": "clipewma"}, {"method": "clip1"}],
        }))
        assert run_cli("evaluate", "--config", cfg, "--out-dir", tmp_path / "o", "--seed", 3) == 0
        header, rows = read_table(tmp_path / "o" / "evaluate.csv")
        assert len(rows) == 4
        for row in rows:
            rec = dict(zip(header, row))
            for k in header:
                if k.endswith(".raw"):
                    base = k[:-4]
                    assert rec[base + ".beta"] != ""
                    assert float(rec[base + ".scaled"]) <= float(rec[k]) + 1e-12

    def test_determinism(self, tmp_path, returns_file):
        f, _ = returns_file
        for d in ("a", "b"):
            for cmd in ("forecast", "evaluate", "compare"):
                assert run_cli(cmd, "--input", f, "--out-dir", tmp_path / d, "--window", 60) == 0
        for name in ("forecast.csv", "evaluate.csv", "evaluate.json", "compare.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        for cmd in ("forecast", "evaluate", "compare"):
            ma = json.loads((tmp_path / "a" / f"manifest_{cmd}.json").read_text())
            mb = json.loads((tmp_path / "b" / f"manifest_{cmd}.json").read_text())
            ma.pop("timing"), mb.pop("timing")
            # output directory differs by construction
            ma["config"].pop("out_dir"), mb["config"].pop("out_dir")
            assert ma == mb

    def test_simulated_determinism(self, tmp_path):
        for d in ("a", "b"):
            assert run_cli("forecast", "--out-dir", tmp_path / d, "--seed", 11) == 0
        assert (tmp_path / "a" / "forecast.csv").read_bytes() == (tmp_path / "b" / "forecast.csv").read_bytes()

    def test_forecast_round_trip(self, tmp_path, returns_file):
        f, x = returns_file
        assert run_cli("forecast", "--input", f, "--out-dir", tmp_path / "o", "--predictor", "huber:hl=14",
                       "--proxy", "huber:hl=7", "--T-policy", "fixed:180") == 0
        header, rows = read_table(tmp_path / "o" / "forecast.csv")
        assert header[:2] == ["date", "return"]
        pred = build_predictor(x, PredictorConfig("huber", 14))
        prox = build_proxy(x, ProxyConfig("huber", 7), T_default=180)
        col_p, col_x = header.index("pred.Huber_HL14"), header.index("proxy.Huber_180")
        for t, row in enumerate(rows):
            assert float(row[1]) == x[t]
            if pred.valid[t]:
                assert float(row[col_p]) == pred.values[t]
            else:
                assert row[col_p] == "" and row[col_p + 1] == "0"
            if prox.valid[t]:
                assert float(row[col_x]) == prox.values[t]

    def test_compare_full_window(self, tmp_path, returns_file):
        f, _ = returns_file
        common = ["--input", f, "--predictor", "ewma:hl=14", "--predictor", "huber:hl=14", "--proxy", "ewma",
                  "--loss", "mse"]
        assert run_cli("evaluate", *common, "--out-dir", tmp_path / "e") == 0
        man = json.loads((tmp_path / "e" / "manifest_evaluate.json").read_text())
        T = man["T_effective"]
        assert run_cli("compare", *common, "--out-dir", tmp_path / "c", "--window", T) == 0
        header, rows = read_table(tmp_path / "c" / "compare.csv")
        assert len(rows) == 1
        _, erows = read_table(tmp_path / "e" / "evaluate.csv")
        raw = {r[0]: float(r[1]) for r in erows}
        diff = float(rows[0][header.index("mse.EWMA.diff.Huber_HL14-EWMA_HL14")])
        assert diff == pytest.approx(raw["Huber_HL14"] - raw["EWMA_HL14"], rel=1e-9)
        assert float(rows[0][header.index("mse.EWMA.beta.EWMA_HL14")]) > 0

    def test_compare_rows(self, tmp_path, returns_file):
        f, _ = returns_file
        assert run_cli("compare", "--input", f, "--out-dir", tmp_path / "c", "--window", 100) == 0
        man = json.loads((tmp_path / "c" / "manifest_compare.json").read_text())
        header, rows = read_table(tmp_path / "c" / "compare.csv")
        assert len(rows) == man["T_effective"] - 100 + 1
        # 2 losses x 2 proxies x (3 differences + 4 scales)
        assert len(header) == 1 + 2 * 2 * (3 + 4)

    def test_simulate(self, tmp_path):
        assert run_cli("simulate", "--out-dir", tmp_path / "s", "--reps", 20, "--n", 30, "--dist", "t",
                       "--seed", 5) == 0
        header, rows = read_table(tmp_path / "s" / "mc_t.csv")
        assert header[5] == "method" and rows[0][5] == "sample"
        man = json.loads((tmp_path / "s" / "manifest_simulate.json").read_text())
        assert man["seed"] == 5 and man["study"]["reps"] == 20
        assert "runtime_s_t" in man["timing"]
        assert man["outputs"]["mc_t.csv"]


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"version": 1, "proxies": [{"method": "ewma", "T": 0}]}))
        assert run_cli("evaluate", "--config", cfg, "--out-dir", tmp_path / "o") == 2
        assert "$.proxies[0].T" in capsys.readouterr().err

    def test_bad_json(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{version: 1")
        assert run_cli("evaluate", "--config", cfg, "--out-dir", tmp_path / "o") == 2

    def test_window_too_large(self, tmp_path, returns_file):
        f, _ = returns_file
        assert run_cli("compare", "--input", f, "--out-dir", tmp_path / "o", "--window", 10 ** 6) == 2

    def test_bad_T_policy(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("evaluate", "--T-policy", "half", "--out-dir", tmp_path)
        assert exc.value.code == 2

    def test_data_error(self, tmp_path, capsys):
        p = tmp_path / "r.csv"
        p.write_text("date,return\n2020-01-02,0.1\n2020-01-01,0.2\n")
        assert run_cli("forecast", "--input", p, "--out-dir", tmp_path / "o") == 3
        assert ":3:" in capsys.readouterr().err

    def test_too_short(self, tmp_path):
        f = write_returns(tmp_path / "s.csv", [0.01] * 30)
        assert run_cli("evaluate", "--input", f, "--out-dir", tmp_path / "o") == 3

    def test_numeric_error(self, tmp_path, capsys):
        # all-zero returns give zero predictors, which QL cannot score
        f = write_returns(tmp_path / "z.csv", [0.0] * 100)
        assert run_cli("evaluate", "--input", f, "--out-dir", tmp_path / "o", "--loss", "ql") == 4
        assert "numeric" in capsys.readouterr().err

    def test_ql_floor_recorded(self, tmp_path, returns_file):
        f, _ = returns_file
        assert run_cli("evaluate", "--input", f, "--out-dir", tmp_path / "o", "--ql-floor", 1e-3) == 0
        man = json.loads((tmp_path / "o" / "manifest_evaluate.json").read_text())
        fl = man["ql_floor"]["ql"]["EWMA"]
        assert fl["floor"] == 1e-3 and fl["points_floored"] > 0
        assert math.isfinite(man["timing"]["elapsed_s"])
