import csv
import io
import subprocess
import sys
from datetime import date

import numpy as np
import pytest
import yaml

from loaddecomp.cli import main
from loaddecomp.features import parse_features_csv
from loaddecomp.pipeline import load_config, run_analysis, write_atomic
from loaddecomp.regress import RegressionFit
from loaddecomp.residuals import ResidualSeries

from conftest import residual_series

SCENARIO = """
site: {latitude: 59.41, longitude: 24.83, timezone: Europe/Tallinn}
start: 2020-01-01
days: 121
seed: 11
series:
  - {region: Clean, class: business, noise_sigma: 0.0}
  - {region: Noisy, class: business}
  - {region: Noisy, class: private, coefficients: [5200, 5150, 5150, 5200, 5300, 5900, 6000, 150, -60, 1.5]}
  - region: Step
    class: business
    interventions: [{start: 2020-03-12, step: 0.8}]
"""

# steady climate for the "near -20%" checks; see the residual tests
FLAT_SCENARIO = """
site: {latitude: 0.0, longitude: 24.83, utc_offset: 2}
start: 2020-01-01
days: 121
seed: 4
temperature_amplitude: 0.0
series:
  - region: A
    class: business
    interventions: [{start: 2020-03-12, step: 0.7}]
  - region: B
    class: business
    interventions: [{start: 2020-03-12, step: 0.8}]
  - region: C
    class: business
    interventions: [{start: 2020-03-12, step: 0.9}]
"""


def run(*argv):
    return main([str(a) for a in argv])


def synth(tmp_path, text, name):
    scenario = tmp_path / f"{name}.yaml"
    scenario.write_text(text)
    out = tmp_path / name
    assert run("synth", "--config", scenario, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    return synth(tmp_path_factory.mktemp("cli"), SCENARIO, "data")


@pytest.fixture(scope="module")
def flat(tmp_path_factory):
    return synth(tmp_path_factory.mktemp("cli"), FLAT_SCENARIO, "flat")


def meta(text):
    return dict(line[1:].split("=", 1) for line in text.splitlines() if line.startswith("#"))


def read_rows(path):
    return list(csv.DictReader(line for line in path.read_text().splitlines() if not line.startswith("#")))


class TestFit:
    def test_noise_free_rho_vanishes(self, data, tmp_path):
        assert run("fit", "--config", data / "run_Clean_business.yaml", "--out", tmp_path) == 0
        m = meta((tmp_path / "coefficients.csv").read_text())
        assert float(m["training_max_abs_rho"]) < 1e-8
        assert m["region"] == "Clean" and m["class"] == "business"

    def test_one_percent_noise_floor(self, data, tmp_path, capsys):
        assert run("fit", "--config", data / "run_Noisy_business.yaml", "--out", tmp_path) == 0
        assert 0.005 <= float(meta((tmp_path / "coefficients.csv").read_text())["training_mean_abs_rho"]) <= 0.02
        assert "gram condition" in capsys.readouterr().out

    def test_coefficients_round_trip(self, data, tmp_path):
        cfg_path = data / "run_Noisy_private.yaml"
        assert run("fit", "--config", cfg_path, "--out", tmp_path, "--dump-features", tmp_path / "f.csv") == 0
        result = run_analysis(load_config(cfg_path))
        dumped = RegressionFit.from_csv((tmp_path / "coefficients.csv").read_text())
        assert np.allclose(dumped.coefficients, result.fit.coefficients, rtol=1e-9, atol=0)
        assert parse_features_csv((tmp_path / "f.csv").read_text()) == result.features

    def test_missing_weather_file(self, data, tmp_path, capsys):
        code = run("fit", "--config", data / "run_Clean_business.yaml", "--weather", tmp_path / "nope.csv")
        assert code == 2
        err = capsys.readouterr().err.strip()
        assert err.startswith("loaddecomp: error: weather-file-not-found:") and "\n" not in err

    def test_flag_overrides_config(self, data, tmp_path):
        assert run("fit", "--config", data / "run_Clean_business.yaml", "--train-start", "2020-01-20",
                   "--train-days", "45", "--out", tmp_path) == 0
        m = meta((tmp_path / "coefficients.csv").read_text())
        assert (m["training_start"], m["training_end"]) == ("2020-01-20", "2020-03-04")

    def test_short_window_is_data_error(self, data, tmp_path, capsys):
        assert run("fit", "--config", data / "run_Clean_business.yaml", "--train-days", "7", "--out", tmp_path) == 2
        assert "rank-deficient" in capsys.readouterr().err

    def test_training_after_onset_rejected(self, data, tmp_path, capsys):
        code = run("fit", "--config", data / "run_Step_business.yaml", "--train-start", "2020-03-01", "--out", tmp_path)
        assert code == 2 and "config" in capsys.readouterr().err


class TestAnalyze:
    def test_residual_csv_round_trip(self, data, tmp_path):
        cfg_path = data / "run_Noisy_business.yaml"
        assert run("analyze", "--config", cfg_path, "--out", tmp_path) == 0
        back = ResidualSeries.from_csv((tmp_path / "residuals.csv").read_text())
        mem = run_analysis(load_config(cfg_path)).residuals
        for name in ("raw", "normalized", "denominators"):
            assert np.allclose(getattr(back, name), getattr(mem, name), rtol=1e-9, atol=0)

    def test_no_onset_no_marker(self, data, tmp_path):
        assert run("analyze", "--config", data / "run_Noisy_business.yaml", "--out", tmp_path) == 0
        svg = (tmp_path / "residuals.svg").read_text()
        assert svg.startswith("<svg") and 'class="onset"' not in svg

    def test_onset_marker(self, data, tmp_path):
        assert run("analyze", "--config", data / "run_Step_business.yaml", "--out", tmp_path) == 0
        assert 'class="onset"' in (tmp_path / "residuals.svg").read_text()
        assert meta((tmp_path / "residuals.csv").read_text())["onset"] == "2020-03-12"

    def _post_onset(self, path):
        rows = read_rows(path)
        return np.array([float(r["rho"]) for r in rows if r["date"] >= "2020-03-12"])

    def test_step_before_and_after_rescaling(self, flat, tmp_path):
        cfg = yaml.safe_load((flat / "run_B_business.yaml").read_text())
        cfg.pop("scale_window")
        (flat / "unscaled.yaml").write_text(yaml.safe_dump(cfg))
        assert run("analyze", "--config", flat / "unscaled.yaml", "--out", tmp_path / "raw") == 0
        assert run("analyze", "--config", flat / "run_B_business.yaml", "--out", tmp_path / "scaled") == 0
        assert np.mean(self._post_onset(tmp_path / "raw" / "residuals.csv")) == pytest.approx(-0.20, abs=0.03)
        scaled = self._post_onset(tmp_path / "scaled" / "residuals.csv")
        assert abs(np.mean(scaled)) < 0.01
        assert "rescaled" in (tmp_path / "scaled" / "residuals.svg").read_text()


class TestCompare:
    def write(self, path, series):
        path.write_text(series.to_csv())
        return path

    def test_identical_inputs(self, tmp_path):
        rho = np.random.default_rng(0).normal(0, 0.02, 100)
        a = self.write(tmp_path / "a.csv", residual_series(date(2019, 2, 1), rho))
        b = self.write(tmp_path / "b.csv", residual_series(date(2020, 2, 1), np.insert(rho, 28, rho[27])))
        assert run("compare", a, b, "--out", tmp_path / "out") == 0
        rows = read_rows(tmp_path / "out" / "compare.csv")
        assert len(rows) == 101 and all(float(r["diff"]) == 0 for r in rows)

    def test_known_offset(self, tmp_path):
        rho = np.random.default_rng(1).normal(0, 0.02, 90)
        a = self.write(tmp_path / "a.csv", residual_series(date(2019, 3, 1), rho))
        b = self.write(tmp_path / "b.csv", residual_series(date(2020, 3, 1), rho - 0.07))
        assert run("compare", a, b, "--out", tmp_path / "out") == 0
        rows = read_rows(tmp_path / "out" / "compare.csv")
        assert np.allclose([float(r["ma7"]) for r in rows], -0.07, atol=1e-12)
        assert (tmp_path / "out" / "compare.svg").read_text().count("<polyline") == 2

    def test_holiday_labels(self, tmp_path):
        from importlib import resources

        holidays = tmp_path / "holidays.yaml"
        holidays.write_text(resources.files("loaddecomp").joinpath("data/holidays.yaml").read_text())
        a = self.write(tmp_path / "a.csv", residual_series(date(2019, 3, 1), np.zeros(90)))
        b = self.write(tmp_path / "b.csv", residual_series(date(2020, 3, 1), np.zeros(90)))
        assert run("compare", a, b, "--holidays", holidays, "--out", tmp_path / "out") == 0
        labels = [r["label"] for r in read_rows(tmp_path / "out" / "compare.csv")]
        assert labels.count("aligned:Good Friday") == 4 and labels.count("aligned-swap:Good Friday") == 3

    def test_disjoint_spans(self, tmp_path, capsys):
        a = self.write(tmp_path / "a.csv", residual_series(date(2019, 1, 1), np.zeros(20)))
        b = self.write(tmp_path / "b.csv", residual_series(date(2020, 6, 1), np.zeros(20)))
        assert run("compare", a, b, "--out", tmp_path / "out") == 2
        assert "parameter" in capsys.readouterr().err

    def test_csv_round_trip(self, tmp_path):
        rho = np.random.default_rng(2).normal(0, 0.02, 60) * np.pi
        a = self.write(tmp_path / "a.csv", residual_series(date(2019, 3, 1), rho))
        b = self.write(tmp_path / "b.csv", residual_series(date(2020, 3, 1), rho[::-1]))
        assert run("compare", a, b, "--out", tmp_path / "out") == 0
        rows = read_rows(tmp_path / "out" / "compare.csv")
        assert np.allclose([float(r["diff"]) for r in rows], rho[::-1] - rho, rtol=1e-9, atol=0)


class TestSummary:
    def test_constant_bar(self, tmp_path):
        src = tmp_path / "x.csv"
        src.write_text(residual_series(date(2020, 3, 1), [-0.1] * 30, label="Harju/business").to_csv())
        assert run("summary", src, "--out", tmp_path / "out") == 0
        (row,) = read_rows(tmp_path / "out" / "summary.csv")
        assert (row["region"], row["class"]) == ("Harju", "business")
        assert float(row["mean_rho"]) == pytest.approx(-0.1, abs=1e-15)
        assert "Harju business: -0.1000" in (tmp_path / "out" / "summary.svg").read_text()

    def test_two_classes_grouped(self, tmp_path):
        paths = []
        for cls, value in (("business", -0.2), ("private", 0.1)):
            p = tmp_path / f"{cls}.csv"
            p.write_text(residual_series(date(2020, 3, 1), [value] * 10, label=f"Tartu/{cls}").to_csv())
            paths.append(p)
        assert run("summary", *paths, "--out", tmp_path / "out") == 0
        svg = (tmp_path / "out" / "summary.svg").read_text()
        assert svg.count(">Tartu</text>") == 1 and svg.count("<rect") == 2 + 2 + 2

    def test_ordering_matches_steps(self, flat, tmp_path):
        configs = []
        for region in "ABC":
            cfg = yaml.safe_load((flat / f"run_{region}_business.yaml").read_text())
            cfg.pop("scale_window")
            p = flat / f"unscaled_{region}.yaml"
            p.write_text(yaml.safe_dump(cfg))
            configs.append(p)
        assert run("summary", *configs[::-1], "--range", "2020-03-12:2020-04-30", "--out", tmp_path) == 0
        rows = {r["region"]: float(r["mean_rho"]) for r in read_rows(tmp_path / "summary.csv")}
        assert rows["A"] < rows["B"] < rows["C"] < 0

    def test_empty_set(self, tmp_path, capsys):
        assert run("summary", "--out", tmp_path) == 2
        assert "parameter" in capsys.readouterr().err


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [["bogus"], [], ["fit", "--class", "industrial"], ["compare", "only-one.csv"], ["fit", "--train-days", "x"]],
    )
    def test_usage_errors_exit_1(self, argv, capsys):
        assert main(argv) == 1
        assert "usage" in capsys.readouterr().err

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0

    def test_missing_config(self, tmp_path, capsys):
        assert main(["analyze", "--config", str(tmp_path / "none.yaml")]) == 2
        assert "config-file-not-found" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("site: {latitude: 1, longitude: 2}\nweather: w.csv\nconsumption: c.csv\ncolour: red\n")
        assert main(["fit", "--config", str(cfg)]) == 2
        assert "colour" in capsys.readouterr().err

    def test_console_script_module(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "loaddecomp.cli", "fit", "--config", str(tmp_path / "x.yaml")],
                              capture_output=True, text=True)
        assert proc.returncode == 2 and proc.stderr.startswith("loaddecomp: error: config-file-not-found")


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    write_atomic(target, "a\n")
    write_atomic(target, "b\n")
    assert target.read_text() == "b\n" and [p.name for p in target.parent.iterdir()] == ["f.txt"]
