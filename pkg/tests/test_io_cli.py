"""CSV ingestion, report emission, SVG rendering, config round trips and
the command-line interface."""

import json
import xml.etree.ElementTree as ET
from datetime import date

import numpy as np
import pytest

from carima.causal import AnalysisConfig, run_carima
from carima.cli import main
from carima.dataio import holiday_dummy, ingest_csv, parse_csv_text, weekday_dummies
from carima.errors import NonMonotoneDates, ParseError, UnknownColumn
from carima.report import (
    analysis_report_dict,
    emit_report,
    parse_report,
    serialize_report,
)
from carima.simlab import DgpConfig, InterventionSpec, apply_intervention, simulate_control
from carima.svgplot import render_effect_plot


class TestIngest:
    def test_three_rows(self):
        ds = parse_csv_text("date,y\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n")
        assert len(ds) == 3
        np.testing.assert_array_equal(ds.series("y").values, [1, 2, 3])

    def test_blank_cell_is_missing(self):
        ds = parse_csv_text("date,y\n2020-01-01,1\n2020-01-02,\n2020-01-03,3\n")
        assert ds.series("y").is_missing(1)

    def test_duplicate_date_rejected(self):
        with pytest.raises(NonMonotoneDates):
            parse_csv_text("date,y\n2020-01-01,1\n2020-01-01,2\n")

    def test_decreasing_date_rejected(self):
        with pytest.raises(NonMonotoneDates):
            parse_csv_text("date,y\n2020-01-02,1\n2020-01-01,2\n")

    def test_calendar_gap_filled_with_missing(self):
        ds = parse_csv_text("date,y\n2020-01-01,1\n2020-01-04,4\n")
        assert len(ds) == 4
        assert ds.series("y").is_missing(1) and ds.series("y").is_missing(2)
        assert ds.dates[1] == date(2020, 1, 2)

    def test_unknown_column(self):
        with pytest.raises(UnknownColumn):
            parse_csv_text("date,y\n2020-01-01,1\n", columns=["z"])

    def test_bad_cell_addressed(self):
        with pytest.raises(ParseError, match="row 3, column 'y'"):
            parse_csv_text("date,y\n2020-01-01,1\n2020-01-02,abc\n")

    def test_roundtrip_identity(self, tmp_path):
        text = (
            "date,y,x\n2020-01-01,1.5,0.25\n2020-01-02,,1.0\n2020-01-04,2.75,\n"
        )
        ds = parse_csv_text(text)
        path = tmp_path / "out.csv"
        ds.write_csv(path)
        ds2 = ingest_csv(path)
        assert ds.dates == ds2.dates
        for name in ("y", "x"):
            np.testing.assert_array_equal(ds.series(name).missing, ds2.series(name).missing)
            a, b = ds.series(name).values, ds2.series(name).values
            np.testing.assert_array_equal(a[~np.isnan(a)], b[~np.isnan(b)])
        assert ds2.to_csv_text() == ds.to_csv_text()

    def test_weekday_and_holiday_dummies(self):
        dates = [date(2021, 3, d) for d in range(1, 15)]  # Mon 2021-03-01 ...
        dums = weekday_dummies(dates)
        assert dums["dow_mon"].values[0] == 1.0
        assert dums["dow_mon"].values[1] == 0.0
        assert set(dums) == {"dow_mon", "dow_tue", "dow_wed", "dow_thu", "dow_sat", "dow_sun"}
        hol = holiday_dummy(dates, [date(2021, 3, 5)])
        np.testing.assert_array_equal(np.nonzero(hol.values)[0], [3, 5])


@pytest.fixture(scope="module")
def small_report():
    cfg = DgpConfig(n_days=240, t_star=200, burn_in=300)
    sim = simulate_control(cfg, 21)
    y_tr, _ = apply_intervention(sim["y"], InterventionSpec("level_shift", 25), 200)
    data = {
        "y": __import__("carima").TimeSeries(y_tr),
        "x1": __import__("carima").TimeSeries(sim["X"][:, 0]),
        "x2": __import__("carima").TimeSeries(sim["X"][:, 1]),
    }
    config = AnalysisConfig(
        series="y", intervention=200, horizons=(10, 40), seed=5,
        regressors=("x1", "x2"), order=(1, 1, 1, 1), diff=(0, 0, 7), test="both",
        n_boot=400,
    )
    return run_carima(config, data), config


class TestReport:
    def test_machine_report_round_trips(self, small_report):
        report, config = small_report
        d = analysis_report_dict(report, config)
        text = serialize_report(d)
        assert parse_report(text) == d

    def test_emit_deterministic(self, small_report, tmp_path):
        report, config = small_report
        m1 = emit_report(report, tmp_path / "a", config=config)
        m2 = emit_report(report, tmp_path / "b", config=config)
        assert [f["sha256"] for f in m1["files"]] == [f["sha256"] for f in m2["files"]]

    def test_manifest_lists_every_file(self, small_report, tmp_path):
        report, config = small_report
        man = emit_report(report, tmp_path / "c", config=config)
        names = {f["name"] for f in man["files"]}
        assert {"report.json", "summary.txt", "effects.csv",
                "effect_h10.svg", "effect_h40.svg"} <= names
        for f in man["files"]:
            assert (tmp_path / "c" / f["name"]).exists()

    def test_three_horizons_three_plots(self, tmp_path, small_report):
        report, config = small_report
        man = emit_report(report, tmp_path / "d", formats=("svg",), config=config)
        svgs = [f for f in man["files"] if f["name"].endswith(".svg")]
        assert len(svgs) == len(report.horizons)

    def test_config_round_trip(self):
        cfg = AnalysisConfig(
            series="s", intervention="2020-05-01", horizons=(30, 90), seed=9,
            regressors=("a", "b"), order="auto", diff=(1, 0, 7),
            log_transform=True, test="bootstrap", alpha=0.1, n_boot=999,
        )
        assert AnalysisConfig.from_dict(cfg.to_dict()) == cfg
        assert AnalysisConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


class TestSvg:
    def test_valid_xml_with_band_and_lines(self, small_report):
        report, _ = small_report
        doc = render_effect_plot(report, 40)
        root = ET.fromstring(doc)
        tags = [el.tag.split("}")[-1] for el in root.iter()]
        assert tags.count("polyline") >= 3
        assert "polygon" in tags
        assert "image" not in tags  # pure vector

    def test_single_point_horizon_degenerate_but_valid(self, small_report):
        report, _ = small_report
        cfg = None
        doc = render_effect_plot(report, 10)
        ET.fromstring(doc)

    def test_band_excludes_zero_where_test_rejects(self, small_report):
        report, _ = small_report
        path = report.paths["original"]
        k = 40
        zq = 1.959963984540054
        lo = path.tau_hat[:k] - zq * np.sqrt(path.var_tau[:k])
        hi = path.tau_hat[:k] + zq * np.sqrt(path.var_tau[:k])
        for t in report.tests_for("point", "original"):
            if t.method != "gaussian" or t.k > k:
                continue
            excluded = lo[t.k - 1] > 0 or hi[t.k - 1] < 0
            assert excluded == (t.p_value < report.alpha)


def _write_demo_csv(tmp_path, n=240, t_star=200):
    cfg = DgpConfig(n_days=n, t_star=t_star, burn_in=300)
    sim = simulate_control(cfg, 33)
    y_tr, _ = apply_intervention(sim["y"], InterventionSpec("level_shift", 25), t_star)
    lines = ["date,sales,x1,x2"]
    d0 = date(2022, 1, 1)
    from datetime import timedelta

    for i in range(n):
        d = (d0 + timedelta(days=i)).isoformat()
        lines.append(f"{d},{float(y_tr[i])!r},{float(sim['X'][i, 0])!r},{float(sim['X'][i, 1])!r}")
    p = tmp_path / "demo.csv"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p, (d0 + timedelta(days=t_star - 1)).isoformat()


class TestCli:
    def test_analyze_and_determinism(self, tmp_path, capsys):
        csv_path, ivdate = _write_demo_csv(tmp_path)
        args = [
            "analyze", "--data", str(csv_path), "--target", "sales",
            "--regressors", "x1,x2", "--intervention-date", ivdate,
            "--horizons", "10,30", "--order", "1,1,1,1", "--diff", "0,0,7",
            "--seed", "4",
        ]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2")]) == 0
        b1 = (tmp_path / "r1" / "report.json").read_bytes()
        b2 = (tmp_path / "r2" / "report.json").read_bytes()
        assert b1 == b2

    def test_usage_error_exit_1(self, capsys):
        assert main(["analyze", "--data", "x.csv"]) == 1

    def test_parse_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("date,y\n2020-01-02,1\n2020-01-01,2\n", encoding="utf-8")
        rc = main([
            "analyze", "--data", str(bad), "--target", "y",
            "--intervention-date", "1", "--horizons", "1", "--seed", "1",
            "--out", str(tmp_path / "o"),
        ])
        assert rc == 2

    def test_model_error_exit_3(self, tmp_path, capsys):
        # pre period far too short for the requested order
        csv_path, ivdate = _write_demo_csv(tmp_path, n=40, t_star=12)
        rc = main([
            "analyze", "--data", str(csv_path), "--target", "sales",
            "--intervention-date", ivdate, "--horizons", "5",
            "--order", "3,3,0,0", "--seed", "1", "--out", str(tmp_path / "o"),
        ])
        assert rc == 3

    def test_io_error_exit_4(self, tmp_path, capsys):
        csv_path, ivdate = _write_demo_csv(tmp_path)
        blocker = tmp_path / "blocked"
        blocker.write_text("not a directory", encoding="utf-8")
        rc = main([
            "analyze", "--data", str(csv_path), "--target", "sales",
            "--regressors", "x1,x2", "--intervention-date", ivdate,
            "--horizons", "10", "--order", "0,0,0,0", "--seed", "1",
            "--out", str(blocker / "sub"),
        ])
        assert rc == 4

    def test_selftest_passes(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_simulate_subcommand(self, tmp_path, capsys):
        cfgfile = tmp_path / "study.json"
        cfgfile.write_text(json.dumps({
            "n_reps": 2, "seed": 3,
            "models": ["carima_true"],
            "horizons": [5, 10],
            "dgp": {"n_days": 240, "t_star": 220, "burn_in": 300},
            "interventions": [{"kind": "level_shift", "magnitude": 25}],
        }), encoding="utf-8")
        rc = main(["simulate", "--config", str(cfgfile), "--out", str(tmp_path / "study")])
        assert rc == 0
        assert (tmp_path / "study" / "tables.csv").exists()
        assert (tmp_path / "study" / "study.json").exists()
