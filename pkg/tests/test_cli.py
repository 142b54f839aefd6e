import csv
import io
import json

import pytest

from risdist import cli
from risdist.metrics import metric_value, build_model, Method, Scheme


def _read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return meta, rows


def _f(cell):
    return None if cell == "" else float(cell)


def test_usage_errors(capsys):
    assert cli.main(["fit", "--n", "0"]) == cli.EXIT_USAGE
    assert cli.main(["curves", "--snr-db", "10:0:2"]) == cli.EXIT_USAGE
    assert cli.main(["curves", "--snr-db", "0:10:0"]) == cli.EXIT_USAGE
    assert cli.main(["curves", "--mod", "qam"]) == cli.EXIT_USAGE
    assert cli.main(["bogus"]) == cli.EXIT_USAGE
    assert cli.main(["fit", "--scheme", "t"]) == cli.EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_invalid_simulation_config_is_exit_2(tmp_path):
    args = ["simulate", "--n", "2", "--snr-db", "0:4:2", "--out", str(tmp_path)]
    assert cli.main(args + ["--samples", "100"]) == cli.EXIT_NUMERIC
    assert cli.main(args + ["--samples", "10001"]) == cli.EXIT_NUMERIC
    assert not any(tmp_path.iterdir())


def test_fit(tmp_path, capsys):
    assert cli.main(["fit", "--n", "1,2", "--out", str(tmp_path)]) == cli.EXIT_OK
    meta, rows = _read_csv(tmp_path / "fit_dh.csv")
    one, two = rows
    for key in ("k_w", "m_w", "omega_w"):
        assert float(one[key]) == pytest.approx(1.0, abs=1e-9)
    assert one["exact_boundary"] == "true"
    assert two["fallback_used"] == "true"
    assert capsys.readouterr().out.startswith("#")


def test_curves_values_and_schema(tmp_path):
    args = ["curves", "--scheme", "t", "--n", "1,2", "--snr-db", "10:30:10",
            "--method", "both", "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted(f"{m}_t_N{n}.csv" for m in cli.METRICS for n in (1, 2))
    meta, rows = _read_csv(tmp_path / "outage_t_N1.csv")
    assert list(rows[0]) == list(cli.CURVE_COLUMNS)
    at_th = next(r for r in rows if float(r["snr_db"]) == 20.0)
    assert float(at_th["closed_form"]) == pytest.approx(0.6321206, abs=1e-7)
    assert at_th["upper_bound"] == ""
    _, cap = _read_csv(tmp_path / "capacity_t_N2.csv")
    for r in cap:
        assert _f(r["upper_bound"]) >= _f(r["closed_form"])
        assert _f(r["quadrature"]) == pytest.approx(_f(r["closed_form"]), rel=1e-6)
    # the written numbers are the library values at 12 significant digits
    model = build_model(Scheme.T, 2, 10.0)
    lib = metric_value("ber", Scheme.T, model, Method.CLOSED_FORM)[0]
    _, ber = _read_csv(tmp_path / "ber_t_N2.csv")
    assert ber[0]["closed_form"] == f"{lib:.12g}"


def test_curves_metadata_and_reproducibility(tmp_path):
    args = ["curves", "--scheme", "dh", "--n", "2", "--snr-db", "0:20:10"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "ber_dh_N2.csv").read_bytes()
    assert a == (tmp_path / "b" / "ber_dh_N2.csv").read_bytes()
    meta, _ = _read_csv(tmp_path / "a" / "ber_dh_N2.csv")
    text = "\n".join(meta)
    for needle in ("command", "seed", "version", "gamma_th_db", "rel_tol"):
        assert needle in text


def test_config_file_is_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "t", "n": "3", "snr_db": "0:4:2"}))
    out = tmp_path / "out"
    assert cli.main(["curves", "--config", str(cfg), "--n", "2", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [f"{m}_t_N2.csv" for m in
                                                     ("ber", "capacity", "outage")]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert cli.main(["curves", "--config", str(bad)]) == cli.EXIT_USAGE


def _simulate(out, seed=12345, samples=40_000, workers=1):
    args = ["simulate", "--scheme", "dh", "--n", "2", "--snr-db", "10:20:5",
            "--samples", str(samples), "--seed", str(seed), "--workers", str(workers),
            "--out", str(out)]
    assert cli.main(args) == cli.EXIT_OK
    return _read_csv(out / "sim_outage_dh_N2.csv")[1]


def test_simulate_determinism_and_statistics(tmp_path):
    a = _simulate(tmp_path / "a")
    _simulate(tmp_path / "b", workers=3)
    for f in ("sim_outage_dh_N2.csv", "sim_ber_dh_N2.csv", "sim_capacity_dh_N2.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    other = _simulate(tmp_path / "c", seed=777)
    for r, s in zip(a, other):
        assert r["estimate"] != s["estimate"]
        se = max(float(r["std_error"]), float(s["std_error"]))
        assert abs(float(r["estimate"]) - float(s["estimate"])) < 6 * se
    big = _simulate(tmp_path / "d", samples=160_000)
    for r, s in zip(a, big):
        assert float(r["std_error"]) / float(s["std_error"]) == pytest.approx(2.0, rel=0.2)


def test_figures_small(tmp_path):
    args = ["figures", "--n", "1,2", "--snr-db", "0:40:10", "--samples", "20000",
            "--svg", "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    for i in range(1, 6):
        assert (tmp_path / f"fig{i}.csv").exists()
        assert (tmp_path / f"fig{i}.svg").read_text().lstrip().startswith("<?xml")
    _, fig1 = _read_csv(tmp_path / "fig1.csv")
    assert all(r["mc_std_error"] != "" for r in fig1)
    _, fig3 = _read_csv(tmp_path / "fig3.csv")
    for r in fig3:
        assert _f(r["capacity_upper_bound"]) >= _f(r["capacity"])


def test_figure_claims_on_default_threshold(tmp_path):
    args = ["figures", "--n", "2,4", "--snr-db", "50:70:2", "--samples", "10000",
            "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    _, fig5 = _read_csv(tmp_path / "fig5.csv")
    from risdist.metrics import MetricCurve, diversity_order_estimate

    rows = [r for r in fig5 if r["n"] == "4"]
    grid = [float(r["snr_db"]) for r in rows]
    dh = MetricCurve(grid, [float(r["ber_dh"]) for r in rows], Method.CLOSED_FORM, Scheme.DH)
    t = MetricCurve(grid, [float(r["ber_t"]) for r in rows], Method.CLOSED_FORM, Scheme.T)
    assert diversity_order_estimate(dh, (50, 70)) < diversity_order_estimate(t, (50, 70))


def test_fig1_nccs_error_exceeds_squared_kg_error(tmp_path):
    args = ["figures", "--n", "2", "--snr-db", "16:30:2", "--samples", "400000",
            "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    _, fig1 = _read_csv(tmp_path / "fig1.csv")
    kg = max(abs(float(r["squared_kg"]) - float(r["mc"])) for r in fig1)
    nccs = max(abs(float(r["nccs"]) - float(r["mc"])) for r in fig1)
    assert nccs > kg


def test_validate_tightened_enumerates_failures(tmp_path, capsys):
    code = cli.main(["validate", "--tighten", "100", "--out", str(tmp_path)])
    assert code == cli.EXIT_VALIDATION
    report = json.loads((tmp_path / "validation_report.json").read_text())
    assert not report["all_passed"]
    assert [c["cid"] for c in report["criteria"]] == [str(i) for i in range(1, 11)]
    failed = [c for c in report["criteria"] if not c["passed"]]
    out = capsys.readouterr().out
    assert out.count("[FAIL]") == len(failed) >= 1
    c4 = next(c for c in report["criteria"] if c["cid"] == "4")
    assert "xi" in json.dumps(c4["diagnostics"]).lower()
