"""Command-line runner: ``risdist {fit,curves,simulate,figures,validate}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
failure. Settings come from flags, optionally layered over a JSON file given
with ``--config`` (flags win).
"""

from __future__ import annotations

import argparse
import importlib.util
import json
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from ._validation import db_to_linear
from .exceptions import ConvergenceError, FitError
from .metrics import (
    DPSK,
    METRIC_QUAD_ACCURACY,
    Method,
    ModulationParams,
    Scheme,
    build_model,
    metric_value,
)


EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULTS = {
    "scheme": "dh",
    "n": "1,2,4",
    "snr_db": "0:60:2",
    "gamma_th_db": 20.0,
    "mod": "dpsk",
    "samples": 1_000_000,
    "seed": 12345,
    "substreams": 8,
    "workers": 1,
    "out": None,
    "svg": False,
    "method": "closed",
    "tighten": 1.0,
}
FIGURE_DEFAULTS = {"n": "1,2,4,8,64", "snr_db": "0:60:2"}
# settings that do not affect file contents
_NOT_RECORDED = {"workers", "out", "config", "svg"}

METRICS = ("outage", "ber", "capacity")
CURVE_COLUMNS = ("snr_db", "closed_form", "quadrature", "asymptotic", "upper_bound")
NUMERIC_ERRORS = (ConvergenceError, FitError, OverflowError, ArithmeticError)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _package_version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


# -- argument handling ----------------------------------------------------


def _build_parser():
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with settings (flags override it)")
    common.add_argument("--scheme", choices=("dh", "t"))
    common.add_argument("--n", help="comma-separated element counts, e.g. 1,2,4")
    common.add_argument("--snr-db", dest="snr_db", help="average-SNR grid start:stop:step in dB")
    common.add_argument("--gamma-th-db", dest="gamma_th_db", type=float)
    common.add_argument("--mod", help="dpsk or custom:p,q")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--substreams", type=int)
    common.add_argument("--workers", type=int, help="threads for Monte Carlo (results unchanged)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--svg", action="store_true")
    common.add_argument("--method", choices=("closed", "quad", "both"))
    common.add_argument("--tighten", type=float, help="divide validation tolerances by this")

    parser = _Parser(prog="risdist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("fit", "moment-matched squared-K_G parameters for the DH scheme"),
        ("curves", "outage, BER and capacity curves"),
        ("simulate", "Monte Carlo estimates"),
        ("figures", "data (and optional SVG) for the five comparison figures"),
        ("validate", "run the acceptance checks and write a JSON report"),
    ):
        sub.add_parser(name, parents=[common], help=text, argument_default=argparse.SUPPRESS)
    return parser


def parse_n_list(text):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--n must be a comma-separated list of integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise UsageError(f"--n values must be integers >= 1, got {text!r}")
    return values


def parse_snr_range(text):
    try:
        start, stop, step = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise UsageError(f"--snr-db must look like start:stop:step, got {text!r}") from None
    if not step > 0:
        raise UsageError("--snr-db step must be > 0")
    if stop < start:
        raise UsageError("--snr-db range is empty")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def parse_mod(text):
    text = str(text).strip().lower()
    if text == "dpsk":
        return DPSK
    if text.startswith("custom:"):
        try:
            p, q = (float(v) for v in text[len("custom:"):].split(","))
            return ModulationParams(p, q)
        except (ValueError, TypeError):
            pass
    raise UsageError(f"--mod must be dpsk or custom:p,q with p, q > 0, got {text!r}")


def resolve_settings(command, args):
    settings = dict(DEFAULTS)
    if command == "figures":
        settings.update(FIGURE_DEFAULTS)
    explicit = dict(args)
    config = explicit.pop("config", None)
    if config:
        try:
            loaded = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    settings.update(explicit)
    # validate everything up front
    settings["n_list"] = parse_n_list(settings["n"])
    settings["grid_db"] = parse_snr_range(settings["snr_db"])
    settings["modulation"] = parse_mod(settings["mod"])
    if settings["scheme"] not in ("dh", "t"):
        raise UsageError("--scheme must be dh or t")
    if settings["method"] not in ("closed", "quad", "both"):
        raise UsageError("--method must be closed, quad or both")
    for key in ("samples", "substreams", "workers"):
        if not isinstance(settings[key], int) or settings[key] < 1:
            raise UsageError(f"--{key} must be a positive integer")
    if not isinstance(settings["seed"], int) or not 0 <= settings["seed"] < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if not settings["tighten"] > 0:
        raise UsageError("--tighten must be > 0")
    settings["gamma_th"] = float(db_to_linear(settings["gamma_th_db"]))
    return settings


def canonical_command(command, settings):
    """Command line that regenerates the file contents exactly."""
    parts = ["risdist", command]
    for key in DEFAULTS:
        if key in _NOT_RECORDED:
            continue
        val = settings[key]
        if isinstance(val, bool):
            continue
        parts += [f"--{key.replace('_', '-')}", str(val)]
    return " ".join(parts)


# -- output helpers -------------------------------------------------------


def fmt(value):
    if value is None:
        return ""
    return f"{float(value):.12g}"


def metadata_lines(command, settings, extra=None):
    lines = [
        f"# command: {canonical_command(command, settings)}",
        f"# version: {_package_version()}",
        f"# seed: {settings['seed']}",
        f"# gamma_th_db: {settings['gamma_th_db']}",
        f"# modulation: p={settings['modulation'].p} q={settings['modulation'].q}",
        f"# quadrature_tolerance: rel_tol={METRIC_QUAD_ACCURACY.rel_tol:g}"
        f" abs_tol={METRIC_QUAD_ACCURACY.abs_tol:g}",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}: {val}")
    return lines


def csv_text(meta, columns, rows):
    out = list(meta)
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(out) + "\n"


class OutputSet:
    """Collects files so nothing is written until every computation succeeded."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def write(self):
        self.directory.mkdir(parents=True, exist_ok=True)
        written = []
        try:
            for name in sorted(self.files):
                path = self.directory / name
                path.write_text(self.files[name], encoding="utf-8")
                written.append(path)
        except OSError:
            for path in written:
                path.unlink(missing_ok=True)
            raise
        return written


def _out_dir(settings, fallback):
    return Path(settings["out"] or fallback)


# -- commands -------------------------------------------------------------


def cmd_fit(settings):
    from .channelmodels import RisDhModel

    if settings["scheme"] != "dh":
        raise UsageError("fit applies to the DH scheme only")
    rows = []
    for n in settings["n_list"]:
        try:
            fit = RisDhModel(n, 1.0).fit().fit_
        except (FitError, OverflowError) as exc:
            raise NumericalFailure(f"fit failed for N={n}: {exc}") from None
        rows.append((str(n), fit.k_w, fit.m_w, fit.omega_w, fit.discriminant,
                     str(fit.fallback_used).lower(), str(fit.exact_boundary).lower()))
    cols = ("n", "k_w", "m_w", "omega_w", "discriminant", "fallback_used", "exact_boundary")
    text = csv_text(metadata_lines("fit", settings), cols, rows)
    sys.stdout.write(text)
    if settings["out"]:
        out = OutputSet(settings["out"])
        out.add("fit_dh.csv", text)
        out.write()
    return EXIT_OK


_COLUMN_METHODS = {
    "closed_form": Method.CLOSED_FORM,
    "quadrature": Method.QUADRATURE,
    "asymptotic": Method.ASYMPTOTIC,
    "upper_bound": Method.UPPER_BOUND,
}


def _curve_rows(scheme, n, metric, settings):
    wanted = {
        "closed": {"closed_form", "asymptotic", "upper_bound"},
        "quad": {"quadrature", "asymptotic", "upper_bound"},
        "both": set(_COLUMN_METHODS),
    }[settings["method"]]
    rows, fallbacks = [], []
    for db, avg in zip(settings["grid_db"], db_to_linear(settings["grid_db"])):
        try:
            model = build_model(scheme, n, float(avg))
            row = [db]
            for col, method in _COLUMN_METHODS.items():
                if col not in wanted:
                    row.append(None)
                    continue
                val, used = metric_value(metric, scheme, model, method,
                                         settings["gamma_th"], settings["modulation"])
                if val is not None and used is not method:
                    fallbacks.append(db)
                row.append(val)
        except NUMERIC_ERRORS as exc:
            raise NumericalFailure(
                f"{metric} {scheme.value} N={n} failed at {db} dB: {exc}"
            ) from None
        rows.append(row)
    return rows, fallbacks


def cmd_curves(settings):
    scheme = Scheme.DH if settings["scheme"] == "dh" else Scheme.T
    out = OutputSet(_out_dir(settings, "curves"))
    for n in settings["n_list"]:
        for metric in METRICS:
            rows, fallbacks = _curve_rows(scheme, n, metric, settings)
            extra = {"scheme": scheme.value, "n_elems": n, "metric": metric,
                     "method": settings["method"],
                     "quadrature_fallback_snr_db": ";".join(fmt(v) for v in fallbacks)}
            meta = metadata_lines("curves", settings, extra)
            out.add(f"{metric}_{settings['scheme']}_N{n}.csv", csv_text(meta, CURVE_COLUMNS, rows))
    for path in out.write():
        print(path)
    return EXIT_OK


def _sim_config(scheme, n, settings):
    from .montecarlo import SimConfig

    try:
        return SimConfig(scheme, n, settings["grid_db"], settings["gamma_th"],
                         settings["samples"], settings["seed"], settings["substreams"])
    except ValueError as exc:
        raise NumericalFailure(f"invalid simulation config: {exc}") from None


def cmd_simulate(settings):
    from .montecarlo import simulate

    scheme = Scheme.DH if settings["scheme"] == "dh" else Scheme.T
    out = OutputSet(_out_dir(settings, "simulation"))
    for n in settings["n_list"]:
        cfg = _sim_config(scheme, n, settings)
        curves = simulate(cfg, METRICS, n_workers=settings["workers"])
        for metric, curve in curves.items():
            extra = {"scheme": scheme.value, "n_elems": n, "metric": metric,
                     "n_samples": cfg.n_samples, "substreams": cfg.n_substreams}
            meta = metadata_lines("simulate", settings, extra)
            rows = zip(curve.snr_grid_db, curve.estimates, curve.std_errors)
            out.add(f"sim_{metric}_{settings['scheme']}_N{n}.csv",
                    csv_text(meta, ("snr_db", "estimate", "std_error"), rows))
    for path in out.write():
        print(path)
    return EXIT_OK


def _figure_data(settings):
    from .channelmodels import NccsModel
    from .montecarlo import simulate

    grid = settings["grid_db"]
    avgs = [float(a) for a in db_to_linear(grid)]
    th, mod = settings["gamma_th"], settings["modulation"]
    figs = {k: [] for k in ("fig1", "fig2", "fig3", "fig4", "fig5")}
    for n in settings["n_list"]:
        mc = {s: simulate(_sim_config(s, n, settings), METRICS, n_workers=settings["workers"])
              for s in (Scheme.DH, Scheme.T)}
        for i, (db, avg) in enumerate(zip(grid, avgs)):
            try:
                dh = build_model(Scheme.DH, n, avg)
                t = build_model(Scheme.T, n, avg)

                def val(metric, scheme, model, method=Method.CLOSED_FORM):
                    return metric_value(metric, scheme, model, method, th, mod)[0]

                dh_out, t_out = val("outage", Scheme.DH, dh), val("outage", Scheme.T, t)
                dh_ber, t_ber = val("ber", Scheme.DH, dh), val("ber", Scheme.T, t)
                dh_cap, t_cap = val("capacity", Scheme.DH, dh), val("capacity", Scheme.T, t)
                nccs_dh = NccsModel(n, avg, "dh").fit().cdf(th)
                nccs_t = NccsModel(n, avg, "t").fit().cdf(th)
                rows = {}
                for s in (Scheme.DH, Scheme.T):
                    rows[s] = [x for m in METRICS
                               for x in (mc[s][m].estimates[i], mc[s][m].std_errors[i])]
                figs["fig1"].append([str(n), db, dh_out, nccs_dh, *rows[Scheme.DH][:2]])
                figs["fig2"].append([str(n), db, t_out, nccs_t, *rows[Scheme.T][:2]])
                figs["fig3"].append([
                    str(n), db, dh_out, *rows[Scheme.DH][0:2], dh_ber, *rows[Scheme.DH][2:4],
                    dh_cap, *rows[Scheme.DH][4:6],
                    val("capacity", Scheme.DH, dh, Method.UPPER_BOUND),
                    val("capacity", Scheme.DH, dh, Method.ASYMPTOTIC),
                ])
                figs["fig4"].append([
                    str(n), db, t_out, *rows[Scheme.T][0:2], t_ber, *rows[Scheme.T][2:4],
                    t_cap, *rows[Scheme.T][4:6],
                    val("capacity", Scheme.T, t, Method.UPPER_BOUND),
                    val("capacity", Scheme.T, t, Method.ASYMPTOTIC),
                ])
                figs["fig5"].append([str(n), db, dh_ber, t_ber])
            except NUMERIC_ERRORS as exc:
                raise NumericalFailure(f"figure data failed for N={n} at {db} dB: {exc}") from None
    return figs


_PAIR = ("mc", "mc_std_error")
FIGURE_COLUMNS = {
    "fig1": ("n", "snr_db", "squared_kg", "nccs", *_PAIR),
    "fig2": ("n", "snr_db", "gamma_model", "nccs", *_PAIR),
    "fig3": ("n", "snr_db", "outage", "outage_mc", "outage_mc_std_error", "ber", "ber_mc",
             "ber_mc_std_error", "capacity", "capacity_mc", "capacity_mc_std_error",
             "capacity_upper_bound", "capacity_asymptotic"),
    "fig5": ("n", "snr_db", "ber_dh", "ber_t"),
}
FIGURE_COLUMNS["fig4"] = FIGURE_COLUMNS["fig3"]
FIGURE_TITLES = {
    "fig1": "DH outage: squared-K_G, NCCS and Monte Carlo",
    "fig2": "T outage: Gamma model, NCCS and Monte Carlo",
    "fig3": "DH outage, DPSK BER and capacity",
    "fig4": "T outage, DPSK BER and capacity",
    "fig5": "DPSK BER of DH and T at equal average SNR",
}


def _render_svg(name, columns, rows, path):
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    data = np.array([[np.nan if v in ("", None) else float(v) for v in r] for r in rows])
    value_cols = [c for c in columns[2:] if not c.endswith("std_error")]
    prob_cols = [c for c in value_cols if not c.startswith("capacity")]
    cap_cols = [c for c in value_cols if c.startswith("capacity")]
    panels = [(prob_cols, True)] + ([(cap_cols, False)] if cap_cols else [])
    fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 4.5), squeeze=False)
    for ax, (cols, logy) in zip(axes[0], panels):
        for n in np.unique(data[:, 0]):
            sel = data[:, 0] == n
            for c in cols:
                y = data[sel, columns.index(c)]
                if logy:
                    y = np.where(y > 0, y, np.nan)
                style = "o" if "mc" in c else "-"
                ax.plot(data[sel, 1], y, style, ms=3, label=f"{c} N={int(n)}")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("average SNR (dB)")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=6, ncol=2)
    fig.suptitle(FIGURE_TITLES[name])
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_figures(settings):
    if settings["svg"]:
        if importlib.util.find_spec("matplotlib") is None:
            raise UsageError("--svg needs matplotlib (pip install 'artifact[plot]')")
    figs = _figure_data(settings)
    out = OutputSet(_out_dir(settings, "figures"))
    for name, rows in figs.items():
        meta = metadata_lines("figures", settings, {"figure": name,
                                                     "samples_per_point": settings["samples"]})
        out.add(f"{name}.csv", csv_text(meta, FIGURE_COLUMNS[name], rows))
    written = out.write()
    if settings["svg"]:
        try:
            for name, rows in figs.items():
                path = out.directory / f"{name}.svg"
                _render_svg(name, FIGURE_COLUMNS[name], rows, path)
                written.append(path)
        except Exception:
            for path in written:
                path.unlink(missing_ok=True)
            raise
    for path in written:
        print(path)
    return EXIT_OK


def cmd_validate(settings):
    from .validation import run_all

    results = run_all(tighten=settings["tighten"], seed=settings["seed"])
    report = {
        "command": canonical_command("validate", settings),
        "version": _package_version(),
        "seed": settings["seed"],
        "tighten": settings["tighten"],
        "all_passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] criterion {r.cid}: {r.title} ({r.runtime_s:.1f} s)")
        for c in r.checks:
            if not c.passed:
                print(f"    failed: {c.name}: measured {c.measured:.6g}, tolerance {c.tolerance}")
    text = json.dumps(report, indent=2, default=_json_default)
    out = OutputSet(_out_dir(settings, "validation"))
    out.add("validation_report.json", text + "\n")
    for path in out.write():
        print(path)
    return EXIT_OK if report["all_passed"] else EXIT_VALIDATION


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


COMMANDS = {
    "fit": cmd_fit,
    "curves": cmd_curves,
    "simulate": cmd_simulate,
    "figures": cmd_figures,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = _build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command")
        settings = resolve_settings(command, ns)
        return COMMANDS[command](settings)
    except UsageError as exc:
        print(f"risdist: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"risdist: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        print(f"risdist: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
