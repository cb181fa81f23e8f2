"""Command-line interface.

Subcommands ``fit``, ``analyze``, ``compare``, ``summary`` and ``synth``.
Exit codes: 0 success, 1 usage error, 2 data or model error. Errors are
reported on stderr as one line: ``loaddecomp: error: <cause>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from datetime import timedelta
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import ConfigError, LoadDecompError, ParameterError
from .pipeline import (
    Analysis,
    RunConfig,
    build_config,
    config_to_yaml,
    load_config,
    parse_range,
    run_analysis,
    write_atomic,
)
from .residuals import ResidualSeries, load_calendar, moving_average, period_summary, year_difference
from .svgplot import grouped_bar_chart, line_chart
from .synth import generate, generate_consumption, load_scenarios

logger = logging.getLogger("loaddecomp")

EXIT_USAGE = 1
EXIT_DATA = 2
DAY = timedelta(days=1)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _run_flags(p):
    p.add_argument("--config", type=Path, help="YAML run config")
    p.add_argument("--weather", help="weather CSV")
    p.add_argument("--consumption", help="consumption CSV")
    p.add_argument("--region")
    p.add_argument("--class", dest="consumer_class", choices=("business", "private"))
    p.add_argument("--train-start", help="first training day, YYYY-MM-DD")
    p.add_argument("--train-days", type=int)
    p.add_argument("--onset", help="onset date; denominators freeze from here")
    p.add_argument("--scale-window", help="START:END window for level rescaling")
    p.add_argument("--holidays", help="YAML holiday calendar")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dump-features", help="write the feature matrix CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loaddecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit coefficients on the training window")
    _run_flags(p)
    p = sub.add_parser("analyze", help="residual series and plot")
    _run_flags(p)

    p = sub.add_parser("compare", help="difference two residual series across years")
    p.add_argument("first", type=Path, help="earlier year: run config (.yaml) or residual CSV")
    p.add_argument("second", type=Path, help="later year: run config (.yaml) or residual CSV")
    p.add_argument("--holidays", help="YAML holiday calendar with alignment pairs")
    p.add_argument("--window", type=int, default=7, help="moving-average window (odd)")
    p.add_argument("--out", default="out")

    p = sub.add_parser("summary", help="mean normalised residual per group")
    p.add_argument("inputs", nargs="*", type=Path, help="run configs (.yaml) or residual CSVs")
    p.add_argument("--range", dest="summary_range", help="START:END; default onset..end")
    p.add_argument("--out", default="out")

    p = sub.add_parser("synth", help="generate a synthetic dataset and run configs")
    p.add_argument("--config", type=Path, help="YAML scenario file (default: bundled reference)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    return parser


def _overrides(args) -> dict:
    keys = ("weather", "consumption", "region", "consumer_class", "train_start", "train_days", "onset",
            "scale_window", "holidays", "out", "dump_features")
    return {k: getattr(args, k, None) for k in keys}


def _out_dir(args, cfg: RunConfig = None) -> Path:
    if cfg is not None:
        return Path(cfg.out)
    return Path(args.out)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- subcommands -----------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = run_analysis(cfg)
    mean_abs, max_abs = result.training_stats()
    out = _out_dir(args, cfg)
    extra = {
        "region": cfg.region or "all",
        "class": cfg.consumer_class.value if cfg.consumer_class else "all",
        "training_mean_abs_rho": _fmt(mean_abs),
        "training_max_abs_rho": _fmt(max_abs),
    }
    write_atomic(out / "coefficients.csv", result.fit.to_csv(extra))
    if cfg.dump_features:
        write_atomic(Path(cfg.dump_features), result.features.to_csv())
    print(f"training window {result.fit.training_start}..{result.fit.training_end}")
    print(f"gram condition {result.fit.gram_condition:.6g}")
    print(f"mean |rho| {mean_abs:.6%}  max |rho| {max_abs:.6%}")
    print(f"wrote {out / 'coefficients.csv'}")
    return 0


def _analysis_outputs(result: Analysis, out: Path):
    cfg = result.config
    rs = result.residuals
    write_atomic(out / "residuals.csv", rs.to_csv())
    title = f"Normalised residuals, {cfg.label}"
    if cfg.scale_window is not None:
        title += f" (rescaled x{result.scale_factor:.4f})"
    write_atomic(out / "residuals.svg", line_chart([(cfg.label, rs.dates, rs.normalized)], title, onset=cfg.onset))


def cmd_analyze(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = run_analysis(cfg)
    out = _out_dir(args, cfg)
    _analysis_outputs(result, out)
    if cfg.dump_features:
        write_atomic(Path(cfg.dump_features), result.features.to_csv())
    mean_abs, max_abs = result.training_stats()
    print(f"training mean |rho| {mean_abs:.4%}  max |rho| {max_abs:.4%}")
    if cfg.scale_window is not None:
        print(f"scale factor {result.scale_factor:.6f}")
    print(f"wrote {out / 'residuals.csv'} and {out / 'residuals.svg'}")
    return 0


def _load_series(path: Path):
    """Residual series and summary range from a run config or residual CSV."""
    if path.suffix.lower() == ".csv":
        if not path.is_file():
            raise ConfigError(f"residual file not found: {path}", cause="residual-file-not-found")
        try:
            return ResidualSeries.from_csv(path.read_text(encoding="utf-8")), None
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: {exc}", cause="format-error") from exc
    cfg = load_config(path)
    return run_analysis(cfg).residuals, cfg.summary_range


def cmd_compare(args) -> int:
    a, _ = _load_series(args.first)
    b, _ = _load_series(args.second)
    calendar = None
    if args.holidays:
        path = Path(args.holidays)
        if not path.is_file():
            raise ConfigError(f"holidays file not found: {path}", cause="holidays-file-not-found")
        calendar = load_calendar(path.read_text(encoding="utf-8"))
    diff = year_difference(a, b, calendar)
    out = Path(args.out)
    write_atomic(out / "compare.csv", diff.to_csv(args.window))
    avg = moving_average(diff.diff, args.window)
    ya, yb = a.start_date.year, b.start_date.year
    label = b.label or a.label
    write_atomic(
        out / "compare.svg",
        line_chart(
            [(f"rho {yb} - rho {ya}", diff.dates, diff.diff), (f"{args.window}-day moving average", diff.dates, avg)],
            f"Residual difference {yb} vs {ya}" + (f", {label}" if label else ""),
            onset=b.onset_date,
        ),
    )
    print(f"{len(diff)} slots, {sum(1 for l in diff.labels if l.startswith('aligned'))} aligned")
    print(f"wrote {out / 'compare.csv'} and {out / 'compare.svg'}")
    return 0


def cmd_summary(args) -> int:
    if not args.inputs:
        raise ParameterError("summary needs at least one analysed series")
    cli_range = parse_range(args.summary_range, "--range") if args.summary_range else None
    rows = []
    for path in args.inputs:
        series, cfg_range = _load_series(path)
        start, end = cli_range or cfg_range or (series.onset_date or series.start_date, series.end_date)
        region, _, cls = (series.label or path.stem).partition("/")
        rows.append((region, cls or "all", start, end, period_summary(series, start, end)))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("region", "class", "start", "end", "mean_rho"))
    for region, cls, start, end, value in rows:
        writer.writerow((region, cls, start.isoformat(), end.isoformat(), _fmt(value)))
    out = Path(args.out)
    write_atomic(out / "summary.csv", buf.getvalue())

    groups = {}
    for region, cls, _, _, value in rows:
        groups.setdefault(region, []).append((cls, value))
    spans = sorted({(s, e) for _, _, s, e, _ in rows})
    title = "Mean normalised residual"
    if len(spans) == 1:
        title += f", {spans[0][0]} to {spans[0][1]}"
    write_atomic(out / "summary.svg", grouped_bar_chart(list(groups.items()), title))
    for region, cls, _, _, value in rows:
        print(f"{region:>16} {cls:>9} {value:+.2%}")
    print(f"wrote {out / 'summary.csv'} and {out / 'summary.svg'}")
    return 0


def cmd_synth(args) -> int:
    if args.config is not None:
        if not args.config.is_file():
            raise ConfigError(f"scenario file not found: {args.config}", cause="scenario-file-not-found")
        text = args.config.read_text(encoding="utf-8")
    else:
        text = resources.files("loaddecomp").joinpath("data/reference_2020.yaml").read_text(encoding="utf-8")
    specs = load_scenarios(text)
    if args.seed is not None:
        specs = [replace(s, seed=args.seed) for s in specs]
    out = Path(args.out)

    weather, features, _ = generate(specs[0])
    lines = ["timestamp,temp_c,wind_ms,cloud"]
    for s in weather:
        lines.append(f"{s.timestamp.isoformat(timespec='minutes')},{s.temperature!r},{s.wind_speed!r},{s.cloud_cover!r}")
    write_atomic(out / "weather.csv", "\n".join(lines) + "\n")

    lines = ["date,region,class,kwh"]
    for spec in specs:
        series = generate_consumption(spec, features)
        for day, value in zip(series.dates, series.values):
            lines.append(f"{day.isoformat()},{spec.region},{spec.consumer_class.value},{_fmt(value)}")
    write_atomic(out / "consumption.csv", "\n".join(lines) + "\n")

    for spec in specs:
        onset = spec.interventions[0].start if spec.interventions else None
        doc = {
            "site": {"latitude": spec.site.latitude, "longitude": spec.site.longitude},
            "weather": "weather.csv",
            "consumption": "consumption.csv",
            "region": spec.region,
            "class": spec.consumer_class.value,
            "out": f"{spec.region}_{spec.consumer_class.value}",
        }
        if spec.site.timezone:
            doc["site"]["timezone"] = spec.site.timezone
        elif spec.site.utc_offset is not None:
            doc["site"]["utc_offset"] = spec.site.utc_offset
        if onset is not None:
            doc["train_start"] = (onset - 30 * DAY).isoformat()
            doc["onset"] = onset.isoformat()
            doc["scale_window"] = f"{onset.isoformat()}:{(onset + 13 * DAY).isoformat()}"
        else:
            doc["train_start"] = (spec.start + 31 * DAY).isoformat()
        cfg = build_config(doc, out)
        write_atomic(out / f"run_{spec.region}_{spec.consumer_class.value}.yaml", config_to_yaml(cfg, out))
    print(f"wrote {len(weather)} weather rows and {len(specs)} series to {out}")
    return 0


COMMANDS = {"fit": cmd_fit, "analyze": cmd_analyze, "compare": cmd_compare, "summary": cmd_summary, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"loaddecomp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return 0 if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except LoadDecompError as exc:
        message = " ".join(str(exc).split())
        print(f"loaddecomp: error: {exc.cause}: {message}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"loaddecomp: error: io-error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
