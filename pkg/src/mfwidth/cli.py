"""Command-line front end: ``mfwidth analyze|synth|cluster|confusion``.

Exit codes: 0 success, 2 some inputs failed, 64 usage error, 65 bad data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .audio import DEFAULT_SEGMENT_SECONDS, load_wav, prepare_signal
from .classify import DEFAULT_RANGES, MODES, WidthRecord, cluster_widths, confusion_matrix, group_report, load_ranges
from .mfdfa import DEFAULT_Q, MfdfaConfig, Signal, default_scales, mfdfa
from .synth import (
    CascadeSpec,
    FgnSpec,
    cascade_hurst_oracle,
    cascade_oracle_width,
    cascade_tau_oracle,
    cascade_width_limit,
    gen_binomial_cascade,
    gen_fgn,
    gen_white_noise,
)

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_DATA = 0, 2, 64, 65
GRID_FLAGS = ("--scales", "--q")
CSV_FIELDS = ("source", "sample_rate", "n_samples", "width", "alpha0", "A", "B", "C", "alpha1", "alpha2", "h2", "warnings", "error")

log = logging.getLogger("mfwidth")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str, kind: str) -> list:
    """``lo:hi:count``; log-spaced unique integers for scales, linear for q."""
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"bad {kind} grid {text!r}; expected lo:hi:count") from None
    if count < 1 or hi < lo:
        raise UsageError(f"bad {kind} grid {text!r}")
    if kind == "scales":
        if lo < 1:
            raise UsageError("scales must be >= 1")
        return np.unique(np.round(np.geomspace(lo, hi, count)).astype(int)).tolist()
    return np.linspace(lo, hi, count).tolist()


def _grid(value, kind):
    if value is None or isinstance(value, list):
        return value
    return parse_grid(str(value), kind)


def _merge_grid_args(argv):
    # let "--q -5:5:41" through argparse, which would read -5:5:41 as a flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in GRID_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


# -- analyze ------------------------------------------------------------------

ANALYZE_KEYS = ("scales", "q", "order", "segmentation", "variance_floor", "fit_threshold", "start", "duration", "jobs", "format")
ANALYZE_DEFAULTS = {"order": 1, "segmentation": "both-ends", "variance_floor": 1e-30, "start": 0.0, "format": "jsonl"}


def _analysis_options(args) -> dict:
    opts = dict(ANALYZE_DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        doc = doc.get("config", doc)
        unknown = set(doc) - set(ANALYZE_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update({k: v for k, v in doc.items() if v is not None})
    for key in ANALYZE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    opts["scales"] = _grid(opts.get("scales"), "scales")
    opts["q"] = _grid(opts.get("q"), "q")
    if opts.get("jobs") is None:
        opts["jobs"] = int(os.environ.get("MFWIDTH_JOBS", "1"))
    if opts["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    if opts["format"] not in ("jsonl", "csv"):
        raise UsageError("--format must be jsonl or csv")
    return opts


def _read_input(path: Path, start: float, duration):
    """Returns (signal, resolved duration)."""
    if path.suffix.lower() == ".wav":
        clip = load_wav(path)
        if duration is None:
            duration = min(DEFAULT_SEGMENT_SECONDS, clip.n_frames / clip.sample_rate - start)
        return prepare_signal(clip, start, duration), duration
    rate = 1.0
    meta = Path(str(path) + ".json")
    if meta.exists():
        rate = float(json.loads(meta.read_text()).get("sample_rate", 1.0))
    x = np.fromfile(path, dtype="<f8")
    lo = int(round(start * rate))
    hi = x.size if duration is None else lo + int(round(duration * rate))
    if lo < 0 or hi > x.size or hi <= lo:
        raise ValueError("segment exceeds signal")
    return Signal(x[lo:hi], rate), duration


def analyze_path(path, opts: dict, n_jobs: int = 1) -> dict:
    path = Path(path)
    record = {"source": str(path)}
    try:
        signal, duration = _read_input(path, float(opts["start"]), opts.get("duration"))
        n = len(signal)
        scales = opts["scales"] if opts["scales"] is not None else default_scales(n).tolist()
        config = MfdfaConfig(
            scales=tuple(scales),
            q_grid=tuple(opts["q"] if opts["q"] is not None else DEFAULT_Q.tolist()),
            detrend_order=opts["order"],
            segmentation=opts["segmentation"],
            variance_floor=float(opts["variance_floor"]),
            fit_threshold=opts.get("fit_threshold"),
        )
        res = mfdfa(signal, config, n_jobs=n_jobs)
    except (OSError, ValueError, RuntimeError) as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
        return record

    sp = res.spectrum
    record.update({
        "sample_rate": signal.sample_rate,
        "n_samples": n,
        "config": {
            "scales": [int(s) for s in res.scales],
            "q": list(config.q_grid),
            "order": config.detrend_order,
            "segmentation": config.segmentation,
            "variance_floor": config.variance_floor,
            "fit_threshold": config.fit_threshold,
            "start": float(opts["start"]),
            "duration": duration,
        },
        "hurst": {
            "h": res.hurst.h.tolist(),
            "intercept": res.hurst.intercepts.tolist(),
            "r_squared": res.hurst.r_squared.tolist(),
        },
        "tau": res.tau.tau.tolist(),
        "alpha": sp.alpha.tolist(),
        "f_alpha": sp.f_alpha.tolist(),
        "alpha0": sp.alpha0,
        "A": sp.coeff_A,
        "B": sp.coeff_B,
        "C": sp.coeff_C,
        "alpha1": sp.alpha1,
        "alpha2": sp.alpha2,
        "width": sp.width,
        "warnings": list(res.warnings),
    })
    return record


def _csv_row(rec):
    row = {k: rec.get(k, "") for k in CSV_FIELDS}
    if "config" in rec:
        q = rec["config"]["q"]
        row["h2"] = rec["hurst"]["h"][q.index(2.0)] if 2.0 in q else ""
        row["warnings"] = ";".join(rec["warnings"])
    return row


def cmd_analyze(args) -> int:
    opts = _analysis_options(args)
    jobs = opts["jobs"]
    if len(args.paths) == 1:
        records = [analyze_path(args.paths[0], opts, n_jobs=jobs)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda p: analyze_path(p, opts), args.paths))

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if opts["format"] == "csv":
            writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            for rec in records:
                writer.writerow(_csv_row(rec))
        else:
            for rec in records:
                out.write(json.dumps(rec) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    failed = [r for r in records if "error" in r]
    for r in failed:
        log.error("%s: %s", r["source"], r["error"])
    return EXIT_PARTIAL if failed else EXIT_OK


# -- synth --------------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        if args.kind == "noise":
            x = gen_white_noise(args.n, args.seed)
            params = {"n": args.n, "seed": args.seed}
            oracle = {"hurst": 0.5}
        elif args.kind == "fgn":
            x = gen_fgn(FgnSpec(args.hurst, args.n, args.seed))
            params = {"hurst": args.hurst, "n": args.n, "seed": args.seed}
            oracle = {"hurst": args.hurst, "lag1_autocorrelation": 2 ** (2 * args.hurst - 1) - 1}
        else:
            spec = CascadeSpec(args.levels, args.a, args.assignment, args.seed)
            x = gen_binomial_cascade(spec)
            q = DEFAULT_Q.tolist()
            params = {"a": args.a, "levels": args.levels, "assignment": args.assignment, "seed": args.seed}
            oracle = {
                "delta_alpha": cascade_width_limit(args.a),
                "alpha_min": float(-np.log2(args.a)),
                "alpha_max": float(-np.log2(1 - args.a)),
                "q": q,
                "h": cascade_hurst_oracle(args.a, q).tolist(),
                "tau": cascade_tau_oracle(args.a, q).tolist(),
                "width_on_q_grid": cascade_oracle_width(args.a, q),
            }
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out = Path(args.out)
    x.astype("<f8").tofile(out)
    meta = {
        "kind": args.kind,
        "params": params,
        "n_samples": int(x.size),
        "sample_rate": args.rate,
        "dtype": "float64-le",
        "oracle": oracle,
    }
    Path(str(out) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


# -- cluster ------------------------------------------------------------------


def _read_csv(path, required):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    missing = set(required) - set(reader.fieldnames or ())
    if missing:
        raise DataError(f"{path}: line 1: missing columns {sorted(missing)}")
    for row in reader:
        if None in row or any(row.get(k) is None for k in required):
            raise DataError(f"{path}: line {reader.line_num}: wrong number of fields")
        yield reader.line_num, row


def read_widths(path) -> list[WidthRecord]:
    records = []
    for line, row in _read_csv(path, ("instrument", "mode", "width")):
        try:
            records.append(WidthRecord(row["instrument"].strip(), row["mode"].strip().lower(), float(row["width"])))
        except ValueError as exc:
            raise DataError(f"{path}: line {line}: {exc}") from None
    return records


def cmd_cluster(args) -> int:
    records = read_widths(args.widths)
    if not records:
        raise DataError("no width records")
    try:
        ranges = load_ranges(args.ranges) if args.ranges else DEFAULT_RANGES
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad ranges file: {exc}") from None
    try:
        result = cluster_widths(records, args.k, args.method)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    report = group_report(records, result.labels, ranges)
    report["k"] = args.k
    report["inertia"] = result.inertia
    plot = report.pop("plot")

    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instrument", "mode", "width", "group", "candidates"])
        for r in report["records"]:
            cands = ";".join(f"{c['group']}:{c['mode']}" + ("" if c["in_range"] else "(out-of-range)") for c in r["candidates"])
            w.writerow([r["instrument"], r["mode"], r["width"], r["group"], cands])
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)

    if args.plot_data:
        with open(args.plot_data, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instrument", "width", "group"])
            w.writerows(plot)
    return EXIT_OK


# -- confusion ----------------------------------------------------------------


def read_responses(path) -> list[tuple]:
    rows = []
    for line, row in _read_csv(path, ("listener_id", "instrument", "true_mode", "perceived_mode")):
        t, p = row["true_mode"].strip().lower(), row["perceived_mode"].strip().lower()
        for tok in (t, p):
            if tok not in MODES:
                raise DataError(f"{path}: line {line}: unknown mode {tok!r}")
        rows.append((row["listener_id"], row["instrument"], t, p))
    if not rows:
        raise DataError("no responses")
    return rows


def cmd_confusion(args) -> int:
    cm = confusion_matrix(read_responses(args.responses))
    doc = json.dumps(cm.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(doc)
    sys.stdout.write(doc if args.format == "json" else cm.render() + "\n")
    for mode in cm.empty_rows:
        log.warning("no responses with true mode %r; row percentages undefined", mode)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfwidth", description="Multifractal spectral width analysis of audio and synthetic signals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="spectral width of WAV or raw float64 files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--scales", help="lo:hi:count, log-spaced integers (default 16 to N/4, 20 points)")
    p.add_argument("--q", help="lo:hi:count, linear (default -5:5:41)")
    p.add_argument("--order", type=int, help="detrending polynomial order (default 1)")
    p.add_argument("--segmentation", choices=("both-ends", "forward-only"))
    p.add_argument("--variance-floor", dest="variance_floor", type=float)
    p.add_argument("--fit-threshold", dest="fit_threshold", type=float,
                   help="fit the quadratic only to spectrum points with f >= this")
    p.add_argument("--start", type=float, help="excerpt start in seconds (default 0)")
    p.add_argument("--duration", type=float, help="excerpt length in seconds (WAV default: 30 or the whole clip)")
    p.add_argument("--jobs", type=_positive_int, help="worker threads (default $MFWIDTH_JOBS or 1)")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--config", help="JSON file with the same keys as the flags, or an earlier output record")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write a synthetic test signal")
    p.add_argument("kind", choices=("noise", "fgn", "cascade"))
    p.add_argument("--out", required=True, help="raw little-endian float64 output; metadata goes to OUT.json")
    p.add_argument("--n", type=int, default=65536)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hurst", type=float, default=0.8)
    p.add_argument("--a", type=float, default=0.75)
    p.add_argument("--levels", type=int, default=16)
    p.add_argument("--assignment", choices=("left-heavy", "random"), default="left-heavy")
    p.add_argument("--rate", type=float, default=44100.0, help="sample rate recorded in the metadata")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="group instruments by width")
    p.add_argument("widths", help="CSV with columns instrument,mode,width")
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--method", choices=("optimal", "lloyd"), default="optimal")
    p.add_argument("--ranges", help="JSON group ranges (default: built-in string-instrument ranges)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.add_argument("--plot-data", dest="plot_data", help="CSV of instrument,width,group")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("confusion", help="listener confusion matrix")
    p.add_argument("responses", help="CSV with columns listener_id,instrument,true_mode,perceived_mode")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="also write the matrix as JSON here")
    p.set_defaults(func=cmd_confusion)
    return parser


def main(argv=None) -> int:
    argv = _merge_grid_args(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mfwidth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mfwidth: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
