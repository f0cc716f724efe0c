"""Command line entry point: ``ucorr compute|nulldist|power|bench``.

Exit codes: 0 success, 2 usage error, 3 input error, 4 numeric/validation error.
Reports go to stdout (or ``--output``), diagnostics to stderr.
"""
import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from ._validation import MIN_SAMPLE_SIZE, ValidationError
from .forest import ForestConfig
from .inference import Method, ucorr_test
from .rank_space import RawSample
from .simulate import Coefficient, Relationship, null_dist_experiment, power_experiment

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

DELIMITERS = {",": ",", "comma": ",", "\\t": "\t", "\t": "\t", "tab": "\t", ";": ";", "semicolon": ";"}


class InputError(Exception):
    """Unreadable or unparseable input file."""


class UsageError(Exception):
    pass


def format_float(v):
    if math.isnan(v) or math.isinf(v):
        raise ValidationError(f"cannot render non-finite value {v}")
    return "%.17g" % v


def dump_json(obj):
    """JSON with every float rendered to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dump_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dump_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    return json.dumps(str(obj))


def _is_number(field):
    try:
        float(field)
    except ValueError:
        return False
    return True


def parse_dataset(text, delimiter=",", has_header=False, x_col=0, y_col=1):
    """Parse two numeric columns from delimited text.

    Blank lines are skipped.  Without ``has_header`` a first row whose
    selected fields are all non-numeric is taken as a header; a first row
    that is only partly numeric is ambiguous and rejected.
    """
    rows = []
    header_pending = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = next(csv.reader([line], delimiter=delimiter))
        if max(x_col, y_col) >= len(fields):
            raise InputError(f"line {lineno}: expected at least {max(x_col, y_col) + 1} columns, got {len(fields)}")
        pair = [fields[x_col].strip(), fields[y_col].strip()]
        if header_pending:
            header_pending = False
            numeric = [_is_number(f) for f in pair]
            if has_header:
                continue
            if not any(numeric):
                continue
            if not all(numeric):
                raise InputError(f"line {lineno}: first row is partly numeric; pass --has-header or fix the file")
        try:
            values = [float(f) for f in pair]
        except ValueError:
            raise InputError(f"line {lineno}: non-numeric field in {pair}") from None
        if not all(math.isfinite(v) for v in values):
            raise InputError(f"line {lineno}: non-finite value in {pair}")
        rows.append(values)
    if not rows:
        raise InputError("no data rows found")
    arr = np.array(rows, dtype=np.float64)
    return arr[:, 0], arr[:, 1]


def _forest_config(args):
    return ForestConfig(
        tree_count=args.trees,
        random_split_fraction=args.random_split_fraction,
        m=args.m,
        max_leaf_count=args.leaves,
        min_leaf_width=args.min_leaf_width,
        split_trials=args.split_trials,
        seed=args.seed,
        threads=args.threads,
    )


def cmd_compute(args, out):
    t0 = time.perf_counter()
    try:
        with open(args.input, "rb") as fh:
            raw = fh.read()
        text = raw.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    delimiter = DELIMITERS.get(args.delimiter)
    if delimiter is None:
        raise UsageError(f"unsupported delimiter {args.delimiter!r}; use comma, tab or semicolon")
    x, y = parse_dataset(text, delimiter, args.has_header, args.x_col, args.y_col)
    if x.size < MIN_SAMPLE_SIZE:
        raise ValidationError(f"only {x.size} usable rows; at least {MIN_SAMPLE_SIZE} are needed "
                              f"(assumption A2: n and m must exceed 8)")
    t_parse = time.perf_counter()

    result = ucorr_test(RawSample(x, y), _forest_config(args), Method(args.pvalue),
                        k_bias=args.k_bias, n_perms=args.permutations)
    t_done = time.perf_counter()

    report = result.to_dict()
    report["input_digest"] = hashlib.blake2b(raw, digest_size=8).hexdigest()
    report["version"] = __version__
    report["timings_ms"] = {
        "parse": int(round((t_parse - t0) * 1000)),
        "compute": int(round((t_done - t_parse) * 1000)),
    }
    report["elapsed_ms"] = int(round((t_done - t0) * 1000))
    if args.format == "json":
        out.write(dump_json(report) + "\n")
    else:
        flat = {k: v for k, v in report.items() if k not in ("config", "timings_ms")}
        flat.update({f"config.{k}": v for k, v in report["config"].items()})
        flat.update({f"timings_ms.{k}": v for k, v in report["timings_ms"].items()})
        _write_csv(out, [flat])
    return report


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if v is None:
        return ""
    return str(v)


def _write_csv(out, rows):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(rows[0].keys()))
    for row in rows:
        writer.writerow([_cell(v) for v in row.values()])


def parse_noise_grid(spec):
    """``"0:100:25"`` (inclusive) or ``"0,10,50"``."""
    try:
        if ":" in spec:
            start, stop, step = (float(p) for p in spec.split(":"))
            if step <= 0:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + k * step for k in range(count)]
        return [float(p) for p in spec.split(",")]
    except ValueError:
        raise UsageError(f"bad noise grid {spec!r}; use start:stop:step or a comma list") from None


def cmd_nulldist(args, out):
    # replicates are the unit of parallelism here
    config = replace(_forest_config(args), m=None, threads=1)
    dist = null_dist_experiment(args.n, args.m, args.reps, seed=args.seed, config=config,
                                bins=args.bins, k_bias=args.k_bias, threads=args.threads)
    _write_csv(out, dist.histogram_rows())
    return dist


def cmd_power(args, out):
    try:
        kinds = [Relationship.parse(k.strip()) for k in args.relation.split(",")]
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    try:
        coefficients = [Coefficient(c.strip().lower()) for c in args.coeff.split(",")]
    except ValueError:
        valid = ", ".join(c.value for c in Coefficient)
        raise UsageError(f"unknown coefficient in {args.coeff!r}; valid: {valid}") from None
    grid = parse_noise_grid(args.noise)
    config = replace(_forest_config(args), threads=1)
    rows = []
    for kind in kinds:
        results = power_experiment(kind, args.n, grid, args.reps, coefficients, seed=args.seed,
                                   config=config, threads=args.threads)
        rows.extend(r.to_row() for r in results)
    _write_csv(out, rows)
    return rows


def cmd_bench(args, out):
    try:
        sizes = sorted(int(s) for s in args.sizes.split(","))
    except ValueError:
        raise UsageError(f"bad size list {args.sizes!r}") from None
    config = _forest_config(args)
    rows = []
    for n in sizes:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(n,)))
        sample = RawSample(rng.uniform(size=n), rng.uniform(size=n))
        best = math.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            ucorr_test(sample, config)
            best = min(best, time.perf_counter() - t0)
        rows.append({"n": n, "elapsed_ms": int(round(best * 1000))})
    _write_csv(out, rows)
    return rows


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--m", type=int, default=None, help="permuted pairs scored (default min(2000, n(n-1)))")
    p.add_argument("--leaves", type=int, default=None, help="max leaves per tree (default min(ceil(sqrt n), 64))")
    p.add_argument("--min-leaf-width", type=int, default=None, help="rank units (default ceil(0.03 n))")
    p.add_argument("--split-trials", type=int, default=10)
    p.add_argument("--random-split-fraction", type=float, default=0.5)
    p.add_argument("--k-bias", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="ucorr", description="uCorr nonparametric dependence test")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="coefficient and p-value for a two-column file")
    p.add_argument("--input", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--x-col", type=int, default=0, help="0-based column index")
    p.add_argument("--y-col", type=int, default=1, help="0-based column index")
    _add_forest_flags(p)
    p.add_argument("--pvalue", choices=["analytic", "permutation"], default="analytic")
    p.add_argument("--permutations", type=int, default=99)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("nulldist", help="uCorr distribution on independent data, as histogram CSV")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--output")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_nulldist, m=2000)

    p = sub.add_parser("power", help="detection power over a noise grid")
    p.add_argument("--relation", required=True, help="comma list of " + ", ".join(k.value for k in Relationship))
    p.add_argument("--coeff", default="ucorr", help="comma list of ucorr, pearson, spearman")
    p.add_argument("--noise", default="0:100:25")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--output")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("bench", help="runtime of the default pipeline against n")
    p.add_argument("--sizes", default="1000,2000,4000,8000,16000")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--output")
    _add_forest_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    buffer = io.StringIO()
    try:
        args.func(args, buffer)
    except UsageError as exc:
        print(f"ucorr: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"ucorr: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print(f"ucorr: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    output = getattr(args, "output", None)
    if output:
        with open(output, "w", newline="") as fh:
            fh.write(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
