"""Command-line front end: densities, EPPF tables, samplers, frag/coag and the checks.

Exit codes: 0 success, 1 a verification failed, 2 usage or domain error, 3 numeric error.
"""

import argparse
import contextlib
import csv
import inspect
import io
import json
import math
import sys

import numpy as np

from . import eppf, fragcoag, samplers, special, tilts
from .errors import (DegenerateTestError, DomainError, EfficiencyError, NumericError,
                     ResourceGuardError)
from .partitions import SetPartition, enumerate_set_partitions

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x):
    """17 significant digits for floats so repeated runs compare byte for byte."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (list, tuple)):
        return json.dumps(_jsonable(x), separators=(",", ":"))
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return x


def emit(rows, fields, fmt_name, out):
    if fmt_name == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([fmt(r[f]) for f in fields])
    else:
        for r in rows:
            out.write(json.dumps(_jsonable({f: r[f] for f in fields}), separators=(",", ":")) + "\n")


def _blocks(p):
    return [list(b) for b in p.blocks]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_density(args, out):
    _need(args, "alpha", "points")
    x = np.array(_floats(args.points))
    if args.kind == "stable":
        pdf, cdf = special.stable_pdf(args.alpha, x), special.stable_cdf(args.alpha, x)
    elif args.kind == "ml":
        pdf, cdf = special.ml_pdf(args.alpha, x), special.ml_cdf(args.alpha, x)
    else:
        theta = 0.0 if args.theta is None else args.theta
        pdf, cdf = special.gml_pdf(args.alpha, theta, x), np.full(x.shape, np.nan)
    rows = [{"x": a, "pdf": b, "cdf": c} for a, b, c in zip(x, np.atleast_1d(pdf), np.atleast_1d(cdf))]
    emit(rows, ("x", "pdf", "cdf"), args.format, out)
    return EXIT_OK


def _evaluator(args):
    """EPPF chosen by the flags present: --y (conditional), --tilt (Gibbs), else PD."""
    if args.beta is not None:
        if args.y is not None:
            return eppf.frag_cond_evaluator(args.alpha, args.beta, args.y)
        h = tilts.from_spec(args.beta, args.tilt or "unit")
        return eppf.frag_evaluator(args.alpha, args.beta, eppf.GibbsWeights.from_tilt(h, max(args.n, 8)))
    if args.y is not None:
        return eppf.cond_evaluator(args.alpha, args.y)
    if args.tilt is not None:
        return eppf.gibbs_evaluator(eppf.GibbsWeights.from_tilt(tilts.from_spec(args.alpha, args.tilt),
                                                                max(args.n, 8)))
    return eppf.pd_evaluator(args.alpha, 0.0 if args.theta is None else args.theta)


def cmd_eppf(args, out):
    _need(args, "alpha", "n")
    ev = _evaluator(args)
    rows = [{"partition": _blocks(p), "k": p.k, "probability": ev(p.sizes)}
            for p in enumerate_set_partitions(args.n)]
    emit(rows, ("partition", "k", "probability"), args.format, out)
    return EXIT_OK


TAIL_POLICY = {
    "partition": "none: exact partitions of [n]",
    "stable": "none: exact draws",
    "ml": "none: exact draws",
    "gem": "truncated after n sticks; residual stick mass reported as tail",
    "gg-partition": "none: exact partitions of [n]",
}


def _sample_meta(args, out):
    """JSON-lines header describing how the draws were produced."""
    if args.format != "json":
        return
    params = {k: getattr(args, k) for k in ("alpha", "beta", "theta", "lam", "zeta", "n", "m",
                                            "samples", "tilt", "y")
              if getattr(args, k, None) is not None}
    if args.kind != "gg-partition":
        params.pop("m", None)
    meta = {"kind": args.kind, "seed": args.seed, "params": params,
            "tail_policy": TAIL_POLICY[args.kind]}
    out.write(json.dumps({"meta": _jsonable(meta)}, separators=(",", ":")) + "\n")


def cmd_sample(args, out):
    _need(args, "alpha")
    rng = samplers.RngStream(args.seed)
    size = args.samples or 1
    _sample_meta(args, out)
    if args.kind == "partition":
        _need(args, "n")
        ev = _evaluator(args)
        labels = samplers.sample_partitions(ev, args.n, size, rng)
        rows = [{"partition": _blocks(SetPartition.from_labels(r.tolist()))} for r in labels]
        _write_lines(rows, "partition", args.format, out)
        return EXIT_OK
    if args.kind == "stable":
        vals = samplers.sample_stable(args.alpha, rng, size)
    elif args.kind == "ml":
        vals = samplers.sample_ml(args.alpha, 0.0 if args.theta is None else args.theta, rng, size)
    elif args.kind == "gem":
        count = args.n or 100
        rows = []
        for _ in range(size):
            m = samplers.sample_gem(args.alpha, 0.0 if args.theta is None else args.theta, count, rng)
            rows.append({"weights": m.weights.tolist(), "tail": m.tail})
        emit(rows, ("weights", "tail"), "json", out)
        return EXIT_OK
    else:
        _need(args, "zeta", "n")
        labels, t = samplers.sample_gg_partition(args.alpha, args.zeta, args.m, args.n, rng, size)
        rows = [{"partition": _blocks(SetPartition.from_labels(r.tolist())), "total": tt}
                for r, tt in zip(labels, t)]
        emit(rows, ("partition", "total"), args.format, out)
        return EXIT_OK
    emit([{"value": v} for v in np.atleast_1d(vals)], ("value",), args.format, out)
    return EXIT_OK


def _write_lines(rows, field, fmt_name, out):
    if fmt_name == "csv":
        emit(rows, (field,), "csv", out)
    else:
        for r in rows:
            out.write(json.dumps(r[field], separators=(",", ":")) + "\n")


def _read_partitions(path):
    stream = sys.stdin if path in (None, "-") else open(path, encoding="utf-8")
    with contextlib.ExitStack() as stack:
        if stream is not sys.stdin:
            stack.enter_context(stream)
        lines = [ln.strip() for ln in stream if ln.strip()]
    try:
        return [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise UsageError(f"input is not JSON lines: {exc}") from exc


def cmd_frag(args, out):
    _need(args, "alpha", "beta")
    fp = fragcoag.FragParams(args.alpha, args.beta)
    rng = samplers.RngStream(args.seed)
    parts = [SetPartition.from_json(x) for x in _read_partitions(args.input)]
    rows = [{"partition": _blocks(fragcoag.frag_set_partition(p, fp, rng))} for p in parts]
    _write_lines(rows, "partition", args.format, out)
    return EXIT_OK


def cmd_coag(args, out):
    """Merge given (p, q) pairs, or draw dependent triples when no input is given."""
    if args.input is not None:
        rows = []
        for obj in _read_partitions(args.input):
            if not isinstance(obj, dict) or "p" not in obj or "q" not in obj:
                raise UsageError('coag input lines must be {"p": [...], "q": [...]}')
            v = fragcoag.coag_set_partition(SetPartition.from_json(obj["p"]),
                                            SetPartition.from_json(obj["q"]))
            rows.append({"partition": _blocks(v)})
        _write_lines(rows, "partition", args.format, out)
        return EXIT_OK
    _need(args, "alpha", "beta", "n")
    h = tilts.from_spec(args.beta, args.tilt or "unit")
    vt, q, v = fragcoag.dependent_coag_labels(args.alpha, args.beta, h, args.n,
                                              samplers.RngStream(args.seed), args.samples or 1)
    rows = [{"v_tilde": _blocks(SetPartition.from_labels(a.tolist())),
             "q": _blocks(fragcoag._prefix_partition(b)),
             "v": _blocks(SetPartition.from_labels(c.tolist()))} for a, b, c in zip(vt, q, v)]
    emit(rows, ("v_tilde", "q", "v"), args.format, out)
    return EXIT_OK


_PARAM_FLAGS = {"alpha": "alpha", "beta": "beta", "theta": "theta", "zeta": "zeta", "n": "n",
                "samples": "samples", "m": "m", "ell": "ell", "variant": "variant",
                "tilt": "tilt", "s": "s", "lam": "lam"}


def cmd_verify(args, out):
    from .verify import experiments
    names = args.names or list(experiments.EXPERIMENTS)
    unknown = [x for x in names if x not in experiments.EXPERIMENTS]
    if unknown:
        raise UsageError(f"unknown experiments {unknown}; choose from {sorted(experiments.EXPERIMENTS)}")
    reports = []
    for name in names:
        accepted = inspect.signature(experiments.EXPERIMENTS[name]).parameters
        params = {}
        for flag, key in _PARAM_FLAGS.items():
            val = getattr(args, flag, None)
            if val is not None and key in accepted:
                params[key] = val
        reports.append(experiments.run_experiment(name, args.seed, **params))
    rows = []
    for r in reports:
        row = r.row()
        row["runtime_ms"] = row["runtime_ms"] if args.timing else 0
        rows.append(row)
    emit(rows, ("name", "statistic", "p_value", "abs_error", "n_samples", "pass", "seed",
                "runtime_ms"), args.format, out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", dest="out_path")


def build_parser():
    parser = _Parser(prog="gibbsfrag", allow_abbrev=False, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("density", allow_abbrev=False, help="stable / Mittag-Leffler densities")
    _common(p)
    p.add_argument("--kind", choices=("stable", "ml", "gml"), default="ml")
    p.add_argument("--points", help="comma-separated evaluation points")

    p = sub.add_parser("eppf", allow_abbrev=False, help="EPPF over all partitions of [n]")
    _common(p)
    p.add_argument("--tilt", help="unit | pd_theta:x | ml_lambda:x | gg_zeta:z[:m]")
    p.add_argument("--y", type=float, help="condition on the stable total")

    p = sub.add_parser("sample", allow_abbrev=False, help="draw variates or partitions")
    _common(p)
    p.add_argument("--kind", choices=("partition", "stable", "ml", "gem", "gg-partition"),
                   default="partition")
    p.add_argument("--tilt")
    p.add_argument("--y", type=float)
    p.add_argument("--m", type=int, choices=(0, 1), default=0)

    p = sub.add_parser("frag", allow_abbrev=False, help="PD(alpha,-beta) fragmentation of JSON partitions")
    _common(p)
    p.add_argument("--input", help="JSON-lines file of partitions ('-' for stdin)")

    p = sub.add_parser("coag", allow_abbrev=False, help="coagulate pairs or draw dependent triples")
    _common(p)
    p.add_argument("--input", help='JSON lines {"p": ..., "q": ...}')
    p.add_argument("--tilt")

    p = sub.add_parser("verify", allow_abbrev=False, help="run verification experiments")
    _common(p)
    p.add_argument("names", nargs="*")
    p.add_argument("--m", type=int, choices=(0, 1))
    p.add_argument("--ell", type=int)
    p.add_argument("--variant", choices=("alpha-scale", "unit-scale"))
    p.add_argument("--tilt")
    p.add_argument("--s", type=float)
    p.add_argument("--timing", action="store_true", help="report wall time (breaks byte-identity)")
    return parser


COMMANDS = {"density": cmd_density, "eppf": cmd_eppf, "sample": cmd_sample, "frag": cmd_frag,
            "coag": cmd_coag, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        buf = io.StringIO()
        code = COMMANDS[args.command](args, buf)
    except UsageError as exc:
        print(f"gibbsfrag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ResourceGuardError, DegenerateTestError) as exc:
        print(f"gibbsfrag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, EfficiencyError, FloatingPointError, OverflowError) as exc:
        print(f"gibbsfrag: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = buf.getvalue()
    if args.out_path:
        with open(args.out_path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
