"""``relaycap`` command line.

Exit status is 0 on success, 2 for usage or validation errors and 1 when a
numeric routine fails.  dB values are converted to linear units here and
nowhere else.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from relaycap import acceptance, experiments, rmt
from relaycap.channel import NetworkConfig, db_to_linear
from relaycap.errors import ContractError, DomainError, NoConvergenceError, NotPositiveDefiniteError, \
    RelayCapError, ShapeError
from relaycap.montecarlo import DEFAULT_CAPACITY_TRIALS, DEFAULT_SPECTRUM_TRIALS, TrialError, ergodic_capacity, \
    pooled_spectrum

CDF_GRID_POINTS = 512
_CONFIG_SECTIONS = {
    "model": {"dist", "method"},
    "sweep": {"n", "snr_db", "gammas", "l_values", "k_rule", "trials", "seed"},
    "output": {"format", "units", "threads"},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(header, rows, fmt):
    if fmt == "json":
        records = [{h: _json_value(v) for h, v in zip(header, row)} for row in rows]
        return json.dumps(records, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _unit_scale(units):
    return 1.0 if units == "nats" else 1.0 / math.log(2.0)


# ---------------------------------------------------------------- argument parsing


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _float_list(text):
    return [_float(t) for t in text.split(",") if t.strip()]


def _s_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("s-grid must be start:stop:count")
    lo, hi, count = _float(parts[0]), _float(parts[1]), _positive_int(parts[2])
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError("s-grid needs 0 < start <= stop")
    return np.linspace(lo, hi, count).tolist()


def _add_output(p):
    p.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_network(p, trials):
    p.add_argument("--ns", type=_positive_int, required=True)
    p.add_argument("--nd", type=_positive_int, required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--l", type=_positive_int, required=True)
    p.add_argument("--snr-db", type=_float, required=True)
    p.add_argument("--trials", type=_positive_int, default=trials)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--dist", choices=("gaussian", "qpsk"), default="gaussian")
    p.add_argument("--method", choices=("auto", "explicit", "wishart"), default="auto")
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser():
    parser = _Parser(prog="relaycap", description="Capacity of amplify-and-forward MIMO relay chains.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("capacity", help="Monte Carlo ergodic capacity")
    _add_network(p, DEFAULT_CAPACITY_TRIALS)
    p.add_argument("--units", choices=("nats", "bits"), default="nats")
    _add_output(p)

    p = sub.add_parser("spectrum", help="pooled eigenvalues of the whitened signal covariance")
    _add_network(p, DEFAULT_SPECTRUM_TRIALS)
    p.add_argument("--ref-out", type=Path, default=None,
                   help="reference CDF file (default: <out stem>_mp_cdf<suffix>)")
    _add_output(p)

    p = sub.add_parser("stieltjes", help="solve the product-law Stieltjes equation on a grid")
    p.add_argument("--betas", type=_float_list, required=True, help="comma-separated aspect ratios")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--s-grid", type=_s_grid, help="start:stop:count (linear, real s > 0)")
    g.add_argument("--s", type=_float_list, help="comma-separated real s > 0")
    _add_output(p)

    p = sub.add_parser("sweep", help="normalized capacity over (gamma, L)")
    p.add_argument("--config", type=Path, default=None, help="JSON document with model/sweep/output sections")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--snr-db", type=_float)
    p.add_argument("--gammas", type=_float_list)
    p.add_argument("--l-values", type=lambda t: [_positive_int(x) for x in t.split(",") if x.strip()])
    p.add_argument("--k-rule", choices=experiments.K_RULES)
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--units", choices=("nats", "bits"))
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("reference", help="point-to-point MIMO reference capacity per antenna")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--snr-db", type=_float, required=True)
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_CAPACITY_TRIALS)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--units", choices=("nats", "bits"), default="nats")
    _add_output(p)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--only", type=lambda t: [_positive_int(x) for x in t.split(",")], default=None,
                   help="comma-separated criterion numbers")
    return parser


# ---------------------------------------------------------------- subcommands


def _network(args):
    return NetworkConfig(args.ns, args.nd, args.k, args.l, db_to_linear(args.snr_db), args.dist, args.seed)


def cmd_capacity(args):
    cfg = _network(args)

    def run():
        est = ergodic_capacity(cfg, args.trials, args.threads, args.method)
        scale = _unit_scale(args.units)
        header = ["n_s", "n_d", "k", "L", "snr_db", "trials", "seed", f"capacity_{args.units}", "stderr"]
        row = [cfg.n_s, cfg.n_d, cfg.k, cfg.L, float(args.snr_db), est.trials, cfg.seed,
               est.mean * scale, est.stderr * scale]
        emit(render(header, [row], args.format), args.out)
    return run


def _companion(args):
    if args.ref_out is not None:
        return args.ref_out
    if args.out is not None:
        return args.out.with_name(args.out.stem + "_mp_cdf" + args.out.suffix)
    return None


def cmd_spectrum(args):
    cfg = _network(args)

    def run():
        ed = pooled_spectrum(cfg, args.trials, args.threads, args.method)
        emit(render(["eigenvalue"], [[float(v)] for v in ed.values], args.format), args.out)
        law = rmt.MarchenkoPastur(cfg.n_s / cfg.n_d)
        top = 1.1 * max(float(ed.values[-1]), cfg.snr * law.upper)
        x = np.linspace(0.0, top, CDF_GRID_POINTS)
        cdf = np.atleast_1d(law.cdf(x / cfg.snr))
        ref = render(["x", "mp_cdf"], [[float(a), float(b)] for a, b in zip(x, cdf)], args.format)
        path = _companion(args)
        if path is not None:
            emit(ref, path)
    return run


def cmd_stieltjes(args):
    ratios = rmt.AspectRatios(tuple(args.betas))
    grid = args.s_grid if args.s_grid is not None else args.s
    if any(not s > 0 for s in grid):
        raise DomainError("s values must be positive")

    def run():
        rows = []
        for s in grid:
            sol = rmt.product_stieltjes(ratios, s)
            rows.append([float(s), sol.g.real, sol.g.imag, sol.residual])
        emit(render(["s", "G_real", "G_imag", "residual"], rows, args.format), args.out)
    return run


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"relaycap: cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"relaycap: malformed config {path}: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise UsageError("relaycap: config must be a JSON object")
    unknown = set(doc) - set(_CONFIG_SECTIONS)
    if unknown:
        raise UsageError(f"relaycap: unknown config section(s): {', '.join(sorted(unknown))}")
    for section, body in doc.items():
        if not isinstance(body, dict):
            raise UsageError(f"relaycap: config section {section!r} must be an object")
        extra = set(body) - _CONFIG_SECTIONS[section]
        if extra:
            raise UsageError(f"relaycap: unknown key(s) in {section!r}: {', '.join(sorted(extra))}")
    return doc


def cmd_sweep(args):
    doc = load_config(args.config) if args.config is not None else {}
    sw, out, model = doc.get("sweep", {}), doc.get("output", {}), doc.get("model", {})

    def pick(flag, section, key, default=None):
        return flag if flag is not None else section.get(key, default)

    n = pick(args.n, sw, "n")
    snr_db = pick(args.snr_db, sw, "snr_db")
    gammas = pick(args.gammas, sw, "gammas")
    l_values = pick(args.l_values, sw, "l_values")
    if None in (n, snr_db, gammas, l_values):
        raise UsageError("relaycap: sweep needs n, snr_db, gammas and l_values (flags or config)")
    if model.get("dist", "gaussian") not in ("gaussian", "complex-gaussian"):
        raise ContractError("sweeps support Gaussian entries only")
    if not isinstance(snr_db, (int, float)) or isinstance(snr_db, bool):
        raise ContractError("snr_db must be a number")
    spec = experiments.SweepSpec(
        n=n, snr=db_to_linear(float(snr_db)), gammas=tuple(gammas), l_values=tuple(l_values),
        k_rule=pick(args.k_rule, sw, "k_rule", "n*L^g"),
        trials=pick(args.trials, sw, "trials", DEFAULT_CAPACITY_TRIALS), seed=pick(args.seed, sw, "seed", 0))
    units = pick(args.units, out, "units", "nats")
    fmt = pick(args.format, out, "format", "csv")
    threads = pick(args.threads, out, "threads", 1)
    method = model.get("method", "auto")
    if units not in ("nats", "bits") or fmt not in ("csv", "json"):
        raise ContractError("output.units must be nats|bits and output.format csv|json")
    if int(threads) != threads or threads < 1:
        raise ContractError("threads must be an integer >= 1")

    def run():
        scale = _unit_scale(units)
        rows = [["sweep", r.gamma, r.l, r.k, r.c0_mean * scale, r.c0_stderr * scale, r.trials, r.error or ""]
                for r in experiments.capacity_sweep(spec, threads=threads, method=method)]
        ref = experiments.point_to_point_reference(spec.n, spec.snr, spec.trials, spec.seed, threads)
        rows.append(["reference", None, 0, None, ref.mean * scale, ref.stderr * scale, ref.trials, ""])
        header = ["kind", "gamma", "L", "k", f"c0_{units}", "c0_stderr", "trials", "error"]
        emit(render(header, rows, fmt), args.out)
    return run


def cmd_reference(args):
    snr = db_to_linear(args.snr_db)

    def run():
        est = experiments.point_to_point_reference(args.n, snr, args.trials, args.seed, args.threads)
        asym = rmt.asymptotic_capacity(1.0, snr, 0)
        scale = _unit_scale(args.units)
        header = ["n", "snr_db", "trials", "seed", f"c0_{args.units}", "stderr", f"asymptotic_{args.units}"]
        row = [args.n, float(args.snr_db), est.trials, args.seed, est.mean * scale, est.stderr * scale, asym * scale]
        emit(render(header, [row], args.format), args.out)
    return run


def cmd_verify(args):
    chosen = acceptance.CRITERIA
    if args.only:
        bad = [i for i in args.only if not 1 <= i <= len(chosen)]
        if bad:
            raise UsageError(f"relaycap: no such criterion: {bad}")
        chosen = [chosen[i - 1] for i in args.only]

    def run():
        results = []
        for fn in chosen:
            res = acceptance.run_criterion(fn, args.seed, args.threads)
            print(res.line(), flush=True)
            results.append(res)
        failed = [r.number for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {failed}" if failed else ""))
        return 0 if not failed else 1
    return run


COMMANDS = {
    "capacity": cmd_capacity,
    "spectrum": cmd_spectrum,
    "stieltjes": cmd_stieltjes,
    "sweep": cmd_sweep,
    "reference": cmd_reference,
    "verify": cmd_verify,
}

_NUMERIC = (NotPositiveDefiniteError, NoConvergenceError, TrialError, ArithmeticError)
_USAGE = (UsageError, ContractError, DomainError, ShapeError)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        run = COMMANDS[args.command](args)
    except _NUMERIC as exc:
        print(f"relaycap: numeric failure: {exc}", file=sys.stderr)
        return 1
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except _USAGE as exc:
        print(f"relaycap: {exc}", file=sys.stderr)
        return 2
    try:
        code = run()
    except OSError as exc:
        print(f"relaycap: cannot write output: {exc}", file=sys.stderr)
        return 2
    except (RelayCapError, ArithmeticError) as exc:
        print(f"relaycap: numeric failure: {exc}", file=sys.stderr)
        return 1
    return 0 if code is None else code


if __name__ == "__main__":
    sys.exit(main())
