"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 data error, 3 numeric error.
Every subcommand that writes to ``--out`` also writes ``manifest.json``; the
``replay`` subcommand re-runs a manifest and checks the outputs byte-for-byte.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import (
    GdpHyper,
    gdp_cdf,
    gdp_moments,
    gdp_pdf,
    gdp_quantile,
    gdp_sample_direct,
    gdp_sample_hierarchical,
    kappa_pdf_general,
    kappa_pdf_standard,
)
from .errors import DataError, GdpError, UsageError
from .gibbs import GibbsConfig, run_gibbs
from .map_estimation import MapConfig, em_laplace, em_normal, least_squares, one_step
from .metrics import METHODS, em_bench, oracle_study, run_simulation
from .model import SimSpec, destandardize, load_csv, standardize

MANIFEST = "manifest.json"


def fmt(x) -> str:
    """17 significant digits: round-trip exact for doubles."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise SystemExit(status)


# ----------------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, argv, files):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    manifest = {
        "tool": "gdpshrink",
        "version": __version__,
        "subcommand": args.command,
        "argv": [a for a in _strip_out(argv)],
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "input_sha256": _sha256(args.input) if getattr(args, "input", None) else None,
        "outputs": {f: _sha256(out / f) for f in files},
    }
    _write_json(out / MANIFEST, manifest)


def _strip_out(argv):
    argv = list(argv)
    res = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res


def _load(args):
    if not args.input or not args.response:
        raise UsageError("--input and --response are required")
    return load_csv(args.input, args.response)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_dist(args, argv):
    h = GdpHyper(args.alpha, args.eta)
    what = args.what
    lines = []
    if what in ("pdf", "cdf"):
        if args.theta is None:
            raise UsageError(f"dist {what} needs --theta")
        f = gdp_pdf if what == "pdf" else gdp_cdf
        lines = [fmt(f(t, h)) for t in args.theta]
    elif what == "quantile":
        if args.u is None:
            raise UsageError("dist quantile needs --u")
        lines = [fmt(gdp_quantile(u, h)) for u in args.u]
    elif what == "moments":
        mean, var = gdp_moments(h)
        lines = [f"mean {'undefined' if mean is None else fmt(mean)}",
                 f"variance {'undefined' if var is None else fmt(var)}"]
    elif what == "kappa":
        if args.kappa is None:
            raise UsageError("dist kappa needs --kappa")
        lines = [fmt(kappa_pdf_general(k, h)) for k in args.kappa]
    elif what == "kappa-standard":
        if args.kappa is None:
            raise UsageError("dist kappa-standard needs --kappa")
        lines = [fmt(kappa_pdf_standard(k)) for k in args.kappa]
    elif what == "sample":
        if args.method == "direct":
            draws = gdp_sample_direct(h, args.n, args.seed)
            rows = [(v,) for v in draws]
            header = ["theta"]
        else:
            d = gdp_sample_hierarchical(h, args.n, args.seed)
            rows = list(zip(d.theta, d.tau, d.lam))
            header = ["theta", "tau", "lambda"]
        if args.out:
            out = _outdir(args)
            _write_csv(out / "samples.csv", header, rows)
            _write_manifest(out, args, argv, ["samples.csv"])
            return 0
        lines = [",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]
    print("\n".join(lines))
    return 0


def cmd_fit_gibbs(args, argv):
    data = _load(args)
    ds, rec = standardize(data)
    mode = "learn_both" if args.learn_both else ("learn_alpha" if args.learn_alpha else "fixed")
    cfg = GibbsConfig(iters=args.iters, burn_in=args.burn, thin=args.thin, hyper_mode=mode,
                      alpha=args.alpha, eta=args.eta, grid_size=args.grid_size, seed=args.seed)
    draws = run_gibbs(ds, cfg)
    beta, intercept = destandardize(draws.beta, rec)
    out = _outdir(args)
    header = [f"beta_{j + 1}" for j in range(data.p)] + ["sigma2", "alpha", "eta"]
    rows = (list(beta[i]) + [draws.sigma2[i], draws.alpha[i], draws.eta[i]] for i in range(draws.kept))
    _write_csv(out / "draws.csv", header, rows)
    summ = draws.summary()
    # report coefficients on the original predictor scale
    summ["beta"] = {
        "mean": beta.mean(axis=0).tolist(),
        "sd": beta.std(axis=0, ddof=1).tolist() if draws.kept > 1 else [0.0] * data.p,
        "q025": np.quantile(beta, 0.025, axis=0).tolist(),
        "q975": np.quantile(beta, 0.975, axis=0).tolist(),
    }
    summ["intercept_mean"] = float(np.mean(intercept))
    summ["names"] = list(data.names)
    _write_json(out / "summary.json", summ)
    _write_manifest(out, args, argv, ["draws.csv", "summary.json"])
    return 0


def _write_map(out, args, argv, data, rec, res, extra):
    beta, intercept = destandardize(res.beta, rec)
    rows = [("(intercept)", intercept, 1)]
    rows += [(name, b, int(j in res.support)) for j, (name, b) in enumerate(zip(data.names, beta))]
    _write_csv(out / "coefficients.csv", ["name", "beta", "in_support"], rows)
    summ = {"sigma2": res.sigma2, "iterations": res.iterations, "converged": res.converged,
            "support": [data.names[j] for j in res.support], **extra}
    _write_json(out / "summary.json", summ)
    _write_manifest(out, args, argv, ["coefficients.csv", "summary.json"])


def cmd_fit_map(args, argv):
    data = _load(args)
    ds, rec = standardize(data)
    eta = math.sqrt(args.alpha + 1.0) if args.continuity else args.eta
    cfg = MapConfig(alpha=args.alpha, eta=eta, tol=args.tol, max_iters=args.max_iters, representation=args.rep)
    res = (em_normal if args.rep == "normal" else em_laplace)(ds, cfg)
    _write_map(_outdir(args), args, argv, data, rec, res,
               {"alpha": args.alpha, "eta": eta, "representation": args.rep})
    return 0


def _read_vector(path, p):
    text = Path(path).read_text().replace(",", " ").split()
    try:
        v = np.array([float(t) for t in text])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None
    if v.shape != (p,):
        raise DataError(f"{path}: expected {p} numbers, found {v.size}")
    return v


def cmd_onestep(args, argv):
    data = _load(args)
    ds, rec = standardize(data)
    if args.beta0 == "ols":
        if data.n <= data.p:
            raise UsageError("n <= p: --beta0 ols is undefined; supply a file")
        beta0 = least_squares(ds.X, ds.y)
    else:
        beta0 = _read_vector(args.beta0, data.p) * rec.x_scales
    res = one_step(ds, args.alpha_dag, args.eta_dag, beta0)
    _write_map(_outdir(args), args, argv, data, rec, res,
               {"alpha_dag": args.alpha_dag, "eta_dag": args.eta_dag})
    return 0


def cmd_simulate(args, argv):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    spec = SimSpec(args.model, args.n, args.p, args.sigma, args.seed)
    rep = run_simulation(spec, args.reps, methods, gibbs_iters=args.gibbs_iters, gibbs_burn=args.gibbs_burn,
                         B=args.boot, jobs=args.jobs)
    out = _outdir(args)
    hdr = ["replicate", "method", "model_error", "exact_support", "precision", "recall"]
    _write_csv(out / "replicates.csv", hdr, ([r[k] for k in hdr] for r in rep.rows()))
    hdr2 = ["method", "median_model_error", "bootstrap_se", "exact_support_rate", "reps"]
    _write_csv(out / "summary.csv", hdr2, ([r[k] for k in hdr2] for r in rep.summary_rows()))
    _write_manifest(out, args, argv, ["replicates.csv", "summary.csv"])
    return 0


def cmd_bench_em(args, argv):
    rows, summary = em_bench(args.n_grid, args.p_grid, [args.seed + r for r in range(args.reps)],
                             sigma=args.sigma, tol=args.tol, jobs=args.jobs)
    out = _outdir(args)
    hdr = ["n", "p", "seed", "iters_normal", "iters_laplace", "converged_normal", "converged_laplace",
           "max_abs_diff"]
    _write_csv(out / "iterations.csv", hdr, ([r[k] for k in hdr] for r in rows))
    _write_csv(out / "summary.csv", ["n", "p", "median_iters_normal", "median_iters_laplace"],
               ([n, p, v["median_normal"], v["median_laplace"]] for (n, p), v in summary.items()))
    _write_manifest(out, args, argv, ["iterations.csv", "summary.csv"])
    return 0


def cmd_oracle(args, argv):
    table = oracle_study(args.n_grid, [args.seed + r for r in range(args.reps)], p=args.p, sigma=args.sigma,
                         jobs=args.jobs)
    out = _outdir(args)
    _write_csv(out / "oracle.csv", ["n", "exact_support_rate"], table)
    _write_manifest(out, args, argv, ["oracle.csv"])
    return 0


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text())
    out = Path(args.out) if args.out else Path(args.manifest).parent
    src = manifest["flags"].get("input")
    if src and _sha256(src) != manifest["input_sha256"]:
        raise DataError(f"input {src} changed since the manifest was written (sha256 differs)")
    code = main(manifest["argv"] + ["--out", str(out)])
    if code != 0:
        return code
    bad = [f for f, digest in manifest["outputs"].items() if _sha256(out / f) != digest]
    if bad:
        print(f"replay mismatch: {', '.join(bad)}", file=sys.stderr)
        return 3
    print(f"replay verified: {len(manifest['outputs'])} file(s) identical")
    return 0


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gdpshrink", description="Generalized double Pareto shrinkage for linear regression.")
    p.add_argument("--version", action="version", version=f"gdpshrink {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    d = sub.add_parser("dist", help="evaluate or sample the GDP distribution")
    d.add_argument("what", choices=["pdf", "cdf", "quantile", "moments", "sample", "kappa", "kappa-standard"])
    d.add_argument("--alpha", type=float, required=True)
    d.add_argument("--eta", type=float, required=True)
    d.add_argument("--theta", type=float, nargs="+")
    d.add_argument("--u", type=float, nargs="+")
    d.add_argument("--kappa", type=float, nargs="+")
    d.add_argument("--n", type=int, default=10)
    d.add_argument("--method", choices=["direct", "hierarchical"], default="direct")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dist)

    def io_flags(sp, out_required=True):
        sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--response", required=True, help="name of the response column")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("fit-gibbs", help="posterior draws from the Gibbs sampler")
    g.add_argument("--iters", type=int, default=5000)
    g.add_argument("--burn", type=int, default=1000)
    g.add_argument("--thin", type=int, default=1)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--eta", type=float, default=1.0)
    g.add_argument("--learn-alpha", action="store_true")
    g.add_argument("--learn-both", action="store_true")
    g.add_argument("--grid-size", type=int, default=100)
    io_flags(g)
    g.set_defaults(func=cmd_fit_gibbs)

    m = sub.add_parser("fit-map", help="posterior mode by EM")
    m.add_argument("--alpha", type=float, default=1.0)
    m.add_argument("--eta", type=float, default=1.0)
    m.add_argument("--continuity", action="store_true", help="set eta = sqrt(alpha + 1)")
    m.add_argument("--rep", choices=["normal", "laplace"], default="laplace")
    m.add_argument("--tol", type=float, default=1e-6)
    m.add_argument("--max-iters", type=int, default=10_000)
    io_flags(m)
    m.set_defaults(func=cmd_fit_map)

    o = sub.add_parser("onestep", help="one-step weighted-lasso estimator")
    o.add_argument("--alpha-dag", type=float, required=True)
    o.add_argument("--eta-dag", type=float, required=True)
    o.add_argument("--beta0", default="ols", help="'ols' or a file of p starting coefficients (original scale)")
    io_flags(o)
    o.set_defaults(func=cmd_onestep)

    s = sub.add_parser("simulate", help="model-error simulation study")
    s.add_argument("--model", type=int, choices=[1, 2, 3, 4, 5], required=True)
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--p", type=int, default=20)
    s.add_argument("--sigma", type=float, default=3.0)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--methods", default="gdp-pm,gdp-map,onestep,lasso",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    s.add_argument("--gibbs-iters", type=int, default=3000)
    s.add_argument("--gibbs-burn", type=int, default=1000)
    s.add_argument("--boot", type=int, default=500, help="bootstrap resamples for the SE of the median")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default="simulate-out", help="output directory (default: %(default)s)")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench-em", help="iterations to convergence: normal vs Laplace EM")
    b.add_argument("--n-grid", type=_ints, default=[200, 400, 600, 800, 1000])
    b.add_argument("--p-grid", type=_ints, default=[20, 40, 60, 80, 100])
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--sigma", type=float, default=3.0)
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", default="bench-em-out", help="output directory (default: %(default)s)")
    b.set_defaults(func=cmd_bench_em)

    r = sub.add_parser("oracle", help="support-recovery rate along a sample-size schedule")
    r.add_argument("--n-grid", type=_ints, default=[100, 400, 1600])
    r.add_argument("--p", type=int, default=20)
    r.add_argument("--sigma", type=float, default=1.0)
    r.add_argument("--reps", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default="oracle-out", help="output directory (default: %(default)s)")
    r.set_defaults(func=cmd_oracle)

    rp = sub.add_parser("replay", help="re-run a manifest and verify outputs byte-for-byte")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except GdpError as exc:
        print(f"gdpshrink: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gdpshrink: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
