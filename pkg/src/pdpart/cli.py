"""Command-line front end.

Every subcommand builds a :class:`Table`.  Without ``--out`` the table goes
to stdout as CSV (or JSON); with ``--out`` it is written to that path and a
run manifest is written next to it as ``<out>.manifest.json``.

Exit codes: 0 success, 1 invalid input, 2 numerical guard or I/O failure,
3 a verification report raised flags.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import __version__, _backend
from .errors import DomainError, NumericGuardError, ResourceError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_FLAGGED = 0, 1, 2, 3


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    flagged: bool = False


class UsageError(Exception):
    pass


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def to_json(table: Table, manifest: dict) -> str:
    return json.dumps({"manifest": manifest, "columns": table.columns, "rows": table.rows}, indent=1) + "\n"


def emit(table: Table, fmt: str, path: str | None, manifest: dict | None = None) -> bytes:
    """Write ``table`` as CSV or JSON to ``path`` (stdout when None); return the bytes."""
    text = to_csv(table) if fmt == "csv" else to_json(table, manifest or {})
    data = text.encode("utf-8")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _params(args):
    from .sampler import ModelParams

    _need(args, "alpha")
    return ModelParams(args.alpha, args.theta)


# subcommands ---------------------------------------------------------------

def cmd_sample(args) -> Table:
    from .sampler import replicate_paths

    _need(args, "alpha", "seed")
    grid = _ints(args.n_grid) if args.n_grid else ([args.n] if args.n else None)
    if not grid:
        raise UsageError("sample needs --n or --n-grid")
    l_max = args.l or 3
    ks, ms = replicate_paths(_params(args), grid, l_max, args.reps or 1, args.seed, workers=args.workers)
    t = Table(["replicate", "n", "K"] + [f"M{l}" for l in range(1, l_max + 1)])
    for r in range(ks.shape[0]):
        for c, n in enumerate(grid):
            t.rows.append([r, n, int(ks[r, c])] + [int(x) for x in ms[r, c]])
    return t


def cmd_exact_law(args) -> Table:
    from .exact import law_kn, law_multiplicities

    _need(args, "alpha", "n")
    params = _params(args)
    if args.mode == "multiplicities":
        law = law_multiplicities(params, args.n)
        t = Table(["histogram", "K", "prob"])
        for counts, p in law.atoms:
            hist = " ".join(f"{l}^{c}" for l, c in enumerate(counts, start=1) if c)
            t.rows.append([hist, sum(counts), float(p)])
        return t
    law = law_kn(params, args.n)
    t = Table(["k", "prob"])
    for k, p in zip(law.support, law.prob):
        t.rows.append([int(k), float(p)])
    return t


def cmd_moments(args) -> Table:
    from .exact import factorial_moment_kstar, factorial_moment_mstar
    from .posterior import PosteriorContext, compound_moment_oracle, posterior_moment_k, posterior_moment_m
    from .sampler import ModelParams

    _need(args, "alpha", "m", "r")
    n0 = args.n or 0
    post = ModelParams(args.alpha, args.theta + n0)
    cols = ["r", "kstar_factorial"]
    if args.l:
        cols.append("mstar_factorial")
    ctx = None
    if args.j is not None:
        if not n0:
            raise UsageError("--j needs the initial sample size --n")
        ctx = PosteriorContext(_params(args), n0, args.j)
        cols += ["posterior_k", "compound_k"]
        if args.l:
            cols.append("posterior_m")
    t = Table(cols)
    for r in range(1, args.r + 1):
        row = [r, factorial_moment_kstar(post, args.m, r)]
        if args.l:
            row.append(factorial_moment_mstar(post, args.m, args.l, r))
        if ctx is not None:
            row += [posterior_moment_k(ctx, args.m, r), compound_moment_oracle(ctx, args.m, r)]
            if args.l:
                row.append(posterior_moment_m(ctx, args.m, args.l, r))
        t.rows.append(row)
    return t


def cmd_mgf(args) -> Table:
    from .exact import MULTIPLICITY_MAX_N, LAW_KN_MAX_N, law_kn, law_multiplicities, mgf_kn_series, mgf_mln_series
    from scipy.special import logsumexp
    import numpy as np

    _need(args, "alpha", "n", "y")
    params = _params(args)
    t = Table(["n", "y", "statistic", "log_mgf_series", "log_mgf_exact"])
    for y in _floats(args.y):
        tilt = -math.log1p(-y)
        if args.l:
            series = mgf_mln_series(args.alpha, args.n, args.l, y) if params.theta == 0 else None
            exact = None
            if args.n <= MULTIPLICITY_MAX_N:
                vals, probs = law_multiplicities(params, args.n).marginal_m(args.l)
                exact = float(logsumexp(np.log(probs) + tilt * vals))
            t.rows.append([args.n, y, f"M{args.l}", series, exact])
        else:
            series = mgf_kn_series(args.alpha, args.n, y) if params.theta == 0 else None
            exact = law_kn(params, args.n).log_mgf(tilt) if args.n <= LAW_KN_MAX_N else None
            t.rows.append([args.n, y, "K", series, exact])
    return t


def cmd_posterior_verify(args) -> Table:
    from .posterior import PosteriorContext, verify_representation

    _need(args, "alpha", "n", "j", "m", "seed")
    ctx = PosteriorContext(_params(args), args.n, args.j)
    rep = verify_representation(ctx, args.m, args.l, args.r or 3, args.reps or 10000, args.seed,
                                workers=args.workers)
    t = Table(["r", "closed_form", "oracle", "mc_mean", "mc_se", "rel_err", "z", "flagged"],
              flagged=rep.flagged)
    for row in rep.rows:
        t.rows.append([row.r, row.closed_form, row.oracle, row.mc_mean, row.mc_se, row.rel_err, row.z,
                       int(row.flagged)])
    return t


def cmd_mdp_scan(args) -> Table:
    from .mdp import ScaleSchedule, mdp_scan

    _need(args, "alpha")
    if args.method == "mc":
        _need(args, "seed")
    schedule = ScaleSchedule.parse(args.schedule)
    n_grid = _ints(args.n_grid) if args.n_grid else [10**3, 10**4, 10**5, 10**6]
    lam = _floats(args.lam) if args.lam else [0.5, 1.0, 2.0]
    if args.grid_file:
        with open(args.grid_file) as fh:
            grid = json.load(fh)
        n_grid = [int(v) for v in grid.get("n_grid", n_grid)]
        lam = [float(v) for v in grid.get("lambda_grid", lam)]
    scan = mdp_scan(_params(args), schedule, n_grid, lam, args.statistic, args.method,
                    reps=args.reps or 0, master_seed=args.seed, workers=args.workers)
    t = Table(["n", "lambda", "beta_n", "scaled_logmgf", "method", "stderr"])
    for e in sorted(scan.entries, key=lambda e: (e.n, e.lam)):
        t.rows.append([e.n, e.lam, e.beta_n, e.value, e.method, e.stderr])
    t.flagged = not all(ok for _, _, ok in scan.trend().values())
    return t


def cmd_posterior_mdp(args) -> Table:
    from .mdp import ScaleSchedule, posterior_mdp_compare
    from .posterior import PosteriorContext

    _need(args, "alpha", "n", "j", "seed")
    ctx = PosteriorContext(_params(args), args.n, args.j)
    m_grid = _ints(args.n_grid) if args.n_grid else [10**3, 10**4, 10**5]
    lam = _floats(args.lam) if args.lam else [1.0, -1.0]
    rows = posterior_mdp_compare(ctx, ScaleSchedule.parse(args.schedule), m_grid, lam, args.reps or 1000,
                                 args.seed, workers=args.workers)
    t = Table(["m", "lambda", "posterior", "posterior_se", "prior", "prior_se", "z", "flagged"])
    for r in rows:
        t.rows.append([r.m, r.lam, r.posterior, r.posterior_se, r.prior, r.prior_se, r.z, int(r.flagged)])
    t.flagged = any(r.flagged for r in rows)
    return t


def cmd_rate(args) -> Table:
    from . import mdp

    _need(args, "x")
    what = args.what
    if what == "critical":
        return Table(["quantity", "value"], [["critical_alpha", mdp.critical_alpha(args.x)]])
    _need(args, "alpha")
    l = args.l if args.mode == "M" else None
    if args.mode == "M" and not l:
        raise UsageError("--mode M needs --l")
    if what == "rate":
        v = mdp.rate_k(args.alpha, args.x) if l is None else mdp.rate_m(args.alpha, l, args.x)
        return Table(["quantity", "value"], [["rate", v]])
    if what == "legendre":
        return Table(["quantity", "value"], [["legendre", mdp.legendre(args.alpha, args.x, l)]])
    if what == "dual":
        if l is None:
            raise UsageError("--what dual applies to --mode M")
        return Table(["quantity", "value"], [["rate_dual", mdp.rate_m_dual(args.alpha, l, args.x)]])
    h, v = mdp.entropy_form(args.alpha, args.x)
    return Table(["quantity", "value"], [["entropy", h], ["rate", v]])


def cmd_limits(args) -> Table:
    from . import mdp

    _need(args, "n", "seed")
    reps = args.reps or 100
    t = Table(["quantity", "estimate", "stderr", "reference", "flagged"])
    if args.kind == "clt":
        rep = mdp.clt_diagnostic(args.theta, args.n, reps, args.seed, workers=args.workers)
        t.rows += [["mean", rep.mean, rep.mean_se, rep.exact_mean, int("mean" in rep.flags)],
                   ["variance", rep.var, rep.var_se, rep.exact_var, int("variance" in rep.flags)],
                   ["skewness", rep.skewness, None, 0.0, 0]]
        t.flagged = bool(rep.flags)
        return t
    rep = mdp.limit_ratio_diagnostic(_params(args), args.n, args.l or 2, reps, args.seed, workers=args.workers)
    t.rows.append(["K/n^alpha", rep.k_scaled_mean, rep.k_scaled_se, rep.k_scaled_exact,
                   int("K/n^alpha" in rep.flags)])
    for l, (mu, se, lim) in enumerate(zip(rep.ratio_mean, rep.ratio_se, rep.ratio_limit), start=1):
        t.rows.append([f"M{l}/K", mu, se, lim, int(f"M{l}/K" in rep.flags)])
    t.flagged = bool(rep.flags)
    return t


COMMANDS = {
    "sample": (cmd_sample, "sequential sampler paths: K and M_1..M_l at each n"),
    "exact-law": (cmd_exact_law, "exact law of K_n (or of the block-size histogram)"),
    "moments": (cmd_moments, "closed-form factorial and posterior moments"),
    "mgf": (cmd_mgf, "log E[(1-y)^-X] by series and by exact law"),
    "posterior-verify": (cmd_posterior_verify, "closed form vs exact vs Monte Carlo posterior moments"),
    "mdp-scan": (cmd_mdp_scan, "scaled log-MGF over an (n, lambda) grid"),
    "posterior-mdp": (cmd_posterior_mdp, "posterior vs prior scaled log-MGF by Monte Carlo"),
    "rate": (cmd_rate, "rate functions, Legendre transform, entropy form, critical alpha"),
    "limits": (cmd_limits, "almost-sure ratio limits or the alpha = 0 CLT diagnostic"),
}

SCHEMAS = {
    "sample": "replicate,n,K,M1..Ml",
    "exact-law": "k,prob  (--mode multiplicities: histogram,K,prob)",
    "moments": "r,kstar_factorial[,mstar_factorial][,posterior_k,compound_k[,posterior_m]]",
    "mgf": "n,y,statistic,log_mgf_series,log_mgf_exact",
    "posterior-verify": "r,closed_form,oracle,mc_mean,mc_se,rel_err,z,flagged",
    "mdp-scan": "n,lambda,beta_n,scaled_logmgf,method,stderr",
    "posterior-mdp": "m,lambda,posterior,posterior_se,prior,prior_se,z,flagged",
    "rate": "quantity,value",
    "limits": "quantity,estimate,stderr,reference,flagged",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdpart", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=f"{help_text}. CSV columns: {SCHEMAS[name]}")
        p.add_argument("--alpha", type=float)
        p.add_argument("--theta", type=float, default=0.0)
        p.add_argument("--n", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--j", type=int)
        p.add_argument("--l", type=int)
        p.add_argument("--r", type=int)
        p.add_argument("--x", type=float)
        p.add_argument("--y", help="comma-separated values in (0, 1)")
        p.add_argument("--lambda", dest="lam", help="comma-separated lambda grid")
        p.add_argument("--schedule", default="1,0.25,0", help="beta_n = c n^p (ln n)^q given as c,p,q")
        p.add_argument("--n-grid", help="comma-separated sample sizes")
        p.add_argument("--grid-file", help="JSON with n_grid / lambda_grid")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--mode", default="K", help="rate: K or M; exact-law: k or multiplicities")
        p.add_argument("--what", choices=["rate", "legendre", "entropy", "critical", "dual"], default="rate")
        p.add_argument("--statistic", default="K", help="K or M<l>")
        p.add_argument("--method", choices=["series", "dp", "mc"], default="series")
        p.add_argument("--kind", choices=["ratio", "clt"], default="ratio")
    return parser


_NON_PARAMS = {"out", "format", "workers", "command"}


def _manifest_core(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NON_PARAMS}
    return {"subcommand": args.command, "parameters": params, "master_seed": args.seed,
            "version": __version__}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    fn, _ = COMMANDS[args.command]
    started = datetime.now(timezone.utc).isoformat()
    try:
        table = fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pdpart {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DomainError, ValueError) as exc:
        print(f"pdpart {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericGuardError, ResourceError) as exc:
        print(f"pdpart {args.command}: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    core = _manifest_core(args)
    try:
        if args.out is None and args.command == "rate" and len(table.rows) == 1 and args.format == "csv":
            print(_fmt(table.rows[0][1]))
        else:
            data = emit(table, args.format, args.out, core)
            if args.out is not None:
                manifest = dict(core, workers=args.workers, backend=_backend.BACKEND, started=started,
                                finished=datetime.now(timezone.utc).isoformat(),
                                outputs={args.out: hashlib.sha256(data).hexdigest()})
                with open(args.out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
                    json.dump(manifest, fh, indent=1, default=str)
                    fh.write("\n")
    except OSError as exc:
        print(f"pdpart {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_FLAGGED if table.flagged else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
