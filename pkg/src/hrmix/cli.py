"""Command-line front end. Every subcommand writes CSV: ``#`` comment lines
(tool version, resolved configuration, seed) followed by data rows with 17
significant digits.

Exit status: 0 on success, 2 on usage errors (bad flags or parameters),
1 on numerical failures.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._errors import DomainError
from .dependence import SpectralDensity, Variogram, ecf_brown_resnick, ecf_laplace, ecf_mixture, spectral_density
from .distributions import hr_bivariate_cdf, hr_mixture_cdf, rayleigh_mixture_cdf, type2_gumbel_mixture_cdf
from .measures import discretize, make_measure, read_measure
from .simulation import (
    GridSpec,
    brown_resnick_field,
    mixture_process_field,
    replicate,
    rescaled_gaussian_max_field,
    RngHandle,
    sample_hr_mixture_ppp,
)
from .verification import convergence_report

__all__ = ["main", "run", "build_parser", "parse_measure"]

FMT = "%.17g"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("empty number list")
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def parse_measure(arg: str):
    """``family:param`` (``rayleigh:1``, ``type2:0.5``, ``dirac:1``) or the
    path of a measure file in the text grammar of :mod:`hrmix.measures`."""
    if os.path.isfile(arg):
        return read_measure(arg)
    fam, _, par = arg.partition(":")
    fam = fam.strip().lower()
    if fam not in ("rayleigh", "type2", "type2gumbel", "gumbel2", "dirac"):
        raise UsageError(f"unknown measure {arg!r}: use rayleigh:S, type2:B, dirac:L or a file")
    p = _floats(par) if par else [1.0]
    if len(p) != 1:
        raise UsageError(f"measure {arg!r} takes one parameter")
    return make_measure(fam, p[0])


def _points(text: str) -> GridSpec:
    try:
        pts = [[float(c) for c in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError:
        raise UsageError(f"bad point list {text!r}; use 'x,y;x,y' or '0;1;2'") from None
    if len({len(p) for p in pts}) != 1:
        raise UsageError("all points need the same dimension")
    return GridSpec(np.array(pts))


def _xy_grid(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            v = _floats(chunk)
            if len(v) != 2:
                raise UsageError(f"grid point {chunk!r} needs two coordinates")
            out.append((v[0], v[1]))
    return out


def _variogram(text: str) -> Variogram:
    v = _floats(text)
    if len(v) not in (1, 2):
        raise UsageError("--variogram takes 'alpha' or 'alpha,scale'")
    return Variogram(v[0], v[1] if len(v) == 2 else 1.0)


def _read_laplace(path: str):
    atoms = []
    with open(path, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, 1):
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            tok = ln.replace(",", " ").split()
            if len(tok) != 2:
                raise UsageError(f"{path}: line {lineno}: expected 'r weight'")
            try:
                atoms.append((float(tok[0]), float(tok[1])))
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: not a number") from None
    return atoms


# -- subcommands ------------------------------------------------------------------

def _cmd_cdf(a, out):
    model = a.model
    if os.path.isfile(model):
        nu, model = read_measure(model), "mixture"
        val = hr_mixture_cdf(a.x, a.y, nu)
    elif model == "hr":
        val = hr_bivariate_cdf(a.x, a.y, _single(a.params, "hr"))
    elif model == "rayleigh":
        val = rayleigh_mixture_cdf(a.x, a.y, _single(a.params, "rayleigh"))
    elif model in ("type2", "type2gumbel"):
        val = type2_gumbel_mixture_cdf(a.x, a.y, _single(a.params, "type2"))
    elif model == "mixture":
        if a.params is None:
            raise UsageError("--model mixture needs --params MEASURE")
        val = hr_mixture_cdf(a.x, a.y, parse_measure(a.params))
    else:
        raise UsageError(f"unknown model {model!r}")
    out.append("x,y,value")
    out.append(",".join(FMT % v for v in (a.x, a.y, val)))


def _single(params, model):
    if params is None:
        raise UsageError(f"--model {model} needs --params")
    v = _floats(params)
    if len(v) != 1:
        raise UsageError(f"--model {model} takes one parameter")
    return v[0]


def _cmd_spectral(a, out):
    if a.grid < 1:
        raise UsageError("--grid must be positive")
    ctor = {"hr": SpectralDensity.hr, "rayleigh": SpectralDensity.rayleigh,
            "type2": SpectralDensity.type2gumbel}[a.family]
    params = _floats(a.param_list)
    dens = [ctor(p) for p in params]
    theta = (np.arange(a.grid) + 0.5) * (0.5 * math.pi) / a.grid
    cols = np.column_stack([theta] + [spectral_density(theta, s) for s in dens])
    out.append(",".join(["theta"] + [f"{a.family}_{p:g}" for p in params]))
    out.extend(",".join(FMT % v for v in row) for row in cols)


def _cmd_ecf(a, out):
    gam = _variogram(a.variogram)
    lags = _floats(a.lags)
    mix = a.mixture
    if mix == "br":
        f = lambda h: ecf_brown_resnick(h, gam)
    elif os.path.isfile(mix):
        atoms = _read_laplace(mix)
        f = lambda h: ecf_laplace(h, gam, atoms)
    else:
        nu = parse_measure(mix)
        f = lambda h: ecf_mixture(h, gam, nu)
    out.append("lag,gamma,rho")
    for h in lags:
        if h < 0:
            raise UsageError("lags must be nonnegative")
        out.append(",".join(FMT % v for v in (h, gam(h), f(h))))


def _cmd_simulate(a, out):
    if a.replicates < 1:
        raise UsageError("--replicates must be positive")
    if a.kind == "ppp":
        nu = parse_measure(a.measure)
        if not nu.is_atomic:
            nu = discretize(nu, a.atoms)
        draws = replicate(lambda h: sample_hr_mixture_ppp(nu, a.accuracy, h, method=a.method),
                          a.replicates, seed=a.seed, threads=a.threads)
        out.append("replicate,y1,y2,truncation_bound")
        for r, (y1, y2, bd) in enumerate(draws):
            out.append(f"{r}," + ",".join(FMT % v for v in (y1, y2, bd)))
        return
    grid = _points(a.points)
    if a.kind == "br":
        gam = _variogram(a.variogram)
        fn = lambda h: brown_resnick_field(grid, gam, a.accuracy, h, method=a.method)
    elif a.kind == "mixture":
        gam = _variogram(a.variogram)
        nu = parse_measure(a.measure)
        fn = lambda h: mixture_process_field(grid, gam, nu, a.n_mix, a.accuracy, h, method=a.method)
    elif a.kind == "rescaled":
        nu = parse_measure(a.measure)
        fn = lambda h: rescaled_gaussian_max_field(grid, a.alpha, nu, a.n, h)
    else:
        raise UsageError(f"unknown kind {a.kind!r}")
    samples = replicate(fn, a.replicates, seed=a.seed, threads=a.threads)
    bound = max(s.truncation_bound for s in samples)
    out.append(f"# seed={a.seed} accuracy={a.accuracy!r} truncation_bound={bound!r}")
    coords = ",".join(f"coord{k}" for k in range(grid.dim))
    out.append(f"replicate,point_id,{coords},value")
    for r, s in enumerate(samples):
        for lab, pt, v in zip(grid.labels, grid.points, s.values):
            out.append(",".join([str(r), lab] + [FMT % c for c in pt] + [FMT % v]))


def _cmd_verify(a, out):
    nu = parse_measure(a.nu)
    grid = _xy_grid(a.grid)
    rep = convergence_report(nu, _ints(a.n_list), grid, a.replicates, RngHandle(a.seed),
                             threads=a.threads)
    out.extend(rep.to_csv().rstrip("\n").split("\n"))


# -- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hrmix", allow_abbrev=False,
                description="Husler-Reiss mixture distributions, spectral densities, "
                            "extremal correlations and samplers.")
    p.add_argument("--version", action="version", version=f"hrmix {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
        sp.add_argument("--accuracy", type=float, default=1e-4)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: HRMIX_THREADS or 1)")

    sp = sub.add_parser("cdf", help="evaluate a bivariate distribution function", allow_abbrev=False)
    sp.add_argument("--model", required=True,
                    help="hr, rayleigh, type2, mixture or a measure file")
    sp.add_argument("--params", default=None, help="lambda, sigma, b, or a measure for mixture")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    common(sp)

    sp = sub.add_parser("spectral", help="tabulate spectral densities", allow_abbrev=False)
    sp.add_argument("--family", required=True, choices=["hr", "rayleigh", "type2"])
    sp.add_argument("--param-list", required=True)
    sp.add_argument("--grid", type=int, default=256)
    common(sp)

    sp = sub.add_parser("ecf", help="tabulate extremal correlation functions", allow_abbrev=False)
    sp.add_argument("--variogram", default="1,1", help="alpha[,scale]")
    sp.add_argument("--mixture", required=True,
                    help="br, rayleigh[:S], type2[:B], dirac:L, or a Laplace atom file")
    sp.add_argument("--lags", required=True)
    common(sp)

    sp = sub.add_parser("simulate", help="run a sampler", allow_abbrev=False)
    sp.add_argument("--kind", required=True, choices=["ppp", "br", "mixture", "rescaled"])
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--measure", default="dirac:1")
    sp.add_argument("--atoms", type=int, default=128, help="discretization size for ppp")
    sp.add_argument("--points", default="0;1", help="grid as 'x;x' or 'x,y;x,y'")
    sp.add_argument("--variogram", default="1,1")
    sp.add_argument("--n-mix", type=int, default=200)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--method", choices=["normalized", "cascade"], default="normalized")
    common(sp)

    sp = sub.add_parser("verify", help="convergence report for triangular arrays", allow_abbrev=False)
    sp.add_argument("--nu", required=True)
    sp.add_argument("--n-list", required=True)
    sp.add_argument("--replicates", type=int, default=1000)
    sp.add_argument("--grid", default="-1,-1;-1,0;-1,1;0,-1;0,0;0,1;1,-1;1,0;1,1")
    common(sp)
    return p


_COMMANDS = {"cdf": _cmd_cdf, "spectral": _cmd_spectral, "ecf": _cmd_ecf,
             "simulate": _cmd_simulate, "verify": _cmd_verify}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run the CLI and return the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"hrmix: error: {e}", file=stderr)
        return 2
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    config = {k: v for k, v in sorted(vars(args).items()) if k != "output"}
    out = [f"# hrmix {__version__}",
           "# config: " + json.dumps(config, sort_keys=True),
           f"# seed={args.seed}"]
    try:
        _COMMANDS[args.command](args, out)
    except (UsageError, DomainError) as e:
        print(f"hrmix: error: {e}", file=stderr)
        return 2
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"hrmix: numerical failure: {e}", file=stderr)
        return 1
    text = "\n".join(out) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())
