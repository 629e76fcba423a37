"""Command-line entry point: ``nls <command> [options]``.

Any option can also come from a plain-text config file of ``key = value``
lines (``--config FILE``); options given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from . import __version__
from .constructions import rounding, rounding_sequence
from .energies import EnergyParams, total_F, total_G
from .fields import (DensityField, Grid, SetMask, read_field, read_profile, write_field,
                     write_profile)
from .harness import (STABILITY_CHECKS, SET_SWEEP_OPTIONS, _fmt, check_fuglede,
                      check_quantitative_isoperimetric, check_sobolev_bound_R,
                      check_stability_suite, emit_report, sweep)
from .kernels import parse_kernel, validated
from .optimize import DescentOptions, minimize_density, minimize_set_profile

CHECKS = ("quantitative_isoperimetric", "fuglede", "sobolev_bound_R") + STABILITY_CHECKS


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{num}: expected 'key = value'")
            key, val = (x.strip() for x in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _floats(text: str) -> list:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _write_rows(path, header, rows) -> None:
    fh = open(path, "w", newline="") if path and path != "-" else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _params(a, dim: int) -> EnergyParams:
    kernel = validated(parse_kernel(a.kernel, dim)) if a.kernel else None
    return EnergyParams(s=a.s, alpha=a.alpha, gamma=a.gamma, m=a.m, kernel=kernel)


def _opts(a, base: DescentOptions = DescentOptions()) -> DescentOptions:
    kw = {"seed": a.seed, "deterministic": not a.nondeterministic}
    if a.iters is not None:
        kw["max_iters"] = a.iters
    if getattr(a, "tau", None) is not None:
        kw["tau"] = a.tau
    return replace(base, **kw)


def _grid(a) -> Grid:
    n, L = a.grid.split(",")
    return Grid(a.dim, float(L), int(n))


# ---------------------------------------------------------------- commands

def cmd_energy(a) -> int:
    f = read_field(a.field)
    p = _params(a, f.grid.dim)
    if a.problem == "F":
        if not isinstance(f, SetMask):
            raise ValueError("the F energy needs a mask file")
        rep = total_F(f, p, not a.nondeterministic)
    else:
        rep = total_G(f, p, not a.nondeterministic)
    row = rep.as_row()
    row.update(grid_n=f.grid.n, grid_L=f.grid.L)
    _write_rows(a.out, list(row), [list(row.values())])
    return 0


def cmd_round(a) -> int:
    h = read_field(a.field)
    h = DensityField(h.grid, h.values)
    res = rounding(h, a.theta, a.mass)
    if a.out:
        write_field(a.out, res.h_prime)
    rows = [(k, int(v), res.residuals[k]) for k, v in res.flags.items()]
    _write_rows(a.report, ["check", "pass", "residual"], rows)
    return 0 if res.ok else 1


def cmd_round_seq(a) -> int:
    h = read_field(a.field)
    h = DensityField(h.grid, h.values)
    seq = rounding_sequence(h, _params(a, h.grid.dim), k_max=a.k_max)
    _write_rows(a.out, ["k", "theta", "a_k", "energy"], seq.rows())
    print(f"stopped: {seq.reason}; energy decreased: {seq.improved}", file=sys.stderr)
    return 0


def _write_trace(path, res) -> None:
    _write_rows(path, ["iter", "energy", "step", "asymmetry"], res.trace_rows())


def cmd_minimize_density(a) -> int:
    grid = _grid(a)
    res = minimize_density(None, _params(a, grid.dim), _opts(a), grid)
    if a.out:
        write_field(a.out, res.final)
    _write_trace(a.trace, res)
    print(f"status={res.status} iterations={res.iterations} asymmetry={res.asymmetry:.6g} "
          f"energy={res.energy:.12g}", file=sys.stderr)
    return 0 if res.status != "diverged" else 2


def cmd_minimize_set(a) -> int:
    p = _params(a, 2)
    init = read_profile(a.init) if a.init else None
    res = minimize_set_profile(init, p, _opts(a, SET_SWEEP_OPTIONS if a.fixed_step else DescentOptions()),
                               K=a.modes)
    if a.out:
        write_profile(a.out, res.final)
    _write_trace(a.trace, res)
    print(f"status={res.status} iterations={res.iterations} sup_norm={res.sup_norm:.6g} "
          f"asymmetry={res.asymmetry:.6g}", file=sys.stderr)
    return 0


def run_check(name: str, a):
    if name == "quantitative_isoperimetric":
        return check_quantitative_isoperimetric(a.s, a.dim, max(a.trials, 20), a.seed)
    if name == "fuglede":
        return check_fuglede(a.s, a.modes, a.trials, a.seed)
    if name == "sobolev_bound_R":
        k = parse_kernel(a.kernel, 2) if a.kernel else None
        return check_sobolev_bound_R(k, a.s, a.trials, a.seed)
    dim = 2 if name in ("low_bound_RR", "bound_annulus") else a.dim
    return check_stability_suite(name, _params(a, dim), a.trials, a.seed)


def _config(a) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(a).items()) if k not in skip}


def cmd_check(a) -> int:
    res = run_check(a.name, a)
    paths = emit_report([res], a.out, _config(a))
    print(f"{res.name}: {'PASS' if res.passed else 'FAIL'} constant={res.constant:.6g}", file=sys.stderr)
    print("\n".join(paths))
    return 0 if res.passed else 1


def cmd_sweep(a) -> int:
    problem = a.problem.upper()
    dim = 2 if problem == "F" else a.dim
    base = SET_SWEEP_OPTIONS if problem == "F" else DescentOptions()
    grid = _grid(a) if problem == "G" else None
    est = sweep(problem, a.param, _floats(a.values), _params(a, dim), _opts(a, base), grid=grid,
                K=a.modes)
    paths = emit_report([est], a.out, _config(a))
    print(f"threshold={est.threshold} bracketed={est.bracketed}", file=sys.stderr)
    print("\n".join(paths))
    return 0


def cmd_report(a) -> int:
    names = a.checks.split(",") if a.checks else list(CHECKS)
    results = []
    for name in names:
        res = run_check(name.strip(), a)
        print(f"{res.name}: {'PASS' if res.passed else 'FAIL'}", file=sys.stderr)
        results.append(res)
    paths = emit_report(results, a.out, _config(a))
    print("\n".join(paths))
    return 0 if all(r.passed for r in results) else 1


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of 'key = value' lines")
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--kernel", default=None, help="riesz:L, indicator:A, exp:RATE, trunc-riesz:L:CAP, zero")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--nondeterministic", action="store_true",
                   help="allow NLS_THREADS worker threads in the FFTs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nls", description="Nonlocal shape energies and their minimizers.")
    ap.add_argument("--version", action="version", version=f"nls {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", help="evaluate F or G on a field file")
    _common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--problem", choices=("F", "G"), default="G")
    p.add_argument("--set", dest="problem", action="store_const", const="F", help="same as --problem F")
    p.add_argument("--density", dest="problem", action="store_const", const="G", help="same as --problem G")
    p.add_argument("--deterministic", action="store_true", help="fixed reduction order (the default)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("round", help="apply one rounding step to a density")
    _common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--mass", type=float, default=None, help="expected mass; checked against the field")
    p.add_argument("--out")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("round-seq", help="iterate rounding with theta = 2^-k")
    _common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--kmax", "--k-max", dest="k_max", type=int, default=8)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_round_seq)

    p = sub.add_parser("minimize-density", help="projected gradient descent on G")
    _common(p)
    p.add_argument("--grid", default="512,12", help="cells per axis and half-width: n,L")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out")
    p.add_argument("--trace", default="-")
    p.set_defaults(func=cmd_minimize_density)

    p = sub.add_parser("minimize-set", help="Fourier-profile descent on F_gamma (planar)")
    _common(p)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--init")
    p.add_argument("--fixed-step", dest="fixed_step", action="store_true",
                   help="fixed step and budget, as used by sweeps")
    p.add_argument("--out")
    p.add_argument("--trace", default="-")
    p.set_defaults(func=cmd_minimize_set)

    p = sub.add_parser("check", help="run one inequality check and write its report")
    _common(p)
    p.add_argument("--name", required=True, choices=CHECKS)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--modes", type=int, default=6)
    p.add_argument("--out", default="nls-report")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="optimizer ladder over gamma (F) or mass (G)")
    _common(p)
    p.add_argument("--problem", required=True, choices=("F", "G", "f", "g"))
    p.add_argument("--param", required=True, choices=("gamma", "mass"))
    p.add_argument("--values", required=True, help="comma-separated, strictly monotone")
    p.add_argument("--grid", default="512,12")
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", default="nls-report")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="run the inequality checks and write all reports")
    _common(p)
    p.add_argument("--checks", default="", help="comma-separated subset; default all")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--modes", type=int, default=6)
    p.add_argument("--out", default="nls-report")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        # string defaults go through each option's type converter
        for action in ap._subparsers._group_actions:
            for sp in action.choices.values():
                for x in sp._actions:
                    if x.dest in cfg:
                        v = cfg[x.dest]
                        if isinstance(x, argparse._StoreTrueAction):
                            v = v.lower() in ("1", "true", "yes", "on")
                        sp.set_defaults(**{x.dest: v})
    a = ap.parse_args(argv)
    try:
        return a.func(a)
    except (ValueError, OSError) as exc:
        print(f"nls: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
