"""Command line interface: ``nlframe <certify|solve|recover|triple|run|report>``.

Exit codes: 0 ok, 2 invalid input, 3 certificate refused, 4 divergence or
infeasible problem.
"""
import argparse
import json
import os
import sys

import tomli

from . import __version__
from ._accel import set_threads
from .errors import InvalidInputError, NLFrameError
from .experiment import run_experiment
from .reports import md_table


def _spec(text, what):
    """A JSON object, a JSON/TOML file, or ``kind:key=value,...`` shorthand."""
    if text is None:
        return None
    t = text.strip()
    if t.startswith("{"):
        try:
            return json.loads(t)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"--{what}: bad JSON: {exc}") from None
    if os.path.exists(t):
        with open(t, "rb") as fh:
            raw = fh.read().decode()
        try:
            return json.loads(raw) if t.endswith(".json") else tomli.loads(raw)
        except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
            raise InvalidInputError(f"--{what}: cannot parse {t}: {exc}") from None
    if ":" in t or "=" not in t:
        kind, _, rest = t.partition(":")
        d = {"kind": kind}
        for part in filter(None, rest.split(",")):
            if "=" not in part:
                raise InvalidInputError(f"--{what}: bad field {part!r}")
            k, v = part.split("=", 1)
            d[k.strip()] = _scalar(v.strip())
        return d
    raise InvalidInputError(f"--{what}: cannot interpret {text!r}")


def _scalar(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _operator(path):
    return None if path is None else {"file": os.path.abspath(path)}


def _outputs(args, trace=False):
    out = {"report": os.path.abspath(args.out) if args.out else None, "summary": None, "manifest": None}
    out["trace"] = os.path.abspath(args.trace) if trace and getattr(args, "trace", None) else None
    return out


def _plan(args):
    return _spec(args.plan, "plan") if getattr(args, "plan", None) else None


def _finish(manifest, report, args):
    if not args.out:
        print(json.dumps(report, indent=2, sort_keys=True, default=str))
    else:
        print(md_table(report))
    return 0


def cmd_certify(args):
    cfg = {"task": "certify", "map": _spec(args.map, "map"), "operator": _operator(args.operator),
           "plan": _plan(args), "outputs": _outputs(args)}
    if args.constants:
        cfg["certify"] = {"constants": [c.strip() for c in args.constants.split(",")]}
    return _finish(*run_experiment(_clean(cfg)), args)


def _clean(cfg):
    return {k: v for k, v in cfg.items() if v is not None}


def cmd_solve(args):
    solver = {"algo": args.algo, "mu": "auto" if args.mu is None else args.mu, "max_iter": args.max_iter,
              "tol": args.tol, "force": args.force}
    cfg = {"task": "solve", "map": _spec(args.map, "map"), "operator": _operator(args.operator),
           "plan": _plan(args), "solver": solver, "outputs": _outputs(args, trace=True),
           "data": os.path.abspath(args.data) if args.data else None,
           "signal": {"file": os.path.abspath(args.truth)} if args.truth else None}
    return _finish(*run_experiment(_clean(cfg)), args)


def cmd_recover(args):
    cfg = {"task": "recover", "map": _spec(args.map, "map"), "operator": _operator(args.operator),
           "triple": args.triple, "plan": _plan(args), "outputs": _outputs(args),
           "recover": {"eps": args.eps, "method": args.method, "bounds": args.bounds},
           "data": os.path.abspath(args.data) if args.data else None,
           "signal": {"file": os.path.abspath(args.truth)} if args.truth else None}
    return _finish(*run_experiment(_clean(cfg)), args)


def cmd_triple(args):
    cfg = {"task": "triple", "triple": args.triple, "plan": _plan(args), "outputs": _outputs(args)}
    return _finish(*run_experiment(_clean(cfg)), args)


def cmd_run(args):
    manifest, report = run_experiment(args.config, out_dir=args.out_dir)
    print(md_table(report))
    for a in manifest.artifacts:
        print(f"wrote {a}", file=sys.stderr)
    return 0


def cmd_report(args):
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read report {args.report}: {exc}") from None
    text = md_table(report) if args.format == "md" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nlframe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nlframe {__version__}")
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads for compiled kernels")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, plan=True):
        sp.add_argument("--map", required=True, help="map spec: JSON, file, or kind:key=value,...")
        sp.add_argument("--operator", help="operator matrix file (CSV or JSON)")
        if plan:
            sp.add_argument("--plan", help="sampling plan: JSON or file")
        sp.add_argument("--out", help="report JSON path (default: print to stdout)")

    c = sub.add_parser("certify", help="estimate stability constants of a map")
    common(c)
    c.add_argument("--constants", help="comma-separated subset of constants")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("solve", help="run an iterative reconstruction")
    common(s)
    s.add_argument("--algo", required=True, choices=["left-inverse", "van-cittert", "localized"])
    s.add_argument("--data", required=True, help="measurement vector file")
    s.add_argument("--truth", help="true signal file (enables error reporting)")
    s.add_argument("--mu", type=float, help="relaxation factor (default: inside the certified window)")
    s.add_argument("--max-iter", type=int, default=10_000)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--force", action="store_true", help="run even if a precondition fails")
    s.add_argument("--trace", help="trace CSV path")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("recover", help="constrained M-norm recovery")
    common(r)
    r.add_argument("--triple", required=True, help="e.g. classical:n=12,s=2")
    r.add_argument("--data", required=True)
    r.add_argument("--truth")
    r.add_argument("--eps", type=float, required=True)
    r.add_argument("--method", choices=["enum", "penalty"], default="enum")
    r.add_argument("--no-bounds", dest="bounds", action="store_false",
                   help="skip the constants and predicted bounds")
    r.set_defaults(func=cmd_recover)

    t = sub.add_parser("triple", help="sparse approximation triple tools")
    tsub = t.add_subparsers(dest="triple_command", required=True)
    tv = tsub.add_parser("verify", help="check the triple axioms and constants")
    tv.add_argument("--triple", required=True)
    tv.add_argument("--plan")
    tv.add_argument("--out")
    tv.set_defaults(func=cmd_triple)

    u = sub.add_parser("run", help="run an experiment config (TOML or JSON)")
    u.add_argument("config")
    u.add_argument("--out-dir", help="directory for emitted artifacts")
    u.set_defaults(func=cmd_run)

    e = sub.add_parser("report", help="render a report JSON")
    e.add_argument("report")
    e.add_argument("--format", choices=["md", "json"], default="md")
    e.add_argument("--out")
    e.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        set_threads(args.threads)
    try:
        return args.func(args)
    except NLFrameError as exc:
        print(f"nlframe: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"nlframe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
