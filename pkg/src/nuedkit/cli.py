"""Command-line front end.

Every JSON report has the form ``{"manifest": ..., "payload": ...}``. The
manifest records the command, the resolved options, the seed, the tool
version, the kernel backend, the input hash and a UTC timestamp; the payload
depends only on the rest of the manifest, so reruns give byte-identical
payloads. CSV commands write the manifest next to the CSV as
``<out>.manifest.json``.

Exit codes: 0 success or pass, 1 a check failed (violation, infeasible fit,
falsified notion, ...), 2 usage or I/O error.

Option defaults may be supplied by a JSON config file given with ``--config``
or the ``NUEDKIT_CONFIG`` environment variable. Top-level keys apply to every
subcommand and ``{"commands": {"simulate": {...}}}`` to one; keys are option
names with dashes replaced by underscores.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, _kernels, catalog, injectivity
from .dichotomy import (CertificateSearch, DichotomyCertificate, SpectrumScan, build_norm_grid, check_uniform_fit,
                        estimate_spectrum, fit_stability_certificate, validate_certificate)
from .formats import (POLY_BUILTINS, SystemDescription, SystemFileError, builtin_system, dumps_json,
                      load_system_file, norm_grid_csv, read_norm_grid_csv, trajectory_csv)
from .mycheck import EXAMPLES, HypothesisConfig, check_hypotheses, reproduce_example
from .odeint import Completed, IntegratorConfig, integrate
from .polyalg import NoStabilization, PolyAlgError, compose, formal_inverse, is_nilpotent, jacobian

__all__ = ["main", "build_parser", "RunManifest", "CONFIG_ENV"]

CONFIG_ENV = "NUEDKIT_CONFIG"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# required options are checked after config defaults are merged
_REQUIRED = {"simulate": ("x0", "tf"), "injectivity": ("notion",), "reproduce": ("example",)}

# options that name where output goes; they never affect the payload
_OUTPUT_KEYS = {"out", "out_dir", "config", "command", "handler"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# manifest and output


class RunManifest(dict):
    """Command, resolved config, seed, version, backend, input hash and timestamp."""

    @classmethod
    def create(cls, args, input_hash: str | None) -> "RunManifest":
        config = {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_KEYS}
        return cls(
            command=args.command,
            config=config,
            seed=getattr(args, "seed", 0),
            tool="nuedkit",
            version=__version__,
            backend=_kernels.BACKEND,
            input_hash=input_hash,
            timestamp=_timestamp(),
        )


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the clock for fully reproducible files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
           else _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0))
    return now.isoformat().replace("+00:00", "Z")


def _write_text(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit_report(args, manifest: RunManifest, payload) -> None:
    _write_text(dumps_json({"manifest": manifest, "payload": payload}), args.out)


def _emit_csv(args, manifest: RunManifest, text: str, outcome: dict) -> None:
    _write_text(text, args.out)
    side = {"manifest": manifest, "payload": outcome}
    if args.out and args.out != "-":
        _write_text(dumps_json(side), f"{args.out}.manifest.json")
    else:
        sys.stderr.write(dumps_json(side))


def _say(msg: str) -> None:
    sys.stderr.write(msg.rstrip("\n") + "\n")


# ---------------------------------------------------------------------------
# argument helpers


def _params(pairs) -> dict:
    out = {}
    for p in pairs or ():
        key, sep, value = p.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects KEY=VALUE, got {p!r}")
        if "," in value:
            out[key] = [_number(v) for v in value.split(",")]
        else:
            out[key] = value if key == "lam" else _number(value)
    return out


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None


def _vector(text: str) -> list[float]:
    return [_number(v) for v in text.split(",") if v.strip()]


def _system(args, need: str | None = None) -> SystemDescription:
    if args.system and args.builtin:
        raise UsageError("give either --system or --builtin, not both")
    if args.system:
        desc = load_system_file(args.system)
    elif args.builtin:
        try:
            desc = builtin_system(args.builtin, **_params(args.param))
        except TypeError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("a system is required: --system FILE or --builtin NAME")
    if need is not None and desc.kind != need:
        what = "a polynomial map" if need == "poly_map" else "a linear system"
        raise UsageError(f"{args.command} needs {what}, got a {desc.kind} description")
    return desc


def _integrator(args, **extra) -> IntegratorConfig:
    return IntegratorConfig(rtol=args.rtol, atol=args.atol, max_step=args.max_step,
                            blowup_threshold=args.blowup, **extra)


def _search(args) -> CertificateSearch:
    return CertificateSearch(alpha_range=(0.0, args.alpha_max), eps_range=(0.0, args.eps_max),
                             eps_step=args.search_step, alpha_step=args.search_step, tol=args.search_tol,
                             growth_tol=args.growth_tol)


def _lower_bound(desc: SystemDescription):
    if desc.kind == "linear" and desc.linear_name == "example_3_4":
        p = desc.linear_params
        return catalog.example_3_4_lower_bound(p.get("lambda0", -4.0), p.get("a", -1.0))
    return None


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    desc = _system(args)
    x0 = _vector(args.x0)
    samples = ()
    if args.sample_step:
        n = int(round((args.tf - args.t0) / args.sample_step))
        samples = tuple(args.t0 + args.sample_step * np.arange(n + 1))
    res = integrate(desc.vector_field(), args.t0, x0, args.tf, _integrator(args, sample_times=samples))
    traj = res.trajectory
    outcome = {"status": type(res).__name__, "samples": len(traj), "steps": traj.steps,
               "rejections": traj.rejections, "final_time": float(traj.times[-1]),
               "final_norm": float(np.linalg.norm(traj.states[-1]))}
    if not isinstance(res, Completed):
        outcome["t_stop"] = float(getattr(res, "t_star", getattr(res, "t", traj.times[-1])))
    _emit_csv(args, RunManifest.create(args, desc.input_hash), trajectory_csv(traj), outcome)
    return EXIT_OK if isinstance(res, Completed) else EXIT_FAIL


def cmd_transition(args) -> int:
    desc = _system(args, "linear")
    grid = build_norm_grid(desc.vector_field(), args.horizon, args.step, _integrator(args))
    outcome = {"samples": len(grid), "horizon": grid.horizon, "system_id": grid.system_id}
    _emit_csv(args, RunManifest.create(args, desc.input_hash), norm_grid_csv(grid), outcome)
    return EXIT_OK


def cmd_nued_fit(args) -> int:
    if args.grid:
        if args.system or args.builtin:
            raise UsageError("give either --grid or a system, not both")
        grid = read_norm_grid_csv(args.grid)
        desc, input_hash = None, _file_hash(args.grid)
    else:
        desc = _system(args, "linear")
        grid = build_norm_grid(desc.vector_field(), args.horizon, args.step, _integrator(args),
                               lower_bound=_lower_bound(desc))
        input_hash = desc.input_hash
    search = _search(args)
    res = fit_stability_certificate(grid, search)
    payload = {"system": None if desc is None else desc.to_json(), "samples": len(grid), "result": res,
               "uniform": check_uniform_fit(grid, search)}
    if isinstance(res, DichotomyCertificate):
        payload["validation_min_log_slack"] = validate_certificate(res, grid)
    _emit_report(args, RunManifest.create(args, input_hash), payload)
    return EXIT_OK if isinstance(res, DichotomyCertificate) else EXIT_FAIL


def _file_hash(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_spectrum(args) -> int:
    desc = _system(args, "linear")
    scan = SpectrumScan(range=(args.lam_min, args.lam_max), coarse_step=args.coarse_step, tol=args.tol)
    est = estimate_spectrum(desc.vector_field(), scan, args.horizon, args.step, _integrator(args))
    _emit_report(args, RunManifest.create(args, desc.input_hash), {"system": desc.to_json(), "spectrum": est})
    return EXIT_OK


def cmd_invert(args) -> int:
    desc = _system(args, "poly_map")
    F = desc.poly_map
    try:
        G = formal_inverse(F, args.degree_cap)
    except NoStabilization as exc:
        _emit_report(args, RunManifest.create(args, desc.input_hash),
                     {"status": "no_stabilization", "reason": str(exc)})
        return EXIT_FAIL
    right = compose(F, G).is_identity()
    left = compose(G, F).is_identity()
    payload = {"status": "inverse", "inverse": G.to_json(), "degree": G.max_degree,
               "composition": {"F_of_G_is_identity": right, "G_of_F_is_identity": left}}
    _emit_report(args, RunManifest.create(args, desc.input_hash), payload)
    return EXIT_OK if right and left else EXIT_FAIL


def cmd_nilpotency(args) -> int:
    desc = _system(args, "poly_map")
    F = desc.poly_map
    H = F.nonlinear_part() if F.linear_coefficient is not None else F
    res = is_nilpotent(jacobian(H))
    payload = {"matrix": "J(H)" if H is not F else "J(F)", "nilpotent": res.nilpotent, "index": res.index}
    _emit_report(args, RunManifest.create(args, desc.input_hash), payload)
    return EXIT_OK if res.nilpotent else EXIT_FAIL


def cmd_injectivity(args) -> int:
    if args.family and (args.system or args.builtin):
        raise UsageError("give either --family or a system, not both")
    if args.family:
        family = injectivity.builtin_family(args.family, **_params(args.param))
        input_hash = None
    else:
        desc = _system(args, "poly_map")
        family = injectivity._poly_family(desc.name or "poly_map", desc.poly_map)
        input_hash = desc.input_hash
    taus = tuple(float(k) for k in range(int(args.tau_max) + 1))
    cfg = injectivity.SearchConfig(tau_grid=taus, horizon=args.horizon, t_step=args.t_step, pairs=args.pairs,
                                   box=args.box, mode=args.mode, seed=args.seed)
    notions = injectivity.NOTIONS if args.notion == "all" else (args.notion,)
    verdicts = [injectivity.test_injectivity(family, n, cfg) for n in notions]
    payload = {"family": family.family_id, "search": cfg,
               "verdicts": {v.notion: {**v.to_json(), "witness_verified": _verified(family, v, cfg)}
                            for v in verdicts}}
    if len(verdicts) > 1:
        payload["implication_audit"] = injectivity.implication_audit(verdicts)
    _emit_report(args, RunManifest.create(args, input_hash), payload)
    ok = all(v.outcome in ("Holds", "SupportedBySearch") for v in verdicts)
    return EXIT_OK if ok else EXIT_FAIL


def _verified(family, verdict, cfg):
    if verdict.outcome != "Falsified" or verdict.witness is None:
        return None
    return injectivity.verify_witness(family, verdict, cfg)


def cmd_check_bnnmyc(args) -> int:
    desc = _system(args, "poly_map")
    cfg = HypothesisConfig(delta=args.delta, eps=args.eps, horizon=args.horizon, iv_step=args.iv_step,
                           g3_horizon=args.g3_horizon, integrator=_integrator(args))
    try:
        report = check_hypotheses(desc.poly_map, cfg=cfg)
    except PolyAlgError as exc:
        raise UsageError(str(exc)) from None
    _emit_report(args, RunManifest.create(args, desc.input_hash), report)
    _say(report.summary())
    return EXIT_OK if report.overall == "pass" else EXIT_FAIL


def cmd_reproduce(args) -> int:
    report = reproduce_example(args.example)
    manifest = RunManifest.create(args, None)
    text = dumps_json({"manifest": manifest, "payload": report})
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        stem = f"example_{args.example.replace('.', '_')}"
        _write_text(text, str(d / f"{stem}.json"))
        _write_text(report.summary() + "\n", str(d / f"{stem}.txt"))
    else:
        _write_text(text, args.out)
    _say(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def _add_system(p, poly_only=False, linear_only=False):
    names = POLY_BUILTINS if poly_only else catalog.LINEAR_BUILTINS if linear_only else (
        POLY_BUILTINS + catalog.LINEAR_BUILTINS)
    p.add_argument("--system", metavar="FILE", help="system description JSON")
    p.add_argument("--builtin", choices=names, help="named system instead of a file")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="builtin parameter, repeatable (lists as comma-separated values)")


def _add_integrator(p, rtol=1e-10, atol=1e-12):
    p.add_argument("--rtol", type=float, default=rtol)
    p.add_argument("--atol", type=float, default=atol)
    p.add_argument("--max-step", type=float, default=float("inf"))
    p.add_argument("--blowup", type=float, default=1e8, help="norm threshold declaring blow-up")


def _add_grid(p):
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--step", type=float, default=0.5, help="spacing of the (t, s) sample grid")


def _add_common(p):
    p.add_argument("--out", "-o", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nuedkit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"nuedkit {__version__}")
    parser.add_argument("--config", metavar="FILE", help=f"JSON option defaults (env: {CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="integrate an initial value problem; CSV t,x1..xn")
    _add_system(p)
    _add_common(p)
    _add_integrator(p)
    p.add_argument("--x0", help="initial state, comma-separated (fractions allowed)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--tf", type=float)
    p.add_argument("--sample-step", type=float, default=None, help="dense output spacing (default: accepted steps)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("transition", help="transition-matrix norms of a linear system; CSV t,s,norm")
    _add_system(p, linear_only=True)
    _add_common(p)
    _add_integrator(p)
    _add_grid(p)
    p.set_defaults(handler=cmd_transition)

    p = sub.add_parser("nued-fit", help="fit a nonuniform stability certificate; JSON")
    _add_system(p, linear_only=True)
    _add_common(p)
    _add_integrator(p)
    _add_grid(p)
    p.add_argument("--grid", metavar="CSV", help="fit a norm grid written by 'transition' instead of a system")
    p.add_argument("--alpha-max", type=float, default=50.0)
    p.add_argument("--eps-max", type=float, default=10.0)
    p.add_argument("--search-step", type=float, default=0.05)
    p.add_argument("--search-tol", type=float, default=1e-4)
    p.add_argument("--growth-tol", type=float, default=0.02)
    p.set_defaults(handler=cmd_nued_fit)

    p = sub.add_parser("spectrum", help="estimate the dichotomy spectrum of a linear system; JSON")
    _add_system(p, linear_only=True)
    _add_common(p)
    _add_integrator(p)
    _add_grid(p)
    p.add_argument("--lam-min", type=float, default=-10.0)
    p.add_argument("--lam-max", type=float, default=10.0)
    p.add_argument("--coarse-step", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("invert", help="exact polynomial inverse with composition check; JSON")
    _add_system(p, poly_only=True)
    _add_common(p)
    p.add_argument("--degree-cap", type=int, default=None)
    p.set_defaults(handler=cmd_invert)

    p = sub.add_parser("nilpotency", help="nilpotency and index of the Jacobian of the nonlinear part; JSON")
    _add_system(p, poly_only=True)
    _add_common(p)
    p.set_defaults(handler=cmd_nilpotency)

    p = sub.add_parser("injectivity", help="test a parametrized injectivity notion; JSON")
    _add_system(p, poly_only=True)
    _add_common(p)
    p.add_argument("--family", choices=injectivity.BUILTIN_FAMILIES, help="named family instead of a system")
    p.add_argument("--notion", choices=(*injectivity.NOTIONS, "all"))
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--box", type=float, default=2.0)
    p.add_argument("--mode", choices=("exact", "float"), default="exact")
    p.add_argument("--tau-max", type=float, default=10.0)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--t-step", type=float, default=0.1)
    p.set_defaults(handler=cmd_injectivity)

    p = sub.add_parser("check-bnnmyc", help="check the stability hypotheses on a polynomial map; JSON")
    _add_system(p, poly_only=True)
    _add_common(p)
    _add_integrator(p)
    p.add_argument("--delta", type=float, default=None, help="default |lambda|/2")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--iv-step", type=float, default=0.01)
    p.add_argument("--g3-horizon", type=float, default=30.0)
    p.set_defaults(handler=cmd_check_bnnmyc)

    p = sub.add_parser("reproduce", help="rerun the checks of a worked example; JSON bundle")
    p.add_argument("--example", choices=EXAMPLES)
    _add_common(p)
    p.add_argument("--out-dir", metavar="DIR", help="write <example>.json and <example>.txt into DIR")
    p.set_defaults(handler=cmd_reproduce)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, argv, args):
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return args
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    per = cfg.get("commands", {})
    defaults = {k: v for k, v in cfg.items() if k != "commands"}
    defaults.update(per.get(args.command, {}))
    sp = _subparser(parser, args.command)
    known = {a.dest for a in sp._actions}
    # keys meant for other subcommands are fine at top level, unknown ones are not
    every = set().union(*({a.dest for a in _subparser(parser, c)._actions} for c in _commands(parser)))
    bad = sorted(k for k in defaults if k not in every or (k in per.get(args.command, {}) and k not in known))
    if bad:
        raise UsageError(f"{path}: unknown option(s) {bad}")
    types = {a.dest: a.type for a in sp._actions}
    try:
        sp.set_defaults(**{k: types[k](v) if types[k] and v is not None else v
                           for k, v in defaults.items() if k in known})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    return parser.parse_args(argv)


def _commands(parser):
    return [name for action in parser._subparsers._group_actions for name in action.choices]


def main(argv=None) -> int:
    """Run the CLI and return the exit code."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _apply_config(parser, argv, args)
        missing = [f"--{k.replace('_', '-')}" for k in _REQUIRED.get(args.command, ()) if getattr(args, k) is None]
        if missing:
            raise UsageError(f"missing required option(s) {', '.join(missing)}")
        return args.handler(args)
    except (UsageError, SystemFileError, OSError, ValueError, KeyError) as exc:
        _say(f"nuedkit {args.command}: error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
