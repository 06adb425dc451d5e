"""Reproducible experiment runner.

Subcommands:

* ``env-gen``  write an environment JSON file (random or deterministic).
* ``law``      print the closed-form law {"lambda", "alpha"} for given sites,
               with optional density/CDF curve CSVs and a moment table.
* ``verify``   run one verification experiment and emit a report JSON;
               exit status 0 iff every check passes.
* ``profile``  emit the expected-increment profile over an a-grid as CSV plus
               the located favorite point as a JSON footer.

Every command is deterministic given its flags; reruns produce byte-identical
outputs apart from the timestamp/wall-time fields, which ``--no-timestamp``
suppresses.  Exit codes: 0 success, 1 runtime or verification failure,
2 usage error.  A ``--config`` JSON file may supply any flag (same names,
dashes or underscores); explicit flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import verify as verify_mod
from .analytic import (
    increment_law,
    increment_moment,
    law_summary,
    passage_law,
    write_cdf_csv,
    write_density_csv,
)
from .analytic import IncrementLaw, expected_increment_profile, favorite_point
from .environment import (
    GridSpec,
    deterministic_env,
    eval_w,
    generate_two_sided_bm,
    load_env,
    save_env,
)
from .errors import EnvironmentFormatError, HorizonExceededError, OutOfDomainError
from .scale import build_scale
from .simulate import SimConfig, write_samples_csv
from .stats import summary_to_dict

BOUNDARY_MARGIN_CELLS = 10

_VERIFY_DEFAULT_REPS = {
    "exponential": 2000,
    "increment": 2000,
    "atom": 2000,
    "independence": 2000,
    "rayknight": 2000,
    "moments": 100_000,
    "favorite": 0,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="broxsim",
        description="closed-form local-time laws in a random potential, cross-validated by simulation",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("--config", help="JSON file of flag defaults (flags take precedence)")
        sp.add_argument(
            "--no-timestamp",
            action="store_true",
            help="omit timestamp/wall-time fields for byte-identical reruns",
        )

    def add_env_source(sp):
        sp.add_argument("--env", help="environment JSON file")
        sp.add_argument("--kind", choices=["bm", "flat", "linear"], help="inline environment kind")
        sp.add_argument("--slope", type=float, help="slope for --kind linear")
        sp.add_argument("--xmin", type=float, help="grid lower bound (negative multiple of h)")
        sp.add_argument("--xmax", type=float, help="grid upper bound (positive multiple of h)")
        sp.add_argument("--h", type=float, help="grid spacing")
        sp.add_argument("--env-seed", type=int, help="seed for --kind bm")

    sp = sub.add_parser("env-gen", help="generate an environment file")
    add_config(sp)
    sp.add_argument("--kind", choices=["bm", "flat", "linear"], required=True)
    sp.add_argument("--slope", type=float, help="slope for --kind linear")
    sp.add_argument("--xmin", type=float)
    sp.add_argument("--xmax", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--seed", type=int, help="seed for --kind bm")
    sp.add_argument("--out", required=True, help="output JSON path")

    sp = sub.add_parser("law", help="print the closed-form law for given sites")
    add_config(sp)
    add_env_source(sp)
    sp.add_argument("--a", type=float, help="observation site, 0 < a")
    sp.add_argument("--b", type=float, help="first passage level, a < b")
    sp.add_argument("--c", type=float, help="second passage level for the increment law")
    sp.add_argument("--out", help="also write the law JSON to this path")
    sp.add_argument("--density-csv", help="write density curve CSV (t,atom,density)")
    sp.add_argument("--cdf-csv", help="write CDF curve CSV (t,cdf)")
    sp.add_argument("--tmax", type=float, help="curve upper t limit (default 10 mean scales)")
    sp.add_argument("--points", type=int, help="curve points (default 501)")
    sp.add_argument("--moments", type=int, help="print moment table n,moment up to this order")

    sp = sub.add_parser("verify", help="run a verification experiment")
    add_config(sp)
    add_env_source(sp)
    sp.add_argument(
        "check",
        choices=["exponential", "increment", "atom", "moments", "independence", "rayknight", "favorite"],
    )
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--t1", type=float, help="independence window levels a < t1 < t2 < t3 < t4")
    sp.add_argument("--t2", type=float)
    sp.add_argument("--t3", type=float)
    sp.add_argument("--t4", type=float)
    sp.add_argument("--reps", type=int, help="path replicates (or draws for moments)")
    sp.add_argument("--direct-reps", type=int, help="direct-sampler draws for KS checks")
    sp.add_argument("--ruin-trials", type=int, help="gambler's-ruin trials for the atom check")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--bandwidth", type=float)
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--floor-depth", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--grid-points", type=int, help="a-grid size for the favorite check")
    sp.add_argument("--report", help="write the report JSON to this path")
    sp.add_argument("--samples-csv", help="write the sample batch CSV to this path")
    sp.add_argument("--metadata", help="write batch metadata JSON to this path")

    sp = sub.add_parser("profile", help="expected-increment profile over an a-grid")
    add_config(sp)
    add_env_source(sp)
    sp.add_argument("--b", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--grid-points", type=int)
    sp.add_argument("--out", help="CSV output path (default stdout)")
    return p


def _merge_config(args, parser):
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise EnvironmentFormatError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise EnvironmentFormatError(f"config file is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        parser.error("config file must hold a JSON object of flag values")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if attr in ("config", "command", "check") or not hasattr(args, attr):
            parser.error(f"unknown config field {key!r}")
        current = getattr(args, attr)
        if current is None or current is False:
            setattr(args, attr, value)


def _resolve_env(args, parser, required=True):
    inline = [getattr(args, k) is not None for k in ("kind", "xmin", "xmax", "h", "env_seed", "slope")]
    if args.env and any(inline):
        parser.error("--env and inline environment flags are mutually exclusive")
    if args.env:
        return load_env(args.env)
    if args.kind is None:
        if required:
            parser.error("an environment is required: give --env FILE or --kind")
        return None
    xmin = args.xmin if args.xmin is not None else -4.0
    xmax = args.xmax if args.xmax is not None else 4.0
    h = args.h if args.h is not None else 0.01
    try:
        grid = GridSpec(x_min=xmin, x_max=xmax, h=h)
        if args.kind == "bm":
            return generate_two_sided_bm(grid, args.env_seed if args.env_seed is not None else 0)
        if args.kind == "linear":
            return deterministic_env(grid, "linear", slope=args.slope if args.slope is not None else 0.0)
        return deterministic_env(grid, "flat")
    except ValueError as e:
        parser.error(str(e))


def _require_points(args, parser, names):
    pts = []
    for name in names:
        value = getattr(args, name)
        if value is None:
            parser.error(f"--{name} is required for this command")
        pts.append(value)
    return pts


def _require_margin(env, pts, parser):
    margin = BOUNDARY_MARGIN_CELLS * env.grid.h
    lo, hi = env.grid.x_min + margin, env.grid.x_max - margin
    for pt in pts:
        if not (lo <= pt <= hi):
            parser.error(
                f"point {pt} is within {BOUNDARY_MARGIN_CELLS} cells of the grid boundary "
                f"[{env.grid.x_min}, {env.grid.x_max}]; enlarge the grid"
            )


def _cmd_env_gen(args, parser) -> int:
    try:
        grid = GridSpec(
            x_min=args.xmin if args.xmin is not None else -4.0,
            x_max=args.xmax if args.xmax is not None else 4.0,
            h=args.h if args.h is not None else 0.01,
        )
        if args.kind == "bm":
            env = generate_two_sided_bm(grid, args.seed if args.seed is not None else 0)
        elif args.kind == "linear":
            env = deterministic_env(grid, "linear", slope=args.slope if args.slope is not None else 0.0)
        else:
            env = deterministic_env(grid, "flat")
    except ValueError as e:
        parser.error(str(e))
    save_env(env, args.out)
    return 0


def _cmd_law(args, parser) -> int:
    env = _resolve_env(args, parser)
    if args.a is None or args.b is None:
        parser.error("--a and --b are required")
    pts = [args.a, args.b] + ([args.c] if args.c is not None else [])
    order_ok = (0 < args.a <= args.b < args.c) if args.c is not None else (0 < args.a < args.b)
    if not order_ok:
        parser.error(f"sites must be ordered 0 < a <{'=' if args.c is not None else ''} b"
                     f"{' < c' if args.c is not None else ''}, got {pts}")
    _require_margin(env, pts, parser)
    sm = build_scale(env)
    if args.c is not None:
        law = increment_law(sm, env, args.a, args.b, args.c)
    else:
        p = passage_law(sm, env, args.a, args.b)
        law = IncrementLaw(rate=p.rate, atom=0.0)
    payload = json.dumps(law_summary(law), sort_keys=True)
    print(payload)
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload + "\n")
    points = args.points if args.points is not None else 501
    tmax = args.tmax if args.tmax is not None else 10.0 / law.rate
    if args.density_csv:
        write_density_csv(law, args.density_csv, tmax, points)
    if args.cdf_csv:
        write_cdf_csv(law, args.cdf_csv, tmax, points)
    if args.moments is not None:
        if args.c is None:
            parser.error("--moments requires --c (increment law)")
        if args.moments < 1:
            parser.error("--moments must be >= 1")
        if not args.a < args.b:
            parser.error("--moments requires strictly ordered a < b < c")
        print("n,moment")
        for n in range(1, args.moments + 1):
            print(f"{n},{increment_moment(sm, env, args.a, args.b, args.c, n)!r}")
    return 0


def _sim_config(args) -> SimConfig:
    kwargs = {}
    if args.dt is not None:
        kwargs["dt"] = args.dt
    if args.bandwidth is not None:
        kwargs["bandwidth"] = args.bandwidth
    if args.max_steps is not None:
        kwargs["max_steps"] = args.max_steps
    if args.floor_depth is not None:
        kwargs["floor_depth"] = args.floor_depth
    if args.seed is not None:
        kwargs["seed"] = args.seed
    return SimConfig(**kwargs)


def _cmd_verify(args, parser) -> int:
    check = args.check
    seed = args.seed if args.seed is not None else 0
    reps = args.reps if args.reps is not None else _VERIFY_DEFAULT_REPS[check]
    direct = args.direct_reps if args.direct_reps is not None else 10_000
    try:
        cfg = _sim_config(args)
    except ValueError as e:
        parser.error(str(e))
    t_start = time.perf_counter()
    samples = None
    if check == "rayknight":
        report, samples = verify_mod.verify_rayknight(cfg, reps, seed)
        env = None
        pts = []
    else:
        env = _resolve_env(args, parser)
        sm = build_scale(env)
        if check == "exponential":
            a, b = _require_points(args, parser, ["a", "b"])
            if not 0 < a < b:
                parser.error("need 0 < a < b")
            pts = [a, b]
            _require_margin(env, pts, parser)
            report, samples = verify_mod.verify_exponential(env, sm, a, b, cfg, reps, direct, seed)
        elif check in ("increment", "atom", "moments"):
            a, b, c = _require_points(args, parser, ["a", "b", "c"])
            if not 0 < a < b < c:
                parser.error("need 0 < a < b < c")
            pts = [a, b, c]
            _require_margin(env, pts, parser)
            if check == "increment":
                report, samples = verify_mod.verify_increment(env, sm, a, b, c, cfg, reps, direct, seed)
            elif check == "atom":
                trials = args.ruin_trials if args.ruin_trials is not None else 10_000
                report, samples = verify_mod.verify_atom(env, sm, a, b, c, cfg, trials, reps, seed)
            else:
                report, samples = verify_mod.verify_moments(env, sm, a, b, c, reps, seed)
        elif check == "independence":
            a, t1, t2, t3, t4 = _require_points(args, parser, ["a", "t1", "t2", "t3", "t4"])
            if not 0 < a < t1 < t2 < t3 < t4:
                parser.error("need 0 < a < t1 < t2 < t3 < t4")
            pts = [a, t1, t2, t3, t4]
            _require_margin(env, pts, parser)
            report, samples = verify_mod.verify_independence(env, sm, a, t1, t2, t3, t4, cfg, reps, seed)
        else:  # favorite
            b, c = _require_points(args, parser, ["b", "c"])
            if not 0 < b < c:
                parser.error("need 0 < b < c")
            pts = [b, c]
            _require_margin(env, pts, parser)
            grid_points = args.grid_points if args.grid_points is not None else 200
            report, samples = verify_mod.verify_favorite(env, sm, b, c, grid_points)
    wall = time.perf_counter() - t_start
    report["config"] = {
        "dt": cfg.dt,
        "bandwidth": cfg.eps,
        "max_steps": cfg.max_steps,
        "floor_depth": cfg.floor_depth,
        "seed": seed,
        "reps": reps,
        "env": args.env if getattr(args, "env", None) else getattr(args, "kind", None),
        "points": pts,
    }
    if not args.no_timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload = json.dumps(report, indent=2, sort_keys=True)
    print(payload)
    if args.report:
        with open(args.report, "w") as f:
            f.write(payload + "\n")
    if args.samples_csv and samples is not None:
        write_samples_csv(samples, args.samples_csv)
    if args.metadata:
        meta = {
            "config": report["config"],
            "base_seed": seed,
            "n_reps": reps,
            "counts": {
                "samples": len(samples) if samples is not None else 0,
                "exact_zeros": int(sum(s.is_exact_zero for s in samples)) if samples is not None else 0,
            },
        }
        if not args.no_timestamp:
            meta["wall_time_s"] = wall
        with open(args.metadata, "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0 if report["pass"] else 1


def _cmd_profile(args, parser) -> int:
    env = _resolve_env(args, parser)
    b, c = _require_points(args, parser, ["b", "c"])
    if not 0 < b < c:
        parser.error("need 0 < b < c")
    _require_margin(env, [b, c], parser)
    n = args.grid_points if args.grid_points is not None else 200
    if n < 1:
        parser.error("--grid-points must be >= 1")
    sm = build_scale(env)
    a_grid = np.linspace(0.0, b, n + 2)[1:-1]
    profile = expected_increment_profile(sm, env, b, c, a_grid)
    w_vals = eval_w(env, a_grid)
    fav = favorite_point(env, a_grid, profile)
    rows = ["a,expected_increment,w"] + [
        f"{float(a)!r},{float(p)!r},{float(w)!r}" for a, p, w in zip(a_grid, profile, w_vals)
    ]
    footer = json.dumps(
        {"favorite_a": fav, "expected_increment": float(profile.max()), "w": float(eval_w(env, fav))},
        sort_keys=True,
    )
    if args.out:
        with open(args.out, "w") as f:
            f.write("\n".join(rows) + "\n")
        print(footer)
    else:
        print("\n".join(rows))
        print(footer)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args, parser)
        if args.command == "env-gen":
            return _cmd_env_gen(args, parser)
        if args.command == "law":
            return _cmd_law(args, parser)
        if args.command == "verify":
            return _cmd_verify(args, parser)
        return _cmd_profile(args, parser)
    except HorizonExceededError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (EnvironmentFormatError, OutOfDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
