"""Command line: ``lfen generate|solve|oracle|export|verify|bench``.

Exit codes: 0 success (solver limits included, see the status column),
1 internal error or failed verification, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import export as ex
from . import formulations as fm
from .api import oracle_value
from .exceptions import (LfenError, ParseError, ResourceError, UnsupportedDegreeError,
                         WrongGameClassError)
from .games import is_epsilon_ne, leader_utility
from .instances import generate_instance, read_game, write_game
from .meta import BlackBoxConfig
from .runner import METHODS, BenchRow, UsageError, average_row, check_method, run_method
from .solvers.result import SolveConfig
from .validation import NE_EPS, check_strategy

log = logging.getLogger("lfen")

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2
BENCH_SEEDS = range(1, 11)
BENCH_TIME_LIMIT = 120.0
VALUE_TOL = 1e-9


def parse_range(text: str) -> list[int]:
    """``"3"``, ``"2,3,5"`` or ``"2..4"`` (inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise UsageError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty range {text!r}")
    return out


def _game_args(p, need_seed=True):
    p.add_argument("--game", type=Path, help="game file (.lfg)")
    p.add_argument("--class", dest="game_class", choices=("nf", "pm"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", default=None, help="actions per agent")
    if need_seed:
        p.add_argument("--seed", type=int, default=None)


def _solver_args(p):
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--time-limit", type=float, default=None)


def _config(args) -> SolveConfig:
    tl = args.time_limit if args.time_limit is not None else math.inf
    return SolveConfig(rel_gap_tol=args.gap_tol, time_limit=tl)


def _instance(args):
    generated = any(v is not None for v in (args.game_class, args.n, args.m, args.seed))
    if args.game is not None:
        if generated:
            raise UsageError("--game conflicts with --class/--n/--m/--seed")
        return read_game(args.game), {"game": str(args.game)}
    if args.game_class is None:
        raise UsageError("give --game or --class")
    n = 3 if args.n is None else args.n
    m = int(args.m) if args.m is not None else 2
    seed = 1 if args.seed is None else args.seed
    inst = generate_instance(args.game_class, n, m, seed)
    return inst, {"class": args.game_class, "n": n, "m": m, "seed": seed}


def _delta(text: str, size: int):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad --delta {text!r}") from None
    try:
        return check_strategy(vals, size, name="delta")
    except (ValueError, LfenError) as exc:
        raise UsageError(str(exc)) from None


def _emit_rows(path, rows, extra=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BenchRow.FIELDS)
        for r in rows:
            w.writerow(r.as_list())
        for r in extra:
            w.writerow(r)


def _solution_record(sol, source, instance, method, mode) -> dict:
    rec = sol.as_dict()
    rec.update({"source": source, "leader": instance.leader, "mode": mode, "method": method})
    return rec


# subcommands ---------------------------------------------------------------
def cmd_generate(args):
    if args.game is not None:
        raise UsageError("generate takes --class/--n/--m/--seed, not --game")
    inst, _ = _instance(args)
    if args.out is None:
        raise UsageError("generate needs --out")
    write_game(inst, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _model_for(inst, method, delta=None, mode="optimistic"):
    kind = inst.game.kind
    if method == "oracle":
        return fm.build(inst, f"oracle_{kind}", delta=delta, mode=mode)
    if method == "lpfm3":
        return fm.build(inst, f"o{kind}_lpfm3")
    if method[:3] in ("onf", "opm"):
        return fm.build(inst, method)
    raise UsageError(f"method {method} has no model to export")


def _export(model, fmt, path):
    if fmt == "lp":
        ex.export_lp(model, path)
    else:
        ex.export_pip(model, path)


def cmd_solve(args):
    inst, source = _instance(args)
    check_method(args.method, inst.game.kind, args.mode)
    if args.trace and args.method != "blackbox":
        raise UsageError("--trace is only meaningful with --method blackbox")
    if args.export:
        _export(_model_for(inst, args.method), *args.export)
    bb = BlackBoxConfig(eval_budget=args.budget, seed=args.bb_seed)
    try:
        sol = run_method(inst, args.method, args.mode, _config(args), bb, args.trace)
    except ResourceError as exc:
        print(f"resource limit: {exc}")
        return EXIT_OK
    print(json.dumps(_solution_record(sol, source, inst, args.method, args.mode), indent=2))
    row = BenchRow.from_solution(sol, source.get("class", inst.game.kind), inst.game.n,
                                 max(inst.game.m), source.get("seed", 0), args.method)
    print(",".join(BenchRow.FIELDS))
    print(",".join(str(v) for v in row.as_list()))
    if args.out:
        _emit_rows(args.out, [row])
    if args.solution:
        Path(args.solution).write_text(json.dumps(_solution_record(sol, source, inst, args.method,
                                                                   args.mode), indent=2))
    return EXIT_OK


def cmd_oracle(args):
    inst, source = _instance(args)
    delta = _delta(args.delta, inst.m_leader) if args.delta else np.full(inst.m_leader,
                                                                         1.0 / inst.m_leader)
    if args.export:
        _export(_model_for(inst, "oracle", delta, args.mode), *args.export)
    out = oracle_value(inst, delta, args.mode, args.backend,
                       SolveConfig(rel_gap_tol=args.gap_tol))
    print(json.dumps({"delta": delta.tolist(), "mode": args.mode, "value": out.value,
                      "rhos": [r.tolist() for r in out.rhos], "certified": out.certified,
                      "status": out.status, "discrepancy": out.discrepancy,
                      "wall_time": out.wall_time}, indent=2))
    return EXIT_OK


def cmd_export(args):
    inst, _ = _instance(args)
    if not args.export:
        raise UsageError("export needs --export lp|pip <path>")
    delta = _delta(args.delta, inst.m_leader) if args.delta else None
    if args.method == "oracle" and delta is None:
        raise UsageError("--method oracle needs --delta")
    model = _model_for(inst, args.method, delta, args.mode)
    fmt, path = args.export
    try:
        _export(model, fmt, path)
    except LfenError as exc:
        print(f"cannot export: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {path} ({model.census()})")
    return EXIT_OK


def verify_record(inst, rec: dict, eps: float = NE_EPS) -> list[str]:
    """Problems with a stored solution; empty when it is a certified equilibrium."""
    problems = []
    try:
        delta = check_strategy(rec["delta"], inst.m_leader, name="delta")
        rhos = [check_strategy(r, inst.game.m[f], name=f"rho[{f}]")
                for r, f in zip(rec["rhos"], inst.followers)]
        if len(rec["rhos"]) != len(inst.followers):
            raise ValueError(f"{len(rec['rhos'])} follower strategies for "
                             f"{len(inst.followers)} followers")
    except (KeyError, TypeError, ValueError, LfenError) as exc:
        return [f"malformed profile: {exc}"]
    verdict = is_epsilon_ne(inst, delta, rhos, eps)
    if not verdict.ok:
        problems.append(f"not an equilibrium: max regret {verdict.max_violation:.6g} > {eps}")
    value = leader_utility(inst, delta, rhos)
    stored = rec.get("value")
    if stored is not None and abs(value - stored) > VALUE_TOL * (1 + abs(value)):
        problems.append(f"stored value {stored!r} differs from recomputed {value!r}")
    return problems


def cmd_verify(args):
    inst, _ = _instance(args)
    if args.solution is None:
        raise UsageError("verify needs --solution")
    if args.dump:
        if args.method is None:
            raise UsageError("--dump needs --method to rebuild the model")
        model = _model_for(inst, args.method)
        parsed = ex.parse_solution(args.solution, model)
        for w in parsed.warnings:
            print(f"warning: {w}")
        sol = fm.extract_solution(model, parsed.values, inst, certify=False)
        rec = {"delta": sol.delta.tolist(), "rhos": [r.tolist() for r in sol.rhos]}
    else:
        try:
            rec = json.loads(Path(args.solution).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"solution file is not JSON: {exc}") from None
    problems = verify_record(inst, rec)
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        return EXIT_ERROR
    print(f"OK value {leader_utility(inst, rec['delta'], rec['rhos'])!r}")
    return EXIT_OK


def cmd_bench(args):
    if args.game is not None:
        raise UsageError("bench generates its own instances; --game is not allowed")
    if args.game_class is None or args.m is None:
        raise UsageError("bench needs --class and --m")
    methods = [s.strip() for s in args.method.split(",")]
    for meth in methods:
        check_method(meth, args.game_class, args.mode)
    n = 3 if args.n is None else args.n
    ms = parse_range(args.m)
    seeds = parse_range(args.seeds) if args.seeds else list(BENCH_SEEDS)
    tl = args.time_limit if args.time_limit is not None else BENCH_TIME_LIMIT
    config = SolveConfig(rel_gap_tol=args.gap_tol, time_limit=tl)
    rows, averages, records, failures = [], [], [], []
    for m in ms:
        for meth in methods:
            batch = []
            for seed in seeds:
                inst = generate_instance(args.game_class, n, m, seed)
                source = {"class": args.game_class, "n": n, "m": m, "seed": seed}
                try:
                    sol = run_method(inst, meth, args.mode, config,
                                     BlackBoxConfig(eval_budget=args.budget, seed=seed))
                except ResourceError as exc:
                    log.warning("%s m=%d seed=%d: %s", meth, m, seed, exc)
                    continue
                row = BenchRow.from_solution(sol, args.game_class, n, m, seed, meth)
                batch.append(row)
                if sol.delta is not None:
                    rec = _solution_record(sol, source, inst, meth, args.mode)
                    records.append(rec)
                    probs = verify_record(inst, rec)
                    if probs:
                        failures.append((source, meth, probs))
                print(",".join(str(v) for v in row.as_list()), flush=True)
            if batch:
                rows.extend(batch)
                averages.append(average_row(batch))
                print(",".join(str(v) for v in averages[-1]), flush=True)
    if args.out:
        _emit_rows(args.out, rows, averages)
        with open(str(args.out) + ".solutions.jsonl", "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    if args.self_check:
        failures.extend(self_check(args.game_class, n, ms, seeds))
    for source, meth, probs in failures:
        print(f"CHECK FAILED {source} {meth}: {'; '.join(probs)}")
    return EXIT_ERROR if failures else EXIT_OK


def self_check(game_class, n, ms, seeds, tol=1e-7) -> list:
    """Method relations per instance: implicit-enum equals the best pure commitment and
    the upper bound of the mixed-leader optimum is at least the pure-leader value,
    which is at least the pure-pure value."""
    from .meta import exhaustive_pure_leader, implicit_enumeration
    from .api import solve_formulation
    out = []
    for m in ms:
        for seed in seeds:
            inst = generate_instance(game_class, n, m, seed)
            src = {"class": game_class, "n": n, "m": m, "seed": seed}
            probs = []
            ie = implicit_enumeration(inst)
            exh = exhaustive_pure_leader(inst)
            if ie.value != exh.value:
                probs.append(f"implicit-enum {ie.value!r} != exhaustive {exh.value!r}")
            lmfm = solve_formulation(inst, f"o{game_class}3")
            if lmfm.upper_bound < ie.value - tol:
                probs.append(f"lmfm UB {lmfm.upper_bound!r} < lpfm {ie.value!r}")
            pp = run_method(inst, "pure-pure")
            if pp.status == "optimal" and ie.value < pp.value - tol:
                probs.append(f"lpfm {ie.value!r} < pure-pure {pp.value!r}")
            if probs:
                out.append((src, "self-check", probs))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfen", description="Leader-follower equilibria with "
                                "Nash followers: solvers, oracles and benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded random game file")
    _game_args(g)
    g.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one instance")
    _game_args(s)
    _solver_args(s)
    s.add_argument("--method", choices=METHODS, required=True)
    s.add_argument("--mode", choices=("optimistic", "pessimistic"), default="optimistic")
    s.add_argument("--out", type=Path, help="CSV with the bench row")
    s.add_argument("--solution", type=Path, help="write the solution as JSON")
    s.add_argument("--export", nargs=2, metavar=("FORMAT", "PATH"))
    s.add_argument("--trace", type=Path, help="black-box trace CSV")
    s.add_argument("--budget", type=int, default=None, help="black-box evaluations")
    s.add_argument("--bb-seed", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="best or worst follower equilibrium at a commitment")
    _game_args(o)
    o.add_argument("--delta", help="comma-separated leader strategy (default uniform)")
    o.add_argument("--mode", choices=("optimistic", "pessimistic"), default="optimistic")
    o.add_argument("--backend", choices=("formulation", "enumeration"), default="formulation")
    o.add_argument("--gap-tol", type=float, default=1e-9)
    o.add_argument("--export", nargs=2, metavar=("FORMAT", "PATH"))
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("export", help="write a formulation as an LP or polynomial file")
    _game_args(e)
    e.add_argument("--method", required=True,
                   choices=("onf1", "onf2", "onf3", "opm1", "opm2", "opm3", "lpfm3", "oracle"))
    e.add_argument("--delta")
    e.add_argument("--mode", choices=("optimistic", "pessimistic"), default="optimistic")
    e.add_argument("--export", nargs=2, metavar=("FORMAT", "PATH"))
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("verify", help="re-certify a solution against a game")
    _game_args(v)
    v.add_argument("--solution", type=Path)
    v.add_argument("--dump", action="store_true", help="solution is a 'name value' dump")
    v.add_argument("--method", help="formulation the dump refers to")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="seeded batch over m")
    _game_args(b, need_seed=False)
    _solver_args(b)
    b.add_argument("--seed", dest="seeds", default=None, help="seed range, default 1..10")
    b.add_argument("--method", required=True, help="method id or comma-separated list")
    b.add_argument("--mode", choices=("optimistic", "pessimistic"), default="optimistic")
    b.add_argument("--out", type=Path)
    b.add_argument("--budget", type=int, default=None)
    b.add_argument("--self-check", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "export", None):
        fmt = args.export[0]
        if fmt not in ("lp", "pip"):
            parser.error(f"--export format must be lp or pip, got {fmt!r}")
    try:
        return args.func(args)
    except (UsageError, WrongGameClassError, UnsupportedDegreeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:    # noqa: BLE001 - last-resort report with exit code 1
        log.debug("internal error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
