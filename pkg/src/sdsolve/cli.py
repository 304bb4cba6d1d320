"""Command-line frontend: solve one instance, generate benchmark instances,
or run a directory benchmark with shifted-geometric-mean reporting.

Exit codes: 0 optimal, 2 infeasibility certificate, 1 failure or limit,
64 unparsable input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_PARSE = 64


def _set_threads(argv) -> None:
    """Pin BLAS thread counts before numpy is imported."""
    n = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif a.startswith("--threads="):
            n = a.split("=", 1)[1]
    if n is None:
        n = os.environ.get("SDSOLVE_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = str(n)


@dataclass
class BenchSummary:
    solved_count: int
    sgm: float
    rows: list


def shifted_geometric_mean(times, shift: float = 10.0) -> float:
    import numpy as np

    times = np.asarray(list(times), dtype=np.float64)
    if times.size == 0:
        return 0.0
    return float(np.exp(np.mean(np.log(times + shift))) - shift)


def _apply_param_overrides(params, overrides):
    from dataclasses import fields, replace

    valid = {f.name: f.type for f in fields(params)}
    for text in overrides or ():
        if "=" not in text:
            raise ValueError(f"--param expects KEY=VALUE, got {text!r}")
        key, value = text.split("=", 1)
        if key not in valid:
            raise ValueError(f"unknown parameter {key!r}")
        current = getattr(params, key)
        if isinstance(current, bool):
            parsed = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            parsed = int(value)
        elif isinstance(current, float) or current is None:
            parsed = float(value)
        else:
            parsed = value
        params = replace(params, **{key: parsed})
    return params


def _result_json(res) -> dict:
    return {
        "instance": res.name,
        "status": res.status.value,
        "primal_obj": None if res.primal_obj != res.primal_obj else res.primal_obj,
        "dual_obj": res.dual_obj,
        "dimacs": [float(e) for e in res.dimacs],
        "iterations": res.iterations,
        "phase_a_iterations": res.phase_a_iterations,
        "phase_b_iterations": res.phase_b_iterations,
        "time_seconds": res.time_seconds,
    }


def _exit_code(status) -> int:
    from .solver import INFEASIBLE_STATUSES, Status

    if status is Status.OPTIMAL:
        return EXIT_OK
    if status in INFEASIBLE_STATUSES:
        return EXIT_INFEASIBLE
    return EXIT_FAILED


def cmd_solve(args) -> int:
    from .sdpa_io import ParseError, parse_sdpa, write_report
    from .solver import Params, solve

    try:
        with open(args.file, "r", encoding="utf-8", errors="replace") as fh:
            problem = parse_sdpa(fh)
    except ParseError as exc:
        print(f"parse error in {args.file}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    problem.name = problem.name or os.path.splitext(os.path.basename(args.file))[0]
    params = Params()
    if args.time_limit is not None:
        from dataclasses import replace

        params = replace(params, time_limit_seconds=args.time_limit)
    try:
        params = _apply_param_overrides(params, args.param)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PARSE
    res = solve(problem, params)
    print(f"instance      : {res.name}")
    print(f"status        : {res.status.value}")
    print(f"dual obj  b'y : {res.dual_obj:.10g}")
    print(f"primal obj    : {res.primal_obj:.10g}")
    errs = " ".join(format(e, ".2e") for e in res.dimacs)
    print(f"dimacs errors : {errs}")
    print(f"iterations    : {res.iterations} "
          f"(A {res.phase_a_iterations}, B {res.phase_b_iterations})")
    print(f"seconds       : {res.time_seconds:.3f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(_result_json(res), fh, indent=2)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(write_report([res]))
    return _exit_code(res.status)


def cmd_gen(args) -> int:
    from .generators import FAMILIES, InvalidSize
    from .sdpa_io import write_sdpa

    gen = FAMILIES[args.family]
    kwargs = {"seed": args.seed}
    if args.family == "maxcut":
        kwargs["edge_prob"] = args.edge_prob
    elif args.family == "gpp":
        kwargs.update(k=args.k, beta=args.beta, edge_prob=args.edge_prob)
    else:
        kwargs.update(density=args.density, diagonal_b=args.diagonal)
    try:
        problem = gen(args.n, **kwargs)
    except InvalidSize as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILED
    out = args.out or f"{problem.name}.dat-s"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(write_sdpa(problem))
    print(out)
    return EXIT_OK


def _bench_one(task):
    path, params_dict, _ = task
    from dataclasses import replace

    from .sdpa_io import parse_sdpa
    from .solver import Params, solve

    params = replace(Params(), **params_dict)
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            problem = parse_sdpa(fh)
    except Exception as exc:  # recorded, not raised
        return (os.path.basename(path), None, str(exc))
    problem.name = os.path.splitext(os.path.basename(path))[0]
    res = solve(problem, params)
    return (problem.name, res, None)


def cmd_bench(args) -> int:
    import glob

    from .sdpa_io import write_report
    from .solver import Status

    files = sorted(glob.glob(os.path.join(args.dir, "*.dat-s")))
    if not files:
        print(f"no .dat-s files in {args.dir}", file=sys.stderr)
        return EXIT_FAILED
    params_dict = {}
    if args.time_limit is not None:
        params_dict["time_limit_seconds"] = args.time_limit
    tasks = [(f, params_dict, None) for f in files]
    if args.jobs > 1:
        import multiprocessing as mp

        with mp.Pool(args.jobs) as pool:
            outcomes = pool.map(_bench_one, tasks)
    else:
        outcomes = [_bench_one(t) for t in tasks]
    rows, times = [], []
    solved = 0
    for name, res, err in outcomes:
        if res is None:
            print(f"{name:30s} parse-error   {err}")
            times.append(args.fail_time)
            continue
        ok = res.status is Status.OPTIMAL
        solved += int(ok)
        times.append(res.time_seconds if ok else args.fail_time)
        rows.append(res)
        errs = " ".join(format(e, ".1e") for e in res.dimacs)
        print(f"{name:30s} {res.status.value:28s} {res.time_seconds:8.3f}s  {errs}")
    sgm = shifted_geometric_mean(times, args.shift)
    print(f"solved {solved}/{len(files)}   shifted geometric mean "
          f"{sgm:.3f}s (shift {args.shift:g}, failures at {args.fail_time:g}s)")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(write_report(rows))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"solved_count": solved, "sgm": sgm,
                       "rows": [_result_json(r) for r in rows]}, fh, indent=2)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdsolve",
                                description="dual-scaling SDP solver")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one SDPA sparse file")
    ps.add_argument("file")
    ps.add_argument("--param", action="append", metavar="KEY=VALUE",
                    help="override a solver parameter (repeatable)")
    ps.add_argument("--json", help="write the result as JSON")
    ps.add_argument("--csv", help="write the result as a CSV report row")
    ps.add_argument("--time-limit", type=float, default=None)
    ps.add_argument("--threads", type=int, default=None,
                    help="BLAS thread count (or SDSOLVE_THREADS)")
    ps.set_defaults(func=cmd_solve)

    pg = sub.add_parser("gen", help="generate a benchmark instance")
    pg.add_argument("family", choices=["maxcut", "gpp", "diagprecond"])
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", default=None)
    pg.add_argument("--edge-prob", type=float, default=0.5)
    pg.add_argument("--k", type=int, default=2)
    pg.add_argument("--beta", type=float, default=0.0)
    pg.add_argument("--density", type=float, default=0.2)
    pg.add_argument("--diagonal", action="store_true",
                    help="diagprecond: diagonal B (optimum 1)")
    pg.set_defaults(func=cmd_gen)

    pb = sub.add_parser("bench", help="solve every .dat-s file in a directory")
    pb.add_argument("dir")
    pb.add_argument("--fail-time", type=float, default=3600.0,
                    help="time charged to failed instances")
    pb.add_argument("--shift", type=float, default=10.0,
                    help="shift of the geometric mean")
    pb.add_argument("--time-limit", type=float, default=None)
    pb.add_argument("--csv", default=None)
    pb.add_argument("--json", default=None)
    pb.add_argument("--jobs", type=int, default=1)
    pb.add_argument("--threads", type=int, default=None)
    pb.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _set_threads(argv)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
