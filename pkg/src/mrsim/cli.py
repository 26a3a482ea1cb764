"""Experiment runner: sweeps workloads over N, B and seeds and writes reports.

``mrsim run`` produces one :class:`ReportRow` per (N, B, seed); ``mrsim fit``
fits round and message counts against ``ceil(log_B N)``; ``mrsim report``
converts a saved report between CSV and JSON; ``mrsim solve`` runs one app on
an input file.

Reports are byte-identical for identical arguments unless ``--timing`` is
given, since wall time is the only nondeterministic column.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .engine import RoundConfig, RunMetrics
from .errors import BufferExceeded, InsufficientData, SimulationError

log = logging.getLogger("mrsim")

SCHEMA = "mrsim.report/1"


@dataclass(frozen=True)
class ReportRow:
    workload: str
    N: int
    B: int
    seed: int
    rounds: int
    M: int
    max_io: int
    oracle_match: bool
    wall_time: float = 0.0


CSV_HEADER = [f.name for f in fields(ReportRow)]


@dataclass
class ExperimentSpec:
    workload: str
    n_values: list[int]
    seeds: list[int]
    b: int | None = None
    epsilon: float = 1 / 3
    enforcement: str = "record"
    nhat_factor: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.workload not in WORKLOADS:
            raise ValueError(f"unknown workload {self.workload!r}; choose from {sorted(WORKLOADS)}")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def buffer_for(self, n: int) -> int:
        if self.b is not None:
            return self.b
        # round first so that e.g. 4096**(1/3) = 15.999... gives 16
        return max(2, math.ceil(round(max(n, 1) ** self.epsilon, 9)))


@dataclass
class FitResult:
    workload: str
    points: int
    t_slope: float
    t_intercept: float
    t_residual: float
    c_rounds: float
    M_slope: float
    M_intercept: float
    M_residual: float
    M_per_N: float


# workloads -------------------------------------------------------------------
def log_b(n: int, b: int) -> int:
    """``ceil(log_B N)`` computed with integers."""
    k, span = 0, 1
    while span < n:
        k += 1
        span *= b
    return max(k, 1)


def _w_index(n, B, cfg, spec):
    from .indexing import random_index_retry, tree_params

    params = tree_params(B, max(2, n * spec.nhat_factor))
    out, metrics, _ = random_index_retry(list(range(n)), params, cfg)
    return sorted(p for _, p in out) == list(range(1, n + 1)), metrics


def _w_sort(n, B, cfg, spec):
    from .apps.data import uniform_words
    from .apps.sorting import mr_sort
    from .oracles import ranks

    values = uniform_words(n, cfg.seed)
    out, metrics = mr_sort(values, B, cfg)
    return [r.rank for r in out] == ranks(values), metrics


def _w_ann(n, B, cfg, spec):
    from .apps.data import uniform_words
    from .apps.sorting import ann_1d
    from .oracles import successors

    values = uniform_words(n, cfg.seed)
    out, metrics = ann_1d(values, B, cfg)
    return [x.successor_index for x in out] == successors(values), metrics


def _hull(points, B, cfg):
    from .apps.hull import hull_2d, validate_hull
    from .oracles import graham_hull

    h, metrics = hull_2d(points, B, cfg)
    return h.points() == graham_hull(points) and validate_hull(points, h.points()), metrics


def _w_hull(n, B, cfg, spec):
    from .apps.data import uniform_points

    return _hull(uniform_points(n, cfg.seed), B, cfg)


def _w_hull_circle(n, B, cfg, spec):
    from .apps.data import circle_points

    return _hull(circle_points(n, cfg.seed), B, cfg)


def _w_wordcount(n, B, cfg, spec):
    from .apps.data import uniform_words
    from .apps.wordcount import word_count
    from .oracles import word_count as oracle

    words = uniform_words(n, cfg.seed, universe=max(1, n))
    counts, metrics = word_count(words, cfg)
    return counts == oracle(words), metrics


def _w_zipf(n, B, cfg, spec):
    """Word count on a Zipf stream.  A hard-mode buffer violation is the
    documented outcome at large N and counts as a match."""
    from .apps.data import zipf_words
    from .apps.wordcount import word_count
    from .oracles import word_count as oracle

    words = zipf_words(n, cfg.seed)
    try:
        counts, metrics = word_count(words, cfg)
    except BufferExceeded as exc:
        log.info("zipf N=%d: expected buffer violation reproduced: %s", n, exc)
        return True, RunMetrics()
    return counts == oracle(words), metrics


def _w_bsp(n, B, cfg, spec):
    from .bsp import RandomBspProgram, distribute, simulate_bsp
    from .oracles import bsp_interpret

    m = max(1, B // 4)
    p = max(1, math.ceil(n / m))
    prog = RandomBspProgram(cfg.seed, 3, p, m)
    mach = distribute(list(range(n)), p, prog)
    out, metrics = simulate_bsp(prog, mach, 3, cfg)
    ref = bsp_interpret(prog, mach, 3)
    return out.memory == ref.memory and out.states == ref.states, metrics


def _w_crcw_max(n, B, cfg, spec):
    from .apps.crcw_apps import crcw_max
    from .apps.data import uniform_words

    values = uniform_words(n, cfg.seed)
    got, metrics = crcw_max(values, B, cfg)
    return got == max(values), metrics


def _w_crcw_hist(n, B, cfg, spec):
    from collections import Counter

    from .apps.crcw_apps import crcw_histogram
    from .apps.data import uniform_words

    values = uniform_words(n, cfg.seed, universe=B)
    got, metrics = crcw_histogram(values, range(B), B, cfg)
    c = Counter(values)
    return got == tuple(c[b] for b in range(B)), metrics


WORKLOADS: dict[str, Callable] = {
    "index": _w_index,
    "sort": _w_sort,
    "ann": _w_ann,
    "hull": _w_hull,
    "hull-circle": _w_hull_circle,
    "wordcount": _w_wordcount,
    "zipf": _w_zipf,
    "bsp": _w_bsp,
    "crcw-max": _w_crcw_max,
    "crcw-hist": _w_crcw_hist,
}

def cmd_run(spec: ExperimentSpec) -> list[ReportRow]:
    rows = []
    for n in spec.n_values:
        B = spec.buffer_for(n)
        for seed in spec.seeds:
            cfg = RoundConfig(buffer_capacity=B, enforcement=spec.enforcement, seed=seed)
            start = time.perf_counter()
            try:
                result = WORKLOADS[spec.workload](n, B, cfg, spec)
            except BufferExceeded as exc:
                log.warning("%s N=%d B=%d seed=%d: %s", spec.workload, n, B, seed, exc)
                result = (False, RunMetrics())
            ok, metrics = result[0], result[1]
            elapsed = time.perf_counter() - start if spec.timing else 0.0
            rows.append(
                ReportRow(
                    workload=spec.workload,
                    N=n,
                    B=B,
                    seed=seed,
                    rounds=metrics.rounds,
                    M=metrics.message_complexity,
                    max_io=metrics.max_io_words_overall,
                    oracle_match=bool(ok),
                    wall_time=round(elapsed, 6),
                )
            )
    return rows


def cmd_fit(rows: Sequence[ReportRow]) -> list[FitResult]:
    """Least-squares fits of ``t ~ a*x + b`` and ``M ~ c*N*x + d`` with ``x = ceil(log_B N)``."""
    by_workload: dict[str, list[ReportRow]] = {}
    for r in rows:
        by_workload.setdefault(r.workload, []).append(r)
    results = []
    for name, group in sorted(by_workload.items()):
        if len({r.N for r in group}) < 3:
            raise InsufficientData(f"{name}: need at least 3 distinct N values, got {len({r.N for r in group})}")
        x = np.array([log_b(r.N, r.B) for r in group], dtype=float)
        t = np.array([r.rounds for r in group], dtype=float)
        nx = np.array([r.N for r in group], dtype=float) * x
        m = np.array([r.M for r in group], dtype=float)
        ones = np.ones_like(x)
        (ta, tb), *_ = np.linalg.lstsq(np.column_stack([x, ones]), t, rcond=None)
        (ma, mb), *_ = np.linalg.lstsq(np.column_stack([nx, ones]), m, rcond=None)
        results.append(
            FitResult(
                workload=name,
                points=len(group),
                t_slope=float(ta),
                t_intercept=float(tb),
                t_residual=float(np.max(np.abs(ta * x + tb - t))),
                c_rounds=float(np.max(t / x)),
                M_slope=float(ma),
                M_intercept=float(mb),
                M_residual=float(np.max(np.abs(ma * nx + mb - m))),
                M_per_N=float(np.max(m / np.array([max(r.N, 1) for r in group]))),
            )
        )
    return results


def cmd_report(rows: Sequence[ReportRow], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_csv_cell(getattr(r, name)) for name in CSV_HEADER])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"schema": SCHEMA, "rows": [asdict(r) for r in rows]}, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unsupported format {fmt!r}")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_report(text: str) -> list[ReportRow]:
    """Inverse of :func:`cmd_report` for either format."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
        return [ReportRow(**r) for r in doc["rows"]]
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = []
    for rec in reader:
        d = dict(zip(CSV_HEADER, rec))
        rows.append(
            ReportRow(
                workload=d["workload"],
                N=int(d["N"]),
                B=int(d["B"]),
                seed=int(d["seed"]),
                rounds=int(d["rounds"]),
                M=int(d["M"]),
                max_io=int(d["max_io"]),
                oracle_match=d["oracle_match"] == "true",
                wall_time=float(d["wall_time"]),
            )
        )
    return rows


# solving input files -----------------------------------------------------------
SOLVERS = ("wordcount", "sort", "ann", "hull")


def read_words(text: str) -> list[str]:
    """Newline-delimited words; blank lines are skipped."""
    return [line.strip() for line in text.splitlines() if line.strip()]


def read_points(text: str) -> list[tuple]:
    """CSV ``x,y`` rows with integer or decimal coordinates; a non-numeric header row is skipped."""
    from fractions import Fraction

    points = []
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or not "".join(rec).strip():
            continue
        try:
            x, y = (Fraction(c.strip()) for c in rec)
        except ValueError:
            if lineno == 1:
                continue
            raise ValueError(f"line {lineno}: expected 'x,y', got {rec!r}") from None
        points.append(tuple(int(c) if c.denominator == 1 else c for c in (x, y)))
    return points


def _num(c):
    return c if isinstance(c, int) else str(c)


def cmd_solve(workload: str, text: str, b: int | None, epsilon: float, cfg_seed: int, enforcement: str) -> dict:
    """Run one app on file contents and return a JSON-ready result."""
    from .apps.hull import hull_2d
    from .apps.sorting import ann_1d, mr_sort
    from .apps.wordcount import word_count

    data = read_points(text) if workload == "hull" else read_words(text)
    B = ExperimentSpec(workload="sort", n_values=[], seeds=[cfg_seed], b=b, epsilon=epsilon).buffer_for(len(data))
    cfg = RoundConfig(buffer_capacity=B, enforcement=enforcement, seed=cfg_seed)
    if workload == "wordcount":
        counts, metrics = word_count(data, cfg)
        result = dict(sorted(counts.items()))
    elif workload == "sort":
        out, metrics = mr_sort(data, B, cfg) if data else ([], RunMetrics())
        result = [{"value": r.value, "rank": r.rank} for r in out]
    elif workload == "ann":
        out, metrics = ann_1d(data, B, cfg) if data else ([], RunMetrics())
        result = [{"value": x.value, "successor": x.successor, "successor_index": x.successor_index} for x in out]
    elif workload == "hull":
        hull, metrics = hull_2d(data, B, cfg)
        result = [{"index": v.index, "x": _num(v.point[0]), "y": _num(v.point[1])} for v in hull.vertices]
    else:
        raise ValueError(f"cannot solve {workload!r}; choose from {SOLVERS}")
    return {"workload": workload, "N": len(data), "B": B, "result": result, "metrics": metrics.summary()}


# argument parsing --------------------------------------------------------------
def _default_seed() -> list[int]:
    return [int(os.environ.get("MRSIM_SEED", "0"))]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a workload sweep")
    run.add_argument("--workload", required=True, choices=sorted(WORKLOADS))
    run.add_argument("--n", type=int, action="append", default=[], help="input size (repeatable)")
    sizing = run.add_mutually_exclusive_group()
    sizing.add_argument("--b", type=int, help="absolute buffer capacity B")
    sizing.add_argument("--epsilon", type=float, default=1 / 3, help="B = ceil(N**epsilon) (default 1/3)")
    run.add_argument("--seed", type=int, action="append", help="seed (repeatable; default $MRSIM_SEED or 0)")
    run.add_argument("--enforce", choices=["hard", "record"], default="record")
    run.add_argument("--format", choices=["csv", "json"], default="csv")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.add_argument("--nhat-factor", type=int, default=1, help="indexing: N-hat = factor * N")
    run.add_argument("--timing", action="store_true", help="record wall time (reports stop being reproducible)")

    fit = sub.add_parser("fit", help="fit round and message bounds from a saved report")
    fit.add_argument("report")

    solve = sub.add_parser("solve", help="run one app on an input file and print JSON")
    solve.add_argument("--workload", required=True, choices=SOLVERS)
    solve.add_argument("--input", required=True, help="newline-delimited words, or CSV x,y points for hull")
    sizing = solve.add_mutually_exclusive_group()
    sizing.add_argument("--b", type=int)
    sizing.add_argument("--epsilon", type=float, default=1 / 3)
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--enforce", choices=["hard", "record"], default="record")
    solve.add_argument("--out")

    rep = sub.add_parser("report", help="convert a saved report")
    rep.add_argument("report")
    rep.add_argument("--format", choices=["csv", "json"], default="csv")
    rep.add_argument("--out")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            spec = ExperimentSpec(
                workload=args.workload,
                n_values=args.n,
                seeds=args.seed or _default_seed(),
                b=args.b,
                epsilon=args.epsilon,
                enforcement=args.enforce,
                nhat_factor=args.nhat_factor,
                timing=args.timing,
            )
            rows = cmd_run(spec)
            _emit(cmd_report(rows, args.format), args.out)
            return 0 if all(r.oracle_match for r in rows) else 1
        if args.command == "solve":
            with open(args.input, encoding="utf-8") as fh:
                text = fh.read()
            seed = args.seed if args.seed is not None else _default_seed()[0]
            doc = cmd_solve(args.workload, text, args.b, args.epsilon, seed, args.enforce)
            _emit(json.dumps(doc, indent=2) + "\n", args.out)
            return 0
        with open(args.report, encoding="utf-8") as fh:
            rows = parse_report(fh.read())
        if args.command == "fit":
            for res in cmd_fit(rows):
                print(json.dumps(asdict(res), sort_keys=True))
            return 0
        _emit(cmd_report(rows, args.format), args.out)
        return 0
    except (SimulationError, ValueError, OSError) as exc:
        print(f"mrsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
