"""Command-line front end for the benchmark suite.

Subcommands:

* ``run``            one example/method/scenario cell -> trace.csv,
                     report.json, plot.svg
* ``table1``         the full 5-method x 4-scenario comparison table
* ``lemma1-check``   decomposition exactness over randomized inputs
* ``observer-check`` remainder-observer replay on every composite run

Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 divergence.
The default output directory is ``./out`` or ``$SCL_LAB_OUT``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import svg
from .benchmarks import (
    ConfigError,
    EXAMPLES,
    METHODS,
    SCENARIOS_EX3,
    build_run,
    table1 as build_table1,
)
from .decomposition import (
    UnstableA1,
    exactness_suite,
    make_decomposition,
    make_decomposition_ex1,
    replay_observer,
)
from .metrics import report as evaluate
from .numerics import DEFAULT_DT
from .plants import PlantModel, SimulationTrace, build_example2, build_example3, simulate

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

LEMMA_TOL = 1e-6
OBSERVER_TOL = 1e-9


def _default_out() -> str:
    return os.environ.get("SCL_LAB_OUT", "out")


def _fmt15(v: float) -> str:
    return f"{v:.15g}"


def write_trace_csv(trace: SimulationTrace, path: Path):
    """RFC-4180 CSV with 15 significant digits; byte-identical per run."""
    n = trace.x.shape[1]
    m = trace.u_cmd.shape[1]
    p = trace.y.shape[1]

    def cols(base, count):
        return [base] if count == 1 else [f"{base}{j + 1}" for j in range(count)]

    header = (["t"] + [f"x{j + 1}" for j in range(n)]
              + cols("u_commanded", m) + cols("u_applied", m)
              + cols("u_p", m) + cols("u_s", m)
              + [f"xhat_p{j + 1}" for j in range(n)]
              + [f"xhat_s{j + 1}" for j in range(n)]
              + (["y"] if p == 1 else [f"y{j + 1}" for j in range(p)])
              + ["y_d"])
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(trace)):
            row = ([trace.t[k]] + list(trace.x[k])
                   + list(trace.u_cmd[k]) + list(trace.u_applied[k])
                   + list(trace.u_p[k]) + list(trace.u_s[k])
                   + list(trace.xhat_p[k]) + list(trace.xhat_s[k])
                   + list(trace.y[k]) + [trace.y_d[k]])
            writer.writerow([_fmt15(v) for v in row])


def write_plot_svg(trace: SimulationTrace, path: Path, title: str):
    t = list(trace.t)
    state_series = [(f"x{j + 1}", t, list(trace.x[:, j]))
                    for j in range(trace.x.shape[1])]
    if trace.tracking:
        state_series.append(("y_d", t, list(trace.y_d)))
    input_series = [("u_commanded", t, list(trace.u_cmd[:, 0])),
                    ("u_applied", t, list(trace.u_applied[:, 0]))]
    doc = svg.render([
        svg.Panel(f"{title}: state", "t [s]", "state", state_series),
        svg.Panel(f"{title}: input", "t [s]", "input", input_series),
    ])
    path.write_text(doc)


@dataclass(frozen=True)
class RunConfig:
    """One resolved ``run`` invocation; flags override the config file.

    Deterministic by construction: no seeds, and identical configs give
    byte-identical output files.
    """

    example: str
    method: str
    scenario: Optional[str] = None
    dt: float = DEFAULT_DT
    t_end: Optional[float] = None
    out: str = "out"

    @classmethod
    def resolve(cls, args) -> "RunConfig":
        cfg = _load_config(args.config)
        example = args.example or cfg.get("example")
        method = args.method or cfg.get("method")
        if example is None or method is None:
            raise ConfigError("both --example and --method are required")
        t_end = args.t_end if args.t_end is not None else cfg.get("t_end")
        return cls(
            example=example, method=method,
            scenario=args.scenario or cfg.get("scenario"),
            dt=float(args.dt if args.dt is not None else cfg.get("dt", DEFAULT_DT)),
            t_end=None if t_end is None else float(t_end),
            out=str(args.out or cfg.get("out") or _default_out()),
        )


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    allowed = {"example", "method", "scenario", "dt", "t_end", "out"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def cmd_run(args) -> int:
    config = RunConfig.resolve(args)
    out_dir = Path(config.out)

    setup = build_run(config.example, config.method, config.scenario)
    trace = simulate(setup.plant, setup.law, setup.scenario, dt=config.dt,
                     t_end=config.t_end)
    rep = evaluate(trace)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out_dir / "trace.csv")
    meta = {"example": config.example, "method": config.method,
            "scenario": config.scenario if config.example == "ex3" else None,
            "dt": config.dt, "t_end": float(trace.t[-1]),
            "samples": len(trace)}
    (out_dir / "report.json").write_text(
        json.dumps({**meta, **rep.as_dict()}, indent=2, sort_keys=True) + "\n")
    label = f"{config.example}/{config.method}" + (
        f"/{config.scenario}" if config.scenario else "")
    write_plot_svg(trace, out_dir / "plot.svg", label)

    print(f"{label}: {rep.classification}", end="")
    if rep.iae is not None:
        print(f"  IAE={rep.iae:.3f} ITAE={rep.itae:.3f}", end="")
    if rep.saturation_interval is not None:
        t0, t1 = rep.saturation_interval
        print(f"  saturated {t0:.1f}s..{t1:.1f}s", end="")
    print(f"  -> {out_dir}")
    return EXIT_DIVERGED if trace.diverged else EXIT_OK


def cmd_table1(args) -> int:
    dt = args.dt if args.dt is not None else DEFAULT_DT
    out_dir = Path(args.out or _default_out())
    table = build_table1(dt=float(dt))
    rows = table.rows()

    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "table1.csv").open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    text = "\n".join(lines) + "\n"
    (out_dir / "table1.txt").write_text(text)
    print(text, end="")
    print(f"-> {out_dir}/table1.csv, {out_dir}/table1.txt")
    return EXIT_OK


def cmd_lemma1_check(args) -> int:
    dt = args.dt if args.dt is not None else DEFAULT_DT
    cases = exactness_suite(dt=float(dt))
    worst = 0.0
    for case in cases:
        print(f"{case.example} input {case.index:2d}: "
              f"max |x - (xp + xs)| = {case.deviation:.3e}")
        worst = max(worst, case.deviation)
    ok = worst < LEMMA_TOL
    print(f"worst deviation {worst:.3e} ({'OK' if ok else 'FAIL'}, "
          f"tolerance {LEMMA_TOL:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _observer_runs():
    yield "ex1", "sclc", None
    yield "ex2", "sclc", None
    for sc in SCENARIOS_EX3:
        yield "ex3", "sclc", sc


def cmd_observer_check(args) -> int:
    dt = args.dt if args.dt is not None else DEFAULT_DT
    plant2, _ = build_example2()
    plant3, _ = build_example3()
    decs = {"ex1": make_decomposition_ex1(20.0),
            "ex2": make_decomposition(plant2),
            "ex3": make_decomposition(plant3)}
    ok = True
    for example, method, sc in _observer_runs():
        setup = build_run(example, method, sc)
        trace = simulate(setup.plant, setup.law, setup.scenario, dt=float(dt))
        dev = replay_observer(decs[example], trace)
        label = example + (f"({sc})" if sc else "")
        good = dev < OBSERVER_TOL
        ok = ok and good
        print(f"{label}: replay deviation {dev:.3e} "
              f"{'OK' if good else 'FAIL'}")

    # The construction must refuse a non-Hurwitz primary matrix.
    unstable = PlantModel(
        name="unstable", n=1, m=1, p=1,
        field=lambda t, x, u, d: x + u + d,
        output=lambda x: x,
        analytic_jacobian=(np.array([[1.0]]), np.array([[1.0]])),
    )
    try:
        make_decomposition(unstable)
    except UnstableA1:
        print("non-Hurwitz A1 rejected: OK")
    else:
        print("non-Hurwitz A1 rejected: FAIL (accepted)")
        ok = False
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scl-lab",
        description="State-compensation linearization benchmark suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one example/method cell")
    p_run.add_argument("--example", choices=EXAMPLES)
    p_run.add_argument("--method", choices=METHODS)
    p_run.add_argument("--scenario", choices=SCENARIOS_EX3)
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--t-end", dest="t_end", type=float)
    p_run.add_argument("--out")
    p_run.add_argument("--config", help="JSON config; flags take precedence")
    p_run.set_defaults(func=cmd_run)

    p_tab = sub.add_parser("table1", help="regenerate the comparison table")
    p_tab.add_argument("--dt", type=float)
    p_tab.add_argument("--out")
    p_tab.set_defaults(func=cmd_table1)

    p_lem = sub.add_parser("lemma1-check",
                           help="decomposition exactness sweep")
    p_lem.add_argument("--dt", type=float)
    p_lem.set_defaults(func=cmd_lemma1_check)

    p_obs = sub.add_parser("observer-check",
                           help="observer replay + construction guards")
    p_obs.add_argument("--dt", type=float)
    p_obs.set_defaults(func=cmd_observer_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
