"""Command-line interface.

    skyweave run <scenario-dir> [--seed N] [--out DIR]
    skyweave synth <spec.fsl> [--out FILE]
    skyweave verify <spec.fsl> <controller.tbl>
    skyweave serve --world cfg.json [--mission m.fsl] [--bind HOST:PORT]
    skyweave scenarios <out-dir>

Exit codes: 0 ok, 2 unrealizable, 3 verification failure, 4 scenario
assertion failure.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from .dcu import dcu_problem_from_doc, solve_update, verify_update
from .problems import control_problem
from .scenario import ScenarioError, load_scenario, run_scenario
from .speclang import ControlDecl, SpecError, UpdateDecl, parse, validate
from .synthesis import (
    controller_table,
    load_controller_table,
    solve_control_problem,
    verify_closed_loop,
)

__all__ = ["main"]


def update_export(sol) -> str:
    """Controller table for C' plus the fmap section (C-state -> C'-state)."""
    lines = [controller_table(sol.new_controller).rstrip(), "fmap"]
    for c_state in sorted(sol.f):
        lines.append(f"{c_state} -> {sol.f[c_state]}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        record = run_scenario(sc, seed=args.seed)
    except ScenarioError as e:
        print(f"scenario failed: {e}", file=sys.stderr)
        return e.code
    out = pathlib.Path(args.out) if args.out else pathlib.Path("runs") / f"{sc.scenario_id}-{args.seed}"
    record.save(out)
    print(f"ok: {len(record.events)} log records, final mode {record.final_mode}; saved to {out}")
    for s in record.synth:
        print(f"  synth {s.kind}: {s.wall_time}s, {s.arena_states} arena states, "
              f"rss {s.peak_rss_kb} kB")
    return 0


def cmd_synth(args) -> int:
    text = pathlib.Path(args.spec).read_text()
    try:
        doc = parse(text)
    except SpecError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    diags = validate(doc)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return 1
    if isinstance(doc.problem, ControlDecl):
        p = control_problem(doc)
        v = solve_control_problem(p)
        if not v.realizable:
            print("unrealizable: " + " ".join(v.witness or []), file=sys.stderr)
            return 2
        check = verify_closed_loop(p.env, v.controller, p)
        if not check.realizable:
            print(f"verification failed: {check.detail}", file=sys.stderr)
            return 3
        out = controller_table(v.controller)
    elif isinstance(doc.problem, UpdateDecl):
        dp = dcu_problem_from_doc(doc)
        verdict, sol = solve_update(dp)
        if not verdict.realizable:
            print("unrealizable: " + " ".join(verdict.witness or []), file=sys.stderr)
            return 2
        check = verify_update(sol, dp)
        if not check.realizable:
            print(f"verification failed: {check.detail}", file=sys.stderr)
            return 3
        out = update_export(sol)
    else:
        print("document declares no problem", file=sys.stderr)
        return 1
    if args.out:
        pathlib.Path(args.out).write_text(out)
        print(f"wrote {args.out}")
    else:
        print(out, end="")
    return 0


def cmd_verify(args) -> int:
    doc = parse(pathlib.Path(args.spec).read_text())
    if not isinstance(doc.problem, ControlDecl):
        print("verify expects a control-problem document", file=sys.stderr)
        return 1
    p = control_problem(doc)
    table_text = pathlib.Path(args.controller).read_text()
    c = load_controller_table(table_text.split("\nfmap\n")[0])
    check = verify_closed_loop(p.env, c, p)
    if not check.realizable:
        print(f"verification failed: {check.detail}", file=sys.stderr)
        if check.witness:
            print("counterexample: " + " ".join(check.witness), file=sys.stderr)
        return 3
    print("verified")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import GroundControl, create_app

    world_cfg = json.loads(pathlib.Path(args.world).read_text())
    mission = pathlib.Path(args.mission).read_text() if args.mission else None
    control = GroundControl(
        world_cfg, mission=mission, seed=args.seed, sim_speed=args.sim_speed,
        auto_swap=args.auto_swap, runs_dir=args.runs_dir,
    )
    app = create_app(control)
    host, _, port = args.bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
    return 0


def cmd_scenarios(args) -> int:
    from .scenarios import all_scenarios

    out = pathlib.Path(args.out)
    for name, sc in all_scenarios().items():
        sc.save(out / name)
        print(f"wrote {out / name}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="skyweave", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a scenario directory")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("synth", help="synthesize a control or update problem")
    p.add_argument("spec")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("verify", help="model-check a controller table against a spec")
    p.add_argument("spec")
    p.add_argument("controller")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("serve", help="start the ground-control service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--world", required=True)
    p.add_argument("--mission", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sim-speed", type=float, default=10.0)
    p.add_argument("--auto-swap", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--runs-dir", default="runs")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("scenarios", help="materialize the bundled scenarios")
    p.add_argument("out")
    p.set_defaults(fn=cmd_scenarios)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
