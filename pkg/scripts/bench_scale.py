#!/usr/bin/env python3
"""Synthesis/update timing at the validation-flight scales.

Prints wall time, arena size and peak RSS for: the 163-location patrol and
its goal-change update, the 48-location search-and-rescue update, and the
8x8 iterator cover pair.
"""

import pathlib
import resource
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from skyweave import catalog  # noqa: E402
from skyweave.dcu import dcu_problem_from_doc, solve_update  # noqa: E402
from skyweave.problems import control_problem  # noqa: E402
from skyweave.speclang import parse  # noqa: E402
from skyweave.synthesis import problem_arena, solve_control_problem  # noqa: E402


def rss_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024


def scaled_patrol():
    cells = set(range(169)) - {12 * 13 + c for c in range(7, 13)}
    adj = catalog.adjacency(13, 13, cells)

    def block(r0, c0, r1, c1):
        return [r * 13 + c for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)
                if r * 13 + c in cells]

    return catalog.scaled_patrol_docs(
        adj, 6,
        (block(0, 0, 1, 1), block(0, 11, 1, 12)),
        {"NoF1": block(5, 5, 7, 7), "NoF4": block(11, 0, 12, 5)},
        (block(10, 0, 11, 1), block(9, 9, 10, 10)),
        {"NoF2": block(3, 3, 4, 4), "NoF3": block(0, 0, 2, 12)},
        ("NoF1", "NoF2"),
    )


def main() -> None:
    rows = []

    mission, update = scaled_patrol()
    t0 = time.perf_counter()
    p = control_problem(parse(mission))
    arena = problem_arena(p)
    v = solve_control_problem(p)
    rows.append(("patrol-163 synthesis", time.perf_counter() - t0, arena.n, v.realizable))

    t0 = time.perf_counter()
    dp = dcu_problem_from_doc(parse(update), current=v.controller)
    uv, usol = solve_update(dp)
    rows.append(("patrol-163 update", time.perf_counter() - t0,
                 usol.combined.lts.n_states if usol else 0, uv.realizable))

    t0 = time.perf_counter()
    sr = dcu_problem_from_doc(parse(catalog.sr_update_doc(6, 8)))
    sv, ssol = solve_update(sr)
    rows.append(("search-rescue-48 update", time.perf_counter() - t0,
                 ssol.combined.lts.n_states if ssol else 0, sv.realizable))

    order = list(range(64))
    a = {r * 8 + c for r in range(5) for c in range(4)}
    b = {r * 8 + c for r in range(2) for c in range(4)}
    in_a = [c in a for c in order]
    in_b = [c in b for c in order]
    t0 = time.perf_counter()
    cp = control_problem(parse(catalog.cover_mission_doc(in_a)))
    cv = solve_control_problem(cp)
    rows.append(("cover-8x8 synthesis", time.perf_counter() - t0,
                 problem_arena(cp).n, cv.realizable))
    t0 = time.perf_counter()
    cdp = dcu_problem_from_doc(parse(catalog.cover_update_doc(in_a, in_b)), current=cv.controller)
    cuv, cusol = solve_update(cdp)
    rows.append(("cover-8x8 update", time.perf_counter() - t0,
                 cusol.combined.lts.n_states if cusol else 0, cuv.realizable))

    print(f"{'case':<28}{'wall (s)':>10}{'states':>10}{'realizable':>12}")
    for name, wall, states, realizable in rows:
        print(f"{name:<28}{wall:>10.2f}{states:>10}{str(realizable):>12}")
    print(f"\npeak RSS: {rss_mb():.0f} MB")


if __name__ == "__main__":
    main()
