#!/usr/bin/env python3
"""Run every bundled scenario and persist its run record under runs/."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from skyweave.scenario import run_scenario  # noqa: E402
from skyweave.scenarios import all_scenarios  # noqa: E402


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    root = pathlib.Path(__file__).resolve().parents[1] / "runs"
    for name, sc in all_scenarios().items():
        record = run_scenario(sc, seed=seed)
        out = root / f"{name}-{seed}"
        record.save(out)
        synths = ", ".join(f"{s.kind} {s.wall_time}s" for s in record.synth)
        print(f"{name}: {record.final_mode}, {len(record.events)} log records, "
              f"replay={record.replay_ok()} [{synths}] -> {out}")


if __name__ == "__main__":
    main()
