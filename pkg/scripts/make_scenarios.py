#!/usr/bin/env python3
"""Materialize the bundled scenario directories under scenarios/."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from skyweave.scenarios import all_scenarios  # noqa: E402


def main() -> None:
    out = pathlib.Path(__file__).resolve().parents[1] / "scenarios"
    for name, sc in all_scenarios().items():
        sc.save(out / name)
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
