#!/usr/bin/env python3
"""Run every bundled scenario and print a one-line metrics summary each."""

import sys
import time
from pathlib import Path

from followbot.harness import run, write_outputs
from followbot.scenarios import bundled_names


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
    failures = 0
    for name in bundled_names():
        started = time.monotonic()
        log = run(name)
        wall = time.monotonic() - started
        write_outputs(log, out_root / name)
        m = log.metrics
        lat = m["lateral"]
        print(
            f"{name:22s} {log.status:9s} wall={wall:5.2f}s steps={m['steps']:4d} "
            f"lat_p95={lat['p95'] if lat['p95'] is not None else float('nan'):.3f} "
            f"rmse={m['tracker_rmse']:.3f} id={m['identity_precision']} "
            f"events={m['events']}"
        )
        failures += log.status != "completed"
    print(f"outputs under {out_root}/")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
