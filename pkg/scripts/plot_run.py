#!/usr/bin/env python3
"""Plot a saved run: trajectories, spline, estimates, and velocity profile.

Usage: plot_run.py <run.json> [out.png]
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from followbot.clothoid import ClothoidSpline
from followbot.harness import load_runlog


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 1
    log = load_runlog(sys.argv[1])
    out = sys.argv[2] if len(sys.argv) > 2 else "run.png"
    t = np.array([r["t"] for r in log.records])
    robot = np.array([r["robot"] for r in log.records])
    leader = np.array([r["leader_truth"] for r in log.records])
    est = np.array([r["est"] if r["est"] else [np.nan, np.nan] for r in log.records])
    v = np.array([r["cmd"][0] for r in log.records])

    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(9, 9), gridspec_kw={"height_ratios": [3, 1]}
    )
    ax1.plot(leader[:, 0], leader[:, 1], "r-", lw=2, label="leader footsteps")
    ax1.plot(robot[:, 0], robot[:, 1], "b-", lw=1.5, label="robot")
    ax1.plot(est[:, 0], est[:, 1], "g.", ms=2, label="fused estimate")
    if log.final_spline:
        spline = ClothoidSpline.from_dicts(log.final_spline)
        _, pts = spline.sample(0.05)
        ax1.plot(pts[:, 0], pts[:, 1], "k--", lw=1, label="reconstructed path")
    for seg in log.scenario.get("obstacles", []):
        (x1, y1), (x2, y2) = seg
        ax1.plot([x1, x2], [y1, y2], "k-", lw=3, alpha=0.5)
    ax1.set_aspect("equal")
    ax1.legend(loc="best")
    ax1.set_title(f"{log.scenario.get('name', 'run')} ({log.status})")

    ax2.plot(t, v, "b-", label="commanded v")
    for r in log.records:
        for kind, te in r["events"]:
            ax2.axvline(te, color="r", alpha=0.4)
            ax2.text(te, max(v) * 0.9, kind, rotation=90, fontsize=7)
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("v [m/s]")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
