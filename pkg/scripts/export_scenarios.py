#!/usr/bin/env python3
"""Write the bundled scenarios as standalone JSON files (defaults expanded),
plus a sample negative-embedding pool in the documented line format."""

import json
import sys
from pathlib import Path

import numpy as np

from followbot.harness import load_scenario, save_scenario
from followbot.recognition import save_negative_pool
from followbot.scenarios import bundled_names


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("scenarios")
    out.mkdir(parents=True, exist_ok=True)
    for name in bundled_names():
        data = save_scenario(load_scenario(name))
        path = out / f"{name}.json"
        path.write_text(json.dumps(data, indent=1))
        print(f"wrote {path}")
    rng = np.random.default_rng(0)
    pool = rng.normal(size=(200, 64))
    pool /= np.linalg.norm(pool, axis=1, keepdims=True)
    pool_path = out / "negative_pool.jsonl"
    save_negative_pool(pool_path, pool)
    print(f"wrote {pool_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
