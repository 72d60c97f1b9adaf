"""Generates the bundled 13-building urban scenario suite.

The geometry is deterministic (fixed seed). Buildings are tall ellipsoids
rooted at ground level, kept at least 45 m (plus their own extent) away from
start and goal so the vehicle has room to bank, and 20 m apart from each
other. Weights default to the values the suite was tuned with.

    python3 scripts/gen_urban.py scenarios/urban
"""
import argparse
import math
import random
from pathlib import Path

N_BUILDINGS = 13
RADIUS = 2.0
START_CLEARANCE = 45.0
HEADING_SPREAD = 0.35


def scenario(k, rng, args):
    alt = rng.uniform(25.0, 40.0)
    dist = rng.uniform(220.0, 300.0)
    bearing = rng.uniform(-0.9, 0.9)
    goal = (dist * math.cos(bearing), dist * math.sin(bearing), alt + rng.uniform(-5.0, 5.0))
    start = (0.0, 0.0, alt)
    heading = bearing + rng.uniform(-HEADING_SPREAD, HEADING_SPREAD)
    buildings = []
    while len(buildings) < N_BUILDINGS:
        c = (rng.uniform(30.0, 260.0), rng.uniform(-220.0, 220.0), 0.0)
        ax = (rng.uniform(8.0, 16.0), rng.uniform(8.0, 16.0), rng.uniform(90.0, 140.0))
        reach = max(ax[:2])
        if min(math.hypot(c[0] - p[0], c[1] - p[1]) for p in (start, goal)) < reach + START_CLEARANCE:
            continue
        if any(math.hypot(c[0] - bc[0], c[1] - bc[1]) < max(ax[:2]) + max(bax[:2]) + 20.0
               for bc, bax in buildings):
            continue
        buildings.append((c, ax))
    v0 = 12.0
    lines = [
        "schema_version = 1",
        f'id = "urban-{k:02d}"',
        f"goal = [{goal[0]:.2f}, {goal[1]:.2f}, {goal[2]:.2f}]",
        f"vehicle_radius = {RADIUS}",
        "",
        "[start]",
        f"position = [{start[0]:.2f}, {start[1]:.2f}, {start[2]:.2f}]",
        f"velocity = [{v0 * math.cos(heading):.4f}, {v0 * math.sin(heading):.4f}, 0.0]",
        f"heading = {heading:.4f}",
        "",
        "[horizon]",
        "n = 50",
        f"degree = {args.degree}",
        'total_time = "auto"',
        "",
        "[solver]",
        f"w_smooth = {args.w_smooth}",
        f"rho_nh = {args.rho_nh}",
        f"rho_c = {args.rho_c}",
    ]
    for c, ax in buildings:
        lines += ["", "[[obstacles]]",
                  f"center = [{c[0]:.2f}, {c[1]:.2f}, {c[2]:.2f}]",
                  f"semi_axes = [{ax[0]:.2f}, {ax[1]:.2f}, {ax[2]:.2f}]"]
    return "\n".join(lines) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=Path)
    parser.add_argument("--rho-nh", type=float, default=1.0)
    parser.add_argument("--rho-c", type=float, default=0.02)
    parser.add_argument("--w-smooth", type=float, default=2.0)
    parser.add_argument("--degree", type=int, default=15)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(2024)
    for k in range(1, 21):
        (args.out / f"urban-{k:02d}.toml").write_text(scenario(k, rng, args))


if __name__ == "__main__":
    main()
