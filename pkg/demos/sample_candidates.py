"""Sample the candidate trajectory set for one highway state.

A vehicle cruising at 12 m/s in lane 2 gets a fan of 33 polynomial
candidates: eleven terminal speeds (7 to 17 m/s) crossed with three
lateral targets (keep lane, merge left, merge right). Each candidate is a
quartic in x and a quintic in y, so position, velocity, acceleration and
longitudinal jerk are analytic at every sample point.
"""

import numpy as np

from highway_irl import RoadModel, generate_candidates, sample_targets


def main():
    road = RoadModel()
    # ego_init layout: x, y, vx, vy, ax, ay
    ego_init = np.array([50.0, road.lane_center(2), 12.0, 0.0, 0.0, 0.0])

    targets = sample_targets(ego_init, road)
    speeds = sorted({t.vx for t in targets})
    laterals = sorted({t.y for t in targets})
    print(f"terminal grid: {len(speeds)} speeds x {len(laterals)} laterals "
          f"= {len(targets)} candidates")
    print(f"  speeds   {speeds[0]:.0f}..{speeds[-1]:.0f} m/s")
    print(f"  laterals {[round(y, 2) for y in laterals]} m "
          f"(lane centers {road.lane_center(1):.2f} / "
          f"{road.lane_center(2):.2f} / {road.lane_center(3):.2f})")

    candidates = generate_candidates(ego_init, road)
    print(f"\nsampled {len(candidates)} candidates, "
          f"{candidates[0].n} points each at 0.1 s")

    print("\n  target_v  target_y   end_x    peak|ax|  peak|ay|  peak|jx|")
    for cand in candidates[::8]:
        print(f"    {cand.target.vx:5.1f}    {cand.target.y:6.2f}  "
              f"{cand.x[-1]:7.2f}   {np.abs(cand.ax).max():7.3f}  "
              f"{np.abs(cand.ay).max():7.3f}  {np.abs(cand.jx).max():7.3f}")

    # boundary conditions hold exactly, not approximately
    worst = 0.0
    for cand in candidates:
        worst = max(worst,
                    abs(cand.x[0] - ego_init[0]),
                    abs(cand.vx[0] - ego_init[2]),
                    abs(cand.vx[-1] - cand.target.vx),
                    abs(cand.y[-1] - cand.target.y),
                    abs(cand.vy[-1]), abs(cand.ay[-1]))
    print(f"\nworst boundary residual across the set: {worst:.2e}")

    # the braking candidates trade terminal distance for comfort
    slow = min(candidates, key=lambda c: c.target.vx)
    fast = max(candidates, key=lambda c: c.target.vx)
    print(f"slowest candidate covers {slow.x[-1] - slow.x[0]:.1f} m, "
          f"fastest {fast.x[-1] - fast.x[0]:.1f} m over the same 5 s")


if __name__ == "__main__":
    main()
