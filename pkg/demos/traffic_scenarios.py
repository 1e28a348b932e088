"""Three small scenarios showing how the traffic simulator reacts.

Replayed neighbors follow their recorded logs until the ego plan makes a
log physically implausible; from that moment the affected vehicle is
handed to a car-following controller and never goes back. The scenarios:

  1. the ego cuts into a follower's lane and forces it to yield
  2. a braking ego drags two trailing vehicles into car-following, one
     after the other
  3. the ego rear-ends a parked vehicle and the collision flag latches
"""

import numpy as np

from highway_irl import RoadModel, rollout, solve_lateral, solve_longitudinal
from highway_irl.synthetic import (braking_track, constant_speed_track,
                                   lane_change_track, make_scene)
from highway_irl.trajectory_gen import PolynomialPair


def candidate(road, x0, v0, v1, lane0, lane1, horizon=5.0):
    pair = PolynomialPair(
        lon=solve_longitudinal(x0, v0, 0.0, v1, 0.0, horizon),
        lat=solve_lateral(road.lane_center(lane0), 0.0, 0.0,
                          road.lane_center(lane1), 0.0, 0.0, horizon),
        horizon=horizon)
    return pair.sample()


def describe(result):
    for vid, t in result.override_events:
        print(f"  vehicle {vid} handed to car-following at t={t:.1f} s")
    worst = {}
    for step in result.influenced_decels:
        for vid, a in step.items():
            worst[vid] = min(worst.get(vid, 0.0), a)
    for vid, a in sorted(worst.items()):
        print(f"  vehicle {vid} strongest induced deceleration {a:.2f} m/s^2")
    if result.collision.happened:
        c = result.collision
        print(f"  collision with {c.kind} {c.vehicle_id} at step {c.step}")


def cut_in():
    print("scenario 1: cut-in")
    road = RoadModel()
    follower = constant_speed_track(2, x0=10.0, speed=10.0, n=51, lane=3)
    ego = lane_change_track(1, x0=20.0, speed=10.0, from_lane=2, to_lane=3,
                            t_start=0.5, duration=2.0, n=51)
    scene = make_scene(ego, (follower,))
    result = rollout(scene, candidate(road, 20.0, 10.0, 10.0, 2, 3), road)
    describe(result)
    v = result.neighbor_states[2]
    print(f"  follower speed {v[0].speed:.1f} -> {v[-1].speed:.1f} m/s\n")


def chain_reaction():
    print("scenario 2: chained response behind a braking ego")
    road = RoadModel()
    ego = braking_track(1, x0=60.0, speed=10.0, brake=2.0, t_brake=0.0, n=51,
                        lane=2)
    f1 = constant_speed_track(2, x0=45.0, speed=10.0, n=51, lane=2)
    f2 = constant_speed_track(3, x0=32.0, speed=10.0, n=51, lane=2)
    scene = make_scene(ego, (f1, f2))
    result = rollout(scene, candidate(road, 60.0, 10.0, 2.0, 2, 2), road)
    describe(result)
    gap12 = result.ego_states[-1].x - result.neighbor_states[2][-1].x
    gap23 = (result.neighbor_states[2][-1].x
             - result.neighbor_states[3][-1].x)
    print(f"  final gaps: ego->2 {gap12:.1f} m, 2->3 {gap23:.1f} m\n")


def rear_end():
    print("scenario 3: collision latch against a parked vehicle")
    road = RoadModel()
    parked = constant_speed_track(2, x0=40.0, speed=0.0, n=51, lane=2)
    ego = constant_speed_track(1, x0=10.0, speed=12.0, n=51, lane=2)
    scene = make_scene(ego, (parked,))
    result = rollout(scene, candidate(road, 10.0, 12.0, 12.0, 2, 2), road)
    describe(result)
    flags = [int(result.collision.happened and k >= result.collision.step)
             for k in range(result.n_steps)]
    print(f"  collision flag over the horizon: "
          f"{''.join(str(f) for f in flags)}")
    moved = (result.neighbor_states[2][-1].x
             - result.neighbor_states[2][0].x)
    print(f"  struck vehicle displacement after impact: {moved:.2f} m\n")


def main():
    np.set_printoptions(precision=3, suppress=True)
    cut_in()
    chain_reaction()
    rear_end()


if __name__ == "__main__":
    main()
