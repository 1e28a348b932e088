"""Shared fixtures: a default road and a small synthetic track store.

The store holds three hand-built vehicles on the default road: a constant
12 m/s ego in lane 2, a leader in the same lane that brakes to rest, and a
vehicle merging from lane 3 into lane 2. Each track is 10.2 s long, so two
5 s scenes fit per vehicle.
"""

import pytest

from highway_irl import RoadModel, synthetic, write_track_store


@pytest.fixture(scope="session")
def road():
    return RoadModel()


def build_store_tracks():
    ego = synthetic.constant_speed_track(1, x0=10.0, speed=12.0, n=102,
                                         lane=2)
    lead = synthetic.braking_track(2, x0=40.0, speed=12.0, brake=2.0,
                                   t_brake=1.0, n=102, lane=2)
    side = synthetic.lane_change_track(3, x0=5.0, speed=11.0, from_lane=3,
                                       to_lane=2, n=102)
    return {1: ego, 2: lead, 3: side}


@pytest.fixture(scope="session")
def store_tracks():
    return build_store_tracks()


@pytest.fixture(scope="session")
def store_path(tmp_path_factory, store_tracks):
    path = tmp_path_factory.mktemp("store") / "tracks.csv"
    write_track_store(store_tracks, path)
    return str(path)
