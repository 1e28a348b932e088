"""Straight multi-lane highway geometry.

Coordinates: x runs along the road in the direction of travel, y is the
lateral offset from the left road edge. Main lanes are numbered 1..n from
the left edge; auxiliary strips (merge lane, on-ramp, off-ramp) continue
the numbering outboard of the mainline. Ramp merge geometry is out of
scope, so the auxiliary strips are modeled as parallel lanes and are never
offered as lateral targets.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RoadModel:
    """Lane layout of a straight highway segment.

    Lane i is centered at (i - 0.5) * lane_width, so centers are strictly
    increasing in y. The drivable band used for curb checks spans the main
    lanes plus the first auxiliary strip.
    """

    length: float = 640.0
    lane_width: float = 3.66
    n_main_lanes: int = 5
    n_aux_lanes: int = 3

    def __post_init__(self):
        if self.length <= 0 or self.lane_width <= 0:
            raise ValueError("road dimensions must be positive")
        if self.n_main_lanes < 1:
            raise ValueError("need at least one main lane")

    @property
    def n_lanes(self) -> int:
        return self.n_main_lanes + self.n_aux_lanes

    def lane_center(self, lane_id: int) -> float:
        if not 1 <= lane_id <= self.n_lanes:
            raise ValueError(f"lane_id {lane_id} outside 1..{self.n_lanes}")
        return (lane_id - 0.5) * self.lane_width

    def lane_at(self, y: float) -> int:
        """Lane id containing lateral offset y, clamped to the modeled band."""
        lane = int(y // self.lane_width) + 1
        return min(max(lane, 1), self.n_lanes)

    def is_main_lane(self, lane_id: int) -> bool:
        return 1 <= lane_id <= self.n_main_lanes

    def left_of(self, lane_id: int) -> int | None:
        """Main lane to the left (smaller y), None at the road edge."""
        if 2 <= lane_id <= self.n_main_lanes + 1:
            return lane_id - 1
        return None

    def right_of(self, lane_id: int) -> int | None:
        """Main lane to the right (larger y), None past the mainline."""
        if 1 <= lane_id < self.n_main_lanes:
            return lane_id + 1
        return None

    @property
    def outer_bounds(self) -> tuple[float, float]:
        """Lateral extent of the drivable band (mainline + merge strip)."""
        return 0.0, (self.n_main_lanes + 1) * self.lane_width
