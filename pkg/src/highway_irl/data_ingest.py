"""Ingestion of NGSIM-format vehicle trajectory logs.

The source CSV is one row per vehicle per frame at 10 fps with positions in
feet (or meters). Internally x is the longitudinal coordinate along the
road and y the lateral offset, which swaps the source Local_X/Local_Y
convention. Raw positions are smoothed with a third-order Savitzky-Golay
filter over 21-sample (2 s) windows; velocities and accelerations come from
the analytic derivatives of the local fitting polynomial, with the edge
samples evaluated from a cubic fitted to the first/last full window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy.signal import savgol_filter

from .trajectory_gen import (CandidateTrajectory, PolynomialPair,
                             solve_lateral, solve_longitudinal)

log = logging.getLogger(__name__)

FPS = 10.0
DT = 1.0 / FPS
FT_TO_M = 0.3048
SG_WINDOW = 21
SG_ORDER = 3
ACCEL_BOUND = 10.0
INTERACTION_RANGE = 50.0

REQUIRED_COLUMNS = ("Vehicle_ID", "Frame_ID", "Local_X", "Local_Y",
                    "v_Length", "v_Width", "Lane_ID")

STORE_COLUMNS = ("vehicle_id", "t", "x", "y", "vx", "vy", "ax", "ay",
                 "lane_id", "length", "width")


class DataError(ValueError):
    """Malformed or inconsistent trajectory data."""


class SchemaError(DataError):
    """Source file does not match the expected column schema."""


class TrackTooShortError(DataError):
    """Track shorter than one smoothing window."""


@dataclass(frozen=True)
class RawSample:
    """One source row after unit conversion and axis swap."""

    vehicle_id: int
    frame: int
    x: float
    y: float
    length: float
    width: float
    lane_id: int


@dataclass
class RawTrack:
    """Per-vehicle positions before smoothing, gap-free at dt spacing."""

    vehicle_id: int
    t0: float
    dt: float
    x: np.ndarray
    y: np.ndarray
    lane_ids: np.ndarray
    length: float
    width: float

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass
class VehicleTrack:
    """Smoothed kinematic history of one vehicle.

    All arrays share one regular time grid starting at t0. Positions are
    meters, velocities m/s, accelerations m/s^2.
    """

    vehicle_id: int
    t0: float
    dt: float
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    lane_ids: np.ndarray
    length: float
    width: float

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def end_time(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    def state(self, i: int) -> np.ndarray:
        """(x, y, vx, vy, ax, ay) at sample i."""
        return np.array([self.x[i], self.y[i], self.vx[i],
                         self.vy[i], self.ax[i], self.ay[i]])

    def window(self, i0: int, i1: int) -> "VehicleTrack":
        """Sub-track over samples [i0, i1)."""
        sl = slice(i0, i1)
        return replace(self, t0=self.t0 + i0 * self.dt,
                       x=self.x[sl], y=self.y[sl],
                       vx=self.vx[sl], vy=self.vy[sl],
                       ax=self.ax[sl], ay=self.ay[sl],
                       lane_ids=self.lane_ids[sl])


@dataclass
class Scene:
    """One short-horizon modeling problem: an ego vehicle with its recorded
    future and the recorded neighbors that come within interaction range."""

    scene_id: str
    ego_id: int
    start_time: float
    horizon: float
    ego_init: np.ndarray
    ego_ground_truth: VehicleTrack
    neighbor_tracks: dict[int, VehicleTrack]

    @property
    def n_steps(self) -> int:
        return self.ego_ground_truth.n

    @property
    def ego_length(self) -> float:
        return self.ego_ground_truth.length

    @property
    def ego_width(self) -> float:
        return self.ego_ground_truth.width

    @property
    def gt_endpoint(self) -> np.ndarray:
        gt = self.ego_ground_truth
        return np.array([gt.x[-1], gt.y[-1]])


def parse_ngsim_csv(path, unit: str = "feet") -> dict[int, RawTrack]:
    """Read an NGSIM-format CSV into per-vehicle raw tracks.

    Parameters
    ----------
    path : str or Path
        CSV with at least the columns Vehicle_ID, Frame_ID, Local_X,
        Local_Y, v_Length, v_Width, Lane_ID. Extra columns are ignored.
    unit : str
        "feet" (source values converted by 0.3048) or "meters".

    Returns
    -------
    dict[int, RawTrack]
        Keyed by vehicle id, rows sorted by frame, x longitudinal.
    """
    if unit not in ("feet", "meters"):
        raise ValueError(f"unit must be 'feet' or 'meters', got {unit!r}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: file contains no data") from None
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing required column(s): "
                          + ", ".join(missing))

    scale = FT_TO_M if unit == "feet" else 1.0
    tracks: dict[int, RawTrack] = {}
    for vid, group in df.groupby("Vehicle_ID", sort=True):
        group = group.sort_values("Frame_ID")
        frames = group["Frame_ID"].to_numpy(dtype=np.int64)
        if len(frames) != len(np.unique(frames)):
            raise DataError(f"vehicle {vid}: duplicate frame ids")
        if len(frames) > 1 and np.any(np.diff(frames) != 1):
            raise DataError(f"vehicle {vid}: frame ids are not consecutive")
        tracks[int(vid)] = RawTrack(
            vehicle_id=int(vid),
            t0=float(frames[0]) / FPS,
            dt=DT,
            x=group["Local_Y"].to_numpy(dtype=float) * scale,
            y=group["Local_X"].to_numpy(dtype=float) * scale,
            lane_ids=group["Lane_ID"].to_numpy(dtype=np.int64),
            length=float(group["v_Length"].iloc[0]) * scale,
            width=float(group["v_Width"].iloc[0]) * scale,
        )
    return tracks


def smooth_track(raw: RawTrack, window: int = SG_WINDOW,
                 order: int = SG_ORDER) -> VehicleTrack:
    """Savitzky-Golay smoothing with analytic derivative estimates.

    Both axes use the same window. Raises TrackTooShortError below one
    window and DataError when the smoothed kinematics are implausible
    (acceleration beyond 10 m/s^2, or longitudinal position regressing).
    """
    if raw.n < window:
        raise TrackTooShortError(
            f"vehicle {raw.vehicle_id}: {raw.n} samples < window {window}")

    def sg(values, deriv):
        return savgol_filter(values, window, order, deriv=deriv,
                             delta=raw.dt, mode="interp")

    track = VehicleTrack(
        vehicle_id=raw.vehicle_id, t0=raw.t0, dt=raw.dt,
        x=sg(raw.x, 0), y=sg(raw.y, 0),
        vx=sg(raw.x, 1), vy=sg(raw.y, 1),
        ax=sg(raw.x, 2), ay=sg(raw.y, 2),
        lane_ids=raw.lane_ids.copy(),
        length=raw.length, width=raw.width,
    )
    peak = max(np.abs(track.ax).max(), np.abs(track.ay).max())
    if peak > ACCEL_BOUND:
        raise DataError(f"vehicle {raw.vehicle_id}: smoothed acceleration "
                        f"{peak:.2f} m/s^2 exceeds {ACCEL_BOUND}")
    if track.n > 1 and np.diff(track.x).min() < -0.1:
        raise DataError(f"vehicle {raw.vehicle_id}: longitudinal position "
                        "regresses after smoothing")
    return track


def ingest_tracks(raw_tracks: dict[int, RawTrack]) -> tuple[dict[int, VehicleTrack], dict[int, str]]:
    """Smooth every raw track, collecting per-vehicle rejection reasons."""
    tracks: dict[int, VehicleTrack] = {}
    rejected: dict[int, str] = {}
    for vid in sorted(raw_tracks):
        try:
            tracks[vid] = smooth_track(raw_tracks[vid])
        except DataError as err:
            rejected[vid] = str(err)
            log.warning("rejected vehicle %d: %s", vid, err)
    return tracks, rejected


def segment_scenes(track: VehicleTrack, tracks: dict[int, VehicleTrack],
                   horizon: float = 5.0, count: int = 50,
                   interaction_range: float = INTERACTION_RANGE) -> list[Scene]:
    """Cut a vehicle's track into consecutive non-overlapping scenes.

    Windows are horizon-long (51 samples at 0.1 s) and adjacent windows
    share only their boundary instant. If fewer than `count` windows fit, a
    warning is emitted and the ones that fit are returned. A neighbor is
    attached when its track overlaps the window in time and it comes within
    `interaction_range` meters longitudinally of the ego's recorded path
    during the overlap, which admits vehicles that enter range mid-window.
    """
    steps = int(round(horizon / track.dt))
    n_fit = 0 if track.n < steps + 1 else (track.n - steps - 1) // steps + 1
    n_scenes = min(count, n_fit)
    if n_fit < count:
        log.warning("vehicle %d: only %d of %d requested scenes fit",
                    track.vehicle_id, n_fit, count)

    scenes = []
    for w in range(n_scenes):
        i0 = w * steps
        gt = track.window(i0, i0 + steps + 1)
        start = gt.t0
        end = gt.end_time
        neighbors: dict[int, VehicleTrack] = {}
        for vid in sorted(tracks):
            other = tracks[vid]
            if vid == track.vehicle_id:
                continue
            lo = max(start, other.t0)
            hi = min(end, other.end_time)
            if hi < lo - 1e-9:
                continue
            j0 = int(round((lo - other.t0) / other.dt))
            j1 = int(round((hi - other.t0) / other.dt)) + 1
            k0 = int(round((lo - start) / track.dt))
            k1 = k0 + (j1 - j0)
            gap = np.abs(other.x[j0:j1] - gt.x[k0:k1])
            if gap.min() <= interaction_range:
                neighbors[vid] = other.window(j0, j1)
        scenes.append(Scene(
            scene_id=f"{track.vehicle_id}-{w:03d}",
            ego_id=track.vehicle_id,
            start_time=start,
            horizon=horizon,
            ego_init=gt.state(0),
            ego_ground_truth=gt,
            neighbor_tracks=neighbors,
        ))
    return scenes


def refit_demonstration(scene: Scene) -> CandidateTrajectory:
    """Recast the recorded ego trajectory in the candidate family.

    The quartic/quintic pair is solved against the recorded boundary
    states, so the demonstration carries analytic kinematics directly
    comparable with the generated candidates.
    """
    gt = scene.ego_ground_truth
    pair = PolynomialPair(
        lon=solve_longitudinal(gt.x[0], gt.vx[0], gt.ax[0],
                               gt.vx[-1], gt.ax[-1], scene.horizon),
        lat=solve_lateral(gt.y[0], gt.vy[0], gt.ay[0],
                          gt.y[-1], gt.vy[-1], gt.ay[-1], scene.horizon),
        horizon=scene.horizon,
    )
    return pair.sample(gt.dt, source="demonstration")


def write_track_store(tracks: dict[int, VehicleTrack], path) -> None:
    """Write the canonical track store: CSV, meters/seconds, 6 decimals."""
    with open(path, "w") as fh:
        fh.write(",".join(STORE_COLUMNS) + "\n")
        for vid in sorted(tracks):
            tr = tracks[vid]
            times = tr.times
            for i in range(tr.n):
                fh.write(
                    f"{tr.vehicle_id},{times[i]:.6f},{tr.x[i]:.6f},"
                    f"{tr.y[i]:.6f},{tr.vx[i]:.6f},{tr.vy[i]:.6f},"
                    f"{tr.ax[i]:.6f},{tr.ay[i]:.6f},{int(tr.lane_ids[i])},"
                    f"{tr.length:.6f},{tr.width:.6f}\n")


def read_track_store(path) -> dict[int, VehicleTrack]:
    """Read a canonical track store back into smoothed tracks."""
    df = pd.read_csv(path)
    missing = [c for c in STORE_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing store column(s): "
                          + ", ".join(missing))
    if len(df) == 0:
        raise DataError(f"{path}: store contains no rows")
    tracks: dict[int, VehicleTrack] = {}
    for vid, group in df.groupby("vehicle_id", sort=True):
        group = group.sort_values("t")
        t = group["t"].to_numpy(dtype=float)
        if len(t) > 1:
            spacing = np.diff(t)
            if np.any(np.abs(spacing - DT) > 1e-6):
                raise DataError(f"vehicle {vid}: store samples not at "
                                f"{DT} s spacing")
        tracks[int(vid)] = VehicleTrack(
            vehicle_id=int(vid), t0=float(t[0]), dt=DT,
            x=group["x"].to_numpy(dtype=float),
            y=group["y"].to_numpy(dtype=float),
            vx=group["vx"].to_numpy(dtype=float),
            vy=group["vy"].to_numpy(dtype=float),
            ax=group["ax"].to_numpy(dtype=float),
            ay=group["ay"].to_numpy(dtype=float),
            lane_ids=group["lane_id"].to_numpy(dtype=np.int64),
            length=float(group["length"].iloc[0]),
            width=float(group["width"].iloc[0]),
        )
    return tracks
