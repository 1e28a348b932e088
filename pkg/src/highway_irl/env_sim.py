"""Interaction-aware micro-simulation of one candidate trajectory.

The ego vehicle tracks its candidate with a pure-pursuit steering law and a
proportional speed law on a kinematic bicycle. Recorded neighbors replay
their logs until the ego (or a vehicle already reacting to the ego) gets
close enough in front of them that the recorded motion stops being
credible; from then on they follow the Intelligent Driver Model. Only
vehicles within 50 m of the ego are eligible to react, re-evaluated every
step. A forecast mode drives all neighbors with IDM plus MOBIL lane
changes from their initial states alone, for deployment settings where no
recorded future exists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .data_ingest import Scene
from .road import RoadModel
from .trajectory_gen import CandidateTrajectory, solve_lateral

MODES = ("reactive_replay", "fixed_replay", "forecast")
INTERACTION_RANGE = 50.0
MIN_SPEED = 0.1
MIN_GAP = 0.01
MAX_BRAKE = -9.0


class ConfigError(ValueError):
    """Simulation request inconsistent with the scene or configuration."""


@dataclass(frozen=True)
class IDMParams:
    """Intelligent Driver Model parameters; all values must be positive."""

    v0: float
    a_max: float
    tau: float
    b: float
    s0: float
    delta: float = 4.0


def training_idm(v0: float) -> IDMParams:
    """Aggressive-response parameter set used inside the training environment."""
    return IDMParams(v0=v0, a_max=5.0, tau=1.0, b=3.0, s0=1.0)


def baseline_idm(v0: float) -> IDMParams:
    """Standard calibrated parameter set used for prediction baselines and
    the forecast environment."""
    return IDMParams(v0=v0, a_max=1.3, tau=1.2, b=0.7, s0=1.5)


@dataclass(frozen=True)
class MOBILParams:
    b_safe: float = 2.0
    politeness: float = 0.01
    a_threshold: float = 0.2


@dataclass(frozen=True)
class ControllerParams:
    """Pure-pursuit tracking constants. Lookahead = max(base, gain * speed)."""

    lookahead_base: float = 4.0
    lookahead_gain: float = 0.8
    speed_gain: float = 1.5
    max_steer: float = 0.6
    accel_min: float = -9.0
    accel_max: float = 5.0
    wheelbase_ratio: float = 0.6


@dataclass
class VehicleState:
    """Pose and scalar kinematics of one vehicle at one instant."""

    x: float
    y: float
    heading: float
    speed: float
    accel: float
    length: float
    width: float
    mode: str = "replay"


@dataclass(frozen=True)
class Collision:
    kind: str = "none"            # none | vehicle | curb
    vehicle_id: int | None = None
    step: int | None = None

    @property
    def happened(self) -> bool:
        return self.kind != "none"


@dataclass
class RolloutResult:
    """Full simulated history of one candidate in its scene."""

    candidate: CandidateTrajectory
    mode: str
    road: RoadModel
    ego_states: list[VehicleState]
    neighbor_states: dict[int, list[VehicleState]]
    presence: dict[int, np.ndarray]
    override_events: list[tuple[int, float]]
    collision: Collision
    influenced_decels: list[dict[int, float]]

    @property
    def n_steps(self) -> int:
        return len(self.ego_states)

    @property
    def ego_endpoint(self) -> np.ndarray:
        last = self.ego_states[-1]
        return np.array([last.x, last.y])


def idm_acceleration(speed: float, closing_speed: float, gap: float,
                     p: IDMParams) -> float:
    """IDM longitudinal acceleration toward desired speed and spacing.

    Parameters
    ----------
    speed : float
        Current speed of the follower, m/s.
    closing_speed : float
        Follower speed minus leader speed, m/s.
    gap : float
        Bumper-to-bumper spacing, m. Pass math.inf for a free road.

    Returns
    -------
    float
        Acceleration clamped to [-9, a_max] m/s^2.
    """
    v0 = max(p.v0, MIN_SPEED)
    gap = max(gap, MIN_GAP)
    s_star = p.s0 + speed * p.tau + speed * closing_speed / (2.0 * math.sqrt(p.a_max * p.b))
    a = p.a_max * (1.0 - (speed / v0) ** p.delta - (s_star / gap) ** 2)
    return min(max(a, MAX_BRAKE), p.a_max)


def desired_gap(speed: float, closing_speed: float, p: IDMParams) -> float:
    """IDM desired spacing s*; the replay-override trigger threshold."""
    return p.s0 + speed * p.tau + speed * closing_speed / (2.0 * math.sqrt(p.a_max * p.b))


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def pure_pursuit_step(state: VehicleState, reference: CandidateTrajectory,
                      t: float, params: ControllerParams = ControllerParams()
                      ) -> tuple[float, float]:
    """One control evaluation against a time-parameterized reference.

    Steering aims at the first reference sample at least one lookahead
    distance away (searching forward from the current time); acceleration
    is proportional tracking of the reference speed at that sample. Past
    the end of the reference the last point is held.

    Returns
    -------
    (steer, accel)
        Steering clamped to |steer| <= max_steer, acceleration to the
        controller's bounds.
    """
    n = reference.n
    ref_dt = reference.t[1] - reference.t[0]
    i = min(max(int(round(t / ref_dt)), 0), n - 1)
    lookahead = max(params.lookahead_base, params.lookahead_gain * state.speed)

    j = n - 1
    for k in range(i, n):
        if math.hypot(reference.x[k] - state.x, reference.y[k] - state.y) >= lookahead:
            j = k
            break
    dx = reference.x[j] - state.x
    dy = reference.y[j] - state.y
    dist = math.hypot(dx, dy)
    alpha = _wrap_angle(math.atan2(dy, dx) - state.heading)
    wheelbase = params.wheelbase_ratio * state.length
    steer = math.atan2(2.0 * wheelbase * math.sin(alpha), max(dist, 1e-6))
    steer = min(max(steer, -params.max_steer), params.max_steer)

    v_ref = math.hypot(reference.vx[j], reference.vy[j])
    accel = params.speed_gain * (v_ref - state.speed)
    accel = min(max(accel, params.accel_min), params.accel_max)
    return steer, accel


def bicycle_step(state: VehicleState, steer: float, accel: float,
                 dt: float, wheelbase: float) -> VehicleState:
    """Kinematic bicycle update. Displacement uses the pre-update speed and
    heading, so a stopped vehicle does not turn in place."""
    x = state.x + state.speed * math.cos(state.heading) * dt
    y = state.y + state.speed * math.sin(state.heading) * dt
    heading = state.heading + state.speed / wheelbase * math.tan(steer) * dt
    speed = max(0.0, state.speed + accel * dt)
    return VehicleState(x=x, y=y, heading=heading, speed=speed, accel=accel,
                        length=state.length, width=state.width, mode=state.mode)


def vehicle_corners(state: VehicleState) -> np.ndarray:
    """The four body corners of the oriented footprint rectangle, (4, 2)."""
    c, s = math.cos(state.heading), math.sin(state.heading)
    hl, hw = state.length / 2.0, state.width / 2.0
    local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([state.x, state.y])


def collision_check(a: VehicleState, b: VehicleState) -> bool:
    """Oriented-rectangle overlap via the separating axis test."""
    ca, cb = vehicle_corners(a), vehicle_corners(b)
    for ang in (a.heading, a.heading + math.pi / 2,
                b.heading, b.heading + math.pi / 2):
        axis = np.array([math.cos(ang), math.sin(ang)])
        pa, pb = ca @ axis, cb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def curb_collision(state: VehicleState, road: RoadModel) -> bool:
    """True when any body corner leaves the drivable lateral band."""
    lo, hi = road.outer_bounds
    ys = vehicle_corners(state)[:, 1]
    return bool(ys.min() < lo or ys.max() > hi)


@dataclass
class _Agent:
    """Snapshot of one vehicle for leader searches and MOBIL arithmetic."""

    vid: int
    x: float
    y: float
    speed: float
    length: float
    v0: float
    is_ego: bool = False
    reacting: bool = False


def _front_of(x: float, y: float, agents: list[_Agent], half_width: float,
              exclude: int | None = None) -> _Agent | None:
    best = None
    for a in agents:
        if a.vid == exclude:
            continue
        if a.x > x and abs(a.y - y) <= half_width:
            if best is None or a.x < best.x:
                best = a
    return best


def _rear_of(x: float, y: float, agents: list[_Agent], half_width: float,
             exclude: int | None = None) -> _Agent | None:
    best = None
    for a in agents:
        if a.vid == exclude:
            continue
        if a.x < x and abs(a.y - y) <= half_width:
            if best is None or a.x > best.x:
                best = a
    return best


def _bumper_gap(rear: _Agent, front: _Agent) -> float:
    return front.x - rear.x - (front.length + rear.length) / 2.0


def _idm_toward(agent: _Agent, front: _Agent | None,
                make_idm, v0: float | None = None) -> float:
    p = make_idm(agent.v0 if v0 is None else v0)
    if front is None:
        return idm_acceleration(agent.speed, 0.0, math.inf, p)
    return idm_acceleration(agent.speed, agent.speed - front.speed,
                            _bumper_gap(agent, front), p)


def mobil_lane_gain(agent: _Agent, agents: list[_Agent], y_target: float,
                    make_idm, mobil: MOBILParams,
                    half_width: float) -> tuple[bool, float]:
    """Safety check and acceleration gain for moving `agent` to y_target.

    Gain is the agent's own IDM improvement plus politeness-weighted
    changes for the new and old followers; safe means the new follower
    would not have to brake harder than b_safe.

    Returns
    -------
    (safe, gain)
    """
    others = [a for a in agents if a.vid != agent.vid]

    a_old = _idm_toward(agent, _front_of(agent.x, agent.y, others, half_width), make_idm)
    new_front = _front_of(agent.x, y_target, others, half_width)
    a_new = _idm_toward(agent, new_front, make_idm)

    moved = _Agent(vid=agent.vid, x=agent.x, y=y_target, speed=agent.speed,
                   length=agent.length, v0=agent.v0)

    nf = _rear_of(agent.x, y_target, others, half_width)
    d_nf = 0.0
    safe = True
    if nf is not None:
        nf_before = _idm_toward(nf, _front_of(nf.x, nf.y, others, half_width),
                                make_idm, v0=nf.speed)
        nf_after = _idm_toward(nf, moved, make_idm, v0=nf.speed)
        safe = nf_after >= -mobil.b_safe
        d_nf = nf_after - nf_before

    of = _rear_of(agent.x, agent.y, others, half_width)
    d_of = 0.0
    if of is not None:
        of_before = _idm_toward(of, agent, make_idm, v0=of.speed)
        of_after = _idm_toward(
            of, _front_of(of.x, of.y, others, half_width, exclude=agent.vid),
            make_idm, v0=of.speed)
        d_of = of_after - of_before

    gain = (a_new - a_old) + mobil.politeness * (d_nf + d_of)
    return safe, gain


class _NeighborSim:
    """Runtime bookkeeping for one recorded neighbor inside a rollout."""

    __slots__ = ("vid", "length", "width", "first", "last", "log_x", "log_y",
                 "log_vx", "log_vy", "state", "mode", "influenced", "v0",
                 "frozen", "lat_coeffs", "lat_start", "lat_end", "y_hold")

    def __init__(self, vid, track, scene_start, dt, n_steps, forecast):
        self.vid = vid
        self.length = track.length
        self.width = track.width
        off = int(round((track.t0 - scene_start) / dt))
        self.first = off
        self.last = off + track.n - 1
        self.log_x = track.x
        self.log_y = track.y
        self.log_vx = track.vx
        self.log_vy = track.vy
        self.mode = "forecast" if forecast else "replay"
        self.influenced = False
        self.v0 = max(math.hypot(track.vx[0], track.vy[0]), MIN_SPEED)
        self.frozen = False
        self.lat_coeffs = None
        self.lat_start = 0.0
        self.lat_end = 0.0
        self.y_hold = float(track.y[0])
        self.state = self.log_state(self.first)

    def log_state(self, k: int) -> VehicleState:
        i = min(max(k - self.first, 0), self.last - self.first)
        vx, vy = self.log_vx[i], self.log_vy[i]
        return VehicleState(
            x=float(self.log_x[i]), y=float(self.log_y[i]),
            heading=math.atan2(vy, vx) if (vx, vy) != (0.0, 0.0) else 0.0,
            speed=float(math.hypot(vx, vy)), accel=0.0,
            length=self.length, width=self.width, mode=self.mode)


def rollout(scene: Scene, candidate: CandidateTrajectory, road: RoadModel,
            mode: str = "reactive_replay",
            controller: ControllerParams = ControllerParams(),
            mobil: MOBILParams = MOBILParams(),
            idm_factory=None,
            interaction_range: float = INTERACTION_RANGE,
            track_override_v0: bool = False) -> RolloutResult:
    """Simulate one candidate over the scene horizon.

    Parameters
    ----------
    mode : str
        "reactive_replay" (neighbors replay until the override trigger),
        "fixed_replay" (pure replay, no reactions), or "forecast"
        (neighbors driven by IDM + MOBIL from their initial states only).
    idm_factory : callable, optional
        v0 -> IDMParams for simulated neighbors. Defaults to the training
        set for replay modes and the baseline set for forecast mode.

    Notes
    -----
    An override is permanent, its v0 frozen at the speed the vehicle had
    when it triggered (set track_override_v0 to re-track it each step).
    The collision flag latches on the first contact; the struck vehicle
    freezes and the simulation continues so features keep accumulating.
    Vehicles past the downstream end of the road are excluded from all
    interaction checks.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown environment mode {mode!r}")
    if idm_factory is None:
        idm_factory = baseline_idm if mode == "forecast" else training_idm
    reactive = mode == "reactive_replay"

    n = candidate.n
    dt = float(candidate.t[1] - candidate.t[0])
    horizon = float(candidate.t[-1])
    half_width = 0.5 * road.lane_width

    ego = VehicleState(
        x=float(scene.ego_init[0]), y=float(scene.ego_init[1]),
        heading=math.atan2(scene.ego_init[3], scene.ego_init[2]),
        speed=float(math.hypot(scene.ego_init[2], scene.ego_init[3])),
        accel=float(scene.ego_init[4]),
        length=scene.ego_length, width=scene.ego_width, mode="ego")
    wheelbase = controller.wheelbase_ratio * ego.length

    sims: list[_NeighborSim] = []
    for vid in sorted(scene.neighbor_tracks):
        track = scene.neighbor_tracks[vid]
        if track.n == 0:
            raise ConfigError(f"scene {scene.scene_id}: neighbor {vid} has an "
                              "empty track slice")
        sim = _NeighborSim(vid, track, scene.start_time, dt, n,
                           forecast=(mode == "forecast"))
        if mode == "forecast" and sim.first > 0:
            continue   # no recorded future to forecast from
        sims.append(sim)

    ego_states = [ego]
    neighbor_states = {s.vid: [s.state] for s in sims}
    presence = {s.vid: np.zeros(n, dtype=bool) for s in sims}
    for s in sims:
        presence[s.vid][0] = s.first <= 0
    influenced: list[dict[int, float]] = [{}]
    override_events: list[tuple[int, float]] = []
    collision = Collision()

    def active(sim: _NeighborSim, k: int) -> bool:
        return sim.first <= k and sim.state.x <= road.length

    def check_collisions(k: int) -> Collision:
        for sim in sims:
            if active(sim, k) and collision_check(ego, sim.state):
                sim.frozen = True
                return Collision("vehicle", sim.vid, k)
        if curb_collision(ego, road):
            return Collision("curb", None, k)
        return Collision()

    hit = check_collisions(0)
    if hit.happened:
        collision = hit

    for k in range(1, n):
        t_prev = (k - 1) * dt

        agents = [_Agent(vid=-1, x=ego.x, y=ego.y, speed=ego.speed,
                         length=ego.length, v0=ego.speed, is_ego=True)]
        for sim in sims:
            if active(sim, k - 1):
                agents.append(_Agent(
                    vid=sim.vid, x=sim.state.x, y=sim.state.y,
                    speed=sim.state.speed, length=sim.length, v0=sim.v0,
                    reacting=(sim.mode == "idm_override" or sim.influenced)))

        steer, accel = pure_pursuit_step(ego, candidate, t_prev, controller)
        ego = bicycle_step(ego, steer, accel, dt, wheelbase)
        ego_states.append(ego)

        step_decels: dict[int, float] = {}
        for sim in sims:
            if k < sim.first:
                pass                              # not in the study area yet
            elif sim.frozen:
                pass
            elif k == sim.first:
                sim.state = sim.log_state(k)      # appears, replays this step
            elif sim.mode == "replay":
                me = next((a for a in agents if a.vid == sim.vid), None)
                if me is None:                    # beyond the study area
                    sim.state = sim.log_state(k)
                    presence[sim.vid][k] = True
                    neighbor_states[sim.vid].append(sim.state)
                    continue
                front = _front_of(me.x, me.y, agents, half_width, exclude=sim.vid)
                trigger = False
                if (reactive and front is not None
                        and (front.is_ego or front.reacting)
                        and abs(me.x - ego_states[k - 1].x) <= interaction_range):
                    gap = _bumper_gap(me, front)
                    p = idm_factory(me.speed)
                    if gap < desired_gap(me.speed, me.speed - front.speed, p):
                        trigger = True
                if trigger:
                    sim.mode = "idm_override"
                    sim.v0 = max(me.speed, MIN_SPEED)
                    sim.y_hold = sim.state.y
                    override_events.append((sim.vid, k * dt))
                    _integrate_idm(sim, agents, half_width, idm_factory, dt,
                                   track_override_v0)
                else:
                    sim.state = sim.log_state(k)
            elif sim.mode == "idm_override":
                _integrate_idm(sim, agents, half_width, idm_factory, dt,
                               track_override_v0)
            else:                                 # forecast
                _forecast_step(sim, agents, half_width, idm_factory, mobil,
                               road, dt, t_prev, horizon, override_events, k)

            if sim.mode == "idm_override" or (sim.mode == "forecast" and sim.influenced):
                if active(sim, k):
                    step_decels[sim.vid] = sim.state.accel

            presence[sim.vid][k] = sim.first <= k
            neighbor_states[sim.vid].append(sim.state)

        influenced.append(step_decels)
        if not collision.happened:
            hit = check_collisions(k)
            if hit.happened:
                collision = hit

    return RolloutResult(candidate=candidate, mode=mode, road=road,
                         ego_states=ego_states, neighbor_states=neighbor_states,
                         presence=presence, override_events=override_events,
                         collision=collision, influenced_decels=influenced)


def _integrate_idm(sim: _NeighborSim, agents: list[_Agent], half_width: float,
                   idm_factory, dt: float, track_v0: bool) -> None:
    st = sim.state
    if track_v0:
        sim.v0 = max(st.speed, MIN_SPEED)
    me = _Agent(vid=sim.vid, x=st.x, y=st.y, speed=st.speed,
                length=sim.length, v0=sim.v0)
    front = _front_of(me.x, me.y, agents, half_width, exclude=sim.vid)
    a = _idm_toward(me, front, idm_factory)
    disp = max(st.speed * dt + 0.5 * a * dt * dt, 0.0)
    sim.state = VehicleState(
        x=st.x + disp, y=sim.y_hold, heading=0.0,
        speed=max(0.0, st.speed + a * dt), accel=a,
        length=sim.length, width=sim.width, mode=sim.mode)


def _forecast_step(sim: _NeighborSim, agents: list[_Agent], half_width: float,
                   idm_factory, mobil: MOBILParams, road: RoadModel,
                   dt: float, t_prev: float, horizon: float,
                   override_events: list, k: int) -> None:
    st = sim.state
    me = _Agent(vid=sim.vid, x=st.x, y=st.y, speed=st.speed,
                length=sim.length, v0=sim.v0, reacting=sim.influenced)

    if sim.lat_coeffs is None and horizon - t_prev > 1.0:
        lane = road.lane_at(st.y)
        best = None
        for target in (road.left_of(lane), road.right_of(lane)):
            if target is None:
                continue
            safe, gain = mobil_lane_gain(me, agents, road.lane_center(target),
                                         idm_factory, mobil, half_width)
            if safe and gain > mobil.a_threshold:
                if best is None or gain > best[0]:
                    best = (gain, target)
        if best is not None:
            duration = min(5.0, horizon - t_prev)
            sim.lat_coeffs = solve_lateral(st.y, 0.0, 0.0,
                                           road.lane_center(best[1]), 0.0, 0.0,
                                           duration)
            sim.lat_start = t_prev
            sim.lat_end = t_prev + duration

    front = _front_of(me.x, me.y, agents, half_width, exclude=sim.vid)
    a = _idm_toward(me, front, idm_factory)
    if front is not None and (front.is_ego or front.reacting) and not sim.influenced:
        sim.influenced = True
        override_events.append((sim.vid, k * dt))

    t_now = t_prev + dt
    if sim.lat_coeffs is not None:
        tau = min(t_now, sim.lat_end) - sim.lat_start
        y = float(npoly.polyval(tau, sim.lat_coeffs))
        vy = float(npoly.polyval(tau, npoly.polyder(sim.lat_coeffs)))
        if t_now >= sim.lat_end:
            sim.lat_coeffs = None
        sim.y_hold = y
    else:
        y = sim.y_hold
        vy = 0.0

    disp = max(st.speed * dt + 0.5 * a * dt * dt, 0.0)
    speed = max(0.0, st.speed + a * dt)
    sim.state = VehicleState(
        x=st.x + disp, y=y,
        heading=math.atan2(vy, max(speed, MIN_SPEED)),
        speed=speed, accel=a,
        length=sim.length, width=sim.width,
        mode="idm_override" if sim.influenced else "forecast")


def dump_rollout_trace(result: RolloutResult, path) -> None:
    """Write one JSON line per step: every vehicle state, override flags,
    and the latched collision indicator."""
    dt = float(result.candidate.t[1] - result.candidate.t[0])
    overridden = {vid: t for vid, t in result.override_events}
    with open(path, "w") as fh:
        for k in range(result.n_steps):
            ego = result.ego_states[k]
            rec = {
                "t": round(k * dt, 6),
                "ego": _state_dict(ego),
                "vehicles": {
                    str(vid): _state_dict(states[k])
                    for vid, states in sorted(result.neighbor_states.items())
                    if result.presence[vid][k]
                },
                "overridden": sorted(vid for vid, t in overridden.items()
                                     if t <= k * dt + 1e-9),
                "collision": bool(result.collision.happened
                                  and result.collision.step <= k),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _state_dict(s: VehicleState) -> dict:
    return {"x": round(s.x, 6), "y": round(s.y, 6),
            "heading": round(s.heading, 6), "speed": round(s.speed, 6),
            "accel": round(s.accel, 6), "mode": s.mode}
