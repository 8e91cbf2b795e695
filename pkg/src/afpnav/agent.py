"""Hierarchical audio-goal navigation.

Every step the agent senses depth, updates its map, predicts the acoustic
field and (maybe) adopts the field peak as its long-term goal.  It then plans
with fast marching over the observed map, takes the steepest-descent
neighbour as a short-term goal and turns or steps toward it.  The stop rule
is only consulted once the long-term goal is reached.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .acoustics import AcousticField, GridEnv
from .afp import BandErrorPrior, NoiseModel, NoSignalError, Strategy, field_peak, predict_field
from .eikonal import descend_step, fmm_solve, nearest_navigable
from .episodes import Episode, EpisodeResult
from .gridworld import (
    DEFAULT_FOV,
    DEFAULT_MAX_RANGE,
    DEFAULT_N_RAYS,
    FORWARD_STEP,
    TURN_ANGLE,
    Action,
    ObservedMap,
    OccupancyGrid,
    Pose,
    apply_action,
    integrate_observation,
    raycast_depth,
)

ALIGN_TOLERANCE = TURN_ANGLE / 2


class Status(enum.Enum):
    RUNNING = "RUNNING"
    STOPPED = "STOPPED"
    TIMEOUT = "TIMEOUT"


class Policy(enum.Enum):
    AFP = "afp"
    DIRECTION_FOLLOWER = "direction_follower"


@dataclass(frozen=True)
class AgentConfig:
    max_steps: int = 500
    success_radius: float = 1.0
    forward_step: float = FORWARD_STEP
    turn_angle: float = TURN_ANGLE
    fov: float = DEFAULT_FOV
    n_rays: int = DEFAULT_N_RAYS
    max_range: float = DEFAULT_MAX_RANGE
    field_size: int = 9
    field_pitch: float = 0.5
    stuck_limit: int = 20
    policy: Policy = Policy.AFP
    follow_distance: float = 2.0


@dataclass(frozen=True)
class Goal:
    point: tuple[float, float]
    value: float
    cell: tuple[int, int]


@dataclass(frozen=True)
class NavState:
    pose: Pose
    observed: ObservedMap
    goal: Goal | None = None
    steps_taken: int = 0
    path_length: float = 0.0
    status: Status = Status.RUNNING


def observed_cell(observed: ObservedMap, point) -> tuple[int, int]:
    u, v = observed.grid_coords(point[0], point[1])
    w, h = observed.state.shape
    return min(max(int(math.floor(u)), 0), w - 1), min(max(int(math.floor(v)), 0), h - 1)


def _cell_center(observed: ObservedMap, cell) -> tuple[float, float]:
    return (observed.origin[0] + cell[0] * observed.resolution, observed.origin[1] + cell[1] * observed.resolution)


def _make_goal(observed: ObservedMap, point, value: float) -> Goal:
    cell = nearest_navigable(observed, observed_cell(observed, point))
    return Goal((float(point[0]), float(point[1])), float(value), cell)


def maybe_update_goal(state: NavState, f: AcousticField) -> NavState:
    """Adopt the field peak as long-term goal if there is none or it is strictly louder."""
    cell, value = field_peak(f)
    if value <= 0:
        return state
    if state.goal is not None and not value > state.goal.value:
        return state
    return replace(state, goal=_make_goal(state.observed, f.cell_position(cell), value))


def should_stop(f: AcousticField) -> bool:
    cell, _ = field_peak(f)
    return cell == f.center_index


def _wrap_pi(a: float) -> float:
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a < 0:
        a += 2 * math.pi
    return a - math.pi


def act_toward(pose: Pose, target, tolerance: float = ALIGN_TOLERANCE) -> Action:
    """Turn toward ``target`` until within half a turn increment, then step forward."""
    bearing = math.atan2(target[1] - pose.y, target[0] - pose.x)
    diff = _wrap_pi(bearing - pose.heading)
    if abs(diff) <= tolerance + 1e-9:
        return Action.MOVE_FORWARD
    if abs(abs(diff) - math.pi) < 1e-12:
        return Action.TURN_LEFT
    return Action.TURN_LEFT if diff > 0 else Action.TURN_RIGHT


def direction_goal(pose: Pose, f: AcousticField, distance: float = 2.0) -> tuple[float, float] | None:
    """Point ``distance`` metres from the agent toward the field peak; None if the peak is central."""
    cell, _ = field_peak(f)
    c = f.size // 2
    if cell == (c, c):
        return None
    ang = math.atan2(cell[1] - c, cell[0] - c)
    return (pose.x + distance * math.cos(ang), pose.y + distance * math.sin(ang))


def direction_follower_step(env: GridEnv, state: NavState, f: AcousticField | None, config: AgentConfig = AgentConfig()) -> tuple[NavState, Action]:
    """Baseline: head 2 m along the predicted peak direction with the same planner."""
    goal = state.goal
    if f is not None:
        point = direction_goal(state.pose, f, config.follow_distance)
        if point is not None:
            grid = env.grid
            lo_x, lo_y = grid.origin
            hi_x = lo_x + (grid.width - 1) * grid.resolution
            hi_y = lo_y + (grid.height - 1) * grid.resolution
            point = (min(max(point[0], lo_x), hi_x), min(max(point[1], lo_y), hi_y))
            goal = _make_goal(state.observed, point, field_peak(f)[1])
    state = replace(state, goal=goal)
    if goal is None:
        return state, Action.TURN_LEFT
    return state, _plan_action(state)


def _arrived(state: NavState) -> bool:
    i, j = observed_cell(state.observed, state.pose.position)
    gi, gj = state.goal.cell
    return max(abs(i - gi), abs(j - gj)) <= 1


def _plan_action(state: NavState) -> Action:
    obs = state.observed
    goal_cell = state.goal.cell
    here = observed_cell(obs, state.pose.position)
    try:
        dist = fmm_solve(obs, [goal_cell])
    except ValueError:
        return Action.TURN_LEFT
    if not np.isfinite(dist[here]):
        return Action.TURN_LEFT
    nxt = descend_step(dist, here)
    target = _cell_center(obs, nxt)
    if math.hypot(target[0] - state.pose.x, target[1] - state.pose.y) < 1e-9:
        return Action.TURN_LEFT
    return act_toward(state.pose, target)


@dataclass
class StepRecord:
    step: int
    pose: Pose
    action: Action
    goal: tuple[float, float] | None
    peak_cell: tuple[int, int] | None
    peak_value: float | None

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "pose": [self.pose.x, self.pose.y, math.degrees(self.pose.heading)],
            "action": self.action.value,
            "goal": None if self.goal is None else list(self.goal),
            "peak_cell": None if self.peak_cell is None else list(self.peak_cell),
            "peak_value": self.peak_value,
        }


@dataclass
class EpisodeTrace:
    result: EpisodeResult
    poses: list[Pose]
    steps: list[StepRecord]
    goals: list[Goal]


def shortest_path_length(grid: OccupancyGrid, start, goal) -> float:
    d = fmm_solve(grid, [grid.world_to_cell(goal)])
    return d[grid.world_to_cell(start)]


def run_episode(
    env: GridEnv,
    episode: Episode,
    strategy: Strategy = Strategy.ORACLE,
    noise: NoiseModel | None = None,
    prior: BandErrorPrior | None = None,
    config: AgentConfig = AgentConfig(),
    strategy_name: str | None = None,
) -> EpisodeTrace:
    grid = env.grid
    if not grid.is_free_point(episode.start.position):
        raise ValueError("episode start is not on a free cell")
    if not grid.is_free_point(episode.goal):
        raise ValueError("episode goal is not on a free cell")
    if len(episode.spectrum) != env.n_bands:
        raise ValueError("episode spectrum does not match the scene's band count")
    if noise is None:
        noise = NoiseModel.silent(env.n_bands)
    strategy = Strategy.parse(strategy) if isinstance(strategy, str) else strategy

    state = NavState(episode.start, ObservedMap.initial(grid, episode.start))
    poses = [state.pose]
    records: list[StepRecord] = []
    goals: list[Goal] = []
    still = 0
    for step in range(config.max_steps):
        scan = raycast_depth(grid, state.pose, config.fov, config.n_rays, config.max_range)
        state = replace(state, observed=integrate_observation(state.observed, state.pose, scan))
        try:
            f = predict_field(
                strategy, env, episode.goal, episode.spectrum, state.pose.position, noise, prior,
                key=(episode.seed, step), size=config.field_size, pitch=config.field_pitch,
            )
        except NoSignalError:
            f = None

        if config.policy is Policy.DIRECTION_FOLLOWER:
            gap = math.hypot(state.pose.x - episode.goal[0], state.pose.y - episode.goal[1])
            if gap <= config.success_radius:
                action = Action.STOP
            else:
                state, action = direction_follower_step(env, state, f, config)
        else:
            action = None
            if state.goal is not None and state.goal.cell != nearest_navigable(state.observed, state.goal.cell):
                state = replace(state, goal=_make_goal(state.observed, state.goal.point, state.goal.value))
            if f is not None:
                before = state.goal
                state = maybe_update_goal(state, f)
                if state.goal is not before:
                    goals.append(state.goal)
            if state.goal is not None and _arrived(state):
                if f is not None and should_stop(f):
                    action = Action.STOP
                elif f is not None and observed_cell(state.observed, state.pose.position) == state.goal.cell:
                    # standing on the goal and still not centred: take the current peak whatever its value
                    cell, value = field_peak(f)
                    if value > 0:
                        state = replace(state, goal=_make_goal(state.observed, f.cell_position(cell), value))
                        goals.append(state.goal)
            if action is None:
                action = Action.TURN_LEFT if state.goal is None else _plan_action(state)

        peak = field_peak(f) if f is not None else None
        records.append(StepRecord(
            step, state.pose, action,
            None if state.goal is None else state.goal.point,
            None if peak is None else peak[0],
            None if peak is None else peak[1],
        ))
        if action is Action.STOP:
            state = replace(state, steps_taken=step + 1, status=Status.STOPPED)
            break
        new_pose = apply_action(grid, state.pose, action, config.forward_step, config.turn_angle)
        moved = action is Action.MOVE_FORWARD and new_pose.position != state.pose.position
        still = 0 if new_pose.position != state.pose.position else still + 1
        state = replace(
            state,
            pose=new_pose,
            steps_taken=step + 1,
            path_length=state.path_length + (config.forward_step if moved else 0.0),
        )
        poses.append(new_pose)
        if still >= config.stuck_limit:
            # no progress: drop the goal so the next field peak is taken unconditionally
            state = replace(state, goal=None)
            still = 0
    else:
        state = replace(state, status=Status.TIMEOUT)

    l = shortest_path_length(grid, episode.start.position, episode.goal)
    gap = math.hypot(state.pose.x - episode.goal[0], state.pose.y - episode.goal[1])
    success = state.status is Status.STOPPED and gap <= config.success_radius
    result = EpisodeResult.build(
        episode.episode_id,
        strategy_name or strategy.value,
        success,
        l,
        state.path_length,
        state.steps_taken,
        state.status.value,
    )
    return EpisodeTrace(result, poses, records, goals)
