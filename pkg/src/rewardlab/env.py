"""Kinematic manipulation simulator for the reach and lift tasks.

The arm is reduced to a point gripper moving in a Cartesian workspace box.
The block is a 5 cm cube resting on the table; once grasped it tracks the
gripper exactly and is never dropped. Dynamics are deterministic: the only
randomness is in env_reset's initial poses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError

TASKS = ("reach", "lift")

WORKSPACE_LO = np.array([-0.3, -0.3, 0.0])
WORKSPACE_HI = np.array([0.3, 0.3, 0.5])
TABLE_Z = 0.025            # resting height of the block center (half of 5 cm)
BLOCK_XY_RANGE = 0.15      # block center spawns uniformly in [-r, r]^2
RESET_GRIPPER_Z = (0.1, 0.3)
MAX_STEP = 0.02            # meters of gripper travel per unit velocity command
GRIP_RATE = 0.25           # change in grip degree per step
TOUCH_RADIUS = 0.03        # gripper-block distance counting as a touch
GRASP_RADIUS = 0.02        # proximity required for a grasp to latch
GRIP_CLOSED = 0.9          # grip degree required for a grasp to latch
LIFT_HEIGHT = 0.04         # block rise above TABLE_Z counting as lifted
HORIZON = 200

ACTION_DIM = 4             # velocity command (3) + grip command (1)
PROPRIOCEPTION_DIM = 7     # gripper position (3) + last displacement (3) + grip degree (1)
OBSERVATION_DIM = 10       # proprioception + estimated block position (3)


@dataclass
class Action:
    """Named view of the 4-vector actions the environment consumes."""

    velocity_cmd: np.ndarray   # 3-vector in [-1, 1], scaled to MAX_STEP
    grip_cmd: float            # > 0 closes, <= 0 opens

    def as_vector(self) -> np.ndarray:
        return np.append(np.asarray(self.velocity_cmd, dtype=np.float64), self.grip_cmd)

    @classmethod
    def from_vector(cls, vec) -> "Action":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(velocity_cmd=vec[:3].copy(), grip_cmd=float(vec[3]))


@dataclass
class StepEvents:
    """Discrete task events observed after one step."""

    touched: bool
    grasped: bool
    lifted: bool
    done: bool


@dataclass
class EnvState:
    """Ground-truth simulator state."""

    task: str
    gripper_pos: np.ndarray
    grip_degree: float
    block_pos: np.ndarray
    grasped: bool
    step_count: int
    last_disp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    done: bool = False
    horizon: int = HORIZON
    # When True an episode ends at task success (first touch for reach, first
    # lift for lift); when False it always runs to the horizon and success is
    # only reported through the per-step events. The training harness runs
    # full-horizon episodes so that holding the achieved phase keeps paying.
    terminate_on_success: bool = True


def env_reset(task, rng, horizon=HORIZON, terminate_on_success=True) -> EnvState:
    """Sample an initial state: block on the table, gripper open above it."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}, expected one of {TASKS}")
    block = np.array([
        rng.uniform(-BLOCK_XY_RANGE, BLOCK_XY_RANGE),
        rng.uniform(-BLOCK_XY_RANGE, BLOCK_XY_RANGE),
        TABLE_Z,
    ])
    gripper = np.array([
        rng.uniform(WORKSPACE_LO[0], WORKSPACE_HI[0]),
        rng.uniform(WORKSPACE_LO[1], WORKSPACE_HI[1]),
        rng.uniform(*RESET_GRIPPER_Z),
    ])
    return EnvState(
        task=task,
        gripper_pos=gripper,
        grip_degree=0.0,
        block_pos=block,
        grasped=False,
        step_count=0,
        horizon=horizon,
        terminate_on_success=terminate_on_success,
    )


def env_step(state: EnvState, action) -> tuple[EnvState, StepEvents]:
    """Advance one step. Pure: returns a new state and the step's events.

    Raises ProtocolError if the episode is already finished.
    """
    if state.done or state.step_count >= state.horizon:
        raise ProtocolError("episode is finished; reset before stepping again")
    if isinstance(action, Action):
        action = action.as_vector()
    action = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)

    disp = MAX_STEP * action[:3]
    gripper = np.clip(state.gripper_pos + disp, WORKSPACE_LO, WORKSPACE_HI)

    if state.grasped:
        # Grip command is ignored once holding the block; no drops.
        grip = state.grip_degree
        grasped = True
        block = gripper.copy()
    else:
        grip = float(np.clip(
            state.grip_degree + (GRIP_RATE if action[3] > 0.0 else -GRIP_RATE), 0.0, 1.0,
        ))
        block = state.block_pos
        dist = float(np.linalg.norm(gripper - block))
        grasped = dist <= TOUCH_RADIUS and grip >= GRIP_CLOSED and dist <= GRASP_RADIUS
        if grasped:
            block = gripper.copy()

    touched = float(np.linalg.norm(gripper - block)) <= TOUCH_RADIUS
    lifted = grasped and (block[2] - TABLE_Z >= LIFT_HEIGHT)
    success = touched if state.task == "reach" else lifted
    step_count = state.step_count + 1
    done = step_count >= state.horizon or (state.terminate_on_success and success)

    next_state = EnvState(
        task=state.task,
        gripper_pos=gripper,
        grip_degree=grip,
        block_pos=block,
        grasped=grasped,
        step_count=step_count,
        last_disp=disp,
        done=done,
        horizon=state.horizon,
        terminate_on_success=state.terminate_on_success,
    )
    return next_state, StepEvents(touched=touched, grasped=grasped, lifted=lifted, done=done)


def true_distance(state: EnvState) -> float:
    """Euclidean gripper-block distance in meters."""
    return float(np.linalg.norm(state.gripper_pos - state.block_pos))


def proprioception(state: EnvState) -> np.ndarray:
    """[gripper position (3), last commanded displacement (3), grip degree (1)]."""
    out = np.empty(PROPRIOCEPTION_DIM)
    out[0:3] = state.gripper_pos
    out[3:6] = state.last_disp
    out[6] = state.grip_degree
    return out


def build_observation(state: EnvState, estimated_block_pos) -> np.ndarray:
    """Agent-visible vector: proprioception plus the perceived block position."""
    out = np.empty(OBSERVATION_DIM)
    out[0:3] = state.gripper_pos
    out[3:6] = state.last_disp
    out[6] = state.grip_degree
    out[7:10] = estimated_block_pos
    return out
