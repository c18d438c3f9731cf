"""Step rewards for the reach and lift tasks.

Four training regimes share two underlying formulas:

  reach, shaped:  1                    if d <= 0.03 m
                  1 - tanh(10 * d)     otherwise
  reach, event:   1 if touched else 0

  lift, shaped:   2.25 if lifted; 1 if grasped; else 1 - tanh(10 * d)
  lift, event:    2.25 if lifted; 1.25 if grasped; 1 if touched; else 0

"dense" evaluates the shaped formula on the *estimated* gripper-block
distance, "oracle" on the true distance, "sparse" pays the event tiers from
true events only, and "dense2sparse" is dense before the switch episode and
sparse from it onward. Event tiers pay every step spent in the phase, and
when several flags hold the highest tier wins (lifted > grasped > touched).

The evaluation reward is always the shaped formula on true state, whatever
regime the policy was trained with.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import tanh

import numpy as np

from .env import StepEvents
from .errors import ConfigurationError, DomainError

REWARD_MODES = ("dense", "sparse", "oracle", "dense2sparse")
TOUCH_DISTANCE = 0.03

REACH_MAX_STEP_REWARD = 1.0
LIFT_MAX_STEP_REWARD = 2.25


@dataclass(frozen=True)
class RewardMode:
    """Training reward regime; dense2sparse carries its switch episode."""

    kind: str
    switch_episode: int | None = None

    def __post_init__(self):
        if self.kind not in REWARD_MODES:
            raise ConfigurationError(
                f"reward mode must be one of {REWARD_MODES}, got {self.kind!r}"
            )
        if self.kind == "dense2sparse":
            if self.switch_episode is None or self.switch_episode < 1:
                raise ConfigurationError(
                    "dense2sparse needs switch_episode >= 1, got "
                    f"{self.switch_episode!r}"
                )
        elif self.switch_episode is not None:
            raise ConfigurationError(f"switch_episode is only valid for dense2sparse")

    def label(self) -> str:
        if self.kind == "dense2sparse":
            return f"dense2sparse{self.switch_episode}"
        return self.kind


@dataclass(frozen=True)
class RewardContext:
    """Everything a step reward can depend on. Fields a mode does not use may be None."""

    task: str
    episode_index: int
    events: StepEvents
    est_distance: float | None = None
    true_distance: float | None = None


def reach_dense(d: float) -> float:
    if d < 0.0:
        raise DomainError(f"distance must be >= 0, got {d}")
    if d <= TOUCH_DISTANCE:
        return 1.0
    return 1.0 - tanh(10.0 * d)


def reach_sparse(events: StepEvents) -> float:
    return 1.0 if events.touched else 0.0


def lift_dense(d: float, events: StepEvents) -> float:
    if d < 0.0:
        raise DomainError(f"distance must be >= 0, got {d}")
    if events.lifted:
        return 2.25
    if events.grasped:
        return 1.0
    return 1.0 - tanh(10.0 * d)


def lift_sparse(events: StepEvents) -> float:
    if events.lifted:
        return 2.25
    if events.grasped:
        return 1.25
    if events.touched:
        return 1.0
    return 0.0


def _shaped(task: str, d: float, events: StepEvents) -> float:
    if task == "reach":
        return reach_dense(d)
    return lift_dense(d, events)


def _event_tiers(task: str, events: StepEvents) -> float:
    if task == "reach":
        return reach_sparse(events)
    return lift_sparse(events)


def _require(value, mode_kind, name):
    if value is None:
        raise ConfigurationError(f"{mode_kind} reward needs {name} in the context")
    return value


def step_reward(mode: RewardMode, ctx: RewardContext) -> float:
    """Training reward for one step under the given regime.

    Shaped lift rewards use the estimated (or true, for oracle) distance for
    the reaching stage, but always the true grasp/lift events: the discrete
    phase judgements come from the environment, not the estimator.
    """
    kind = mode.kind
    if kind == "dense2sparse":
        kind = "dense" if ctx.episode_index < mode.switch_episode else "sparse"
    if kind == "dense":
        return _shaped(ctx.task, _require(ctx.est_distance, "dense", "est_distance"), ctx.events)
    if kind == "oracle":
        return _shaped(ctx.task, _require(ctx.true_distance, "oracle", "true_distance"), ctx.events)
    return _event_tiers(ctx.task, ctx.events)


def eval_reward(ctx: RewardContext) -> float:
    """Unified evaluation reward: the shaped formula on true state, any regime."""
    return _shaped(ctx.task, _require(ctx.true_distance, "eval", "true_distance"), ctx.events)


# Vectorized twins of the scalar formulas, used on replayed batches. Context
# rows are (episode_index, est_distance, true_distance, touched, grasped,
# lifted) as float64 columns.

CTX_EPISODE = 0
CTX_EST_DISTANCE = 1
CTX_TRUE_DISTANCE = 2
CTX_TOUCHED = 3
CTX_GRASPED = 4
CTX_LIFTED = 5
CONTEXT_DIM = 6


def pack_context(ctx: RewardContext) -> np.ndarray:
    row = np.empty(CONTEXT_DIM)
    row[CTX_EPISODE] = ctx.episode_index
    row[CTX_EST_DISTANCE] = np.nan if ctx.est_distance is None else ctx.est_distance
    row[CTX_TRUE_DISTANCE] = np.nan if ctx.true_distance is None else ctx.true_distance
    row[CTX_TOUCHED] = 1.0 if ctx.events.touched else 0.0
    row[CTX_GRASPED] = 1.0 if ctx.events.grasped else 0.0
    row[CTX_LIFTED] = 1.0 if ctx.events.lifted else 0.0
    return row


def _shaped_batch(task: str, d: np.ndarray, grasped, lifted) -> np.ndarray:
    base = 1.0 - np.tanh(10.0 * d)
    if task == "reach":
        return np.where(d <= TOUCH_DISTANCE, 1.0, base)
    return np.where(lifted > 0.0, 2.25, np.where(grasped > 0.0, 1.0, base))


def _event_tiers_batch(task: str, touched, grasped, lifted) -> np.ndarray:
    if task == "reach":
        return np.where(touched > 0.0, 1.0, 0.0)
    return np.where(
        lifted > 0.0, 2.25,
        np.where(grasped > 0.0, 1.25, np.where(touched > 0.0, 1.0, 0.0)),
    )


def step_reward_batch(mode: RewardMode, task: str, contexts: np.ndarray,
                      current_episode: int | None = None) -> np.ndarray:
    """step_reward over packed context rows.

    For dense2sparse the phase is decided by `current_episode` (the episode
    the learner is in now), so replayed experience is always scored under the
    regime active at sampling time.
    """
    kind = mode.kind
    if kind == "dense2sparse":
        if current_episode is None:
            raise ConfigurationError("dense2sparse relabeling needs current_episode")
        kind = "dense" if current_episode < mode.switch_episode else "sparse"
    touched = contexts[:, CTX_TOUCHED]
    grasped = contexts[:, CTX_GRASPED]
    lifted = contexts[:, CTX_LIFTED]
    if kind == "dense":
        return _shaped_batch(task, contexts[:, CTX_EST_DISTANCE], grasped, lifted)
    if kind == "oracle":
        return _shaped_batch(task, contexts[:, CTX_TRUE_DISTANCE], grasped, lifted)
    return _event_tiers_batch(task, touched, grasped, lifted)


def reward_table() -> list[tuple[str, str, float]]:
    """Audit table of all four formulas at reference distances and event tiers."""
    rows = []
    for d in (0.0, 0.03, 0.05, 0.1, 0.2):
        rows.append(("reach_shaped", f"d={d}", reach_dense(d)))
    for touched in (False, True):
        rows.append(("reach_event", f"touched={touched}", reach_sparse(_events(touched, False, False))))
    for d in (0.0, 0.03, 0.05, 0.1, 0.2):
        rows.append(("lift_shaped", f"reaching d={d}", lift_dense(d, _events(False, False, False))))
    rows.append(("lift_shaped", "grasped", lift_dense(0.0, _events(True, True, False))))
    rows.append(("lift_shaped", "lifted", lift_dense(0.0, _events(True, True, True))))
    rows.append(("lift_event", "reaching", lift_sparse(_events(False, False, False))))
    rows.append(("lift_event", "touched", lift_sparse(_events(True, False, False))))
    rows.append(("lift_event", "grasped", lift_sparse(_events(True, True, False))))
    rows.append(("lift_event", "lifted", lift_sparse(_events(True, True, True))))
    return rows


def _events(touched, grasped, lifted) -> StepEvents:
    return StepEvents(touched=touched, grasped=grasped, lifted=lifted, done=False)
