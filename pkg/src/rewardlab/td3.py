"""Twin Delayed DDPG on the numpy MLP engine.

Clipped double-Q targets with target policy smoothing, delayed actor updates,
and Polyak-averaged target networks. Agents are plain data: every update
returns a new agent, so a training run is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NotReadyError, ShapeError
from .nncore import (
    AdamState,
    MLPParams,
    adam_init,
    adam_step,
    clone_params,
    mlp_backward,
    mlp_forward,
    mlp_init,
    polyak_update,
)

DEFAULT_HIDDEN = (256, 256)


@dataclass
class Transition:
    """One replay record. Actions live in [-1, 1]^A."""

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class Batch:
    """Column-major sample from the replay buffer."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    contexts: np.ndarray | None = None

    def __len__(self):
        return self.states.shape[0]


class ReplayBuffer:
    """Bounded FIFO ring of transitions with uniform with-replacement sampling.

    Optionally stores an extra float row per transition (reward context) so
    stored experience can be re-scored under a different reward regime later.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, context_dim: int = 0):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self._states = np.zeros((capacity, obs_dim))
        self._actions = np.zeros((capacity, act_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, obs_dim))
        self._dones = np.zeros(capacity)
        self._contexts = np.zeros((capacity, context_dim)) if context_dim else None

    def push(self, transition: Transition, context=None):
        """Insert one transition, overwriting the oldest once full."""
        i = self.cursor
        self._states[i] = transition.state
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_states[i] = transition.next_state
        self._dones[i] = float(transition.done)
        if self._contexts is not None:
            if context is None:
                raise ValueError("buffer was created with context_dim > 0; push a context")
            self._contexts[i] = context
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng) -> Batch:
        """Uniform with-replacement batch; deterministic given the rng state."""
        if self.size < batch_size:
            raise NotReadyError(
                f"buffer holds {self.size} transitions, need {batch_size} to sample"
            )
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
            dones=self._dones[idx],
            contexts=None if self._contexts is None else self._contexts[idx],
        )

    def contents(self) -> Batch:
        """All stored transitions in storage order (oldest not guaranteed first)."""
        n = self.size
        return Batch(
            states=self._states[:n].copy(),
            actions=self._actions[:n].copy(),
            rewards=self._rewards[:n].copy(),
            next_states=self._next_states[:n].copy(),
            dones=self._dones[:n].copy(),
            contexts=None if self._contexts is None else self._contexts[:n].copy(),
        )


@dataclass(frozen=True)
class TD3Hyperparams:
    discount: float = 0.9
    tau: float = 0.005
    policy_delay: int = 2
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise_std: float = 0.1
    batch_size: int = 256
    learning_rate: float = 3e-4

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")


@dataclass
class TD3Agent:
    actor: MLPParams
    actor_target: MLPParams
    critic1: MLPParams
    critic2: MLPParams
    critic1_target: MLPParams
    critic2_target: MLPParams
    actor_adam: AdamState
    critic1_adam: AdamState
    critic2_adam: AdamState
    hyper: TD3Hyperparams
    update_count: int = 0

    @property
    def obs_dim(self) -> int:
        return self.actor.layer_sizes[0]

    @property
    def act_dim(self) -> int:
        return self.actor.layer_sizes[-1]


def td3_init(obs_dim: int, act_dim: int, rng, hidden=DEFAULT_HIDDEN,
             hyper: TD3Hyperparams | None = None) -> TD3Agent:
    """Fresh agent: tanh-output actor, identity-output twin critics, targets cloned."""
    hyper = hyper or TD3Hyperparams()
    actor = mlp_init([obs_dim, *hidden, act_dim], "tanh", rng)
    critic1 = mlp_init([obs_dim + act_dim, *hidden, 1], "identity", rng)
    critic2 = mlp_init([obs_dim + act_dim, *hidden, 1], "identity", rng)
    return TD3Agent(
        actor=actor,
        actor_target=clone_params(actor),
        critic1=critic1,
        critic2=critic2,
        critic1_target=clone_params(critic1),
        critic2_target=clone_params(critic2),
        actor_adam=adam_init(actor, learning_rate=hyper.learning_rate),
        critic1_adam=adam_init(critic1, learning_rate=hyper.learning_rate),
        critic2_adam=adam_init(critic2, learning_rate=hyper.learning_rate),
        hyper=hyper,
    )


def select_action(agent: TD3Agent, observation, explore: bool, rng=None) -> np.ndarray:
    """Deterministic policy action, plus Gaussian exploration noise when exploring.

    Always clamped to [-1, 1] per entry.
    """
    observation = np.asarray(observation, dtype=np.float64)
    if observation.shape != (agent.obs_dim,):
        raise ShapeError(
            f"observation has shape {observation.shape}, expected ({agent.obs_dim},)"
        )
    action, _ = mlp_forward(agent.actor, observation)
    if explore:
        action = action + rng.normal(0.0, agent.hyper.exploration_noise_std, size=agent.act_dim)
    return np.clip(action, -1.0, 1.0)


def _critic_forward(critic: MLPParams, states, actions):
    sa = np.concatenate([states, actions], axis=1)
    q, cache = mlp_forward(critic, sa)
    return q[:, 0], cache


def compute_targets(agent: TD3Agent, batch: Batch, rng) -> np.ndarray:
    """Clipped double-Q targets with smoothed target actions.

    y = r + (1 - done) * gamma * min(Q1', Q2')(s', clamp(pi'(s') + clipped noise))
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    h = agent.hyper
    next_actions, _ = mlp_forward(agent.actor_target, batch.next_states)
    noise = np.clip(
        rng.normal(0.0, h.target_noise_std, size=next_actions.shape),
        -h.target_noise_clip, h.target_noise_clip,
    )
    next_actions = np.clip(next_actions + noise, -1.0, 1.0)
    q1, _ = _critic_forward(agent.critic1_target, batch.next_states, next_actions)
    q2, _ = _critic_forward(agent.critic2_target, batch.next_states, next_actions)
    return batch.rewards + (1.0 - batch.dones) * h.discount * np.minimum(q1, q2)


def _mse_step(critic: MLPParams, adam: AdamState, states, actions, targets):
    q, cache = _critic_forward(critic, states, actions)
    err = q - targets
    loss = float(np.mean(err**2))
    grad_out = (2.0 / err.shape[0]) * err[:, None]
    grads, _ = mlp_backward(critic, cache, grad_out)
    new_critic, new_adam = adam_step(critic, grads, adam)
    return new_critic, new_adam, loss


def update_critics(agent: TD3Agent, batch: Batch, targets: np.ndarray):
    """One Adam step on each critic toward the targets.

    Returns (new agent, summed pre-step MSE of both critics).
    """
    if targets.shape != (len(batch),):
        raise ShapeError(f"targets shape {targets.shape} != batch size {len(batch)}")
    c1, a1, loss1 = _mse_step(agent.critic1, agent.critic1_adam, batch.states, batch.actions, targets)
    c2, a2, loss2 = _mse_step(agent.critic2, agent.critic2_adam, batch.states, batch.actions, targets)
    new_agent = replace(agent, critic1=c1, critic2=c2, critic1_adam=a1, critic2_adam=a2)
    return new_agent, loss1 + loss2


def update_actor_and_targets(agent: TD3Agent, batch: Batch) -> TD3Agent:
    """Delayed policy update: ascend mean Q1(s, pi(s)), then Polyak all targets."""
    n = len(batch)
    actions, actor_cache = mlp_forward(agent.actor, batch.states)
    _, critic_cache = _critic_forward(agent.critic1, batch.states, actions)
    # d(mean Q1)/d(input) of the critic; the action block feeds the actor.
    ones = np.full((n, 1), 1.0 / n)
    _, dq_dsa = mlp_backward(agent.critic1, critic_cache, ones)
    dq_da = dq_dsa[:, agent.obs_dim:]
    actor_grads, _ = mlp_backward(agent.actor, actor_cache, -dq_da)
    new_actor, new_adam = adam_step(agent.actor, actor_grads, agent.actor_adam)

    tau = agent.hyper.tau
    return replace(
        agent,
        actor=new_actor,
        actor_adam=new_adam,
        actor_target=polyak_update(agent.actor_target, new_actor, tau),
        critic1_target=polyak_update(agent.critic1_target, agent.critic1, tau),
        critic2_target=polyak_update(agent.critic2_target, agent.critic2, tau),
    )


@dataclass
class TrainDiagnostics:
    critic_loss: float
    actor_updated: bool
    update_count: int


def train_step(agent: TD3Agent, buffer: ReplayBuffer, rng, relabel=None):
    """One TD3 update from a sampled batch. Returns (new agent, diagnostics).

    `relabel`, when given, maps the batch's stored context rows to fresh
    rewards; the sampled rewards are replaced before targets are computed.
    Raises NotReadyError (leaving the agent untouched) if the buffer cannot
    yet supply a batch.
    """
    batch = buffer.sample(agent.hyper.batch_size, rng)
    if relabel is not None:
        batch.rewards = relabel(batch.contexts)
    targets = compute_targets(agent, batch, rng)
    new_agent, critic_loss = update_critics(agent, batch, targets)
    count = agent.update_count + 1
    new_agent = replace(new_agent, update_count=count)
    actor_updated = count % agent.hyper.policy_delay == 0
    if actor_updated:
        new_agent = update_actor_and_targets(new_agent, batch)
    return new_agent, TrainDiagnostics(
        critic_loss=critic_loss, actor_updated=actor_updated, update_count=count,
    )
