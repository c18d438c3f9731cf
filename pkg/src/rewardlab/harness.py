"""Experiment orchestration: seeded training runs, greedy evaluation, the
reward-mode x camera-shift ablation grid, and CSV/manifest outputs.

Reproducibility contract: every artifact this module produces is a pure
function of (config, seed). One master seed derives separate named rng
streams (init, exploration, environment, perception, learner, evaluation),
so adding or removing evaluations never shifts the training sequences, and
evaluation never touches the agent or the replay buffer.

Episodes run the full horizon: success events are recorded but do not end
the episode, so every phase reward keeps paying while the phase holds (the
shaped and event formulas rate each step, and holding a completed phase is
what the returns reported for these tasks correspond to).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig, config_to_text
from .env import (
    ACTION_DIM,
    OBSERVATION_DIM,
    build_observation,
    env_reset,
    env_step,
    true_distance,
)
from .errors import ConfigurationError
from .nncore import MLPParams, adam_init
from .perception import PerceptionModel, calibrate_noise, estimate_block_position
from .rewards import (
    CONTEXT_DIM,
    REWARD_MODES,
    RewardContext,
    RewardMode,
    eval_reward,
    pack_context,
    step_reward,
    step_reward_batch,
)
from .td3 import ReplayBuffer, TD3Agent, TD3Hyperparams, Transition, select_action, td3_init, train_step

# Spawn keys of the named rng streams derived from one master seed.
STREAM_INIT = 0
STREAM_EXPLORE = 1
STREAM_ENV = 2
STREAM_PERCEPTION = 3
STREAM_LEARNER = 4
STREAM_EVAL_POINT = 5   # one sub-key per periodic evaluation
STREAM_FINAL_EVAL = 6

CURVE_HEADER = "episode,eval_mean_reward,eval_success_rate"
SUMMARY_HEADER = (
    "task,reward_mode,switch_episode,shift_deg,seeds,"
    "final_reward_mean,final_reward_std,success_mean,success_std"
)


class AblationAborted(RuntimeError):
    """A grid cell failed; carries the cells that had already completed."""

    def __init__(self, message, completed):
        super().__init__(message)
        self.completed = list(completed)


def derive_stream(seed: int, *key) -> np.random.Generator:
    """Named, independent rng stream for one consumer of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass
class TrainRecord:
    """Periodic-evaluation rows for one run: (episode, mean reward, success rate)."""

    rows: list

    def to_csv_text(self) -> str:
        lines = [CURVE_HEADER]
        for episode, mean_reward, success in self.rows:
            lines.append(f"{episode},{_fmt_float(mean_reward)},{_fmt_float(success)}")
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    agent: TD3Agent
    record: TrainRecord
    buffer: ReplayBuffer
    config: ExperimentConfig
    seed: int


@dataclass
class EvalReport:
    """Across-seed aggregate for one (mode, shift) ablation cell."""

    task: str
    reward_mode: str
    switch_episode: int | None
    shift_deg: float
    seeds: int
    final_reward_mean: float
    final_reward_std: float
    success_mean: float
    success_std: float

    def to_csv_row(self) -> str:
        switch = "" if self.switch_episode is None else str(self.switch_episode)
        return ",".join([
            self.task,
            self.reward_mode,
            switch,
            _fmt_float(self.shift_deg),
            str(self.seeds),
            _fmt_float(self.final_reward_mean),
            _fmt_float(self.final_reward_std),
            _fmt_float(self.success_mean),
            _fmt_float(self.success_std),
        ])


def _fmt_float(x) -> str:
    return repr(float(x))


def make_perception(config: ExperimentConfig) -> PerceptionModel:
    return PerceptionModel(
        shift_deg=config.shift_deg,
        noise_std=calibrate_noise(config.target_mean_error),
        camera_pivot=np.asarray(config.camera_pivot),
    )


def make_hyperparams(config: ExperimentConfig) -> TD3Hyperparams:
    return TD3Hyperparams(
        discount=config.discount,
        tau=config.tau,
        policy_delay=config.policy_delay,
        target_noise_std=config.target_noise_std,
        target_noise_clip=config.target_noise_clip,
        exploration_noise_std=config.exploration_noise_std,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
    )


def _succeeded(task: str, events) -> bool:
    return events.touched if task == "reach" else events.lifted


def run_training(config: ExperimentConfig, seed: int) -> RunResult:
    """Train one agent. Deterministic given (config, seed).

    Each step: observe (proprioception + perceived block position), act,
    step the environment, score the step under the active reward regime,
    store the transition with its reward context, and run one TD3 update
    once past the warmup. Sampled batches are re-scored under the regime
    active at sampling time, so a dense2sparse switch also re-labels old
    experience instead of leaving stale dense rewards in the buffer.
    """
    config.validate()
    mode = config.make_reward_mode()
    model = make_perception(config)
    rng_explore = derive_stream(seed, STREAM_EXPLORE)
    rng_env = derive_stream(seed, STREAM_ENV)
    rng_perception = derive_stream(seed, STREAM_PERCEPTION)
    rng_learner = derive_stream(seed, STREAM_LEARNER)

    agent = td3_init(
        OBSERVATION_DIM, ACTION_DIM, derive_stream(seed, STREAM_INIT),
        hidden=config.hidden_sizes, hyper=make_hyperparams(config),
    )
    buffer = ReplayBuffer(config.buffer_capacity, OBSERVATION_DIM, ACTION_DIM, CONTEXT_DIM)
    rows = []
    env_steps = 0

    for episode in range(config.total_episodes):
        state = env_reset(config.task, rng_env, config.horizon, terminate_on_success=False)
        estimate = estimate_block_position(model, state.block_pos, rng_perception)
        obs = build_observation(state, estimate)

        def relabel(contexts, _episode=episode):
            return step_reward_batch(mode, config.task, contexts, current_episode=_episode)

        while not state.done:
            if env_steps < config.warmup_steps:
                action = rng_explore.uniform(-1.0, 1.0, ACTION_DIM)
            else:
                action = select_action(agent, obs, explore=True, rng=rng_explore)
            state, events = env_step(state, action)
            estimate = estimate_block_position(model, state.block_pos, rng_perception)
            ctx = RewardContext(
                task=config.task,
                episode_index=episode,
                events=events,
                est_distance=float(np.linalg.norm(state.gripper_pos - estimate)),
                true_distance=true_distance(state),
            )
            reward = step_reward(mode, ctx)
            next_obs = build_observation(state, estimate)
            # Full-horizon protocol: episode ends only by truncation, which
            # does not mask the bootstrap, so the stored done flag stays 0.
            buffer.push(
                Transition(obs, action, reward, next_obs, done=False),
                pack_context(ctx),
            )
            env_steps += 1
            if env_steps > config.warmup_steps:
                agent, _ = train_step(agent, buffer, rng_learner, relabel=relabel)
            obs = next_obs

        completed = episode + 1
        if completed >= config.eval_start and (completed - config.eval_start) % config.eval_every == 0:
            point = (completed - config.eval_start) // config.eval_every
            mean_reward, success = evaluate_policy(
                agent, config, config.eval_episodes_per_point,
                derive_stream(seed, STREAM_EVAL_POINT, point),
            )
            rows.append((completed, mean_reward, success))

    return RunResult(agent=agent, record=TrainRecord(rows), buffer=buffer,
                     config=config, seed=seed)


def evaluate_policy(agent: TD3Agent, config: ExperimentConfig, n_episodes: int, rng):
    """Greedy evaluation. Returns (mean episode reward, success rate).

    The policy still observes through the perception model, exactly as in
    training; the episode reward is the unified shaped formula on true state.
    Never mutates the agent and never writes to any buffer.
    """
    if n_episodes < 1:
        raise ConfigurationError(f"n_episodes must be >= 1, got {n_episodes}")
    model = make_perception(config)
    rng_env, rng_perception = rng.spawn(2)
    total = 0.0
    successes = 0
    for _ in range(n_episodes):
        state = env_reset(config.task, rng_env, config.horizon, terminate_on_success=False)
        estimate = estimate_block_position(model, state.block_pos, rng_perception)
        obs = build_observation(state, estimate)
        episode_reward = 0.0
        succeeded = False
        while not state.done:
            action = select_action(agent, obs, explore=False)
            state, events = env_step(state, action)
            estimate = estimate_block_position(model, state.block_pos, rng_perception)
            episode_reward += eval_reward(RewardContext(
                task=config.task,
                episode_index=0,
                events=events,
                true_distance=true_distance(state),
            ))
            succeeded = succeeded or _succeeded(config.task, events)
            obs = build_observation(state, estimate)
        total += episode_reward
        successes += int(succeeded)
    return total / n_episodes, successes / n_episodes


# ---------------------------------------------------------------------------
# Ablation grid and file outputs
# ---------------------------------------------------------------------------

@dataclass
class AblationResult:
    reports: list        # EvalReport per (mode, shift) cell, in summary order
    summary_path: str
    curve_paths: list
    final_rows: dict     # (mode label, shift, seed) -> (final reward, success)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_manifest_text(config: ExperimentConfig, seed: int) -> str:
    """Resolved config plus the run's seed, in the loadable config format."""
    single = replace(config, seed_base=seed, seeds=1,
                     switch_episode=config.resolved_switch_episode())
    return "# rewardlab run manifest: exact replay via --config <this file>\n" + config_to_text(single)


def execute_run(config: ExperimentConfig, seed: int, write_files: bool = True):
    """run_training + final evaluation (+ curve/manifest/agent files).

    Returns (record rows, final mean reward, final success rate).
    """
    result = run_training(config, seed)
    final_reward, final_success = evaluate_policy(
        result.agent, config, config.eval_episodes, derive_stream(seed, STREAM_FINAL_EVAL),
    )
    if write_files:
        os.makedirs(config.out_dir, exist_ok=True)
        label = config.run_label(seed)
        _write_text(os.path.join(config.out_dir, f"curve_{label}.csv"),
                    result.record.to_csv_text())
        _write_text(os.path.join(config.out_dir, f"manifest_{label}.txt"),
                    run_manifest_text(config, seed))
        save_agent(os.path.join(config.out_dir, f"agent_{label}.npz"), result.agent)
    return result.record.rows, final_reward, final_success


def _cell_configs(base: ExperimentConfig, modes, shifts):
    cells = []
    order = {kind: i for i, kind in enumerate(REWARD_MODES)}
    for mode in sorted(modes, key=lambda m: order[m]):
        for shift in sorted(shifts):
            cells.append(replace(base, reward_mode=mode, shift_deg=shift))
    return cells


def _worker(args):
    config_kwargs, seed = args
    config = ExperimentConfig(**config_kwargs)
    return execute_run(config, seed)


def run_ablation(base_config: ExperimentConfig, modes=None, shifts=None) -> AblationResult:
    """Run (reward mode x camera shift x seed), aggregate across seeds.

    Writes one learning-curve CSV, manifest, and agent file per run, plus a
    summary CSV with one row per (mode, shift) cell. A failed run aborts the
    grid and reports the cells completed so far.
    """
    base_config.validate()
    modes = list(modes) if modes is not None else list(REWARD_MODES)
    for m in modes:
        if m not in REWARD_MODES:
            raise ConfigurationError(f"unknown reward mode {m!r}")
    shifts = list(shifts) if shifts is not None else [base_config.shift_deg]
    cells = _cell_configs(base_config, modes, shifts)
    if not cells:
        raise ConfigurationError("ablation grid is empty")

    jobs = []
    for cell in cells:
        for seed in cell.seed_list():
            jobs.append((cell, seed))

    outcomes = {}
    completed = []
    if base_config.n_jobs > 1:
        from dataclasses import asdict
        with ProcessPoolExecutor(max_workers=base_config.n_jobs) as pool:
            futures = [pool.submit(_worker, (asdict(cell), seed)) for cell, seed in jobs]
            for (cell, seed), fut in zip(jobs, futures):
                label = cell.run_label(seed)
                try:
                    outcomes[(cell.make_reward_mode().label(), cell.shift_deg, seed)] = fut.result()[1:]
                except Exception as exc:
                    raise AblationAborted(
                        f"run {label} failed ({exc}); completed: {completed}", completed,
                    ) from exc
                completed.append(label)
    else:
        for cell, seed in jobs:
            label = cell.run_label(seed)
            try:
                _, final_reward, final_success = execute_run(cell, seed)
                outcomes[(cell.make_reward_mode().label(), cell.shift_deg, seed)] = (
                    final_reward, final_success,
                )
            except Exception as exc:
                raise AblationAborted(
                    f"run {label} failed ({exc}); completed: {completed}", completed,
                ) from exc
            completed.append(label)

    reports = []
    for cell in cells:
        key_mode = cell.make_reward_mode().label()
        finals = [outcomes[(key_mode, cell.shift_deg, seed)] for seed in cell.seed_list()]
        rewards = np.array([f[0] for f in finals])
        successes = np.array([f[1] for f in finals])
        reports.append(EvalReport(
            task=cell.task,
            reward_mode=cell.reward_mode,
            switch_episode=cell.resolved_switch_episode(),
            shift_deg=cell.shift_deg,
            seeds=cell.seeds,
            final_reward_mean=float(rewards.mean()),
            final_reward_std=float(rewards.std()),
            success_mean=float(successes.mean()),
            success_std=float(successes.std()),
        ))

    os.makedirs(base_config.out_dir, exist_ok=True)
    summary_path = os.path.join(base_config.out_dir, "summary.csv")
    _write_text(summary_path,
                "\n".join([SUMMARY_HEADER] + [r.to_csv_row() for r in reports]) + "\n")
    curve_paths = [
        os.path.join(cell.out_dir, f"curve_{cell.run_label(seed)}.csv")
        for cell in cells for seed in cell.seed_list()
    ]
    final_rows = {key: value for key, value in outcomes.items()}
    return AblationResult(reports=reports, summary_path=summary_path,
                          curve_paths=curve_paths, final_rows=final_rows)


# ---------------------------------------------------------------------------
# Agent serialization (final policies; optimizer moments are not persisted)
# ---------------------------------------------------------------------------

_NETS = ("actor", "actor_target", "critic1", "critic2", "critic1_target", "critic2_target")


def save_agent(path, agent: TD3Agent):
    arrays = {}
    meta = {"update_count": agent.update_count, "hyper": vars(agent.hyper) | {}, "nets": {}}
    meta["hyper"] = {k: getattr(agent.hyper, k) for k in (
        "discount", "tau", "policy_delay", "target_noise_std", "target_noise_clip",
        "exploration_noise_std", "batch_size", "learning_rate",
    )}
    for name in _NETS:
        net: MLPParams = getattr(agent, name)
        meta["nets"][name] = {
            "layer_sizes": list(net.layer_sizes),
            "output_activation": net.output_activation,
        }
        for k, w in enumerate(net.weights):
            arrays[f"{name}_w{k}"] = w
        for k, b in enumerate(net.biases):
            arrays[f"{name}_b{k}"] = b
    np.savez(path, meta=np.bytes_(json.dumps(meta).encode("utf-8")), **arrays)


def load_agent(path) -> TD3Agent:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        nets = {}
        for name in _NETS:
            info = meta["nets"][name]
            n_layers = len(info["layer_sizes"]) - 1
            nets[name] = MLPParams(
                layer_sizes=tuple(info["layer_sizes"]),
                weights=[data[f"{name}_w{k}"] for k in range(n_layers)],
                biases=[data[f"{name}_b{k}"] for k in range(n_layers)],
                output_activation=info["output_activation"],
            )
    hyper = TD3Hyperparams(**meta["hyper"])
    return TD3Agent(
        actor=nets["actor"],
        actor_target=nets["actor_target"],
        critic1=nets["critic1"],
        critic2=nets["critic2"],
        critic1_target=nets["critic1_target"],
        critic2_target=nets["critic2_target"],
        actor_adam=adam_init(nets["actor"], learning_rate=hyper.learning_rate),
        critic1_adam=adam_init(nets["critic1"], learning_rate=hyper.learning_rate),
        critic2_adam=adam_init(nets["critic2"], learning_rate=hyper.learning_rate),
        hyper=hyper,
        update_count=meta["update_count"],
    )
