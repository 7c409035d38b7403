"""Learning agents: DDPG, DQN, behavior cloning, replay, training loop.

The continuous agent (DDPG) squashes a deterministic actor to the action
bounds and explores with decaying Gaussian noise; the discrete agent (DQN)
enumerates the six (v, w) pairs {-0.6, 0.6} x {-0.6, 0, 0.6} and explores
epsilon-greedily. Both bootstrap from slowly blended target networks. The
RL state everywhere is the observation vector concatenated with the
previous action pair.

Transitions store done=True only for real terminal events (collision, open
space); a timeout truncates the episode without cutting the bootstrap, since
the world keeps existing after the time limit.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .env import EnvConfig, NarrowSpaceEnv
from .nets import MLP, Adam, soft_update
from .vehicle import Action, V_MAX, W_MAX

DQN_ACTIONS: tuple[tuple[float, float], ...] = tuple(
    (v, w) for v in (-V_MAX, V_MAX) for w in (-W_MAX, 0.0, W_MAX)
)


def decode_discrete(action_id: int) -> Action:
    """Action id -> (v, w); ids 0..5 enumerate speeds x steering."""
    v, w = DQN_ACTIONS[action_id]
    return Action(v, w)


def encode_discrete(action: Action) -> int:
    """Nearest discrete id for a continuous pair (inverse of decode)."""
    vi = 0 if action.v < 0 else 1
    wi = min(range(3), key=lambda i: abs(action.w - (-W_MAX, 0.0, W_MAX)[i]))
    return vi * 3 + wi


class ReplayBuffer:
    """Uniform ring buffer over fixed-width transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._rng = np.random.default_rng(seed)
        self.states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, state, action, reward, next_state, done) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict[str, np.ndarray]:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self._rng.integers(0, self._size, batch_size)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }


def dqn_update(batch, online: MLP, target: MLP, optimizer: Adam, gamma: float) -> float:
    """One squared-Bellman-error step; returns the scalar loss.

    Targets are r + gamma * max_a Q_target(s', a), with the bootstrap cut on
    terminal transitions.
    """
    ids = batch["actions"][:, 0].astype(int)
    n = ids.size
    q_next = target(batch["next_states"]).max(axis=1)
    y = batch["rewards"] + gamma * (1.0 - batch["dones"]) * q_next
    q_all, cache = online.forward(batch["states"])
    q = q_all[np.arange(n), ids]
    err = q - y
    loss = float(np.mean(err * err))
    dq = np.zeros_like(q_all)
    dq[np.arange(n), ids] = 2.0 * err / n
    grads, _ = online.backward(cache, dq)
    optimizer.step(online.params, grads)
    return loss


def ddpg_update(batch, actor: MLP, critic: MLP, target_actor: MLP, target_critic: MLP,
                actor_opt: Adam, critic_opt: Adam, gamma: float, tau: float) -> tuple[float, float]:
    """One actor-critic step; returns (actor_loss, critic_loss).

    The critic regresses onto targets from the slow networks; the actor
    ascends the critic's value at its own action, via the critic's gradient
    with respect to the action input. Both targets are soft-blended after.
    """
    n = batch["states"].shape[0]
    a_next = target_actor(batch["next_states"])
    q_next = target_critic(np.concatenate([batch["next_states"], a_next], axis=1))[:, 0]
    y = batch["rewards"] + gamma * (1.0 - batch["dones"]) * q_next

    sa = np.concatenate([batch["states"], batch["actions"]], axis=1)
    q, cache = critic.forward(sa)
    err = q[:, 0] - y
    critic_loss = float(np.mean(err * err))
    grads, _ = critic.backward(cache, (2.0 * err / n)[:, None])
    critic_opt.step(critic.params, grads)

    a_pi, actor_cache = actor.forward(batch["states"])
    q_pi, q_cache = critic.forward(np.concatenate([batch["states"], a_pi], axis=1))
    actor_loss = float(-np.mean(q_pi))
    _, dsa = critic.backward(q_cache, np.full_like(q_pi, -1.0 / n))
    da = dsa[:, batch["states"].shape[1]:]
    actor_grads, _ = actor.backward(actor_cache, da)
    actor_opt.step(actor.params, actor_grads)

    soft_update(target_actor, actor, tau)
    soft_update(target_critic, critic, tau)
    return actor_loss, critic_loss


class DDPGAgent:
    """Deterministic actor with Gaussian exploration noise."""

    algo = "ddpg"

    def __init__(self, state_dim: int, seed: int = 0, gamma: float = 0.99,
                 tau: float = 0.005, lr_actor: float = 1e-4, lr_critic: float = 2e-4,
                 sigma: float = 0.3, sigma_decay: float = 0.999, hidden=(512, 512)):
        init_rng = np.random.default_rng(seed + 1000)
        self.state_dim = state_dim
        self.actor = MLP(state_dim, 2, init_rng, hidden, out="tanh", out_scale=V_MAX)
        self.critic = MLP(state_dim + 2, 1, init_rng, hidden)
        self.target_actor = self.actor.clone()
        self.target_critic = self.critic.clone()
        self.actor_opt = Adam(self.actor.params, lr_actor)
        self.critic_opt = Adam(self.critic.params, lr_critic)
        self.gamma, self.tau = gamma, tau
        self.sigma, self.sigma_decay = sigma, sigma_decay
        self._noise_rng = np.random.default_rng(seed + 2000)

    def act(self, state: np.ndarray, explore: bool = True) -> Action:
        a = self.actor(state)
        if explore and self.sigma > 0:
            a = a + self._noise_rng.normal(0.0, self.sigma, 2)
        return Action(float(a[0]), float(a[1]))

    def action_repr(self, action: Action) -> np.ndarray:
        return np.array(action.as_tuple(), dtype=np.float32)

    def update(self, batch) -> tuple[float, float]:
        return ddpg_update(batch, self.actor, self.critic, self.target_actor,
                           self.target_critic, self.actor_opt, self.critic_opt,
                           self.gamma, self.tau)

    def end_episode(self) -> None:
        self.sigma *= self.sigma_decay

    def nets(self) -> dict[str, MLP]:
        return {"actor": self.actor, "critic": self.critic,
                "target_actor": self.target_actor, "target_critic": self.target_critic}


class DQNAgent:
    """Six-action value learner with scheduled epsilon-greedy exploration."""

    algo = "dqn"

    def __init__(self, state_dim: int, seed: int = 0, gamma: float = 0.99,
                 tau: float = 0.005, lr: float = 2e-4, eps_start: float = 1.0,
                 eps_final: float = 0.05, eps_episodes: int = 500, hidden=(512, 512)):
        init_rng = np.random.default_rng(seed + 1000)
        self.state_dim = state_dim
        self.net = MLP(state_dim, len(DQN_ACTIONS), init_rng, hidden)
        self.target = self.net.clone()
        self.opt = Adam(self.net.params, lr)
        self.gamma, self.tau = gamma, tau
        self.eps_start, self.eps_final = eps_start, eps_final
        self.eps_episodes = eps_episodes
        self.episode = 0
        self._noise_rng = np.random.default_rng(seed + 2000)

    @property
    def epsilon(self) -> float:
        frac = min(1.0, self.episode / self.eps_episodes)
        return self.eps_start + (self.eps_final - self.eps_start) * frac

    def act(self, state: np.ndarray, explore: bool = True) -> Action:
        if explore and self._noise_rng.random() < self.epsilon:
            return decode_discrete(int(self._noise_rng.integers(len(DQN_ACTIONS))))
        return decode_discrete(int(np.argmax(self.net(state))))

    def action_repr(self, action: Action) -> np.ndarray:
        return np.array([encode_discrete(action)], dtype=np.float32)

    def update(self, batch) -> float:
        loss = dqn_update(batch, self.net, self.target, self.opt, self.gamma)
        soft_update(self.target, self.net, self.tau)
        return loss

    def end_episode(self) -> None:
        self.episode += 1

    def nets(self) -> dict[str, MLP]:
        return {"net": self.net, "target": self.target}


def make_agent(algo: str, state_dim: int, seed: int = 0, **kwargs):
    if algo == "ddpg":
        return DDPGAgent(state_dim, seed, **kwargs)
    if algo == "dqn":
        return DQNAgent(state_dim, seed, **kwargs)
    raise ValueError(f"unknown algorithm '{algo}'")


def save_checkpoint(path, agent, meta: dict | None = None) -> None:
    """Write agent parameters plus self-describing metadata to an npz."""
    arrays = {}
    for net_name, net in agent.nets().items():
        for i, p in enumerate(net.params):
            arrays[f"{net_name}/{i}"] = p
    header = {
        "algo": agent.algo,
        "state_dim": agent.state_dim,
        "dims": {k: list(v.dims) for k, v in agent.nets().items()},
        "meta": meta or {},
    }
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)


def load_checkpoint(path, seed: int = 0):
    """Rebuild an agent from a checkpoint; returns (agent, meta)."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        # Hidden sizes come from the stored dims, not the agent defaults.
        first_dims = next(iter(header["dims"].values()))
        hidden = tuple(first_dims[1:-1])
        agent = make_agent(header["algo"], header["state_dim"], seed, hidden=hidden)
        for net_name, net in agent.nets().items():
            net.load_params([data[f"{net_name}/{i}"] for i in range(len(net.params))])
    return agent, header.get("meta", {})


def load_demos(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a demo file into (states, actions) arrays for cloning.

    Records carry the observation seen before the step and the action taken;
    the previous action (the rest of the RL state) is reconstructed from the
    record sequence, resetting to (0, 0) at each episode start.
    """
    states, actions, prev = [], [], (0.0, 0.0)
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("type") == "header":
                continue
            if rec.get("step", 0) <= 1:
                prev = (0.0, 0.0)
            states.append(np.concatenate([rec["v_obs"], rec.get("extras", []), prev]))
            actions.append((rec["v"], rec["w"]))
            prev = (rec["v"], rec["w"])
    if not states:
        return (np.zeros((0, 0), dtype=np.float32), np.zeros((0, 2), dtype=np.float32))
    return (np.asarray(states, dtype=np.float32), np.asarray(actions, dtype=np.float32))


def behavior_clone(demos, net: MLP, epochs: int = 50, lr: float = 1e-3,
                   batch_size: int = 128, seed: int = 0) -> dict:
    """Fit the net to (state, action) pairs by mean squared error.

    demos is (states, actions) as from load_demos. Returns the loss curve
    and final loss.
    """
    states, actions = demos
    if len(states) == 0:
        raise ValueError("cannot clone from an empty demo set")
    states = np.asarray(states, dtype=np.float32)
    actions = np.asarray(actions, dtype=np.float32)
    rng = np.random.default_rng(seed)
    opt = Adam(net.params, lr)
    n = len(states)
    curve = []
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            pred, cache = net.forward(states[idx])
            err = pred - actions[idx]
            losses.append(float(np.mean(err * err)))
            grads, _ = net.backward(cache, 2.0 * err / (err.shape[0] * err.shape[1]))
            opt.step(net.params, grads)
        curve.append(float(np.mean(losses)))
    return {"final_loss": curve[-1], "curve": curve, "records": n}


def config_hash(config_doc: dict) -> str:
    """Stable content hash of a config document (provenance tag)."""
    blob = json.dumps(config_doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def train(config: EnvConfig, algorithm: str, seeds, episodes: int,
          fine_tune_episodes: int = 0, out_dir=None, *, warmup: int = 1000,
          batch_size: int = 128, buffer_capacity: int = 200_000, update_every: int = 1,
          eval_every: int = 0, eval_episodes: int = 20, stop_success_rate: float | None = None,
          agent_kwargs: dict | None = None, progress: bool = False) -> dict:
    """Multi-seed episodic training; returns per-seed results.

    Per seed: run `episodes` exploration episodes (updates start after the
    warmup transition count, one update per `update_every` env steps), then
    optionally reload the best-returning checkpoint and fine-tune it for
    `fine_tune_episodes` more. With eval_every > 0, greedy evaluation runs
    periodically; stop_success_rate ends a seed early once reached.

    Writes per-seed checkpoints (final, best) and learning curves (raw
    per-episode returns plus best-return-per-20-episode windows) under
    out_dir when given.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    results = {}
    for seed in seeds:
        resolved = replace(config, seed=int(seed), spawn_jitter=True)
        env = NarrowSpaceEnv(resolved)
        agent = make_agent(algorithm, env.state_size, int(seed), **(agent_kwargs or {}))
        buffer = ReplayBuffer(buffer_capacity, env.state_size,
                              1 if algorithm == "dqn" else 2, seed=int(seed) + 3000)
        returns: list[float] = []
        evals: list[tuple[int, float]] = []
        best_return = -math.inf
        best_params = None
        stopped_at = None

        def run_episodes(count: int, offset: int) -> bool:
            nonlocal best_return, best_params, stopped_at
            for ep in range(count):
                obs = env.reset()
                state = env.state_vector(obs)
                total = 0.0
                while True:
                    action = agent.act(state, explore=True)
                    out = env.step(action)
                    next_state = env.state_vector(out.observation)
                    terminal = out.done and out.done_reason != "timeout"
                    buffer.add(state, agent.action_repr(action), out.reward,
                               next_state, terminal)
                    total += out.reward
                    state = next_state
                    if len(buffer) >= warmup and env.steps % update_every == 0:
                        agent.update(buffer.sample(batch_size))
                    if out.done:
                        break
                agent.end_episode()
                returns.append(total)
                if total > best_return:
                    best_return = total
                    best_params = {k: [p.copy() for p in net.params]
                                   for k, net in agent.nets().items()}
                ep_index = offset + ep + 1
                if progress and ep_index % 10 == 0:
                    print(f"seed {seed} ep {ep_index}: return {total:.1f}")
                if eval_every and ep_index % eval_every == 0 and len(buffer) >= warmup:
                    rate = evaluate_success(resolved, agent, eval_episodes)
                    evals.append((ep_index, rate))
                    if stop_success_rate is not None and rate >= stop_success_rate:
                        stopped_at = ep_index
                        return True
            return False

        stopped = run_episodes(episodes, 0)
        if fine_tune_episodes and not stopped:
            if best_params is not None:
                for k, net in agent.nets().items():
                    net.load_params(best_params[k])
            run_episodes(fine_tune_episodes, len(returns))

        result = {"returns": returns, "best_return": best_return,
                  "evals": evals, "stopped_at": stopped_at}
        if out_dir is not None:
            seed_dir = out_dir / f"seed_{seed}"
            save_checkpoint(seed_dir / "final.npz", agent, {"seed": seed, "episodes": len(returns)})
            if best_params is not None:
                for k, net in agent.nets().items():
                    net.load_params(best_params[k])
            save_checkpoint(seed_dir / "best.npz", agent,
                            {"seed": seed, "best_return": best_return})
            result["checkpoint"] = str(seed_dir / "final.npz")
            result["best_checkpoint"] = str(seed_dir / "best.npz")
        results[int(seed)] = result

    if out_dir is not None:
        write_curves(out_dir / "curves.csv", results)
    return results


def evaluate_success(config: EnvConfig, agent, episodes: int) -> float:
    """Greedy success rate (open-space endings) over fresh episodes."""
    env = NarrowSpaceEnv(replace(config, spawn_jitter=False))
    successes = 0
    for _ in range(episodes):
        obs = env.reset()
        state = env.state_vector(obs)
        while True:
            out = env.step(agent.act(state, explore=False))
            state = env.state_vector(out.observation)
            if out.done:
                successes += out.done_reason == "open_space"
                break
    return successes / episodes


def best_per_window(returns, window: int = 20) -> list[tuple[int, float]]:
    """(window_end_episode, best_return_in_window) pairs."""
    out = []
    for lo in range(0, len(returns), window):
        chunk = returns[lo:lo + window]
        out.append((lo + len(chunk), max(chunk)))
    return out


def write_curves(path, results: dict, window: int = 20) -> None:
    """Learning curves: best return per window, plus raw returns alongside."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("episode_window,best_score,seed\n")
        for seed, res in sorted(results.items()):
            for end, best in best_per_window(res["returns"], window):
                fh.write(f"{end},{best!r},{seed}\n")
    raw = path.with_name(path.stem + "_raw.csv")
    with open(raw, "w") as fh:
        fh.write("episode,score,seed\n")
        for seed, res in sorted(results.items()):
            for ep, ret in enumerate(res["returns"], 1):
                fh.write(f"{ep},{ret!r},{seed}\n")
