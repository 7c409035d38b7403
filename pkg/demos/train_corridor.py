"""Train a small agent on the straight corridor and watch it drive.

Value learning over the six discrete actions is enough for a straight
corridor and runs in well under a minute on a laptop. Training stops early
once greedy evaluation reaches 90% success; the learned policy is then
rolled out once without exploration and drawn over the track walls.

Writes corridor_run.png next to this script.

    python demos/train_corridor.py
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from narrowsim import EnvConfig, NarrowSpaceEnv, load_bundled_track
from narrowsim.agents import load_checkpoint, train

OUT = Path(__file__).resolve().parent / "corridor_run.png"
RUN_DIR = Path(__file__).resolve().parent / "corridor_runs"


def greedy_trajectory(config, agent):
    env = NarrowSpaceEnv(config)
    obs = env.reset()
    state = env.state_vector(obs)
    xs, ys = [env.pose.x], [env.pose.y]
    while True:
        out = env.step(agent.act(state, explore=False))
        state = env.state_vector(out.observation)
        xs.append(env.pose.x)
        ys.append(env.pose.y)
        if out.done:
            return xs, ys, out.done_reason


def main():
    world = load_bundled_track("corridor_straight")
    config = EnvConfig(world=world, max_steps=300)
    results = train(config, "dqn", [0], 150, warmup=1000, eval_every=10,
                    eval_episodes=10, stop_success_rate=0.9, out_dir=RUN_DIR,
                    agent_kwargs={"hidden": (128, 128)})
    res = results[0]
    print(f"trained {len(res['returns'])} episodes, "
          f"best return {res['best_return']:.1f}, "
          f"evals {[(ep, f'{r:.0%}') for ep, r in res['evals']]}")

    agent, _ = load_checkpoint(RUN_DIR / "seed_0" / "final.npz", seed=0)
    xs, ys, reason = greedy_trajectory(config, agent)
    print(f"greedy rollout: {len(xs) - 1} steps, ended by {reason}")

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 6),
                                      height_ratios=(1, 2))
    top.plot(range(1, len(res["returns"]) + 1), res["returns"], lw=0.9)
    top.set_xlabel("episode")
    top.set_ylabel("return")
    top.set_title("training returns")

    for seg in world.segments:
        bottom.plot(seg[:, 0], seg[:, 1], color="black", lw=1.2)
    bottom.plot(xs, ys, color="tab:green", lw=1.8, label=f"greedy run ({reason})")
    bottom.plot(xs[0], ys[0], marker="o", color="tab:green")
    bottom.set_aspect("equal")
    bottom.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(OUT, dpi=130)
    print(f"-> {OUT.name}")


if __name__ == "__main__":
    main()
