"""Two-phase training: surrogate pre-training, then online learning.

The surrogate scores an allocation from rate-versus-demand arithmetic, so
it is cheap enough for tens of thousands of steps. Online epochs then run
the full subframe simulator.

Run: python demos/03_train_agents.py
"""

import numpy as np

from sliceforge import default_scenario
from sliceforge.agents import make_agent, pretrain
from sliceforge.control_loop import SlicingEnv, run_episode

cfg = default_scenario(seed=0)

for kind, steps in (("ppo", 5000), ("dqn", 5000)):
    agent = make_agent(kind, seed=0)
    pretrain(agent, SlicingEnv(cfg, surrogate=True), steps)
    run_episode(agent, SlicingEnv(cfg), 512, on_report=lambda r: None)
    print(f"\n{kind}: learning curve (one row per {256} steps)")
    for h in agent.history[::4]:
        extra = f"  eps {h['epsilon']:.2f}" if kind == "dqn" else ""
        print(f"  step {h['step']:>5}  mean reward {h['mean_reward']:+.4f}{extra}")

    agent.training = False
    reps = run_episode(agent, SlicingEnv(cfg), 100)
    print(f"  greedy policy over 100 epochs: mean reward {np.mean([r.reward.total for r in reps]):+.4f}, "
          f"first split {reps[0].allocation.triple()}")
