"""Where learning pays off: a cell whose URLLC and mMTC load is scaled up.

With five times the URLLC packet sizes and three times the mMTC sizes, an
equal split starves URLLC while a demand-aware split still meets every
target. PPO discovers such a split from rewards alone.

Run: python demos/05_congested_cell.py   (about 15 s)
"""

import numpy as np

from sliceforge import default_scenario, validate_scenario
from sliceforge.agents import make_agent, pretrain
from sliceforge.control_loop import SlicingEnv, run_episode
from sliceforge.domain import SliceKind, TrafficGenSpec, UeProfile
from sliceforge.policies import BASELINES, make_baseline

base = default_scenario(seed=0)
heavy = {
    SliceKind.URLLC: TrafficGenSpec(SliceKind.URLLC, gen_freq=2.0, bytes_min=500_000, bytes_max=1_500_000),
    SliceKind.EMBB: base.ue(4).traffic,
    SliceKind.MMTC: TrafficGenSpec(SliceKind.MMTC, gen_freq=4.0, bytes_min=75_000, bytes_max=180_000),
}
cfg = base.replace(ues=tuple(UeProfile(u.ue_id, u.slice, u.speed, u.initial_distance, heavy[u.slice])
                             for u in base.ues))
assert validate_scenario(cfg).ok


def evaluate(policy, epochs=500):
    reps = run_episode(policy, SlicingEnv(cfg), epochs)
    return np.mean([r.reward.total for r in reps]), np.mean([r.kpi.t_avg for r in reps])


for name in BASELINES:
    r, lat = evaluate(make_baseline(name))
    print(f"{name:<9} mean reward {r:+.3f}   URLLC t_avg {lat:7.1f} ms")

agent = make_agent("ppo", seed=0)
pretrain(agent, SlicingEnv(cfg, surrogate=True), 20_000)
run_episode(agent, SlicingEnv(cfg), 2000, on_report=lambda r: None)
agent.training = False
r, lat = evaluate(agent)
print(f"{'ppo':<9} mean reward {r:+.3f}   URLLC t_avg {lat:7.1f} ms")
