"""Walk through the radio and traffic models for the default twelve-UE roster.

Run: python demos/01_link_budget_and_traffic.py
"""

from sliceforge import default_scenario
from sliceforge.channel import initial_channel, update_channel
from sliceforge.domain import rng_substream
from sliceforge.traffic import generate_arrivals

cfg = default_scenario(seed=0)

print("UE  slice  speed  distance  pathloss   SNR   rate/PRB")
for ue in cfg.ues:
    ch = initial_channel(ue, cfg)
    print(f"{ue.ue_id:>2}  {ue.slice.key:<5} {ue.speed:>5.0f}  {ch.distance:>7.1f}m  {ch.pathloss:6.2f}dB "
          f"{ch.snr:5.1f}dB  {ch.per_prb_rate / 1e3:6.1f} kb/s")

# A mobile UE wanders between 500 m and 2 km, one step per 2 s epoch.
ue = cfg.ues[0]
ch, rng = initial_channel(ue, cfg), rng_substream(cfg.seed, "channel", ue.ue_id)
trail = []
for k in range(10):
    ch = update_channel(ue, ch, k, rng, cfg)
    trail.append(round(ch.distance, 1))
print("\nUE 0 distance over ten epochs:", trail)

# One epoch of offered traffic per slice.
rng = rng_substream(cfg.seed, "traffic", 0)
for ue in (cfg.ue(0), cfg.ue(4), cfg.ue(8)):
    pkts = generate_arrivals(ue.traffic, 0, cfg.epoch, rng, kpi_period=cfg.kpi_period, requested_bitrate=3e5)
    print(f"{ue.slice.key:<5} arrivals:", [(p.enqueue_time, p.bytes) for p in pkts])
