"""Key rate of the laboratory operating point and how its knobs matter.

Run with ``python3 demos/experimental_point.py``.
"""

from dataclasses import replace

from tmsqkd import ChannelParams, DetectorParams, EprSpec, ProtocolParams
from tmsqkd.optimize import max_tolerable_loss, optimize_parameters
from tmsqkd.security import key_rate

source = EprSpec(tms_db=3.5, anti_db=8.2)
protocol = ProtocolParams.from_source(source).with_total_modulation(23.4)
channel = ChannelParams(eta=0.95, epsilon=0.45)
detector = DetectorParams(efficiency=0.85)

print(f"EPR source: local variance {protocol.v_epr:.3f} SNU, "
      f"added modulation {protocol.delta_V:.3f} SNU")

for g in (0.0, 0.5, 1.0):
    rep = key_rate(replace(protocol, g=g), channel, detector)
    print(f"fixed g = {g:.1f}: I_AB = {rep.i_ab:.4f}, chi_BE = {rep.chi_be:.4f}, "
          f"rate = {rep.key_rate:+.5f} bit/state")

best = optimize_parameters(protocol, channel, detector)
print(f"optimized: g = {best.g:.3f}, Bob's trusted noise = {best.bob_noise:.3f} SNU, "
      f"rate = {best.key_rate:.5f} bit/state")

loss = max_tolerable_loss(protocol, detector, epsilon=0.45)
print(f"tolerable loss at the same excess noise: {loss.value:.3f} dB "
      f"({loss.extra['km']:.2f} km of fiber)")
