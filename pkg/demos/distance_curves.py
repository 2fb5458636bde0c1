"""Secure distance of coherent, squeezed and squeezed-plus-modulated sources.

Writes one CSV per configuration into ``demos/out/`` and prints the
largest secure distance of each, found by bisection on the channel loss.
Run with ``python3 demos/distance_curves.py``.
"""

from pathlib import Path

from tmsqkd import ChannelParams, ProtocolParams, SqueezedSourceSpec
from tmsqkd.io import write_table
from tmsqkd.optimize import SWEEP_COLUMNS, SweepSpec, max_tolerable_loss, sweep

EPSILON = 0.1
out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

configs = {
    "coherent_100snu": ProtocolParams.coherent(100.0),
    "squeezed_3db": ProtocolParams.from_source(SqueezedSourceSpec.from_db(3.0)),
    "squeezed_10db": ProtocolParams.from_source(SqueezedSourceSpec.from_db(10.0)),
    "squeezed_3db_100snu": ProtocolParams.from_source(SqueezedSourceSpec.from_db(3.0), 100.0),
    "squeezed_10db_100snu": ProtocolParams.from_source(SqueezedSourceSpec.from_db(10.0), 100.0),
}

for name, protocol in configs.items():
    rows = sweep(SweepSpec("distance_km", 0, 300, 16, protocol, ChannelParams(1.0, EPSILON)))
    write_table(out / f"{name}.csv", SWEEP_COLUMNS,
                [(r.x, r.key_rate, r.g_opt, r.noise_opt, r.i_ab, r.chi_be, r.error) for r in rows])
    limit = max_tolerable_loss(protocol, epsilon=EPSILON)
    note = " (loss cap reached)" if limit.cap_hit else ""
    print(f"{name:22s} rate at 0 km {rows[0].key_rate:.4f}, secure up to {limit.extra['km']:6.1f} km{note}")
