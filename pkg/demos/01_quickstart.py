"""Lay out the bundled deprotection protocol in an 8 x 6 m room and score it.

Run: python demos/01_quickstart.py [outdir]
"""

import sys
from pathlib import Path

from lablayout.cli import run_pipeline
from lablayout.config import PipelineConfig
from lablayout.fixtures import bundled_assets, bundled_protocol
from lablayout.scene import Room

base = bundled_assets()
protocol = bundled_protocol("exp_003")
print(f"protocol {protocol.protocol_id}: {len(protocol.steps)} steps, {len(protocol.reagents)} reagents")

outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "quickstart_out")
report = run_pipeline(protocol, base, PipelineConfig(seed=7), Room(8.0, 6.0), outdir)

print(f"overall score {report.overall:.2f} / 100")
print(f"  geometry  f_geo={report.f_geo:.3f}")
print(f"  chemistry f_chem={report.f_chem:.3f}")
print(f"  reachable f_reach={report.f_reach}")
for line in report.suggestions:
    print("  hint:", line)
print(f"files written to {outdir}/ (open layout.svg in a browser)")
