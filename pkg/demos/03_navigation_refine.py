"""Check that a mobile robot can drive between protocol stations, and fix the layout when it cannot."""

from lablayout.fixtures import NAV_DEFECT_FIXTURES, bundled_assets
from lablayout.navigation import NavConfig, reachability
from lablayout.refine import RefineConfig, refine_loop

base = bundled_assets()
nav = NavConfig()

for name, make in NAV_DEFECT_FIXTURES.items():
    layout, protocol = make(base)
    report = reachability(layout, protocol, base, nav, strict=False)
    print(f"{name}: f_reach={report.f_reach} statuses={report.status_counts()}")
    fixed, history = refine_loop(layout, protocol, base, RefineConfig(nav=nav))
    for rec in history:
        print(f"  t={rec.t} unreachable {rec.U}/{rec.N} applied={len(rec.applied)}")
    after = reachability(fixed, protocol, base, nav, strict=False)
    print(f"  after refinement f_reach={after.f_reach}")
