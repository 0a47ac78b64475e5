"""Score the demo layout and show how the pieces add up to the overall number."""

from lablayout.evaluator import StubScorer, evaluate
from lablayout.fixtures import bundled_assets, full_demo

base = bundled_assets()
layout, protocol = full_demo(base)
report = evaluate(layout, protocol, base, scorer=StubScorer((8.0, 9.0, 9.0)), scene_id="full_demo")

print(f"overall  {report.overall:6.2f}")
print(f"  physical    {report.s_phys:6.2f}  (f_geo={report.f_geo:.3f}, f_reach={report.f_reach})")
print(f"  chemical    {report.s_chem:6.2f}  (f_chem={report.f_chem:.3f})")
print(f"  consistency {report.s_consist if report.s_consist is not None else 'n/a'}")
chem = report.chemistry
for metric in ("flam", "store", "incomp", "glass"):
    value = getattr(chem, metric)
    print(f"  {metric:<7} {'undefined' if value is None else f'{value:.3f}'}")
print("FSR:", report.fsr)
