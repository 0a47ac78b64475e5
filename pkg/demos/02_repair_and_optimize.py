"""Break a valid packing on purpose, then watch repair and the optimizer clean it up."""

from lablayout.fixtures import bundled_assets, cluttered_bench
from lablayout.optimizer import OptimizerConfig, count_violations, fast_repair, optimize
from lablayout.proposers import HeuristicProposer
from lablayout.synthetic import repairable_scene

# A seeded synthetic scene: boxes shoved into each other and through walls.
layout, base = repairable_scene(seed=3)
before = count_violations(layout, None, base)
print(f"synthetic scene: {len(layout)} boxes, {len(before.boundary)} out of bounds, {len(before.collision)} collisions")

repaired = fast_repair(layout, base)
after = count_violations(repaired.layout, None, base)
print(f"fast repair: {repaired.rounds} rounds, converged={repaired.converged}, v_geo={after.v_geo}")

# A bench scene with chemical hazards: ethanol next to a hot plate, acid beside base.
base = bundled_assets()
layout, protocol = cluttered_bench(base)
print(f"\ncluttered bench starts with v={count_violations(layout, protocol, base).v}")
out, trace = optimize(layout, protocol, base, HeuristicProposer(base), OptimizerConfig(seed=1))
for rec in trace:
    mark = "accept" if rec.accepted else "reject"
    print(f"  {rec.level:<7} it={rec.iteration:<2} v={rec.v:<2} F={rec.F:.3f} {mark} {rec.note}")
print(f"cluttered bench ends with v={count_violations(out, protocol, base).v}")
