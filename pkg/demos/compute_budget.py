"""Print the analytic compute budget for different stage-depth allocations.

The cost model is affine in the per-stage block counts, so the marginal cost
of one more block at stage k is constant. Front-loading depth at stage 1
(the [3,1,1,1] allocation) buys the most blocks per GFLOP.
"""

from pillarsot import BackboneConfig, ablation_table, marginal_costs, model_flops
from pillarsot.flops import CONVENTION

print(f"counting convention: {CONVENTION}\n")

print(f"{'depths':<12} {'model GFLOPs':>13} {'delta':>8} {'published':>10}")
for row in ablation_table():
    depths = "-".join(map(str, row["depths"]))
    print(f"{depths:<12} {row['gflops']:>13.3f} {row['delta_vs_first']:>+8.3f} "
          f"{row['published_gflops']:>10.2f}")

cfg = BackboneConfig()
report = model_flops(cfg)
print(f"\ndefault allocation {cfg.depths}: {report.gflops:.3f} GFLOPs")
print("marginal cost of one extra block per stage:",
      " ".join(f"{d:.3f}" for d in marginal_costs(cfg)))

dense = model_flops(BackboneConfig(depths=(3, 4, 6, 3))).gflops
print(f"ratio vs the dense (3,4,6,3) allocation: "
      f"{report.gflops / dense:.3f}")
