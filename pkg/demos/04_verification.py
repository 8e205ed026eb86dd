"""Certifying a computed minimiser.

The verify module reports numbers only: Euler residuals, natural conditions
at breaks, the compliance identity, the uniqueness threshold, and the
Poincare constant that enters it.
"""
import json

from flexbeam import BreakConfig, DirichletDatum, LoadField, Loads, ModelParams, build_mesh, solve_fixed
from flexbeam.problem_spec import load_instance
from flexbeam.verify import check_breaks, check_compliance, check_threshold, poincare_constant, verify_solution

print("C_P on (-1, 1):", [round(poincare_constant(n), 10) for n in (16, 64, 256)])

# Compliance identity on the shipped instance with a crack: the gap closes
# under refinement.
spec = load_instance("compliance_crack")
for n in (32, 64, 128, 256):
    rep = solve_fixed("E1", spec.params, spec.w, spec.loads, spec.breaks, build_mesh(n, spec.breaks))
    c = check_compliance("E1", rep, spec.params, spec.w, spec.loads)
    print(f"n={n:4d} relative gap {c['relative_gap']:.2e} (raw traces {c['relative_gap_raw']:.2e})")

# Natural conditions at a crack: second and third derivative traces vanish.
p = ModelParams(mu=10.0, alpha=0.02, beta=0.015)
rep = solve_fixed("E1", p, spec.w, spec.loads, spec.breaks, 128)
row = check_breaks("E1", rep, p)["breaks"][0]
print("crack at", row["x"], {k: f"{v:.1e}" for k, v in row["conditions"].items()})

# Small loads satisfy the uniqueness threshold; then no break is worth paying for.
small = Loads.single(LoadField.constant(0.05))
t = check_threshold("E1", ModelParams(mu=5.0, alpha=0.15, beta=0.1), DirichletDatum.zero(), small, 16)
print("threshold holds:", t["holds"], "lhs", round(t["lhs"], 6), "beta - M", round(t["beta"] - t["M"], 6))

# Full report: one number per named condition.
v = verify_solution("E1", rep, p, spec.w, spec.loads, with_threshold=True)
print(json.dumps({k: (None if x is None else float(f"{x:.3e}")) for k, x in v.conditions.items()}, indent=1))
