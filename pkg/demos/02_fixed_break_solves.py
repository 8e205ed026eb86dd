"""Inner solves for a fixed break set.

Each model (hard device E1, strengthening F1, elastic-plastic G1) is a
quadratic (or quadratic plus l1) minimisation once the breaks are fixed.
"""
import numpy as np

from flexbeam import BreakConfig, DirichletDatum, LoadField, Loads, ModelParams, solve_fixed
from flexbeam.expr import function_and_derivatives

p = ModelParams(eta=1.0, mu=10.0, gamma=0.5, alpha=0.02, beta=0.015, sigma=0.05)
w = DirichletDatum.polynomial([0.1, 0.3, -0.2, 0.25])
loads = Loads(LoadField.constant(1.0), LoadField(function_and_derivatives("0.5*x - x**3", 0)[0]))
x = np.linspace(-1, 1, 9)

# Hard device: the reinforcement is glued to a prescribed substrate w.
K = BreakConfig.of((0.25, "crack"))
rep = solve_fixed("E1", p, w, loads, K, 64)
print("E1 energy", rep.energy.total, "kkt", rep.kkt_residual)
print("  jump of u at the crack:", rep.u.jump(int(np.flatnonzero(rep.mesh.nodes == 0.25)[0])))

# Strengthening: plate and reinforcement both deform, tied by the glue.
rep = solve_fixed("F1", p, w, loads, BreakConfig.of((0.0, "crease")), 64)
print("F1 energy", rep.energy.total)
print("  u_r - u_p on a coarse grid:", np.round(rep.u.evaluate(x) - rep.u_p.evaluate(x), 5))

# Elastic-plastic hinges: each slope jump costs sigma |jump| on top of beta.
for sigma in (0.0, 0.05, 10.0):
    rep = solve_fixed("G1", p.replace(sigma=sigma), w, loads, BreakConfig.of((0.25, "hinge")), 64)
    print(f"G1 sigma={sigma:5.2f}: jump {rep.jumps[0]: .5f}, energy {rep.energy.total:.6f}")

# Obstacle: the reinforcement may not go below the substrate.
w_obs = DirichletDatum.polynomial([0.3, 0.0, -0.6, 0.0, 0.3])
push = Loads.single(LoadField.constant(-20.0))
rep = solve_fixed("E1", p, w_obs, push, BreakConfig.of((-0.75, "crack")), 64, constrained=True)
print("obstacle: active constraints", len(rep.active_set), "min gap", rep.gaps.min(),
      "min multiplier", rep.multipliers.min())
