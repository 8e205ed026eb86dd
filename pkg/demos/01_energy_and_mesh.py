"""Energies, meshes and the Hermite-cubic discretisation.

A walk through the building blocks: how break sets are priced, how a mesh
carries cracks and creases as split degrees of freedom, and how the energy of
a given field is evaluated.
"""
import numpy as np

from flexbeam import BreakConfig, DirichletDatum, LoadField, Loads, ModelParams, build_mesh
from flexbeam.energy import blake_zisserman_form, damage_count, eval_energy
from flexbeam.fem import assemble_bending, interpolate

# Prices: a crack costs alpha, a crease beta.  The admissible window for the
# hard-device and strengthening energies is 0 < beta <= alpha <= 2 beta.
p = ModelParams(eta=1.0, mu=10.0, alpha=0.02, beta=0.015)
K = BreakConfig.of((-0.5, "crease"), (0.25, "crack"))
print("price of", K.to_list(), "=", damage_count(K, p, "E1"))

# A crack splits value and slope at its node, a crease only the slope.
for label, breaks in [("smooth", BreakConfig()), ("crease", BreakConfig.of((0.0, "crease"))),
                      ("crack", BreakConfig.of((0.0, "crack")))]:
    m = build_mesh(8, breaks)
    print(f"{label:7s} n_nodes={m.n_nodes} ndof={m.ndof}")

# Break locations off the uniform grid are snapped when close to a node and
# inserted otherwise.
print("snapped :", build_mesh(8, BreakConfig.of((0.26, "crack"))).nodes)
print("inserted:", build_mesh(8, BreakConfig.of((0.375, "crack"))).nodes)

# The bending matrix annihilates affine fields on every piece.
m = build_mesh(16, K)
A = assemble_bending(m).toarray()
lin = interpolate(m, DirichletDatum.polynomial([0.3, -0.7])).coeffs
print("|A @ affine| =", np.abs(A @ lin).max())

# Energy of the interpolant of the datum itself: bending int (w'')^2 = 2,
# no glue, plus the load term and the price.
w = DirichletDatum.polynomial([0.0, 0.0, 0.5])
loads = Loads.single(LoadField.constant(1.0))
u = interpolate(m, w)
e = eval_energy("E1", p, w, loads, K, u)
print("E1(w) breakdown:", {k: round(v, 6) for k, v in e.__dict__.items() if v}, "total", round(e.total, 6))

# Completing the square turns E1 into a Blake-Zisserman functional plus a constant.
bz, const = blake_zisserman_form(p, w, loads.f_r, K, u)
print("Blake-Zisserman form minus constant:", bz - const)
