"""Searching for the optimal break set.

Exhaustive enumeration over node configurations is exact for small meshes;
greedy single moves scale further.  Refinement then moves each break off
the node grid.
"""
from flexbeam import Loads, ModelParams
from flexbeam.model import DirichletDatum
from flexbeam.expr import function_and_derivatives
from flexbeam.search import SearchPolicy, count_configurations, search

text = "0.3*sqrt((x-0.2)**2+0.0025)"  # a smoothed kink near x = 0.2
w = DirichletDatum(*function_and_derivatives(text), description=text)
p = ModelParams(mu=200.0, alpha=0.012, beta=0.01)

n = 16
print("configurations with <= 2 breaks on", n, "elements:", count_configurations(n + 1, 2, 2))
ex = search("E1", p, w, Loads(), n, SearchPolicy(k_max=2, mode="exhaustive"))
gr = search("E1", p, w, Loads(), n, SearchPolicy(k_max=2, mode="greedy"))
print("exhaustive:", ex.breaks.to_list(), f"{ex.energy:.8f}", "explored", ex.explored)
print("greedy    :", gr.breaks.to_list(), f"{gr.energy:.8f}", "explored", gr.explored)

# Near-optimal alternatives are reported rather than hidden.
for K, e in ex.near_optimal[:3]:
    print("   near:", K.to_list(), f"{e:.8f}")

ref = search("E1", p, w, Loads(), n, SearchPolicy(k_max=1, refine_positions=True))
print("refined   :", ref.breaks.to_list(), f"{ref.energy:.8f}")

# Raising the prices removes breaks.
for beta in (0.005, 0.05, 0.5):
    r = search("E1", p.replace(alpha=1.2 * beta, beta=beta), w, Loads(), n, SearchPolicy(k_max=2))
    print(f"beta={beta:<6} breaks={len(r.breaks)}")
