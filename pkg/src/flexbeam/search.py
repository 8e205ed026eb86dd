"""Outer minimisation over break configurations (number, kinds, positions)."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fem import Mesh, build_mesh
from .model import Break, BreakConfig, KIND_ORDER, DirichletDatum, Loads, ModelParams, Problem, allowed_kinds, validate_params
from .solvers import SolveReport, solve_fixed

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-12
NEAR_OPTIMAL_TOL = 1e-9
INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SearchPolicy:
    candidate_nodes: tuple[int, ...] | None = None  # None: every mesh node
    k_max: int = 4
    exhaustive_cap: int = 100_000
    refine_positions: bool = False
    mode: str = "auto"  # auto | exhaustive | greedy
    jobs: int = 1
    refine_tol: float = 1e-6

    def __post_init__(self):
        if self.k_max < 0 or self.exhaustive_cap <= 0:
            raise ValueError("k_max must be >= 0 and exhaustive_cap > 0")
        if self.mode not in ("auto", "exhaustive", "greedy"):
            raise ValueError(f"unknown search mode {self.mode!r}")


@dataclass
class SearchResult:
    breaks: BreakConfig
    report: SolveReport
    explored: int
    certificate: str  # "exhaustive" or "greedy"
    near_optimal: list[tuple[BreakConfig, float]] = field(default_factory=list)
    refined: bool = False

    @property
    def best(self) -> tuple[BreakConfig, SolveReport]:
        return self.breaks, self.report

    @property
    def energy(self) -> float:
        return self.report.energy.total


def count_configurations(n_candidates: int, n_kinds: int, k_max: int) -> int:
    return sum(math.comb(n_candidates, k) * n_kinds**k for k in range(min(k_max, n_candidates) + 1))


class _Evaluator:
    """Memoised inner solves on a fixed node set."""

    def __init__(self, problem, p, w, loads, mesh, constrained):
        self.args = (problem, p, w, loads)
        self.mesh = mesh.unbroken()
        self.constrained = constrained
        self.cache: dict[tuple, SolveReport] = {}

    def config(self, items) -> BreakConfig:
        nodes = self.mesh.nodes
        return BreakConfig(tuple(Break(float(nodes[i]), kind) for i, kind in items))

    def __call__(self, items) -> SolveReport:
        key = tuple(sorted(items))
        rep = self.cache.get(key)
        if rep is None:
            K = self.config(key)
            problem, p, w, loads = self.args
            rep = solve_fixed(problem, p, w, loads, K, self.mesh.with_breaks(K), self.constrained)
            self.cache[key] = rep
        return rep


def _sort_key(items) -> tuple:
    return tuple((i, KIND_ORDER[k]) for i, k in sorted(items))


def _reduce(items_list, energies) -> tuple[int, list[int]]:
    """Index of the minimiser (ties to the lexicographically smallest) and near-optimal set."""
    e = np.asarray(energies)
    emin = float(np.min(e))
    tie = IMPROVE_TOL * (1 + abs(emin))
    ties = [k for k in range(e.size) if e[k] <= emin + tie]
    best = min(ties, key=lambda k: _sort_key(items_list[k]))
    near = [k for k in range(e.size) if e[k] <= emin + NEAR_OPTIMAL_TOL * (1 + abs(emin))]
    near.sort(key=lambda k: (e[k], _sort_key(items_list[k])))
    return best, near


def _enumerate(cands, kinds, k_max):
    for k in range(min(k_max, len(cands)) + 1):
        for nodes in itertools.combinations(cands, k):
            for ks in itertools.product(kinds, repeat=k):
                yield tuple(zip(nodes, ks))


def _evaluate_many(ev: _Evaluator, configs, jobs: int) -> list[float]:
    if jobs <= 1 or len(configs) < 64:
        return [ev(c).energy.total for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda c: ev(c).energy.total, configs, chunksize=32))


def search(
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    mesh: Mesh | int,
    policy: SearchPolicy = SearchPolicy(),
    constrained: bool = False,
) -> SearchResult:
    """Minimise the energy over break sets supported on candidate mesh nodes.

    Exhaustive enumeration (certificate ``"exhaustive"``) when the number of
    configurations fits ``policy.exhaustive_cap``; otherwise a greedy descent
    over add / remove / relabel / shift moves (certificate ``"greedy"``).
    """
    problem = Problem(problem)
    validate_params(p, problem)
    mesh = build_mesh(mesh) if not isinstance(mesh, Mesh) else mesh
    ev = _Evaluator(problem, p, w, loads, mesh, constrained)
    cands = tuple(range(mesh.n_nodes)) if policy.candidate_nodes is None else tuple(sorted(set(policy.candidate_nodes)))
    kinds = allowed_kinds(problem)
    total = count_configurations(len(cands), len(kinds), policy.k_max)
    exhaustive = policy.mode == "exhaustive" or (policy.mode == "auto" and total <= policy.exhaustive_cap)
    if exhaustive:
        configs = list(_enumerate(cands, kinds, policy.k_max))
        energies = _evaluate_many(ev, configs, policy.jobs)
        best, near = _reduce(configs, energies)
        result = SearchResult(
            ev.config(configs[best]), ev(configs[best]), len(configs), "exhaustive",
            [(ev.config(configs[k]), float(energies[k])) for k in near],
        )
    else:
        result = _greedy(ev, cands, kinds, policy.k_max)
    log.info("search %s: %s, explored %d, energy %.12g, breaks %s", problem.value,
             result.certificate, result.explored, result.energy, result.breaks.to_list())
    if policy.refine_positions:
        result = refine_positions(result, problem, p, w, loads, mesh.n_elements, constrained, policy.refine_tol)
    return result


def _moves(current, cands, kinds, k_max):
    occupied = {i for i, _ in current}
    cur = dict(current)
    if len(current) < k_max:
        for i in cands:
            if i not in occupied:
                for k in kinds:
                    yield tuple(sorted(current + ((i, k),)))
    for idx, (i, k) in enumerate(current):
        rest = current[:idx] + current[idx + 1:]
        yield rest
        for k2 in kinds:
            if k2 is not k:
                yield tuple(sorted(rest + ((i, k2),)))
        pos = cands.index(i) if i in cands else None
        if pos is None:
            continue
        for step in (-1, 1):
            q = pos + step
            if 0 <= q < len(cands) and cands[q] not in occupied:
                yield tuple(sorted(rest + ((cands[q], cur[i]),)))


def _greedy(ev: _Evaluator, cands, kinds, k_max) -> SearchResult:
    current: tuple = ()
    e_cur = ev(current).energy.total
    seen = {current: e_cur}
    while True:
        moves = list(dict.fromkeys(_moves(current, cands, kinds, k_max)))
        if not moves:
            break
        energies = [ev(m).energy.total for m in moves]
        for m, e in zip(moves, energies):
            seen[m] = e
        best, _ = _reduce(moves, energies)
        if energies[best] < e_cur - IMPROVE_TOL * (1 + abs(e_cur)):
            current, e_cur = moves[best], energies[best]
        else:
            break
    items = list(seen)
    best, near = _reduce(items, [seen[k] for k in items])
    # the greedy iterate is the reported optimum; near-optimal list is over explored configs
    return SearchResult(ev.config(current), ev(current), len(seen), "greedy",
                        [(ev.config(items[k]), float(seen[items[k]])) for k in near])


def golden_section(fun, a: float, b: float, tol: float):
    """Minimise a unimodal ``fun`` on [a, b]; returns ``(x, f(x))`` of the best probe."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    best = (c, fc) if fc <= fd else (d, fd)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
        for x, fx in ((c, fc), (d, fd)):
            if fx < best[1]:
                best = (x, fx)
    return best


def refinement_bracket(breaks: BreakConfig, index: int, n_elements: int) -> tuple[float, float] | None:
    """Interval swept when refining break ``index``: its two neighbouring cells of
    the uniform mesh, kept a quarter cell away from other breaks and the endpoints."""
    b = breaks.breaks[index]
    if b.x in (-1.0, 1.0):
        return None
    h = 2.0 / n_elements
    margin = 0.25 * h
    lo, hi = b.x - h, b.x + h
    others = [o.x for k, o in enumerate(breaks.breaks) if k != index] + [-1.0, 1.0]
    for x in others:
        if x < b.x:
            lo = max(lo, x + margin)
        else:
            hi = min(hi, x - margin)
    if hi - lo <= 0:
        return None
    return lo, hi


def moved(breaks: BreakConfig, index: int, x: float, kind=None) -> BreakConfig:
    bs = list(breaks.breaks)
    bs[index] = Break(float(x), bs[index].kind if kind is None else kind)
    return BreakConfig(tuple(bs))


def refine_positions(
    result: SearchResult,
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    n_elements: int,
    constrained: bool = False,
    tol: float = 1e-6,
) -> SearchResult:
    """Golden-section refinement of each break location (and kind) off the node grid.

    Every trial location is meshed with :func:`build_mesh` and re-solved;
    a move is kept only if it lowers the energy, so the energy never rises.
    """
    problem = Problem(problem)
    breaks, report = result.breaks, result.report
    energy = report.energy.total
    explored = result.explored

    for index in range(len(breaks)):
        bracket = refinement_bracket(breaks, index, n_elements)
        if bracket is None:
            continue
        # the kind is re-chosen too: the best label off the grid may differ
        for kind in allowed_kinds(problem):

            def fun(x, index=index, breaks=breaks, kind=kind):
                nonlocal explored
                explored += 1
                K = moved(breaks, index, x, kind)
                return solve_fixed(problem, p, w, loads, K, build_mesh(n_elements, K), constrained).energy.total

            x, e = golden_section(fun, *bracket, tol)
            if e < energy - IMPROVE_TOL * (1 + abs(energy)):
                breaks = moved(breaks, index, x, kind)
                energy = e
    if breaks.key() != result.breaks.key():
        report = solve_fixed(problem, p, w, loads, breaks, build_mesh(n_elements, breaks), constrained)
    return SearchResult(breaks, report, explored, result.certificate, result.near_optimal, refined=True)


def search_problem(problem, p, w, loads, n_elements: int, policy: SearchPolicy = SearchPolicy(), constrained=False):
    """Convenience wrapper building the uniform mesh with ``n_elements`` cells."""
    return search(problem, p, w, loads, build_mesh(n_elements), policy, constrained)
