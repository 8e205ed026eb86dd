"""Certificates for computed minimisers.

Everything here reports numbers; no pass/fail policy is applied.  Callers
(tests, CLI) decide what is small enough.
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import eval_energy, hinge_jumps
from .fem import (
    Mesh,
    PiecewiseDisplacement,
    apply_clamp,
    assemble_bending,
    assemble_load,
    assemble_mass,
    build_mesh,
    gauss_points,
    hermite_basis,
    local_mass,
)
from .model import BreakConfig, BreakKind, DirichletDatum, FlexbeamError, Loads, ModelParams, Problem
from .solvers import SolveReport, _constraint_rows, build_system, solve_fixed, subgradient_residual


class EigenFailure(FlexbeamError):
    pass


# Condition names by problem; each minimality condition appears once.
CONDITIONS: dict[str, tuple[str, ...]] = {
    "E1": (
        "E1.euler.pieces",
        "E1.crack.natural",
        "E1.crease.transmission",
        "E1.euler.distributional",
        "E1.endpoint.crack",
        "E1.endpoint.crease",
        "E1.equal_release.traces",
        "E1.compliance",
    ),
    "F1": (
        "F1.euler.reinforcement.pieces",
        "F1.euler.plate.distributional",
        "F1.euler.sum.pieces",
        "F1.crack.natural",
        "F1.crease.transmission",
        "F1.euler.reinforcement.distributional",
        "F1.euler.sum.distributional",
        "F1.endpoint.crack",
        "F1.endpoint.crease",
        "F1.euler.combined.distributional",
        "F1.equal_release.traces",
        "F1.compliance",
    ),
    "G1": (
        "G1.euler.reinforcement.pieces",
        "G1.euler.plate.distributional",
        "G1.hinge.subgradient",
    ),
    "E1.obstacle": (
        "E1.vi.inequality",
        "E1.vi.free_crack.second",
        "E1.vi.free_crack.third",
        "E1.vi.free_crease",
        "E1.vi.euler.noncontact",
        "E1.vi.endpoint.crack",
        "E1.vi.endpoint.crease",
        "E1.vi.equal_release",
        "E1.vi.contact.right",
        "E1.vi.contact.left",
    ),
    "F1.obstacle": (
        "F1.vi.reinforcement",
        "F1.vi.plate",
        "F1.vi.bilateral",
        "F1.vi.contact.right",
        "F1.vi.contact.left",
    ),
}


# ------------------------------------------------------------ Poincare


def _band_upper(local: np.ndarray, ed: np.ndarray, ndof: int) -> np.ndarray:
    """Upper banded storage (bandwidth 3) of an assembled Hermite matrix."""
    ab = np.zeros((4, ndof))
    for i in range(4):
        for j in range(i, 4):
            np.add.at(ab[3 - (j - i)], ed[:, j], local[:, i, j])
    return ab


def _band_matvec(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = ab[3] * v
    for k in (1, 2, 3):
        out[:-k] += ab[3 - k][k:] * v[k:]
        out[k:] += ab[3 - k][k:] * v[:-k]
    return out


@functools.lru_cache(maxsize=32)
def poincare_constant(n: int = 512, a: float = -1.0, b: float = 1.0) -> float:
    """Best constant in ``|v|^2 <= C |v''|^2`` for v clamped at both ends of (a, b).

    ``1 / lambda_1`` of the clamped Hermite-cubic generalised eigenproblem
    (bending vs mass) on ``n`` uniform elements.  The eigenvector comes from
    inverse iteration with a banded Cholesky factor; ``lambda_1`` is its
    Rayleigh quotient, with ``int v''^2`` summed from the exact element
    formula for a linear ``v''`` so that no large terms cancel.  Conforming
    discretisation: values increase towards the exact constant with n.
    """
    if n < 16:
        raise ValueError("poincare_constant needs n >= 16")
    nodes = np.linspace(a, b, n + 1)
    h = np.diff(nodes)
    xq, wq = gauss_points(nodes)
    gx = (xq - nodes[:-1, None]) / h[:, None]
    B0, B2 = hermite_basis(gx, h[:, None], 0), hermite_basis(gx, h[:, None], 2)
    ndof = 2 * (n + 1)
    ed = 2 * np.arange(n)[:, None] + np.arange(4)
    # drop the clamped value/slope pairs at both ends
    Ab = _band_upper(np.einsum("eq,eqi,eqj->eij", wq, B2, B2), ed, ndof)[:, 2:-2]
    Mb = _band_upper(np.einsum("eq,eqi,eqj->eij", wq, B0, B0), ed, ndof)[:, 2:-2]
    try:
        chol = sla.cholesky_banded(Ab)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc

    def rayleigh(v):
        full = np.zeros(ndof)
        full[2:-2] = v
        c = full[ed]
        dv = (c[:, 2] - c[:, 0]) / h
        left = (6 * dv - 4 * c[:, 1] - 2 * c[:, 3]) / h
        right = (-6 * dv + 2 * c[:, 1] + 4 * c[:, 3]) / h
        num = float(np.sum(h / 3 * (left**2 + left * right + right**2)))
        den = float(np.sum(wq * np.einsum("eqi,ei->eq", B0, c) ** 2))
        return num / den

    t = (nodes[1:-1] - 0.5 * (a + b)) / (0.5 * (b - a))
    v = np.empty(ndof - 4)
    v[0::2] = (1 - t**2) ** 2  # even start vector, close to the first mode
    v[1::2] = -4 * t * (1 - t**2) / (0.5 * (b - a))
    lam_old = np.inf
    for _ in range(100):
        y = sla.cho_solve_banded((chol, False), _band_matvec(Mb, v))
        v = y / np.max(np.abs(y))
        lam = rayleigh(v)
        if abs(lam - lam_old) <= 4 * np.finfo(float).eps * lam:
            break
        lam_old = lam
    if not (np.isfinite(lam) and lam > 0):
        raise EigenFailure(f"bad first eigenvalue {lam}")
    return float(1.0 / lam)


# ------------------------------------------------------------ residuals


def _fine_quadrature(nodes: np.ndarray, order: int = 8):
    """Quadrature on the once-bisected mesh (points never straddle a node)."""
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    fine = np.empty(2 * nodes.size - 1)
    fine[0::2], fine[1::2] = nodes, mid
    xq, wq = gauss_points(fine, order)
    return xq.ravel(), wq.ravel()


def _bubble_tests(a: float, b: float, k: int):
    """Test functions ``(1-t^2)^2 P_j(t)`` on (a, b), j < k, scaled to unit |phi''|."""
    out = []
    bubble = np.polynomial.Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])
    s = 2.0 / (b - a)
    xq, wq = gauss_points(np.array([a, b]), 16)
    t = (2 * xq.ravel() - a - b) / (b - a)
    for j in range(k):
        P = bubble * np.polynomial.Legendre.basis(j).convert(kind=np.polynomial.Polynomial)
        d2 = P.deriv(2)
        norm = np.sqrt(np.sum(wq.ravel() * (s**2 * d2(t)) ** 2))
        out.append((P, s, norm))

    def evaluate(x):
        t = (2 * x - a - b) / (b - a)
        inside = (x >= a) & (x <= b)
        vals = np.array([np.where(inside, P(t), 0.0) / nrm for P, s, nrm in out])
        d2s = np.array([np.where(inside, s**2 * P.deriv(2)(t), 0.0) / nrm for P, s, nrm in out])
        return vals, d2s

    return evaluate


def _field_values(u: PiecewiseDisplacement, x: np.ndarray, deriv: int) -> np.ndarray:
    return u.evaluate(x, deriv, side="+")


def _weak_residuals(terms, tests, xq, wq) -> np.ndarray:
    """Integral of ``sum_k c_k * (phi or phi'') * values`` for every test function.

    ``terms`` is a list of (which, weights) with which in {0, 2} and weights
    sampled at ``xq``.
    """
    phi, d2 = tests(xq)
    r = np.zeros(phi.shape[0])
    for which, vals in terms:
        basis = phi if which == 0 else d2
        r += basis @ (wq * vals)
    return r


def _euler_terms(problem: Problem, p: ModelParams, w, loads: Loads, u, u_p, xq):
    """Integrands of each weak Euler form at points ``xq``.

    Every entry maps a name to a list of (0 or 2, samples) such that the weak
    residual is ``sum int samples * phi`` (0) or ``samples * phi''`` (2).
    """
    ur0 = _field_values(u, xq, 0)
    ur2 = _field_values(u, xq, 2)
    fr = loads.f_r(xq)
    if problem is Problem.E1:
        form = [(2, p.eta * ur2), (0, p.mu * (ur0 - w(xq)) - fr / 2)]
        return {"reinforcement": form}
    up0 = _field_values(u_p, xq, 0)
    up2 = _field_values(u_p, xq, 2)
    fp = loads.f_p(xq)
    reinf = [(2, p.eta * ur2), (0, p.mu * (ur0 - up0) - fr / 2)]
    plate = [(2, p.gamma * up2), (0, p.mu * (up0 - ur0) - fp / 2)]
    total = [(2, p.eta * ur2 + p.gamma * up2), (0, -(fr + fp) / 2)]
    combined = [(2, 2 * p.eta * ur2 + p.gamma * up2), (0, p.mu * (ur0 - up0) - fr - fp / 2)]
    return {"reinforcement": reinf, "plate": plate, "sum": total, "combined": combined}


def prolong(u: PiecewiseDisplacement, fine: Mesh) -> np.ndarray:
    """Exact DOFs of ``u`` on a mesh containing its nodes and breaks."""
    dm = fine.dofs
    c = np.zeros(fine.ndof)
    x = fine.nodes
    c[dm.left_value], c[dm.left_slope] = u.evaluate(x, 0, "-"), u.evaluate(x, 1, "-")
    c[dm.right_value], c[dm.right_slope] = u.evaluate(x, 0, "+"), u.evaluate(x, 1, "+")
    return c


def _cross_mass(mesh: Mesh, cols: Mesh) -> sp.csr_matrix:
    er, ec = mesh.dofs.element_dofs, cols.dofs.element_dofs
    rows = np.repeat(er, 4, axis=1).ravel()
    cc = np.tile(ec, (1, 4)).ravel()
    return sp.csr_matrix((local_mass(mesh).ravel(), (rows, cc)), shape=(mesh.ndof, cols.ndof))


def fine_basis_residual(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum, loads: Loads) -> dict:
    """Weak Euler residual against the Hermite basis of the bisected mesh.

    The coarse solution lies in the fine space, so the residual vector is
    exact up to quadrature.  Its size is measured in the dual norm
    ``sqrt(r' H^-1 r)`` of the fine smooth Hessian (an energy norm), per
    piece on test functions supported inside the piece and globally on all
    free fine DOFs.  For G1 the hinge slope DOFs are left out: their
    conditions are subgradient inclusions, reported separately.
    """
    problem = Problem(problem)
    mf = solution.mesh.refine()
    A, M = assemble_bending(mf), assemble_mass(mf)
    x = prolong(solution.u, mf)
    clamp = apply_clamp(mf, w)
    if problem is Problem.E1:
        H = p.eta * A + p.mu * M
        g = 0.5 * assemble_load(mf, loads.f_r) + p.mu * assemble_load(mf, w)
        fixed = clamp.dofs
    else:
        mp = mf.unbroken()
        C = _cross_mass(mf, mp)
        H = sp.bmat([[p.eta * A + p.mu * M, -p.mu * C],
                     [-p.mu * C.T, p.gamma * assemble_bending(mp) + p.mu * assemble_mass(mp)]])
        g = 0.5 * np.concatenate([assemble_load(mf, loads.f_r), assemble_load(mp, loads.f_p)])
        x = np.concatenate([x, prolong(solution.u_p, mp)])
        fixed = np.concatenate([clamp.dofs, apply_clamp(mp, w).dofs + mf.ndof])
    H = H.tocsc()
    r = H @ x - g
    dm = mf.dofs
    skip = set(int(d) for d in fixed)
    if problem is Problem.G1:
        for i in mf.break_nodes:
            skip.update((int(dm.left_slope[i]), int(dm.right_slope[i])))

    def dual(idx):
        idx = np.array(sorted(set(int(i) for i in idx) - skip), dtype=np.int64)
        if idx.size == 0:
            return 0.0
        ri = r[idx]
        z = spla.splu(H[idx][:, idx].tocsc()).solve(ri)
        return float(np.sqrt(max(ri @ z, 0.0)))

    pieces = []
    for i0, i1 in mf.pieces():
        inner = np.arange(i0 + 1, i1)
        idx = np.concatenate([dm.left_value[inner], dm.left_slope[inner]])
        pieces.append({"a": float(mf.nodes[i0]), "b": float(mf.nodes[i1]), "residual": dual(idx)})
    return {
        "pieces": pieces,
        "max_piece_residual": max(d["residual"] for d in pieces),
        "global": dual(range(H.shape[0])),
        "max_abs_entry": float(np.max(np.abs(np.delete(r, sorted(skip))), initial=0.0)),
    }


def check_euler(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum, loads: Loads,
                n_tests: int = 6, intervals=None) -> dict:
    """Weak residuals of the Euler equations.

    ``pieces``: test functions supported inside each smooth piece (between
    consecutive breaks, or the given ``intervals``); ``distributional``: test
    functions clamped at +-1 only, crossing the breaks, applied to the
    absolutely continuous parts.  Test functions are ``(1-t^2)^2 P_k(t)``,
    k < n_tests, normalised to unit L2 norm of their second derivative;
    integrals use 8-point Gauss on the once-bisected mesh.  ``fine_basis``
    holds the residual against the Hermite basis of the bisected mesh (see
    ``fine_basis_residual``); it is skipped when ``intervals`` are given.
    """
    problem = Problem(problem)
    mesh = solution.mesh
    given_intervals = intervals
    if intervals is None:
        intervals = [(mesh.nodes[i0], mesh.nodes[i1]) for i0, i1 in mesh.pieces()]
    xq, wq = _fine_quadrature(mesh.nodes)
    terms = _euler_terms(problem, p, w, loads, solution.u, solution.u_p, xq)
    out: dict = {"pieces": {}, "distributional": {}}
    for name in terms:
        if name == "plate":
            continue
        per_piece = []
        for a, b in intervals:
            r = _weak_residuals(terms[name], _bubble_tests(a, b, n_tests), xq, wq)
            per_piece.append({"a": float(a), "b": float(b), "residual": float(np.max(np.abs(r)))})
        out["pieces"][name] = per_piece
    glob = _bubble_tests(-1.0, 1.0, n_tests)
    for name, form in terms.items():
        out["distributional"][name] = float(np.max(np.abs(_weak_residuals(form, glob, xq, wq))))
    out["max_piece_residual"] = {k: max((d["residual"] for d in v), default=None) for k, v in out["pieces"].items()}
    if given_intervals is None:
        out["fine_basis"] = fine_basis_residual(problem, solution, p, w, loads)
    return out


# ------------------------------------------------------------ breaks


def _traces(u: PiecewiseDisplacement, node: int) -> dict:
    n = u.mesh.n_nodes
    t = {}
    for side in ("-", "+"):
        if (side == "-" and node == 0) or (side == "+" and node == n - 1):
            continue
        for d, name in ((0, "u"), (1, "du"), (2, "d2u"), (3, "d3u")):
            t[f"{name}{side}"] = u.trace(node, d, side)
        t[f"d3u{side}_recovered"] = recovered_third_trace(u, node, side)
    return t


def recovered_third_trace(u: PiecewiseDisplacement, node: int, side: str) -> float:
    """One-sided third derivative extrapolated from the two nearest element midpoints.

    The third derivative of a cubic is constant per element and is
    second-order accurate only at the midpoint; the raw trace carries an
    O(h) offset.  Falls back to the raw trace when the piece has a single
    element on that side.
    """
    mesh = u.mesh
    nodes = mesh.nodes
    n = mesh.n_nodes
    if side == "+":
        e1, e2, between = node, node + 1, node + 1
        ok = node + 2 <= n - 1
    else:
        e1, e2, between = node - 1, node - 2, node - 1
        ok = node - 2 >= 0
    if not ok or between in mesh.break_nodes:
        return u.trace(node, 3, side)
    m1 = 0.5 * (nodes[e1] + nodes[e1 + 1])
    m2 = 0.5 * (nodes[e2] + nodes[e2 + 1])
    c1, c2 = u.evaluate(np.array([m1, m2]), 3)
    return float(c1 + (c2 - c1) * (nodes[node] - m1) / (m2 - m1))


def _second_derivative_scale(u: PiecewiseDisplacement) -> float:
    s = float(np.max(np.abs(u.at_quadrature(2))))
    return s if s > 0 else 1.0


def check_breaks(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum | None = None) -> dict:
    """One-sided traces at every break and the natural conditions they should meet.

    Each entry lists ``conditions``: quantities that vanish for a continuum
    minimiser, normalised by ``max |u''|`` over the beam.  Second derivatives
    are raw traces; third derivatives use :func:`recovered_third_trace`
    (raw values stay available under ``traces``).
    """
    problem = Problem(problem)
    u = solution.u
    mesh = u.mesh
    n = mesh.n_nodes
    scale = _second_derivative_scale(u)
    equal = p.alpha == p.beta
    rows = []
    for i in sorted(mesh.break_nodes):
        kind = mesh.break_nodes[i]
        x = float(mesh.nodes[i])
        tr = _traces(u, i)
        d3 = {sd: tr[f"d3u{sd}_recovered"] for sd in ("-", "+") if f"d3u{sd}" in tr}
        cond: dict[str, float] = {}
        if 0 < i < n - 1:
            cond["d2u-"] = tr["d2u-"]
            cond["d2u+"] = tr["d2u+"]
            if kind is BreakKind.CRACK:
                cond["d3u-"] = d3["-"]
                cond["d3u+"] = d3["+"]
                tag = f"{problem.value}.crack.natural"
            elif kind is BreakKind.CREASE:
                cond["[d3u]"] = d3["+"] - d3["-"]
                tag = f"{problem.value}.crease.transmission"
                if equal:
                    cond["d3u-"] = d3["-"]
                    cond["d3u+"] = d3["+"]
            else:
                tag = "G1.hinge.subgradient"
        else:
            side = "+" if i == 0 else "-"
            cond[f"d2u{side}"] = tr[f"d2u{side}"]
            if kind is BreakKind.CRACK or (kind is BreakKind.CREASE and equal):
                cond[f"d3u{side}"] = d3[side]
            tag = f"{problem.value}.endpoint.{kind.value}"
        row = {
            "x": x,
            "kind": kind.value,
            "tag": tag,
            "traces": tr,
            "scale": scale,
            "conditions": {k: v / scale for k, v in cond.items()},
            "max_condition": max((abs(v) / scale for v in cond.values()), default=0.0),
        }
        if kind is BreakKind.HINGE:
            # moment at the hinge against the yield modulus; observed, not asserted
            row["conditions"] = {}
            row["max_condition"] = 0.0
            m = [2 * p.eta * tr[k] for k in ("d2u-", "d2u+") if k in tr]
            row["moment_over_sigma"] = [mm / p.sigma if p.sigma > 0 else float("inf") for mm in m]
        rows.append(row)
    return {"breaks": rows, "equal_release": equal}


# ------------------------------------------------------------ compliance


def _quad(u: PiecewiseDisplacement):
    from .fem import _element_data
    return _element_data(u.mesh)


def check_compliance(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum, loads: Loads) -> dict:
    """Gap between the energy and its compliance expression.

    E1:  J + mu int(w^2 - w u) - 1/2 int f u + eta [u'' u' - u''' u]_{-1}^{+1}
    F1:  J - 1/2 int f_r u_r - 1/2 int f_p u_p
         + [gamma (u_p'' w' - u_p''' w) + eta (u_r'' u_r' - u_r''' u_r)]_{-1}^{+1}

    The F1 expression is the one obtained by adding the two Euler identities;
    ``adhesion_term`` reports ``-mu int (u_r - u_p)^2`` separately together
    with the gap when that term is included.

    Third-derivative endpoint traces use the midpoint recovery; the raw
    traces are only first-order and dominate the gap.  The gap obtained
    with raw traces is kept as ``relative_gap_raw``.
    """
    problem = Problem(problem)
    if problem is Problem.G1:
        raise ValueError("no compliance identity for G1")
    u = solution.u
    n = u.mesh.n_nodes
    d = _quad(u)
    energy = solution.energy
    J = energy.damage
    u0 = u.at_quadrature(0)
    fr = loads.f_r(d.xq)
    items = {}
    raw = {}
    # endpoint traces (interior side)
    ur_m1 = {k: u.trace(0, k, "+") for k in range(3)}
    ur_p1 = {k: u.trace(n - 1, k, "-") for k in range(3)}
    ur_m1[3] = recovered_third_trace(u, 0, "+")
    ur_p1[3] = recovered_third_trace(u, n - 1, "-")
    raw["-eta*u'''u(+1)"] = -p.eta * u.trace(n - 1, 3, "-") * ur_p1[0]
    raw["+eta*u'''u(-1)"] = p.eta * u.trace(0, 3, "+") * ur_m1[0]
    items["eta*u''u'(+1)"] = p.eta * ur_p1[2] * ur_p1[1]
    items["-eta*u'''u(+1)"] = -p.eta * ur_p1[3] * ur_p1[0]
    items["-eta*u''u'(-1)"] = -p.eta * ur_m1[2] * ur_m1[1]
    items["+eta*u'''u(-1)"] = p.eta * ur_m1[3] * ur_m1[0]
    if problem is Problem.E1:
        wq_ = w(d.xq)
        base = J + p.mu * float(np.sum(d.wq * (wq_**2 - wq_ * u0))) - 0.5 * float(np.sum(d.wq * fr * u0))
        adhesion = 0.0
    else:
        up = solution.u_p
        up0 = up.at_quadrature(0)
        fp = loads.f_p(d.xq)
        base = J - 0.5 * float(np.sum(d.wq * fr * u0)) - 0.5 * float(np.sum(d.wq * fp * up0))
        up_m1 = {2: up.trace(0, 2, "+"), 3: recovered_third_trace(up, 0, "+")}
        up_p1 = {2: up.trace(n - 1, 2, "-"), 3: recovered_third_trace(up, n - 1, "-")}
        raw["-gamma*u_p'''w(+1)"] = -p.gamma * up.trace(n - 1, 3, "-") * float(w(1.0))
        raw["+gamma*u_p'''w(-1)"] = p.gamma * up.trace(0, 3, "+") * float(w(-1.0))
        items["gamma*u_p''w'(+1)"] = p.gamma * up_p1[2] * float(w.d1(1.0))
        items["-gamma*u_p'''w(+1)"] = -p.gamma * up_p1[3] * float(w(1.0))
        items["-gamma*u_p''w'(-1)"] = -p.gamma * up_m1[2] * float(w.d1(-1.0))
        items["+gamma*u_p'''w(-1)"] = p.gamma * up_m1[3] * float(w(-1.0))
        adhesion = -p.mu * float(np.sum(d.wq * (u0 - up0) ** 2))
    correction = float(sum(items.values()))
    rhs = base + correction
    lhs = energy.total
    scale = (abs(energy.bending_r) + abs(energy.load_r) + abs(energy.glue)
             + abs(energy.bending_p) + abs(energy.load_p))
    gap = abs(lhs - rhs)
    gap_raw = abs(lhs - rhs - sum(raw[k] - items[k] for k in raw))
    out = {
        "lhs": lhs,
        "rhs": rhs,
        "rhs_homogeneous_part": base,
        "correction": correction,
        "correction_terms": items,
        "gap": gap,
        "relative_gap": gap / scale if scale > 0 else gap,
        "relative_gap_raw": gap_raw / scale if scale > 0 else gap_raw,
        "gap_without_correction": abs(lhs - base),
    }
    if problem is Problem.F1:
        out["adhesion_term"] = adhesion
        out["gap_with_adhesion_term"] = abs(lhs - rhs - adhesion)
    return out


# ------------------------------------------------------------ threshold


def check_threshold(problem, p: ModelParams, w: DirichletDatum, loads: Loads, mesh: Mesh | int,
                    poincare_n: int = 512) -> dict:
    """Sufficient condition for an unbroken unique minimiser.

    E1:  1/(4 mu) |f|^2 + int f w < beta - M~
    F1:  1/(4 mu) |f_r|^2 + C_P/(2 gamma) |f_r + f_p|^2 + gamma |w''|^2
         + int (f_r + f_p) w < beta - M

    ``M`` / ``M~`` is the unbroken discrete minimum on ``mesh``.  Only the
    implication "holds => no breaks" is meaningful.
    """
    problem = Problem(problem)
    if problem is Problem.G1:
        raise ValueError("no uniqueness threshold for G1")
    mesh = build_mesh(mesh) if not isinstance(mesh, Mesh) else mesh.unbroken()
    smooth = solve_fixed(problem, p, w, loads, BreakConfig(), mesh)
    M = smooth.energy.total
    xq, wq = gauss_points(mesh.nodes)
    fr = loads.f_r(xq)
    wv = w(xq)
    terms = {}
    if problem is Problem.E1:
        terms["load_sq/(4mu)"] = float(np.sum(wq * fr**2)) / (4 * p.mu)
        terms["int f w"] = float(np.sum(wq * fr * wv))
        cp = None
    else:
        fp = loads.f_p(xq)
        cp = poincare_constant(poincare_n)
        terms["f_r_sq/(4mu)"] = float(np.sum(wq * fr**2)) / (4 * p.mu)
        terms["C_P/(2gamma)*|f_r+f_p|^2"] = cp / (2 * p.gamma) * float(np.sum(wq * (fr + fp) ** 2))
        terms["gamma*|w''|^2"] = p.gamma * float(np.sum(wq * w.d2(xq) ** 2))
        terms["int (f_r+f_p) w"] = float(np.sum(wq * (fr + fp) * wv))
    lhs = float(sum(terms.values()))
    rhs = p.beta - M
    return {
        "terms": terms,
        "lhs": lhs,
        "beta": p.beta,
        "M": M,
        "rhs": rhs,
        "margin": rhs - lhs,
        "holds": bool(lhs < rhs),
        "poincare_constant": cp,
    }


# ------------------------------------------------------------ obstacle


def _discrete_vi(problem: Problem, solution: SolveReport, p, w, loads) -> dict:
    """Discrete stationarity with the contact forces added back, per field.

    For the nodal constraints ``x[lead] - x[partner] >= lower`` the optimality
    system reads ``grad Q = sum lam (e_lead - e_partner)``; the residual of that
    identity on the free DOFs of each field is returned in backward-error form.
    """
    system = build_system(problem, p, w, loads, solution.mesh)
    x = solution.dofs
    G = system.gradient(x)
    rows = {(node, side): (dof, other) for dof, other, _, node, side in _constraint_rows(system, w)}
    for (node, side), lam in zip(solution.constraint_sites, solution.multipliers):
        dof, other = rows[(node, side)]
        G[dof] -= lam
        if other >= 0:
            G[other] += lam
    H = system.H
    scale = float(np.abs(H).sum(axis=1).max()) * float(np.max(np.abs(x))) + float(np.max(np.abs(system.g)))
    scale = scale if scale > 0 else 1.0
    free = system.free
    n_r = system.n_r
    out = {"reinforcement": float(np.max(np.abs(G[free[free < n_r]]), initial=0.0)) / scale}
    if system.mesh_p is not None:
        out["plate"] = float(np.max(np.abs(G[free[free >= n_r]]), initial=0.0)) / scale
    return out


def check_vi(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum, loads: Loads) -> dict:
    """Complementarity and contact sign conditions for an obstacle solution.

    ``second_derivative_signs`` lists ``u''`` one-sided traces at break traces
    in contact; these should be >= 0.  Third derivatives there are recorded
    only: no condition applies to them.
    """
    problem = Problem(problem)
    if not solution.constrained:
        raise ValueError("check_vi needs a solution of an obstacle problem")
    lam = np.asarray(solution.multipliers)
    gap = np.asarray(solution.gaps)
    u = solution.u
    mesh = u.mesh
    n = mesh.n_nodes
    contact = {(a["node"], a["side"]) for a in solution.active_set}
    signs = []
    for i in sorted(mesh.break_nodes):
        kind = mesh.break_nodes[i]
        if kind is BreakKind.CRACK and 0 < i < n - 1:
            sides_in_contact = {s for s in ("-", "+") if (i, s) in contact}
        elif (i, "") in contact:
            sides_in_contact = {"-", "+"}
        else:
            sides_in_contact = set()
        for side in sorted(sides_in_contact):
            if (side == "+" and i == n - 1) or (side == "-" and i == 0):
                continue
            signs.append({
                "x": float(mesh.nodes[i]),
                "kind": kind.value,
                "side": side,
                "d2u": u.trace(i, 2, side),
                "d3u_recorded": u.trace(i, 3, side),
                "tag": f"{problem.value}.vi.contact.{'right' if side == '+' else 'left'}",
            })
    comp = np.minimum(lam, gap) if lam.size else np.zeros(0)
    return {
        "n_constraints": int(lam.size),
        "n_active": len(solution.active_set),
        "min_multiplier": float(np.min(lam, initial=np.inf)),
        "min_gap": float(np.min(gap, initial=np.inf)),
        "max_complementarity": float(np.max(np.abs(comp), initial=0.0)),
        "max_product": float(np.max(np.abs(lam * gap), initial=0.0)),
        "stationarity": _discrete_vi(problem, solution, p, w, loads),
        "second_derivative_signs": signs,
        "min_contact_d2u": float(min((s["d2u"] for s in signs), default=np.inf)),
        "kkt_residual": solution.kkt_residual,
    }


# ------------------------------------------------------------ report


@dataclass
class VerificationReport:
    problem: str
    constrained: bool
    euler_residual: dict = field(default_factory=dict)
    natural_conditions: list = field(default_factory=list)
    endpoint_conditions: list = field(default_factory=list)
    compliance_gap: dict | None = None
    vi_residuals: dict | None = None
    threshold: dict | None = None
    conditions: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def condition_schema(problem, constrained: bool = False) -> tuple[str, ...]:
    problem = Problem(problem)
    return CONDITIONS[f"{problem.value}.obstacle" if constrained else problem.value]


def verify_solution(problem, solution: SolveReport, p: ModelParams, w: DirichletDatum, loads: Loads,
                    with_threshold: bool = False) -> VerificationReport:
    """Run every applicable check and summarise each named condition by one number.

    Residual-type conditions are summarised by their largest magnitude,
    sign-type ones by their smallest value; ``None`` when nothing applies.
    """
    problem = Problem(problem)
    constrained = solution.constrained
    rep = VerificationReport(problem.value, constrained)
    euler = check_euler(problem, solution, p, w, loads)
    rep.euler_residual = euler
    br = check_breaks(problem, solution, p, w)
    rep.natural_conditions = [r for r in br["breaks"] if r["tag"].split(".")[1] != "endpoint"]
    rep.endpoint_conditions = [r for r in br["breaks"] if r["tag"].split(".")[1] == "endpoint"]
    names = condition_schema(problem, constrained)
    cond: dict = {k: None for k in names}

    def worst(tag, rows):
        vals = [r["max_condition"] for r in rows if r["tag"] == tag]
        return max(vals) if vals else None

    pv = problem.value
    if not constrained:
        if problem is Problem.G1:
            cond["G1.euler.reinforcement.pieces"] = euler["max_piece_residual"]["reinforcement"]
            cond["G1.euler.plate.distributional"] = euler["distributional"]["plate"]
            if solution.jumps is not None and solution.jumps.size:
                cond["G1.hinge.subgradient"] = float(np.max(
                    subgradient_residual(solution.jump_gradients, solution.jumps, p.sigma)))
        else:
            rows = br["breaks"]
            cond[f"{pv}.crack.natural"] = worst(f"{pv}.crack.natural", rows)
            cond[f"{pv}.crease.transmission"] = worst(f"{pv}.crease.transmission", rows)
            cond[f"{pv}.endpoint.crack"] = worst(f"{pv}.endpoint.crack", rows)
            cond[f"{pv}.endpoint.crease"] = worst(f"{pv}.endpoint.crease", rows)
            if br["equal_release"] and rows:
                cond[f"{pv}.equal_release.traces"] = max(r["max_condition"] for r in rows)
            cc = check_compliance(problem, solution, p, w, loads)
            rep.compliance_gap = cc
            cond[f"{pv}.compliance"] = cc["relative_gap"]
            if problem is Problem.E1:
                cond["E1.euler.pieces"] = euler["max_piece_residual"]["reinforcement"]
                cond["E1.euler.distributional"] = euler["distributional"]["reinforcement"]
            else:
                cond["F1.euler.reinforcement.pieces"] = euler["max_piece_residual"]["reinforcement"]
                cond["F1.euler.plate.distributional"] = euler["distributional"]["plate"]
                cond["F1.euler.sum.pieces"] = euler["max_piece_residual"]["sum"]
                cond["F1.euler.reinforcement.distributional"] = euler["distributional"]["reinforcement"]
                cond["F1.euler.sum.distributional"] = euler["distributional"]["sum"]
                cond["F1.euler.combined.distributional"] = euler["distributional"]["combined"]
        if with_threshold and problem is not Problem.G1:
            rep.threshold = check_threshold(problem, p, w, loads, solution.mesh.n_elements
                                            if _is_uniform(solution.mesh) else solution.mesh)
    else:
        vi = check_vi(problem, solution, p, w, loads)
        rep.vi_residuals = vi
        right = [s["d2u"] for s in vi["second_derivative_signs"] if s["side"] == "+"]
        left = [s["d2u"] for s in vi["second_derivative_signs"] if s["side"] == "-"]
        free_rows = _noncontact(br["breaks"], solution)
        sign_viol = max(0.0, -vi["min_multiplier"], -vi["min_gap"])
        stat = vi["stationarity"]
        cond[f"{pv}.vi.contact.right"] = min(right) if right else None
        cond[f"{pv}.vi.contact.left"] = min(left) if left else None
        if problem is Problem.E1:
            cond["E1.vi.inequality"] = max(vi["max_complementarity"], stat["reinforcement"], sign_viol)
            cond["E1.vi.free_crack.second"] = _max_keys(free_rows, "E1.crack.natural", ("d2u-", "d2u+"))
            cond["E1.vi.free_crack.third"] = _max_keys(free_rows, "E1.crack.natural", ("d3u-", "d3u+"))
            cond["E1.vi.free_crease"] = _max_keys(free_rows, "E1.crease.transmission", ("d2u-", "d2u+", "[d3u]"))
            free_euler = check_euler(problem, solution, p, w, loads, intervals=noncontact_intervals(solution))
            rep.euler_residual["noncontact"] = free_euler["pieces"]
            cond["E1.vi.euler.noncontact"] = free_euler["max_piece_residual"]["reinforcement"]
            cond["E1.vi.endpoint.crack"] = _max_endpoint(free_rows, "crack")
            cond["E1.vi.endpoint.crease"] = _max_endpoint(free_rows, "crease")
            if br["equal_release"] and free_rows:
                cond["E1.vi.equal_release"] = _max_keys(free_rows, None, ("d3u-", "d3u+"))
        else:
            cond["F1.vi.reinforcement"] = max(vi["max_complementarity"], stat["reinforcement"], sign_viol)
            cond["F1.vi.plate"] = max(vi["max_complementarity"], stat["plate"], sign_viol)
            cond["F1.vi.bilateral"] = max((r["max_condition"] for r in free_rows), default=None)
    rep.conditions = cond
    return rep


def _is_uniform(mesh: Mesh) -> bool:
    return np.allclose(mesh.nodes, np.linspace(-1, 1, mesh.n_nodes), atol=1e-14, rtol=0)


def _noncontact(rows, solution):
    contact_nodes = {a["node"] for a in solution.active_set}
    nodes = solution.mesh.nodes
    return [r for r in rows if int(np.argmin(np.abs(nodes - r["x"]))) not in contact_nodes]


def _max_keys(rows, tag, keys):
    vals = [abs(r["conditions"][k]) for r in rows if tag is None or r["tag"] == tag
            for k in keys if k in r["conditions"]]
    return max(vals) if vals else None


def _max_endpoint(rows, kind):
    vals = [r["max_condition"] for r in rows if r["kind"] == kind and r["tag"].endswith("endpoint." + kind)]
    return max(vals) if vals else None


def noncontact_intervals(solution: SolveReport) -> list[tuple[float, float]]:
    """Maximal intervals free of breaks and contact nodes, at least two cells long.

    With no contact these are exactly the smooth pieces.
    """
    mesh = solution.mesh
    nodes = mesh.nodes
    cuts = {0, mesh.n_nodes - 1, *mesh.break_nodes, *(a["node"] for a in solution.active_set)}
    cuts = sorted(cuts)
    out = []
    for i0, i1 in zip(cuts, cuts[1:]):
        contact_ends = any(a["node"] in (i0, i1) for a in solution.active_set)
        if i1 - i0 >= 2 or not contact_ends:
            out.append((float(nodes[i0]), float(nodes[i1])))
    return out
