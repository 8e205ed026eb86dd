"""Exact minimisation of E1 / F1 / G1 for a fixed break configuration.

All smooth parts are quadratic in the DOF vector ``x``::

    Q(x) = 1/2 x^T H x - g^T x + c0

E1 and F1 reduce to one sparse SPD solve after clamping.  G1 adds
``sigma * sum |jump_i|`` over hinge slope jumps and is solved by exact
elimination of the smooth DOFs followed by soft-thresholding on the jumps.
The obstacle variants are bound-constrained QPs after a change of variables
and are solved by a primal-dual active set iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import EnergyBreakdown, eval_energy
from .fem import (
    Mesh,
    PiecewiseDisplacement,
    _element_data,
    apply_clamp,
    assemble_load,
    build_mesh,
    dense_matrix,
    interpolate,
    local_bending,
    local_mass,
)
from .model import (
    BreakConfig,
    BreakKind,
    DirichletDatum,
    FlexbeamError,
    Loads,
    MeshMismatch,
    ModelParams,
    Problem,
    validate_params,
)

log = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-9


class SingularSystem(FlexbeamError):
    pass


class MaxIterations(FlexbeamError):
    pass


class InfeasibleClamp(FlexbeamError):
    pass


@dataclass
class SolveReport:
    problem: Problem
    breaks: BreakConfig
    u: PiecewiseDisplacement
    u_p: PiecewiseDisplacement | None
    energy: EnergyBreakdown
    kkt_residual: float
    iterations: int = 1
    method: str = "direct"
    constrained: bool = False
    active_set: list[dict] = field(default_factory=list)
    multipliers: np.ndarray | None = None
    gaps: np.ndarray | None = None
    jumps: np.ndarray | None = None
    jump_gradients: np.ndarray | None = None
    constraint_sites: list[tuple[int, str]] = field(default_factory=list)

    @property
    def fields(self):
        return self.u if self.u_p is None else (self.u, self.u_p)

    @property
    def dofs(self) -> np.ndarray:
        if self.u_p is None:
            return np.array(self.u.coeffs)
        return np.concatenate([self.u.coeffs, self.u_p.coeffs])

    @property
    def mesh(self) -> Mesh:
        return self.u.mesh


# ---------------------------------------------------------------- assembly


@dataclass
class QuadraticSystem:
    """Smooth energy ``1/2 x'Hx - g'x + c0`` plus clamping, before elimination."""

    problem: Problem
    mesh_r: Mesh
    mesh_p: Mesh | None
    H: np.ndarray
    g: np.ndarray
    c0: float
    fixed: np.ndarray
    fixed_values: np.ndarray

    @property
    def n_r(self) -> int:
        return self.mesh_r.ndof

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.H.shape[0], dtype=bool)
        mask[self.fixed] = False
        return np.flatnonzero(mask)

    def full(self, x_free: np.ndarray) -> np.ndarray:
        x = np.zeros(self.H.shape[0])
        x[self.fixed] = self.fixed_values
        x[self.free] = x_free
        return x

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        """Hessian and linear term on the free DOFs with clamped values eliminated."""
        fr = self.free
        Hff = self.H[np.ix_(fr, fr)]
        rhs = self.g[fr] - self.H[np.ix_(fr, self.fixed)] @ self.fixed_values
        return Hff, rhs

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.H @ x)) - float(self.g @ x) + self.c0

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.H @ x - self.g

    def fields(self, x: np.ndarray):
        u = PiecewiseDisplacement(self.mesh_r, x[: self.n_r])
        if self.mesh_p is None:
            return u, None
        return u, PiecewiseDisplacement(self.mesh_p, x[self.n_r:])


def build_system(
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    mesh: Mesh,
) -> QuadraticSystem:
    """Assemble the quadratic part of the energy on ``mesh`` (breaks from the mesh)."""
    problem = Problem(problem)
    A = dense_matrix(mesh, local_bending(mesh))
    M = dense_matrix(mesh, local_mass(mesh))
    Fr = assemble_load(mesh, loads.f_r)
    clamp_r = apply_clamp(mesh, w)
    if problem is Problem.E1:
        d = _element_data(mesh)
        bw = assemble_load(mesh, w)
        cw = float(np.sum(d.wq * w(d.xq) ** 2))
        H = 2.0 * (p.eta * A + p.mu * M)
        g = Fr + 2.0 * p.mu * bw
        return QuadraticSystem(problem, mesh, None, H, g, p.mu * cw, clamp_r.dofs, clamp_r.values)
    mp = mesh.unbroken()
    Ap = dense_matrix(mp, local_bending(mp))
    Mp = dense_matrix(mp, local_mass(mp))
    Mrp = dense_matrix(mesh, local_mass(mesh), mp)
    Fp = assemble_load(mp, loads.f_p)
    clamp_p = apply_clamp(mp, w)
    H = 2.0 * np.block([[p.eta * A + p.mu * M, -p.mu * Mrp],
                        [-p.mu * Mrp.T, p.gamma * Ap + p.mu * Mp]])
    g = np.concatenate([Fr, Fp])
    fixed = np.concatenate([clamp_r.dofs, clamp_p.dofs + mesh.ndof])
    vals = np.concatenate([clamp_r.values, clamp_p.values])
    return QuadraticSystem(problem, mesh, mp, H, g, 0.0, fixed, vals)


class _SPDSolver:
    """Cholesky of the Jacobi-scaled matrix with one step of iterative refinement."""

    def __init__(self, H: np.ndarray):
        H = np.asarray(H)
        d = np.diag(H)
        if d.size and (not np.all(np.isfinite(d)) or np.any(d <= 0)):
            raise SingularSystem("non-positive diagonal in a clamped system")
        self.H = H
        self.D = 1.0 / np.sqrt(d)
        try:
            self.cho = sla.cho_factor(self.D[:, None] * H * self.D[None, :], check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("clamped system is not positive definite") from exc
        piv = np.abs(np.diag(self.cho[0]))
        if piv.size and np.min(piv) <= 1e-7 * np.max(piv):
            raise SingularSystem("clamped system is numerically singular")

    def _raw(self, rhs):
        D = self.D if rhs.ndim == 1 else self.D[:, None]
        return D * sla.cho_solve(self.cho, D * rhs, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.D.size == 0:
            return np.zeros_like(rhs)
        x = self._raw(rhs)
        return x + self._raw(rhs - self.H @ x)


def _congruence(T: sp.spmatrix, H: np.ndarray) -> np.ndarray:
    """``T' H T`` for sparse ``T`` and dense symmetric ``H``."""
    HT = np.asarray((T.T @ H).T)
    return np.asarray(T.T @ HT)


def _mesh_for(mesh_or_n, breaks: BreakConfig) -> Mesh:
    if isinstance(mesh_or_n, Mesh):
        if mesh_or_n.breaks.key() == breaks.key():
            return mesh_or_n
        return mesh_or_n.with_breaks(breaks)
    return build_mesh(int(mesh_or_n), breaks)


def _report(system: QuadraticSystem, x: np.ndarray, p, w, loads, breaks, **kw) -> SolveReport:
    u, u_p = system.fields(x)
    energy = eval_energy(system.problem, p, w, loads, breaks, u if u_p is None else (u, u_p))
    return SolveReport(system.problem, breaks, u, u_p, energy, **kw)


def backward_error(H, x: np.ndarray, rhs: np.ndarray) -> float:
    """Normwise backward error ``|Hx - rhs| / (|H| |x| + |rhs|)`` in the max norm."""
    r = H @ x - rhs
    Hn = float(np.abs(H).sum(axis=1).max()) if H.shape[0] else 0.0
    den = Hn * float(np.max(np.abs(x), initial=0.0)) + float(np.max(np.abs(rhs), initial=0.0))
    num = float(np.max(np.abs(r), initial=0.0))
    return num / den if den > 0 else num


# ------------------------------------------------------------ E1 / F1


def _solve_smooth(problem, p, w, loads, breaks, mesh) -> SolveReport:
    validate_params(p, problem)
    breaks.check_for(problem)
    mesh = _mesh_for(mesh, breaks)
    system = build_system(problem, p, w, loads, mesh)
    Hff, rhs = system.reduced()
    xf = _SPDSolver(Hff).solve(rhs)
    if not np.all(np.isfinite(xf)):
        raise SingularSystem("non-finite solution")
    res = backward_error(Hff, xf, rhs)
    return _report(system, system.full(xf), p, w, loads, breaks, kkt_residual=res)


def solve_E1_fixed(p: ModelParams, w: DirichletDatum, f, breaks: BreakConfig, mesh) -> SolveReport:
    """Minimise E1 over fields conforming to ``breaks``.

    Solves ``(2 eta A + 2 mu M) u = F + 2 mu b_w`` on the free DOFs, where
    ``b_w`` is the mass-weighted datum.  ``f`` is a LoadField or Loads.
    """
    loads = f if isinstance(f, Loads) else Loads.single(f)
    return _solve_smooth(Problem.E1, p, w, loads, breaks, mesh)


def solve_F1_fixed(p: ModelParams, w: DirichletDatum, f_r, f_p, breaks: BreakConfig, mesh) -> SolveReport:
    """Minimise F1 jointly in ``(u_r, u_p)``; breaks act on ``u_r`` only."""
    return _solve_smooth(Problem.F1, p, w, Loads(f_r, f_p), breaks, mesh)


# ------------------------------------------------------------------ G1


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def subgradient_residual(q: np.ndarray, j: np.ndarray, sigma: float) -> np.ndarray:
    """Violation of ``0 in q + sigma * d|j|`` componentwise.

    ``q`` is the gradient of the smooth part with respect to the jumps.
    """
    zero = j == 0
    out = np.abs(q + sigma * np.sign(j))
    out[zero] = np.maximum(np.abs(q[zero]) - sigma, 0.0)
    return out


def lasso_cd(S: np.ndarray, b: np.ndarray, sigma: float, tol: float, max_sweeps: int = 100000):
    """Minimise ``1/2 j'Sj - b'j + sigma*|j|_1`` for small SPD ``S``.

    Cyclic coordinate descent with exact soft-threshold updates, then an
    exact re-solve on the detected support with the detected signs.
    """
    k = b.size
    j = np.zeros(k)
    if k == 0:
        return j, 0
    d = np.diag(S)
    for sweep in range(1, max_sweeps + 1):
        for i in range(k):
            r = b[i] - S[i] @ j + d[i] * j[i]
            j[i] = soft_threshold(r, sigma) / d[i]
        q = S @ j - b
        if np.max(subgradient_residual(q, j, sigma)) <= tol:
            break
    else:
        raise MaxIterations(f"jump soft-thresholding did not converge in {max_sweeps} sweeps")
    support = j != 0
    if np.any(support):
        s = np.sign(j[support])
        jj = np.zeros(k)
        jj[support] = np.linalg.solve(S[np.ix_(support, support)], b[support] - sigma * s)
        if np.all(np.sign(jj[support]) == s):
            qq = S @ jj - b
            if np.max(subgradient_residual(qq, jj, sigma)) <= np.max(subgradient_residual(q, j, sigma)):
                j = jj
    return j, sweep


def _hinge_reduction(system: QuadraticSystem, w: DirichletDatum):
    """Change of variables ``x_free = offset + T z`` exposing the hinge jumps.

    The jump slot replaces the right slope at interior hinges and the
    released slope at endpoint hinges; returns ``(T, offset, J)`` with ``J``
    the positions of the jumps in ``z``.
    """
    mesh = system.mesh_r
    free = system.free
    pos = {int(d): k for k, d in enumerate(free)}
    nf = free.size
    dm = mesh.dofs
    last = mesh.n_nodes - 1
    rows, cols, vals = list(range(nf)), list(range(nf)), [1.0] * nf
    offset = np.zeros(nf)
    jump_slots = []
    for i in sorted(mesh.break_nodes):
        if i == 0:
            k = pos[int(dm.right_slope[0])]
            offset[k] = float(w.d1(-1.0))
        elif i == last:
            k = pos[int(dm.left_slope[last])]
            offset[k] = float(w.d1(1.0))
            vals[k] = -1.0
        else:
            k = pos[int(dm.right_slope[i])]
            rows.append(k)
            cols.append(pos[int(dm.left_slope[i])])
            vals.append(1.0)
        jump_slots.append(k)
    T = sp.csr_matrix((vals, (rows, cols)), shape=(nf, nf))
    return T, offset, np.array(jump_slots, dtype=np.int64)


def solve_G1_fixed(
    p: ModelParams,
    w: DirichletDatum,
    f_r,
    f_p,
    hinges: BreakConfig,
    mesh,
    tol: float = STATIONARITY_TOL,
) -> SolveReport:
    """Minimise G1 for a fixed hinge set.

    The smooth DOFs are eliminated exactly (Schur complement onto the hinge
    jumps); the remaining small l1 problem is solved by soft-thresholding
    until every jump satisfies its subgradient condition.
    """
    validate_params(p, Problem.G1)
    hinges.check_for(Problem.G1)
    loads = Loads(f_r, f_p)
    mesh = _mesh_for(mesh, hinges)
    system = build_system(Problem.G1, p, w, loads, mesh)
    Hff, rhs = system.reduced()
    T, offset, J = _hinge_reduction(system, w)
    nf = offset.size
    Hz = _congruence(T, Hff)
    gz = T.T @ (rhs - Hff @ offset)
    Y = np.setdiff1d(np.arange(nf), J)
    HYY = Hz[np.ix_(Y, Y)]
    HYJ = Hz[np.ix_(Y, J)]
    HJJ = Hz[np.ix_(J, J)]
    lu = _SPDSolver(HYY)
    if J.size:
        X = lu.solve(HYJ)
        S = HJJ - HYJ.T @ X
        S = 0.5 * (S + S.T)
    else:
        S = np.zeros((0, 0))
    gy0 = lu.solve(gz[Y])
    b = gz[J] - HYJ.T @ gy0
    scale = 1.0 + p.sigma + float(np.max(np.abs(b), initial=0.0))
    j, sweeps = lasso_cd(S, b, p.sigma, tol * scale)
    y = gy0 - (X @ j if J.size else 0.0)
    z = np.zeros(nf)
    z[Y], z[J] = y, j
    xf = offset + T @ z
    q = S @ j - b
    sub = subgradient_residual(q, j, p.sigma)
    stat_y = backward_error(HYY, y, gz[Y] - HYJ @ j)
    kkt = max(float(np.max(sub, initial=0.0)) / scale, stat_y)
    return _report(system, system.full(xf), p, w, loads, hinges, kkt_residual=kkt,
                   iterations=sweeps, method="schur+soft-threshold", jumps=j, jump_gradients=q)


# ------------------------------------------------------------ obstacle


def _constraint_rows(system: QuadraticSystem, w: DirichletDatum):
    """Unilateral constraints as ``x[lead] - x[partner] >= lower`` (partner may be -1).

    E1: every value trace of the reinforcement stays above ``w``.
    F1: every value trace of ``u_r`` stays above the plate value at that node.
    """
    mesh = system.mesh_r
    dm = mesh.dofs
    n = mesh.n_nodes
    rows = []
    for i in range(n):
        sides = ["-", "+"] if (0 < i < n - 1 and mesh.break_nodes.get(i) is BreakKind.CRACK) else [""]
        for side in sides:
            dof = int(dm.left_value[i] if side == "-" else dm.right_value[i])
            if system.problem is Problem.E1:
                rows.append((dof, -1, float(w(mesh.nodes[i])), i, side))
            else:
                partner = system.n_r + int(system.mesh_p.dofs.left_value[i])
                rows.append((dof, partner, 0.0, i, side))
    return rows


def solve_bound_qp(H, g: np.ndarray, idx: np.ndarray, lower: np.ndarray, max_iter: int = 200):
    """Minimise ``1/2 z'Hz - g'z`` subject to ``z[idx] >= lower``.

    Primal-dual active set iteration; if it revisits an active set without
    converging, a primal active-set method (finite termination) takes over
    from the projected iterate.  Returns ``(z, lam, iterations, method)``
    with ``lam = (Hz - g)[idx]``.
    """
    n = H.shape[0]
    cvec = np.diag(H)[idx]
    Hnorm = float(np.abs(H).sum(axis=0).max())

    def tols(z):
        zs = 1.0 + float(np.max(np.abs(z), initial=0.0)) + float(np.max(np.abs(lower), initial=0.0))
        fs = Hnorm * float(np.max(np.abs(z), initial=0.0)) + float(np.max(np.abs(g), initial=0.0))
        return 1e-12 * zs, 1e-12 * fs

    def solve_with(active_mask):
        act = idx[active_mask]
        z = np.zeros(n)
        z[act] = lower[active_mask]
        freem = np.ones(n, dtype=bool)
        freem[act] = False
        fr = np.flatnonzero(freem)
        rhs = g[fr] - H[np.ix_(fr, act)] @ lower[active_mask]
        z[fr] = _SPDSolver(H[np.ix_(fr, fr)]).solve(rhs)
        return z

    z = _SPDSolver(H).solve(g)
    lam = np.zeros(idx.size)
    seen = set()
    it = 0
    for it in range(1, max_iter + 1):
        active = lam + cvec * (lower - z[idx]) > 0
        key = active.tobytes()
        z = solve_with(active)
        lam = np.where(active, (H @ z - g)[idx], 0.0)
        gap = z[idx] - lower
        ztol, ftol = tols(z)
        if np.all(gap >= -ztol) and np.all(lam >= -ftol):
            return z, np.maximum(lam, 0.0), it, "pdas"
        if key in seen:
            break
        seen.add(key)
    log.debug("pdas stalled after %d iterations; switching to primal active set", it)
    z0 = z.copy()
    z0[idx] = np.maximum(z0[idx], lower)
    z, lam, it2 = _primal_active_set(H, g, idx, lower, z0, 50 * (idx.size + 10), tols)
    return z, lam, it + it2, "primal-active-set"


def _primal_active_set(H, g, idx, lower, z, max_iter, tols):
    n = H.shape[0]
    working = z[idx] <= lower
    z[idx[working]] = lower[working]
    for it in range(1, max_iter + 1):
        act = idx[working]
        freem = np.ones(n, dtype=bool)
        freem[act] = False
        fr = np.flatnonzero(freem)
        grad = H @ z - g
        step = _SPDSolver(H[np.ix_(fr, fr)]).solve(-grad[fr])
        pdir = np.zeros(n)
        pdir[fr] = step
        ztol, ftol = tols(z)
        if np.max(np.abs(step), initial=0.0) <= 1e-3 * ztol:
            lam = grad[idx]
            lam_w = np.where(working, lam, np.inf)
            k = int(np.argmin(lam_w)) if lam_w.size else 0
            if not lam_w.size or lam_w[k] >= -ftol:
                return z, np.where(working, np.maximum(lam, 0.0), 0.0), it
            working[k] = False
            continue
        alpha, block = 1.0, -1
        dz = pdir[idx]
        for k in np.flatnonzero(~working & (dz < 0)):
            a = (lower[k] - z[idx[k]]) / dz[k]
            if a < alpha:
                alpha, block = a, k
        z = z + max(alpha, 0.0) * pdir
        if block >= 0:
            working[block] = True
            z[idx[block]] = lower[block]
    raise MaxIterations("primal active set did not terminate")


def _solve_obstacle(problem, p, w, loads, breaks, mesh, max_iter=200) -> SolveReport:
    validate_params(p, problem)
    breaks.check_for(problem)
    mesh = _mesh_for(mesh, breaks)
    system = build_system(problem, p, w, loads, mesh)
    Hff, rhs = system.reduced()
    free = system.free
    pos = -np.ones(system.H.shape[0], dtype=np.int64)
    pos[free] = np.arange(free.size)
    x_fixed = system.full(np.zeros(free.size))
    lead, partner, lower, meta = [], [], [], []
    for dof, other, lo, node, side in _constraint_rows(system, w):
        if pos[dof] < 0:
            bound = lo + (x_fixed[other] if other >= 0 else 0.0)
            if x_fixed[dof] < bound - 1e-12 * (1 + abs(bound)):
                raise InfeasibleClamp(f"clamped value violates the constraint at node {node}")
            continue
        if other >= 0 and pos[other] < 0:
            lo, other = lo + x_fixed[other], -1
        lead.append(pos[dof])
        partner.append(pos[other] if other >= 0 else -1)
        lower.append(lo)
        meta.append((node, side))
    lead = np.array(lead, dtype=np.int64)
    lower = np.array(lower, dtype=float)
    nf = free.size
    # x = T z with z[lead] the constraint gap variable (plus bound) -> simple bounds
    r = list(range(nf)) + [l for l, q in zip(lead, partner) if q >= 0]
    c = list(range(nf)) + [q for q in partner if q >= 0]
    T = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(nf, nf))
    Hz = _congruence(T, Hff)
    gz = T.T @ rhs
    z, lam, iters, method = solve_bound_qp(Hz, gz, lead, lower, max_iter=max_iter)
    gap = z[lead] - lower
    inactive = np.ones(nf, dtype=bool)
    inactive[lead[lam > 0]] = False
    kkt = max(
        backward_error(Hz[inactive], z, gz[inactive]),
        float(np.max(-gap, initial=0.0)) / (1.0 + float(np.max(np.abs(z), initial=0.0))),
    )
    active = [
        {"node": int(node), "x": float(system.mesh_r.nodes[node]), "side": side,
         "multiplier": float(l), "gap": float(gp)}
        for (node, side), l, gp in zip(meta, lam, gap)
        if l > 0 or gp == 0.0
    ]
    return _report(system, system.full(T @ z), p, w, loads, breaks, kkt_residual=kkt,
                   iterations=iters, method=method, constrained=True, active_set=active,
                   multipliers=lam, gaps=gap, constraint_sites=meta)


def solve_E1_obstacle(p: ModelParams, w: DirichletDatum, f, breaks: BreakConfig, mesh) -> SolveReport:
    """Minimise E1 subject to ``u >= w`` at every node and one-sided break trace."""
    loads = f if isinstance(f, Loads) else Loads.single(f)
    return _solve_obstacle(Problem.E1, p, w, loads, breaks, mesh)


def solve_F1_obstacle(p: ModelParams, w: DirichletDatum, f_r, f_p, breaks: BreakConfig, mesh) -> SolveReport:
    """Minimise F1 subject to ``u_r >= u_p`` at every node and break trace."""
    return _solve_obstacle(Problem.F1, p, w, Loads(f_r, f_p), breaks, mesh)


# ------------------------------------------------------------ dispatch


def stationarity_residual(
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    breaks: BreakConfig,
    x: np.ndarray,
    mesh,
    constrained: bool = False,
) -> float:
    """Optimality violation of an arbitrary DOF vector for the fixed-break problem.

    Same scale as ``SolveReport.kkt_residual`` for a freshly computed
    solution; used to re-check stored results.  Clamp violations count too.
    """
    problem = Problem(problem)
    mesh = _mesh_for(mesh, breaks)
    system = build_system(problem, p, w, loads, mesh)
    x = np.asarray(x, dtype=float)
    if x.shape != system.g.shape:
        raise MeshMismatch(f"expected {system.g.size} DOFs, got {x.size}")
    clamp = float(np.max(np.abs(x[system.fixed] - system.fixed_values), initial=0.0))
    clamp /= 1.0 + float(np.max(np.abs(system.fixed_values), initial=0.0))
    Hff, rhs = system.reduced()
    free = system.free
    xf = x[free]
    if problem is Problem.G1:
        T, offset, J = _hinge_reduction(system, w)
        z = spla.spsolve(T.tocsc(), xf - offset) if xf.size else xf
        Hz = _congruence(T, Hff)
        gz = T.T @ (rhs - Hff @ offset)
        Y = np.setdiff1d(np.arange(xf.size), J)
        stat = backward_error(Hz[Y], z, gz[Y])
        q = (Hz @ z - gz)[J]
        scale = 1.0 + p.sigma + float(np.max(np.abs(gz[J]), initial=0.0))
        sub = float(np.max(subgradient_residual(q, z[J], p.sigma), initial=0.0)) / scale
        return max(stat, sub, clamp)
    if not constrained:
        return max(backward_error(Hff, xf, rhs), clamp)
    G = system.gradient(x)
    Hn = float(np.abs(system.H).sum(axis=1).max())
    scale = Hn * float(np.max(np.abs(x))) + float(np.max(np.abs(system.g)))
    scale = scale if scale > 0 else 1.0
    is_free = np.zeros(x.size, dtype=bool)
    is_free[free] = True
    resid = G.copy()
    viol = 0.0
    for dof, other, lo, _, _ in _constraint_rows(system, w):
        gap = x[dof] - (x[other] if other >= 0 else 0.0) - lo
        lam = G[dof] if is_free[dof] else 0.0
        resid[dof] -= lam
        if other >= 0:
            resid[other] += lam
        viol = max(viol, -gap / (1.0 + abs(lo)), -lam / scale, abs(min(lam / scale, gap)))
    return max(float(np.max(np.abs(resid[free]), initial=0.0)) / scale, viol, clamp)


def solve_fixed(
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    breaks: BreakConfig,
    mesh,
    constrained: bool = False,
) -> SolveReport:
    problem = Problem(problem)
    if constrained:
        if problem is Problem.G1:
            raise FlexbeamError("unilateral constraint is only available for E1 and F1")
        return _solve_obstacle(problem, p, w, loads, breaks, mesh)
    if problem is Problem.E1:
        return solve_E1_fixed(p, w, loads, breaks, mesh)
    if problem is Problem.F1:
        return solve_F1_fixed(p, w, loads.f_r, loads.f_p, breaks, mesh)
    return solve_G1_fixed(p, w, loads.f_r, loads.f_p, breaks, mesh)


def reference_energy(problem, p, w, loads, mesh) -> EnergyBreakdown:
    """Energy of the clamped, unbroken Hermite interpolant of ``w`` (feasible reference)."""
    problem = Problem(problem)
    m = mesh.unbroken() if isinstance(mesh, Mesh) else build_mesh(int(mesh))
    u = interpolate(m, w)
    fields = u if problem is Problem.E1 else (u, interpolate(m, w))
    return eval_energy(problem, p, w, loads, BreakConfig(), fields)
