"""Exact (Gauss-quadrature) evaluation of the energies E1, F1 and G1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fem import Mesh, PiecewiseDisplacement, _element_data
from .model import (
    BreakConfig,
    BreakKind,
    DirichletDatum,
    Loads,
    MeshMismatch,
    ModelParams,
    Problem,
)


@dataclass(frozen=True)
class EnergyBreakdown:
    damage: float = 0.0
    bending_r: float = 0.0
    load_r: float = 0.0
    glue: float = 0.0
    bending_p: float = 0.0
    load_p: float = 0.0
    plastic: float = 0.0

    @property
    def total(self) -> float:
        return (self.damage + self.bending_r + self.load_r + self.glue
                + self.bending_p + self.load_p + self.plastic)

    @property
    def elastic(self) -> float:
        """Everything except the damage and plastic dissipation."""
        return self.total - self.damage - self.plastic

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["total"] = self.total
        return d


def damage_count(breaks: BreakConfig, p: ModelParams, problem: Problem | str | None = None) -> float:
    """Griffith price of a break set.

    E1/F1: ``alpha * #cracks + beta * #creases``.  G1: ``beta * #hinges``
    (jump magnitudes are priced separately by ``sigma``).
    """
    if problem is None:
        problem = Problem.G1 if breaks.count(BreakKind.HINGE) else Problem.E1
    problem = Problem(problem)
    if problem is Problem.G1:
        return p.beta * breaks.count(BreakKind.HINGE)
    return p.alpha * breaks.count(BreakKind.CRACK) + p.beta * breaks.count(BreakKind.CREASE)


def hinge_jumps(u: PiecewiseDisplacement, w: DirichletDatum) -> np.ndarray:
    """Slope jumps ``[u'] = u'+ - u'-`` at every break, datum slope outside."""
    mesh = u.mesh
    last = mesh.n_nodes - 1
    out = []
    for i in sorted(mesh.break_nodes):
        x = mesh.nodes[i]
        right = float(w.d1(x)) if i == last else u.trace(i, 1, "+")
        left = float(w.d1(x)) if i == 0 else u.trace(i, 1, "-")
        out.append(right - left)
    return np.array(out)


def _check_conforms(u: PiecewiseDisplacement, breaks: BreakConfig) -> None:
    if u.mesh.breaks.key() != breaks.key():
        raise MeshMismatch("displacement break DOFs do not match the break configuration")


def _beam_terms(u: PiecewiseDisplacement, f, stiffness: float) -> tuple[float, float]:
    d = _element_data(u.mesh)
    u2 = u.at_quadrature(2)
    u0 = u.at_quadrature(0)
    bending = stiffness * float(np.sum(d.wq * u2**2))
    load = -float(np.sum(d.wq * f(d.xq) * u0))
    return bending, load


def eval_energy(
    problem: Problem | str,
    p: ModelParams,
    w: DirichletDatum,
    loads: Loads,
    breaks: BreakConfig,
    u,
) -> EnergyBreakdown:
    """Evaluate E1 (``u`` a field) or F1/G1 (``u`` a pair ``(u_r, u_p)``).

    Integrals use 4-point Gauss per element, which is exact for the
    polynomial terms; the damage term is read off ``breaks``.
    """
    problem = Problem(problem)
    if problem is Problem.E1:
        u_r = u
        u_p = None
    else:
        u_r, u_p = u
        if u_p.mesh.break_nodes:
            raise MeshMismatch("the plate field must be unbroken")
        if u_p.mesh.nodes.shape != u_r.mesh.nodes.shape or np.any(u_p.mesh.nodes != u_r.mesh.nodes):
            raise MeshMismatch("plate and reinforcement fields must share nodes")
    _check_conforms(u_r, breaks)
    d = _element_data(u_r.mesh)
    bending_r, load_r = _beam_terms(u_r, loads.f_r, p.eta)
    partner = w(d.xq) if u_p is None else u_p.at_quadrature(0)
    glue = p.mu * float(np.sum(d.wq * (u_r.at_quadrature(0) - partner) ** 2))
    bending_p = load_p = plastic = 0.0
    if u_p is not None:
        bending_p, load_p = _beam_terms(u_p, loads.f_p, p.gamma)
    if problem is Problem.G1:
        plastic = p.sigma * float(np.sum(np.abs(hinge_jumps(u_r, w))))
    return EnergyBreakdown(
        damage=damage_count(breaks, p, problem),
        bending_r=bending_r,
        load_r=load_r,
        glue=glue,
        bending_p=bending_p,
        load_p=load_p,
        plastic=plastic,
    )


def blake_zisserman_form(
    p: ModelParams, w: DirichletDatum, f, breaks: BreakConfig, u: PiecewiseDisplacement
) -> tuple[float, float]:
    """E1 rewritten by completing the square in the load and glue terms.

    Returns ``(bz, const)`` with ``bz = J + eta*int|u''|^2 + mu*int|u - g|^2``,
    ``g = w + f/(2 mu)``, and ``const = int(f w + f^2/(4 mu))`` so that
    ``E1(u) = bz - const``.
    """
    _check_conforms(u, breaks)
    d = _element_data(u.mesh)
    fq, wq_ = f(d.xq), w(d.xq)
    g = wq_ + fq / (2 * p.mu)
    bz = (damage_count(breaks, p, Problem.E1)
          + p.eta * float(np.sum(d.wq * u.at_quadrature(2) ** 2))
          + p.mu * float(np.sum(d.wq * (u.at_quadrature(0) - g) ** 2)))
    const = float(np.sum(d.wq * (fq * wq_ + fq**2 / (4 * p.mu))))
    return bz, const
