"""Cubic Hermite (H^2-conforming) discretisation of (-1, 1) with duplicated
trace degrees of freedom at break nodes.

Every node carries a left trace (value, slope) seen from the element on its
left and a right trace seen from the element on its right.  The two traces
share global DOFs except at breaks:

* crack   -> independent (value, slope) on each side
* crease  -> shared value, independent slopes
* hinge   -> same layout as a crease

The endpoints carry a single interior trace; clamping to the datum is
imposed by :func:`apply_clamp`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .model import BreakConfig, BreakKind, DegenerateMesh, DirichletDatum, LoadField, MeshMismatch

N_GAUSS = 4
_GX, _GW = np.polynomial.legendre.leggauss(N_GAUSS)


def gauss_points(nodes: np.ndarray, order: int = N_GAUSS) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on every element, shape ``(n_el, order)``."""
    gx, gw = (_GX, _GW) if order == N_GAUSS else np.polynomial.legendre.leggauss(order)
    a, b = nodes[:-1, None], nodes[1:, None]
    h = b - a
    xq = a + 0.5 * h * (gx[None, :] + 1.0)
    wq = 0.5 * h * gw[None, :]
    return xq, wq


def hermite_basis(xi: np.ndarray, h: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Hermite shape functions (or x-derivatives) at local coordinate ``xi`` in [0, 1].

    ``xi`` and ``h`` broadcast together; the result has a trailing axis of 4
    ordered (value_left, slope_left, value_right, slope_right).
    """
    xi, h = np.broadcast_arrays(np.asarray(xi, float), np.asarray(h, float))
    one = np.ones_like(xi)
    if deriv == 0:
        cols = (1 - 3 * xi**2 + 2 * xi**3, h * (xi - 2 * xi**2 + xi**3),
                3 * xi**2 - 2 * xi**3, h * (-(xi**2) + xi**3))
    elif deriv == 1:
        cols = ((-6 * xi + 6 * xi**2) / h, 1 - 4 * xi + 3 * xi**2,
                (6 * xi - 6 * xi**2) / h, -2 * xi + 3 * xi**2)
    elif deriv == 2:
        cols = ((-6 + 12 * xi) / h**2, (-4 + 6 * xi) / h,
                (6 - 12 * xi) / h**2, (-2 + 6 * xi) / h)
    elif deriv == 3:
        cols = (12 * one / h**3, 6 * one / h**2, -12 * one / h**3, 6 * one / h**2)
    else:
        cols = (0 * one,) * 4
    return np.stack(cols, axis=-1)


class Mesh:
    """Sorted nodes spanning [-1, 1] with break configuration attached to nodes."""

    def __init__(self, nodes, breaks: BreakConfig = BreakConfig()):
        nodes = np.array(nodes, dtype=float)
        nodes.setflags(write=False)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DegenerateMesh("need at least two nodes")
        if nodes[0] != -1.0 or nodes[-1] != 1.0:
            raise DegenerateMesh("mesh must span [-1, 1]")
        if np.any(np.diff(nodes) <= 0):
            raise DegenerateMesh("nodes must be strictly increasing")
        self.nodes = nodes
        self.breaks = breaks
        bn = {}
        for b in breaks:
            i = int(np.argmin(np.abs(nodes - b.x)))
            if abs(nodes[i] - b.x) > 1e-14:
                raise MeshMismatch(f"break at {b.x} is not a mesh node")
            bn[i] = b.kind
        self.break_nodes: dict[int, BreakKind] = bn

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def with_breaks(self, breaks: BreakConfig) -> "Mesh":
        """Same nodes, different break configuration (locations must be nodes)."""
        m = Mesh(self.nodes, breaks)
        if "_eldata" in self.__dict__:
            m.__dict__["_eldata"] = self.__dict__["_eldata"]
        return m

    def unbroken(self) -> "Mesh":
        return self.with_breaks(BreakConfig())

    def refine(self) -> "Mesh":
        """Uniform bisection of every element, breaks kept."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        nodes = np.empty(2 * self.nodes.size - 1)
        nodes[0::2], nodes[1::2] = self.nodes, mid
        return Mesh(nodes, self.breaks)

    def pieces(self) -> list[tuple[int, int]]:
        """Node-index ranges of the smooth pieces between consecutive breaks."""
        cuts = sorted({0, self.n_nodes - 1, *self.break_nodes})
        return [(a, b) for a, b in zip(cuts, cuts[1:])]

    @cached_property
    def dofs(self) -> "DofMap":
        return DofMap(self)

    @property
    def ndof(self) -> int:
        return self.dofs.ndof


class DofMap:
    """Global numbering of trace DOFs; see module docstring for the layout."""

    def __init__(self, mesh: Mesh):
        n = mesh.n_nodes
        lv, ls, rv, rs = (np.empty(n, dtype=np.int64) for _ in range(4))
        k = 0
        for i in range(n):
            kind = mesh.break_nodes.get(i)
            interior = 0 < i < n - 1
            if not interior or kind is None:
                lv[i] = rv[i] = k
                ls[i] = rs[i] = k + 1
                k += 2
            elif kind is BreakKind.CRACK:
                lv[i], ls[i], rv[i], rs[i] = k, k + 1, k + 2, k + 3
                k += 4
            else:
                lv[i] = rv[i] = k
                ls[i], rs[i] = k + 1, k + 2
                k += 3
        self.left_value, self.left_slope = lv, ls
        self.right_value, self.right_slope = rv, rs
        self.ndof = k
        for a in (lv, ls, rv, rs):
            a.setflags(write=False)

    @cached_property
    def element_dofs(self) -> np.ndarray:
        """(n_el, 4) global DOFs of each element in Hermite order."""
        return np.stack(
            [self.right_value[:-1], self.right_slope[:-1], self.left_value[1:], self.left_slope[1:]],
            axis=1,
        )

    @cached_property
    def value_dofs(self) -> np.ndarray:
        return np.unique(np.concatenate([self.left_value, self.right_value]))

    @cached_property
    def value_dof_node(self) -> np.ndarray:
        """Node index of every DOF that is a value DOF (-1 for slopes)."""
        out = -np.ones(self.ndof, dtype=np.int64)
        out[self.left_value] = np.arange(self.left_value.size)
        out[self.right_value] = np.arange(self.right_value.size)
        return out


def build_mesh(n_elements: int, breaks: BreakConfig = BreakConfig(), snap_fraction: float = 0.25) -> Mesh:
    """Uniform partition of [-1, 1] with every break location made a node.

    A break lying within ``snap_fraction * h`` of an interior uniform node
    replaces that node; otherwise it is inserted.  This keeps element lengths
    bounded below by a fraction of ``h`` except next to the endpoints.
    """
    if int(n_elements) < 2:
        raise DegenerateMesh("n_elements must be >= 2")
    n = int(n_elements)
    xs = breaks.locations
    if xs.size > 1 and np.min(np.diff(xs)) < 1e-12:
        raise DegenerateMesh("two breaks closer than 1e-12")
    nodes = np.linspace(-1.0, 1.0, n + 1)
    h = 2.0 / n
    movable = np.ones(n + 1, dtype=bool)
    movable[[0, -1]] = False
    extra = []
    for x in xs:
        i = int(np.argmin(np.abs(nodes - x)))
        d = abs(nodes[i] - x)
        if d <= 1e-14:
            nodes[i] = x
            movable[i] = False
        elif movable[i] and d < snap_fraction * h:
            nodes[i] = x
            movable[i] = False
        else:
            extra.append(x)
    nodes = np.sort(np.concatenate([nodes, extra]))
    if np.any(np.diff(nodes) <= 1e-12):
        raise DegenerateMesh("break too close to a node")
    return Mesh(nodes, breaks)


class ElementData:
    """Quadrature points and basis tabulations for all elements of a mesh."""

    def __init__(self, nodes: np.ndarray, order: int = N_GAUSS):
        self.xq, self.wq = gauss_points(nodes, order)
        h = np.diff(nodes)[:, None]
        gx = (self.xq - nodes[:-1, None]) / h
        self.B0 = hermite_basis(gx, h, 0)  # (n_el, q, 4)
        self.B2 = hermite_basis(gx, h, 2)
        self.bending = None
        self.mass = None


def _element_data(mesh: Mesh) -> ElementData:
    ed = mesh.__dict__.get("_eldata")
    if ed is None:
        ed = ElementData(mesh.nodes)
        mesh.__dict__["_eldata"] = ed
    return ed


def _scatter_matrix(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    ed = mesh.dofs.element_dofs
    rows = np.repeat(ed, 4, axis=1).ravel()
    cols = np.tile(ed, (1, 4)).ravel()
    n = mesh.ndof
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def dense_matrix(mesh: Mesh, local: np.ndarray, mesh_cols: Mesh | None = None) -> np.ndarray:
    """Dense assembly of element matrices (rows from ``mesh``, columns from ``mesh_cols``)."""
    mc = mesh if mesh_cols is None else mesh_cols
    er, ec = mesh.dofs.element_dofs, mc.dofs.element_dofs
    n, m = mesh.ndof, mc.ndof
    flat = (er[:, :, None] * m + ec[:, None, :]).ravel()
    return np.bincount(flat, weights=local.ravel(), minlength=n * m).reshape(n, m)


def _scatter_vector(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.ndof)
    np.add.at(out, mesh.dofs.element_dofs.ravel(), local.ravel())
    return out


def local_bending(mesh: Mesh) -> np.ndarray:
    d = _element_data(mesh)
    if d.bending is None:
        d.bending = np.einsum("eq,eqi,eqj->eij", d.wq, d.B2, d.B2)
    return d.bending


def local_mass(mesh: Mesh) -> np.ndarray:
    d = _element_data(mesh)
    if d.mass is None:
        d.mass = np.einsum("eq,eqi,eqj->eij", d.wq, d.B0, d.B0)
    return d.mass


def assemble_bending(mesh: Mesh) -> sp.csr_matrix:
    """Matrix of the integral of phi_i'' phi_j'' over the smooth pieces."""
    return _scatter_matrix(mesh, local_bending(mesh))


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    return _scatter_matrix(mesh, local_mass(mesh))


def assemble_load(mesh: Mesh, f: LoadField | DirichletDatum) -> np.ndarray:
    """Vector of the integral of f phi_i (4-point Gauss per element)."""
    d = _element_data(mesh)
    fq = f(d.xq)
    return _scatter_vector(mesh, np.einsum("eq,eq,eqi->ei", d.wq, fq, d.B0))


@dataclass(frozen=True)
class ClampSet:
    """Equality constraints ``u[dofs] = values`` from clamping to the datum."""

    dofs: np.ndarray
    values: np.ndarray
    labels: tuple[str, ...]


def apply_clamp(mesh: Mesh, w: DirichletDatum, breaks: BreakConfig | None = None) -> ClampSet:
    """Clamp value and slope at both endpoints unless released by a break there.

    A crack at an endpoint releases both the value and the slope of the
    interior trace; a crease or hinge releases the slope only.
    """
    breaks = mesh.breaks if breaks is None else breaks
    dm = mesh.dofs
    dofs, vals, labels = [], [], []
    for i, x, side in ((0, -1.0, "+"), (mesh.n_nodes - 1, 1.0, "-")):
        kind = breaks.kind_at(x)
        v_dof = dm.right_value[i] if side == "+" else dm.left_value[i]
        s_dof = dm.right_slope[i] if side == "+" else dm.left_slope[i]
        if kind is not BreakKind.CRACK:
            dofs.append(v_dof)
            vals.append(float(w(x)))
            labels.append(f"u{side}({x:+g})")
        if kind is None:
            dofs.append(s_dof)
            vals.append(float(w.d1(x)))
            labels.append(f"u'{side}({x:+g})")
    return ClampSet(np.array(dofs, dtype=np.int64), np.array(vals, dtype=float), tuple(labels))


class PiecewiseDisplacement:
    """Piecewise-cubic field on a mesh given by its global DOF vector."""

    def __init__(self, mesh: Mesh, coeffs: np.ndarray):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (mesh.ndof,):
            raise MeshMismatch(f"expected {mesh.ndof} DOFs for this mesh, got {coeffs.shape}")
        coeffs.setflags(write=False)
        self.mesh = mesh
        self.coeffs = coeffs

    @property
    def element_coeffs(self) -> np.ndarray:
        return self.coeffs[self.mesh.dofs.element_dofs]

    def at_quadrature(self, deriv: int = 0) -> np.ndarray:
        d = _element_data(self.mesh)
        B = d.B0 if deriv == 0 else d.B2 if deriv == 2 else None
        if B is None:
            nodes = self.mesh.nodes
            h = np.diff(nodes)[:, None]
            B = hermite_basis((d.xq - nodes[:-1, None]) / h, h, deriv)
        return np.einsum("eqi,ei->eq", B, self.element_coeffs)

    def evaluate(self, x, deriv: int = 0, side: str = "+") -> np.ndarray:
        """Evaluate at points ``x``; at a node, ``side`` picks the element to use."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = self.mesh.nodes
        if side == "+":
            e = np.searchsorted(nodes, x, side="right") - 1
        else:
            e = np.searchsorted(nodes, x, side="left") - 1
        e = np.clip(e, 0, self.mesh.n_elements - 1)
        h = nodes[e + 1] - nodes[e]
        xi = (x - nodes[e]) / h
        B = hermite_basis(xi, h, deriv)
        return np.einsum("pi,pi->p", B, self.element_coeffs[e])

    def trace(self, node: int, deriv: int = 0, side: str = "+") -> float:
        """One-sided trace of the ``deriv``-th derivative at a node.

        ``side='-'`` is the limit from the left, ``'+'`` from the right.
        Outside traces at the endpoints are not part of the field.
        """
        n = self.mesh.n_nodes
        node = int(node) % n
        if side == "+":
            if node == n - 1:
                raise ValueError("no right trace at +1")
            e, xi = node, 0.0
        else:
            if node == 0:
                raise ValueError("no left trace at -1")
            e, xi = node - 1, 1.0
        h = self.mesh.nodes[e + 1] - self.mesh.nodes[e]
        return float(hermite_basis(np.array(xi), np.array(h), deriv) @ self.element_coeffs[e])

    def jump(self, node: int, deriv: int = 0) -> float:
        return self.trace(node, deriv, "+") - self.trace(node, deriv, "-")

    def node_table(self) -> list[tuple[float, str, float, float]]:
        """Rows (x, side, value, slope); break nodes get one row per side."""
        rows = []
        dm = self.mesh.dofs
        n = self.mesh.n_nodes
        c = self.coeffs
        for i, x in enumerate(self.mesh.nodes):
            if i in self.mesh.break_nodes and 0 < i < n - 1:
                rows.append((float(x), "L", c[dm.left_value[i]], c[dm.left_slope[i]]))
                rows.append((float(x), "R", c[dm.right_value[i]], c[dm.right_slope[i]]))
            else:
                rows.append((float(x), "", c[dm.left_value[i]], c[dm.left_slope[i]]))
        return rows


def interpolate(mesh: Mesh, w: DirichletDatum) -> PiecewiseDisplacement:
    """Hermite interpolant of a C^1 function (same trace on both sides of breaks)."""
    dm = mesh.dofs
    c = np.zeros(mesh.ndof)
    x = mesh.nodes
    c[dm.left_value] = w(x)
    c[dm.right_value] = w(x)
    c[dm.left_slope] = w.d1(x)
    c[dm.right_slope] = w.d1(x)
    return PiecewiseDisplacement(mesh, c)
