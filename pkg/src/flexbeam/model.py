"""Constitutive data, break configurations and boundary/load data for the
reinforced clamped beam on (-1, 1)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


class FlexbeamError(Exception):
    """Base class for all library errors."""


class ParamViolation(FlexbeamError):
    """A constitutive constant violates an admissibility inequality."""


class MeshMismatch(FlexbeamError):
    """A displacement does not conform to the break configuration it is paired with."""


class DegenerateMesh(FlexbeamError):
    pass


class InvalidBreaks(FlexbeamError):
    pass


class Problem(str, enum.Enum):
    E1 = "E1"  # hard device: substrate displacement w prescribed
    F1 = "F1"  # strengthening: plate and reinforcement both deform
    G1 = "G1"  # elastic-plastic reinforcement, no cracks

    @property
    def two_field(self) -> bool:
        return self is not Problem.E1


class BreakKind(str, enum.Enum):
    CRACK = "crack"    # value and slope may jump
    CREASE = "crease"  # slope may jump
    HINGE = "hinge"    # slope may jump, jump size priced by sigma (G1)


KIND_ORDER = {BreakKind.CRACK: 0, BreakKind.CREASE: 1, BreakKind.HINGE: 2}


def allowed_kinds(problem: Problem) -> tuple[BreakKind, ...]:
    if problem is Problem.G1:
        return (BreakKind.HINGE,)
    return (BreakKind.CRACK, BreakKind.CREASE)


@dataclass(frozen=True)
class ModelParams:
    eta: float = 1.0
    mu: float = 1.0
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    sigma: float = 0.0

    def replace(self, **kw) -> "ModelParams":
        d = self.as_dict()
        d.update(kw)
        return ModelParams(**d)

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("eta", "mu", "gamma", "alpha", "beta", "sigma")}


def validate_params(p: ModelParams, problem: Problem | str) -> None:
    """Raise ``ParamViolation`` unless ``p`` is admissible for ``problem``."""
    problem = Problem(problem)
    vals = p.as_dict()
    for k, v in vals.items():
        if not np.isfinite(v):
            raise ParamViolation(f"{k} must be finite, got {v}")
    if not p.eta > 0:
        raise ParamViolation(f"eta > 0 violated (eta={p.eta})")
    if not p.mu > 0:
        raise ParamViolation(f"mu > 0 violated (mu={p.mu})")
    if problem.two_field and not p.gamma > 0:
        raise ParamViolation(f"gamma > 0 violated (gamma={p.gamma})")
    if problem is Problem.G1:
        if p.beta < 0:
            raise ParamViolation(f"beta >= 0 violated (beta={p.beta})")
        if p.sigma < 0:
            raise ParamViolation(f"sigma >= 0 violated (sigma={p.sigma})")
        return
    if not p.beta > 0:
        raise ParamViolation(f"0 < beta violated (beta={p.beta})")
    if not p.beta <= p.alpha:
        raise ParamViolation(f"beta <= alpha violated (alpha={p.alpha}, beta={p.beta})")
    if not p.alpha <= 2 * p.beta:
        raise ParamViolation(f"alpha <= 2*beta violated (alpha={p.alpha}, beta={p.beta})")


@dataclass(frozen=True, order=True)
class Break:
    x: float
    kind: BreakKind

    def key(self) -> tuple[float, int]:
        return (self.x, KIND_ORDER[self.kind])


@dataclass(frozen=True)
class BreakConfig:
    """Finite singular set: sorted, distinct locations in [-1, 1] with a kind each."""

    breaks: tuple[Break, ...] = ()

    def __post_init__(self):
        bs = tuple(Break(float(b.x), BreakKind(b.kind)) for b in self.breaks)
        bs = tuple(sorted(bs, key=Break.key))
        xs = [b.x for b in bs]
        for x in xs:
            if not -1.0 <= x <= 1.0:
                raise InvalidBreaks(f"break location {x} outside [-1, 1]")
        if any(b - a <= 0 for a, b in zip(xs, xs[1:])):
            raise InvalidBreaks(f"duplicate break locations in {xs}")
        object.__setattr__(self, "breaks", bs)

    @classmethod
    def of(cls, *items: tuple[float, BreakKind | str]) -> "BreakConfig":
        return cls(tuple(Break(float(x), BreakKind(k)) for x, k in items))

    def __len__(self) -> int:
        return len(self.breaks)

    def __iter__(self):
        return iter(self.breaks)

    @property
    def locations(self) -> np.ndarray:
        return np.array([b.x for b in self.breaks], dtype=float)

    def count(self, kind: BreakKind) -> int:
        return sum(1 for b in self.breaks if b.kind is kind)

    def kind_at(self, x: float, tol: float = 1e-14) -> BreakKind | None:
        for b in self.breaks:
            if abs(b.x - x) <= tol:
                return b.kind
        return None

    def check_for(self, problem: Problem | str) -> None:
        problem = Problem(problem)
        kinds = allowed_kinds(problem)
        for b in self.breaks:
            if b.kind not in kinds:
                raise InvalidBreaks(f"{b.kind.value} not admissible for {problem.value}")

    def key(self) -> tuple:
        return tuple(b.key() for b in self.breaks)

    def to_list(self) -> list[dict]:
        return [{"x": b.x, "kind": b.kind.value} for b in self.breaks]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "BreakConfig":
        return cls(tuple(Break(float(d["x"]), BreakKind(d["kind"])) for d in items))


class DirichletDatum:
    """C^2 boundary datum ``w`` on [-2, 2] with evaluators for w, w', w''.

    The beam is clamped to ``w`` outside (-1, 1); inside, ``w`` is also the
    substrate (hard device) or the obstacle.
    """

    def __init__(
        self,
        w: Callable[[np.ndarray], np.ndarray],
        dw: Callable[[np.ndarray], np.ndarray],
        d2w: Callable[[np.ndarray], np.ndarray],
        description: str = "",
    ):
        self._w, self._dw, self._d2w = w, dw, d2w
        self.description = description

    @classmethod
    def zero(cls) -> "DirichletDatum":
        return cls.polynomial([0.0])

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "DirichletDatum":
        """Coefficients in increasing degree: ``w = c0 + c1 x + ...``."""
        P = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        d1, d2 = P.deriv(1), P.deriv(2)
        return cls(P, d1, d2, description=f"polynomial{list(map(float, coeffs))}")

    @classmethod
    def spline(cls, knots: Sequence[float], values: Sequence[float]) -> "DirichletDatum":
        """Clamped-end (zero-slope) C^2 cubic spline through ``(knots, values)``."""
        knots = np.asarray(knots, dtype=float)
        if knots[0] > -2 or knots[-1] < 2:
            raise ValueError("spline knots must cover [-2, 2]")
        cs = CubicSpline(knots, np.asarray(values, dtype=float), bc_type="clamped")
        return cls(cs, cs.derivative(1), cs.derivative(2), description="spline")

    def __call__(self, x):
        return np.asarray(self._w(np.asarray(x, dtype=float)), dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def d1(self, x):
        return np.asarray(self._dw(np.asarray(x, dtype=float)), dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def d2(self, x):
        return np.asarray(self._d2w(np.asarray(x, dtype=float)), dtype=float) + 0.0 * np.asarray(x, dtype=float)


class LoadField:
    """Square-integrable load on [-1, 1], given by a vectorised evaluator."""

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], description: str = ""):
        self._f = f
        self.description = description

    @classmethod
    def constant(cls, c: float) -> "LoadField":
        c = float(c)
        return cls(lambda x: np.full_like(np.asarray(x, dtype=float), c), description=f"constant({c})")

    @classmethod
    def zero(cls) -> "LoadField":
        return cls.constant(0.0)

    @classmethod
    def from_samples(cls, x: Sequence[float], values: Sequence[float]) -> "LoadField":
        """Piecewise-linear interpolant of samples (held constant beyond the ends)."""
        xs = np.asarray(x, dtype=float)
        vs = np.asarray(values, dtype=float)
        order = np.argsort(xs)
        xs, vs = xs[order], vs[order]
        return cls(lambda t: np.interp(np.asarray(t, dtype=float), xs, vs), description="samples")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self._f(x), dtype=float) + 0.0 * x

    def l2_norm_sq(self, n: int = 256) -> float:
        from .fem import gauss_points

        xq, wq = gauss_points(np.linspace(-1.0, 1.0, n + 1))
        return float(np.sum(wq * self(xq) ** 2))


@dataclass(frozen=True)
class Loads:
    """Loads for one problem: ``f`` for E1, ``(f_r, f_p)`` for F1/G1."""

    f_r: LoadField = field(default_factory=LoadField.zero)
    f_p: LoadField = field(default_factory=LoadField.zero)

    @classmethod
    def single(cls, f: LoadField) -> "Loads":
        return cls(f_r=f)

    @property
    def f(self) -> LoadField:
        return self.f_r
