import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class ProgramBuildError(ValueError):
    """Raised when a conic program cannot be assembled from the request."""


@dataclass(frozen=True)
class NonnegativeOrthant:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ProgramBuildError(f"orthant dimension must be positive, got {self.dim}")


@dataclass(frozen=True)
class SecondOrderCone:
    """{(t, u): ||u||_2 <= t}."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ProgramBuildError(f"second-order cone needs dim >= 2, got {self.dim}")


@dataclass(frozen=True)
class RotatedSecondOrderCone:
    """{(u, w, z): u*w >= ||z||_2^2, u >= 0, w >= 0}."""

    dim: int

    def __post_init__(self):
        if self.dim < 3:
            raise ProgramBuildError(f"rotated cone needs dim >= 3, got {self.dim}")


Cone = Union[NonnegativeOrthant, SecondOrderCone, RotatedSecondOrderCone]


@dataclass(frozen=True)
class AffineExpr:
    """Sparse affine function sum_j terms[j] * x_j + constant."""

    terms: Mapping[int, float] = field(default_factory=dict)
    constant: float = 0.0

    @classmethod
    def var(cls, index: int, coef: float = 1.0) -> "AffineExpr":
        return cls({int(index): float(coef)}, 0.0)

    @classmethod
    def const(cls, value: float) -> "AffineExpr":
        return cls({}, float(value))

    @property
    def is_constant(self) -> bool:
        return all(v == 0.0 for v in self.terms.values())

    def __add__(self, other: Union["AffineExpr", float]) -> "AffineExpr":
        if not isinstance(other, AffineExpr):
            return AffineExpr(dict(self.terms), self.constant + float(other))
        terms: Dict[int, float] = dict(self.terms)
        for j, v in other.terms.items():
            terms[j] = terms.get(j, 0.0) + v
        return AffineExpr(terms, self.constant + other.constant)

    __radd__ = __add__

    def __mul__(self, scalar: float) -> "AffineExpr":
        s = float(scalar)
        return AffineExpr({j: s * v for j, v in self.terms.items()}, s * self.constant)

    __rmul__ = __mul__

    def __neg__(self) -> "AffineExpr":
        return self * -1.0

    def __sub__(self, other: Union["AffineExpr", float]) -> "AffineExpr":
        return self + (-other)

    def __rsub__(self, other: float) -> "AffineExpr":
        return (-self) + other

    def evaluate(self, x: np.ndarray) -> float:
        return self.constant + sum(v * x[j] for j, v in self.terms.items())


@dataclass(frozen=True)
class ConeBlock:
    """A cone together with the affine expressions its slack entries equal."""

    cone: Cone
    slacks: Tuple[AffineExpr, ...]

    def __post_init__(self):
        if len(self.slacks) != self.cone.dim:
            raise ProgramBuildError(
                f"cone of dim {self.cone.dim} given {len(self.slacks)} slack expressions")


def hyperbolic_cone_rows(u: AffineExpr, w: AffineExpr, c: Union[AffineExpr, float]) -> ConeBlock:
    """
    Encode u*w >= c^2 (u, w >= 0) as the second-order cone ||(2c, u - w)|| <= u + w.

    The identity (u + w)^2 - (u - w)^2 = 4uw makes the two forms equivalent.

    Args:
        u: First factor, kept nonnegative by the enclosing model
        w: Second factor, kept nonnegative by the enclosing model
        c: Constant (must be positive) or affine expression

    Returns:
        ConeBlock over a 3-dimensional second-order cone
    """
    if not isinstance(c, AffineExpr):
        c = AffineExpr.const(c)
    if c.is_constant and c.constant <= 0:
        raise ProgramBuildError(f"hyperbolic constant must be positive, got {c.constant}")
    return ConeBlock(SecondOrderCone(3), (u + w, 2.0 * c, u - w))


def rotated_cone_rows(u: AffineExpr, w: AffineExpr, c: Union[AffineExpr, float]) -> ConeBlock:
    """Same constraint as ``hyperbolic_cone_rows`` kept in rotated-cone form (u, w, c)."""
    if not isinstance(c, AffineExpr):
        c = AffineExpr.const(c)
    if c.is_constant and c.constant <= 0:
        raise ProgramBuildError(f"hyperbolic constant must be positive, got {c.constant}")
    return ConeBlock(RotatedSecondOrderCone(3), (u, w, c))


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """
    min c'x  s.t.  A x = b,  G x + s = h,  s in K.

    K is the product of ``cones`` taken in order over the rows of G.
    """

    c: np.ndarray
    A: sps.csc_matrix
    b: np.ndarray
    G: sps.csc_matrix
    h: np.ndarray
    cones: Tuple[Cone, ...]

    def __post_init__(self):
        n = self.c.shape[0]
        if self.A.shape != (self.b.shape[0], n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({self.b.shape[0]}, {n})")
        if self.G.shape != (self.h.shape[0], n):
            raise ValueError(f"G has shape {self.G.shape}, expected ({self.h.shape[0]}, {n})")
        cone_rows = sum(k.dim for k in self.cones)
        if cone_rows != self.h.shape[0]:
            raise ValueError(f"cones cover {cone_rows} rows but G has {self.h.shape[0]}")

    @property
    def n_variables(self) -> int:
        return self.c.shape[0]

    @property
    def n_equalities(self) -> int:
        return self.b.shape[0]

    @property
    def n_cone_rows(self) -> int:
        return self.h.shape[0]


class ConicProgramBuilder:
    """Accumulates objective, equality rows and cone blocks into a ConicProgram."""

    def __init__(self, n_variables: int):
        self.n = n_variables
        self.c = np.zeros(n_variables)
        self._eq_rows: List[AffineExpr] = []
        self._eq_rhs: List[float] = []
        self._nonneg: List[AffineExpr] = []
        self._blocks: List[ConeBlock] = []

    def set_objective(self, index: int, coef: float):
        self.c[index] = coef

    def add_equality(self, expr: AffineExpr, rhs: float):
        """expr == rhs."""
        self._eq_rows.append(expr)
        self._eq_rhs.append(float(rhs) - expr.constant)

    def add_nonnegative(self, expr: AffineExpr):
        """expr >= 0."""
        self._nonneg.append(expr)

    def add_cone_block(self, block: ConeBlock):
        self._blocks.append(block)

    @staticmethod
    def _to_coo(exprs: Sequence[AffineExpr], sign: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows, cols, vals = [], [], []
        for i, expr in enumerate(exprs):
            for j, v in expr.terms.items():
                if v != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(sign * v)
        return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals, dtype=float)

    def build(self) -> ConicProgram:
        """Orthant rows first (one block), then the cone blocks in insertion order."""
        r, k, v = self._to_coo(self._eq_rows, 1.0)
        A = sps.csc_matrix((v, (r, k)), shape=(len(self._eq_rows), self.n))
        b = np.array(self._eq_rhs, dtype=float)

        # slack s = h - G x, so an expression e maps to G row -coef(e), h = const(e)
        slack_exprs: List[AffineExpr] = list(self._nonneg)
        cones: List[Cone] = []
        if self._nonneg:
            cones.append(NonnegativeOrthant(len(self._nonneg)))
        for block in self._blocks:
            slack_exprs.extend(block.slacks)
            cones.append(block.cone)
        r, k, v = self._to_coo(slack_exprs, -1.0)
        G = sps.csc_matrix((v, (r, k)), shape=(len(slack_exprs), self.n))
        h = np.array([e.constant for e in slack_exprs], dtype=float)

        return ConicProgram(c=self.c.copy(), A=A, b=b, G=G, h=h, cones=tuple(cones))
