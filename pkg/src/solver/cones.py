"""
Vectorised algebra for the product cone R+^l x Q^{n_1} x ... x Q^{n_k}.

Second-order cones of equal dimension that sit next to each other are handled
as one (count, dim) array so that per-iteration work stays in numpy.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from model.conic_program import NonnegativeOrthant, RotatedSecondOrderCone, SecondOrderCone

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SocGroup:
    start: int
    count: int
    dim: int

    @property
    def stop(self) -> int:
        return self.start + self.count * self.dim


class ConeLayout:
    """Nonnegative orthant rows first, then runs of equal-dimension SOCs."""

    def __init__(self, n_orthant: int, soc_dims: Sequence[int]):
        self.l = int(n_orthant)
        groups: List[SocGroup] = []
        pos = self.l
        for dim in soc_dims:
            if groups and groups[-1].dim == dim:
                last = groups[-1]
                groups[-1] = SocGroup(last.start, last.count + 1, dim)
            else:
                groups.append(SocGroup(pos, 1, int(dim)))
            pos += dim
        self.groups: Tuple[SocGroup, ...] = tuple(groups)
        self.m = pos
        self.n_soc = len(soc_dims)
        self.degree = self.l + self.n_soc

    def blocks(self, vec: np.ndarray, g: SocGroup) -> np.ndarray:
        return vec[g.start:g.stop].reshape(g.count, g.dim)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.l] = 1.0
        for g in self.groups:
            self.blocks(e, g)[:, 0] = 1.0
        return e

    def jordan_product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.l] = u[:self.l] * v[:self.l]
        for g in self.groups:
            U, V, O = self.blocks(u, g), self.blocks(v, g), self.blocks(out, g)
            O[:, 0] = np.sum(U * V, axis=1)
            O[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def jordan_divide(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Solve lam o x = r for x (lam in the interior)."""
        out = np.empty(self.m)
        out[:self.l] = r[:self.l] / lam[:self.l]
        for g in self.groups:
            L, R, O = self.blocks(lam, g), self.blocks(r, g), self.blocks(out, g)
            l0, l1 = L[:, 0], L[:, 1:]
            det = l0 ** 2 - np.sum(l1 * l1, axis=1)
            x0 = (l0 * R[:, 0] - np.sum(l1 * R[:, 1:], axis=1)) / det
            O[:, 0] = x0
            O[:, 1:] = (R[:, 1:] - x0[:, None] * l1) / l0[:, None]
        return out

    def min_eigenvalue(self, x: np.ndarray) -> float:
        vals = [np.min(x[:self.l])] if self.l else []
        for g in self.groups:
            X = self.blocks(x, g)
            vals.append(np.min(X[:, 0] - np.linalg.norm(X[:, 1:], axis=1)))
        return float(min(vals)) if vals else 0.0

    def shift_into_interior(self, x: np.ndarray) -> np.ndarray:
        alpha = -self.min_eigenvalue(x)
        if alpha < 0:
            return x.copy()
        return x + (1.0 + alpha) * self.identity()

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        """Largest a >= 0 with x + a*dx in the cone (x interior); inf if unbounded."""
        best = np.inf
        if self.l:
            neg = dx[:self.l] < 0
            if np.any(neg):
                best = min(best, float(np.min(-x[:self.l][neg] / dx[:self.l][neg])))
        for g in self.groups:
            X, D = self.blocks(x, g), self.blocks(dx, g)
            t, u, dt, du = X[:, 0], X[:, 1:], D[:, 0], D[:, 1:]
            qa = dt ** 2 - np.sum(du * du, axis=1)
            qb = t * dt - np.sum(u * du, axis=1)
            qc = np.maximum(t ** 2 - np.sum(u * u, axis=1), 0.0)
            disc = qb ** 2 - qa * qc
            hits = (disc >= 0) & ((qa < 0) | (qb < 0))
            if np.any(hits):
                steps = qc[hits] / (-qb[hits] + np.sqrt(disc[hits]))
                best = min(best, float(np.min(steps)))
        return best

    def nt_scaling(self, s: np.ndarray, z: np.ndarray) -> "NTScaling":
        return NTScaling.compute(self, s, z)


def _lorentz_norm(X: np.ndarray) -> np.ndarray:
    """sqrt((x0 - ||x1||)(x0 + ||x1||)) per row."""
    tail = np.linalg.norm(X[:, 1:], axis=1)
    return np.sqrt(np.maximum((X[:, 0] - tail) * (X[:, 0] + tail), 1e-300))


class NTScaling:
    """
    Nesterov-Todd scaling W with W z = W^{-1} s = lambda.

    Orthant part: W = diag(sqrt(s/z)). SOC part: W = eta * [[w0, w1'], [w1, I + w1 w1'/(1+w0)]].
    """

    def __init__(self, layout: ConeLayout, d: np.ndarray, etas: List[np.ndarray], wbars: List[np.ndarray]):
        self.layout = layout
        self.d = d
        self.etas = etas
        self.wbars = wbars
        self.lam = np.empty(layout.m)

    @classmethod
    def identity(cls, layout: ConeLayout) -> "NTScaling":
        wbars = []
        for g in layout.groups:
            w = np.zeros((g.count, g.dim))
            w[:, 0] = 1.0
            wbars.append(w)
        scaling = cls(layout, np.ones(layout.l), [np.ones(g.count) for g in layout.groups], wbars)
        scaling.lam = layout.identity()
        return scaling

    @classmethod
    def compute(cls, layout: ConeLayout, s: np.ndarray, z: np.ndarray) -> "NTScaling":
        d = np.sqrt(s[:layout.l] / z[:layout.l])
        etas, wbars = [], []
        for g in layout.groups:
            S, Z = layout.blocks(s, g), layout.blocks(z, g)
            s_norm = _lorentz_norm(S)
            z_norm = _lorentz_norm(Z)
            sbar = S / s_norm[:, None]
            zbar = Z / z_norm[:, None]
            gamma = np.sqrt(0.5 * (1.0 + np.sum(sbar * zbar, axis=1)))
            wbar = sbar.copy()
            wbar[:, 0] += zbar[:, 0]
            wbar[:, 1:] -= zbar[:, 1:]
            wbar /= (2.0 * gamma)[:, None]
            etas.append(np.sqrt(s_norm / z_norm))
            wbars.append(wbar)
        scaling = cls(layout, d, etas, wbars)
        scaling.lam = scaling.apply(z)
        return scaling

    def _apply(self, v: np.ndarray, inverse: bool) -> np.ndarray:
        lay = self.layout
        out = np.empty(lay.m)
        out[:lay.l] = v[:lay.l] / self.d if inverse else v[:lay.l] * self.d
        for g, eta, wbar in zip(lay.groups, self.etas, self.wbars):
            V, O = lay.blocks(v, g), lay.blocks(out, g)
            w0, w1 = wbar[:, 0], wbar[:, 1:]
            v0, v1 = V[:, 0], V[:, 1:]
            dot = np.sum(w1 * v1, axis=1)
            sign = -1.0 if inverse else 1.0
            scale = 1.0 / eta if inverse else eta
            O[:, 0] = scale * (w0 * v0 + sign * dot)
            O[:, 1:] = scale[:, None] * (sign * v0[:, None] * w1 + v1 + (dot / (1.0 + w0))[:, None] * w1)
        return out

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._apply(v, inverse=False)

    def apply_inv(self, v: np.ndarray) -> np.ndarray:
        return self._apply(v, inverse=True)

    def matrix(self, inverse: bool = False) -> sps.csr_matrix:
        """W (or W^-1) as a sparse block-diagonal matrix."""
        lay = self.layout
        rows, cols = [np.arange(lay.l)], [np.arange(lay.l)]
        vals = [1.0 / self.d if inverse else self.d]
        sign = -1.0 if inverse else 1.0
        for g, eta, wbar in zip(lay.groups, self.etas, self.wbars):
            w0, w1 = wbar[:, 0], wbar[:, 1:]
            B = np.empty((g.count, g.dim, g.dim))
            B[:, 0, 0] = w0
            B[:, 0, 1:] = sign * w1
            B[:, 1:, 0] = sign * w1
            B[:, 1:, 1:] = np.eye(g.dim - 1) + w1[:, :, None] * w1[:, None, :] / (1.0 + w0)[:, None, None]
            B *= (1.0 / eta if inverse else eta)[:, None, None]
            starts = g.start + g.dim * np.arange(g.count)
            local = np.arange(g.dim)
            shape = (g.count, g.dim, g.dim)
            rows.append(np.broadcast_to(starts[:, None, None] + local[None, :, None], shape).ravel())
            cols.append(np.broadcast_to(starts[:, None, None] + local[None, None, :], shape).ravel())
            vals.append(B.ravel())
        return sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(lay.m, lay.m))


def cone_violation(cones: Sequence, vec: np.ndarray, dual: bool = False) -> float:
    """
    Largest relative distance of ``vec`` outside the product of ``cones``.

    Orthant and second-order cones are self-dual. For a rotated block (u, w, z) the primal
    set is u*w >= ||z||^2 and the dual set is 4*u*w >= ||z||^2.
    """
    worst = 0.0
    offset = 0
    by_kind = {}
    for cone in cones:
        by_kind.setdefault((type(cone), cone.dim), []).append(offset)
        offset += cone.dim
    for (kind, dim), starts in by_kind.items():
        idx = np.asarray(starts)[:, None] + np.arange(dim)[None, :]
        X = vec[idx]
        scale = 1.0 + np.max(np.abs(X), axis=1)
        if kind is NonnegativeOrthant:
            viol = np.max(np.maximum(-X, 0.0), axis=1)
        elif kind is SecondOrderCone:
            viol = np.maximum(np.linalg.norm(X[:, 1:], axis=1) - X[:, 0], 0.0)
        elif kind is RotatedSecondOrderCone:
            u, w, rest = X[:, 0], X[:, 1], X[:, 2:]
            rest = rest if dual else 2.0 * rest
            tail = np.linalg.norm(np.column_stack([u - w, rest]), axis=1)
            viol = np.maximum(tail - (u + w), 0.0)
        else:
            raise ValueError(f"unsupported cone type {kind.__name__}")
        worst = max(worst, float(np.max(viol / scale)))
    return worst
