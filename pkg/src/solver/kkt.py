import logging
from typing import Tuple

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from solver.cones import ConeLayout, NTScaling

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

REGULARIZATION_RETRIES = 3
REGULARIZATION_GROWTH = 100.0
PIVOT_THRESHOLD = 1e-6
REFINEMENT_MAX_STEPS = 10
REFINEMENT_TOL = 1e-14
REFINEMENT_MIN_GAIN = 2.0


class KKTFactorizationError(RuntimeError):
    """The regularised KKT matrix could not be factorised."""


class KKTSystem:
    """
    Newton system of the interior-point method

        A' dy + G' dz = rx,   A dx = ry,   G dx - W^2 dz = rz

    solved in the NT-scaled quasi-definite form

        [ 0        A'  (W^-1 G)' ] [ dx   ]   [ rx        ]
        [ A        0   0         ] [ dy   ] = [ ry        ]
        [ W^-1 G   0   -I        ] [ W dz ]   [ W^-1 rz   ]

    The scaled block stays -I however ill-conditioned W gets near the optimum. The matrix
    is factorised with static regularisation (+delta on the first block, -delta on the
    others) and threshold pivoting; each solve is refined against the unregularised matrix.
    """

    def __init__(self, A: sps.csc_matrix, G: sps.csc_matrix, layout: ConeLayout, regularization: float):
        self.n = A.shape[1]
        self.p = A.shape[0]
        self.m = G.shape[0]
        self.layout = layout
        self.regularization = regularization
        self.dim = self.n + self.p + self.m

        A_coo = A.tocoo()
        off_y = self.n
        self._a_rows = np.concatenate([A_coo.row + off_y, A_coo.col])
        self._a_cols = np.concatenate([A_coo.col, A_coo.row + off_y])
        self._a_vals = np.concatenate([A_coo.data, A_coo.data])
        self._G = sps.csr_matrix(G)
        self._z_diag = np.arange(self.m) + self.n + self.p

        self._signs = np.concatenate([np.ones(self.n), -np.ones(self.p + self.m)])
        self._scaling = None
        self._matrix = None
        self._lu = None

    def factor(self, scaling: NTScaling):
        """Assemble the matrix for the given scaling and factorise it."""
        scaled_G = (scaling.matrix(inverse=True) @ self._G).tocoo()
        off_z = self.n + self.p
        rows = np.concatenate([self._a_rows, scaled_G.row + off_z, scaled_G.col, self._z_diag])
        cols = np.concatenate([self._a_cols, scaled_G.col, scaled_G.row + off_z, self._z_diag])
        vals = np.concatenate([self._a_vals, scaled_G.data, scaled_G.data, -np.ones(self.m)])
        self._matrix = sps.csc_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))
        self._scaling = scaling

        delta = self.regularization
        for attempt in range(REGULARIZATION_RETRIES + 1):
            regularized = (self._matrix + sps.diags(delta * self._signs, format='csc')).tocsc()
            try:
                self._lu = spla.splu(regularized, permc_spec='MMD_AT_PLUS_A', diag_pivot_thresh=PIVOT_THRESHOLD,
                                     options=dict(SymmetricMode=True))
                if attempt:
                    logger.warning(f"KKT factorisation succeeded with regularisation {delta:.1e}")
                return
            except RuntimeError as e:
                logger.warning(f"KKT factorisation failed with regularisation {delta:.1e}: {e}")
                delta *= REGULARIZATION_GROWTH
        raise KKTFactorizationError("KKT matrix is singular after regularisation retries")

    def _refined_solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Iterative refinement on the unregularised matrix.

        Runs until the residual is below REFINEMENT_TOL relative to the right-hand side, or
        until a step fails to shrink it by REFINEMENT_MIN_GAIN; the best iterate is returned.
        """
        sol = self._lu.solve(rhs)
        residual = rhs - self._matrix @ sol
        res_norm = np.linalg.norm(residual, np.inf)
        tol = REFINEMENT_TOL * (1.0 + np.linalg.norm(rhs, np.inf))
        for _ in range(REFINEMENT_MAX_STEPS):
            if not res_norm > tol:
                break
            candidate = sol + self._lu.solve(residual)
            cand_residual = rhs - self._matrix @ candidate
            cand_norm = np.linalg.norm(cand_residual, np.inf)
            if cand_norm < res_norm:
                sol, residual, previous, res_norm = candidate, cand_residual, res_norm, cand_norm
                if res_norm * REFINEMENT_MIN_GAIN > previous:
                    break
            else:
                break
        return sol

    def solve(self, rx: np.ndarray, ry: np.ndarray, rz: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Solve for (dx, dy, dz) with the current factorisation."""
        rhs = np.concatenate([rx, ry, self._scaling.apply_inv(rz)])
        sol = self._refined_solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise KKTFactorizationError("KKT solve produced non-finite values")
        dz = self._scaling.apply_inv(sol[self.n + self.p:])
        return sol[:self.n], sol[self.n:self.n + self.p], dz
