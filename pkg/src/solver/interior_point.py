"""
Primal-dual interior-point solver for linear objectives over products of nonnegative
orthants and second-order cones.

Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. Problem data are equilibrated before solving; every
termination test is evaluated on the original, unscaled program.
"""
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sps

from model.conic_program import ConicProgram, NonnegativeOrthant, RotatedSecondOrderCone, SecondOrderCone
from solver.cones import ConeLayout, NTScaling, cone_violation
from solver.kkt import KKTFactorizationError, KKTSystem

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

STEP_FRACTION = 0.99
MIN_STEP = 1e-10
EQUILIBRATION_PASSES = 15
EQUILIBRATION_BOUNDS = (1e-4, 1e4)


class SolverStatus(str, Enum):
    OPTIMAL = 'Optimal'
    PRIMAL_INFEASIBLE = 'PrimalInfeasible'
    DUAL_INFEASIBLE = 'DualInfeasible'
    ITERATION_LIMIT = 'IterationLimit'
    NUMERICAL_ERROR = 'NumericalError'


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and limits of the interior-point method."""

    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iterations: int = 200
    static_regularization: float = 1e-9
    verbose: bool = False
    time_limit_s: Optional[float] = None

    def __post_init__(self):
        for name in ('gap_tol', 'feas_tol', 'static_regularization'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.time_limit_s is not None and not self.time_limit_s > 0:
            raise ValueError(f"time_limit_s must be positive, got {self.time_limit_s}")


@dataclass(frozen=True, eq=False)
class ConicSolution:
    """
    Solver output in the coordinates of the original program.

    For PrimalInfeasible, (y, z) hold a certificate scaled so b'y + h'z = -1 and x, s are NaN.
    For DualInfeasible, (x, s) hold a ray scaled so c'x = -1 and y, z are NaN.
    """

    status: SolverStatus
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    gap: float
    primal_residual: float
    dual_residual: float
    primal_objective: float
    iterations: int
    wall_time_s: float


@dataclass(frozen=True)
class ResidualReport:
    """
    Residuals of a candidate solution on the program as stated.

    ``primal_equality``, ``primal_cone`` and ``dual`` are norms relative to the data vectors;
    ``primal_row`` and ``dual_row`` are the worst single rows relative to their own scale.
    """

    primal_equality: float
    primal_cone: float
    dual: float
    gap: float
    primal_objective: float
    dual_objective: float
    s_cone_violation: float
    z_cone_violation: float
    primal_row: float
    dual_row: float
    certificate: Optional[float] = None

    @property
    def primal(self) -> float:
        return max(self.primal_equality, self.primal_cone)


def _worst_row(residual: np.ndarray, scale: np.ndarray) -> float:
    return float(np.max(np.abs(residual) / (1.0 + scale), initial=0.0))


def _evaluate(program: ConicProgram, x, y, z, s, with_cones: bool = True) -> ResidualReport:
    """Relative residuals and gap of (x, y, z, s) on the program as stated."""
    cx = float(program.c @ x)
    by = float(program.b @ y)
    hz = float(program.h @ z)
    r_eq = program.A @ x - program.b
    r_cone = program.G @ x + s - program.h
    r_dual = program.A.T @ y + program.G.T @ z + program.c
    eq = np.linalg.norm(r_eq) / (1.0 + np.linalg.norm(program.b))
    cone = np.linalg.norm(r_cone) / (1.0 + np.linalg.norm(program.h))
    dual = np.linalg.norm(r_dual) / (1.0 + np.linalg.norm(program.c))
    gap = abs(cx + by + hz) / (1.0 + abs(cx))

    abs_A, abs_G = abs(program.A), abs(program.G)
    primal_row = max(_worst_row(r_eq, np.abs(program.b) + abs_A @ np.abs(x)),
                     _worst_row(r_cone, np.abs(program.h) + abs_G @ np.abs(x)))
    dual_row = _worst_row(r_dual, np.abs(program.c) + abs_A.T @ np.abs(y) + abs_G.T @ np.abs(z))
    return ResidualReport(
        primal_equality=float(eq),
        primal_cone=float(cone),
        dual=float(dual),
        gap=float(gap),
        primal_objective=cx,
        dual_objective=-(by + hz),
        s_cone_violation=cone_violation(program.cones, s) if with_cones else np.nan,
        z_cone_violation=cone_violation(program.cones, z, dual=True) if with_cones else np.nan,
        primal_row=primal_row,
        dual_row=dual_row,
    )


class _StandardForm:
    """
    Reordered and equilibrated copy of a ConicProgram.

    Rows are permuted to orthant-then-SOC order, rotated blocks are mapped to SOCs through
    (u, w, z) -> (u + w, u - w, 2z), and Ruiz scaling plus scalar cost/rhs scaling is applied.
    """

    def __init__(self, program: ConicProgram):
        self.program = program
        self.P, self.P_inv, self.layout = self._standard_cones(program.cones)

        A = sps.csc_matrix(program.A)
        G = sps.csc_matrix(self.P @ program.G)
        h = self.P @ program.h
        self._equilibrate(A, G, program.b, h, program.c)

    @staticmethod
    def _standard_cones(cones) -> Tuple[sps.csr_matrix, sps.csr_matrix, ConeLayout]:
        orthant_rows: List[int] = []
        soc_blocks: List[Tuple[int, int, bool]] = []
        offset = 0
        for cone in cones:
            if isinstance(cone, NonnegativeOrthant):
                orthant_rows.extend(range(offset, offset + cone.dim))
            elif isinstance(cone, SecondOrderCone):
                soc_blocks.append((cone.dim, offset, False))
            elif isinstance(cone, RotatedSecondOrderCone):
                soc_blocks.append((cone.dim, offset, True))
            else:
                raise ValueError(f"unsupported cone {cone!r}")
            offset += cone.dim
        m = offset
        soc_blocks.sort(key=lambda blk: blk[0])

        # P maps original slack rows to standard rows; P_inv undoes it
        rows, cols, vals = [], [], []
        irows, icols, ivals = [], [], []
        l = len(orthant_rows)
        rows.extend(range(l))
        cols.extend(orthant_rows)
        vals.extend([1.0] * l)
        irows.extend(orthant_rows)
        icols.extend(range(l))
        ivals.extend([1.0] * l)
        pos = l
        for dim, start, rotated in soc_blocks:
            if rotated:
                rows += [pos, pos, pos + 1, pos + 1]
                cols += [start, start + 1, start, start + 1]
                vals += [1.0, 1.0, 1.0, -1.0]
                irows += [start, start, start + 1, start + 1]
                icols += [pos, pos + 1, pos, pos + 1]
                ivals += [0.5, 0.5, 0.5, -0.5]
                rows += list(range(pos + 2, pos + dim))
                cols += list(range(start + 2, start + dim))
                vals += [2.0] * (dim - 2)
                irows += list(range(start + 2, start + dim))
                icols += list(range(pos + 2, pos + dim))
                ivals += [0.5] * (dim - 2)
            else:
                rows += list(range(pos, pos + dim))
                cols += list(range(start, start + dim))
                vals += [1.0] * dim
                irows += list(range(start, start + dim))
                icols += list(range(pos, pos + dim))
                ivals += [1.0] * dim
            pos += dim

        P = sps.csr_matrix((vals, (rows, cols)), shape=(m, m))
        P_inv = sps.csr_matrix((ivals, (irows, icols)), shape=(m, m))
        layout = ConeLayout(l, [blk[0] for blk in soc_blocks])
        return P, P_inv, layout

    def _equilibrate(self, A, G, b, h, c):
        p = A.shape[0]
        M = sps.vstack([A, G]).tocsr()
        n = M.shape[1]
        D = np.ones(n)
        E = np.ones(M.shape[0])
        lo, hi = EQUILIBRATION_BOUNDS
        for _ in range(EQUILIBRATION_PASSES):
            absM = abs(M)
            col = absM.max(axis=0).toarray().ravel() if M.shape[0] else np.zeros(n)
            row = absM.max(axis=1).toarray().ravel() if n else np.zeros(M.shape[0])
            # one scale per SOC block keeps the cone invariant
            for g in self.layout.groups:
                seg = row[p + g.start:p + g.stop].reshape(g.count, g.dim)
                seg[:] = seg.max(axis=1, keepdims=True)
            col[col == 0] = 1.0
            row[row == 0] = 1.0
            d = np.clip(1.0 / np.sqrt(col), lo, hi)
            e = np.clip(1.0 / np.sqrt(row), lo, hi)
            M = sps.diags(e) @ M @ sps.diags(d)
            D *= d
            E *= e
        M = sps.csr_matrix(M)

        self.D = D
        self.E_A = E[:p]
        self.E_G = E[p:]
        c_bar = D * c
        b_bar = self.E_A * b
        h_bar = self.E_G * h
        c_norm = np.max(np.abs(c_bar)) if c_bar.size else 0.0
        rhs_norm = max(np.max(np.abs(b_bar)) if b_bar.size else 0.0,
                       np.max(np.abs(h_bar)) if h_bar.size else 0.0)
        self.sigma_c = 1.0 / c_norm if c_norm > 0 else 1.0
        self.sigma_b = 1.0 / rhs_norm if rhs_norm > 0 else 1.0

        self.A = sps.csc_matrix(M[:p])
        self.G = sps.csc_matrix(M[p:])
        self.c = self.sigma_c * c_bar
        self.b = self.sigma_b * b_bar
        self.h = self.sigma_b * h_bar

    def primal(self, x, s) -> Tuple[np.ndarray, np.ndarray]:
        return self.D * x / self.sigma_b, self.P_inv @ (s / (self.E_G * self.sigma_b))

    def dual(self, y, z) -> Tuple[np.ndarray, np.ndarray]:
        return self.E_A * y / self.sigma_c, self.P.T @ (self.E_G * z / self.sigma_c)


def _certificate_residual(program: ConicProgram, solution: ConicSolution) -> Optional[float]:
    if solution.status is SolverStatus.PRIMAL_INFEASIBLE:
        return float(np.linalg.norm(program.A.T @ solution.y + program.G.T @ solution.z))
    if solution.status is SolverStatus.DUAL_INFEASIBLE:
        return float(max(np.linalg.norm(program.A @ solution.x),
                         np.linalg.norm(program.G @ solution.x + solution.s)))
    return None


def residuals(program: ConicProgram, solution: ConicSolution) -> ResidualReport:
    """
    Recompute residual norms, gap and cone membership of a solution from the program data.

    Args:
        program: The program that was solved
        solution: Solver output in original coordinates

    Returns:
        ResidualReport; ``certificate`` is set for infeasible statuses
    """
    sizes = {
        'x': (solution.x.shape[0], program.n_variables),
        'y': (solution.y.shape[0], program.n_equalities),
        'z': (solution.z.shape[0], program.n_cone_rows),
        's': (solution.s.shape[0], program.n_cone_rows),
    }
    for name, (got, expected) in sizes.items():
        if got != expected:
            raise ValueError(f"solution vector {name} has length {got}, program expects {expected}")

    report = _evaluate(program, solution.x, solution.y, solution.z, solution.s)
    cert = _certificate_residual(program, solution)
    if cert is None:
        return report
    return ResidualReport(**{**report.__dict__, 'certificate': cert})


def _initial_point(kkt: KKTSystem, layout: ConeLayout, c, b, h):
    kkt.factor(NTScaling.identity(layout))
    n, p = kkt.n, kkt.p
    x, _, r = kkt.solve(np.zeros(n), b, h)
    s = layout.shift_into_interior(-r)
    _, y, r = kkt.solve(-c, np.zeros(p), np.zeros(layout.m))
    z = layout.shift_into_interior(r)
    return x, y, z, s


def solve(program: ConicProgram, settings: Optional[SolverSettings] = None) -> ConicSolution:
    """
    Solve min c'x s.t. Ax = b, Gx + s = h, s in K.

    Args:
        program: Conic program in standard form
        settings: Tolerances and limits (defaults if omitted)

    Returns:
        ConicSolution in the coordinates of ``program``
    """
    settings = settings or SolverSettings()
    start = time.perf_counter()
    std = _StandardForm(program)
    layout = std.layout
    A, G, b, h, c = std.A, std.G, std.b, std.h, std.c
    n, p, m = A.shape[1], A.shape[0], G.shape[0]

    status = None
    iteration = 0
    tau, kappa = 1.0, 1.0
    try:
        kkt = KKTSystem(A, G, layout, settings.static_regularization)
        x, y, z, s = _initial_point(kkt, layout, c, b, h)
    except KKTFactorizationError as e:
        logger.warning(f"Could not compute an initial point: {e}")
        x, y, z, s = np.zeros(n), np.zeros(p), layout.identity(), layout.identity()
        status = SolverStatus.NUMERICAL_ERROR

    certificate = None
    while status is None:
        rx = A.T @ y + G.T @ z + c * tau
        ry = -(A @ x) + b * tau
        rz = -(G @ x) + h * tau - s
        rt = -(c @ x) - (b @ y) - (h @ z) - kappa
        mu = (s @ z + tau * kappa) / (layout.degree + 1)

        x_o, s_o = std.primal(x / tau, s / tau)
        y_o, z_o = std.dual(y / tau, z / tau)
        report = _evaluate(program, x_o, y_o, z_o, s_o, with_cones=False)
        feasibility = max(report.primal, report.dual, report.primal_row, report.dual_row)
        if feasibility <= settings.feas_tol and report.gap <= settings.gap_tol:
            status = SolverStatus.OPTIMAL
            break

        certificate = _detect_infeasibility(program, std, x, y, z, s, tau, kappa, settings.feas_tol)
        if certificate is not None:
            status = certificate[0]
            break

        if iteration >= settings.max_iterations:
            logger.warning(f"Iteration limit {settings.max_iterations} reached")
            status = SolverStatus.ITERATION_LIMIT
            break
        if settings.time_limit_s is not None and time.perf_counter() - start > settings.time_limit_s:
            logger.warning(f"Time limit {settings.time_limit_s} s reached after {iteration} iterations")
            status = SolverStatus.ITERATION_LIMIT
            break

        try:
            scaling = layout.nt_scaling(s, z)
            kkt.factor(scaling)
            lam = scaling.lam
            dx1, dy1, dz1 = kkt.solve(-c, b, h)
            base = -(c @ dx1 + b @ dy1 + h @ dz1)

            def direction(shrink: float, rc: np.ndarray, rk: float):
                q = scaling.apply(layout.jordan_divide(lam, rc))
                dx0, dy0, dz0 = kkt.solve(-shrink * rx, shrink * ry, shrink * rz - q)
                dtau = ((-shrink * rt + rk / tau + c @ dx0 + b @ dy0 + h @ dz0)
                        / (kappa / tau + base))
                dx = dx0 + dtau * dx1
                dy = dy0 + dtau * dy1
                dz = dz0 + dtau * dz1
                ds = shrink * rz - G @ dx + h * dtau
                dkappa = (rk - kappa * dtau) / tau
                return dx, dy, dz, ds, dtau, dkappa

            def step_to_boundary(dz, ds, dtau, dkappa):
                alpha = min(layout.max_step(s, ds), layout.max_step(z, dz))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha

            # predictor: drive all residuals and complementarity to zero
            lam_sq = layout.jordan_product(lam, lam)
            aff = direction(1.0, -lam_sq, -tau * kappa)
            alpha_aff = min(1.0, step_to_boundary(aff[2], aff[3], aff[4], aff[5]))
            sigma = float(np.clip((1.0 - alpha_aff) ** 3, 0.0, 1.0))

            # corrector: centring plus second-order term
            cross = layout.jordan_product(scaling.apply_inv(aff[3]), scaling.apply(aff[2]))
            rc = -lam_sq - cross + sigma * mu * layout.identity()
            rk = -tau * kappa - aff[4] * aff[5] + sigma * mu
            dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, rc, rk)
            alpha = min(1.0, STEP_FRACTION * step_to_boundary(dz, ds, dtau, dkappa))
        except KKTFactorizationError as e:
            logger.warning(f"Stopping at iteration {iteration}: {e}")
            status = SolverStatus.NUMERICAL_ERROR
            break

        if not np.isfinite(alpha) or alpha < MIN_STEP:
            logger.warning(f"Step length {alpha:.2e} too small at iteration {iteration}")
            status = SolverStatus.NUMERICAL_ERROR
            break

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        iteration += 1

        if settings.verbose:
            logger.info(
                f"it {iteration:3d}  pres {report.primal_row:.2e}  dres {report.dual_row:.2e}  "
                f"gap {report.gap:.2e}  mu {mu:.2e}  sigma {sigma:.3f}  step {alpha:.3f}")

    wall = time.perf_counter() - start
    if status in (SolverStatus.PRIMAL_INFEASIBLE, SolverStatus.DUAL_INFEASIBLE):
        _, (x_o, y_o, z_o, s_o) = certificate
    else:
        x_o, s_o = std.primal(x / tau, s / tau)
        y_o, z_o = std.dual(y / tau, z / tau)

    final = _evaluate(program, x_o, y_o, z_o, s_o, with_cones=False)
    logger.info(f"Solver finished: {status.value} after {iteration} iterations in {wall:.3f} s "
                f"(gap {final.gap:.2e})")
    return ConicSolution(
        status=status,
        x=x_o, y=y_o, z=z_o, s=s_o,
        gap=final.gap,
        primal_residual=final.primal,
        dual_residual=final.dual,
        primal_objective=final.primal_objective,
        iterations=iteration,
        wall_time_s=wall,
    )


def _detect_infeasibility(program: ConicProgram, std: _StandardForm, x, y, z, s, tau, kappa, tol):
    """Return (status, (x, y, z, s)) with a normalised certificate, or None."""
    if tau >= kappa:
        return None
    y_o, z_o = std.dual(y, z)
    x_o, s_o = std.primal(x, s)

    dual_value = float(program.b @ y_o + program.h @ z_o)
    if dual_value < 0:
        y_c, z_c = y_o / -dual_value, z_o / -dual_value
        if np.linalg.norm(program.A.T @ y_c + program.G.T @ z_c) <= tol:
            nan = np.full(program.n_variables, np.nan)
            logger.info("Primal infeasibility certificate found")
            return (SolverStatus.PRIMAL_INFEASIBLE,
                    (nan, y_c, z_c, np.full(program.n_cone_rows, np.nan)))

    primal_value = float(program.c @ x_o)
    if primal_value < 0:
        x_c, s_c = x_o / -primal_value, s_o / -primal_value
        if max(np.linalg.norm(program.A @ x_c), np.linalg.norm(program.G @ x_c + s_c)) <= tol:
            logger.info("Dual infeasibility certificate found")
            return (SolverStatus.DUAL_INFEASIBLE,
                    (x_c, np.full(program.n_equalities, np.nan), np.full(program.n_cone_rows, np.nan), s_c))
    return None
