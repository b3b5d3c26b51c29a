import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
import pandas as pd

from data_acquisition.rolling_stock import RollingStock
from data_acquisition.route_data import DiscretizedRoute, GRAVITY
from model.conic_program import (AffineExpr, ConicProgram, ConicProgramBuilder, ProgramBuildError,
                                 hyperbolic_cone_rows, rotated_cone_rows)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MIN_SPEED = 1e-6
ENDPOINT_TERMINAL_MIN_SPEED = 0.5
JOULES_PER_KWH = 3.6e6

TRAJECTORY_COLUMNS = [
    'index', 'distance_m', 'speed_mps', 'speed_limit_mps', 'gradient_permille',
    'alpha_s_per_m', 'beta_m2_per_s2', 'force_N', 'energy_J',
]


class InfeasibleTimeError(ProgramBuildError):
    """Journey time at or below the trivial running-time bound."""


class SolutionError(ValueError):
    """Raised when a trajectory is requested from a non-optimal solution."""


class TimeMode(str, Enum):
    """How segment running time is tied to the speed points."""

    ENDPOINT = 'endpoint'
    TRAPEZOIDAL = 'trapezoidal'


@dataclass(frozen=True)
class VariableMap:
    """Column layout of the EETC program: [v_1..v_N | alpha | beta | F | E]."""

    n_segments: int
    mode: TimeMode
    journey_time_s: float

    def _block(self, k: int) -> slice:
        return slice(k * self.n_segments, (k + 1) * self.n_segments)

    @property
    def speed(self) -> slice:
        return self._block(0)

    @property
    def alpha(self) -> slice:
        return self._block(1)

    @property
    def beta(self) -> slice:
        return self._block(2)

    @property
    def force(self) -> slice:
        return self._block(3)

    @property
    def energy(self) -> slice:
        return self._block(4)

    @property
    def total(self) -> int:
        return 5 * self.n_segments

    def v(self, i: int) -> int:
        return i - 1

    def a(self, i: int) -> int:
        return self.n_segments + i - 1

    def b(self, i: int) -> int:
        return 2 * self.n_segments + i - 1

    def f(self, i: int) -> int:
        return 3 * self.n_segments + i - 1

    def e(self, i: int) -> int:
        return 4 * self.n_segments + i - 1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Optimal speed trajectory in SI units, indexed over the journey."""

    distances: np.ndarray
    speeds: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    efforts: np.ndarray
    energies: np.ndarray
    speed_limits: np.ndarray
    gradient_permille: np.ndarray
    objective_kWh: float
    mode: TimeMode
    journey_time_s: float
    end_speed_fixed: bool
    iterations: int
    gap: float
    wall_time_s: float

    @property
    def n_segments(self) -> int:
        return len(self.efforts)

    def to_frame(self) -> pd.DataFrame:
        """Point-indexed table; row 0 has no per-segment quantities."""
        n = self.n_segments

        def pad(values):
            return np.concatenate([[np.nan], values])

        gradients = np.concatenate([[self.gradient_permille[0]], self.gradient_permille])
        return pd.DataFrame({
            'index': np.arange(n + 1),
            'distance_m': self.distances,
            'speed_mps': self.speeds,
            'speed_limit_mps': self.speed_limits,
            'gradient_permille': gradients,
            'alpha_s_per_m': pad(self.alphas),
            'beta_m2_per_s2': self.betas,
            'force_N': pad(self.efforts),
            'energy_J': pad(self.energies),
        }, columns=TRAJECTORY_COLUMNS)


def min_running_time(route: DiscretizedRoute, mode: Union[TimeMode, str]) -> float:
    """Time to cover the route with every speed point at its limit (a strict lower bound)."""
    mode = TimeMode(mode)
    limits = np.array(route.point_speed_limit_m_per_s, dtype=float)
    limits[0] = route.start_speed_m_per_s
    if route.end_speed_fixed:
        limits[-1] = route.end_speed_m_per_s
    if mode is TimeMode.ENDPOINT:
        segment_speed = limits[1:]
    else:
        segment_speed = 0.5 * (limits[:-1] + limits[1:])
    if np.any(segment_speed <= 0):
        return np.inf
    return float(np.sum(route.segment_length_m / segment_speed))


def build_program(stock: RollingStock,
                  route: DiscretizedRoute,
                  journey_time_s: float,
                  mode: Union[TimeMode, str] = TimeMode.ENDPOINT,
                  rotated_cones: bool = False) -> Tuple[ConicProgram, VariableMap]:
    """
    Assemble the relaxed convex EETC model as a conic program.

    Args:
        stock: Rolling stock in SI units
        route: Discretized route with boundary speeds
        journey_time_s: Scheduled running time T
        mode: 'endpoint' (alpha_i >= 1/v_i) or 'trapezoidal' (alpha_i >= 2/(v_{i-1}+v_i))
        rotated_cones: Emit hyperbolic constraints as rotated cones instead of SOCs

    Returns:
        (ConicProgram, VariableMap)
    """
    try:
        mode = TimeMode(mode)
    except ValueError as e:
        raise ProgramBuildError(f"unknown time mode {mode!r}") from e

    n = route.n_segments
    dd = route.segment_length_m
    v0 = route.start_speed_m_per_s
    v_end = route.end_speed_m_per_s
    limits = route.point_speed_limit_m_per_s
    T = float(journey_time_s)

    if mode is TimeMode.ENDPOINT and v_end is not None and v_end <= 0:
        raise ProgramBuildError("endpoint mode needs a positive terminal speed (alpha_N = 1/v_N)")
    t_min = min_running_time(route, mode)
    if not T > t_min:
        raise InfeasibleTimeError(
            f"journey time {T:.3f} s does not exceed the running time at the speed limits ({t_min:.3f} s)")

    M = stock.mass_kg
    half_m = 0.5 * M
    A_d, B_d, C_d = stock.davis_a_N, stock.davis_b_N_per_mps, stock.davis_c_N_per_mps2
    eta_t, eta_b = stock.traction_efficiency, stock.braking_efficiency

    vmap = VariableMap(n_segments=n, mode=mode, journey_time_s=T)
    builder = ConicProgramBuilder(vmap.total)
    var = AffineExpr.var

    for i in range(1, n + 1):
        builder.set_objective(vmap.e(i), 1.0)

    # punctuality: sum of dd * alpha_i equals T
    builder.add_equality(AffineExpr({vmap.a(i): dd for i in range(1, n + 1)}), T)

    # energy conservation with the relaxed Davis force substituted
    for i in range(1, n + 1):
        terms = {
            vmap.f(i): dd,
            vmap.b(i): -(half_m + C_d * dd),
            vmap.v(i): -B_d * dd,
        }
        rhs = A_d * dd + M * GRAVITY * route.altitude_change_m[i - 1]
        if i > 1:
            terms[vmap.b(i - 1)] = half_m
        else:
            rhs -= half_m * v0 ** 2
        builder.add_equality(AffineExpr(terms), rhs)

    if v_end is not None:
        builder.add_equality(var(vmap.v(n)), v_end)

    for i in range(1, n + 1):
        F, E, a, b, v = var(vmap.f(i)), var(vmap.e(i)), var(vmap.a(i)), var(vmap.b(i)), var(vmap.v(i))
        builder.add_nonnegative(E - (dd / eta_t) * F)
        builder.add_nonnegative(E - (dd * eta_b) * F)
        builder.add_nonnegative(stock.max_tractive_effort_N - F)
        builder.add_nonnegative(F + stock.max_braking_effort_N)
        builder.add_nonnegative(stock.max_traction_power_W * a - F)
        builder.add_nonnegative(stock.max_braking_power_W * a + F)
        builder.add_nonnegative(limits[i] ** 2 - b)
        builder.add_nonnegative(limits[i] - v)
        if i < n:
            builder.add_nonnegative(v - MIN_SPEED)
        elif v_end is None:
            floor = ENDPOINT_TERMINAL_MIN_SPEED if mode is TimeMode.ENDPOINT else MIN_SPEED
            builder.add_nonnegative(v - floor)

    cone_rows = rotated_cone_rows if rotated_cones else hyperbolic_cone_rows
    for i in range(1, n + 1):
        a, v = var(vmap.a(i)), var(vmap.v(i))
        if mode is TimeMode.ENDPOINT:
            builder.add_cone_block(cone_rows(a, v, 1.0))
        else:
            prev = var(vmap.v(i - 1)) if i > 1 else AffineExpr.const(v0)
            builder.add_cone_block(cone_rows(a, prev + v, np.sqrt(2.0)))
    for i in range(1, n + 1):
        builder.add_cone_block(cone_rows(var(vmap.b(i)), AffineExpr.const(1.0), var(vmap.v(i))))

    program = builder.build()
    logger.info(
        f"Built {mode.value} EETC program: N = {n}, {program.n_variables} variables, "
        f"{program.n_equalities} equalities, {program.n_cone_rows} cone rows")
    return program, vmap


def extract_trajectory(solution, vmap: VariableMap, route: DiscretizedRoute) -> Trajectory:
    """
    Map an optimal solver solution back to a physical trajectory.

    Args:
        solution: ConicSolution with status Optimal
        vmap: VariableMap returned by build_program
        route: The DiscretizedRoute the program was built from

    Returns:
        Trajectory with v_0 and beta_0 prepended from the boundary condition
    """
    status = getattr(solution.status, 'value', solution.status)
    if status != 'Optimal':
        raise SolutionError(f"cannot extract a trajectory from a {status} solution")

    x = np.asarray(solution.x, dtype=float)
    v0 = route.start_speed_m_per_s
    speeds = np.concatenate([[v0], x[vmap.speed]])
    if route.end_speed_fixed:
        speeds[-1] = route.end_speed_m_per_s
    betas = np.concatenate([[v0 ** 2], x[vmap.beta]])
    energies = x[vmap.energy].copy()

    return Trajectory(
        distances=route.distances,
        speeds=speeds,
        alphas=x[vmap.alpha].copy(),
        betas=betas,
        efforts=x[vmap.force].copy(),
        energies=energies,
        speed_limits=np.array(route.point_speed_limit_m_per_s),
        gradient_permille=np.array(route.segment_gradient_permille),
        objective_kWh=float(np.sum(energies) / JOULES_PER_KWH),
        mode=vmap.mode,
        journey_time_s=vmap.journey_time_s,
        end_speed_fixed=route.end_speed_fixed,
        iterations=int(solution.iterations),
        gap=float(solution.gap),
        wall_time_s=float(solution.wall_time_s),
    )
