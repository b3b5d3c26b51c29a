"""
Independent recomputation of energy and running time from (distance, speed) points.

Uses only the speed points, the rolling stock and the route geometry.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import pandas as pd

from data_acquisition.rolling_stock import RollingStock
from data_acquisition.route_data import GRAVITY, DiscretizedRoute, RouteProfile
from model.eetc_program import JOULES_PER_KWH, Trajectory

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DISTANCE_TOL_M = 1e-6

BREAKDOWN_COLUMNS = [
    'segment', 'distance_from_m', 'distance_to_m', 'v_ave_mps', 'time_s',
    'e1_drag_J', 'e2_kinetic_J', 'e3_potential_J', 'e4_mechanical_J', 'energy_J',
]


class SimulationError(ValueError):
    """Raised when speed points cannot be simulated."""


@dataclass(frozen=True, eq=False)
class SimulationResult:
    energy_J: float
    running_time_s: float
    breakdown: pd.DataFrame

    @property
    def energy_kWh(self) -> float:
        return self.energy_J / JOULES_PER_KWH


def simulate(speed_points: Union[Sequence[Sequence[float]], np.ndarray],
             stock: RollingStock,
             route: Union[DiscretizedRoute, RouteProfile]) -> SimulationResult:
    """
    Recalculate energy consumption and running time of a speed trajectory.

    Each step uses the average of its end speeds: drag work at that speed, the change in
    kinetic and potential energy, and their sum as mechanical work. Positive mechanical work
    is drawn through the traction efficiency; negative work is recovered at the braking
    efficiency.

    Args:
        speed_points: (d_i, v_i) pairs in m and m/s, d strictly increasing
        stock: Rolling stock in SI units
        route: Route (or its discretisation) supplying the elevation profile

    Returns:
        SimulationResult with totals and a per-segment breakdown
    """
    points = np.asarray(speed_points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise SimulationError(f"speed points must be (distance, speed) pairs, got shape {points.shape}")
    if len(points) < 2:
        raise SimulationError("at least two speed points are required")
    if not np.all(np.isfinite(points)):
        raise SimulationError("speed points contain non-finite values")

    d, v = points[:, 0], points[:, 1]
    profile = route.profile if isinstance(route, DiscretizedRoute) else route
    if np.any(np.diff(d) <= 0):
        raise SimulationError("distances must be strictly increasing")
    if d[0] < -DISTANCE_TOL_M or d[-1] > profile.total_distance_m + DISTANCE_TOL_M:
        raise SimulationError(
            f"distances [{d[0]}, {d[-1]}] leave the route [0, {profile.total_distance_m}]")
    if np.any(v < 0):
        raise SimulationError("speeds must be nonnegative")
    stalled = np.flatnonzero(v[:-1] + v[1:] == 0)
    if stalled.size:
        raise SimulationError(f"step {int(stalled[0]) + 1} has zero average speed; running time is undefined")

    M = stock.mass_kg
    delta_d = np.diff(d)
    delta_h = np.diff(profile.elevation_at(d))

    v_ave = (v[1:] + v[:-1]) / 2.0
    time_s = delta_d / v_ave
    e1 = (stock.davis_a_N + stock.davis_b_N_per_mps * v_ave + stock.davis_c_N_per_mps2 * v_ave ** 2) * delta_d
    e2 = 0.5 * M * (v[1:] ** 2 - v[:-1] ** 2)
    e3 = M * GRAVITY * delta_h
    e4 = e1 + e2 + e3
    energy = np.where(e4 >= 0, e4 / stock.traction_efficiency, e4 * stock.braking_efficiency)

    breakdown = pd.DataFrame({
        'segment': np.arange(1, len(d)),
        'distance_from_m': d[:-1],
        'distance_to_m': d[1:],
        'v_ave_mps': v_ave,
        'time_s': time_s,
        'e1_drag_J': e1,
        'e2_kinetic_J': e2,
        'e3_potential_J': e3,
        'e4_mechanical_J': e4,
        'energy_J': energy,
    }, columns=BREAKDOWN_COLUMNS)

    result = SimulationResult(
        energy_J=float(np.sum(energy)),
        running_time_s=float(np.sum(time_s)),
        breakdown=breakdown,
    )
    logger.info(f"Simulated {len(d) - 1} steps: e = {result.energy_kWh:.4f} kWh, "
                f"t = {result.running_time_s:.3f} s")
    return result


def simulate_trajectory(traj: Trajectory,
                        stock: RollingStock,
                        route: Union[DiscretizedRoute, RouteProfile]) -> SimulationResult:
    """Simulate the speed points of a solved trajectory."""
    return simulate(np.column_stack([traj.distances, traj.speeds]), stock, route)


@dataclass(frozen=True)
class ConsistencyReport:
    """Model objective and journey time against their simulated counterparts."""

    objective_kWh: float
    simulated_energy_kWh: float
    target_time_s: float
    simulated_time_s: float
    solver_time_s: float

    @property
    def energy_difference_kWh(self) -> float:
        return self.simulated_energy_kWh - self.objective_kWh

    @property
    def time_difference_s(self) -> float:
        return self.simulated_time_s - self.target_time_s

    def to_frame(self) -> pd.DataFrame:
        rows = [
            ('Objective function value (kWh)', self.objective_kWh),
            ('Simulated energy consumption (kWh)', self.simulated_energy_kWh),
            ('Energy difference (kWh)', self.energy_difference_kWh),
            ('Target running time (s)', self.target_time_s),
            ('Simulated running time (s)', self.simulated_time_s),
            ('Time difference (s)', self.time_difference_s),
            ('CPU time (s)', self.solver_time_s),
        ]
        frame = pd.DataFrame(rows, columns=['Item', 'Convex optimization'])
        return frame.set_index('Item')

    def format_table(self) -> str:
        return self.to_frame().to_string(float_format=lambda x: f"{x:.3f}")


def consistency_report(traj: Trajectory, sim: SimulationResult, target_time_s: float) -> ConsistencyReport:
    """
    Compare a solved trajectory with its simulation.

    Args:
        traj: Solved trajectory
        sim: simulate() output for the same speed points
        target_time_s: Scheduled running time T

    Returns:
        ConsistencyReport (differences are simulated minus model)
    """
    return ConsistencyReport(
        objective_kWh=traj.objective_kWh,
        simulated_energy_kWh=sim.energy_kWh,
        target_time_s=float(target_time_s),
        simulated_time_s=sim.running_time_s,
        solver_time_s=traj.wall_time_s,
    )
