import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from data_acquisition.rolling_stock import InputDataError, KMH_PER_MPS

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

GRAVITY = 9.81
MAX_ABS_GRADIENT_PERMILLE = 100.0
COVERAGE_TOL_M = 1e-9


class DiscretizationError(ValueError):
    """Raised for invalid segment counts or boundary speeds."""


class GradientInterval(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    from_m: float
    to_m: float
    permille: float


class LimitInterval(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    from_m: float
    to_m: float
    kmh: float


class RouteFileModel(BaseModel):
    """Route document: gradients in permille, speed limits in km/h."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    total_distance_m: float
    gradients: List[GradientInterval] = Field(min_length=1)
    speed_limits: List[LimitInterval] = Field(min_length=1)


def _check_coverage(intervals: List[Tuple[float, float, float]], total: float, label: str):
    """Intervals must be sorted, non-overlapping and cover [0, total] without gaps."""
    if abs(intervals[0][0]) > COVERAGE_TOL_M:
        raise InputDataError(f"{label} must start at 0 m, got {intervals[0][0]}")
    for (lo, hi, _) in intervals:
        if hi <= lo:
            raise InputDataError(f"{label} interval [{lo}, {hi}] is empty or reversed")
    for (_, prev_hi, _), (lo, _, _) in zip(intervals[:-1], intervals[1:]):
        if lo < prev_hi - COVERAGE_TOL_M:
            raise InputDataError(f"{label} intervals overlap at {lo} m")
        if lo > prev_hi + COVERAGE_TOL_M:
            raise InputDataError(f"{label} intervals leave a gap between {prev_hi} m and {lo} m")
    if abs(intervals[-1][1] - total) > COVERAGE_TOL_M:
        raise InputDataError(f"{label} must end at {total} m, got {intervals[-1][1]}")


@dataclass(frozen=True)
class RouteProfile:
    """Inter-station route with piecewise-constant gradient and speed limit (SI)."""

    total_distance_m: float
    gradient_intervals: Tuple[Tuple[float, float, float], ...]
    limit_intervals: Tuple[Tuple[float, float, float], ...]
    _breakpoints: np.ndarray = field(init=False, repr=False, compare=False)
    _elevations: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.total_distance_m > 0:
            raise InputDataError(f"total_distance_m must be positive, got {self.total_distance_m}")
        _check_coverage(list(self.gradient_intervals), self.total_distance_m, 'gradients')
        _check_coverage(list(self.limit_intervals), self.total_distance_m, 'speed_limits')
        for (_, _, permille) in self.gradient_intervals:
            if abs(permille) >= MAX_ABS_GRADIENT_PERMILLE:
                raise InputDataError(f"gradient {permille} permille is out of range")
        for (_, _, limit) in self.limit_intervals:
            if limit <= 0:
                raise InputDataError(f"speed limit must be positive, got {limit}")

        # piecewise-linear elevation through the gradient breakpoints
        starts = np.array([g[0] for g in self.gradient_intervals] + [self.total_distance_m])
        starts[0] = 0.0
        slopes = np.array([g[2] for g in self.gradient_intervals]) / 1000.0
        lengths = np.diff(starts)
        elevations = np.concatenate([[0.0], np.cumsum(slopes * lengths)])
        object.__setattr__(self, '_breakpoints', starts)
        object.__setattr__(self, '_elevations', elevations)

    def elevation_at(self, d: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Altitude relative to the origin station at distance d (m)."""
        return np.interp(d, self._breakpoints, self._elevations)

    def elevation_change(self, d_from: float, d_to: float) -> float:
        """Altitude gained between two positions."""
        return float(self.elevation_at(d_to) - self.elevation_at(d_from))

    def limit_over(self, d_from: float, d_to: float) -> float:
        """Lowest speed limit (m/s) of the intervals overlapping (d_from, d_to)."""
        limits = [lim for (lo, hi, lim) in self.limit_intervals if lo < d_to and hi > d_from]
        return min(limits)


def parse_route(text: str) -> RouteProfile:
    """
    Parse a route JSON document.

    Args:
        text: JSON document with total distance, gradient and speed-limit intervals

    Returns:
        RouteProfile with limits converted from km/h to m/s
    """
    try:
        doc = RouteFileModel.model_validate_json(text)
    except ValidationError as e:
        raise InputDataError(f"Invalid route document: {e}") from e

    gradients = tuple((g.from_m, g.to_m, g.permille) for g in doc.gradients)
    limits = []
    for lim in doc.speed_limits:
        if lim.kmh <= 0:
            raise InputDataError(f"speed limit must be positive, got {lim.kmh} km/h")
        limits.append((lim.from_m, lim.to_m, lim.kmh / KMH_PER_MPS))
    return RouteProfile(
        total_distance_m=doc.total_distance_m,
        gradient_intervals=gradients,
        limit_intervals=tuple(limits),
    )


def load_route(path: Union[str, Path]) -> RouteProfile:
    """Read and parse a route file."""
    route = parse_route(Path(path).read_text())
    logger.info(f"Loaded route from {path}: D = {route.total_distance_m} m")
    return route


@dataclass(frozen=True, eq=False)
class DiscretizedRoute:
    """Route split into N equal segments of length segment_length_m."""

    profile: RouteProfile
    n_segments: int
    segment_length_m: float
    altitude_change_m: np.ndarray
    point_speed_limit_m_per_s: np.ndarray
    start_speed_m_per_s: float
    end_speed_m_per_s: Optional[float]

    @property
    def total_distance_m(self) -> float:
        return self.profile.total_distance_m

    @property
    def distances(self) -> np.ndarray:
        d = np.arange(self.n_segments + 1) * self.segment_length_m
        d[-1] = self.profile.total_distance_m
        return d

    @property
    def segment_gradient_permille(self) -> np.ndarray:
        return self.altitude_change_m / self.segment_length_m * 1000.0

    @property
    def end_speed_fixed(self) -> bool:
        return self.end_speed_m_per_s is not None


def discretize(route: RouteProfile,
               n: int,
               boundaries: Tuple[float, Optional[float]] = (0.0, 0.0)) -> DiscretizedRoute:
    """
    Divide the route into n equal segments.

    Args:
        route: Parsed route profile
        n: Number of segments (at least 2)
        boundaries: (v0, vN) in m/s; vN = None leaves the terminal speed free

    Returns:
        DiscretizedRoute with per-segment altitude change and per-point limits
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise DiscretizationError(f"segment count must be an integer >= 2, got {n}")
    n = int(n)
    v0, v_end = boundaries

    seg_len = route.total_distance_m / n
    edges = np.arange(n + 1) * seg_len
    edges[-1] = route.total_distance_m
    altitude_change = np.diff(route.elevation_at(edges))

    segment_limits = np.array([route.limit_over(edges[i], edges[i + 1]) for i in range(n)])
    point_limits = np.empty(n + 1)
    point_limits[0] = segment_limits[0]
    point_limits[-1] = segment_limits[-1]
    point_limits[1:-1] = np.minimum(segment_limits[:-1], segment_limits[1:])

    if v0 is None or v0 < 0 or v0 > point_limits[0]:
        raise DiscretizationError(f"start speed {v0} m/s outside [0, {point_limits[0]:.3f}]")
    if v_end is not None and (v_end < 0 or v_end > point_limits[-1]):
        raise DiscretizationError(f"end speed {v_end} m/s outside [0, {point_limits[-1]:.3f}]")

    for arr in (altitude_change, point_limits):
        arr.setflags(write=False)

    return DiscretizedRoute(
        profile=route,
        n_segments=n,
        segment_length_m=seg_len,
        altitude_change_m=altitude_change,
        point_speed_limit_m_per_s=point_limits,
        start_speed_m_per_s=float(v0),
        end_speed_m_per_s=None if v_end is None else float(v_end),
    )
