import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from data_acquisition.rolling_stock import InputDataError
from model.eetc_program import TRAJECTORY_COLUMNS, Trajectory

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.9g'
REQUIRED_TRAJECTORY_COLUMNS = ['distance_m', 'speed_mps']


class RunReport(BaseModel):
    """Summary of one solved instance, written as a single JSON object."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    distance_m: float = Field(gt=0)
    journey_time_s: float = Field(gt=0)
    n_segments: int = Field(ge=2)
    mode: str
    start_speed_mps: float = Field(ge=0)
    end_speed_mps: Optional[float] = None
    status: str
    objective_kWh: float
    simulated_energy_kWh: float
    simulated_time_s: float = Field(gt=0)
    energy_difference_kWh: float
    time_difference_s: float
    max_alpha_dev_rel: float = Field(ge=0)
    max_beta_dev_rel: float = Field(ge=0)
    iterations: int = Field(ge=0)
    gap: float = Field(ge=0)
    solver_wall_time_s: float = Field(ge=0)


def run_report_schema() -> Dict[str, Any]:
    """JSON schema every RunReport document validates against."""
    return RunReport.model_json_schema()


def write_run_report(report: RunReport, path: Union[str, Path]):
    Path(path).write_text(report.model_dump_json(indent=2))
    logger.info(f"Run report written to {path}")


def write_trajectory_csv(traj: Trajectory, path: Union[str, Path]):
    """
    Write a trajectory in the plot-ready CSV layout.

    Row 0 leaves the per-segment columns (alpha, force, energy) empty; floats keep 9
    significant digits.

    Args:
        traj: Solved trajectory
        path: Output file
    """
    traj.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep='')
    logger.info(f"Trajectory with {traj.n_segments + 1} points written to {path}")


def read_trajectory_csv(path: Union[str, Path]) -> pd.DataFrame:
    """
    Read and validate a trajectory CSV.

    Args:
        path: CSV file with at least the distance_m and speed_mps columns

    Returns:
        DataFrame with the file's columns
    """
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputDataError(f"Could not parse trajectory file {path}: {e}") from e

    missing = [col for col in REQUIRED_TRAJECTORY_COLUMNS if col not in frame.columns]
    if missing:
        raise InputDataError(f"Missing required columns: {missing}")
    unknown = [col for col in frame.columns if col not in TRAJECTORY_COLUMNS]
    if unknown:
        raise InputDataError(f"Unknown columns: {unknown}")
    if len(frame) < 2:
        raise InputDataError(f"trajectory needs at least two points, got {len(frame)}")

    for col in REQUIRED_TRAJECTORY_COLUMNS:
        values = pd.to_numeric(frame[col], errors='coerce').to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise InputDataError(f"column {col} must hold finite numbers in every row")
        frame[col] = values

    if np.any(np.diff(frame['distance_m'].to_numpy()) <= 0):
        raise InputDataError("distance_m must be strictly increasing")
    if np.any(frame['speed_mps'].to_numpy() < 0):
        raise InputDataError("speed_mps must be nonnegative")

    logger.info(f"Read trajectory with {len(frame)} points from {path}")
    return frame


def speed_points(frame: pd.DataFrame) -> np.ndarray:
    """(distance, speed) pairs of a trajectory table."""
    return frame[REQUIRED_TRAJECTORY_COLUMNS].to_numpy(dtype=float)
