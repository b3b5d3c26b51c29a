import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np

from model.eetc_program import TimeMode, Trajectory

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExactnessReport:
    """
    Relative gaps between the auxiliary variables and the quantities they relax.

    Deviation arrays are indexed by segment end point i = 1..N; ``*_argmax`` are point indices.
    A NaN entry marks a point that is excluded from the metric.
    """

    max_alpha_dev_rel: float
    max_beta_dev_rel: float
    alpha_argmax: int
    beta_argmax: int
    alpha_deviation: np.ndarray
    beta_deviation: np.ndarray

    def is_exact(self, tol: float = 1e-4) -> bool:
        return self.max_alpha_dev_rel <= tol and self.max_beta_dev_rel <= tol

    def to_dict(self) -> Dict[str, float]:
        return {
            'max_alpha_dev_rel': self.max_alpha_dev_rel,
            'max_beta_dev_rel': self.max_beta_dev_rel,
            'alpha_argmax': self.alpha_argmax,
            'beta_argmax': self.beta_argmax,
        }


def check_exactness(traj: Trajectory) -> ExactnessReport:
    """
    Measure how tightly the relaxed constraints hold at a solved trajectory.

    Endpoint mode compares alpha_i with 1/v_i, trapezoidal mode with 2/(v_{i-1} + v_i);
    beta_i is compared with v_i^2. Deviations are relative to the exact value.

    Args:
        traj: Trajectory returned by extract_trajectory (or built by hand)

    Returns:
        ExactnessReport with maxima expressed as fractions
    """
    speeds = np.asarray(traj.speeds, dtype=float)
    alphas = np.asarray(traj.alphas, dtype=float)
    betas = np.asarray(traj.betas, dtype=float)[1:]
    n = len(alphas)

    if TimeMode(traj.mode) is TimeMode.ENDPOINT:
        segment_speed = speeds[1:]
    else:
        segment_speed = 0.5 * (speeds[:-1] + speeds[1:])
    zero = np.flatnonzero(segment_speed <= 0)
    if zero.size:
        raise ValueError(f"zero speed at compared point {int(zero[0]) + 1}; alpha deviation is undefined")
    alpha_dev = np.abs(alphas * segment_speed - 1.0)

    v_sq = speeds[1:] ** 2
    excluded = np.zeros(n, dtype=bool)
    if traj.end_speed_fixed and speeds[-1] == 0:
        excluded[-1] = True
    zero = np.flatnonzero((v_sq <= 0) & ~excluded)
    if zero.size:
        raise ValueError(f"zero speed at compared point {int(zero[0]) + 1}; beta deviation is undefined")
    beta_dev = np.full(n, np.nan)
    beta_dev[~excluded] = np.abs(betas[~excluded] - v_sq[~excluded]) / v_sq[~excluded]

    report = ExactnessReport(
        max_alpha_dev_rel=float(np.max(alpha_dev)),
        max_beta_dev_rel=float(np.nanmax(beta_dev)),
        alpha_argmax=int(np.argmax(alpha_dev)) + 1,
        beta_argmax=int(np.nanargmax(beta_dev)) + 1,
        alpha_deviation=alpha_dev,
        beta_deviation=beta_dev,
    )
    logger.info(f"Exactness: max alpha deviation {report.max_alpha_dev_rel:.3e} at point "
                f"{report.alpha_argmax}, max beta deviation {report.max_beta_dev_rel:.3e} at point "
                f"{report.beta_argmax}")
    return report
