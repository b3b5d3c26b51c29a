import json
import logging
from typing import Dict

from data_acquisition.rolling_stock import RollingStock, StockFileModel
from data_acquisition.route_data import RouteProfile, parse_route

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Suburban rolling stock, engineering units
SUBURBAN_STOCK = {
    'mass_t': 144.0,
    'max_tractive_effort_kN': 230.81,
    'max_braking_effort_kN': 230.81,
    'max_traction_power_kW': 2520.0,
    'max_braking_power_kW': 2520.0,
    'eta_traction': 0.9,
    'eta_braking': 0.6,
    'davis_A_kN': 3.0016,
    'davis_B_kN_per_kmh': 2.016e-2,
    'davis_C_kN_per_kmh2': 6.9692e-4,
}

SYNTHETIC_DISTANCE_M = 2707.0
SYNTHETIC_LIMIT_KMH = 80.0
SYNTHETIC_JOURNEY_TIME_S = 140.0
SYNTHETIC_SEGMENTS = 238


def sample_stock() -> RollingStock:
    """Reference suburban rolling stock in SI units."""
    return RollingStock.from_engineering_units(StockFileModel(**SUBURBAN_STOCK))


def flat_route_document(distance_m: float = SYNTHETIC_DISTANCE_M,
                        limit_kmh: float = SYNTHETIC_LIMIT_KMH) -> Dict:
    """Route document for a level line with a single speed limit."""
    return {
        'total_distance_m': distance_m,
        'gradients': [{'from_m': 0.0, 'to_m': distance_m, 'permille': 0.0}],
        'speed_limits': [{'from_m': 0.0, 'to_m': distance_m, 'kmh': limit_kmh}],
    }


def sample_route(distance_m: float = SYNTHETIC_DISTANCE_M,
                 limit_kmh: float = SYNTHETIC_LIMIT_KMH) -> RouteProfile:
    """
    Synthetic level route used when no line data is supplied.

    Args:
        distance_m: Station spacing D
        limit_kmh: Line speed limit

    Returns:
        RouteProfile with zero gradient and one speed limit
    """
    logger.info(f"Using synthetic flat route: D = {distance_m} m, limit {limit_kmh} km/h")
    return parse_route(json.dumps(flat_route_document(distance_m, limit_kmh)))
