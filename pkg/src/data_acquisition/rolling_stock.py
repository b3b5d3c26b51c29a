import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

KMH_PER_MPS = 3.6


class InputDataError(ValueError):
    """Raised when a stock, route or trajectory document is malformed."""


class StockFileModel(BaseModel):
    """Rolling-stock document in engineering units (t, kN, kW)."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    mass_t: float = Field(gt=0)
    max_tractive_effort_kN: float = Field(gt=0)
    max_braking_effort_kN: float = Field(gt=0)
    max_traction_power_kW: float = Field(gt=0)
    max_braking_power_kW: float = Field(gt=0)
    eta_traction: float = Field(gt=0, le=1)
    eta_braking: float = Field(gt=0, le=1)
    davis_A_kN: float = Field(gt=0)
    davis_B_kN_per_kmh: float = Field(gt=0)
    davis_C_kN_per_kmh2: float = Field(gt=0)


@dataclass(frozen=True)
class RollingStock:
    """Train parameters in SI units (kg, N, W, N/(m/s), N/(m/s)^2)."""

    mass_kg: float
    max_tractive_effort_N: float
    max_braking_effort_N: float
    max_traction_power_W: float
    max_braking_power_W: float
    traction_efficiency: float
    braking_efficiency: float
    davis_a_N: float
    davis_b_N_per_mps: float
    davis_c_N_per_mps2: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not np.isfinite(value) or value <= 0:
                raise InputDataError(f"{name} must be a positive finite number, got {value}")
        if self.traction_efficiency > 1 or self.braking_efficiency > 1:
            raise InputDataError("efficiencies must lie in (0, 1]")
        # otherwise traction/regeneration cycling drives the objective to -inf
        if self.traction_efficiency * self.braking_efficiency >= 1:
            raise InputDataError("eta_traction * eta_braking must be below 1")

    @classmethod
    def from_engineering_units(cls, doc: StockFileModel) -> "RollingStock":
        """Convert a validated engineering-unit document into SI units."""
        return cls(
            mass_kg=doc.mass_t * 1000.0,
            max_tractive_effort_N=doc.max_tractive_effort_kN * 1000.0,
            max_braking_effort_N=doc.max_braking_effort_kN * 1000.0,
            max_traction_power_W=doc.max_traction_power_kW * 1000.0,
            max_braking_power_W=doc.max_braking_power_kW * 1000.0,
            traction_efficiency=doc.eta_traction,
            braking_efficiency=doc.eta_braking,
            davis_a_N=doc.davis_A_kN * 1000.0,
            davis_b_N_per_mps=doc.davis_B_kN_per_kmh * 1000.0 * KMH_PER_MPS,
            davis_c_N_per_mps2=doc.davis_C_kN_per_kmh2 * 1000.0 * KMH_PER_MPS ** 2,
        )

    def to_engineering_units(self) -> Dict[str, float]:
        """Return the record in the engineering units of the stock JSON format."""
        return {
            'mass_t': self.mass_kg / 1000.0,
            'max_tractive_effort_kN': self.max_tractive_effort_N / 1000.0,
            'max_braking_effort_kN': self.max_braking_effort_N / 1000.0,
            'max_traction_power_kW': self.max_traction_power_W / 1000.0,
            'max_braking_power_kW': self.max_braking_power_W / 1000.0,
            'eta_traction': self.traction_efficiency,
            'eta_braking': self.braking_efficiency,
            'davis_A_kN': self.davis_a_N / 1000.0,
            'davis_B_kN_per_kmh': self.davis_b_N_per_mps / (1000.0 * KMH_PER_MPS),
            'davis_C_kN_per_kmh2': self.davis_c_N_per_mps2 / (1000.0 * KMH_PER_MPS ** 2),
        }


def parse_rolling_stock(text: str) -> RollingStock:
    """
    Parse a rolling-stock JSON document given in engineering units.

    Args:
        text: JSON document with the keys of ``StockFileModel``

    Returns:
        RollingStock in SI units
    """
    try:
        doc = StockFileModel.model_validate_json(text)
    except ValidationError as e:
        raise InputDataError(f"Invalid rolling-stock document: {e}") from e
    return RollingStock.from_engineering_units(doc)


def load_rolling_stock(path: Union[str, Path]) -> RollingStock:
    """Read and parse a rolling-stock file."""
    stock = parse_rolling_stock(Path(path).read_text())
    logger.info(f"Loaded rolling stock from {path}: M = {stock.mass_kg:.0f} kg")
    return stock


def dump_rolling_stock(stock: RollingStock) -> str:
    """Serialize a RollingStock back to its JSON document."""
    return json.dumps(stock.to_engineering_units(), indent=2)


def davis_resistance(stock: RollingStock, v: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Running resistance A + B*v + C*v^2 in N.

    Args:
        stock: Rolling stock holding the Davis coefficients
        v: Speed in m/s (scalar or array), must be non-negative

    Returns:
        Resistance force in N with the shape of ``v``
    """
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0):
        raise ValueError("Davis resistance is defined for non-negative speeds only")
    force = stock.davis_a_N + stock.davis_b_N_per_mps * v_arr + stock.davis_c_N_per_mps2 * v_arr ** 2
    return float(force) if force.ndim == 0 else force
