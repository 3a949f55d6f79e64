from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict
from enum import Enum

from app.config.settings import settings
from app.models.attack import CriticalNode, Tariff, TraceEntry
from app.models.grid import ComposedGrid


class SweepParameter(str, Enum):
    CAPACITY = "capacity"
    RESOURCE = "resource"
    MGLOAD = "mgload"

class Algorithm(str, Enum):
    PMA = "pma"
    RANDOM = "random"

DEFAULT_SWEEPS: Dict[SweepParameter, List[float]] = {
    SweepParameter.CAPACITY: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.78],
    SweepParameter.RESOURCE: [round(0.05 * i, 2) for i in range(14)],
    SweepParameter.MGLOAD: [13.5, 15.5, 17.5, 19.5, 21.5],
}

_BOUNDS = {
    SweepParameter.CAPACITY: (0.0, 0.78),
    SweepParameter.RESOURCE: (0.0, 0.65),
}


class TariffOverride(BaseModel):
    rate: Optional[float] = Field(None, gt=0)
    max_rate_change: Optional[float] = Field(None, ge=0)
    sensitivity: Optional[float] = Field(None, ge=0, le=1)


class ExperimentConfig(BaseModel):
    main_case: str = "ieee14"
    microgrid_case: str = "ieee9"
    attachments: List[int] = [13, 14]
    capacity_headroom: float = Field(5.0, gt=0)
    capacity_reduction: float = Field(0.6, ge=0, le=0.78)
    resource_fraction: float = Field(0.2, ge=0, le=0.65)
    microgrid_load_total: float = Field(13.5, gt=0)
    alpha: float = Field(1.0, gt=0, le=1)
    runs: int = Field(50, ge=1)
    seed: int = 42
    generator_cost: float = Field(1.0, gt=0)
    sweep: List[SweepParameter] = list(SweepParameter)
    sweep_values: Dict[SweepParameter, List[float]] = DEFAULT_SWEEPS
    tariff: Dict[int, TariffOverride] = {}
    genattack: Dict[int, float] = {}
    out_dir: str = settings.GRIDSTORM_OUT_DIR
    workers: int = Field(settings.GRIDSTORM_WORKERS, ge=1)

    @model_validator(mode="after")
    def check_sweeps(self):
        for param, values in self.sweep_values.items():
            if not values:
                raise ValueError(f"sweep {param.value} has no values")
            if param in _BOUNDS:
                lo, hi = _BOUNDS[param]
                bad = [v for v in values if v < lo or v > hi]
                if bad:
                    raise ValueError(f"sweep {param.value} values outside [{lo}, {hi}]: {bad}")
            elif any(v <= 0 for v in values):
                raise ValueError("microgrid load values must be positive")
        for gen, cost in self.genattack.items():
            if cost <= 0:
                raise ValueError(f"generator {gen}: attack cost must be positive")
        return self

    def values_for(self, param: SweepParameter) -> List[float]:
        return self.sweep_values.get(param, DEFAULT_SWEEPS[param])


class Scenario(BaseModel):
    composed: ComposedGrid
    tariff: Tariff
    budget: float


class SweepRow(BaseModel):
    parameter: SweepParameter
    value: float
    algorithm: Algorithm
    run: int
    seed: int
    total_node_failures: int
    microgrids_islanded: int
    node_failures_in_microgrids: int
    lines_failed: int
    budget_spent: float

class SweepReport(BaseModel):
    rows: List[SweepRow]
    files: List[str] = []


class CaseSummary(BaseModel):
    name: str
    buses: int
    generators: int
    branches: int
    loads: int
    total_demand: float

class PlanRequest(BaseModel):
    algorithm: Algorithm = Algorithm.PMA
    capacity_reduction: float = Field(0.6, ge=0, le=0.78)
    resource_fraction: float = Field(0.2, ge=0, le=0.65)
    microgrid_load_total: float = Field(13.5, gt=0)
    alpha: float = Field(1.0, gt=0, le=1)
    seed: int = 42

class PlanResponse(BaseModel):
    algorithm: Algorithm
    budget: float
    spent: float
    lines_failed: List[int]
    microgrids_islanded: List[int]
    microgrid_node_failures: List[int]
    total_node_failures: int
    trace: List[TraceEntry] = []

class CriticalNodesResponse(BaseModel):
    nodes: List[CriticalNode]
    total: int
