from pydantic import BaseModel, ConfigDict
from typing import Optional, List, Dict
import numpy as np

from app.models.grid import GridCase


class IslandBalance(BaseModel):
    buses: List[int]
    dispatch: Dict[int, float] = {}
    served: Dict[int, float] = {}
    requested: float = 0.0
    failed: List[int] = []
    # p_min lower bounds were ignored for at least one unit
    relaxed: bool = False
    saturated: bool = False
    # generator share of one extra unit of demand, None when saturated or dead
    participation: Optional[Dict[int, float]] = None

    @property
    def generation(self) -> float:
        return sum(self.dispatch.values())

    @property
    def served_total(self) -> float:
        return sum(self.served.values())

class Dispatch(BaseModel):
    islands: List[IslandBalance]
    injection: Dict[int, float]
    failed: List[int] = []

    def outputs(self) -> Dict[int, float]:
        out = {}
        for island in self.islands:
            out.update(island.dispatch)
        return out

class FlowSolution(BaseModel):
    flows: Dict[int, float]
    angles: Dict[int, float]
    injection: Dict[int, float]

class SensitivityMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    branch_ids: List[int]
    load_ids: List[int]
    values: np.ndarray

    def entry(self, branch_id: int, load_id: int) -> float:
        return float(self.values[self.branch_ids.index(branch_id), self.load_ids.index(load_id)])

    def row(self, branch_id: int) -> Dict[int, float]:
        r = self.values[self.branch_ids.index(branch_id)]
        return {load: float(v) for load, v in zip(self.load_ids, r)}


class IslandSummary(BaseModel):
    bus_count: int
    generation: float
    served: float

class StepRecord(BaseModel):
    step: int
    lines_failed: List[int] = []
    nodes_failed: List[int] = []
    islands: List[IslandSummary] = []

class CascadeState(BaseModel):
    grid: GridCase
    demands: Dict[int, float]
    priority: List[int] = []
    moving_avg: Dict[int, float] = {}
    step: int = 0
    failed_lines: List[int] = []
    failed_nodes: List[int] = []
    flows: Optional[FlowSolution] = None
    dispatch: Optional[Dispatch] = None
    trace: List[StepRecord] = []

class CascadeOutcome(BaseModel):
    s1: List[int]
    s2: List[int]
    steps: List[StepRecord]
    final: GridCase
    moving_avg: Dict[int, float] = {}
    flows: Optional[FlowSolution] = None
    dispatch: Optional[Dispatch] = None
