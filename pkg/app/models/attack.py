from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict
from enum import Enum

from app.models.grid import ComposedGrid, GridCase

# float slack when comparing a cost with the remaining budget
LEDGER_TOL = 1e-9


class LoadTariff(BaseModel):
    rate: float = Field(1.0, gt=0)
    max_rate_change: float = Field(0.5, ge=0)
    sensitivity: float = Field(0.0, ge=0, le=1)
    bill_target: float = Field(0.0, ge=0)
    cost_weight: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def rate_stays_positive(self):
        if self.max_rate_change >= self.rate:
            raise ValueError("max_rate_change must stay below rate")
        return self

class Tariff(BaseModel):
    loads: Dict[int, LoadTariff]
    # c^gu per attackable generator id
    generator_costs: Dict[int, float] = {}

class AttackVector(BaseModel):
    z: Dict[int, float] = {}

    @model_validator(mode="after")
    def fractions_in_range(self):
        for bus, value in self.z.items():
            if value < 0 or value > 1:
                raise ValueError(f"z for load {bus} outside [0, 1]: {value}")
        return self

    def get(self, bus: int) -> float:
        return self.z.get(bus, 0.0)

class McbResult(BaseModel):
    target: int
    feasible: bool
    z: AttackVector
    cost: float = 0.0
    achieved_flow: float = 0.0
    direction: int = 1


class GenPriceAttack(BaseModel):
    generator_id: int
    cost: float = Field(..., gt=0)

class LedgerEntry(BaseModel):
    action: str
    cost: float

class BudgetLedger(BaseModel):
    total: float = Field(..., ge=0)
    spent: float = 0.0
    entries: List[LedgerEntry] = []

    @property
    def remaining(self) -> float:
        return max(self.total - self.spent, 0.0)

    def can_afford(self, cost: float) -> bool:
        return cost <= self.remaining + LEDGER_TOL

    def charge(self, action: str, cost: float) -> float:
        """Books `cost` and returns what was charged; rounding overshoot is cut at total."""
        if cost >= self.remaining:
            cost = self.remaining
            self.spent = self.total
        else:
            self.spent += cost
        self.entries.append(LedgerEntry(action=action, cost=cost))
        return cost


class Stage(str, Enum):
    SETTLE = "settle"
    IM = "im"
    BM = "bm"
    BL = "bl"
    RANDOM = "random"

class TraceEntry(BaseModel):
    seq: int
    stage: Stage
    action: str
    target: Optional[int] = None
    cost: float = 0.0
    lines_failed: List[int] = []
    nodes_failed: List[int] = []
    microgrids_islanded: List[int] = []

    def render(self) -> str:
        parts = [f"{self.seq:04d}", self.stage.value, self.action, f"cost={self.cost!r}"]
        if self.lines_failed:
            parts.append("lines=" + ",".join(str(i) for i in self.lines_failed))
        if self.nodes_failed:
            parts.append("nodes=" + ",".join(str(i) for i in self.nodes_failed))
        if self.microgrids_islanded:
            parts.append("islanded=" + ",".join(str(i) for i in self.microgrids_islanded))
        return " ".join(parts)


class NodeRole(str, Enum):
    ISLANDING = "islanding-critical"
    INTERNAL = "internal-critical"

class CriticalNode(BaseModel):
    bus: int
    role: NodeRole
    contribution: float


class PlanState(BaseModel):
    """Mutable context of one plan run, owned by a single planner call."""
    composed: ComposedGrid
    tariff: Tariff
    grid: GridCase
    ledger: BudgetLedger
    alpha: float = 1.0
    z: Dict[int, float] = {}
    priority: List[int] = []
    moving_avg: Dict[int, float] = {}
    failed_lines: List[int] = []
    failed_nodes: List[int] = []
    islanded: List[int] = []
    generator_attacks: List[GenPriceAttack] = []
    trace: List[TraceEntry] = []
    # raw w·Δz records, aggregated by critical_nodes
    contributions: List[CriticalNode] = []


class PlanResult(BaseModel):
    algorithm: str
    s1: List[int]
    s2: List[int]
    s3: List[int]
    total_node_failures: int
    ledger: BudgetLedger
    generator_attacks: List[GenPriceAttack] = []
    trace: List[TraceEntry] = []
    critical: List[CriticalNode] = []
