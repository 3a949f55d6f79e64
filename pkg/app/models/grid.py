from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict
from enum import Enum


class BusKind(str, Enum):
    GENERATOR = "generator"
    LOAD = "load"
    JUNCTION = "junction"

class Bus(BaseModel):
    id: int
    kind: BusKind
    nominal_demand: float = Field(0.0, ge=0)

class Generator(BaseModel):
    id: int
    bus: int
    p_min: float = Field(0.0, ge=0)
    p_max: float = Field(..., ge=0)
    output: float = 0.0
    # microgrid-internal units, idle while a primary unit shares the island
    standby: bool = False

class Branch(BaseModel):
    id: int
    from_bus: int
    to_bus: int
    reactance: float = Field(..., gt=0)
    capacity: Optional[float] = Field(None, gt=0)
    alive: bool = True


class GridCase(BaseModel):
    """Static network description: buses, generators and branches."""
    name: str = "case"
    buses: List[Bus]
    generators: List[Generator] = []
    branches: List[Branch] = []

    @model_validator(mode="after")
    def check_references(self):
        if not self.buses:
            raise ValueError("case has no buses")
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus id")
        known = set(ids)
        for bus in self.buses:
            if bus.kind != BusKind.LOAD and bus.nominal_demand != 0:
                raise ValueError(f"bus {bus.id}: demand on a {bus.kind.value} bus")
        gen_ids = [g.id for g in self.generators]
        if len(set(gen_ids)) != len(gen_ids):
            raise ValueError("duplicate generator id")
        for gen in self.generators:
            if gen.bus not in known:
                raise ValueError(f"generator {gen.id} references missing bus {gen.bus}")
            if gen.p_min > gen.p_max:
                raise ValueError(f"generator {gen.id}: p_min above p_max")
        branch_ids = [br.id for br in self.branches]
        if len(set(branch_ids)) != len(branch_ids):
            raise ValueError("duplicate branch id")
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise ValueError(f"branch {br.id} references a missing bus")
            if br.from_bus == br.to_bus:
                raise ValueError(f"branch {br.id} is a self loop")
        if not self.generators and any(b.nominal_demand > 0 for b in self.buses):
            raise ValueError("case has demand but no generator")
        return self

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def branch(self, branch_id: int) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(branch_id)

    def generator(self, gen_id: int) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(gen_id)

    def load_buses(self) -> List[int]:
        return sorted(b.id for b in self.buses if b.kind == BusKind.LOAD)

    def alive_branches(self) -> List[Branch]:
        return [br for br in self.branches if br.alive]

    def nominal_demands(self) -> Dict[int, float]:
        return {b.id: b.nominal_demand for b in self.buses if b.kind == BusKind.LOAD}

    def total_demand(self) -> float:
        return sum(b.nominal_demand for b in self.buses)


class MicrogridSpec(BaseModel):
    microgrid_id: int
    host_bus: int
    member_buses: List[int]
    tie_lines: List[int]
    internal_case: GridCase

class ComposedGrid(BaseModel):
    main: GridCase
    microgrids: List[MicrogridSpec] = []
    merged: GridCase

    def microgrid(self, microgrid_id: int) -> MicrogridSpec:
        for mg in self.microgrids:
            if mg.microgrid_id == microgrid_id:
                return mg
        raise KeyError(microgrid_id)

    def tie_line_ids(self) -> List[int]:
        return sorted(t for mg in self.microgrids for t in mg.tie_lines)

    def microgrid_load_buses(self, microgrid_id: int) -> List[int]:
        members = set(self.microgrid(microgrid_id).member_buses)
        return [b for b in self.merged.load_buses() if b in members]

    def microgrid_generators(self, microgrid_id: int) -> List[Generator]:
        members = set(self.microgrid(microgrid_id).member_buses)
        return [g for g in self.merged.generators if g.bus in members]
