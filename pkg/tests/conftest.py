import pytest

from app.models.experiment import ExperimentConfig
from app.models.grid import Branch, Bus, BusKind, Generator, GridCase
from app.services.case_parser import load_case
from app.services.experiments import build_scenario

BIG = 1e12


def make_grid(buses, gens, branches, name="test"):
    """buses: (id, demand) with demand None for a generator bus; gens: (bus, p_max);
    branches: (id, from, to, x, capacity)."""
    bus_models = []
    gen_buses = {b for b, _ in gens}
    for bus_id, demand in buses:
        if demand:
            kind = BusKind.LOAD
        elif bus_id in gen_buses:
            kind = BusKind.GENERATOR
        else:
            kind = BusKind.JUNCTION
        bus_models.append(Bus(id=bus_id, kind=kind, nominal_demand=demand or 0.0))
    return GridCase(
        name=name,
        buses=bus_models,
        generators=[Generator(id=i + 1, bus=b, p_max=p) for i, (b, p) in enumerate(gens)],
        branches=[Branch(id=i, from_bus=f, to_bus=t, reactance=x, capacity=c) for i, f, t, x, c in branches],
    )


def two_bus(capacity=1.2, reversed_branch=False):
    ends = (2, 1) if reversed_branch else (1, 2)
    return make_grid([(1, None), (2, 1.0)], [(1, 10.0)], [(1, *ends, 0.1, capacity)])


def triangle(caps=(BIG, BIG, BIG)):
    """Gen 2.0 at bus 1, loads 1.0 at buses 2 and 3, x = 0.1 everywhere.
    Branch ids 12, 13, 23 name their endpoints."""
    return make_grid(
        [(1, None), (2, 1.0), (3, 1.0)],
        [(1, 4.0)],
        [(12, 1, 2, 0.1, caps[0]), (13, 1, 3, 0.1, caps[1]), (23, 2, 3, 0.1, caps[2])],
    )


@pytest.fixture
def ieee14():
    return load_case("ieee14")


@pytest.fixture
def ieee9():
    return load_case("ieee9")


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig(workers=1)


@pytest.fixture(scope="session")
def scenario(default_config):
    """14-bus grid with 9-bus microgrids on buses 13 and 14, 60% reduction, 20% resource."""
    return build_scenario(default_config)
