from collections import Counter
from typing import List, Set, Sequence, Tuple, Iterable
import logging

import networkx as nx

from app.models.grid import Bus, Branch, ComposedGrid, Generator, GridCase, MicrogridSpec
from app.utils.exceptions import TopologyException

logger = logging.getLogger(__name__)

TIE_REACTANCE = 0.01
TIE_RATING_FACTOR = 1.5


def _graph(grid: GridCase, skip: Iterable[int] = ()) -> nx.Graph:
    skip = set(skip)
    g = nx.Graph()
    g.add_nodes_from(b.id for b in grid.buses)
    g.add_edges_from(
        (br.from_bus, br.to_bus) for br in grid.branches if br.alive and br.id not in skip
    )
    return g


def islands(grid: GridCase, skip: Iterable[int] = ()) -> List[List[int]]:
    """Connected components over alive branches, each sorted, ordered by lowest id."""
    comps = [sorted(c) for c in nx.connected_components(_graph(grid, skip))]
    return sorted(comps, key=lambda c: c[0])


def bridge_lines(grid: GridCase) -> List[int]:
    """Alive branches whose loss splits their component."""
    pairs = Counter(
        frozenset((br.from_bus, br.to_bus)) for br in grid.branches if br.alive
    )
    bridges = {frozenset(e) for e in nx.bridges(_graph(grid))}
    return sorted(
        br.id for br in grid.branches
        if br.alive
        and frozenset((br.from_bus, br.to_bus)) in bridges
        and pairs[frozenset((br.from_bus, br.to_bus))] == 1
    )


def primary_buses(grid: GridCase) -> Set[int]:
    return {g.bus for g in grid.generators if not g.standby and g.p_max > 0}


def fed_buses(grid: GridCase, skip: Iterable[int] = ()) -> Set[int]:
    """Buses still connected to at least one main-grid generator."""
    primaries = primary_buses(grid)
    fed: Set[int] = set()
    for comp in islands(grid, skip):
        if primaries.intersection(comp):
            fed.update(comp)
    return fed


def islanded_microgrids(composed: ComposedGrid, grid: GridCase, skip: Iterable[int] = ()) -> List[int]:
    """Microgrids whose loads no longer reach any main-grid generator."""
    fed = fed_buses(grid, skip)
    result = []
    for mg in composed.microgrids:
        loads = composed.microgrid_load_buses(mg.microgrid_id)
        if loads and not fed.intersection(loads):
            result.append(mg.microgrid_id)
    return result


def compose(main: GridCase, attachments: Sequence[Tuple[int, GridCase]]) -> ComposedGrid:
    main_ids = {b.id for b in main.buses}
    buses = [b.model_copy() for b in main.buses]
    generators = [g.model_copy() for g in main.generators]
    branches = [br.model_copy() for br in main.branches]
    microgrids: List[MicrogridSpec] = []

    for idx, (host, case) in enumerate(attachments):
        if host not in main_ids:
            raise TopologyException(f"host bus {host} does not exist in {main.name}")
        if not any(b.id == 1 for b in case.buses):
            raise TopologyException(f"attached case {case.name} has no bus 1 for the tie line")

        offset = 100 * (idx + 1)
        used_buses = {b.id for b in buses}
        used_branches = {br.id for br in branches}
        used_gens = {g.id for g in generators}

        members = []
        for b in case.buses:
            new_id = b.id + offset
            if new_id in used_buses:
                raise TopologyException(f"bus id {new_id} collides after offset {offset}")
            buses.append(Bus(id=new_id, kind=b.kind, nominal_demand=b.nominal_demand))
            members.append(new_id)

        for g in case.generators:
            new_id = g.id + offset
            if new_id in used_gens:
                raise TopologyException(f"generator id {new_id} collides after offset {offset}")
            generators.append(Generator(
                id=new_id, bus=g.bus + offset, p_min=g.p_min, p_max=g.p_max, standby=True
            ))

        for br in case.branches:
            new_id = br.id + offset
            if new_id in used_branches:
                raise TopologyException(f"branch id {new_id} collides after offset {offset}")
            branches.append(br.model_copy(update={
                "id": new_id, "from_bus": br.from_bus + offset, "to_bus": br.to_bus + offset,
            }))

        tie_id = offset
        if tie_id in used_branches or any(br.id == tie_id for br in branches):
            raise TopologyException(f"tie line id {tie_id} collides")
        branches.append(Branch(
            id=tie_id,
            from_bus=host,
            to_bus=1 + offset,
            reactance=TIE_REACTANCE,
            capacity=TIE_RATING_FACTOR * case.total_demand(),
        ))

        microgrids.append(MicrogridSpec(
            microgrid_id=idx + 1,
            host_bus=host,
            member_buses=sorted(members),
            tie_lines=[tie_id],
            internal_case=case,
        ))
        logger.info(f"Attached {case.name} at bus {host} as microgrid {idx + 1} (tie {tie_id})")

    name = "+".join([main.name] + [case.name for _, case in attachments])
    merged = GridCase(name=name, buses=buses, generators=generators, branches=branches)
    return ComposedGrid(main=main, microgrids=microgrids, merged=merged)
