import numpy as np
import pytest

from app.services.topology import bridge_lines, compose, fed_buses, islanded_microgrids, islands
from app.utils.exceptions import TopologyException
from tests.conftest import make_grid


@pytest.fixture
def composed(ieee14, ieee9):
    return compose(ieee14, [(13, ieee9), (14, ieee9)])


def _kill(grid, ids):
    g = grid.model_copy(deep=True)
    for br in g.branches:
        if br.id in ids:
            br.alive = False
    return g


def test_compose_default(composed):
    merged = composed.merged
    assert len(merged.buses) == 32
    assert len(composed.microgrids) == 2
    assert composed.tie_line_ids() == [100, 200]

    tie1, tie2 = merged.branch(100), merged.branch(200)
    assert (tie1.from_bus, tie1.to_bus) == (13, 101)
    assert (tie2.from_bus, tie2.to_bus) == (14, 201)
    assert tie1.reactance == 0.01
    assert tie1.capacity == pytest.approx(1.5 * 6.75)


def test_compose_offsets_and_standby(composed):
    mg1 = composed.microgrid(1)
    assert mg1.member_buses == list(range(101, 110))
    assert mg1.host_bus == 13
    assert [g.id for g in composed.microgrid_generators(2)] == [201, 202, 203]
    gens = composed.microgrid_generators(1) + composed.microgrid_generators(2)
    assert sorted(g.id for g in gens) == [101, 102, 103, 201, 202, 203]
    assert all(g.standby for g in gens)
    assert not any(g.standby for g in composed.merged.generators if g.bus <= 14)
    assert composed.microgrid_load_buses(2) == [205, 207, 209]


def test_compose_without_attachments(ieee14):
    composed = compose(ieee14, [])
    assert composed.microgrids == []
    assert composed.merged == ieee14


def test_compose_missing_host(ieee14, ieee9):
    with pytest.raises(TopologyException):
        compose(ieee14, [(99, ieee9)])


def test_compose_needs_bus_one(ieee14, ieee9):
    shifted = ieee9.model_copy(deep=True)
    for b in shifted.buses:
        b.id += 1
    for g in shifted.generators:
        g.bus += 1
    for br in shifted.branches:
        br.from_bus += 1
        br.to_bus += 1
    with pytest.raises(TopologyException):
        compose(ieee14, [(13, shifted)])


def test_islands_intact(ieee14):
    comps = islands(ieee14)
    assert len(comps) == 1
    assert comps[0] == list(range(1, 15))


def test_islands_all_dead(ieee14):
    dead = _kill(ieee14, [br.id for br in ieee14.branches])
    assert islands(dead) == [[i] for i in range(1, 15)]


def test_islands_with_ties_open(composed):
    comps = islands(_kill(composed.merged, [100, 200]))
    assert [len(c) for c in comps] == [14, 9, 9]
    assert comps[1] == composed.microgrid(1).member_buses
    assert comps[2] == composed.microgrid(2).member_buses


@pytest.mark.parametrize("mg_id", [1, 2])
def test_tie_removal_isolates_members(composed, mg_id):
    mg = composed.microgrid(mg_id)
    comps = islands(_kill(composed.merged, mg.tie_lines))
    assert mg.member_buses in comps


@pytest.mark.parametrize("seed", range(10))
def test_islands_partition(composed, seed):
    rng = np.random.default_rng(seed)
    ids = [br.id for br in composed.merged.branches if rng.random() < 0.4]
    comps = islands(_kill(composed.merged, ids))
    flat = [b for c in comps for b in c]
    assert sorted(flat) == sorted(b.id for b in composed.merged.buses)
    assert len(flat) == len(set(flat))


def test_bridge_lines(composed):
    bridges = bridge_lines(composed.merged)
    assert 100 in bridges and 200 in bridges
    # main ring line 1-2 has parallel paths
    assert 1 not in bridges
    # bus 8 hangs off bus 7 only
    assert 14 in bridges


def test_parallel_branches_are_not_bridges():
    grid = make_grid([(1, None), (2, 1.0)], [(1, 5.0)], [(1, 1, 2, 0.1, None), (2, 2, 1, 0.2, None)])
    assert bridge_lines(grid) == []


def test_islanded_microgrids(composed):
    assert islanded_microgrids(composed, composed.merged) == []
    assert islanded_microgrids(composed, composed.merged, skip=[100]) == [1]
    assert islanded_microgrids(composed, _kill(composed.merged, [100, 200])) == [1, 2]


def test_fed_buses(composed):
    assert fed_buses(composed.merged) == {b.id for b in composed.merged.buses}
    fed = fed_buses(composed.merged, skip=[100])
    assert fed.isdisjoint(range(101, 110))
    assert set(range(1, 15)) | set(range(201, 210)) == fed
