import itertools
from statistics import mean

import numpy as np
import pytest

from app.models.attack import BudgetLedger, NodeRole, Stage
from app.models.grid import ComposedGrid
from app.services.experiments import assign_capacities, build_scenario
from app.services.planner import (
    LEVELS,
    bl,
    bm,
    critical_nodes,
    im,
    islanding_potential,
    new_plan_state,
    pma,
    random_baseline,
)
from app.services.powerflow import solve
from app.services.pricing import default_tariff, demands_for
from app.services.topology import compose
from tests.conftest import make_grid, triangle, two_bus

TIE_MCB = 1.504355


def _plain(grid):
    return ComposedGrid(main=grid, merged=grid)


def test_ledger():
    ledger = BudgetLedger(total=1.0)
    assert ledger.can_afford(1.0)
    ledger.spent = 0.75
    assert ledger.remaining == pytest.approx(0.25)
    assert not ledger.can_afford(0.3)
    ledger.spent = 1.2
    assert ledger.remaining == 0.0


def test_ledger_never_overshoots():
    ledger = BudgetLedger(total=4.6)
    for _ in range(46):
        ledger.charge("step", 0.1)
    assert ledger.spent <= ledger.total
    ledger = BudgetLedger(total=1.0)
    assert ledger.charge("a", 0.7) == 0.7
    assert ledger.can_afford(0.3 + 1e-12)
    ledger.charge("b", 0.3 + 1e-12)
    assert ledger.spent == ledger.total
    assert sum(e.cost for e in ledger.entries) == pytest.approx(ledger.spent)


def test_islanding_potential(scenario):
    potential = islanding_potential(100, scenario.composed, scenario.tariff)
    assert potential == pytest.approx(1 / TIE_MCB, abs=1e-4)
    # line 1-2 sits on the main ring and cuts off nothing
    assert islanding_potential(1, scenario.composed, scenario.tariff) == 0.0


def test_im_without_budget(scenario):
    lines, isolated = im(scenario.composed, BudgetLedger(total=0.0), scenario.tariff)
    assert lines == []
    assert isolated == []


def test_im_isolates_both_microgrids(scenario):
    ledger = BudgetLedger(total=scenario.budget)
    lines, isolated = im(scenario.composed, ledger, scenario.tariff)
    assert sorted(isolated) == [1, 2]
    assert 100 in lines and 200 in lines
    assert ledger.spent == pytest.approx(2 * TIE_MCB, abs=1e-3)
    # equal potentials go to the lower line id
    assert [e.action for e in ledger.entries] == ["break line 100", "break line 200"]


def test_im_without_microgrids(ieee14):
    composed = assign_capacities(compose(ieee14, []))
    tariff = default_tariff(composed.merged)
    lines, isolated = im(composed, BudgetLedger(total=5.0), tariff)
    assert (lines, isolated) == ([], [])


def test_bl_without_budget(scenario):
    state = new_plan_state(scenario.composed, scenario.tariff, 0.0)
    assert bl(state, list(range(101, 110))) == []


def test_bl_cannot_beat_huge_capacities():
    grid = triangle()
    state = new_plan_state(_plain(grid), default_tariff(grid), 2.0)
    assert bl(state, [1, 2, 3]) == []
    assert state.ledger.spent == 0.0


def _true_best(grid, tariff, budget):
    best = 0
    for z2, z3 in itertools.product(LEVELS, repeat=2):
        if z2 + z3 > budget + 1e-12:
            continue
        _, sol = solve(grid, demands_for(tariff, {2: float(z2), 3: float(z3)}))
        best = max(best, sum(abs(sol.flows[br.id]) > br.capacity for br in grid.branches))
    return best


@pytest.mark.parametrize("budget", np.linspace(0.0, 1.2, 10))
def test_bl_finds_the_most_overloads(budget):
    grid = triangle((1.3, 1.2, 0.2))
    tariff = default_tariff(grid)
    state = new_plan_state(_plain(grid), tariff, float(budget))
    over = bl(state, [1, 2, 3])
    assert len(over) == _true_best(grid, tariff, budget)
    assert state.ledger.spent <= budget + 1e-12


def _enumerated_best(grid, tariff, budget):
    """Most overloads any 0.05-level attack within `budget` reaches; flows are linear in demand here."""
    loads = grid.load_buses()
    lines = [br for br in grid.branches if br.capacity is not None]
    d0 = demands_for(tariff)
    _, base = solve(grid, d0)
    shift = np.zeros((len(lines), len(loads)))
    for k, bus in enumerate(loads):
        bumped = dict(d0)
        bumped[bus] += 1.0
        _, moved = solve(grid, bumped)
        shift[:, k] = [moved.flows[br.id] - base.flows[br.id] for br in lines]

    zs = np.array(list(itertools.product(LEVELS, repeat=len(loads))))
    zs = zs[zs.sum(axis=1) <= budget + 1e-9]
    delta = np.column_stack([
        tariff.loads[bus].bill_target / (tariff.loads[bus].rate - zs[:, k] * tariff.loads[bus].max_rate_change) - d0[bus]
        for k, bus in enumerate(loads)
    ])
    flows = np.array([base.flows[br.id] for br in lines]) + delta @ shift.T
    u = np.array([br.capacity for br in lines])
    return int((np.abs(flows) > u).sum(axis=1).max())


@pytest.mark.parametrize("budget", np.linspace(0.02, 2.72, 10))
def test_bl_matches_enumeration_on_islanded_microgrid(ieee9, budget):
    grid = assign_capacities(ieee9, 5.0, 0.6)
    tariff = default_tariff(grid)
    state = new_plan_state(_plain(grid), tariff, float(budget))
    assert state.failed_lines == []
    over = bl(state, [b.id for b in grid.buses])
    assert len(over) == _enumerated_best(grid, tariff, float(budget))
    assert state.ledger.spent <= budget + 1e-9


def test_bm_skips_connected_microgrid(scenario):
    assert bm(scenario.composed, 1, BudgetLedger(total=scenario.budget), scenario.tariff) == []


def test_bm_needs_money_for_a_generator(scenario):
    state = new_plan_state(scenario.composed, scenario.tariff, 2 * TIE_MCB + 0.1)
    im(scenario.composed, state.ledger, scenario.tariff, state=state)
    assert 1 in state.islanded
    bm(scenario.composed, 1, state.ledger, scenario.tariff, state=state)
    assert not any(e.stage == Stage.BM for e in state.trace)
    assert state.generator_attacks == []
    assert state.ledger.spent <= state.ledger.total


def test_bm_cheapens_smallest_generator_first(scenario):
    state = new_plan_state(scenario.composed, scenario.tariff, scenario.budget)
    im(scenario.composed, state.ledger, scenario.tariff, state=state)
    bm(scenario.composed, 1, state.ledger, scenario.tariff, state=state)
    first = next(e for e in state.trace if e.stage == Stage.BM)
    assert first.target == 101
    assert 101 in state.priority
    assert state.generator_attacks[0].generator_id == 101
    assert state.ledger.spent <= scenario.budget + 1e-12


def _stub_microgrid(tie_capacity=0.5):
    """Main 1-2 feeding a two-load radial microgrid on bus 2. With the tie
    rated below the 2.0 import, the settle step islands the microgrid."""
    main = make_grid([(1, None), (2, 1.0)], [(1, 100.0)], [(1, 1, 2, 0.1, 3.5)], name="main")
    mg = make_grid(
        [(1, None), (2, 1.0), (3, 1.0)],
        [(1, 10.0)],
        [(1, 1, 2, 0.1, 1.5), (2, 1, 3, 0.1, 1.5)],
        name="stub",
    )
    composed = compose(main, [(2, mg)])
    composed.merged.branch(100).capacity = tie_capacity
    return composed, default_tariff(composed.merged, generator_cost=5.0)


def test_bm_spends_leftover_on_lines():
    composed, tariff = _stub_microgrid()
    state = new_plan_state(composed, tariff, 1.0)
    assert state.islanded == [1]
    # c^gu = 5 is out of reach, 0.7 lifts one load to 1/0.65 > 1.5
    assert bm(composed, 1, state.ledger, tariff, state=state) == [103]
    assert state.generator_attacks == []
    assert [e.stage for e in state.trace] == [Stage.SETTLE, Stage.BL]
    assert state.ledger.spent == pytest.approx(0.7)


def test_pma_uses_budget_until_nothing_is_affordable():
    composed, tariff = _stub_microgrid()
    result = pma(composed, 2.0, tariff)
    assert result.s2 == [1]
    assert result.s3 == [102, 103]
    assert sorted(result.s1) == [100, 101, 102]
    assert result.total_node_failures == 2
    assert result.ledger.spent == pytest.approx(1.4)


def test_pma_attacks_the_main_grid_without_microgrids():
    grid = two_bus(capacity=1.2)
    result = pma(_plain(grid), 1.0, default_tariff(grid))
    # z = 0.35 is the first level with 1/(1 - z/2) > 1.2
    assert result.s1 == [1]
    assert result.total_node_failures == 1
    assert result.ledger.spent == pytest.approx(0.35)
    assert [e.stage for e in result.trace] == [Stage.SETTLE, Stage.BL]


def test_pma_without_budget(scenario):
    result = pma(scenario.composed, 0.0, scenario.tariff)
    assert result.s1 == []
    assert result.s2 == []
    assert result.s3 == []
    assert result.total_node_failures == 0
    assert result.ledger.spent == 0.0
    assert [e.stage for e in result.trace] == [Stage.SETTLE]


def test_pma_default(scenario):
    result = pma(scenario.composed, scenario.budget, scenario.tariff)
    assert result.s2 == [1, 2]
    assert 107 in result.s3
    assert result.generator_attacks
    assert all(a.cost == 1.0 for a in result.generator_attacks)
    assert result.ledger.spent <= scenario.budget + 1e-12


@pytest.mark.parametrize("resource", [0.35, 0.65])
def test_pma_stays_within_larger_budgets(default_config, resource):
    scenario = build_scenario(default_config, resource_fraction=resource)
    result = pma(scenario.composed, scenario.budget, scenario.tariff)
    assert result.ledger.spent <= scenario.budget + 1e-12
    assert result.s2 == [1, 2]


def test_pma_trace_order(scenario):
    result = pma(scenario.composed, scenario.budget, scenario.tariff)
    stages = [e.stage for e in result.trace]
    assert stages[0] == Stage.SETTLE
    assert stages.index(Stage.IM) < stages.index(Stage.BM)
    for k, stage in enumerate(stages):
        if stage == Stage.BL:
            assert Stage.BM in stages[:k]
    assert [e.seq for e in result.trace] == list(range(len(result.trace)))
    # both ties cost the same, line 100 goes first
    assert next(e for e in result.trace if e.stage == Stage.IM).target == 100


def test_pma_metrics_agree(scenario):
    result = pma(scenario.composed, scenario.budget, scenario.tariff)
    composed = scenario.composed
    mg_loads = {b for mg in composed.microgrids for b in composed.microgrid_load_buses(mg.microgrid_id)}
    assert set(result.s3) <= mg_loads
    assert result.total_node_failures >= len(result.s3)
    assert sum(e.cost for e in result.trace) == pytest.approx(result.ledger.spent)
    assert len(set(result.s1)) == len(result.s1)
    assert sorted(l for e in result.trace for l in e.lines_failed) == sorted(result.s1)


def test_islanding_grows_with_resource(default_config):
    counts = []
    for resource in (0.0, 0.1, 0.2):
        scenario = build_scenario(default_config, resource_fraction=resource)
        counts.append(len(pma(scenario.composed, scenario.budget, scenario.tariff).s2))
    # 2.3 buys one tie line, 4.6 buys both
    assert counts[0] == 0
    assert counts[1] >= 1
    assert counts[2] == 2
    assert counts == sorted(counts)


def test_random_without_budget(scenario):
    result = random_baseline(scenario.composed, 0.0, scenario.tariff, seed=1)
    assert result.ledger.spent == 0.0
    assert result.s1 == []


def test_random_is_seeded(scenario):
    a = random_baseline(scenario.composed, scenario.budget, scenario.tariff, seed=7)
    b = random_baseline(scenario.composed, scenario.budget, scenario.tariff, seed=7)
    assert (a.s1, a.s2, a.s3) == (b.s1, b.s2, b.s3)
    assert a.ledger.spent == b.ledger.spent
    assert a.ledger.spent <= scenario.budget + 1e-12
    assert all(e.stage in (Stage.SETTLE, Stage.RANDOM) for e in a.trace)


def test_random_rarely_islands(scenario):
    islanded = [
        len(random_baseline(scenario.composed, scenario.budget, scenario.tariff, seed=s).s2)
        for s in range(20)
    ]
    assert mean(islanded) < 2


def test_critical_nodes_without_budget(scenario):
    assert critical_nodes(scenario.composed, 0.0, scenario.tariff) == []


def test_critical_nodes_default(scenario):
    nodes = critical_nodes(scenario.composed, scenario.budget, scenario.tariff)
    islanding = {n.bus for n in nodes if n.role == NodeRole.ISLANDING}
    assert {109, 209} <= islanding
    contributions = [n.contribution for n in nodes]
    assert contributions == sorted(contributions, reverse=True)
    assert sum(contributions) <= scenario.budget + 1e-9


def test_critical_nodes_without_price_lever(scenario):
    grid = scenario.composed.merged
    frozen = default_tariff(grid, {b: {"max_rate_change": 0.0} for b in grid.load_buses()})
    assert critical_nodes(scenario.composed, scenario.budget, frozen) == []

