"""
Attack planners: islanding (IM), line breaking (BL), microgrid breaking (BM),
the combined price modification attack (PMA) and a blind random baseline.

Every action goes through `_apply`, which charges the shared ledger and then
lets the cascade decide what actually fails.
"""
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union
import logging

import numpy as np

from app.config.settings import settings
from app.models.attack import (
    LEDGER_TOL,
    BudgetLedger,
    CriticalNode,
    GenPriceAttack,
    NodeRole,
    PlanResult,
    PlanState,
    Stage,
    Tariff,
    TraceEntry,
)
from app.models.flow import CascadeOutcome
from app.models.grid import ComposedGrid
from app.services.cascade import run_cascade
from app.services.powerflow import sensitivities, solve
from app.services.pricing import demands_for, mcb
from app.services.topology import bridge_lines, fed_buses, islanded_microgrids, islands
from app.utils.exceptions import BudgetExceededException

logger = logging.getLogger(__name__)

LEVELS = np.round(np.arange(21) * 0.05, 10)
RANDOM_STEPS = np.round(np.arange(1, 11) * 0.1, 10)
BL_RESTARTS = 3
RANDOM_MAX_MISSES = 200


def new_plan_state(
    composed: ComposedGrid,
    tariff: Tariff,
    budget: Union[float, BudgetLedger],
    alpha: float = 1.0,
) -> PlanState:
    """Fresh plan context. The unattacked grid is settled first so base overloads count."""
    ledger = budget if isinstance(budget, BudgetLedger) else BudgetLedger(total=budget)
    state = PlanState(
        composed=composed,
        tariff=tariff,
        grid=composed.merged.model_copy(deep=True),
        ledger=ledger,
        alpha=alpha,
        z={bus: 0.0 for bus in tariff.loads},
    )
    _apply(state, Stage.SETTLE, "settle base state")
    return state


def _apply(
    state: PlanState,
    stage: Stage,
    action: str,
    target: Optional[int] = None,
    cost: float = 0.0,
    z: Optional[Dict[int, float]] = None,
    generator: Optional[int] = None,
) -> Tuple[CascadeOutcome, List[int]]:
    ledger = state.ledger
    if cost > 0:
        if not ledger.can_afford(cost):
            raise BudgetExceededException(f"{action} costs {cost}, only {ledger.remaining} left")
        cost = ledger.charge(action, cost)
    if z is not None:
        state.z.update(z)
    if generator is not None:
        state.priority.append(generator)

    outcome = run_cascade(
        state.grid,
        demands_for(state.tariff, state.z),
        alpha=state.alpha,
        priority=state.priority,
        memory=state.moving_avg,
    )
    state.grid = outcome.final
    state.moving_avg = outcome.moving_avg
    state.failed_lines.extend(outcome.s1)
    known = set(state.failed_nodes)
    new_nodes = [b for b in outcome.s2 if b not in known]
    state.failed_nodes.extend(new_nodes)

    islanded = islanded_microgrids(state.composed, state.grid)
    newly = [m for m in islanded if m not in state.islanded]
    state.islanded = sorted(set(state.islanded) | set(islanded))

    state.trace.append(TraceEntry(
        seq=len(state.trace),
        stage=stage,
        action=action,
        target=target,
        cost=cost,
        lines_failed=list(outcome.s1),
        nodes_failed=new_nodes,
        microgrids_islanded=newly,
    ))
    if stage != Stage.SETTLE or outcome.s1:
        logger.info(f"[{stage.value}] {action}: cost {cost:.4f}, lines {outcome.s1}, nodes {new_nodes}, islanded {newly}")
    return outcome, newly


def _record(state: PlanState, z_new: Dict[int, float], role: NodeRole):
    for bus, value in z_new.items():
        dz = value - state.z.get(bus, 0.0)
        if dz > 1e-12:
            weight = state.tariff.loads[bus].cost_weight
            state.contributions.append(CriticalNode(bus=bus, role=role, contribution=weight * dz))


def _cut_count(state: PlanState, line: int) -> int:
    after = islanded_microgrids(state.composed, state.grid, skip=[line])
    return len([m for m in after if m not in state.islanded])


def islanding_potential(
    line: int,
    composed: ComposedGrid,
    tariff: Tariff,
    state: Optional[PlanState] = None,
) -> float:
    """Microgrids cut off per unit of MCB cost if `line` fails."""
    state = state or new_plan_state(composed, tariff, 0.0)
    count = _cut_count(state, line)
    if count == 0:
        return 0.0
    res = mcb(line, state.grid, tariff, base=state.z, priority=state.priority)
    if not res.feasible:
        return 0.0
    if res.cost <= 0:
        return float("inf")
    return count / res.cost


def _im(state: PlanState) -> Tuple[List[int], List[int]]:
    lines_failed: List[int] = []
    isolated: List[int] = []
    ledger = state.ledger

    while True:
        pending = [mg for mg in state.composed.microgrids if mg.microgrid_id not in state.islanded]
        if not pending or ledger.remaining <= 0:
            break

        ranked = []
        for line in bridge_lines(state.grid):
            count = _cut_count(state, line)
            if count == 0:
                continue
            res = mcb(line, state.grid, state.tariff, base=state.z, priority=state.priority)
            if not res.feasible:
                continue
            potential = float("inf") if res.cost <= 0 else count / res.cost
            ranked.append((potential, line, res))

        # most microgrids per unit cost first; potentials agreeing to 1e-9 tie on line id
        ranked.sort(key=lambda c: (-round(c[0], 9), c[1]))
        choice = next((c for c in ranked if ledger.can_afford(c[2].cost)), None)
        if choice is None:
            break

        potential, line, res = choice
        _record(state, res.z.z, NodeRole.ISLANDING)
        outcome, newly = _apply(state, Stage.IM, f"break line {line}", line, res.cost, z=res.z.z)
        lines_failed.extend(outcome.s1)
        isolated.extend(newly)
        if state.grid.branch(line).alive:
            logger.warning(f"line {line} survived its MCB attack, stopping IM")
            break

    return lines_failed, isolated


def im(
    composed: ComposedGrid,
    ledger: BudgetLedger,
    tariff: Tariff,
    state: Optional[PlanState] = None,
    alpha: float = 1.0,
) -> Tuple[List[int], List[int]]:
    """Islands microgrids by overloading their cheapest cut lines. Returns (failed lines, islanded ids)."""
    state = state or new_plan_state(composed, tariff, ledger, alpha)
    return _im(state)


def _model_eval(z: np.ndarray, ctx: dict) -> Tuple[np.ndarray, np.ndarray]:
    """Overload counts and costs of candidate rows under the linear flow model."""
    demand = ctx["cap"] / (ctx["rate"] - z * ctx["rho"])
    flows = ctx["f0"] + (demand - ctx["d0"]) @ ctx["M"].T
    counts = (np.abs(flows) > ctx["u"]).sum(axis=1)
    costs = (z - ctx["z0"]) @ ctx["w"]
    return counts, costs


def _enumerate(levels: List[np.ndarray], ctx: dict, remaining: float) -> Optional[np.ndarray]:
    z = np.zeros((1, 0))
    spent = np.zeros(1)
    for j, lv in enumerate(levels):
        step = ctx["w"][j] * (lv - ctx["z0"][j])
        grown = (spent[:, None] + step[None, :]).ravel()
        keep = grown <= remaining + LEDGER_TOL
        z = np.hstack([np.repeat(z, len(lv), axis=0), np.tile(lv, len(spent))[:, None]])[keep]
        spent = grown[keep]
        if len(spent) > settings.GRIDSTORM_BL_MAX_COMBINATIONS:
            return None
    return z


def _greedy(levels: List[np.ndarray], ctx: dict, remaining: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = len(levels)
    z0 = ctx["z0"]
    starts = [z0.copy()]
    for _ in range(BL_RESTARTS):
        point = z0.copy()
        budget = remaining
        for j in rng.permutation(n):
            options = [lv for lv in levels[j] if ctx["w"][j] * (lv - z0[j]) <= budget + LEDGER_TOL]
            point[j] = options[rng.integers(len(options))]
            budget -= ctx["w"][j] * (point[j] - z0[j])
        starts.append(point)

    ends = []
    for point in starts:
        counts, costs = _model_eval(point[None, :], ctx)
        key = (int(counts[0]), -float(costs[0]))
        improved = True
        while improved:
            improved = False
            for j in range(n):
                trial = np.repeat(point[None, :], len(levels[j]), axis=0)
                trial[:, j] = levels[j]
                t_counts, t_costs = _model_eval(trial, ctx)
                for k in range(len(trial)):
                    if t_costs[k] > remaining + LEDGER_TOL:
                        continue
                    cand = (int(t_counts[k]), -float(t_costs[k]))
                    if cand > key:
                        key, point, improved = cand, trial[k].copy(), True
        ends.append(point)
    return np.array(ends)


def _bl(state: PlanState, island: Sequence[int]) -> List[int]:
    tariff = state.tariff
    members = set(island)
    failed = set(state.failed_nodes)
    loads = [b for b in sorted(island) if b in tariff.loads and b not in failed]
    remaining = state.ledger.remaining
    if not loads or remaining <= 0:
        return []

    grid = state.grid
    lines = [
        br for br in grid.alive_branches()
        if br.capacity is not None and br.from_bus in members and br.to_bus in members
    ]
    if not lines:
        return []

    d, sol = solve(grid, demands_for(tariff, state.z), state.priority)
    sens = sensitivities(grid, d)
    rows = [sens.branch_ids.index(br.id) for br in lines]
    cols = [sens.load_ids.index(b) for b in loads]

    params = [tariff.loads[b] for b in loads]
    ctx = {
        "M": sens.values[np.ix_(rows, cols)],
        "f0": np.array([sol.flows[br.id] for br in lines]),
        "u": np.array([br.capacity for br in lines]),
        "z0": np.array([state.z[b] for b in loads]),
        "w": np.array([p.cost_weight for p in params]),
        "cap": np.array([(1.0 + p.sensitivity) * p.bill_target for p in params]),
        "rate": np.array([p.rate for p in params]),
        "rho": np.array([p.max_rate_change for p in params]),
    }
    ctx["d0"] = ctx["cap"] / (ctx["rate"] - ctx["z0"] * ctx["rho"])

    levels = []
    for j, p in enumerate(params):
        above = LEVELS[LEVELS > ctx["z0"][j] + 1e-12] if p.max_rate_change > 0 else np.array([])
        levels.append(np.concatenate([[ctx["z0"][j]], above]))

    candidates = None
    if len(loads) <= settings.GRIDSTORM_BL_EXHAUSTIVE_MAX_LOADS:
        candidates = _enumerate(levels, ctx, remaining)
        if candidates is None:
            logger.warning(f"bl enumeration over {len(loads)} loads too large, falling back to greedy search")
    if candidates is None:
        candidates = _greedy(levels, ctx, remaining, seed=len(state.trace))

    counts, costs = _model_eval(candidates, ctx)
    keys = [candidates[:, j] for j in reversed(range(len(loads)))] + [costs, -counts]
    order = np.lexsort(keys)[: settings.GRIDSTORM_BL_VALIDATE_TOP]

    # the model proposes, the real solve decides
    best = None
    for idx in order:
        z_try = dict(state.z)
        z_try.update({b: float(v) for b, v in zip(loads, candidates[idx])})
        _, true_sol = solve(grid, demands_for(tariff, z_try), state.priority)
        over = [br.id for br in lines if abs(true_sol.flows[br.id]) > br.capacity]
        if int(counts[idx]) != len(over):
            logger.warning(f"bl model predicted {int(counts[idx])} overloads, real solve gives {len(over)}")
        if best is None or len(over) > len(best[1]):
            best = (idx, over)

    idx, over = best
    if not over:
        return []

    z_new = {b: float(v) for b, v in zip(loads, candidates[idx]) if v > state.z[b] + 1e-12}
    _record(state, z_new, NodeRole.INTERNAL)
    _apply(state, Stage.BL, f"overload {len(over)} lines near bus {min(members)}", min(members), float(costs[idx]), z=z_new)
    return over


def bl(state: PlanState, island: Sequence[int]) -> List[int]:
    """Maximizes overloaded lines inside `island` with the remaining budget of `state.ledger`."""
    return _bl(state, island)


def _drain(state: PlanState, scope: Set[int]) -> None:
    """Runs bl on the live islands inside `scope` until no affordable overload is left."""
    while state.ledger.remaining > LEDGER_TOL:
        for comp in islands(state.grid):
            part = [b for b in comp if b in scope]
            if part and _bl(state, part):
                break
        else:
            return


def _bm(state: PlanState, microgrid_id: int) -> List[int]:
    composed = state.composed
    if microgrid_id not in state.islanded:
        return []
    members = set(composed.microgrid(microgrid_id).member_buses)
    loads = composed.microgrid_load_buses(microgrid_id)
    before = set(state.failed_nodes)
    if before.issuperset(loads):
        return []

    gens = sorted(
        (g for g in composed.microgrid_generators(microgrid_id) if g.p_max > 0 and g.id not in state.priority),
        key=lambda g: (g.p_max, g.id),
    )
    for gen in gens:
        if set(state.failed_nodes).issuperset(loads):
            break
        cost = state.tariff.generator_costs.get(gen.id)
        if cost is None:
            continue
        if not state.ledger.can_afford(cost):
            break
        comp = next(c for c in islands(state.grid) if gen.bus in c)
        if not any(b in loads and b not in state.failed_nodes for b in comp):
            continue

        _apply(state, Stage.BM, f"cheapen generator {gen.id}", gen.id, cost, generator=gen.id)
        state.generator_attacks.append(GenPriceAttack(generator_id=gen.id, cost=cost))
        comp = next(c for c in islands(state.grid) if gen.bus in c)
        _bl(state, comp)

    # money below the next c^gu still buys overloads
    _drain(state, members)
    return sorted(b for b in state.failed_nodes if b in loads and b not in before)


def bm(
    composed: ComposedGrid,
    microgrid_id: int,
    ledger: BudgetLedger,
    tariff: Tariff,
    state: Optional[PlanState] = None,
    alpha: float = 1.0,
) -> List[int]:
    """Breaks an islanded microgrid: cheapen its smallest generators, then overload lines."""
    state = state or new_plan_state(composed, tariff, ledger, alpha)
    return _bm(state, microgrid_id)


def _aggregate(records: Sequence[CriticalNode]) -> List[CriticalNode]:
    totals: Dict[Tuple[int, NodeRole], float] = defaultdict(float)
    for rec in records:
        totals[(rec.bus, rec.role)] += rec.contribution
    nodes = [CriticalNode(bus=bus, role=role, contribution=c) for (bus, role), c in totals.items()]
    return sorted(nodes, key=lambda n: (-n.contribution, n.bus, n.role.value))


def _result(algorithm: str, state: PlanState) -> PlanResult:
    mg_loads = {
        b for mg in state.composed.microgrids for b in state.composed.microgrid_load_buses(mg.microgrid_id)
    }
    return PlanResult(
        algorithm=algorithm,
        s1=list(state.failed_lines),
        s2=sorted(state.islanded),
        s3=sorted(b for b in state.failed_nodes if b in mg_loads),
        total_node_failures=len(state.failed_nodes),
        ledger=state.ledger,
        generator_attacks=state.generator_attacks,
        trace=state.trace,
        critical=_aggregate(state.contributions),
    )


def pma(composed: ComposedGrid, budget: float, tariff: Tariff, alpha: float = 1.0) -> PlanResult:
    """
    Price modification attack: IM, then BM on every islanded microgrid, over
    and over while that still spends money. Whatever the microgrids cannot
    absorb goes into bl on the part of the grid the main generators still feed.
    """
    state = new_plan_state(composed, tariff, budget, alpha)
    while True:
        spent = state.ledger.spent
        _im(state)
        for mg_id in list(state.islanded):
            _bm(state, mg_id)
        if state.ledger.spent > spent:
            continue
        _drain(state, fed_buses(state.grid))
        if state.ledger.spent <= spent:
            break

    result = _result("pma", state)
    logger.info(
        f"pma: spent {result.ledger.spent:.4f}/{budget:.4f}, islanded {result.s2}, "
        f"{len(result.s3)} microgrid nodes, {result.total_node_failures} nodes failed"
    )
    return result


def random_baseline(
    composed: ComposedGrid,
    budget: float,
    tariff: Tariff,
    seed: int,
    alpha: float = 1.0,
) -> PlanResult:
    """Blind attacker: random load, random z step of 0.1 granularity, while money lasts."""
    state = new_plan_state(composed, tariff, budget, alpha)
    rng = np.random.default_rng(seed)
    loads = sorted(tariff.loads)
    if not loads:
        return _result("random", state)
    cheapest = min(tariff.loads[b].cost_weight for b in loads) * RANDOM_STEPS[0]

    misses = 0
    while state.ledger.remaining >= cheapest - 1e-12 and misses < RANDOM_MAX_MISSES:
        bus = loads[int(rng.integers(len(loads)))]
        step = float(RANDOM_STEPS[int(rng.integers(len(RANDOM_STEPS)))])
        z_new = min(1.0, round(state.z[bus] + step, 10))
        cost = tariff.loads[bus].cost_weight * (z_new - state.z[bus])
        if cost <= 0 or not state.ledger.can_afford(cost):
            misses += 1
            continue
        misses = 0
        _apply(state, Stage.RANDOM, f"raise load {bus} to z={z_new}", bus, cost, z={bus: z_new})

    return _result("random", state)


def critical_nodes(composed: ComposedGrid, budget: float, tariff: Tariff, alpha: float = 1.0) -> List[CriticalNode]:
    return pma(composed, budget, tariff, alpha).critical
