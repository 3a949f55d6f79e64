"""
Tariff model, attack cost and the minimum-cost-to-break (MCB) solver.

A price drop of z*rho on load i lets automated demand response raise its
consumption to the bill cap: D_i(z) = (1 + k_i) B_i / (r_i - z rho_i).
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Union
import logging

from app.models.attack import AttackVector, LoadTariff, McbResult, Tariff
from app.models.flow import SensitivityMatrix
from app.models.grid import GridCase
from app.services.powerflow import sensitivities, solve

logger = logging.getLogger(__name__)

EPSILON = 1e-6
SENSITIVITY_TOL = 1e-9

ZLike = Union[AttackVector, Mapping[int, float], None]


def default_tariff(
    grid: GridCase,
    overrides: Optional[Mapping[int, Mapping[str, float]]] = None,
    generator_costs: Optional[Mapping[int, float]] = None,
    generator_cost: float = 1.0,
) -> Tariff:
    """Flat tariff: r = 1, rho = r/2, k = 0, B = D_nom * r, w = 1; standby units cost c^gu."""
    overrides = overrides or {}
    loads: Dict[int, LoadTariff] = {}
    for bus, demand in grid.nominal_demands().items():
        params = dict(overrides.get(bus, {}))
        rate = params.get("rate", 1.0)
        loads[bus] = LoadTariff(
            rate=rate,
            max_rate_change=params.get("max_rate_change", 0.5 * rate),
            sensitivity=params.get("sensitivity", 0.0),
            bill_target=demand * rate,
            cost_weight=params.get("cost_weight", 1.0),
        )

    costs = {g.id: generator_cost for g in grid.generators if g.standby}
    costs.update(generator_costs or {})
    return Tariff(loads=loads, generator_costs=costs)


def demand_response(bus: int, z: float, tariff: Tariff) -> float:
    t = tariff.loads[bus]
    return (1.0 + t.sensitivity) * t.bill_target / (t.rate - z * t.max_rate_change)


def _as_dict(z: ZLike) -> Dict[int, float]:
    if z is None:
        return {}
    if isinstance(z, AttackVector):
        return dict(z.z)
    return dict(z)


def demands_for(tariff: Tariff, z: ZLike = None) -> Dict[int, float]:
    zz = _as_dict(z)
    return {bus: demand_response(bus, zz.get(bus, 0.0), tariff) for bus in tariff.loads}


def attack_cost(z: ZLike, tariff: Tariff) -> float:
    return sum(tariff.loads[bus].cost_weight * value for bus, value in _as_dict(z).items())


@dataclass
class _Item:
    bus: int
    gain: float      # flow gain at z = 1
    cost: float      # cost of going to z = 1
    reach: Callable[[float], float]   # z that delivers a given gain


@dataclass
class _Plan:
    cost: float
    z: Dict[int, float]


def _item(bus: int, coef: float, z_lo: float, tariff: Tariff) -> _Item:
    t = tariff.loads[bus]
    d_lo = demand_response(bus, z_lo, tariff)
    d_hi = demand_response(bus, 1.0, tariff)
    cap = (1.0 + t.sensitivity) * t.bill_target

    def reach(gain: float) -> float:
        target = d_lo + gain / coef
        z = (t.rate - cap / target) / t.max_rate_change
        return min(max(z, z_lo), 1.0)

    return _Item(bus=bus, gain=coef * (d_hi - d_lo), cost=t.cost_weight * (1.0 - z_lo), reach=reach)


def _cheapest_raise(items: List[_Item], need: float, tariff: Tariff, z_lo: Mapping[int, float]) -> Optional[_Plan]:
    """
    Minimum-cost way to add `need` to the target flow.

    Gain is convex in z, so an optimum raises some loads to z = 1 and at most
    one more load partway. Depth-first over the sets of fully raised loads;
    for each set every load outside it is tried as the partial one. Pruned
    with the fractional-knapsack bound on chord costs (a valid lower bound
    because the true cost of a partial gain lies above the chord).
    """
    if sum(it.gain for it in items) < need:
        return None
    items = sorted(items, key=lambda it: (-it.gain / it.cost, it.bus))
    n = len(items)
    best: List[Optional[_Plan]] = [None]

    def bound(q: float, spent: float, taken: Set[int]) -> float:
        for j, it in enumerate(items):
            if j in taken:
                continue
            if it.gain >= q:
                return spent + it.cost * q / it.gain
            q -= it.gain
            spent += it.cost
        return float("inf")

    def visit(k: int, q: float, spent: float, full: List[int]):
        taken = set(full)
        if best[0] is not None and bound(q, spent, taken) >= best[0].cost:
            return
        for j, it in enumerate(items):
            if j in taken or it.gain < q:
                continue
            z_new = it.reach(q)
            total = spent + tariff.loads[it.bus].cost_weight * (z_new - z_lo.get(it.bus, 0.0))
            if best[0] is None or total < best[0].cost:
                z = {items[i].bus: 1.0 for i in full}
                z[it.bus] = z_new
                best[0] = _Plan(cost=total, z=z)
        # a fully raised load always leaves part of the need uncovered
        for j in range(k, n):
            if items[j].gain < q:
                visit(j + 1, q - items[j].gain, spent + items[j].cost, full + [j])

    visit(0, need, 0.0, [])
    return best[0]


def mcb(
    target: int,
    grid: GridCase,
    tariff: Tariff,
    base: ZLike = None,
    priority: Sequence[int] = (),
    sens: Optional[SensitivityMatrix] = None,
    epsilon: float = EPSILON,
) -> McbResult:
    """
    Cheapest increase of the attack vector that pushes |f_target| past u(1+eps).

    Works from `base` (the attack already in place); the reported cost only
    counts the increase. The linear model is checked against a real solve and
    re-linearized when dispatch saturation bends it.
    """
    z0 = {bus: 0.0 for bus in tariff.loads}
    z0.update(_as_dict(base))
    branch = grid.branch(target)
    if not branch.alive or branch.capacity is None:
        return McbResult(target=target, feasible=False, z=AttackVector(z=z0))

    threshold = branch.capacity * (1.0 + epsilon)
    z = dict(z0)
    rounds = len(grid.generators) + 1
    flow = 0.0

    for attempt in range(rounds + 1):
        d, sol = solve(grid, demands_for(tariff, z), priority)
        flow = sol.flows.get(target, 0.0)
        if abs(flow) >= threshold * (1.0 - 1e-12):
            cost = attack_cost(z, tariff) - attack_cost(z0, tariff)
            return McbResult(
                target=target,
                feasible=True,
                z=AttackVector(z=z),
                cost=max(cost, 0.0),
                achieved_flow=flow,
                direction=1 if flow >= 0 else -1,
            )
        if attempt == rounds:
            break
        if attempt > 0:
            logger.warning(f"mcb on line {target}: linear model off after saturation, re-linearizing")

        matrix = sens if (attempt == 0 and sens is not None) else sensitivities(grid, d)
        row = matrix.row(target)

        best: Optional[_Plan] = None
        for side in (1, -1):
            items = [
                _item(bus, side * m, z[bus], tariff)
                for bus, m in row.items()
                if side * m > SENSITIVITY_TOL
                and bus in tariff.loads
                and tariff.loads[bus].max_rate_change > 0
                and z[bus] < 1.0
            ]
            plan = _cheapest_raise(items, threshold - side * flow, tariff, z)
            if plan is not None and (best is None or plan.cost < best.cost):
                best = plan
        if best is None:
            break
        z.update(best.z)

    return McbResult(target=target, feasible=False, z=AttackVector(z=z0), achieved_flow=flow)
