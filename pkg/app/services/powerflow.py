"""
Linearized (DC) power flow with per-island supply/demand balancing.

Flows follow f = (theta_from - theta_to) / x. Each island is solved on its
own with the lowest bus id as angle reference.
"""
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from app.models.flow import Dispatch, FlowSolution, IslandBalance, SensitivityMatrix
from app.models.grid import Branch, Generator, GridCase
from app.services.topology import islands
from app.utils.exceptions import PowerFlowException

logger = logging.getLogger(__name__)


def balance_island(
    buses: Sequence[int],
    generators: Sequence[Generator],
    demands: Mapping[int, float],
    priority: Sequence[int] = (),
) -> IslandBalance:
    """
    Matches generation and demand inside one island.

    `demands` holds the requested demand of load buses; buses missing from it
    draw nothing. Priority units (cheapened by a price attack) are filled to
    p_max first, the remainder is shared in proportion to p_max.
    """
    members = sorted(buses)
    member_set = set(members)
    local = [g for g in generators if g.bus in member_set]
    loads = [b for b in members if b in demands]
    dispatch = {g.id: 0.0 for g in local}

    running = [g for g in local if g.p_max > 0]
    primary = [g for g in running if not g.standby]
    active = primary or running

    if not active:
        return IslandBalance(
            buses=members,
            dispatch=dispatch,
            served={b: 0.0 for b in loads},
            requested=sum(demands[b] for b in loads),
            failed=loads,
        )

    total = sum(demands[b] for b in loads)
    rank = {gid: i for i, gid in enumerate(priority)}
    first = sorted((g for g in active if g.id in rank), key=lambda g: rank[g.id])
    pool = [g for g in active if g.id not in rank]

    remaining = total
    participation: Optional[Dict[int, float]] = None
    for g in first:
        take = min(g.p_max, remaining)
        dispatch[g.id] = take
        remaining -= take
        if participation is None and take < g.p_max:
            participation = {g.id: 1.0}

    saturated = False
    served = {b: demands[b] for b in loads}
    if participation is None:
        pool_cap = sum(g.p_max for g in pool)
        if remaining < pool_cap:
            for g in pool:
                dispatch[g.id] = g.p_max * remaining / pool_cap
            participation = {g.id: g.p_max / pool_cap for g in pool}
        elif remaining > 0:
            for g in pool:
                dispatch[g.id] = g.p_max
            supply = sum(dispatch.values())
            served = {b: demands[b] * supply / total for b in loads}
            saturated = True

    relaxed = any(g.p_min > 0 and dispatch[g.id] < g.p_min for g in active)
    if relaxed:
        logger.warning(f"p_min relaxed on island starting at bus {members[0]}")

    return IslandBalance(
        buses=members,
        dispatch=dispatch,
        served=served,
        requested=total,
        relaxed=relaxed,
        saturated=saturated,
        participation=participation,
    )


def requested_demands(grid: GridCase, demands: Optional[Mapping[int, float]] = None) -> Dict[int, float]:
    nominal = grid.nominal_demands()
    if demands is None:
        return nominal
    return {b: demands.get(b, d) for b, d in nominal.items()}


def dispatch(
    grid: GridCase,
    demands: Optional[Mapping[int, float]] = None,
    priority: Sequence[int] = (),
) -> Dispatch:
    requested = requested_demands(grid, demands)
    injection = {b.id: 0.0 for b in grid.buses}
    gen_bus = {g.id: g.bus for g in grid.generators}
    balances = []
    failed: List[int] = []

    for comp in islands(grid):
        bal = balance_island(comp, grid.generators, {b: requested[b] for b in comp if b in requested}, priority)
        for gid, out in bal.dispatch.items():
            injection[gen_bus[gid]] += out
        for b, s in bal.served.items():
            injection[b] -= s
        failed.extend(bal.failed)
        balances.append(bal)

    return Dispatch(islands=balances, injection=injection, failed=sorted(failed))


class _IslandSystem:
    """Reduced susceptance system of one island, factorized once."""

    def __init__(self, buses: List[int], branches: List[Branch]):
        self.buses = buses
        self.index = {b: i for i, b in enumerate(buses)}
        self.branches = branches
        self.factor = None
        n = len(buses)
        if n < 2:
            return
        B = np.zeros((n, n))
        for br in branches:
            i, j = self.index[br.from_bus], self.index[br.to_bus]
            y = 1.0 / br.reactance
            B[i, i] += y
            B[j, j] += y
            B[i, j] -= y
            B[j, i] -= y
        try:
            self.factor = cho_factor(B[1:, 1:])
        except LinAlgError:
            raise PowerFlowException("singular reduced susceptance matrix", buses)

    def angles(self, p: np.ndarray) -> np.ndarray:
        """Angles for injections p (vector or matrix of columns), reference row zero."""
        theta = np.zeros_like(p, dtype=float)
        if self.factor is not None:
            theta[1:] = cho_solve(self.factor, p[1:])
        return theta

    def branch_flows(self, theta: np.ndarray) -> np.ndarray:
        rows = [
            (theta[self.index[br.from_bus]] - theta[self.index[br.to_bus]]) / br.reactance
            for br in self.branches
        ]
        return np.array(rows)


def _systems(grid: GridCase) -> List[_IslandSystem]:
    comps = islands(grid)
    owner = {b: k for k, comp in enumerate(comps) for b in comp}
    per_island: List[List[Branch]] = [[] for _ in comps]
    for br in grid.branches:
        if br.alive:
            per_island[owner[br.from_bus]].append(br)
    return [_IslandSystem(comp, per_island[k]) for k, comp in enumerate(comps)]


def solve_dc(grid: GridCase, injection: Mapping[int, float]) -> FlowSolution:
    flows: Dict[int, float] = {}
    angles: Dict[int, float] = {}

    for system in _systems(grid):
        p = np.array([injection.get(b, 0.0) for b in system.buses], dtype=float)
        scale = max(1.0, float(np.abs(p).sum()))
        if abs(p.sum()) > 1e-9 * scale:
            raise PowerFlowException(f"injection not balanced (mismatch {p.sum():.3e})", system.buses)
        theta = system.angles(p)
        for b, t in zip(system.buses, theta):
            angles[b] = float(t)
        if system.branches:
            for br, f in zip(system.branches, system.branch_flows(theta)):
                flows[br.id] = float(f)

    return FlowSolution(flows=flows, angles=angles, injection=dict(injection))


def solve(grid: GridCase, demands: Optional[Mapping[int, float]] = None, priority: Sequence[int] = ()) -> Tuple[Dispatch, FlowSolution]:
    """Balance then solve; the usual pair for a given operating point."""
    d = dispatch(grid, demands, priority)
    return d, solve_dc(grid, d.injection)


def sensitivities(grid: GridCase, base: Dispatch) -> SensitivityMatrix:
    branch_ids = sorted(br.id for br in grid.branches if br.alive)
    load_ids = grid.load_buses()
    row_of = {bid: k for k, bid in enumerate(branch_ids)}
    col_of = {b: k for k, b in enumerate(load_ids)}
    values = np.zeros((len(branch_ids), len(load_ids)))
    gen_bus = {g.id: g.bus for g in grid.generators}
    balances = {bal.buses[0]: bal for bal in base.islands}

    for system in _systems(grid):
        bal = balances.get(system.buses[0])
        if bal is None or bal.failed or not system.branches:
            continue
        loads = [b for b in system.buses if b in col_of]
        if not loads:
            continue

        dp = np.zeros((len(system.buses), len(loads)))
        for j, load in enumerate(loads):
            if bal.participation is not None:
                dp[system.index[load], j] -= 1.0
                for gid, share in bal.participation.items():
                    dp[system.index[gen_bus[gid]], j] += share
            else:
                # proportional curtailment: served_k = D_k * P / S
                supply = bal.generation
                total = bal.requested
                for k in loads:
                    d_served = (supply / total if k == load else 0.0) - bal.served.get(k, 0.0) / total
                    dp[system.index[k], j] -= d_served

        df = system.branch_flows(system.angles(dp))
        for r, br in enumerate(system.branches):
            for j, load in enumerate(loads):
                values[row_of[br.id], col_of[load]] = df[r, j]

    return SensitivityMatrix(branch_ids=branch_ids, load_ids=load_ids, values=values)
