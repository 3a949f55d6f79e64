"""
Cascading line failures with moving-average thermal memory.

Each step balances every island, solves the DC flow, updates
f~ = alpha*f + (1 - alpha)*f~_prev and removes every line with |f~| > u.
Load buses left without a live generator join the failed node set.
"""
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging

from app.config.settings import settings
from app.models.flow import CascadeOutcome, CascadeState, IslandSummary, StepRecord
from app.models.grid import GridCase
from app.services.powerflow import dispatch, solve_dc
from app.utils.exceptions import CascadeException

logger = logging.getLogger(__name__)


def _advance(state: CascadeState, alpha: float) -> Tuple[List[int], bool]:
    """Runs one step in place. Returns (lines failed, still overloaded)."""
    grid = state.grid
    d = dispatch(grid, state.demands, state.priority)
    sol = solve_dc(grid, d.injection)

    failed_lines: List[int] = []
    pending = False
    for br in grid.branches:
        if not br.alive:
            continue
        f = sol.flows.get(br.id, 0.0)
        prev = state.moving_avg.get(br.id)
        smoothed = f if prev is None else alpha * f + (1.0 - alpha) * prev
        state.moving_avg[br.id] = smoothed
        if br.capacity is None:
            continue
        if abs(smoothed) > br.capacity:
            failed_lines.append(br.id)
        elif abs(f) > br.capacity:
            pending = True

    for br in grid.branches:
        if br.id in failed_lines:
            br.alive = False

    state.step += 1
    state.failed_lines.extend(failed_lines)
    state.flows = sol
    state.dispatch = d

    # node failures are judged on the post-removal topology
    after = dispatch(grid, state.demands, state.priority) if failed_lines else d
    known = set(state.failed_nodes)
    new_nodes = [b for b in after.failed if b not in known]
    state.failed_nodes.extend(new_nodes)

    state.trace.append(StepRecord(
        step=state.step,
        lines_failed=failed_lines,
        nodes_failed=new_nodes,
        islands=[
            IslandSummary(bus_count=len(bal.buses), generation=bal.generation, served=bal.served_total)
            for bal in d.islands
        ],
    ))
    if failed_lines:
        logger.debug(f"cascade step {state.step}: lines {failed_lines} failed, nodes {new_nodes}")
    return failed_lines, pending


def cascade_step(state: CascadeState, alpha: float) -> Tuple[CascadeState, List[int]]:
    """Pure variant of one cascade step; the input state is left untouched."""
    nxt = state.model_copy(deep=True)
    failed, _ = _advance(nxt, alpha)
    return nxt, failed


def run_cascade(
    grid: GridCase,
    demands: Optional[Mapping[int, float]] = None,
    alpha: float = 1.0,
    priority: Sequence[int] = (),
    memory: Optional[Mapping[int, float]] = None,
) -> CascadeOutcome:
    if not 0 < alpha <= 1:
        raise CascadeException(f"alpha must lie in (0, 1], got {alpha}")

    state = CascadeState(
        grid=grid.model_copy(deep=True),
        demands=dict(demands) if demands is not None else grid.nominal_demands(),
        priority=list(priority),
        moving_avg=dict(memory) if memory else {},
    )
    limit = len(grid.branches) + 1 if alpha == 1 else settings.GRIDSTORM_MAX_CASCADE_STEPS

    while True:
        if state.step >= limit:
            raise CascadeException(f"cascade did not settle within {limit} steps")
        failed, pending = _advance(state, alpha)
        if not failed and not pending:
            break

    if state.failed_lines:
        logger.info(
            f"Cascade settled after {state.step} steps: "
            f"{len(state.failed_lines)} lines, {len(state.failed_nodes)} nodes failed"
        )

    # record final dispatch on the settled grid
    outputs = state.dispatch.outputs() if state.dispatch else {}
    for g in state.grid.generators:
        g.output = outputs.get(g.id, 0.0)

    alive_avg: Dict[int, float] = {
        br.id: state.moving_avg[br.id] for br in state.grid.branches if br.alive and br.id in state.moving_avg
    }
    return CascadeOutcome(
        s1=list(state.failed_lines),
        s2=list(state.failed_nodes),
        steps=state.trace,
        final=state.grid,
        moving_avg=alive_avg,
        flows=state.flows,
        dispatch=state.dispatch,
    )
