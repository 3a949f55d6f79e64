from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple, Union
import logging

from app.models.experiment import (
    Algorithm,
    ExperimentConfig,
    Scenario,
    SweepParameter,
    SweepReport,
    SweepRow,
)
from app.models.grid import Bus, BusKind, ComposedGrid, GridCase
from app.models.attack import Tariff
from app.services.case_parser import load_case
from app.services.planner import pma, random_baseline
from app.services.powerflow import solve
from app.services.pricing import default_tariff
from app.services.topology import compose
from app.services import reporting
from app.utils.exceptions import PowerFlowException, ScenarioException

logger = logging.getLogger(__name__)

FLOW_FLOOR = 0.01


def _base_flows(grid: GridCase) -> dict:
    try:
        d, sol = solve(grid)
    except PowerFlowException as e:
        raise ScenarioException(f"base case {grid.name} is not solvable: {e}")
    if d.failed:
        raise ScenarioException(f"base case {grid.name} leaves loads without generation: {d.failed}")
    return sol.flows


def assign_capacities(
    target: Union[ComposedGrid, GridCase],
    beta: float = 5.0,
    reduction: float = 0.6,
) -> Union[ComposedGrid, GridCase]:
    """
    Rates every branch from its base flow, then applies the capacity reduction.

    For a composed grid the base flow is the larger of the connected state and
    the state with every tie line open. Tie lines keep their composition
    rating.
    """
    if not 0 <= reduction < 1:
        raise ScenarioException(f"capacity reduction must lie in [0, 1), got {reduction}")
    composed = target if isinstance(target, ComposedGrid) else None
    grid = composed.merged if composed else target
    ties = set(composed.tie_line_ids()) if composed else set()

    flows = _base_flows(grid)
    envelope = {bid: abs(f) for bid, f in flows.items()}
    if ties:
        opened = grid.model_copy(deep=True)
        for br in opened.branches:
            if br.id in ties:
                br.alive = False
        for bid, f in _base_flows(opened).items():
            envelope[bid] = max(envelope.get(bid, 0.0), abs(f))

    branches = []
    for br in grid.branches:
        if br.id in ties:
            branches.append(br.model_copy())
        elif br.capacity is None:
            u = beta * max(envelope.get(br.id, 0.0), FLOW_FLOOR) * (1.0 - reduction)
            branches.append(br.model_copy(update={"capacity": u}))
        else:
            branches.append(br.model_copy(update={"capacity": br.capacity * (1.0 - reduction)}))

    rated = grid.model_copy(update={"branches": branches})
    if composed:
        return composed.model_copy(update={"merged": rated})
    return rated


def scale_microgrid_load(composed: ComposedGrid, target: float) -> ComposedGrid:
    if target <= 0:
        raise ScenarioException(f"microgrid load target must be positive, got {target}")
    mg_loads = {b for mg in composed.microgrids for b in composed.microgrid_load_buses(mg.microgrid_id)}
    current = sum(composed.merged.bus(b).nominal_demand for b in mg_loads)
    if not mg_loads or current <= 0:
        raise ScenarioException("composed grid has no microgrid loads to scale")

    factor = target / current
    buses = [
        Bus(id=b.id, kind=b.kind, nominal_demand=b.nominal_demand * factor)
        if b.id in mg_loads and b.kind == BusKind.LOAD else b.model_copy()
        for b in composed.merged.buses
    ]
    if factor != 1.0:
        logger.debug(f"Scaled microgrid loads by {factor:.4f} to {target}")
    return composed.model_copy(update={"merged": composed.merged.model_copy(update={"buses": buses})})


def budget_for(resource_fraction: float, tariff: Tariff) -> float:
    """Fraction of the maximal attack: z = 1 on every load plus every generator attack."""
    full = sum(t.cost_weight for t in tariff.loads.values()) + sum(tariff.generator_costs.values())
    return resource_fraction * full


def build_scenario(
    config: ExperimentConfig,
    capacity_reduction: Optional[float] = None,
    resource_fraction: Optional[float] = None,
    microgrid_load_total: Optional[float] = None,
) -> Scenario:
    reduction = config.capacity_reduction if capacity_reduction is None else capacity_reduction
    resource = config.resource_fraction if resource_fraction is None else resource_fraction
    mg_total = config.microgrid_load_total if microgrid_load_total is None else microgrid_load_total

    main = load_case(config.main_case)
    attachments = []
    if config.attachments:
        mg_case = load_case(config.microgrid_case)
        attachments = [(host, mg_case) for host in config.attachments]
    composed = compose(main, attachments)
    if composed.microgrids:
        composed = scale_microgrid_load(composed, mg_total)
    composed = assign_capacities(composed, config.capacity_headroom, reduction)

    overrides = {bus: o.model_dump(exclude_none=True) for bus, o in config.tariff.items()}
    tariff = default_tariff(composed.merged, overrides, config.genattack, config.generator_cost)
    return Scenario(composed=composed, tariff=tariff, budget=budget_for(resource, tariff))


def _point(param: SweepParameter, value: float) -> dict:
    key = {
        SweepParameter.CAPACITY: "capacity_reduction",
        SweepParameter.RESOURCE: "resource_fraction",
        SweepParameter.MGLOAD: "microgrid_load_total",
    }[param]
    return {key: value}


def _run_job(job: Tuple[ExperimentConfig, SweepParameter, float, Algorithm, int]) -> List[SweepRow]:
    config, param, value, algorithm, run = job
    scenario = build_scenario(config, **_point(param, value))
    if algorithm == Algorithm.PMA:
        seed = config.seed
        result = pma(scenario.composed, scenario.budget, scenario.tariff, config.alpha)
        runs = range(config.runs)
    else:
        seed = config.seed + run
        result = random_baseline(scenario.composed, scenario.budget, scenario.tariff, seed, config.alpha)
        runs = [run]

    # pma is deterministic, one solve is copied to every run index
    return [
        SweepRow(
            parameter=param,
            value=value,
            algorithm=algorithm,
            run=r,
            seed=seed,
            total_node_failures=result.total_node_failures,
            microgrids_islanded=len(result.s2),
            node_failures_in_microgrids=len(result.s3),
            lines_failed=len(result.s1),
            budget_spent=result.ledger.spent,
        )
        for r in runs
    ]


def sweep_rows(config: ExperimentConfig) -> List[SweepRow]:
    jobs = []
    for param in config.sweep:
        for value in config.values_for(param):
            jobs.append((config, param, value, Algorithm.PMA, 0))
            jobs.extend((config, param, value, Algorithm.RANDOM, run) for run in range(config.runs))
    logger.info(f"Running {len(jobs)} sweep jobs on {config.workers} workers")

    if config.workers == 1:
        batches = [_run_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            batches = list(pool.map(_run_job, jobs, chunksize=4))

    rows = [row for batch in batches for row in batch]
    order = {p: i for i, p in enumerate(SweepParameter)}
    rows.sort(key=lambda r: (order[r.parameter], r.value, r.algorithm.value, r.run))
    return rows


def run_sweep(config: ExperimentConfig) -> SweepReport:
    out = Path(config.out_dir)
    rows = sweep_rows(config)
    files: List[str] = []

    for param in config.sweep:
        subset = [r for r in rows if r.parameter == param]
        files.append(reporting.write_rows(subset, out / f"sweep_{param.value}.csv"))
        summary = reporting.summarize(subset)
        files.append(reporting.write_summary(summary, out / f"summary_{param.value}.csv"))
        files.extend(reporting.plot_summary(summary, param, out))

    scenario = build_scenario(config)
    plan = pma(scenario.composed, scenario.budget, scenario.tariff, config.alpha)
    files.append(reporting.write_critical_nodes(plan.critical, out / "critical_nodes.csv"))
    files.append(reporting.write_trace(plan.trace, out / "trace.log"))

    logger.info(f"Sweep finished: {len(rows)} rows, {len(files)} files in {out}")
    return SweepReport(rows=rows, files=files)
