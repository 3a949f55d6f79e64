from fastapi import APIRouter, HTTPException, status
import logging

from app.models.experiment import (
    Algorithm, CaseSummary, CriticalNodesResponse, ExperimentConfig,
    PlanRequest, PlanResponse
)
from app.services.case_parser import load_case
from app.services.experiments import build_scenario
from app.services.planner import critical_nodes, pma, random_baseline
from app.utils.exceptions import (
    CaseParseException, CaseValidationException, ScenarioException, UnknownCaseException
)

router = APIRouter()
logger = logging.getLogger(__name__)


def _scenario(req: PlanRequest):
    config = ExperimentConfig(alpha=req.alpha, seed=req.seed, workers=1)
    return build_scenario(
        config,
        capacity_reduction=req.capacity_reduction,
        resource_fraction=req.resource_fraction,
        microgrid_load_total=req.microgrid_load_total,
    )


@router.get("/cases/{name}", response_model=CaseSummary)
async def get_case(name: str):
    """summary of an embedded fixture"""
    try:
        grid = load_case(name)
        return CaseSummary(
            name=grid.name,
            buses=len(grid.buses),
            generators=len(grid.generators),
            branches=len(grid.branches),
            loads=len(grid.load_buses()),
            total_demand=grid.total_demand()
        )
    except UnknownCaseException:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Case not found")
    except (CaseParseException, CaseValidationException) as e:
        logger.error(f"Fixture {name} is broken: {e}")
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail="Failed to load case")


@router.post("/plans", response_model=PlanResponse)
def run_plan(req: PlanRequest):
    """run one attack plan on the default composite grid"""
    try:
        scenario = _scenario(req)
        if req.algorithm == Algorithm.PMA:
            result = pma(scenario.composed, scenario.budget, scenario.tariff, req.alpha)
        else:
            result = random_baseline(scenario.composed, scenario.budget, scenario.tariff, req.seed, req.alpha)
        return PlanResponse(
            algorithm=req.algorithm,
            budget=scenario.budget,
            spent=result.ledger.spent,
            lines_failed=result.s1,
            microgrids_islanded=result.s2,
            microgrid_node_failures=result.s3,
            total_node_failures=result.total_node_failures,
            trace=result.trace
        )
    except ScenarioException as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except Exception as e:
        logger.error(f"Error running plan: {e}")
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail="Failed to run plan")


@router.post("/critical-nodes", response_model=CriticalNodesResponse)
def get_critical_nodes(req: PlanRequest):
    """loads the attacker leans on most, ranked by spend"""
    try:
        scenario = _scenario(req)
        nodes = critical_nodes(scenario.composed, scenario.budget, scenario.tariff, req.alpha)
        return CriticalNodesResponse(nodes=nodes, total=len(nodes))
    except ScenarioException as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
    except Exception as e:
        logger.error(f"Error ranking critical nodes: {e}")
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail="Failed to rank critical nodes")
