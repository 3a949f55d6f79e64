import argparse
import logging
import sys
from typing import List, Optional

from app.config.experiment import load_experiment_config, sweep_names
from app.config.settings import settings
from app.services.experiments import run_sweep
from app.utils.exceptions import (
    CaseParseException,
    CaseValidationException,
    ConfigException,
    ScenarioException,
    TopologyException,
    UnknownCaseException,
)

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridstorm", description="Price modification attack simulator for microgrids")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the parameter sweeps")
    run.add_argument("--config", help="experiment config file")
    run.add_argument("--case", dest="main_case", help="main grid fixture name or case file")
    run.add_argument("--microgrid-case", dest="microgrid_case", help="microgrid fixture name or case file")
    run.add_argument("--attach", dest="attachments", type=int, action="append", help="host bus for a microgrid (repeatable)")
    run.add_argument("--capacity-reduction", dest="capacity_reduction", type=float)
    run.add_argument("--resource", dest="resource_fraction", type=float)
    run.add_argument("--mgload", dest="microgrid_load_total", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--sweep", choices=sweep_names(), help="run a single sweep")
    run.add_argument("--workers", type=int)
    run.add_argument("--out", dest="out_dir")

    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--port", type=int, default=settings.PORT)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))

    if args.command == "serve":
        import uvicorn
        uvicorn.run("app.main:app", host="0.0.0.0", port=args.port)
        return 0

    overrides = {
        key: getattr(args, key)
        for key in (
            "main_case", "microgrid_case", "attachments", "capacity_reduction", "resource_fraction",
            "microgrid_load_total", "alpha", "runs", "seed", "workers", "out_dir",
        )
    }
    if args.sweep:
        overrides["sweep"] = [args.sweep]

    try:
        config = load_experiment_config(args.config, overrides)
        report = run_sweep(config)
    except (ConfigException, ScenarioException, TopologyException, UnknownCaseException,
            CaseParseException, CaseValidationException) as e:
        logger.error(f"gridstorm run failed: {e}")
        return 1

    for path in report.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
