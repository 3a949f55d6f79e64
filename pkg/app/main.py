from contextlib import asynccontextmanager
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import logging
from app.config.settings import settings
from app.routes import attacks, health
from app.services.case_parser import FIXTURES
from app.utils.exceptions import ConfigException, ScenarioException

logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"gridstorm API up, fixtures: {', '.join(sorted(FIXTURES))}")
    yield


app = FastAPI(
    title="gridstorm",
    description="DC power flow, cascading failure and price modification attack simulator for microgrids",
    version="1.0.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:8080"],
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)

app.include_router(attacks.router)
app.include_router(health.router)


@app.exception_handler(ScenarioException)
@app.exception_handler(ConfigException)
async def scenario_exception_handler(request: Request, exc: Exception):
    return JSONResponse(
        status_code=400,
        content={"success": False, "error": "Invalid Scenario", "message": str(exc)},
    )


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unhandled exception on {request.url.path}: {exc}")
    return JSONResponse(
        status_code=500,
        content={
            "success": False,
            "error": "Internal Server Error",
            "message": "An unexpected error occurred"
        }
    )


@app.get("/")
async def root():
    return {
        "service": "gridstorm",
        "version": "1.0.0",
        "endpoints": ["/health", "/cases/{name}", "/plans", "/critical-nodes"],
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=settings.PORT)
