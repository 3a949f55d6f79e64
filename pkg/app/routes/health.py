from fastapi import APIRouter, status
from fastapi.responses import JSONResponse
from datetime import datetime, timezone
import logging
from app.services.case_parser import FIXTURES, load_case

router = APIRouter()
logger = logging.getLogger(__name__)

SERVICE_NAME = "gridstorm attack simulator"

@router.get("/health")
async def health_check():
    """Healthy while every embedded fixture still parses."""
    now = datetime.now(timezone.utc).isoformat()
    try:
        fixtures = {name: len(load_case(name).buses) for name in sorted(FIXTURES)}
    except Exception as e:
        logger.error(f"Fixture check failed: {e}")
        return JSONResponse(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            content={"message": "unhealthy", "service": SERVICE_NAME, "timestamp": now, "error": str(e)}
        )
    return {"message": "healthy", "service": SERVICE_NAME, "timestamp": now, "fixtures": fixtures}
