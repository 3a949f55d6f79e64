from pydantic import BaseModel
import os
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseModel):
    LOG_LEVEL: str = "INFO"
    GRIDSTORM_WORKERS: int = 4
    GRIDSTORM_OUT_DIR: str = "results"
    GRIDSTORM_MAX_CASCADE_STEPS: int = 10000
    GRIDSTORM_BL_EXHAUSTIVE_MAX_LOADS: int = 6
    GRIDSTORM_BL_MAX_COMBINATIONS: int = 2_000_000
    GRIDSTORM_BL_VALIDATE_TOP: int = 16
    PORT: int = 8003

def get_settings() -> Settings:
    return Settings(
        LOG_LEVEL=os.getenv("LOG_LEVEL", "INFO"),
        GRIDSTORM_WORKERS=int(os.getenv("GRIDSTORM_WORKERS", "4")),
        GRIDSTORM_OUT_DIR=os.getenv("GRIDSTORM_OUT_DIR", "results"),
        GRIDSTORM_MAX_CASCADE_STEPS=int(os.getenv("GRIDSTORM_MAX_CASCADE_STEPS", "10000")),
        GRIDSTORM_BL_EXHAUSTIVE_MAX_LOADS=int(os.getenv("GRIDSTORM_BL_EXHAUSTIVE_MAX_LOADS", "6")),
        GRIDSTORM_BL_MAX_COMBINATIONS=int(os.getenv("GRIDSTORM_BL_MAX_COMBINATIONS", "2000000")),
        GRIDSTORM_BL_VALIDATE_TOP=int(os.getenv("GRIDSTORM_BL_VALIDATE_TOP", "16")),
        PORT=int(os.getenv("PORT", "8003"))
    )

settings = get_settings()
