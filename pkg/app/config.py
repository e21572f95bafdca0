from pydantic_settings import BaseSettings
from typing import Optional

class Settings(BaseSettings):
    APP_NAME: str = "L-System Function Lab"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"
    LOG_CACHE_LOGGERS: bool = True
    REDIS_URL: Optional[str] = "redis://localhost:6379"
    CACHE_EXPIRE_SECONDS: int = 3600

    # Quadrature defaults for measure integrals
    QUAD_ABS_TOL: float = 1e-10
    QUAD_REL_TOL: float = 1e-10
    QUAD_MAX_SUBDIVISIONS: int = 200
    QUAD_TAIL_CUTOFF: float = 50.0

    # Membership tolerances: closed-form inputs vs quadrature-backed inputs
    EXACT_TOL: float = 1e-9
    QUADRATURE_TOL: float = 1e-6

    POLE_RADIUS: float = 1e-12
    POLE_SATURATION: float = 0.5
    RESOLVENT_QUAD_N: int = 2000
    GRID_WORKERS: int = 1

    VERIFY_SEED: int = 20240601
    VERIFY_MODELS: int = 24

    class Config:
        env_file = ".env"

settings = Settings()
