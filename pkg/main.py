from fastapi import FastAPI
from app.routers import examples, measures, theory
from app.core.logging import configure_logging
from fastapi_cache import FastAPICache
from fastapi_cache.backends.redis import RedisBackend
from fastapi_cache.backends.inmemory import InMemoryBackend
from app.config import settings
from redis import asyncio as aioredis
import structlog

configure_logging()
logger = structlog.get_logger()

app = FastAPI(title=settings.APP_NAME, version="1.0.0")

@app.on_event("startup")
async def startup():
    try:
        redis = aioredis.from_url(settings.REDIS_URL)
        await redis.ping()
        FastAPICache.init(RedisBackend(redis), prefix="fastapi-cache")
        logger.info("redis_cache_initialized", url=settings.REDIS_URL)
    except Exception as e:
        logger.warning("redis_unavailable_using_inmemory_cache", error=str(e))
        FastAPICache.init(InMemoryBackend(), prefix="fastapi-cache")

app.include_router(examples.router, prefix="/api", tags=["Examples"])
app.include_router(measures.router, prefix="/api", tags=["Measures and models"])
app.include_router(theory.router, prefix="/api", tags=["Donoghue classes and bi-extensions"])

@app.get("/")
async def root():
    return {
        "message": "L-System Function Lab",
        "description": "Weyl, Livsic, characteristic, transfer and impedance functions "
                       "of symmetric operators with deficiency indices (1,1)",
        "version": "1.0.0",
        "documentation": {
            "interactive_docs": "/docs",
            "redoc": "/redoc",
            "openapi_schema": "/openapi.json"
        },
        "endpoints": {
            "examples": "/api/examples/{example_id}",
            "measures": "/api/measures/weyl",
            "models": "/api/models",
            "donoghue": "/api/donoghue/theorem",
            "biextension": "/api/biextension",
            "verify": "/api/verify/{suite}"
        }
    }
