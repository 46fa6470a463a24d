import asyncio
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI
from pydantic import BaseModel, Field

from app.config import apply_thread_limits, policy_dir_default
from app.config_hot_reload import start_policy_watcher_task
from app.logging_config import init_logging
from app.metrics import metrics_endpoint, metrics_middleware
from app.policy_store import PolicyStore
from app.routes.policy import router as policy_router

DEFAULT_POLICY_DIR = "out"


class HealthStatus(BaseModel):
    """Service health status response."""

    status: str = Field(description="Overall service status: 'ok' when healthy")
    service: str = Field(description="Service name identifier")
    version: str = Field(description="Service version string")


def create_app(policy_dir: Path | None = None, *, watch: bool = True) -> FastAPI:
    init_logging()
    apply_thread_limits()

    directory = policy_dir or Path(policy_dir_default() or DEFAULT_POLICY_DIR)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.policy_store = PolicyStore(directory)
        if not watch:
            app.state.policy_store.try_reload()
            yield
            return

        watcher_task, stop_event = start_policy_watcher_task(app.state.policy_store)
        app.state._policy_watcher_task = watcher_task
        app.state._policy_watcher_stop = stop_event
        try:
            yield
        finally:
            stop_event.set()
            watcher_task.cancel()
            try:
                await watcher_task
            except (asyncio.CancelledError, Exception):
                pass

    app = FastAPI(title="minruin policy service", version="0.1.0", lifespan=lifespan)

    app.middleware("http")(metrics_middleware)
    app.include_router(policy_router)

    @app.get("/health", response_model=HealthStatus, tags=["health"])
    async def health() -> HealthStatus:
        return HealthStatus(status="ok", service="minruin", version=app.version)

    @app.get("/metrics", include_in_schema=False)
    async def metrics():
        return await metrics_endpoint()

    @app.get("/live", tags=["health"], include_in_schema=False)
    async def live() -> dict[str, str]:
        return {"status": "ok"}

    # Ready once a grid is loaded
    @app.get("/ready", tags=["health"], include_in_schema=False)
    async def ready() -> dict[str, str]:
        store = getattr(app.state, "policy_store", None)
        return {"ready": "true" if store is not None and store.loaded else "false"}

    return app


app = create_app()
