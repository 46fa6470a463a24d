from collections.abc import Awaitable, Callable
from pathlib import Path
from time import perf_counter

from fastapi import Request, Response
from prometheus_client import (
    CONTENT_TYPE_LATEST,
    REGISTRY,
    Counter,
    Gauge,
    Histogram,
    generate_latest,
    write_to_textfile,
)

# Solver and simulator
SOLVER_STAGE_SECONDS = Histogram(
    "minruin_solver_stage_seconds",
    "Wall time to solve one decision stage",
    buckets=(0.01, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 300.0, 900.0, 3600.0),
)
SOLVER_CELLS = Counter(
    "minruin_solver_cells_total",
    "Bucket x allocation cells evaluated",
    labelnames=("mode",),
)
SOLVER_PRUNE_BUCKET = Gauge(
    "minruin_solver_prune_bucket",
    "Bucket where heavy pruning began in the last solved stage (0 when none)",
)
SIM_PATHS = Counter(
    "minruin_sim_paths_total",
    "Simulated decumulation paths",
    labelnames=("strategy",),
)

# Policy service
REQUEST_COUNT = Counter(
    "http_requests_total",
    "Total HTTP requests",
    labelnames=("method", "path", "status"),
)
REQUEST_LATENCY = Histogram(
    "http_request_duration_seconds",
    "HTTP request latency in seconds",
    labelnames=("method", "path"),
    buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0),
)
IN_PROGRESS = Gauge("http_requests_in_progress", "In-progress HTTP requests")


def write_metrics_file(path: Path) -> None:
    """Dump the default registry in text exposition format."""
    path.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), REGISTRY)


async def metrics_endpoint() -> Response:
    data = generate_latest()
    return Response(content=data, media_type=CONTENT_TYPE_LATEST)


async def metrics_middleware(request: Request, call_next: Callable[[Request], Awaitable[Response]]):
    start = perf_counter()
    IN_PROGRESS.inc()
    status_code = 500
    try:
        response = await call_next(request)
        status_code = response.status_code
        return response
    finally:
        REQUEST_LATENCY.labels(request.method, request.url.path).observe(perf_counter() - start)
        REQUEST_COUNT.labels(request.method, request.url.path, str(status_code)).inc()
        IN_PROGRESS.dec()
