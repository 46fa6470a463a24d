from __future__ import annotations

from fastapi import APIRouter, Depends, HTTPException, Query, Request
from pydantic import BaseModel, Field

from app.model.ruin import rf_from_balance
from app.policy_store import PolicyStore
from app.solver.dp import PolicyGrid

router = APIRouter(prefix="/policy", tags=["policy"])


class PolicyInfo(BaseModel):
    directory: str = Field(description="Directory the grid was read from")
    stages: int = Field(description="Decision stages 0..stages-1")
    bucket_count: int = Field(description="Buckets per stage")
    p_r: int = Field(description="Ruin-factor precision")
    rf_max: float = Field(description="Largest bucket midpoint")


class PolicyLookup(BaseModel):
    t: int = Field(description="Decision stage")
    rf: float = Field(description="Ruin factor looked up")
    bucket: int = Field(description="Bucket holding rf; bucket_count + 1 is overflow")
    v: float = Field(description="Minimum probability of ruin from this state")
    alpha: float = Field(description="Stock allocation to hold until the next withdrawal")
    overflow: bool = Field(description="rf lies beyond the largest bucket")


def get_store(request: Request) -> PolicyStore:
    store = getattr(request.app.state, "policy_store", None)
    if store is None:
        raise HTTPException(status_code=503, detail="Policy store not initialized")
    return store


def get_grid(
    store: PolicyStore = Depends(get_store),  # noqa: B008 - FastAPI DI pattern
) -> PolicyGrid:
    grid = store.grid
    if grid is None:
        detail = "No policy loaded"
        if store.last_error:
            detail = f"{detail}: {store.last_error}"
        raise HTTPException(status_code=503, detail=detail)
    return grid


def _lookup(grid: PolicyGrid, t: int, rf: float) -> PolicyLookup:
    try:
        cell = grid.lookup(t, rf)
    except KeyError as exc:
        raise HTTPException(status_code=404, detail=f"Unknown stage: {t}") from exc
    return PolicyLookup(
        t=cell.t,
        rf=cell.rf,
        bucket=cell.bucket,
        v=cell.v,
        alpha=cell.alpha,
        overflow=cell.overflow,
    )


@router.get("", response_model=PolicyInfo)
async def get_policy_info(
    store: PolicyStore = Depends(get_store),  # noqa: B008 - FastAPI DI pattern
    grid: PolicyGrid = Depends(get_grid),  # noqa: B008 - FastAPI DI pattern
) -> PolicyInfo:
    return PolicyInfo(
        directory=str(store.directory),
        stages=grid.stages,
        bucket_count=grid.bucket_count,
        p_r=grid.p_r,
        rf_max=grid.rf_max,
    )


@router.get("/lookup", response_model=PolicyLookup)
async def lookup(
    t: int = Query(ge=0, description="Decision stage"),
    rf: float = Query(gt=0.0, description="Current ruin factor"),
    grid: PolicyGrid = Depends(get_grid),  # noqa: B008 - FastAPI DI pattern
) -> PolicyLookup:
    return _lookup(grid, t, rf)


@router.get("/lookup/balance", response_model=PolicyLookup)
async def lookup_balance(
    t: int = Query(ge=0, description="Decision stage"),
    initial_balance: float = Query(gt=0.0, description="Standard-form starting balance"),
    w_r: float = Query(gt=0.0, lt=1.0, description="Initial withdrawal rate"),
    balance: float = Query(gt=0.0, description="Current real balance"),
    grid: PolicyGrid = Depends(get_grid),  # noqa: B008 - FastAPI DI pattern
) -> PolicyLookup:
    rf = rf_from_balance(initial_balance, w_r, balance)
    return _lookup(grid, t, rf)
