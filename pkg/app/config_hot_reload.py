from __future__ import annotations

import asyncio
from pathlib import Path

from watchfiles import awatch

from app.policy_store import WATCHED_FILES, PolicyStore


def _touches_policy(changes: set[tuple[object, str]]) -> bool:
    return any(Path(path).name in WATCHED_FILES for _change, path in changes)


async def watch_and_reload_policy(
    store: PolicyStore,
    *,
    debounce_ms: int = 200,
    stop_event: asyncio.Event | None = None,
) -> None:
    """Watch the policy directory and reload the store when result files change.

    Uses watchfiles.awatch to monitor changes. Debounces bursts; a failed reload
    leaves the previous grid in service.
    """
    # Initial load; parsing large CSVs stays off the event loop
    await asyncio.to_thread(store.try_reload)
    if not store.directory.is_dir():
        store.log.warning("policy directory %s does not exist; not watching", store.directory)
        return

    async for changes in awatch(
        store.directory,
        debounce=debounce_ms / 1000.0,
        force_polling=True,
    ):
        if _touches_policy(changes):
            await asyncio.to_thread(store.try_reload)
        if stop_event and stop_event.is_set():
            break


def start_policy_watcher_task(
    store: PolicyStore,
    *,
    debounce_ms: int = 200,
) -> tuple[asyncio.Task[None], asyncio.Event]:
    """Start the async watcher task and return (task, stop_event)."""
    stop_event: asyncio.Event = asyncio.Event()
    task = asyncio.create_task(
        watch_and_reload_policy(store, debounce_ms=debounce_ms, stop_event=stop_event)
    )
    return task, stop_event
