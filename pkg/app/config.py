import os
from collections.abc import Mapping

# Numeric libraries in each worker process stay single-threaded; joblib owns the cores.
thread_limit_vars: Mapping[str, str] = {
    "OMP_NUM_THREADS": "1",
    "OPENBLAS_NUM_THREADS": "1",
    "MKL_NUM_THREADS": "1",
}


def apply_thread_limits(env: dict[str, str] | None = None) -> None:
    """Apply thread-count defaults.

    Does not overwrite values already provided by the environment; only sets defaults.
    """
    target = os.environ if env is None else env
    for key, value in thread_limit_vars.items():
        target.setdefault(key, value)


def policy_dir_default() -> str | None:
    return os.getenv("MINRUIN_POLICY_DIR")
