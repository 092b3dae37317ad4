"""Worker pool and deterministic seed derivation for replicated computations."""

import logging
from hashlib import sha256
from typing import Callable, List, Sequence

from joblib import Parallel, delayed

from .const import SEED_DOMAIN
from .exceptions import ContractViolation

_LOGGER = logging.getLogger(__name__)


def derive_seed(root_seed, *keys) -> int:
    """Return a 64-bit seed derived from the root seed and a path of keys.

    The seed is the first 8 bytes (big endian) of SHA-256 over the text
    "gibbscal|root|key1|key2...", so it depends on nothing but its inputs.
    """
    text = "|".join(str(k) for k in (SEED_DOMAIN, int(root_seed), *keys))
    return int.from_bytes(sha256(text.encode("ascii")).digest()[:8], "big")


class WorkerPool:
    """Run independent jobs inline or on joblib worker processes.

    Results always come back in submission order, so a reduction over them
    does not depend on the number of workers.
    """

    def __init__(self, workers=1) -> None:
        workers = int(workers)
        if workers < 1:
            raise ContractViolation(f"workers={workers} must be a positive integer")
        self.workers = workers
        self._parallel = Parallel(n_jobs=workers) if workers > 1 else None
        self._entered = False

    def __enter__(self) -> "WorkerPool":
        # keep one set of workers alive across map() calls
        if self._parallel is not None:
            self._parallel.__enter__()
            self._entered = True
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._entered:
            self._parallel.__exit__(None, None, None)
            self._entered = False

    def map(self, func: Callable, arg_list: Sequence[tuple]) -> List:
        """Return [func(*args) for args in arg_list]."""
        arg_list = list(arg_list)
        _LOGGER.debug("map(func=%s, jobs=%s)...", func.__name__, len(arg_list))
        if self._parallel is None:
            return [func(*args) for args in arg_list]
        return self._parallel(delayed(func)(*args) for args in arg_list)


def run_map(pool, func: Callable, arg_list: Sequence[tuple]) -> List:
    """Map func over arg_list on the pool, or inline when pool is None."""
    if pool is None:
        return [func(*args) for args in arg_list]
    return pool.map(func, arg_list)


def call_with_retry(func: Callable, seed, *args):
    """Return func(*args, seed), retrying once with a derived seed on failure."""
    try:
        return func(*args, seed)
    except Exception as exc:  # pylint: disable=broad-except
        _LOGGER.debug("call_with_retry(): %s failed (msg=%s), retrying.", func.__name__, exc)
        return func(*args, derive_seed(seed, "retry"))
