"""Small shared helpers: ordered worker pools and seed derivation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_WORKERS = 1


def set_workers(n: int) -> None:
    global _WORKERS
    _WORKERS = max(1, int(n))


def get_workers() -> int:
    return _WORKERS


def ordered_map(fn, items, workers: int | None = None) -> list:
    """Map fn over items; results come back in input order whatever the pool size."""
    items = list(items)
    w = get_workers() if workers is None else max(1, int(workers))
    if w == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))


def chain_rng(seed: int, chain: int, stream: int = 0) -> np.random.Generator:
    """PCG64 stream for (seed, chain, stream), derived through SeedSequence hashing."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def fmt(x) -> str:
    """Round-trip safe text for floats (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def jsonable(obj):
    """Recursively convert numpy scalars and arrays for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj
