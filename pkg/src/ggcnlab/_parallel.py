"""Worker-pool helper honoring the GGCNLAB_THREADS cap.

Results are returned in submission order, so callers that reduce sequentially
get the same output no matter how many workers ran.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    raw = os.environ.get("GGCNLAB_THREADS", "").strip()
    if raw:
        w = int(raw)
        if w < 1:
            raise ValueError(f"GGCNLAB_THREADS must be >= 1, got {raw!r}")
        return w
    return min(4, os.cpu_count() or 1)


def thread_map(fn, items):
    """Map fn over items, in order, on up to max_workers() threads."""
    items = list(items)
    w = min(max_workers(), len(items))
    if w <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))
