"""Hot merge-loop kernels.

Encoding a pretoken is a tight integer loop: repeatedly find the adjacent
token pair whose merge has the lowest rank (leftmost occurrence on ties)
and contract it.  The loop runs once per word over whole corpora, so it is
implemented twice over the same packed table:

* a numba ``@njit`` kernel (default), and
* a pure-numpy fallback, selected with ``TOKGRAFT_JIT=0`` or used
  automatically when numba is not importable.

Both take the merge table as three aligned int64 arrays sorted by packed
pair key ``left * vocab_size + right``: keys, ranks, results.  They must
produce identical output for identical input; ``benchmarks/bench_encode.py``
compares their throughput.
"""

import os

import numpy as np

_flag = os.environ.get("TOKGRAFT_JIT", "1").strip().lower()
JIT_REQUESTED = _flag not in ("0", "false", "off", "no")

if JIT_REQUESTED:
    try:
        from numba import njit

        JIT_ENABLED = True
    except ImportError:
        JIT_ENABLED = False
else:
    JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


NO_MERGE = np.int64(-1)


@njit(cache=True)
def _find_key(keys, key):
    lo = 0
    hi = keys.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys.shape[0] and keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def _merge_loop_jit(ids, keys, ranks, results, vocab_size):
    n = ids.shape[0]
    toks = ids.copy()
    while n >= 2:
        best_rank = np.int64(0)
        best_pos = -1
        best_j = -1
        for i in range(n - 1):
            key = toks[i] * vocab_size + toks[i + 1]
            j = _find_key(keys, key)
            if j >= 0 and (best_pos < 0 or ranks[j] < best_rank):
                best_rank = ranks[j]
                best_pos = i
                best_j = j
        if best_pos < 0:
            break
        toks[best_pos] = results[best_j]
        for i in range(best_pos + 1, n - 1):
            toks[i] = toks[i + 1]
        n -= 1
    return toks[:n].copy()


def _merge_loop_np(ids, keys, ranks, results, vocab_size):
    toks = ids
    if keys.shape[0] == 0:
        return toks.copy()
    sentinel = np.iinfo(np.int64).max
    while toks.shape[0] >= 2:
        pair_keys = toks[:-1] * vocab_size + toks[1:]
        j = np.searchsorted(keys, pair_keys)
        j_safe = np.minimum(j, keys.shape[0] - 1)
        hit = keys[j_safe] == pair_keys
        if not hit.any():
            break
        pair_ranks = np.where(hit, ranks[j_safe], sentinel)
        pos = int(np.argmin(pair_ranks))  # argmin takes the leftmost tie
        result = results[j_safe[pos]]
        toks = np.concatenate((toks[:pos], (result,), toks[pos + 2:]))
    return toks.astype(np.int64, copy=True)


def merge_word(ids, keys, ranks, results, vocab_size):
    """Contract adjacent pairs until no merge applies; returns a new array."""
    if JIT_ENABLED:
        return _merge_loop_jit(ids, keys, ranks, results, vocab_size)
    return _merge_loop_np(ids, keys, ranks, results, vocab_size)


def engine_name() -> str:
    return "numba" if JIT_ENABLED else "numpy"
