"""Throughput comparison of the two merge-loop engines.

Encodes the bundled corpora many times over with the numba kernel and the
pure-numpy fallback and reports words/second for each.  Usage:

    python3 benchmarks/bench_encode.py [MODEL_JSON] [REPEATS]

Defaults to the bundled surgered toy model and 50 repeats.
"""

import sys
import time
from pathlib import Path

import numpy as np

ROOT = Path(__file__).parent.parent

from tokgraft import kernels
from tokgraft.metrics import iter_words
from tokgraft.model_io import load_model


def gather_words(repeats: int) -> list[bytes]:
    words = []
    for name in ("corpus_bilingual.txt", "corpus_cyrillic.txt"):
        text = (ROOT / "tests" / "fixtures" / name).read_text(encoding="utf-8")
        words.extend(w.encode("utf-8") for w in iter_words(text))
    return words * repeats


def run_engine(fn, model, words) -> tuple[float, int]:
    keys, ranks, results = model.packed_merges()
    size = len(model.vocab)
    byte_to_id = model.byte_to_id
    total_tokens = 0
    started = time.perf_counter()
    for word in words:
        ids = byte_to_id[np.frombuffer(word, dtype=np.uint8)]
        total_tokens += fn(ids, keys, ranks, results, size).shape[0]
    return time.perf_counter() - started, total_tokens


def main() -> None:
    model_path = sys.argv[1] if len(sys.argv) > 1 else \
        ROOT / "tests" / "fixtures" / "toy_surgered.json"
    repeats = int(sys.argv[2]) if len(sys.argv) > 2 else 50
    model = load_model(model_path)
    words = gather_words(repeats)
    print(f"model: {model_path} ({len(model.vocab)} tokens, "
          f"{len(model.merges)} merges)")
    print(f"corpus: {len(words)} words ({repeats}x bundled fixtures)")

    engines = []
    if kernels.JIT_ENABLED:
        kernels._merge_loop_jit(np.array([97, 98], dtype=np.int64),
                                *model.packed_merges(), len(model.vocab))  # warmup
        engines.append(("numba", kernels._merge_loop_jit))
    else:
        print("numba engine unavailable (not installed or TOKGRAFT_JIT=0)")
    engines.append(("numpy", kernels._merge_loop_np))

    results = {}
    for name, fn in engines:
        elapsed, tokens = run_engine(fn, model, words)
        results[name] = elapsed
        print(f"{name:>6}: {elapsed:8.3f}s   {len(words) / elapsed:12,.0f} words/s   "
              f"{tokens / elapsed:12,.0f} tokens/s")
    if len(results) == 2:
        print(f"speedup: {results['numpy'] / results['numba']:.1f}x "
              f"(numba over numpy)")


if __name__ == "__main__":
    main()
