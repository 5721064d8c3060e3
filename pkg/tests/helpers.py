"""Shared builders for tests: small models and randomized model/text pairs."""

import random

from tokgraft.core import BpeModel

BYTES256 = [bytes([i]) for i in range(256)]


def model_with(extra: list[bytes], merges: list[tuple[int, int]],
               pretokenizer: str = "none") -> BpeModel:
    """Byte-complete model plus the given tokens and (left, right) merges."""
    return BpeModel(BYTES256 + extra, merges, pretokenizer)


def ascii_model(words_merges: list[tuple[str, str]],
                pretokenizer: str = "none") -> BpeModel:
    """Model from merges written as rendered ASCII pairs, e.g. [("a","b")]."""
    vocab = list(BYTES256)
    ids = {tok: i for i, tok in enumerate(vocab)}
    merges = []
    for left, right in words_merges:
        lb, rb = left.encode(), right.encode()
        joined = lb + rb
        if joined not in ids:
            ids[joined] = len(vocab)
            vocab.append(joined)
        merges.append((ids[lb], ids[rb]))
    return BpeModel(vocab, merges, pretokenizer)


def random_model(rng: random.Random, max_merges: int = 64,
                 pretokenizer: str = "none") -> BpeModel:
    """Byte-complete model with random well-formed merges."""
    vocab = list(BYTES256)
    ids = {tok: i for i, tok in enumerate(vocab)}
    merges: list[tuple[int, int]] = []
    target = rng.randint(0, max_merges)
    attempts = 0
    while len(merges) < target and attempts < target * 10 + 10:
        attempts += 1
        left = rng.randrange(len(vocab))
        right = rng.randrange(len(vocab))
        joined = vocab[left] + vocab[right]
        if joined in ids or len(joined) > 16:
            continue
        ids[joined] = len(vocab)
        vocab.append(joined)
        merges.append((left, right))
    return BpeModel(vocab, merges, pretokenizer)


def random_text(rng: random.Random, model: BpeModel, max_len: int = 64) -> bytes:
    """Random bytes biased toward sequences the model's merges can hit."""
    style = rng.random()
    if style < 0.3:
        n = rng.randint(0, max_len)
        return bytes(rng.randrange(256) for _ in range(n))
    pieces = []
    size = 0
    while size < max_len:
        tok = model.vocab[rng.randrange(len(model.vocab))]
        if size + len(tok) > max_len:
            break
        pieces.append(tok)
        size += len(tok)
        if rng.random() < 0.15:
            break
    return b"".join(pieces)


def as_triples(model: BpeModel) -> list[tuple[int, int, int]]:
    """Model merges in the (left, right, result) form the oracle takes."""
    return [(m.left, m.right, m.result) for m in model.merges]
