"""Byte-level BPE model: vocabulary, ordered merges, encoding, merge graph.

A model is immutable once constructed; surgery builds new models instead of
mutating.  Encoding is deterministic: within each pretoken the applicable
merge with the lowest rank fires first, leftmost occurrence on rank ties.
"""

import unicodedata
from itertools import groupby
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .errors import CompletenessError, ConfigError, IntegrityError
from .kernels import merge_word

SCHEMES = ("whitespace-prefix", "category-split", "none")


class MergeRule(NamedTuple):
    left: int
    right: int
    result: int
    rank: int


class BpeModel:
    """Vocabulary (id <-> bytes bijection) plus ordered merge rules.

    vocab is a list of byte strings indexed by token id; merges are ranked
    by list position.  Construction validates:

    * every token is non-empty and byte sequences are unique,
    * all 256 single-byte tokens are present (encode is total),
    * merges reference in-range ids and concatenate byte-exactly,
    * no two merges produce the same result token.
    """

    def __init__(self, vocab: list[bytes], merges: Iterable[tuple[int, int]] | Iterable[MergeRule],
                 pretokenizer: str = "whitespace-prefix", metadata: Optional[dict] = None):
        if pretokenizer not in SCHEMES:
            raise ConfigError(f"unknown pretokenizer scheme {pretokenizer!r}; expected one of {SCHEMES}")
        self.vocab: list[bytes] = list(vocab)
        self.pretokenizer = pretokenizer
        self.metadata: dict = metadata if metadata is not None else {}

        self.token_ids: dict[bytes, int] = {}
        for tid, tok in enumerate(self.vocab):
            if not isinstance(tok, bytes):
                raise IntegrityError(f"token {tid} is not a byte string: {tok!r}")
            if len(tok) == 0:
                raise IntegrityError(f"token {tid} is empty")
            if tok in self.token_ids:
                raise IntegrityError(
                    f"duplicate byte sequence {tok!r} at ids {self.token_ids[tok]} and {tid}")
            self.token_ids[tok] = tid
        for b in range(256):
            if bytes([b]) not in self.token_ids:
                raise CompletenessError(f"single-byte token 0x{b:02x} missing from vocabulary")

        size = len(self.vocab)
        self.merges: list[MergeRule] = []
        seen_results: dict[int, int] = {}
        for rank, rule in enumerate(merges):
            if isinstance(rule, MergeRule):
                left, right, result = rule.left, rule.right, rule.result
                if rule.rank != rank:
                    raise IntegrityError(f"merge rank {rule.rank} at list position {rank}")
            else:
                left, right = rule
                result = -1  # resolved below from byte concatenation
            for tid in (left, right):
                if not 0 <= tid < size:
                    raise IntegrityError(f"merge {rank} references unknown token id {tid}")
            joined = self.vocab[left] + self.vocab[right]
            if result == -1:
                result = self.token_ids.get(joined, -1)
                if result == -1:
                    raise IntegrityError(
                        f"merge {rank} result {joined!r} is not in the vocabulary")
            else:
                if not 0 <= result < size:
                    raise IntegrityError(f"merge {rank} references unknown token id {result}")
                if self.vocab[result] != joined:
                    raise IntegrityError(
                        f"merge {rank} bytes mismatch: {self.vocab[left]!r} ++ "
                        f"{self.vocab[right]!r} != {self.vocab[result]!r}")
            if result in seen_results:
                raise IntegrityError(
                    f"duplicate forming merges for token {self.vocab[result]!r} "
                    f"(ranks {seen_results[result]} and {rank})")
            seen_results[result] = rank
            self.merges.append(MergeRule(left, right, result, rank))

        self._byte_to_id: Optional[np.ndarray] = None
        self._packed: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None
        self._word_cache: dict[bytes, tuple[int, ...]] = {}

    def __eq__(self, other):
        if not isinstance(other, BpeModel):
            return NotImplemented
        return (self.vocab == other.vocab and self.merges == other.merges
                and self.pretokenizer == other.pretokenizer
                and self.metadata == other.metadata)

    def __repr__(self):
        return (f"BpeModel(vocab={len(self.vocab)}, merges={len(self.merges)}, "
                f"pretokenizer={self.pretokenizer!r})")

    @property
    def byte_to_id(self) -> np.ndarray:
        if self._byte_to_id is None:
            table = np.empty(256, dtype=np.int64)
            for b in range(256):
                table[b] = self.token_ids[bytes([b])]
            self._byte_to_id = table
        return self._byte_to_id

    def packed_merges(self):
        """Merge table as (keys, ranks, results) int64 arrays sorted by key."""
        if self._packed is None:
            size = len(self.vocab)
            keys = np.fromiter(
                (m.left * size + m.right for m in self.merges), dtype=np.int64,
                count=len(self.merges))
            ranks = np.fromiter((m.rank for m in self.merges), dtype=np.int64,
                                count=len(self.merges))
            results = np.fromiter((m.result for m in self.merges), dtype=np.int64,
                                  count=len(self.merges))
            order = np.argsort(keys)
            self._packed = (keys[order], ranks[order], results[order])
        return self._packed


class MergeGraph:
    """DAG over tokens: one forming edge per merge result, plus the inverse.

    forming_edge maps a result token to the merge that produces it;
    dependents maps a token to the set of merges using it as left or right.
    Acyclic by construction: forming edges strictly decrease byte length.
    """

    def __init__(self, forming_edge: dict[int, MergeRule],
                 dependents: dict[int, set[MergeRule]]):
        self.forming_edge = forming_edge
        self.dependents = dependents


def build_merge_graph(model: BpeModel) -> MergeGraph:
    forming: dict[int, MergeRule] = {}
    dependents: dict[int, set[MergeRule]] = {}
    for m in model.merges:
        joined = model.vocab[m.left] + model.vocab[m.right]
        if len(model.vocab[m.result]) != len(joined):
            raise IntegrityError(
                f"merge {m.rank} result byte length {len(model.vocab[m.result])} != "
                f"{len(joined)}")
        forming[m.result] = m
        dependents.setdefault(m.left, set()).add(m)
        dependents.setdefault(m.right, set()).add(m)
    return MergeGraph(forming, dependents)


def _char_class(c: str) -> str:
    if c.isspace():
        return "ws"
    cat = unicodedata.category(c)
    if cat.startswith("L"):
        return "letter"
    if cat.startswith("N"):
        return "digit"
    return "other"


def pretokenize(text: bytes, scheme: str) -> list[bytes]:
    """Split text into pretokens whose concatenation is exactly the input.

    whitespace-prefix attaches each whitespace run as a prefix of the
    following pretoken (a trailing run stands alone); category-split
    additionally breaks non-whitespace runs at letter/digit/other
    boundaries; none returns the whole input as a single pretoken.
    Undecodable bytes are carried through byte-exactly and treated as
    category "other".
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown pretokenizer scheme {scheme!r}; expected one of {SCHEMES}")
    if not text:
        return []
    if scheme == "none":
        return [text]

    decoded = text.decode("utf-8", errors="surrogateescape")
    if scheme == "whitespace-prefix":
        classify = lambda c: "ws" if c.isspace() else "text"
    else:
        classify = _char_class

    pieces: list[bytes] = []
    pending_ws = ""
    for cls, group in groupby(decoded, classify):
        run = "".join(group)
        if cls == "ws":
            pending_ws = run
        else:
            pieces.append((pending_ws + run).encode("utf-8", errors="surrogateescape"))
            pending_ws = ""
    if pending_ws:
        pieces.append(pending_ws.encode("utf-8", errors="surrogateescape"))
    return pieces


def _merge_pretoken(model: BpeModel, piece: bytes) -> tuple[int, ...]:
    cached = model._word_cache.get(piece)
    if cached is not None:
        return cached
    ids = model.byte_to_id[np.frombuffer(piece, dtype=np.uint8)]
    keys, ranks, results = model.packed_merges()
    out = tuple(int(t) for t in merge_word(ids, keys, ranks, results, len(model.vocab)))
    if len(model._word_cache) < 1_000_000:
        model._word_cache[piece] = out
    return out


def encode(model: BpeModel, text: bytes) -> list[int]:
    """Encode text to token ids under the model's pretokenizer scheme."""
    out: list[int] = []
    for piece in pretokenize(text, model.pretokenizer):
        out.extend(_merge_pretoken(model, piece))
    return out


def encode_word(model: BpeModel, word: bytes) -> list[int]:
    """Encode one bare word (no pretokenization, no space prefix)."""
    if not word:
        raise ValueError("cannot encode an empty word")
    return list(_merge_pretoken(model, word))


def decomposition(model: BpeModel, text: bytes) -> list[int]:
    """How the model splits an arbitrary byte string; text need not be a token."""
    if not text:
        raise ValueError("cannot decompose empty text")
    return encode_word(model, text)


def decode(model: BpeModel, ids: Iterable[int]) -> bytes:
    size = len(model.vocab)
    out = []
    for tid in ids:
        if not 0 <= tid < size:
            raise ValueError(f"token id {tid} out of range for vocabulary of {size}")
        out.append(model.vocab[tid])
    return b"".join(out)


def is_self_reachable(model: BpeModel, token_id: int) -> bool:
    """True iff the token's own byte string encodes back to exactly itself."""
    if not 0 <= token_id < len(model.vocab):
        raise ValueError(f"token id {token_id} out of range for vocabulary of {len(model.vocab)}")
    return encode_word(model, model.vocab[token_id]) == [token_id]
