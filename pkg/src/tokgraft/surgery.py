"""Vocabulary transplant pipeline.

Extract Cyrillic-bearing candidate tokens from donor vocabularies, make
them reachable by appending forming merges (a candidate is placed once it
decomposes into exactly two existing tokens), score unprotected tokens by
log-smoothed corpus frequency, and swap the lowest-scoring ones out so the
total vocabulary size never changes.
"""

import math
import unicodedata
from dataclasses import dataclass, field
from typing import Optional

from .bytemap import render
from .core import (BpeModel, MergeGraph, MergeRule, build_merge_graph,
                   decomposition)
from .errors import CapacityError
from .metrics import FreqTable

CYRILLIC_RANGES = ((0x0400, 0x04FF), (0x0500, 0x052F))

PROTECTION_CLASSES = ("short-unit", "cyrillic", "pure-latin", "punctuation")

_LATIN_LETTER_RANGES = (
    (0x41, 0x5A), (0x61, 0x7A),      # ASCII letters
    (0xC0, 0xFF),                     # Latin-1 letters (x/÷ excluded by category)
    (0x100, 0x24F),                   # Latin Extended-A/B
    (0x1E00, 0x1EFF),                 # Latin Extended Additional
)


def _is_cyrillic(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in CYRILLIC_RANGES)


def count_cyrillic(token: bytes) -> int:
    """Cyrillic code points in the UTF-8 decoding; 0 if not valid UTF-8."""
    try:
        text = token.decode("utf-8")
    except UnicodeDecodeError:
        return 0
    return sum(1 for c in text if _is_cyrillic(ord(c)))


def _is_latin_letter(c: str) -> bool:
    cp = ord(c)
    if not any(lo <= cp <= hi for lo, hi in _LATIN_LETTER_RANGES):
        return False
    return unicodedata.category(c).startswith("L")


def protection_class(token: bytes) -> Optional[str]:
    """Protection class of a token, or None if it is removable.

    Precedence: short-unit (<=2 code points, or <=2 bytes when not valid
    UTF-8), cyrillic (>=1 Cyrillic code point), pure-latin (all Latin
    letters, one leading space allowed), punctuation (all P*/S*).
    """
    try:
        text = token.decode("utf-8")
    except UnicodeDecodeError:
        return "short-unit" if len(token) <= 2 else None
    if len(text) <= 2:
        return "short-unit"
    if any(_is_cyrillic(ord(c)) for c in text):
        return "cyrillic"
    body = text[1:] if text[0] == " " else text
    if body and all(_is_latin_letter(c) for c in body):
        return "pure-latin"
    if all(unicodedata.category(c)[0] in "PS" for c in text):
        return "punctuation"
    return None


@dataclass
class ProtectedSet:
    ids: set[int]
    reason: dict[int, str]

    def class_counts(self) -> dict[str, int]:
        counts = {cls: 0 for cls in PROTECTION_CLASSES}
        for cls in self.reason.values():
            counts[cls] += 1
        return counts


def classify_protected(model: BpeModel) -> ProtectedSet:
    ids: set[int] = set()
    reason: dict[int, str] = {}
    for tid, token in enumerate(model.vocab):
        cls = protection_class(token)
        if cls is not None:
            ids.add(tid)
            reason[tid] = cls
    return ProtectedSet(ids, reason)


@dataclass
class CandidateEntry:
    token: bytes
    donors: tuple[str, ...]


@dataclass
class CandidateSet:
    """Deduplicated Cyrillic-bearing token strings, in extraction order."""
    entries: list[CandidateEntry]

    def __len__(self):
        return len(self.entries)


def extract_candidates(donors: list[tuple[str, BpeModel]],
                       min_cyrillic: int = 1) -> CandidateSet:
    """Union of donor tokens with >= min_cyrillic Cyrillic code points.

    Entries keep the order of first appearance (donors in the given order,
    each donor's vocabulary in id order) and record every donor containing
    the byte sequence.  Tokens already present in a base vocabulary are not
    filtered here; the transplant skips them.
    """
    if not donors:
        raise ValueError("candidate extraction needs at least one donor")
    if min_cyrillic < 1:
        raise ValueError("min_cyrillic must be >= 1")
    provenance: dict[bytes, set[str]] = {}
    order: list[bytes] = []
    for label, donor in donors:
        for token in donor.vocab:
            if count_cyrillic(token) >= min_cyrillic:
                if token not in provenance:
                    provenance[token] = set()
                    order.append(token)
                provenance[token].add(label)
    entries = [CandidateEntry(tok, tuple(sorted(provenance[tok]))) for tok in order]
    return CandidateSet(entries)


@dataclass
class PassRecord:
    index: int
    reachable: int      # cumulative candidates placed after this pass
    merges_added: int


@dataclass
class PassStats:
    passes: list[PassRecord]
    candidates_total: int   # candidates processed (single bytes excluded)
    placed_total: int
    candidates_new: int     # processed candidates absent from the base vocab
    placed_new: int
    skipped: list[bytes] = field(default_factory=list)  # single-byte candidates

    @property
    def reachable_fraction(self) -> float:
        if self.candidates_total == 0:
            return 1.0
        return self.placed_total / self.candidates_total

    @property
    def reachable_fraction_new(self) -> float:
        if self.candidates_new == 0:
            return 1.0
        return self.placed_new / self.candidates_new


@dataclass
class _Placement:
    token: bytes
    result_id: int            # id in the augmented model
    pass_index: int
    merge: Optional[tuple[int, int]]   # (left, right) ids, None if no merge added
    vocab_added: bool
    append_order: int         # position among appended merges, -1 if none


@dataclass
class _Refinement:
    model: BpeModel
    stats: PassStats
    placements: dict[bytes, _Placement]       # placed candidates
    placed_order: list[bytes]                 # extraction order restricted to placed
    unplaced: list[bytes]                     # extraction order, never placed


def _refine(base: BpeModel, candidates: CandidateSet, max_passes: int) -> _Refinement:
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    skipped = [e.token for e in candidates.entries if len(e.token) == 1]
    pending = [e.token for e in candidates.entries if len(e.token) > 1]
    candidates_new = sum(1 for t in pending if t not in base.token_ids)

    model = base
    has_forming = {m.result for m in base.merges}
    placements: dict[bytes, _Placement] = {}
    placed_order: list[bytes] = []
    records: list[PassRecord] = []
    append_order = 0

    for pass_index in range(1, max_passes + 1):
        placed_before = len(placements)
        additions: list[tuple[bytes, tuple[int, int]]] = []
        still_pending: list[bytes] = []
        for token in pending:
            pieces = decomposition(model, token)
            if len(pieces) == 1:
                placements[token] = _Placement(token, pieces[0], pass_index, None, False, -1)
                placed_order.append(token)
            elif len(pieces) == 2:
                existing = model.token_ids.get(token)
                if existing is not None and existing in has_forming:
                    # already has a (preempted) forming merge; a second one
                    # would break the one-forming-merge invariant
                    still_pending.append(token)
                else:
                    additions.append((token, (pieces[0], pieces[1])))
            else:
                still_pending.append(token)
        pending = still_pending

        if additions:
            vocab = list(model.vocab)
            merges = [(m.left, m.right) for m in model.merges]
            for token, (left, right) in additions:
                result_id = model.token_ids.get(token)
                vocab_added = result_id is None
                if vocab_added:
                    result_id = len(vocab)
                    vocab.append(token)
                merges.append((left, right))
                has_forming.add(result_id)
                placements[token] = _Placement(
                    token, result_id, pass_index, (left, right), vocab_added, append_order)
                placed_order.append(token)
                append_order += 1
            model = BpeModel(vocab, merges, model.pretokenizer, dict(model.metadata))

        records.append(PassRecord(pass_index, len(placements), len(additions)))
        if not pending or len(placements) == placed_before:
            break

    stats = PassStats(
        passes=records,
        candidates_total=len(placements) + len(pending),
        placed_total=len(placements),
        candidates_new=candidates_new,
        placed_new=sum(1 for p in placements.values() if p.vocab_added),
        skipped=skipped,
    )
    return _Refinement(model, stats, placements, placed_order, pending)


def refine_reachability(base: BpeModel, candidates: CandidateSet,
                        max_passes: int = 4) -> tuple[BpeModel, PassStats]:
    """Append forming merges until candidates are reachable or passes run out.

    Each pass evaluates every still-unplaced candidate against the model as
    it stood at the start of the pass; two-piece decompositions gain a merge
    appended after all existing merges.  Stops early on a pass that places
    nothing.  Single-byte candidates are recorded in stats.skipped.
    """
    refinement = _refine(base, candidates, max_passes)
    return refinement.model, refinement.stats


@dataclass
class RemovalRanking:
    """Removable tokens ordered worst-first.

    Ascending by ln(1+count), ties by shorter byte length then
    lexicographic bytes.  Protected tokens and tokens excluded by the
    removal closure never appear.
    """
    entries: list[tuple[int, float]]

    def __len__(self):
        return len(self.entries)


def removable_closure(graph: MergeGraph, proposed: set[int],
                      protected: ProtectedSet) -> set[int]:
    """Largest subset of proposed that no retained token's forming merge needs.

    A token leaves the set when some merge using it as left or right forms a
    token that stays; the check iterates because each departure can strand
    further tokens.
    """
    if proposed & protected.ids:
        raise ValueError("proposed removals overlap the protected set")
    removable = set(proposed)
    worklist = [
        t for t in proposed
        if any(m.result not in removable for m in graph.dependents.get(t, ()))
    ]
    while worklist:
        t = worklist.pop()
        if t not in removable:
            continue
        if all(m.result in removable for m in graph.dependents.get(t, ())):
            continue
        removable.discard(t)
        forming = graph.forming_edge.get(t)
        if forming is not None:
            for dep in (forming.left, forming.right):
                if dep in removable:
                    worklist.append(dep)
    return removable


def score_removal(model: BpeModel, freqs: FreqTable,
                  protected: ProtectedSet) -> RemovalRanking:
    """Rank removal-eligible tokens by log-smoothed corpus frequency."""
    size = len(model.vocab)
    for tid in freqs.counts:
        if not 0 <= tid < size:
            raise ValueError(f"frequency table references unknown token id {tid}")
    graph = build_merge_graph(model)
    proposed = set(range(size)) - protected.ids
    eligible = removable_closure(graph, proposed, protected)
    entries = [(tid, math.log1p(freqs.counts.get(tid, 0))) for tid in eligible]
    entries.sort(key=lambda e: (e[1], len(model.vocab[e[0]]), model.vocab[e[0]]))
    return RemovalRanking(entries)


def _required_removals(graph: MergeGraph, token: int, already: set[int]) -> set[int]:
    """Tokens that must leave with `token` so no retained merge dangles.

    Everything reached here stays inside the closure-filtered ranking: the
    closure already dropped any token whose dependent chain escapes it.
    """
    needed: set[int] = set()
    stack = [token]
    while stack:
        t = stack.pop()
        if t in needed or t in already:
            continue
        needed.add(t)
        for m in graph.dependents.get(t, ()):
            if m.result not in already and m.result not in needed:
                stack.append(m.result)
    return needed


def _select_removals(graph: MergeGraph, ranking: RemovalRanking, k: int) -> list[int]:
    """Pick exactly k tokens, lowest-scored first, keeping the set closed.

    Taking a token drags in every token whose forming merge would otherwise
    dangle (always ranked, by construction of the ranking).  Tokens whose
    drag-in set exceeds the remaining budget are skipped; repeated sweeps
    pick them up once enough of their dependents are already chosen.
    """
    if k == 0:
        return []
    eligible = {tid for tid, _ in ranking.entries}
    if k > len(eligible):
        raise CapacityError(
            f"asked to remove {k} tokens but only {len(eligible)} are eligible "
            f"(short by {k - len(eligible)})")
    chosen: set[int] = set()
    progress = True
    while len(chosen) < k and progress:
        progress = False
        for tid, _ in ranking.entries:
            if tid in chosen:
                continue
            needed = _required_removals(graph, tid, chosen)
            if len(chosen) + len(needed) <= k:
                chosen.update(needed)
                progress = True
                if len(chosen) == k:
                    break
    if len(chosen) < k:
        raise CapacityError(
            f"could not assemble a closed removal set of {k} tokens "
            f"(reached {len(chosen)})")
    # report in ranking order, not selection order
    return [tid for tid, _ in ranking.entries if tid in chosen]


@dataclass
class TransplantResult:
    model: BpeModel
    removed: list[tuple[int, bytes]]        # (base-model id, bytes)
    added: list[tuple[bytes, MergeRule]]    # token bytes, forming merge in result model
    unplaced: list[bytes]
    stats: PassStats


def transplant(base: BpeModel, candidates: CandidateSet, freqs: FreqTable,
               k: int | str = "auto", max_passes: int = 4) -> TransplantResult:
    """Swap k low-frequency removable tokens for k reachable candidates.

    Vocabulary size is preserved exactly.  The removed set is kept closed
    (no retained merge references a removed token), so encodings of
    Cyrillic-free text that avoid the removed tokens are unchanged.
    """
    refinement = _refine(base, candidates, max_passes)

    placements = refinement.placements
    new_candidates = [e.token for e in candidates.entries
                      if e.token in placements and placements[e.token].vocab_added]
    if k == "auto":
        k_value = len(new_candidates)
    else:
        k_value = int(k)
        if k_value < 0:
            raise ValueError("k must be >= 0 or 'auto'")
        if k_value > len(new_candidates):
            raise CapacityError(
                f"asked to add {k_value} candidates but only "
                f"{len(new_candidates)} are placeable (short by "
                f"{k_value - len(new_candidates)})")

    # Select which placed candidates to graft: walk extraction order, and
    # pull in candidate-chain dependencies (a merge may build on a token
    # another candidate introduced in an earlier pass).  Chains that exceed
    # the remaining budget are swept again once their dependencies have been
    # selected through other chains.
    id_to_token = {p.result_id: t for t, p in placements.items()
                   if p.merge is not None}
    selected: set[bytes] = set()

    def chain(token: bytes) -> tuple[set[bytes], int]:
        tokens: set[bytes] = set()
        new_count = 0
        stack = [token]
        while stack:
            t = stack.pop()
            if t in tokens or t in selected:
                continue
            tokens.add(t)
            p = placements[t]
            if p.vocab_added:
                new_count += 1
            if p.merge is not None:
                for dep in p.merge:
                    dep_token = id_to_token.get(dep)
                    if dep_token is not None:
                        stack.append(dep_token)
        return tokens, new_count

    budget = k_value
    progress = True
    while budget > 0 and progress:
        progress = False
        for token in new_candidates:
            if token in selected:
                continue
            tokens, new_count = chain(token)
            if 0 < new_count <= budget:
                selected.update(tokens)
                budget -= new_count
                progress = True
            if budget == 0:
                break
    if budget != 0:
        raise CapacityError(
            f"could not select {k_value} placeable candidates (short by {budget})")

    # Trimmed model: base plus only the selected additions, in append order.
    appended = sorted(
        (placements[t] for t in selected if placements[t].merge is not None),
        key=lambda p: p.append_order)
    aug_to_trim: dict[int, int] = {}
    vocab = list(base.vocab)
    merges = [(m.left, m.right) for m in base.merges]
    added_tokens: list[bytes] = []
    for p in appended:
        if p.vocab_added:
            aug_to_trim[p.result_id] = len(vocab)
            vocab.append(p.token)
            added_tokens.append(p.token)
        left, right = p.merge
        merges.append((aug_to_trim.get(left, left), aug_to_trim.get(right, right)))
    trimmed = BpeModel(vocab, merges, base.pretokenizer, dict(base.metadata))

    # Score and select removals on the trimmed model.
    protected = classify_protected(trimmed)
    graph = build_merge_graph(trimmed)
    ranking = score_removal(trimmed, freqs, protected)
    removed_ids = _select_removals(graph, ranking, k_value)
    removed_set = set(removed_ids)

    # Assemble the final model: retained base tokens keep relative order,
    # grafted tokens are appended; merges touching a removed token go.
    final_vocab: list[bytes] = []
    trim_to_final: dict[int, int] = {}
    for tid, token in enumerate(trimmed.vocab):
        if tid in removed_set:
            continue
        trim_to_final[tid] = len(final_vocab)
        final_vocab.append(token)
    final_merges = [
        (trim_to_final[m.left], trim_to_final[m.right])
        for m in trimmed.merges
        if m.left not in removed_set and m.right not in removed_set
        and m.result not in removed_set
    ]
    final = BpeModel(final_vocab, final_merges, base.pretokenizer, dict(base.metadata))

    forming = {m.result: m for m in final.merges}
    added = [(tok, forming[final.token_ids[tok]]) for tok in added_tokens]
    removed = [(tid, trimmed.vocab[tid]) for tid in removed_ids]
    return TransplantResult(final, removed, added, refinement.unplaced,
                            refinement.stats)


def report_dict(result: TransplantResult) -> dict:
    """Surgery report in the documented JSON layout."""
    return {
        "passes": [
            {"pass": r.index, "reachable": r.reachable, "merges_added": r.merges_added}
            for r in result.stats.passes
        ],
        "removed": [render(tok) for _, tok in result.removed],
        "added": [render(tok) for tok, _ in result.added],
        "unplaced": [render(tok) for tok in result.unplaced],
    }
