import math
import random

import pytest

from helpers import BYTES256, model_with

from tokgraft.core import (BpeModel, build_merge_graph, encode,
                           is_self_reachable)
from tokgraft.errors import CapacityError
from tokgraft.metrics import FreqTable
from tokgraft.surgery import (CandidateEntry, CandidateSet, ProtectedSet,
                              classify_protected, count_cyrillic,
                              extract_candidates, protection_class,
                              refine_reachability, removable_closure,
                              report_dict, score_removal, transplant)

П = "п".encode()
Р = "р".encode()
И = "и".encode()
ПР = "пр".encode()
ПРИ = "при".encode()


def cands(*tokens: bytes) -> CandidateSet:
    return CandidateSet([CandidateEntry(t, ("test",)) for t in tokens])


def cyrillic_base(extra: list[bytes] = (), merges: list[tuple[int, int]] = ()) -> BpeModel:
    """Bytes + п/р/и as self-reachable tokens, plus whatever the test adds."""
    vocab = BYTES256 + [П, Р, И] + list(extra)
    base_merges = [(0xD0, 0xBF), (0xD1, 0x80), (0xD0, 0xB8)]
    return BpeModel(vocab, base_merges + list(merges), "none")


class TestProtectionClasses:
    def test_short_unit(self):
        assert protection_class(b"th") == "short-unit"
        assert protection_class(" a".encode()) == "short-unit"
        assert protection_class("пр".encode()) == "short-unit"

    def test_cyrillic(self):
        assert protection_class(ПРИ) == "cyrillic"
        assert protection_class("abcд".encode()) == "cyrillic"

    def test_pure_latin(self):
        assert protection_class(b"hello") == "pure-latin"
        assert protection_class(b" hello") == "pure-latin"
        assert protection_class("cafés".encode()) == "pure-latin"

    def test_punctuation(self):
        assert protection_class(b"!!!") == "punctuation"
        assert protection_class(b"...)") == "punctuation"

    def test_unprotected(self):
        assert protection_class(b"x9z") is None
        assert protection_class(b"  hello") is None  # two leading spaces
        assert protection_class(b"abc1") is None

    def test_invalid_utf8(self):
        assert protection_class(b"\xd0\xff") == "short-unit"  # 2 bytes
        assert protection_class(b"\xd0\xff\xff\xff") is None

    def test_count_cyrillic(self):
        assert count_cyrillic(ПРИ) == 3
        assert count_cyrillic(b"the") == 0
        assert count_cyrillic("к2".encode()) == 1
        assert count_cyrillic(b"\xd0") == 0  # invalid utf-8

    def test_classify_model(self):
        model = model_with([b"x9z", b"hello", ПРИ, b"!!!"], [])
        protected = classify_protected(model)
        reasons = {model.vocab[tid]: cls for tid, cls in protected.reason.items()}
        assert reasons[b"hello"] == "pure-latin"
        assert reasons[ПРИ] == "cyrillic"
        assert reasons[b"!!!"] == "punctuation"
        assert b"x9z" not in reasons
        # every single byte is a 1-codepoint (or opaque 1-byte) unit
        assert all(tid in protected.ids for tid in range(256))
        counts = protected.class_counts()
        assert counts["short-unit"] == 256
        assert len(protected.ids) == 256 + 3


class TestExtractCandidates:
    def test_union_with_provenance(self):
        d1 = model_with([ПРИ, b"the"], [])
        d2 = model_with([ПР, ПРИ, "к2".encode()], [])
        out = extract_candidates([("D1", d1), ("D2", d2)])
        by_token = {e.token: e.donors for e in out.entries}
        assert by_token == {ПРИ: ("D1", "D2"), ПР: ("D2",), "к2".encode(): ("D2",)}
        # extraction order: first appearance
        assert [e.token for e in out.entries] == [ПРИ, ПР, "к2".encode()]

    def test_no_cyrillic_tokens(self):
        donor = model_with([b"the", b"and"], [])
        assert extract_candidates([("d", donor)]).entries == []

    def test_zero_donors(self):
        with pytest.raises(ValueError):
            extract_candidates([])

    def test_min_cyrillic(self):
        donor = model_with(["к2".encode(), ПР], [])
        out = extract_candidates([("d", donor)], min_cyrillic=2)
        assert [e.token for e in out.entries] == [ПР]


class TestRefineReachability:
    def test_two_pass_trace(self):
        base = cyrillic_base()
        model, stats = refine_reachability(base, cands(ПР, ПРИ))
        assert [(r.index, r.reachable, r.merges_added) for r in stats.passes] == [
            (1, 1, 1), (2, 2, 1)]
        assert stats.reachable_fraction == 1.0
        # both grafted tokens form themselves
        assert is_self_reachable(model, model.token_ids[ПР])
        assert is_self_reachable(model, model.token_ids[ПРИ])
        # merges were appended after all existing ones
        assert model.merges[-1].result == model.token_ids[ПРИ]
        assert len(model.vocab) == len(base.vocab) + 2

    def test_pass_start_semantics(self):
        # ПРИ is evaluated against the pass-start model, so it cannot ride
        # the merge ПР gains in the same pass, whatever the candidate order.
        base = cyrillic_base()
        for candidates in (cands(ПР, ПРИ), cands(ПРИ, ПР)):
            _, stats = refine_reachability(base, candidates)
            assert [r.reachable for r in stats.passes] == [1, 2]

    def test_already_reachable(self):
        base = cyrillic_base()
        model, stats = refine_reachability(base, cands(П, Р))
        assert model == base
        assert [(r.reachable, r.merges_added) for r in stats.passes] == [(2, 0)]

    def test_unreachable_stays_unplaced(self):
        base = cyrillic_base()
        # ни has no candidate to bridge its halves beyond one merge, but
        # нил needs (ни, л) where ни never enters the vocabulary
        нил = "нил".encode()
        model, stats = refine_reachability(base, cands(нил), max_passes=4)
        assert stats.placed_total == 0
        assert stats.reachable_fraction == 0.0
        assert model == base

    def test_single_byte_skipped(self):
        base = cyrillic_base()
        model, stats = refine_reachability(base, cands(b"x", ПР))
        assert stats.skipped == [b"x"]
        assert stats.placed_total == 1
        assert stats.candidates_total == 1

    def test_max_passes_limits_depth(self):
        base = cyrillic_base()
        # chain needs 2 passes; with max_passes=1 the tail stays out
        _, stats = refine_reachability(base, cands(ПР, ПРИ), max_passes=1)
        assert stats.placed_total == 1
        assert stats.reachable_fraction == 0.5

    def test_preempted_in_vocab_candidate_unplaceable(self):
        # abc sits in the vocabulary with a forming merge that (b,c)
        # preempts; a second forming merge is not allowed, so it can
        # never be placed.
        vocab = BYTES256 + [b"bc", b"ab", b"abc"]
        base = BpeModel(vocab, [(ord("b"), ord("c")), (ord("a"), ord("b")),
                                (257, ord("c"))], "none")
        model, stats = refine_reachability(base, cands(b"abc"))
        assert stats.placed_total == 0
        assert model == base

    def test_monotone_reachable_counts(self):
        base = cyrillic_base()
        tokens = [П + Р * n for n in range(1, 6)]
        _, stats = refine_reachability(base, cands(*tokens), max_passes=4)
        counts = [r.reachable for r in stats.passes]
        assert counts == sorted(counts)


class TestRemovableClosure:
    def _graph(self):
        model = model_with([b"ab", b"abc"], [(ord("a"), ord("b")), (256, ord("c"))])
        return model, build_merge_graph(model)

    def test_load_bearing_token_excluded(self):
        model, graph = self._graph()
        ab = model.token_ids[b"ab"]
        out = removable_closure(graph, {ab}, ProtectedSet(set(), {}))
        assert out == set()

    def test_dependent_removed_together(self):
        model, graph = self._graph()
        ab, abc = model.token_ids[b"ab"], model.token_ids[b"abc"]
        out = removable_closure(graph, {ab, abc}, ProtectedSet(set(), {}))
        assert out == {ab, abc}

    def test_no_dependents_unchanged(self):
        model = model_with([b"x9z", b"q7w"], [])
        graph = build_merge_graph(model)
        proposed = {model.token_ids[b"x9z"], model.token_ids[b"q7w"]}
        assert removable_closure(graph, proposed, ProtectedSet(set(), {})) == proposed

    def test_protected_overlap_rejected(self):
        model, graph = self._graph()
        ab = model.token_ids[b"ab"]
        with pytest.raises(ValueError):
            removable_closure(graph, {ab}, ProtectedSet({ab}, {ab: "short-unit"}))

    def test_chain_collapse(self):
        # removing the bottom of a three-link chain strands everything above
        model = model_with([b"ab", b"abc", b"abcd"],
                           [(ord("a"), ord("b")), (256, ord("c")), (257, ord("d"))])
        graph = build_merge_graph(model)
        ab = model.token_ids[b"ab"]
        abc = model.token_ids[b"abc"]
        abcd = model.token_ids[b"abcd"]
        assert removable_closure(graph, {ab}, ProtectedSet(set(), {})) == set()
        assert removable_closure(graph, {ab, abc}, ProtectedSet(set(), {})) == set()
        assert removable_closure(graph, {ab, abc, abcd}, ProtectedSet(set(), {})) == {ab, abc, abcd}


class TestScoreRemoval:
    def test_log_smoothing(self):
        model = model_with([b"x9z", b"q7w3"], [])
        protected = classify_protected(model)
        x9z = model.token_ids[b"x9z"]
        q7w3 = model.token_ids[b"q7w3"]
        freqs = FreqTable({q7w3: 9}, 9, "t")
        ranking = score_removal(model, freqs, protected)
        scores = dict(ranking.entries)
        assert scores[x9z] == 0.0
        assert scores[q7w3] == pytest.approx(math.log(10), abs=1e-12)
        assert ranking.entries[0][0] == x9z

    def test_tie_order_shorter_then_lexicographic(self):
        model = model_with([b"x9z1", b"x9z", b"a1c"], [])
        protected = classify_protected(model)
        ranking = score_removal(model, FreqTable({}, 0, "t"), protected)
        tokens = [model.vocab[tid] for tid, _ in ranking.entries]
        assert tokens == [b"a1c", b"x9z", b"x9z1"]

    def test_unknown_id_rejected(self):
        model = model_with([], [])
        with pytest.raises(ValueError):
            score_removal(model, FreqTable({9999: 1}, 1, "t"), classify_protected(model))

    def test_excludes_protected_and_closure(self):
        model = model_with([b"x9z", b"x9zq", b"hello"],
                           [(256, ord("q"))])  # x9z + q -> x9zq
        protected = classify_protected(model)
        ranking = score_removal(model, FreqTable({}, 0, "t"), protected)
        ranked = {model.vocab[tid] for tid, _ in ranking.entries}
        # hello is pure-latin; x9z is load-bearing only if x9zq is retained,
        # and x9zq is proposed too, so both stay eligible
        assert ranked == {b"x9z", b"x9zq"}


class TestTransplant:
    def _base(self, junk=(b"x9z", b"q7w", b"m4k")):
        return cyrillic_base(extra=list(junk))

    def test_swap_trace(self):
        base = self._base()
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k=2)
        assert len(result.model.vocab) == len(base.vocab)
        removed = {tok for _, tok in result.removed}
        # count-0 ties break by byte length then lexicographic bytes
        assert removed == {b"m4k", b"q7w"}
        assert [tok for tok, _ in result.added] == [ПР, ПРИ]
        for tok, _ in result.added:
            assert is_self_reachable(result.model, result.model.token_ids[tok])
        assert result.unplaced == []

    def test_k_auto(self):
        base = self._base()
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k="auto")
        assert len(result.removed) == 2
        assert len(result.added) == 2
        assert len(result.model.vocab) == len(base.vocab)

    def test_k_zero_identity(self):
        from tokgraft.model_io import save_model
        base = self._base()
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k=0)
        assert result.model == base
        assert save_model(result.model) == save_model(base)
        assert result.removed == [] and result.added == []

    def test_k_exceeds_placeable(self):
        base = self._base()
        with pytest.raises(CapacityError, match="placeable"):
            transplant(base, cands(ПР), FreqTable({}, 0, "t"), k=5)

    def test_k_exceeds_eligible_removals(self):
        base = self._base(junk=(b"x9z",))
        with pytest.raises(CapacityError, match="eligible"):
            transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k=2)

    def test_dependency_chain_selection(self):
        # selecting ПРИ alone is impossible: its merge builds on ПР.  With
        # budget 1 the walk falls back to П (the only chain that fits).
        vocab = BYTES256 + [b"x9z", b"q7w", b"m4k"]
        base = BpeModel(vocab, [], "none")
        result = transplant(base, cands(ПРИ, ПР, П, Р, И),
                            FreqTable({}, 0, "t"), k=1)
        assert [tok for tok, _ in result.added] == [П]
        assert len(result.removed) == 1

    def test_dependency_chain_pulled_in(self):
        vocab = BYTES256 + [b"x9z", b"q7w", b"m4k", b"j8p", b"w2f"]
        base = BpeModel(vocab, [], "none")
        result = transplant(base, cands(ПР, П, Р, И, ПРИ),
                            FreqTable({}, 0, "t"), k=3)
        # ПР needs П and Р; the chain costs exactly 3
        assert [tok for tok, _ in result.added] == [П, Р, ПР]

    def test_removal_respects_frequency(self):
        base = self._base()
        x9z = base.token_ids[b"x9z"]
        q7w = base.token_ids[b"q7w"]
        m4k = base.token_ids[b"m4k"]
        freqs = FreqTable({q7w: 100, m4k: 50}, 150, "t")
        result = transplant(base, cands(ПР, ПРИ), freqs, k=2)
        removed = {tok for _, tok in result.removed}
        assert removed == {b"x9z", b"m4k"}  # q7w has the highest score

    def test_protected_never_removed(self):
        base = self._base()
        protected = classify_protected(base)
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k="auto")
        removed_ids = {tid for tid, _ in result.removed}
        assert removed_ids.isdisjoint(protected.ids)

    def test_closed_removal_chain(self):
        # junk chain x1a <- x1ab: removing one must drag the other or defer
        vocab = BYTES256 + [b"x1", b"x1a", b"x1ab", b"q7w", b"m4k"]
        merges = [(256, ord("a")), (257, ord("b"))]
        base = BpeModel(vocab, merges, "none")
        result = transplant(base, cands(П), FreqTable({}, 0, "t"), k=1)
        # rank order is m4k, q7w, x1a, x1ab; m4k wins and no chain is split
        assert {tok for _, tok in result.removed} == {b"m4k"}
        graph = build_merge_graph(result.model)  # closure soundness: no dangling refs

    def test_closed_removal_takes_whole_chain(self):
        vocab = BYTES256 + [b"x1", b"x1a", b"x1ab"]
        merges = [(256, ord("a")), (257, ord("b"))]
        base = BpeModel(vocab, merges, "none")
        result = transplant(base, cands(П, Р), FreqTable({}, 0, "t"), k=2)
        assert {tok for _, tok in result.removed} == {b"x1a", b"x1ab"}
        build_merge_graph(result.model)

    def test_non_cyrillic_conservation(self):
        base = self._base()
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k="auto")
        removed = {tok for _, tok in result.removed}
        rng = random.Random(17)
        letters = "abcdefghijklmnopqrstuvwxyz ,.!?0123456789"
        for _ in range(300):
            text = "".join(rng.choice(letters) for _ in range(rng.randint(0, 40))).encode()
            base_ids = encode(base, text)
            if any(base.vocab[t] in removed for t in base_ids):
                continue
            assert [result.model.vocab[t] for t in encode(result.model, text)] == \
                   [base.vocab[t] for t in base_ids]

    def test_unplaced_reported(self):
        base = self._base()
        нил = "нил".encode()
        result = transplant(base, cands(ПР, нил), FreqTable({}, 0, "t"), k="auto")
        assert result.unplaced == [нил]

    def test_metadata_and_scheme_preserved(self):
        vocab = BYTES256 + [b"x9z"]
        base = BpeModel(vocab, [], "whitespace-prefix", {"note": "hi"})
        result = transplant(base, cands(П), FreqTable({}, 0, "t"), k=1)
        assert result.model.pretokenizer == "whitespace-prefix"
        assert result.model.metadata == {"note": "hi"}

    def test_report_layout(self):
        base = self._base()
        result = transplant(base, cands(ПР, ПРИ), FreqTable({}, 0, "t"), k=2)
        report = report_dict(result)
        assert set(report) == {"passes", "removed", "added", "unplaced"}
        assert all(set(p) == {"pass", "reachable", "merges_added"}
                   for p in report["passes"])
        assert all(isinstance(s, str) for s in report["removed"] + report["added"])
