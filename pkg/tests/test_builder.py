import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_matrix, random_corpus
from textmentor.builder import (
    build_association_matrix,
    build_graph,
    graph_from_raw_text,
    select_concepts,
)
from textmentor.errors import EmptyConcepts, EmptyInput, TooShort
from textmentor.graphs import GraphMeta, edge_key
from textmentor.textprep import Language, RawSubmissionText

CAT_DOG = [["cat", "chase", "dog"], ["dog", "chase", "mouse"]]


class TestAssociationMatrix:
    def test_cat_dog_counts(self):
        m = build_association_matrix(CAT_DOG)
        assert m.terms == ["cat", "chase", "dog", "mouse"]
        assert m.pair_count("cat", "chase") == 1
        assert m.pair_count("cat", "dog") == 1
        assert m.pair_count("chase", "dog") == 2
        assert m.pair_count("chase", "mouse") == 1
        assert m.pair_count("dog", "mouse") == 1
        assert m.pair_count("cat", "mouse") == 0
        assert m.term_freq == {"cat": 1, "chase": 2, "dog": 2, "mouse": 1}

    def test_single_term(self):
        m = build_association_matrix([["a"]])
        assert m.terms == ["a"]
        assert m.counts == [[0]]

    def test_within_sentence_repeats_collapse(self):
        m = build_association_matrix([["a", "a", "b"]])
        assert m.pair_count("a", "b") == 1
        assert m.term_freq == {"a": 1, "b": 1}

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            build_association_matrix([])
        with pytest.raises(EmptyInput):
            build_association_matrix([[], []])

    def test_symmetry_and_zero_diagonal(self):
        m = build_association_matrix(CAT_DOG)
        n = len(m.terms)
        for i in range(n):
            assert m.counts[i][i] == 0
            for j in range(n):
                assert m.counts[i][j] == m.counts[j][i]

    def test_count_bounded_by_term_freq(self):
        m = build_association_matrix(CAT_DOG)
        for i, a in enumerate(m.terms):
            for j, b in enumerate(m.terms):
                if i != j:
                    assert m.counts[i][j] <= min(m.term_freq[a], m.term_freq[b])


class TestSelectConcepts:
    def test_cat_dog_top_two(self):
        m = build_association_matrix(CAT_DOG)
        assert select_concepts(m, 2) == ["chase", "dog"]

    def test_all_terms_when_budget_large(self):
        m = build_association_matrix(CAT_DOG)
        assert select_concepts(m, 99) == ["chase", "dog", "cat", "mouse"]

    def test_lexicographic_tiebreak(self):
        m = build_association_matrix([["b", "a"]])
        assert select_concepts(m, 2) == ["a", "b"]


class TestBuildGraph:
    def test_cat_dog_with_repair(self):
        m = build_association_matrix(CAT_DOG)
        g = build_graph(m, ["chase", "dog", "cat", "mouse"], max_edges=3)
        assert set(g.edges) == {
            ("chase", "dog"),
            ("cat", "chase"),
            ("cat", "dog"),
            ("chase", "mouse"),
        }
        assert g.edges[("chase", "dog")] == 2
        assert g.is_connected()
        assert g.vertices == {"cat": 1, "chase": 2, "dog": 2, "mouse": 1}

    def test_single_concept(self):
        m = build_association_matrix([["a"]])
        g = build_graph(m, ["a"], max_edges=5)
        assert g.vertices == {"a": 1}
        assert g.edges == {}
        assert g.is_connected()

    def test_disconnected_drops_smaller_component(self):
        m = build_association_matrix([["a", "b"], ["c"]])
        g = build_graph(m, ["a", "b", "c"], max_edges=5)
        assert set(g.vertices) == {"a", "b"}
        assert g.meta.isolated_dropped == ("c",)
        assert g.is_connected()

    def test_empty_concepts(self):
        m = build_association_matrix(CAT_DOG)
        with pytest.raises(EmptyConcepts):
            build_graph(m, [], max_edges=3)

    def test_unknown_concept_rejected(self):
        m = build_association_matrix(CAT_DOG)
        with pytest.raises(ValueError):
            build_graph(m, ["nothere"], max_edges=3)

    def test_meta_passthrough(self):
        m = build_association_matrix(CAT_DOG)
        meta = GraphMeta(source_id="s1", params_hash="p", stopword_hash="h")
        g = build_graph(m, ["chase", "dog"], max_edges=3, meta=meta)
        assert g.meta.source_id == "s1"
        assert g.meta.params_hash == "p"


class TestProperties:
    def test_oracle_equivalence_seeded(self):
        rng = random.Random(101)
        for _ in range(100):
            corpus = random_corpus(rng)
            nonempty = [s for s in corpus if s]
            if not nonempty:
                continue
            m = build_association_matrix(corpus)
            pair_counts, term_freq = oracle_matrix(nonempty)
            assert m.term_freq == term_freq
            for i, a in enumerate(m.terms):
                for j, b in enumerate(m.terms):
                    if i < j:
                        assert m.counts[i][j] == pair_counts.get((a, b), 0), (a, b)

    def test_sentence_permutation_invariance(self):
        rng = random.Random(77)
        for _ in range(50):
            corpus = random_corpus(rng)
            if not any(corpus):
                continue
            m1 = build_association_matrix(corpus)
            shuffled = corpus[:]
            rng.shuffle(shuffled)
            m2 = build_association_matrix(shuffled)
            assert m1.terms == m2.terms
            assert m1.counts == m2.counts
            assert m1.term_freq == m2.term_freq
            c1 = select_concepts(m1, 6)
            c2 = select_concepts(m2, 6)
            assert c1 == c2
            g1 = build_graph(m1, c1, max_edges=7)
            g2 = build_graph(m2, c2, max_edges=7)
            assert g1.vertices == g2.vertices
            assert g1.edges == g2.edges

    def test_monotonicity_adding_sentence(self):
        rng = random.Random(55)
        for _ in range(30):
            corpus = random_corpus(rng)
            if not any(corpus):
                continue
            extra = random_corpus(rng, max_sentences=1)
            m1 = build_association_matrix(corpus)
            m2 = build_association_matrix(corpus + extra)
            for i, a in enumerate(m1.terms):
                for j, b in enumerate(m1.terms):
                    i2, j2 = m2.terms.index(a), m2.terms.index(b)
                    assert m2.counts[i2][j2] >= m1.counts[i][j]

    def test_connectivity_and_budget(self):
        rng = random.Random(33)
        for _ in range(60):
            corpus = random_corpus(rng, max_sentences=8, max_stems=12)
            if not any(corpus):
                continue
            m = build_association_matrix(corpus)
            max_concepts = rng.randint(1, 8)
            max_edges = rng.randint(1, 9)
            concepts = select_concepts(m, max_concepts)
            g = build_graph(m, concepts, max_edges=max_edges)
            assert g.is_connected()
            assert len(g.vertices) <= max_concepts
            components_joined = max(0, len(g.edges) - max_edges)
            assert len(g.edges) <= max_edges + components_joined


@settings(max_examples=100, deadline=None)
@given(
    corpus=st.lists(
        st.lists(st.sampled_from(["a", "b", "c", "d", "e", "f"]), max_size=5),
        min_size=1,
        max_size=6,
    )
)
def test_oracle_equivalence_hypothesis(corpus):
    nonempty = [s for s in corpus if s]
    if not nonempty:
        with pytest.raises(EmptyInput):
            build_association_matrix(corpus)
        return
    m = build_association_matrix(corpus)
    pair_counts, term_freq = oracle_matrix(nonempty)
    assert m.term_freq == term_freq
    for i, a in enumerate(m.terms):
        for j, b in enumerate(m.terms):
            if i < j:
                assert m.counts[i][j] == pair_counts.get((a, b), 0)


class TestFullPipeline:
    def test_sample_reference_text(self):
        from textmentor import resources

        raw = RawSubmissionText(
            content=resources.sample_text("reference_learning.en"),
            declared_language=Language.EN,
            source_id="sample",
        )
        g = graph_from_raw_text(raw, min_words=300)
        assert 1 <= len(g.vertices) <= 25
        assert g.is_connected()
        assert g.meta.stopword_hash
        assert g.meta.params_hash

    def test_too_short_propagates(self):
        raw = RawSubmissionText(
            content="Just a few words here.", declared_language=Language.EN, source_id="x"
        )
        with pytest.raises(TooShort):
            graph_from_raw_text(raw, min_words=300)

    def test_determinism(self):
        from textmentor import resources

        raw = RawSubmissionText(
            content=resources.sample_text("student_essay.en"),
            declared_language=Language.EN,
            source_id="sample",
        )
        a = graph_from_raw_text(raw, min_words=100)
        b = graph_from_raw_text(raw, min_words=100)
        assert a.to_canonical_json() == b.to_canonical_json()
        assert a.fingerprint() == b.fingerprint()
