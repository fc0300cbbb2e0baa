"""
Tests for the expanders and their union.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qexrank.analysis import AnalyzerConfig
from qexrank.errors import ExpansionError, KbFetchError
from qexrank.expanders import (
    ExpansionResources,
    ExpansionSource,
    combine,
    expand_dbpedia,
    expand_hypernym,
    expand_word_embedding,
    expansion_stats,
    keyword_terms,
    parse_sources,
    render_expansion,
)
from qexrank.resources import EmbeddingStore, HypernymGraph, HyponymEdge, KbEntry, KbSubjectCache

from conftest import TRAVEL_QUERY

KW = ExpansionSource.KEYWORD
WE = ExpansionSource.WORD_EMBEDDING
DB = ExpansionSource.DBPEDIA
HN = ExpansionSource.HYPERNYM
ALL = frozenset(ExpansionSource)

WE_TOKENS = {"traveler", "trip"}
DB_TOKENS = {"tourism", "tourist", "activity", "transport", "culture"}
HN_TOKENS = {"operating", "related", "personal", "expense"}


@pytest.fixture
def resources(analyzer, travel_store, travel_kb, travel_graph):
    return ExpansionResources(analyzer=analyzer, embeddings=travel_store,
                              hypernyms=travel_graph, kb=travel_kb)


def tokens(terms):
    return {t.term for t in terms}


class TestSources:
    def test_parse_short_and_long_names(self):
        assert parse_sources("KW+WE") == {KW, WE}
        assert parse_sources("keyword,hypernym") == {KW, HN}
        assert parse_sources(["db", "HN"]) == {DB, HN}

    def test_unknown_source(self):
        with pytest.raises(ExpansionError):
            parse_sources("KW+XX")


class TestWordEmbedding:
    def test_travel_neighbours(self, travel_store, analyzer):
        terms = expand_word_embedding(["travel"], travel_store, 2, analyzer)
        assert tokens(terms) == WE_TOKENS
        by_raw = {t.raw_value: t for t in terms}
        assert set(by_raw) == {"travelers", "trips"}
        assert by_raw["travelers"].origin_query_term == "travel"
        assert by_raw["travelers"].confidence == pytest.approx(travel_store.cosine("travel", "travelers"))

    def test_query_words_are_not_their_own_neighbours(self, travel_store, analyzer):
        terms = expand_word_embedding(["travel", "trips"], travel_store, 1, analyzer)
        assert "trips" not in {t.raw_value for t in terms}

    def test_out_of_vocabulary_word(self, travel_store, analyzer):
        assert expand_word_embedding(["qatar"], travel_store, 2, analyzer) == []

    def test_k_must_be_positive(self, travel_store, analyzer):
        with pytest.raises(ExpansionError):
            expand_word_embedding(["travel"], travel_store, 0, analyzer)

    def test_missing_store(self, analyzer):
        with pytest.raises(ExpansionError):
            expand_word_embedding(["travel"], None, 2, analyzer)


class TestNearest:
    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(min_value=3, max_value=25).flatmap(
            lambda n: st.tuples(
                st.just(n),
                st.lists(
                    st.lists(st.integers(-5, 5), min_size=4, max_size=4),
                    min_size=n, max_size=n,
                ),
            )
        ),
        st.integers(min_value=1, max_value=5),
    )
    def test_matches_exhaustive_cosine(self, sized, k):
        n, rows = sized
        words = [f"w{i:02d}" for i in range(n)]
        vectors = np.array(rows, dtype=np.float64)
        store = EmbeddingStore(words, vectors)

        unit = vectors / np.where(np.linalg.norm(vectors, axis=1, keepdims=True) == 0, 1.0,
                                  np.linalg.norm(vectors, axis=1, keepdims=True))
        sims = [(float(unit[0] @ unit[j]), words[j]) for j in range(1, n)]
        expected = sorted(sims, key=lambda p: (-p[0], p[1]))[:k]

        found = store.nearest("w00", k)
        assert len(found) == min(k, n - 1)
        exact = {w: s for s, w in sims}
        for (word, score), (expected_score, _) in zip(found, expected):
            assert score == pytest.approx(expected_score, abs=1e-9)
            assert exact[word] == pytest.approx(score, abs=1e-9)


class TestDbpedia:
    def test_travel_subjects(self, travel_kb, analyzer):
        terms = expand_dbpedia(["travel"], travel_kb, analyzer)
        assert tokens(terms) == DB_TOKENS
        assert {t.raw_value for t in terms} == {"Tourism", "Tourist activities", "Transport culture"}

    def test_word_without_concept(self, travel_kb, analyzer):
        assert expand_dbpedia(["june"], travel_kb, analyzer) == []

    def test_max_subjects(self, travel_kb, analyzer):
        terms = expand_dbpedia(["travel"], travel_kb, analyzer, max_subjects=1)
        assert tokens(terms) == {"tourism"}

    def test_failed_lookup_contributes_nothing(self, analyzer):
        class Failing:
            def subjects_for(self, term):
                raise KbFetchError("timeout")

        assert expand_dbpedia(["travel"], Failing(), analyzer) == []

    def test_missing_source(self, analyzer):
        with pytest.raises(ExpansionError):
            expand_dbpedia(["travel"], None, analyzer)


class TestHypernym:
    def test_travel_hyponyms(self, travel_graph, analyzer):
        terms = expand_hypernym(["travel"], travel_graph, 0.75, analyzer)
        assert tokens(terms) == HN_TOKENS
        assert {t.raw_value for t in terms} == {
            "operating expense", "related expense", "personal expense",
        }

    def test_threshold_is_inclusive(self, analyzer):
        graph = HypernymGraph(edges={"travel": (
            HyponymEdge("holiday", 0.75), HyponymEdge("vacation", 0.7499),
        )})
        assert tokens(expand_hypernym(["travel"], graph, 0.75, analyzer)) == {"holiday"}

    def test_threshold_range(self, travel_graph, analyzer):
        with pytest.raises(ExpansionError):
            expand_hypernym(["travel"], travel_graph, 1.5, analyzer)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_lower_threshold_adds_terms(self, low, high):
        analyzer = AnalyzerConfig()
        graph = HypernymGraph(edges={"travel": (
            HyponymEdge("holiday", 0.2), HyponymEdge("vacation", 0.5),
            HyponymEdge("business trip", 0.8), HyponymEdge("cruise", 1.0),
        )})
        low, high = min(low, high), max(low, high)
        assert tokens(expand_hypernym(["travel"], graph, high, analyzer)) <= tokens(
            expand_hypernym(["travel"], graph, low, analyzer)
        )


class TestCombine:
    def test_keyword_only_is_baseline(self, resources, analyzer):
        query = combine("Q1", "EN", TRAVEL_QUERY, {KW}, resources)
        assert query.tokens == tokens(keyword_terms(TRAVEL_QUERY, analyzer))
        assert all(t.source is KW for t in query.terms)

    def test_all_sources_on_travel_query(self, resources):
        query = combine("Q1", "EN", TRAVEL_QUERY, ALL, resources)
        assert {"travel", "month", "june"} <= query.tokens
        assert WE_TOKENS | DB_TOKENS | HN_TOKENS <= query.tokens
        assert len(query.terms) == len(query.tokens)

    def test_union_is_union_of_single_sources(self, resources):
        full = combine("Q1", "EN", TRAVEL_QUERY, ALL, resources)
        singles = set()
        for source in ALL:
            singles |= combine("Q1", "EN", TRAVEL_QUERY, {source}, resources).tokens
        assert full.tokens == singles

    @pytest.mark.parametrize("a, b", [({KW}, {WE}), ({KW, DB}, {HN}), ({WE}, {DB, HN})])
    def test_union_of_subsets(self, resources, a, b):
        left = combine("Q1", "EN", TRAVEL_QUERY, a, resources).tokens
        right = combine("Q1", "EN", TRAVEL_QUERY, b, resources).tokens
        assert combine("Q1", "EN", TRAVEL_QUERY, a | b, resources).tokens == left | right

    def test_idempotent_and_order_free(self, resources):
        first = combine("Q1", "EN", TRAVEL_QUERY, [HN, KW, WE], resources)
        second = combine("Q1", "EN", TRAVEL_QUERY, [WE, HN, KW], resources)
        assert first == second
        assert first.to_json() == second.to_json()

    def test_precedence_decides_provenance(self, analyzer, travel_store, travel_kb):
        graph = HypernymGraph(edges={"travel": (HyponymEdge("tourism", 0.9),)})
        res = ExpansionResources(analyzer=analyzer, embeddings=travel_store,
                                 hypernyms=graph, kb=travel_kb)
        query = combine("Q1", "EN", "travel", {DB, HN}, res)
        tourism = next(t for t in query.terms if t.term == "tourism")
        assert tourism.source is DB

    def test_stopword_only_query(self, resources):
        assert combine("Q1", "EN", "to the of", ALL, resources).tokens == frozenset()

    def test_empty_source_set(self, resources):
        with pytest.raises(ExpansionError):
            combine("Q1", "EN", TRAVEL_QUERY, set(), resources)

    def test_missing_resource(self, analyzer):
        res = ExpansionResources(analyzer=analyzer)
        with pytest.raises(ExpansionError, match="word_embedding"):
            combine("Q1", "EN", TRAVEL_QUERY, {KW, WE}, res)


POOL = ["travel", "trip", "hotel", "june", "month", "visit", "tourism", "expense",
        "culture", "doha", "places", "cheap", "the", "of"]
PRECEDENCE = [KW, WE, DB, HN]

words = st.sampled_from(POOL)
phrases = st.lists(words, min_size=1, max_size=3).map(" ".join)
source_sets = st.sets(st.sampled_from(PRECEDENCE), min_size=1)


@st.composite
def toy_resources(draw):
    analyzer = AnalyzerConfig()
    vocab = draw(st.lists(words, min_size=1, max_size=len(POOL), unique=True))
    vectors = draw(st.lists(
        st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=3, max_size=3),
        min_size=len(vocab), max_size=len(vocab),
    ))
    edges = draw(st.dictionaries(
        words,
        st.lists(st.builds(HyponymEdge, label=phrases, confidence=st.floats(0.0, 1.0)),
                 max_size=4, unique_by=lambda edge: edge.label.lower()).map(tuple),
        max_size=5,
    ))
    subjects = draw(st.dictionaries(words, st.lists(phrases, max_size=3), max_size=5))
    kb = KbSubjectCache([
        KbEntry(key=key, subjects=tuple(labels), fetched_at="2024-01-01T00:00:00+00:00")
        for key, labels in subjects.items()
    ])
    return ExpansionResources(
        analyzer=analyzer,
        embeddings=EmbeddingStore(vocab, np.array(vectors)),
        hypernyms=HypernymGraph(edges=edges),
        kb=kb,
        k_neighbors=draw(st.integers(1, 3)),
        hypernym_threshold=draw(st.floats(0.0, 1.0)),
    )


class TestUnionLaws:
    @settings(max_examples=500, deadline=None)
    @given(toy_resources(), st.lists(words, min_size=1, max_size=5).map(" ".join),
           source_sets, source_sets)
    def test_union_over_random_resources(self, res, text, first, second):
        def expand(sources):
            return combine("Q", "EN", text, sources, res)

        left, right, both = expand(first), expand(second), expand(first | second)
        assert both.tokens == left.tokens | right.tokens
        assert left.tokens <= both.tokens and right.tokens <= both.tokens
        if KW in first | second:
            assert expand({KW}).tokens <= both.tokens

        singles = {s: expand({s}).tokens for s in first | second}
        for term in both.terms:
            owners = [s for s in PRECEDENCE if s in singles and term.term in singles[s]]
            assert term.source is owners[0]


class TestRenderExpansion:
    def test_dump_lists_each_source(self, resources):
        text = render_expansion(combine("Q1", "EN", TRAVEL_QUERY, ALL, resources))
        assert text.startswith("Query Q1 (EN), sources: KW, WE, DB, HN")
        for raw in ("travelers", "trips", "Tourist activities", "operating expense"):
            assert raw in text
        assert "word_embedding (+" in text
        assert "hypernym (+" in text

    def test_keyword_only_has_no_expansion_section(self, resources):
        text = render_expansion(combine("Q1", "EN", TRAVEL_QUERY, {KW}, resources))
        assert "keyword:" in text
        assert "word_embedding" not in text
        assert "dbpedia" not in text


class TestExpansionStats:
    def test_counts_new_words_only(self, resources):
        query = combine("Q1", "EN", TRAVEL_QUERY, ALL, resources)
        stats = expansion_stats([query])
        assert stats.n_queries == 1
        assert stats.keyword_mean == len(query.keyword_tokens)
        assert stats.added[DB] == len(DB_TOKENS)
        assert stats.added[HN] == len(HN_TOKENS)
        assert stats.union_added == len(query.tokens - query.keyword_tokens)

    def test_empty(self):
        with pytest.raises(ExpansionError):
            expansion_stats([])
