import numpy as np
import pytest

from lexrag.embedding import HashedBowEmbedder
from lexrag.index import build_dense, build_sparse, bm25_scores, dense_search, embed
from lexrag.retriever import FusionConfig, RetrievalContext, hybrid_retrieve, normalize_scores
from tests.conftest import make_chunk, random_document_text


class TestNormalizeScores:
    def test_two_values(self):
        assert normalize_scores([("a", 2.0), ("b", 4.0)]) == [("a", 0.0), ("b", 1.0)]

    def test_constant_scores_map_to_one(self):
        assert normalize_scores([("a", 3.0), ("b", 3.0)]) == [("a", 1.0), ("b", 1.0)]

    def test_three_values(self):
        out = dict(normalize_scores([("a", 1.0), ("b", 2.0), ("c", 4.0)]))
        assert out["a"] == 0.0
        assert abs(out["b"] - 1 / 3) < 1e-12
        assert out["c"] == 1.0

    def test_empty(self):
        assert normalize_scores([]) == []


class TestFusionConfig:
    def test_defaults(self):
        cfg = FusionConfig(k=4)
        assert cfg.alpha == 0.8
        assert cfg.candidate_pool == 100

    def test_pool_scales_with_k(self):
        assert FusionConfig(k=200).candidate_pool == 200

    def test_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(k=0)
        with pytest.raises(ValueError):
            FusionConfig(k=4, alpha=1.5)
        with pytest.raises(ValueError):
            FusionConfig(k=10, candidate_pool=5)


def build_corpus(rng, n_chunks=20):
    chunks = [make_chunk(i, random_document_text(rng, int(rng.integers(8, 30))),
                         doc_id=f"doc{i % 5}") for i in range(n_chunks)]
    embedder = HashedBowEmbedder(dim=128)
    return chunks, build_sparse(chunks), build_dense(chunks, embedder), embedder


class TestHybridRetrieve:
    def test_fusion_arithmetic(self):
        # candidate with dense 1.0 / sparse 0.0 beats 0.5 / 1.0 at alpha 0.8
        assert 0.8 * 1.0 + 0.2 * 0.0 > 0.8 * 0.5 + 0.2 * 1.0

    def test_alpha_one_matches_dense_ranking(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            chunks, sparse, dense, embedder = build_corpus(rng)
            query = chunks[int(rng.integers(0, len(chunks)))].text.split()[0]
            k = int(rng.integers(1, len(chunks) + 1))
            result = hybrid_retrieve(query, sparse, dense, embedder,
                                     FusionConfig(k=k, alpha=1.0))
            qv = embed(embedder, [query])[0]
            expected = [dense.chunk_ids[r] for r, _ in dense_search(dense, qv, k)]
            assert result.chunk_ids() == expected

    def test_alpha_zero_matches_bm25_ranking(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            chunks, sparse, dense, embedder = build_corpus(rng)
            query = " ".join(chunks[int(rng.integers(0, len(chunks)))].text.split()[:3])
            k = int(rng.integers(1, len(chunks) + 1))
            result = hybrid_retrieve(query, sparse, dense, embedder,
                                     FusionConfig(k=k, alpha=0.0))
            bm25 = [sparse.chunk_ids[r] for r, _ in bm25_scores(sparse, query)]
            m = min(k, len(bm25))
            assert result.chunk_ids()[:m] == bm25[:m]

    def test_fused_scores_in_unit_interval(self):
        rng = np.random.default_rng(2)
        chunks, sparse, dense, embedder = build_corpus(rng)
        result = hybrid_retrieve(chunks[3].text, sparse, dense, embedder,
                                 FusionConfig(k=10, alpha=0.8))
        for rc in result.ranked:
            assert 0.0 <= rc.fused <= 1.0
            assert 0.0 <= rc.dense_norm <= 1.0
            assert 0.0 <= rc.sparse_norm <= 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        chunks, sparse, dense, embedder = build_corpus(rng)
        cfg = FusionConfig(k=8, alpha=0.8)
        a = hybrid_retrieve("query words", sparse, dense, embedder, cfg)
        b = hybrid_retrieve("query words", sparse, dense, embedder, cfg)
        assert a == b

    def test_bm25_only_candidates_get_zero_dense(self):
        # tiny pool forces sparse-only candidates
        rng = np.random.default_rng(4)
        chunks, sparse, dense, embedder = build_corpus(rng, n_chunks=30)
        cfg = FusionConfig(k=30, alpha=0.5, candidate_pool=30)
        query = " ".join(c.text.split()[0] for c in chunks[:10])
        result = hybrid_retrieve(query, sparse, dense, embedder, cfg)
        assert len(result.ranked) == 30

    def test_index_size_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        chunks, sparse, dense, embedder = build_corpus(rng)
        short_sparse = build_sparse(chunks[:-1])
        with pytest.raises(ValueError, match="mismatch"):
            hybrid_retrieve("q", short_sparse, dense, embedder, FusionConfig(k=2))

    def test_result_serialization_round_trip(self):
        rng = np.random.default_rng(6)
        chunks, sparse, dense, embedder = build_corpus(rng)
        result = hybrid_retrieve(chunks[0].text, sparse, dense, embedder,
                                 FusionConfig(k=5), query_id="q1")
        from lexrag.retriever import RetrievalResult
        round_tripped = RetrievalResult.from_dict(result.to_dict())
        assert round_tripped == result

    def test_raising_dense_score_never_causes_inversion(self):
        # fixed query direction; chunk vectors with controlled cosines
        class AxisEmbedder:
            backend = "deterministic-test"
            dim = 2

            def embed(self, texts):
                return np.array([[1.0, 0.0] for _ in texts])

        rng = np.random.default_rng(12)
        embedder = AxisEmbedder()
        for _ in range(30):
            n = 8
            cosines = rng.random(n)
            tfs = rng.integers(0, 5, n)
            texts = [("q " * int(tf)).strip() or "filler" for tf in tfs]
            chunks = [make_chunk(i, texts[i]) for i in range(n)]
            sparse = build_sparse(chunks)

            def dense_for(cos):
                vectors = np.stack([cos, np.sqrt(1 - cos ** 2)], axis=1)
                from lexrag.index import DenseIndex
                return DenseIndex(vectors=vectors,
                                  chunk_ids=[c.chunk_id for c in chunks],
                                  backend="deterministic-test")

            cfg = FusionConfig(k=n, alpha=0.8)
            before = hybrid_retrieve("q", sparse, dense_for(cosines), embedder, cfg)
            rank_before = {rc.chunk_id: pos for pos, rc in enumerate(before.ranked)}
            comp_before = {rc.chunk_id: (rc.dense_norm, rc.sparse_norm)
                           for rc in before.ranked}

            target = int(rng.integers(0, n))
            raised = cosines.copy()
            raised[target] = min(1.0, raised[target] + float(rng.random()) * 0.5)
            after = hybrid_retrieve("q", sparse, dense_for(raised), embedder, cfg)
            rank_after = {rc.chunk_id: pos for pos, rc in enumerate(after.ranked)}

            target_id = chunks[target].chunk_id
            td, ts = comp_before[target_id]
            for other_id, (od, os_) in comp_before.items():
                if other_id == target_id:
                    continue
                beat_on_both = td >= od and ts >= os_ and (td, ts) != (od, os_)
                if beat_on_both and rank_before[target_id] < rank_before[other_id]:
                    assert rank_after[target_id] < rank_after[other_id]

    def test_context_helper(self):
        rng = np.random.default_rng(7)
        chunks, sparse, dense, embedder = build_corpus(rng)
        ctx = RetrievalContext(
            sparse=sparse, dense=dense, embedder=embedder, fusion=FusionConfig(k=4),
            chunk_table={c.chunk_id: (c.doc_id, c.start, c.end) for c in chunks})
        result = ctx.retrieve(chunks[0].text, query_id="q9")
        assert result.query_id == "q9"
        assert len(result.ranked) == 4
