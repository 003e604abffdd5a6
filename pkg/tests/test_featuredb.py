import json

import numpy as np
import pytest

from bintpl.embedding import EmbeddingModel, FunctionVector
from bintpl.errors import ConflictError, DomainError, IntegrityError, ShapeError
from bintpl.featuredb import EXPORT, STRING, TplDatabase, VectorStore, default_unit_id
from bintpl.featuredb.database import UnitRef


def random_unit_vectors(rng, n, dim):
    matrix = rng.normal(size=(n, dim))
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def brute_force_topk(matrix, function_ids, unit_ids, query, k):
    scores = matrix @ query
    scored = [(-float(scores[i]), function_ids[i], unit_ids[i]) for i in range(len(function_ids))]
    scored.sort()
    return [(f, u) for _, f, u in scored[:k]]


@pytest.fixture
def model():
    return EmbeddingModel.initialize(embedding_dim=16, iterations=2, seed=0)


def test_unit_with_strings_only(feature_set_factory):
    db = TplDatabase()
    fs = feature_set_factory("libz.so", strings=["inflate error", "deflate error", "zlib version"],
                             library="zlib", version="1.2.13")
    unit = db.index_unit(fs)
    assert unit == UnitRef("zlib/1.2.13/libz.so", "zlib", "1.2.13")
    assert db.summary()["postings"] == 3
    assert len(db.vectors) == 0


def test_duplicate_unit_conflicts(feature_set_factory):
    db = TplDatabase()
    fs = feature_set_factory("libz.so", strings=["inflate error"], library="zlib", version="1.2.13")
    db.index_unit(fs)
    with pytest.raises(ConflictError):
        db.index_unit(fs)


def test_unit_without_provenance_rejected(feature_set_factory):
    with pytest.raises(IntegrityError):
        TplDatabase().index_unit(feature_set_factory("app", strings=["something"]))


def test_lookup_is_exact_per_unit(feature_set_factory):
    db = TplDatabase()
    for i in range(5):
        db.index_unit(feature_set_factory(f"lib{i}.so", strings=[f"feature_{i}", "Shared"],
                                          library=f"lib{i}", version="1.0"))
    for i in range(5):
        assert {u.unit_id for u in db.lookup_basic(f"feature_{i}")} == {f"lib{i}/1.0/lib{i}.so"}
    assert len(db.lookup_basic("Shared")) == 5
    assert db.lookup_basic("shared") == set()
    assert db.lookup_basic("never indexed") == set()


def test_strings_and_exports_are_separate_key_spaces(feature_set_factory):
    db = TplDatabase()
    db.index_unit(feature_set_factory("a.so", strings=["png_read_info"], library="a", version="1"))
    db.index_unit(feature_set_factory("b.so", exports=["png_read_info"], library="b", version="1"))
    assert {u.library for u in db.lookup_basic("png_read_info", STRING)} == {"a"}
    assert {u.library for u in db.lookup_basic("png_read_info", EXPORT)} == {"b"}
    assert {u.library for u in db.lookup_basic("png_read_info")} == {"a", "b"}


def test_totals_match_recomputation(unit_factory):
    db = TplDatabase()
    for i in range(4):
        db.index_unit(unit_factory(f"lib{i}", f"1.{i}.0", seed=i))
    recomputed = db.index.recompute_totals()
    for unit in db.units():
        totals = db.unit_totals(unit.unit_id)
        assert totals == recomputed[unit.unit_id]
        assert totals.string_count == 10 and totals.export_count == 5


def test_index_soundness_and_completeness(unit_factory):
    db = TplDatabase()
    units = [unit_factory(f"lib{i}", "2.0", seed=i) for i in range(3)]
    for fs in units:
        db.index_unit(fs)
    for fs in units:
        uid = default_unit_id(fs)
        for value in fs.string_values:
            assert uid in {u.unit_id for u in db.lookup_basic(value, STRING)}
        for name in fs.export_names:
            assert uid in {u.unit_id for u in db.lookup_basic(name, EXPORT)}


def test_indexing_embeds_embeddable_functions(unit_factory, model):
    fs = unit_factory("libdemo", "1.0.0")
    db = TplDatabase.build([fs], model)
    ids, matrix = db.unit_vectors("libdemo/1.0.0/libdemo.so")
    assert ids == sorted(fs.acfgs)
    assert matrix.shape == (len(fs.acfgs), 16)
    assert db.model_fingerprint == model.fingerprint()
    assert db.payload("libdemo/1.0.0/libdemo.so").fcg == fs.fcg


def test_hierarchy_orders_versions_numerically(feature_set_factory):
    db = TplDatabase()
    for version in ("1.10.0", "1.2.0", "1.9.1"):
        db.index_unit(feature_set_factory("libx.so", strings=["x"], library="libx", version=version))
    assert list(db.hierarchy()["libx"]) == ["1.2.0", "1.9.1", "1.10.0"]


def test_topk_exact_match():
    rng = np.random.default_rng(0)
    store = VectorStore(8)
    matrix = random_unit_vectors(rng, 20, 8)
    store.add([FunctionVector(f"f{i:02d}", "u", matrix[i]) for i in range(20)])
    function_id, unit_id, score = store.topk(matrix[7], 1)[0]
    assert (function_id, unit_id) == ("f07", "u")
    assert score == pytest.approx(1.0)


def test_topk_returns_everything_when_k_exceeds_n():
    rng = np.random.default_rng(1)
    store = VectorStore(4)
    matrix = random_unit_vectors(rng, 5, 4)
    store.add([FunctionVector(f"f{i}", "u", matrix[i]) for i in range(5)])
    hits = store.topk(matrix[0], 50)
    assert len(hits) == 5
    scores = [s for _, _, s in hits]
    assert scores == sorted(scores, reverse=True)


def test_topk_empty_store():
    assert VectorStore(4).topk(np.array([1.0, 0, 0, 0]), 3) == []


def test_topk_ties_by_function_id():
    store = VectorStore(2)
    v = np.array([1.0, 0.0])
    store.add([FunctionVector(name, "u", v) for name in ("c", "a", "b")])
    assert [f for f, _, _ in store.topk(v, 2)] == ["a", "b"]


def test_topk_matches_exhaustive_scan():
    rng = np.random.default_rng(42)
    dim, n = 32, 10_000
    matrix = random_unit_vectors(rng, n, dim)
    function_ids = [f"f{i:05d}" for i in range(n)]
    unit_ids = [f"u{i % 37:02d}" for i in range(n)]
    store = VectorStore(dim)
    store.add([FunctionVector(function_ids[i], unit_ids[i], matrix[i]) for i in range(n)])

    for query in random_unit_vectors(rng, 100, dim):
        expected = brute_force_topk(matrix, function_ids, unit_ids, query, 100)
        for k in (1, 10, 100):
            hits = [(f, u) for f, u, _ in store.topk(query, k)]
            assert hits == expected[:k]


def test_vector_store_validation():
    store = VectorStore(3)
    with pytest.raises(ShapeError):
        store.add([FunctionVector("f", "u", np.ones(4) / 2)])
    with pytest.raises(DomainError):
        store.add([FunctionVector("f", "u", np.ones(3))])
    store.add([FunctionVector("f", "u", np.array([1.0, 0.0, 0.0]))])
    with pytest.raises(ConflictError):
        store.add([FunctionVector("f", "u", np.array([0.0, 1.0, 0.0]))])
    with pytest.raises(ValueError):
        store.topk(np.array([1.0, 0.0, 0.0]), 0)


def _answers(db, features, queries, k=5):
    lookups = {f: sorted(u.unit_id for u in db.lookup_basic(f)) for f in features}
    hits = [db.topk(q, k) for q in queries]
    return lookups, hits


def test_empty_database_round_trip(tmp_path):
    TplDatabase().persist(tmp_path / "db")
    loaded = TplDatabase.load(tmp_path / "db")
    assert len(loaded) == 0
    assert loaded.summary() == TplDatabase().summary()


def test_round_trip_preserves_queries(tmp_path, unit_factory, model):
    units = [unit_factory(f"lib{i:03d}", f"1.{i % 3}.0", n_functions=6, seed=i) for i in range(100)]
    db = TplDatabase.build(units, model)
    db.persist(tmp_path / "db")
    loaded = TplDatabase.load(tmp_path / "db")

    rng = np.random.default_rng(9)
    features = ["lib007: message number 3", "lib050_api_1", "missing feature"]
    queries = random_unit_vectors(rng, 10, 16)
    assert _answers(loaded, features, queries) == _answers(db, features, queries)
    assert loaded.hierarchy() == db.hierarchy()
    assert loaded.summary() == db.summary()
    assert loaded.model_fingerprint == db.model_fingerprint
    assert loaded.payload("lib042/1.0.0/lib042.so").fcg == db.payload("lib042/1.0.0/lib042.so").fcg


@pytest.fixture
def persisted(tmp_path, unit_factory):
    db = TplDatabase.build([unit_factory("libz", "1.2.13"), unit_factory("libpng", "1.6.37", seed=1)])
    db.persist(tmp_path / "db")
    return tmp_path / "db"


def test_truncated_file_is_integrity_error(persisted):
    index = persisted / "index.bin"
    index.write_bytes(index.read_bytes()[:-5])
    with pytest.raises(IntegrityError, match="Checksum mismatch"):
        TplDatabase.load(persisted)


def test_missing_file_is_integrity_error(persisted):
    (persisted / "vectors.bin").unlink()
    with pytest.raises(IntegrityError, match="missing"):
        TplDatabase.load(persisted)


def test_missing_checksums_is_integrity_error(persisted):
    (persisted / "checksums.json").unlink()
    with pytest.raises(IntegrityError):
        TplDatabase.load(persisted)


def test_edited_meta_is_integrity_error(persisted):
    meta = persisted / "meta.json"
    doc = json.loads(meta.read_text())
    doc["units"][0]["version"] = "9.9.9"
    meta.write_text(json.dumps(doc))
    with pytest.raises(IntegrityError):
        TplDatabase.load(persisted)


def test_unknown_unit_payload():
    with pytest.raises(IntegrityError):
        TplDatabase().payload("nope")
