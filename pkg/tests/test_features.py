import numpy as np
import pytest

from bintpl.errors import IntegrityError, ShapeError
from bintpl.features import (
    MIN_EMBEDDABLE_BLOCKS,
    OFFSPRING_INDEX,
    Acfg,
    BinaryFeatureSet,
    ExportedName,
    Fcg,
    StringLiteral,
    compute_offspring,
    embeddable_functions,
    string_weight,
)


def closure_offspring(edges, n):
    """Offspring from a boolean transitive closure (Warshall)."""
    reach = np.zeros((n, n), dtype=bool)
    for src, dst in edges:
        reach[src, dst] = True
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    return [int(reach[i].sum()) for i in range(n)]


def test_single_block():
    assert compute_offspring([], 1) == [0]


def test_empty_graph():
    assert compute_offspring([], 0) == []


def test_chain():
    assert compute_offspring([(0, 1), (1, 2)], 3) == [2, 1, 0]


def test_two_cycle_counts_itself():
    assert compute_offspring([(0, 1), (1, 0)], 2) == [2, 2]


def test_self_loop():
    assert compute_offspring([(0, 0), (0, 1)], 2) == [2, 0]


def test_offspring_matches_transitive_closure():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(1, 13))
        density = rng.uniform(0.05, 0.5)
        edges = [(i, j) for i in range(n) for j in range(n) if rng.random() < density]
        offspring = compute_offspring(edges, n)
        assert offspring == closure_offspring(edges, n)
        assert all(0 <= o <= n for o in offspring)


def test_from_attributes_inserts_offspring():
    acfg = Acfg.from_attributes("f", [[1, 2, 3, 4, 5, 6]] * 3, [(0, 1), (1, 2)])
    assert acfg.blocks.shape == (3, 7)
    assert acfg.blocks[:, OFFSPRING_INDEX].tolist() == [2.0, 1.0, 0.0]
    assert acfg.block_count == 3


def test_acfg_deduplicates_and_sorts_edges():
    acfg = Acfg("f", np.zeros((3, 7)), ((1, 2), (0, 1), (1, 2)))
    assert acfg.edges == ((0, 1), (1, 2))


def test_acfg_rejects_bad_shapes_and_values():
    with pytest.raises(ShapeError):
        Acfg("f", np.zeros((2, 6)))
    with pytest.raises(ValueError):
        Acfg("f", -np.ones((2, 7)))
    with pytest.raises(IntegrityError):
        Acfg("f", np.zeros((2, 7)), ((0, 2),))


def test_acfg_blocks_are_read_only():
    acfg = Acfg("f", np.zeros((2, 7)))
    with pytest.raises(ValueError):
        acfg.blocks[0, 0] = 1.0


def test_undirected_adjacency_ignores_self_loops():
    acfg = Acfg("f", np.zeros((3, 7)), ((0, 1), (1, 1), (2, 1)))
    expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    assert np.array_equal(acfg.undirected_adjacency(), expected)


def test_fcg_rejects_undeclared_endpoint():
    with pytest.raises(IntegrityError):
        Fcg(nodes=("a",), edges=(("a", "b"),))


def test_fcg_deduplicates():
    fcg = Fcg(nodes=("b", "a", "a"), edges=(("a", "b"), ("a", "b")))
    assert fcg.nodes == ("a", "b")
    assert fcg.edges == (("a", "b"),)


def test_feature_set_requires_acfgs_in_fcg(acfg_factory):
    with pytest.raises(IntegrityError):
        BinaryFeatureSet("b", acfgs={"f": acfg_factory("f")})


def test_feature_set_requires_full_provenance():
    with pytest.raises(IntegrityError):
        BinaryFeatureSet("b", library="zlib")


def test_string_literal_invariants():
    with pytest.raises(ValueError):
        StringLiteral("bad\x00string")
    with pytest.raises(ValueError):
        StringLiteral("zero weight", 0.0)
    with pytest.raises(ValueError):
        ExportedName("")
    assert StringLiteral("same", 1.0) == StringLiteral("same", 9.0)


@pytest.mark.parametrize("value, expected", [
    ("hello", 5.0),
    ("x" * 80, 50.0),
    ("/etc/passwd", 22.0),
    ("https://zlib.net", 32.0),
    ("C:\\Windows", 20.0),
])
def test_string_weight(value, expected):
    assert string_weight(value) == expected


def _feature_set_with_sizes(acfg_factory, sizes):
    acfgs = {f"f{i}": acfg_factory(f"f{i}", n) for i, n in enumerate(sizes)}
    return BinaryFeatureSet("b", acfgs=acfgs, fcg=Fcg(nodes=tuple(acfgs)))


def test_embeddable_threshold(acfg_factory):
    assert MIN_EMBEDDABLE_BLOCKS == 5
    assert embeddable_functions(_feature_set_with_sizes(acfg_factory, [4, 4, 4])) == []
    chosen = embeddable_functions(_feature_set_with_sizes(acfg_factory, [4, 5, 9]))
    assert [a.function_id for a in chosen] == ["f1", "f2"]


def test_embeddable_empty_feature_set():
    assert embeddable_functions(BinaryFeatureSet("empty")) == []


def test_embeddable_order_ignores_insertion_order(acfg_factory):
    acfgs = {fid: acfg_factory(fid, 6) for fid in ("zeta", "alpha", "mid")}
    fs = BinaryFeatureSet("b", acfgs=acfgs, fcg=Fcg(nodes=tuple(acfgs)))
    reordered = BinaryFeatureSet("b", acfgs=dict(reversed(list(acfgs.items()))), fcg=fs.fcg)
    assert [a.function_id for a in embeddable_functions(fs)] == ["alpha", "mid", "zeta"]
    assert embeddable_functions(fs) == embeddable_functions(reordered)
