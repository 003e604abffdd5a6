import json

import numpy as np
import pytest

from bintpl.errors import ConfigurationError, IntegrityError, ManifestValidationError
from bintpl.extractors import EXTRACTORS, FeatureExtractor, get_extractor
from bintpl.features import ATTRIBUTE_NAMES
from bintpl.formats import (
    format_manifest_string,
    load_manifest,
    manifest_schema,
    parse_manifest,
    write_manifest,
)
from bintpl.formats.manifest import manifest_to_feature_set


def _write(tmp_path, document, name="unit.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return path


def test_zero_functions_two_strings(tmp_path):
    path = _write(tmp_path, {"binary_id": "tiny", "strings": ["first string", "second string"]})
    fs = load_manifest(path)
    assert fs.acfgs == {}
    assert fs.fcg.nodes == () and fs.fcg.edges == ()
    assert len(fs.strings) == 2
    assert fs.provenance is None


def test_dangling_fcg_edge_is_integrity_error(tmp_path):
    path = _write(tmp_path, {
        "binary_id": "broken",
        "functions": [{"id": "main", "blocks": [[0] * 7], "edges": []}],
        "fcg_edges": [["main", "ghost"]],
    })
    with pytest.raises(IntegrityError, match="ghost"):
        load_manifest(path)


def test_validation_error_lists_field_paths():
    with pytest.raises(ManifestValidationError) as excinfo:
        parse_manifest({
            "binary_id": "bad",
            "functions": [{"id": "f", "blocks": [[1, 2, 3]], "edges": []}],
        })
    assert excinfo.value.paths == ["functions.0.blocks"]


def test_missing_binary_id_and_unknown_key():
    with pytest.raises(ManifestValidationError) as excinfo:
        parse_manifest({"strings": [], "sections": []})
    assert set(excinfo.value.paths) == {"binary_id", "sections"}


def test_edge_outside_blocks_rejected():
    with pytest.raises(ManifestValidationError):
        parse_manifest({
            "binary_id": "bad",
            "functions": [{"id": "f", "blocks": [[0] * 7, [0] * 7], "edges": [[0, 2]]}],
        })


def test_nul_in_string_rejected():
    with pytest.raises(ManifestValidationError) as excinfo:
        parse_manifest({"binary_id": "bad", "strings": ["ok string", "nul\u0000inside"]})
    assert excinfo.value.paths == ["strings"]


def test_not_json():
    with pytest.raises(ManifestValidationError) as excinfo:
        parse_manifest("{not json", source="x.json")
    assert excinfo.value.paths == ["<root>"]
    assert "x.json" in str(excinfo.value)


def test_provenance_needs_both_fields():
    with pytest.raises(ManifestValidationError):
        parse_manifest({"binary_id": "half", "library": "zlib"})


def test_short_strings_dropped_on_load():
    manifest = parse_manifest({"binary_id": "m", "strings": ["tiny", "long enough"]})
    fs = manifest_to_feature_set(manifest, min_length=5)
    assert fs.string_values == {"long enough"}


def test_round_trip_identity(tmp_path, unit_factory):
    original = unit_factory("libdemo", "2.1.0", seed=3)
    path = tmp_path / "libdemo.json"
    write_manifest(original, path)
    loaded = load_manifest(path)
    assert loaded == original
    for fid, acfg in original.acfgs.items():
        assert np.array_equal(loaded.acfgs[fid].blocks, acfg.blocks)
    assert format_manifest_string(loaded) == format_manifest_string(original)


def test_round_trip_keeps_cfg_less_fcg_nodes(tmp_path, feature_set_factory, acfg_factory):
    original = feature_set_factory(
        "app",
        acfgs={"main": acfg_factory("main")},
        fcg_edges=[("main", "thunk_malloc")],
    )
    path = tmp_path / "app.json"
    write_manifest(original, path)
    loaded = load_manifest(path)
    assert loaded.fcg == original.fcg
    assert "thunk_malloc" not in loaded.acfgs


def test_manifest_extractor_takes_path_provenance(tmp_path):
    path = _write(tmp_path, {"binary_id": "libz.so", "strings": ["inflate error"]})
    fs = get_extractor("manifest").extract(path, library="zlib", version="1.2.13")
    assert fs.provenance == ("zlib", "1.2.13")


def test_manifest_extractor_rejects_conflicting_library(tmp_path):
    path = _write(tmp_path, {"binary_id": "libz.so", "library": "zlib", "version": "1.2.13"})
    with pytest.raises(ConfigurationError):
        get_extractor("manifest").extract(path, library="libpng", version="1.6.37")


def test_schema_documents_attribute_order():
    schema = manifest_schema()
    assert schema["properties"]["functions"]["items"]["properties"]["blocks"]["items"]["minItems"] == 7
    assert tuple(schema["x-attribute-order"]) == ATTRIBUTE_NAMES


def test_manifest_extractor_rejects_conflicting_version(tmp_path):
    path = _write(tmp_path, {"binary_id": "libz.so", "library": "zlib", "version": "1.2.13"})
    with pytest.raises(ConfigurationError, match="version"):
        get_extractor("manifest").extract(path, library="zlib", version="1.3.1")
    fs = get_extractor("manifest").extract(path, library="zlib", version="1.2.13")
    assert fs.provenance == ("zlib", "1.2.13")


@pytest.mark.parametrize("value", ["NaN", "Infinity", "-Infinity"])
def test_non_finite_block_attribute_rejected(tmp_path, value):
    path = tmp_path / "nan.json"
    path.write_text(
        '{"binary_id": "odd", "functions": [{"id": "f", "blocks": [[%s, 0, 0, 0, 0, 0, 0]], "edges": []}]}' % value
    )
    with pytest.raises(ManifestValidationError) as excinfo:
        load_manifest(path)
    assert excinfo.value.paths[0].startswith("functions.0.blocks")
    assert str(path) in str(excinfo.value)


def test_extractors_report_their_registered_name():
    assert set(EXTRACTORS) == {"elf", "manifest"}
    for kind, cls in EXTRACTORS.items():
        extractor = get_extractor(kind)
        assert isinstance(extractor, cls)
        assert extractor.get_name().lower() == kind
        assert extractor.get_version()
        assert extractor.get_name() in repr(extractor)
    assert FeatureExtractor.__abstractmethods__ == {"get_name", "extract"}
