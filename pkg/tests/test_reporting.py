import io
import json

import pytest

from bintpl.detection import CHANNEL_A, CHANNEL_B, Candidate, MatchedFeature
from bintpl.errors import ManifestValidationError, VersionParseError
from bintpl.featuredb import UnitRef
from bintpl.formats import format_report, read_report, write_reports
from bintpl.reporting import (
    Version,
    build_report,
    identify_version,
    report_libraries,
    version_distance,
)


def candidate(library, version, score, channel=CHANNEL_B, binary=None):
    unit = UnitRef(f"{library}/{version}/{binary or library + '.so'}", library, version)
    return Candidate(unit, channel, score=score)


def test_version_parsing():
    assert Version.parse("1.6.37").key == (1, 6, 37)
    assert Version.parse("2.1").key == (2, 1, 0)
    assert Version.parse("v3.0.2-rc1").key == (3, 0, 2)
    assert str(Version.parse("v3.0.2-rc1")) == "v3.0.2-rc1"
    with pytest.raises(VersionParseError):
        Version.parse("unknown")


def test_versions_order_numerically():
    texts = ["1.10.0", "1.2.0", "1.9.9", "0.99"]
    assert [str(v) for v in sorted(Version.parse(t) for t in texts)] == ["0.99", "1.2.0", "1.9.9", "1.10.0"]


@pytest.mark.parametrize("a, b, expected", [
    ("1.6.37", "1.6.37", 0.0),
    ("1.6.37", "1.6.35", 0.2),
    ("1.2.3", "2.3.4", 11.1),
    ("2.0.0", "1.9.0", 19.0),
])
def test_version_distance(a, b, expected):
    assert version_distance(a, b) == pytest.approx(expected)


def test_version_distance_is_a_metric():
    versions = ["1.0.0", "1.2.7", "2.0.1", "0.9.3", "1.2.0"]
    for a in versions:
        assert version_distance(a, a) == 0.0
        for b in versions:
            assert version_distance(a, b) == version_distance(b, a)
            if a != b:
                assert version_distance(a, b) > 0
            for c in versions:
                assert version_distance(a, c) <= version_distance(a, b) + version_distance(b, c) + 1e-12


def test_version_distance_custom_coefficients():
    assert version_distance("1.0.0", "2.1.1", (1.0, 1.0, 1.0)) == 3.0


def test_report_groups_by_library():
    groups = report_libraries([
        candidate("libpng", "1.6.37", 4),
        candidate("zlib", "1.2.13", 9),
        candidate("libpng", "1.6.35", 2),
    ])
    assert list(groups) == ["libpng", "zlib"]
    assert [c.unit.version for c in groups["libpng"]] == ["1.6.35", "1.6.37"]


def test_identify_version_highest_sum():
    version, table = identify_version([
        candidate("zlib", "1.2.11", 5),
        candidate("zlib", "1.2.13", 4),
        candidate("zlib", "1.2.13", 3, binary="libz-static.a"),
    ])
    assert str(version) == "1.2.13"
    assert table == {"1.2.11": 5.0, "1.2.13": 7.0}


def test_identify_version_tie_goes_to_latest():
    version, _ = identify_version([candidate("libx", "1.3.0", 7), candidate("libx", "1.2.0", 7)])
    assert str(version) == "1.3.0"


def test_identify_version_needs_candidates():
    with pytest.raises(ValueError):
        identify_version([])


def test_version_table_is_ordered_by_version():
    _, table = identify_version([candidate("libx", v, 1) for v in ("1.10.0", "1.2.0", "1.9.0")])
    assert list(table) == ["1.2.0", "1.9.0", "1.10.0"]


def test_identify_version_ignores_candidate_order():
    group = [
        candidate("libx", "1.2.0", 0.1),
        candidate("libx", "1.2.0", 0.2, binary="libx-static.a"),
        candidate("libx", "1.3.0", 0.3),
        candidate("libx", "1.1.0", 0.25),
        candidate("libx", "1.1.0", 0.05, binary="libx-static.a"),
    ]
    expected = identify_version(group)
    for order in (group[::-1], group[2:] + group[:2], [group[i] for i in (3, 0, 4, 1, 2)]):
        assert identify_version(order) == expected
        assert format_report(build_report("app", order)) == format_report(build_report("app", group))


def _sample_report():
    features = {MatchedFeature("string", "zlib: stream error", 18.0)}
    a = Candidate(UnitRef("zlib/1.2.13/libz.so", "zlib", "1.2.13"), CHANNEL_A, matched_basic=features,
                  score=6, channels=(CHANNEL_A, CHANNEL_B))
    b = candidate("libpng", "1.6.37", 3)
    return build_report("firmware.bin", [a, b])


def test_build_report():
    report = _sample_report()
    assert report.target == "firmware.bin"
    assert report.library_ids() == ["libpng", "zlib"]
    assert report.versions() == {"libpng": "1.6.37", "zlib": "1.2.13"}
    zlib = report.libraries[1]
    assert zlib.evidence[0].channel == "A+B"
    assert zlib.evidence[0].matched_features == 1


def test_empty_report():
    report = build_report("clean", [])
    assert report.detected() == []
    assert "no libraries detected" in format_report(report, "text")


def test_report_json_round_trip(tmp_path):
    report = _sample_report()
    path = tmp_path / "report.json"
    write_reports([report], path)
    assert read_report(path) == report
    assert json.loads(path.read_text())["libraries"][0]["library"] == "libpng"


def test_several_reports_form_an_array():
    stream = io.StringIO()
    write_reports([_sample_report(), build_report("clean", [])], stream=stream)
    doc = json.loads(stream.getvalue())
    assert [r["target"] for r in doc] == ["firmware.bin", "clean"]


def test_text_report_lists_libraries():
    text = format_report(_sample_report(), "text")
    assert text.startswith("target: firmware.bin\n")
    assert "  zlib 1.2.13" in text
    assert "version scores: 1.6.37=3" in text


def test_report_rendering_is_deterministic():
    assert format_report(_sample_report()) == format_report(_sample_report())


def test_unknown_format():
    with pytest.raises(ValueError):
        format_report(_sample_report(), "xml")


def test_read_report_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"libraries": []}))
    with pytest.raises(ManifestValidationError) as excinfo:
        read_report(path)
    assert "target" in excinfo.value.paths



def test_write_reports_uses_current_stdout(capsys):
    write_reports([_sample_report()], fmt="text")
    assert capsys.readouterr().out.startswith("target: firmware.bin\n")
