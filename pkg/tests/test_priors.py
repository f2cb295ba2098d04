import json

import pytest

from ecmargin import (
    ClassCounts,
    ClassEntry,
    ClassStats,
    InputFormatError,
    UnknownClassError,
    ValidationError,
    all_class_stats,
    background_count,
    class_stats,
    load_counts,
)

COUNTS = ClassCounts(
    entries=(
        ClassEntry(class_id=1, name="cat", instance_count=16),
        ClassEntry(class_id=2, name="dog", instance_count=81),
        ClassEntry(class_id=3, name="bird", instance_count=4607),
    ),
    background_ratio=1.0,
)


class TestClassCounts:
    def test_total_foreground(self):
        """Foreground total is the plain sum of instance counts."""
        assert COUNTS.total_foreground() == 16 + 81 + 4607

    def test_get_returns_entry(self):
        assert COUNTS.get(2).name == "dog"

    def test_get_unknown_id_raises(self):
        with pytest.raises(UnknownClassError):
            COUNTS.get(99)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError):
            ClassCounts(
                entries=(
                    ClassEntry(class_id=1, name="a", instance_count=1),
                    ClassEntry(class_id=1, name="b", instance_count=2),
                )
            )

    def test_negative_count_rejected(self):
        with pytest.raises(ValidationError):
            ClassCounts(entries=(ClassEntry(class_id=0, name="a", instance_count=-1),))

    def test_negative_background_ratio_rejected(self):
        with pytest.raises(ValidationError):
            ClassCounts(entries=COUNTS.entries, background_ratio=-0.5)


class TestClassStats:
    def test_alpha_must_match_counts(self):
        with pytest.raises(ValidationError):
            ClassStats(n_plus=10, n_minus=30, alpha=2.0)

    def test_roundtripped_alpha_accepted(self):
        """alpha recomputed from its own counts passes the one-ulp check."""
        stats = ClassStats(n_plus=7, n_minus=13, alpha=13 / 7)
        assert stats.alpha == 13 / 7

    def test_zero_counts_rejected(self):
        with pytest.raises(ValidationError):
            ClassStats(n_plus=0, n_minus=5, alpha=0.0)


class TestBackgroundCount:
    def test_half_away_from_zero_rounding(self):
        """ratio * foreground rounds half away from zero."""
        counts = ClassCounts(entries=(ClassEntry(class_id=0, name="x", instance_count=5),))
        assert background_count(counts, 0.5) == 3
        assert background_count(counts, 0.1) == 1
        assert background_count(counts, 0.0) == 0

    def test_negative_ratio_rejected(self):
        with pytest.raises(ValidationError):
            background_count(COUNTS, -1.0)


class TestClassStatsFromCounts:
    def test_negatives_are_rest_plus_background(self):
        stats = class_stats(COUNTS, 1, background_count(COUNTS, 1.0))
        assert stats.n_plus == 16
        assert stats.n_minus == 81 + 4607 + 4704
        assert stats.alpha == stats.n_minus / stats.n_plus

    def test_all_class_stats_covers_every_id(self):
        stats = all_class_stats(COUNTS, 0)
        assert sorted(stats) == [1, 2, 3]
        assert stats[3].n_minus == 16 + 81

    def test_zero_count_class_rejected(self):
        counts = ClassCounts(
            entries=(
                ClassEntry(class_id=0, name="a", instance_count=0),
                ClassEntry(class_id=1, name="b", instance_count=3),
            )
        )
        with pytest.raises(ValidationError):
            class_stats(counts, 0, 0)


class TestLoadCounts:
    def test_json_roundtrip(self, tmp_path):
        path = tmp_path / "counts.json"
        path.write_text(
            json.dumps(
                {
                    "categories": [
                        {"id": 1, "name": "cat", "instance_count": 16},
                        {"id": 2, "name": "dog", "instance_count": 81},
                    ],
                    "background_ratio": 2.5,
                }
            )
        )
        counts = load_counts(str(path))
        assert counts.get(1).instance_count == 16
        assert counts.background_ratio == 2.5

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("id,name,instance_count\n1,cat,16\n2,dog,81\n")
        counts = load_counts(str(path))
        assert counts.total_foreground() == 97
        assert counts.background_ratio is None

    def test_format_inferred_from_extension(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("id,name,instance_count\n1,cat,16\n")
        assert load_counts(str(path)).get(1).name == "cat"

    def test_json_missing_field_names_entry(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"categories": [{"id": 1, "name": "cat"}]}))
        with pytest.raises(InputFormatError, match="categories\\[0\\]"):
            load_counts(str(path))

    def test_csv_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("identifier,name,count\n1,cat,16\n")
        with pytest.raises(InputFormatError, match="line 1"):
            load_counts(str(path))

    def test_csv_non_integer_count_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,name,instance_count\n1,cat,lots\n")
        with pytest.raises(InputFormatError, match="line 2"):
            load_counts(str(path))

    def test_unknown_format_rejected(self, tmp_path):
        path = tmp_path / "counts.json"
        path.write_text("{}")
        with pytest.raises(ValidationError):
            load_counts(str(path), format="xml")
