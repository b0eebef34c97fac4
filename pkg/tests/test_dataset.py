import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spforge.dataset import (
    DEFAULT_FIB,
    FibClassMap,
    ParseError,
    SeverityScale,
    StoryRecord,
    class_to_sp,
    encode_severity,
    parse_records,
    sp_to_class,
    stratified_split,
)


def make_line(**overrides):
    obj = {
        "story_id": "620552",
        "story_text": "Bugzilla cannot connect to Oracle 11G RAC",
        "severity": 2,
        "story_point": 2,
    }
    obj.update(overrides)
    return json.dumps(obj)


def make_corpus(points, prefix="s"):
    return [
        StoryRecord(story_id=f"{prefix}{i}", story_text=f"story {i}", severity=1, story_point=p)
        for i, p in enumerate(points)
    ]


class TestParseRecords:
    def test_valid_line(self):
        records = parse_records([make_line()])
        assert len(records) == 1
        rec = records[0]
        assert rec.story_id == "620552"
        assert rec.story_text == "Bugzilla cannot connect to Oracle 11G RAC"
        assert rec.severity == 2
        assert rec.story_point == 2
        assert rec.image_ref is None

    def test_empty_stream(self):
        assert parse_records([]) == []
        assert parse_records(["", "   ", "\n"]) == []

    def test_non_fibonacci_story_point(self):
        with pytest.raises(ParseError, match="not a Fibonacci class") as exc:
            parse_records([make_line(story_point=4)])
        assert exc.value.line_number == 1

    def test_order_preserved(self):
        lines = [make_line(story_id=str(i), story_point=p) for i, p in enumerate([5, 1, 8, 2])]
        records = parse_records(lines)
        assert [r.story_point for r in records] == [5, 1, 8, 2]

    def test_duplicate_id_reports_line(self):
        with pytest.raises(ParseError, match="duplicate") as exc:
            parse_records([make_line(), "", make_line()])
        assert exc.value.line_number == 3

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_records([make_line(), "{not json"])

    def test_missing_key(self):
        bad = json.dumps({"story_id": "1", "story_text": "x", "severity": 1})
        with pytest.raises(ParseError, match="story_point"):
            parse_records([bad])

    def test_blank_text_rejected(self):
        with pytest.raises(ParseError, match="story_text"):
            parse_records([make_line(story_text="   ")])

    def test_unknown_keys_ignored(self):
        line = make_line(assignee="nobody", votes=3)
        assert parse_records([line])[0].story_id == "620552"

    def test_string_severity_accepted(self):
        assert parse_records([make_line(severity="high")])[0].severity == "high"

    def test_custom_class_set(self):
        classes = FibClassMap((1, 2, 3, 5, 8, 13))
        records = parse_records([make_line(story_point=13)], classes=classes)
        assert records[0].story_point == 13

    def test_per_class_counts_sum_to_n(self):
        lines = [make_line(story_id=str(i), story_point=p) for i, p in enumerate([1, 1, 2, 3, 5, 8, 8])]
        records = parse_records(lines)
        counts = {}
        for rec in records:
            counts[rec.story_point] = counts.get(rec.story_point, 0) + 1
        assert sum(counts.values()) == len(records)


class TestSeverity:
    def test_numeric_passthrough(self):
        assert encode_severity(2, SeverityScale.numeric()) == 2

    def test_named_scale(self):
        scale = SeverityScale.named(["low", "medium", "high"])
        assert encode_severity("high", scale) == 3
        assert encode_severity("low", scale) == 1

    def test_unknown_label(self):
        scale = SeverityScale.named(["low", "medium", "high"])
        with pytest.raises(ValueError, match="urgent"):
            encode_severity("urgent", scale)

    def test_numeric_scale_rejects_text(self):
        with pytest.raises(ValueError):
            encode_severity("high", SeverityScale.numeric())

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            SeverityScale.named(["low", "low"])

    @given(st.lists(st.text(min_size=1), min_size=2, max_size=6, unique=True))
    def test_order_preserving(self, labels):
        scale = SeverityScale.named(labels)
        ranks = [encode_severity(lbl, scale) for lbl in labels]
        assert ranks == sorted(ranks)
        assert len(set(ranks)) == len(ranks)


class TestFibClassMap:
    def test_endpoints(self):
        assert sp_to_class(1) == 0
        assert sp_to_class(8) == 4

    def test_round_trip(self):
        for sp in DEFAULT_FIB.values:
            assert class_to_sp(sp_to_class(sp)) == sp

    def test_out_of_set(self):
        with pytest.raises(ValueError):
            sp_to_class(6)
        with pytest.raises(ValueError):
            class_to_sp(5)

    def test_monotone(self):
        indices = [sp_to_class(sp) for sp in DEFAULT_FIB.values]
        assert indices == sorted(indices)

    def test_must_be_increasing(self):
        with pytest.raises(ValueError):
            FibClassMap((1, 3, 2))

    @given(st.sets(st.integers(min_value=1, max_value=100), min_size=1, max_size=8))
    def test_round_trip_any_class_set(self, values):
        classes = FibClassMap(tuple(sorted(values)))
        for sp in classes.values:
            assert classes.class_to_sp(classes.sp_to_class(sp)) == sp


class TestStratifiedSplit:
    def test_paper_scale_split(self):
        # 113 records split 80/20 leaves a 22-row test set
        points = [1] * 10 + [2] * 41 + [3] * 46 + [5] * 10 + [8] * 6
        records = make_corpus(points)
        split = stratified_split(records, 0.2, seed=7)
        assert len(split.test) == 22
        assert len(split.train) == 91

        by_id = {r.story_id: r for r in records}
        for sp, n_class in [(1, 10), (2, 41), (3, 46), (5, 10), (8, 6)]:
            in_test = sum(1 for i in split.test if by_id[i].story_point == sp)
            assert abs(in_test - 0.2 * n_class) <= 1

    def test_deterministic(self):
        records = make_corpus([1, 1, 2, 2, 3, 3, 5, 5, 8, 8])
        a = stratified_split(records, 0.3, seed=42)
        b = stratified_split(records, 0.3, seed=42)
        assert a.train == b.train and a.test == b.test

    def test_partition(self):
        records = make_corpus([1, 2, 3, 5, 8] * 4)
        split = stratified_split(records, 0.25, seed=1)
        assert set(split.train) & set(split.test) == set()
        assert set(split.train) | set(split.test) == {r.story_id for r in records}

    def test_two_record_single_class(self):
        records = make_corpus([2, 2])
        split = stratified_split(records, 0.5, seed=0)
        assert len(split.train) == 1 and len(split.test) == 1

    def test_starved_class_warns(self):
        records = make_corpus([1] * 10 + [8])
        with pytest.warns(UserWarning, match="proportions"):
            stratified_split(records, 0.5, seed=3)

    def test_bad_fraction(self):
        records = make_corpus([1, 2])
        for fraction in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                stratified_split(records, fraction, seed=0)

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            stratified_split([], 0.2, seed=0)

    @settings(max_examples=40)
    @given(
        points=st.lists(st.sampled_from([1, 2, 3, 5, 8]), min_size=5, max_size=60),
        fraction=st.floats(min_value=0.1, max_value=0.5),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_split_properties(self, points, fraction, seed):
        import math
        import warnings

        records = make_corpus(points)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            split = stratified_split(records, fraction, seed)
        assert len(split.test) == math.floor(fraction * len(records))
        assert set(split.train) & set(split.test) == set()
        assert len(split.train) + len(split.test) == len(records)
