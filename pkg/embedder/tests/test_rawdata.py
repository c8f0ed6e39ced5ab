"""Raw CSV parsing and label/split normalization."""

import pytest

from embedder.errors import MalformedFile, UnknownLabel
from embedder.rawdata import (
    count_by_partition,
    normalize_label,
    normalize_split,
    read_raw_csv,
)


def write(tmp_path, text):
    path = tmp_path / "raw.csv"
    path.write_text(text, encoding="utf-8")
    return path


class TestNormalize:
    @pytest.mark.parametrize("raw,want", [
        ("positive", "positive"), ("Positive", "positive"), ("NEGATIVE", "negative"),
        ("ambiguous", "ambiguous"), ("AMBIGUOUS_IF_CLARIFY", "ambiguous"),
        ("p", "positive"), ("n", "negative"), ("a", "ambiguous"),
        ("  positive  ", "positive"),
    ])
    def test_accepted_spellings(self, raw, want):
        assert normalize_label(raw) == want

    @pytest.mark.parametrize("raw", ["", "pos", "maybe", "2", "positive-ish"])
    def test_rejected_spellings(self, raw):
        with pytest.raises(UnknownLabel):
            normalize_label(raw)

    def test_split_normalization(self):
        assert normalize_split("Train") == "train"
        assert normalize_split(" TEST ") == "test"
        with pytest.raises(UnknownLabel):
            normalize_split("dev")


class TestReadRawCsv:
    def test_round_trip_fields(self, tmp_path):
        path = write(tmp_path, 'text,label,split\n"are you a robot?",positive,train\n'
                               'what is a robot?,negative,test\n')
        rows = read_raw_csv(path)
        assert [(r.text, r.label, r.split, r.index) for r in rows] == [
            ("are you a robot?", "positive", "train", 0),
            ("what is a robot?", "negative", "test", 1),
        ]

    def test_extra_columns_ignored_any_order(self, tmp_path):
        path = write(tmp_path, "split,source,text,label\ntrain,web,hello there,ambiguous\n")
        rows = read_raw_csv(path)
        assert rows[0].label == "ambiguous" and rows[0].text == "hello there"

    def test_missing_column_named(self, tmp_path):
        path = write(tmp_path, "text,label\nhi,positive\n")
        with pytest.raises(MalformedFile, match="split"):
            read_raw_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(MalformedFile, match="header"):
            read_raw_csv(write(tmp_path, ""))

    def test_empty_text_rejected_with_row_number(self, tmp_path):
        path = write(tmp_path, "text,label,split\nhi,positive,train\n ,negative,test\n")
        with pytest.raises(MalformedFile, match="row 3"):
            read_raw_csv(path)

    def test_bad_label_names_row(self, tmp_path):
        path = write(tmp_path, "text,label,split\nhi,sideways,train\n")
        with pytest.raises(UnknownLabel, match="row 2"):
            read_raw_csv(path)

    def test_partition_counts(self, tmp_path):
        path = write(tmp_path, "text,label,split\n"
                               "a,positive,train\nb,positive,train\nc,negative,test\n")
        counts = count_by_partition(read_raw_csv(path))
        assert counts == {("train", "positive"): 2, ("test", "negative"): 1}
