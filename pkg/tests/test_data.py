import numpy as np
import pytest

from pathfusion.data import (
    CaseLabel,
    ExpressionTable,
    load_expression,
    load_labels,
    load_splits,
    write_expression,
    write_labels,
    write_splits,
)
from pathfusion.errors import DataError, ParseError


def small_table():
    return ExpressionTable(
        gene_names=["G1", "G2", "G3"],
        sample_ids=["caseA", "caseB"],
        values=np.array([[1.0, 2.0], [0.5, -1.25], [3.0, 0.0]]),
    )


class TestExpression:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "expr.tsv"
        write_expression(path, small_table())
        loaded = load_expression(path)
        assert loaded.gene_names == ["G1", "G2", "G3"]
        assert loaded.sample_ids == ["caseA", "caseB"]
        np.testing.assert_array_equal(loaded.values, small_table().values)

    def test_round_trip_bit_exact_floats(self, tmp_path):
        table = small_table()
        table.values[0, 0] = 0.1 + 0.2  # not representable exactly in decimal
        path = tmp_path / "expr.tsv"
        write_expression(path, table)
        loaded = load_expression(path)
        assert loaded.values[0, 0] == table.values[0, 0]

    def test_column_lookup(self):
        table = small_table()
        np.testing.assert_array_equal(table.column("caseB"), [2.0, -1.25, 0.0])
        with pytest.raises(DataError):
            table.column("caseZ")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "expr.tsv"
        path.write_text("gene\tcaseA\nG1\t1.0\n")
        with pytest.raises(ParseError):
            load_expression(path)

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "expr.tsv"
        path.write_text("gene_id\tcaseA\tcaseB\nG1\t1.0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_expression(path)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "expr.tsv"
        path.write_text("gene_id\tcaseA\nG1\tNA_VALUE\n")
        with pytest.raises(ParseError, match="line 2"):
            load_expression(path)

    def test_duplicate_gene(self, tmp_path):
        path = tmp_path / "expr.tsv"
        path.write_text("gene_id\tcaseA\nG1\t1.0\nG1\t2.0\n")
        with pytest.raises(DataError, match="G1"):
            load_expression(path)

    def test_duplicate_sample(self, tmp_path):
        path = tmp_path / "expr.tsv"
        path.write_text("gene_id\tcaseA\tcaseA\nG1\t1.0\t2.0\n")
        with pytest.raises(DataError, match="caseA"):
            load_expression(path)


class TestLabels:
    def test_round_trip(self, tmp_path):
        labels = [
            CaseLabel("c1", "c1_s", 12.5, 0),
            CaseLabel("c2", "c2_s", 40.0, 1),
        ]
        path = tmp_path / "labels.csv"
        write_labels(path, labels)
        loaded = load_labels(path)
        assert loaded == labels

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("case,slide,months,c\nc1,s1,1.0,0\n")
        with pytest.raises(ParseError):
            load_labels(path)

    def test_bad_censorship_value(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("case_id,slide_id,time_months,censorship\nc1,s1,1.0,2\n")
        with pytest.raises(DataError):
            load_labels(path)

    def test_negative_time(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("case_id,slide_id,time_months,censorship\nc1,s1,-1.0,0\n")
        with pytest.raises(DataError):
            load_labels(path)

    def test_duplicate_case(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text(
            "case_id,slide_id,time_months,censorship\n"
            "c1,s1,1.0,0\nc1,s2,2.0,1\n"
        )
        with pytest.raises(DataError, match="c1"):
            load_labels(path)


class TestSplits:
    def test_round_trip(self, tmp_path):
        splits = {
            0: {"train": ["a", "b"], "val": ["c"]},
            1: {"train": ["a", "c"], "val": ["b"]},
        }
        path = tmp_path / "splits.csv"
        write_splits(path, splits)
        assert load_splits(path) == splits

    def test_bad_role(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("case_id,fold,role\na,0,test\n")
        with pytest.raises(DataError, match="role"):
            load_splits(path)

    def test_non_integer_fold(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("case_id,fold,role\na,first,train\n")
        with pytest.raises(ParseError):
            load_splits(path)

    def test_duplicate_assignment(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("case_id,fold,role\na,0,train\na,0,val\n")
        with pytest.raises(DataError):
            load_splits(path)
