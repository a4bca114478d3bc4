import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaseq import (
    DomainError,
    ExpressionMatrix,
    ParseError,
    StateError,
    ValidationError,
    load_matrix,
    log_transform,
    matrix_to_tsv,
    save_matrix,
    select_arrays,
)
from deltaseq.datamodel import NoiseModel


def small_matrix():
    values = np.arange(12, dtype=np.float64).reshape(3, 4) + 0.5
    return ExpressionMatrix(("g1", "g2", "g3"), ("a", "b", "c", "d"), values, True)


class TestExpressionMatrix:
    def test_shape_properties(self):
        m = small_matrix()
        assert m.n_genes == 3
        assert m.n_arrays == 4

    def test_values_are_read_only(self):
        m = small_matrix()
        with pytest.raises(ValueError):
            m.values[0, 0] = 99.0

    def test_duplicate_gene_ids_rejected(self):
        with pytest.raises(ValidationError, match="duplicate gene id"):
            ExpressionMatrix(("g", "g"), ("a", "b", "c", "d"),
                             np.zeros((2, 4)), True)

    def test_too_few_arrays_rejected(self):
        with pytest.raises(ValidationError):
            ExpressionMatrix(("g1", "g2"), ("a", "b", "c"), np.zeros((2, 3)), True)

    def test_non_finite_rejected(self):
        v = np.zeros((2, 4))
        v[1, 2] = np.nan
        with pytest.raises(ValidationError, match="finite"):
            ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), v, True)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), np.zeros((3, 4)), True)


class TestLoadSave:
    def test_round_trip_exact(self, tmp_path):
        m = small_matrix()
        path = tmp_path / "m.tsv"
        save_matrix(m, path)
        back = load_matrix(path, log_scale=True)
        assert back.gene_ids == m.gene_ids
        assert back.array_ids == m.array_ids
        assert np.array_equal(back.values, m.values)

    def test_round_trip_preserves_awkward_floats(self, tmp_path):
        values = np.array([[0.1, 1e-300, 12345678.9012345, -3.0],
                           [2.0 ** -52, 1.7976931348623157e308, -0.0, 7.25]])
        m = ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), values, True)
        path = tmp_path / "m.tsv"
        save_matrix(m, path)
        assert np.array_equal(load_matrix(path, log_scale=True).values, values)

    def test_headerless_synthesizes_array_ids(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("g1\t1\t2\t3\t4\ng2\t5\t6\t7\t8\n")
        m = load_matrix(path, has_header=False)
        assert m.array_ids == ("A1", "A2", "A3", "A4")

    def test_short_row_reports_line_number(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("gene_id\ta\tb\tc\td\ng1\t1\t2\t3\t4\ng2\t5\t6\n")
        with pytest.raises(ParseError, match="line 3"):
            load_matrix(path)

    def test_non_numeric_reports_line_number(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("gene_id\ta\tb\tc\td\ng1\t1\ttwo\t3\t4\ng2\t5\t6\t7\t8\n")
        with pytest.raises(ParseError, match="line 2"):
            load_matrix(path)

    def test_non_finite_value_rejected(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("gene_id\ta\tb\tc\td\ng1\t1\tnan\t3\t4\ng2\t5\t6\t7\t8\n")
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_blank_interior_line_rejected(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("gene_id\ta\tb\tc\td\ng1\t1\t2\t3\t4\n\ng2\t5\t6\t7\t8\n")
        with pytest.raises(ParseError, match="line 3"):
            load_matrix(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("")
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_tsv_header_names_columns(self):
        text = matrix_to_tsv(small_matrix())
        assert text.splitlines()[0] == "gene_id\ta\tb\tc\td"

    @settings(max_examples=25, deadline=None)
    @given(rows=st.lists(
        st.lists(st.floats(min_value=-1e12, max_value=1e12,
                           allow_nan=False, allow_infinity=False),
                 min_size=4, max_size=4),
        min_size=2, max_size=6,
    ))
    def test_any_finite_matrix_round_trips(self, rows, tmp_path_factory):
        values = np.asarray(rows)
        gene_ids = tuple(f"g{i}" for i in range(values.shape[0]))
        m = ExpressionMatrix(gene_ids, ("a", "b", "c", "d"), values, True)
        path = tmp_path_factory.mktemp("rt") / "m.tsv"
        save_matrix(m, path)
        assert np.array_equal(load_matrix(path, log_scale=True).values, values)


class TestLogTransform:
    def test_log2_values(self):
        values = np.array([[1.0, 2.0, 4.0, 8.0], [16.0, 32.0, 64.0, 128.0]])
        m = ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), values, False)
        out = log_transform(m, base=2.0)
        assert out.log_scale
        assert np.allclose(out.values, [[0, 1, 2, 3], [4, 5, 6, 7]], atol=1e-12)

    def test_already_log_is_an_error(self):
        with pytest.raises(StateError):
            log_transform(small_matrix())

    def test_non_positive_cell_is_named(self):
        values = np.ones((2, 4))
        values[1, 2] = 0.0
        m = ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), values, False)
        with pytest.raises(DomainError, match="g2"):
            log_transform(m)

    def test_bad_base_rejected(self):
        m = ExpressionMatrix(("g1", "g2"), ("a", "b", "c", "d"), np.ones((2, 4)), False)
        with pytest.raises(ValidationError):
            log_transform(m, base=1.0)


class TestSelectArrays:
    def test_projection_keeps_given_order(self):
        m = small_matrix()
        out = select_arrays(m, [3, 0, 2, 1])
        assert out.array_ids == ("d", "a", "c", "b")
        assert np.array_equal(out.values, m.values[:, [3, 0, 2, 1]])

    def test_duplicate_index_rejected(self):
        with pytest.raises(ValidationError):
            select_arrays(small_matrix(), [0, 0, 1, 2])

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValidationError):
            select_arrays(small_matrix(), [0, 1, 2, 4])

    def test_too_few_rejected(self):
        with pytest.raises(ValidationError):
            select_arrays(small_matrix(), [0, 1, 2])


class TestNoiseModel:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            NoiseModel("per-lane", 0.1)

    def test_negative_sd_rejected(self):
        with pytest.raises(ValidationError):
            NoiseModel("gene-array", -0.1)
