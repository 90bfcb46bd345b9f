import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from randnla.datasets import planted_blobs
from randnla.io import MatrixParseError, load_matrix, save_matrix


def test_identity_array_round_trip(tmp_path):
    p = tmp_path / "I.mtx"
    save_matrix(np.eye(2), p)
    M = load_matrix(p)
    assert M.dtype == np.float64
    np.testing.assert_array_equal(M, np.eye(2))


def test_coordinate_three_entries(tmp_path):
    p = tmp_path / "c.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n% comment\n"
                 "3 4 3\n1 1 2.5\n2 4 -1\n3 2 7e-3\n")
    M = load_matrix(p)
    assert M.shape == (3, 4) and np.count_nonzero(M) == 3
    assert M[0, 0] == 2.5 and M[1, 3] == -1 and M[2, 1] == 7e-3


def test_blob_csv_loads(tmp_path):
    data = planted_blobs(150, 3, 4, seed=2)
    p = tmp_path / "blobs.csv"
    save_matrix(data.points, p)
    M = load_matrix(p)
    assert M.shape == (150, 4) and np.all(np.isfinite(M))
    np.testing.assert_array_equal(M, data.points)


def test_symmetric_formats(tmp_path):
    p = tmp_path / "s.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4\n2 1 3\n")
    np.testing.assert_array_equal(load_matrix(p), [[4.0, 3.0], [3.0, 0.0]])
    q = tmp_path / "sa.mtx"
    q.write_text("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n")
    np.testing.assert_array_equal(load_matrix(q), [[1.0, 2.0], [2.0, 3.0]])


def test_coordinate_layout_writer(tmp_path, rng):
    M = np.where(rng.random((5, 6)) < 0.3, rng.standard_normal((5, 6)), 0.0)
    p = tmp_path / "sp.mtx"
    save_matrix(M, p, layout="coordinate")
    assert "coordinate" in p.read_text().splitlines()[0]
    np.testing.assert_array_equal(load_matrix(p), M)


def test_vector_saved_as_column(tmp_path):
    p = tmp_path / "v.mtx"
    save_matrix(np.array([1.0, 2.0, 3.0]), p)
    assert load_matrix(p).shape == (3, 1)


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n", 5),
    ("%%MatrixMarket matrix array real general\n1 1\nabc\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n", 1),
    ("not a header\n", 1),
    ("%%MatrixMarket matrix array real general\n2\n", 2),
])
def test_parse_errors_name_the_line(tmp_path, text, line):
    p = tmp_path / "bad.mtx"
    p.write_text(text)
    with pytest.raises(MatrixParseError) as err:
        load_matrix(p)
    assert err.value.line == line
    assert f":{line}:" in str(err.value)


def test_csv_ragged_rows(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3,4\n5\n")
    with pytest.raises(MatrixParseError) as err:
        load_matrix(p)
    assert err.value.line == 3


def test_csv_rejects_nonfinite(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text("1,nan\n")
    with pytest.raises(MatrixParseError):
        load_matrix(p)


def test_unknown_extension(tmp_path):
    with pytest.raises(ValueError):
        load_matrix(tmp_path / "x.bin")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite),
       st.sampled_from([("m.mtx", "array"), ("m.mtx", "coordinate"), ("m.csv", "array")]))
def test_round_trip_is_bit_exact(tmp_path_factory, M, target):
    name, layout = target
    p = tmp_path_factory.mktemp("rt") / name
    save_matrix(M, p, layout=layout)
    got = load_matrix(p)
    np.testing.assert_array_equal(got, M + 0.0)
