import bz2
import gzip
import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from vmprox.data_io import (
    Dataset,
    DegenerateRowError,
    ParseError,
    component_lipschitz,
    load_libsvm,
    normalize_rows,
    parse_libsvm,
    serialize_libsvm,
)


def test_single_row():
    ds = parse_libsvm("+1 1:0.5 3:2.0\n")
    assert (ds.n, ds.d) == (1, 3)
    cols, vals = ds.row(0)
    assert cols.tolist() == [0, 2]
    assert vals.tolist() == [0.5, 2.0]
    assert ds.y.tolist() == [1.0]


def test_non_increasing_index_reports_line():
    with pytest.raises(ParseError) as err:
        parse_libsvm("1 3:1.0 2:1.0\n")
    assert err.value.line == 1
    assert "non-increasing" in str(err.value)


def test_duplicate_index():
    with pytest.raises(ParseError, match="duplicate"):
        parse_libsvm("1 1:1\n-1 2:1 2:3\n")


@pytest.mark.parametrize("text", ["", "\n\n", "# only a comment\n"])
def test_empty_input(text):
    with pytest.raises(ParseError, match="empty"):
        parse_libsvm(text)


@pytest.mark.parametrize("text", ["1 1:abc\n", "1 x:1\n", "one 1:1\n", "1 1\n"])
def test_malformed_tokens(text):
    with pytest.raises(ParseError):
        parse_libsvm(text)


def test_label_mapping():
    ds = parse_libsvm("0 1:1\n-1 1:1\n1 1:1\n+1 1:1\n")
    assert ds.y.tolist() == [-1, -1, 1, 1]
    with pytest.raises(ParseError, match="label"):
        parse_libsvm("2 1:1\n")
    ds = parse_libsvm("1 1:1\n2 1:1\n", positive_label=1)
    assert ds.y.tolist() == [1, -1]


def test_comments_blank_lines_and_n_features():
    ds = parse_libsvm("1 2:1 # hi\n\n-1 1:3\n", n_features=5)
    assert (ds.n, ds.d) == (2, 5)
    with pytest.raises(ParseError):
        parse_libsvm("1 7:1\n", n_features=5)


def test_explicit_zero_is_kept():
    ds = parse_libsvm("1 1:0 2:1\n")
    assert ds.X.nnz == 2


def test_compressed_sources(tmp_path):
    text = b"1 1:0.25 4:-1.5\n-1 2:3\n"
    plain = parse_libsvm(text)
    for blob in (gzip.compress(text), bz2.compress(text)):
        assert load_libsvm(blob) == plain
        assert load_libsvm(io.BytesIO(blob)) == plain
    p = tmp_path / "f.gz"
    p.write_bytes(gzip.compress(text))
    assert load_libsvm(p) == plain


def test_dataset_is_read_only():
    ds = parse_libsvm("1 1:1\n")
    with pytest.raises(ValueError):
        ds.y[0] = 5


row_strategy = st.dictionaries(
    st.integers(1, 30),
    st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
    max_size=8,
)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([-1.0, 1.0]), row_strategy), min_size=1, max_size=10))
def test_round_trip(rows):
    labels = np.array([r[0] for r in rows])
    dense = np.zeros((len(rows), 30))
    for i, (_, feats) in enumerate(rows):
        for j, v in feats.items():
            dense[i, j - 1] = v
    X = sp.csr_matrix(dense)
    ds = Dataset(X, labels)
    back = parse_libsvm(serialize_libsvm(ds), n_features=30)
    assert back == ds


def test_lipschitz_examples():
    unit = parse_libsvm("1 1:0.6 2:0.8\n")
    assert component_lipschitz(unit, 1e-4).per_component[0] == pytest.approx(0.2501, abs=1e-15)
    zero = Dataset(sp.csr_matrix((1, 2)), np.array([1.0]))
    assert component_lipschitz(zero, 0.5).per_component[0] == 0.5
    with pytest.raises(DegenerateRowError):
        component_lipschitz(zero, 0.0)
    ds = parse_libsvm("-1 1:3 2:4\n")
    assert component_lipschitz(ds, 0.0).per_component[0] == 6.25


def test_profile_summary():
    ds = parse_libsvm("1 1:2\n-1 1:4\n")
    prof = component_lipschitz(ds, 0.0)
    assert prof.max == 4.0 and prof.mean == 2.5 and prof.n == 2


def test_normalize_rows():
    ds = parse_libsvm("1 1:3 2:4\n-1 3:0.5\n")
    nd = normalize_rows(ds)
    norms = np.sqrt(np.asarray(nd.X.multiply(nd.X).sum(axis=1)).ravel())
    np.testing.assert_allclose(norms, 1.0)
    L = component_lipschitz(nd, 1e-4).per_component
    np.testing.assert_allclose(L, 0.2501)
