import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from marketflow.exceptions import DegenerateSeries, DroppedRowsWarning, EmptyPanel, ParseError
from marketflow.ingest import PricePanel, compute_returns, load_price_csv, preprocess
from marketflow.synthetic import price_panel_from_returns, synthetic_dates

from conftest import make_panel


def write(tmp_path, text):
    path = tmp_path / "prices.csv"
    path.write_text(text)
    return path


def prices(values):
    values = np.asarray(values, dtype=float).reshape(len(values), -1)
    return PricePanel(synthetic_dates(len(values)), [f"S{k}" for k in range(values.shape[1])],
                      values)


def test_load_basic(tmp_path):
    p = load_price_csv(write(tmp_path, "date,A,B\n2020-01-01,1,2\n2020-01-02,2,4\n"
                                       "2020-01-03,4,8\n"))
    assert p.values.shape == (3, 2)
    assert p.labels == ["A", "B"]
    assert np.array_equal(p.values, [[1, 2], [2, 4], [4, 8]])


def test_load_sorts_by_date(tmp_path):
    p = load_price_csv(write(tmp_path, "date,A\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n"))
    assert [d.isoformat() for d in p.timestamps] == ["2020-01-01", "2020-01-02", "2020-01-03"]
    assert p.values[:, 0].tolist() == [1, 2, 3]


def test_load_drops_row_with_missing_cell(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DroppedRowsWarning)
        p = load_price_csv(write(tmp_path, "date,A,B\n2020-01-01,1,2\n2020-01-02,2,\n"
                                           "2020-01-03,4,8\n"))
    assert len(p.timestamps) == 2


def test_drop_warning_threshold(tmp_path):
    rows = "".join(f"2020-01-{d:02d},{d},{d}\n" for d in range(1, 21))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        load_price_csv(write(tmp_path, "date,A,B\n" + rows + "2020-01-21,x,1\n"))  # 1/21 < 5%
    with pytest.warns(DroppedRowsWarning):
        load_price_csv(write(tmp_path, "date,A,B\n" + rows + "2020-01-21,x,1\n2020-01-22,,1\n"))


def test_load_duplicate_date(tmp_path):
    with pytest.raises(ParseError) as err:
        load_price_csv(write(tmp_path, "date,A\n2020-01-01,1\n2020-01-01,2\n"))
    assert err.value.row == 3


def test_load_bad_date(tmp_path):
    with pytest.raises(ParseError):
        load_price_csv(write(tmp_path, "date,A\n2020-13-01,1\n2020-01-02,2\n"))


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_price_csv(tmp_path / "absent.csv")


def test_load_too_few_rows(tmp_path):
    with pytest.raises(EmptyPanel), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        load_price_csv(write(tmp_path, "date,A\n2020-01-01,1\n2020-01-02,\n"))


@pytest.mark.parametrize("series, expected", [
    ([1, math.e, math.e], [1, 0]),
    ([5, 5, 5], [0, 0]),
    ([2, 4, 8], [math.log(2), math.log(2)]),
])
def test_compute_returns(series, expected):
    r = compute_returns(prices(series))
    assert r.values[:, 0] == pytest.approx(expected, abs=1e-15)
    assert r.n_samples == len(series) - 1
    assert not any(r.preprocessing.as_dict().values())


def test_compute_returns_needs_two_prices():
    with pytest.raises(EmptyPanel):
        compute_returns(prices([1.0]))


def test_preprocess_examples():
    p = make_panel([1.0, 2.0, 3.0])
    assert preprocess(p, demean=True).values[:, 0].tolist() == [-1, 0, 1]
    assert np.allclose(preprocess(p, demean=False, detrend=True).values, 0, atol=1e-12)
    s = preprocess(make_panel([0.0, 2.0, 0.0, 2.0]), demean=False, standardize=True)
    assert np.var(s.values, ddof=1) == pytest.approx(1.0, abs=1e-9)
    assert s.preprocessing.standardized and not s.preprocessing.demeaned


def test_preprocess_flags_and_invariants(white_noise):
    p = preprocess(white_noise(200, 3, 0), demean=True, detrend=True, standardize=True)
    assert p.preprocessing.as_dict() == {"demeaned": True, "detrended": True,
                                         "standardized": True}
    assert np.all(np.abs(p.values.mean(axis=0)) < 1e-12)
    assert np.allclose(p.values.var(axis=0, ddof=1), 1.0, atol=1e-9)


def test_standardize_constant_column():
    with pytest.raises(DegenerateSeries) as err:
        preprocess(make_panel(np.array([[1.0, 3.0], [2.0, 3.0], [4.0, 3.0]])),
                   standardize=True)
    assert err.value.label == "B"


finite = st.floats(-0.2, 0.2, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 40), st.integers(1, 4)), elements=finite))
def test_round_trip_returns(values):
    r = make_panel(values)
    back = compute_returns(price_panel_from_returns(r, 10.0))
    assert np.allclose(back.values, r.values, atol=1e-10, rtol=0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 30), st.integers(1, 3)),
              elements=st.floats(-1e3, 1e3)))
def test_demean_idempotent(values):
    p = make_panel(values)
    once = preprocess(p, demean=True)
    twice = preprocess(once, demean=True)
    assert np.allclose(once.values, twice.values, atol=1e-12 * max(1.0, np.abs(values).max()))


@settings(max_examples=30, deadline=None)
@given(arrays(float, st.tuples(st.integers(3, 30), st.just(4)), elements=st.floats(0.5, 2)),
       st.permutations(range(4)))
def test_column_permutation_equivariance(values, perm):
    perm = list(perm)
    pp = PricePanel(synthetic_dates(len(values)), list("ABCD"), values)
    qq = PricePanel(synthetic_dates(len(values)), [list("ABCD")[k] for k in perm],
                    values[:, perm])
    r1, r2 = compute_returns(pp), compute_returns(qq)
    assert np.array_equal(r1.values[:, perm], r2.values)
    a = preprocess(r1, demean=True, detrend=True).values[:, perm]
    b = preprocess(r2, demean=True, detrend=True).values
    assert np.array_equal(a, b)
