import io

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ulrrm.mcs import (McsTable, FittedRateModel, db_to_linear, fitted_rate, linear_to_db,
                       load_mcs_table, mcs_level, mcs_rate, power_cap)

RATES = [0.15, 0.38, 0.88, 1.48, 1.91, 2.41, 2.73, 3.32, 3.90, 4.52, 5.12, 5.55, 6.23, 6.91, 7.40]
SNR_DB = [-6.82, -3.44, -0.53, 3.79, 5.80, 8.08, 9.76, 11.72, 13.49, 15.87, 17.73, 19.50,
          21.32, 23.51, 25.15]


def test_builtin_table_matches_reference(table):
    assert table.num_levels == 15
    assert list(table.rates) == RATES
    assert list(table.snr_db) == SNR_DB
    np.testing.assert_allclose(linear_to_db(table.snr_linear), SNR_DB, rtol=1e-12)


@pytest.mark.parametrize("snr, rate", [(10 ** -1.0, 0.0), (1.0, 0.88), (1e3, 7.40)])
def test_rate_examples(table, snr, rate):
    assert mcs_rate(snr, table) == rate


def test_level_examples(table):
    assert mcs_level(0.0, table) == 0
    assert mcs_level(table.snr_linear[4], table) == 5
    assert mcs_level(1e6, table) == 15


@pytest.mark.parametrize("level", range(1, 16))
def test_boundaries_inclusive(table, level):
    g = table.snr_linear[level - 1]
    assert mcs_level(g, table) == level
    assert mcs_rate(g, table) == RATES[level - 1]
    below = g - 1e-9 * g
    assert mcs_level(below, table) == level - 1
    assert mcs_rate(below, table) == (RATES[level - 2] if level > 1 else 0.0)


def test_vectorized_matches_scalar(table):
    x = np.logspace(-2, 4, 200)
    lv = mcs_level(x, table)
    assert lv.shape == x.shape
    assert all(lv[i] == mcs_level(float(x[i]), table) for i in range(x.size))


def test_fitted_rate_at_top_threshold(model):
    # frozen value; independently re-derived with 50-digit arithmetic below
    assert fitted_rate(10 ** 2.515, model) == pytest.approx(7.141141464354632, rel=1e-14)
    mpmath.mp.dps = 50
    ref = mpmath.mpf("1.389") * mpmath.log(1 + mpmath.mpf("0.5191") * mpmath.mpf(10) ** mpmath.mpf("2.515"))
    assert fitted_rate(10 ** 2.515, model) == pytest.approx(float(ref), rel=1e-14)


def test_fitted_rate_simple_points(model):
    assert fitted_rate(0.0, model) == 0.0
    assert fitted_rate((np.e - 1) / model.d_coeff, model) == pytest.approx(model.a_coeff, rel=1e-14)


def test_power_cap(table):
    assert power_cap(table.gamma_max, table) == pytest.approx(1.0, rel=1e-15)
    assert power_cap(2.0, table) == pytest.approx(163.6703474394191, rel=1e-13)
    e = 10 ** 2.515
    assert mcs_rate(power_cap(e, table) * e, table) == 7.40
    with pytest.raises(ValueError):
        power_cap(0.0, table)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_cap_saturation(e):
    from ulrrm.mcs import default_mcs_table
    t = default_mcs_table()
    tau = power_cap(e, t)
    assert mcs_rate(tau * e, t) == t.rate_max
    assert mcs_rate(tau * (1 - 1e-9) * e, t) < t.rate_max


@given(st.floats(min_value=0, max_value=1e5), st.floats(min_value=0, max_value=1e5))
def test_monotone(a, b):
    from ulrrm.mcs import default_mcs_table
    t, m = default_mcs_table(), FittedRateModel()
    lo, hi = min(a, b), max(a, b)
    assert mcs_rate(lo, t) <= mcs_rate(hi, t)
    assert fitted_rate(lo, m) <= fitted_rate(hi, m)


def test_db_roundtrip():
    x = np.array(SNR_DB)
    np.testing.assert_allclose(linear_to_db(db_to_linear(x)), x, rtol=1e-12)


def test_load_table_from_text():
    text = "# custom\nindex,rate,snr_db\n2,2.0,10\n1,1.0,0\n"
    t = load_mcs_table(io.StringIO(text))
    assert list(t.rates) == [1.0, 2.0]
    assert mcs_rate(5.0, t) == 1.0


def test_load_table_rejects_gaps():
    with pytest.raises(ValueError):
        load_mcs_table(io.StringIO("index,rate,snr_db\n1,1.0,0\n3,2.0,10\n"))


def test_table_invariants():
    with pytest.raises(ValueError):
        McsTable(snr_db=[1.0, 0.5], rates=[1.0, 2.0])
    with pytest.raises(ValueError):
        McsTable(snr_db=[0.0, 1.0], rates=[2.0, 1.0])
    with pytest.raises(ValueError):
        FittedRateModel(a_coeff=0.0)
