import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sectorbf.metrics import (DB_CAP, CountConfusion, CountsFormatError, confusion_score,
                              power_ratio_db, read_count_pairs, score_table)

FS = 16000
FULL = (0.0, FS / 2)

# reported single-speaker row: 96.84 / 3.01 / 0.14 / 0.00 / 0.00 percent; it sums
# to 99.99 %, so the leftover item goes to estimate 2 to make 10000 items
SINGLE_SPEAKER_ROW = {1: 9684, 2: 302, 3: 14, 4: 0, 5: 0}


def single_speaker_row():
    return CountConfusion(np.array([list(SINGLE_SPEAKER_ROW.values())]), (1,),
                          tuple(SINGLE_SPEAKER_ROW))


def test_perfect_estimator():
    conf = CountConfusion.from_pairs([(k, k) for k in (1, 2, 3, 4) for _ in range(5)])
    for k in (1, 2, 3, 4):
        assert confusion_score(conf, k, k) == 1.0


def test_reported_single_speaker_row():
    conf = single_speaker_row()
    assert confusion_score(conf, 1, 1) == 0.9684
    assert confusion_score(conf, 3, 1) == 0.0014


def test_hand_built_table():
    conf = CountConfusion(np.array([[3, 1, 0], [2, 2, 4]]), (1, 2), (1, 2, 3))
    assert confusion_score(conf, 1, 1) == 0.75
    assert confusion_score(conf, 2, 1) == 0.25
    assert confusion_score(conf, 3, 2) == 0.5
    assert confusion_score(conf, 7, 2) == 0.0
    np.testing.assert_array_equal(conf.row_totals, [4, 8])


def test_from_pairs_counts():
    conf = CountConfusion.from_pairs([(1, 1), (1, 2), (2, 2), (2, 2), (3, 1)])
    assert conf.true_labels == (1, 2, 3)
    assert conf.est_labels == (1, 2, 3)
    np.testing.assert_array_equal(conf.counts, [[1, 1, 0], [0, 2, 0], [1, 0, 0]])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 6)), min_size=1, max_size=200))
def test_rows_sum_to_one(pairs):
    conf = CountConfusion.from_pairs(pairs)
    for k in conf.true_labels:
        total = sum(confusion_score(conf, i, k) for i in conf.est_labels)
        assert abs(total - 1.0) <= 1e-12


@given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 5)), min_size=1, max_size=100),
       st.integers(1, 1000))
def test_scale_invariance(pairs, factor):
    conf = CountConfusion.from_pairs(pairs)
    scaled = CountConfusion(conf.counts * factor, conf.true_labels, conf.est_labels)
    for k, i, score in score_table(conf):
        assert confusion_score(scaled, i, k) == score


def test_empty_row_is_an_error():
    conf = CountConfusion(np.array([[0, 0], [1, 1]]), (1, 2), (1, 2))
    with pytest.raises(ValueError):
        confusion_score(conf, 1, 1)
    with pytest.raises(ValueError):
        confusion_score(conf, 1, 9)
    assert [row[0] for row in score_table(conf)] == [2, 2]


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        CountConfusion(np.array([[1, -1]]), (1,), (1, 2))


def test_read_pairs(tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text("true_count,estimated_count\n1,1\n2,1\n\n")
    assert read_count_pairs(p) == [(1, 1), (2, 1)]
    p.write_text("1,1\n2,x\n")
    with pytest.raises(CountsFormatError, match=":2:"):
        read_count_pairs(p)
    p.write_text("")
    with pytest.raises(CountsFormatError):
        read_count_pairs(p)


def test_power_ratio_identical_is_zero(rng):
    x = rng.standard_normal(8000)
    assert power_ratio_db(x, x, FULL, FS) == 0.0


def test_power_ratio_half_amplitude(rng):
    x = rng.standard_normal(8000)
    assert power_ratio_db(x, 0.5 * x, FULL, FS) == pytest.approx(10 * np.log10(4), abs=1e-9)


def test_power_ratio_white_noise_pair(rng):
    x, y = rng.standard_normal((2, 10 * FS))
    assert abs(power_ratio_db(x, y, FULL, FS)) <= 0.5


def test_power_ratio_is_antisymmetric(rng):
    x = rng.standard_normal(5000)
    y = 0.3 * rng.standard_normal(5000)
    assert power_ratio_db(x, y, (300, 4000), FS) == -power_ratio_db(y, x, (300, 4000), FS)


def test_power_ratio_band_selects_content():
    t = np.arange(FS) / FS
    low = np.sin(2 * np.pi * 500 * t)
    high = np.sin(2 * np.pi * 6000 * t)
    assert power_ratio_db(low, high, (300, 4000), FS) > 40


def test_power_ratio_cap_and_errors(rng):
    x = rng.standard_normal(2000)
    assert power_ratio_db(x, np.zeros(2000), FULL, FS) == DB_CAP
    with pytest.raises(ValueError):
        power_ratio_db(x, x[:10], FULL, FS)
    with pytest.raises(ValueError):
        power_ratio_db(x, x, (0, 9000), FS)
