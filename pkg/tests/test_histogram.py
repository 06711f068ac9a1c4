import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from boltzent import distributions as D
from boltzent.errors import InvalidArgumentError
from boltzent.histogram import (
    HistogramEstimate,
    build_histogram,
    coarsen,
    dump_histogram,
    histogram_entropy,
    histogram_entropy_nd,
    sorted_histogram_entropy_1d,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def two_bin():
    return build_histogram(np.array([0.1, 0.9, 1.5]), 1.0, origin=[0.1])


def naive_entropy(h: HistogramEstimate) -> float:
    p = h.counts / h.n
    return float(-np.sum(p * np.log(p / h.bin_width**h.dim)))


def test_direct_binning():
    assert two_bin().as_dict() == {(0,): 2, (1,): 1}


def test_two_bin_entropy_exact():
    assert abs(histogram_entropy(two_bin()) - (math.log(3) - 2 / 3 * math.log(2))) < 1e-12


def test_single_wide_bin_entropy_exact():
    h = build_histogram(np.array([0.0, 0.3, 1.1, 1.9]), 2.0)
    assert h.as_dict() == {(0,): 4}
    assert abs(histogram_entropy(h) - math.log(2)) < 1e-12


def test_coarsen_two_bin_example():
    h2 = coarsen(two_bin(), 2)
    assert h2.as_dict() == {(0,): 3} and h2.bin_width == 2.0
    assert histogram_entropy(h2) > histogram_entropy(two_bin())


def test_wide_bin_holds_everything():
    x = D.sample("normal3d", 500, 2).data
    h = build_histogram(x, 1.01 * np.ptp(x, axis=0).max())
    assert h.counts.tolist() == [500]


def test_mass_conserved():
    x = D.sample("normal1d", 10**4, 0).data
    assert build_histogram(x, 0.1).counts.sum() == 10**4


def test_density_integrates_to_one():
    x = D.sample("normal3d", 3000, 4).data
    h = build_histogram(x, 0.37)
    assert float(np.sum(h.density()) * 0.37**3) == pytest.approx(1.0, abs=1e-14)


def test_reference_row_entropy_near_truth():
    x = D.sample("normal1d", 10**5, 0).data
    assert abs(histogram_entropy(build_histogram(x, 5.051e-2)) - 1.419) < 0.01


def test_anchoring_sensitivity_is_small():
    # random origin offsets move the entropy far less than the replicate spread
    x = D.sample("normal1d", 10**5, 1).data
    base = histogram_entropy(build_histogram(x, 5.051e-2))
    rng = np.random.default_rng(0)
    shifts = [histogram_entropy(build_histogram(x, 5.051e-2, origin=x.min(0) - rng.uniform(0, 5.051e-2)))
              for _ in range(10)]
    assert np.max(np.abs(np.array(shifts) - base)) < 2.115e-3


@pytest.mark.parametrize("bw", [0.0, -1.0, math.nan, math.inf])
def test_rejects_bad_width(bw):
    with pytest.raises(InvalidArgumentError):
        build_histogram(np.arange(3.0), bw)


def test_rejects_empty():
    with pytest.raises(InvalidArgumentError):
        build_histogram(np.empty((0, 1)), 1.0)


@pytest.mark.parametrize("factor", [1, 0, 1.5])
def test_coarsen_rejects_bad_factor(factor):
    with pytest.raises(InvalidArgumentError):
        coarsen(two_bin(), factor)


def test_coarsen_associative():
    x = D.sample("normal3d", 2000, 8).data
    h = build_histogram(x, 0.05)
    a, b = coarsen(coarsen(h, 2), 2), coarsen(h, 4)
    assert np.array_equal(a.indices, b.indices) and np.array_equal(a.counts, b.counts)
    assert a.bin_width == b.bin_width


def test_coarsen_equals_rebinning_at_wider_width():
    x = D.sample("normal1d", 5000, 3).data
    h = build_histogram(x, 0.125)
    direct = build_histogram(x, 0.5, origin=h.origin)
    c = coarsen(h, 4)
    assert np.array_equal(c.counts, direct.counts)


def test_sorted_fast_path_matches():
    x = D.sample("powerlaw1d", 20000, 6).data[:, 0]
    for bw in (1e-4, 3e-3, 0.07, 2.0):
        assert sorted_histogram_entropy_1d(np.sort(x), bw) == pytest.approx(
            histogram_entropy(build_histogram(x, bw)), abs=1e-12)


def test_dump_writes_csv_and_json(tmp_path):
    dump_histogram(two_bin(), tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines() == ["i0,count", "0,2", "1,1"]
    assert '"n": 3' in (tmp_path / "h.json").read_text()


# -- properties ---------------------------------------------------------------

samples_1d = arrays(np.float64, st.integers(1, 200), elements=finite)
samples_3d = st.integers(1, 120).flatmap(lambda n: arrays(np.float64, (n, 3), elements=finite))
widths = st.floats(1e-3, 20.0)


@settings(max_examples=200, deadline=None)
@given(data=st.one_of(samples_1d, samples_3d), bw=widths, k=st.integers(2, 7))
def test_coarsening_never_lowers_entropy(data, bw, k):
    h = build_histogram(data, bw)
    c = coarsen(h, k)
    assert c.counts.sum() == h.n
    assert histogram_entropy(c) >= histogram_entropy(h) - 1e-12


@settings(max_examples=100, deadline=None)
@given(data=st.one_of(samples_1d, samples_3d), bw=widths)
def test_entropy_matches_naive_sum(data, bw):
    h = build_histogram(data, bw)
    assert h.counts.sum() == h.n
    assert histogram_entropy(h) == pytest.approx(naive_entropy(h), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(ticks=arrays(np.int64, st.integers(1, 200), elements=st.integers(-4000, 4000)),
       bw=widths, shift=st.integers(-1000, 1000))
def test_translation_invariance(ticks, bw, shift):
    # dyadic data and integer shifts keep x - min exact, so the result is bit-identical
    data = ticks / 16.0
    a = histogram_entropy(build_histogram(data, bw))
    b = histogram_entropy(build_histogram(data + float(shift), bw))
    assert a == b


@settings(max_examples=100, deadline=None)
@given(data=st.one_of(samples_1d, samples_3d), bw=widths, e=st.integers(-6, 6))
def test_scaling_covariance(data, bw, e):
    lam = 2.0**e  # power-of-two scale keeps every cell index identical
    d = 1 if data.ndim == 1 else data.shape[1]
    a = histogram_entropy(build_histogram(data, bw))
    b = histogram_entropy(build_histogram(data * lam, bw * lam))
    assert b - a == pytest.approx(d * math.log(lam), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=st.one_of(samples_3d, st.integers(1, 100).flatmap(
    lambda n: arrays(np.float64, (n, 2), elements=finite))), bw=st.floats(1e-4, 20.0))
def test_sweep_path_matches_reference(data, bw):
    ref = histogram_entropy(build_histogram(data, bw))
    assert histogram_entropy_nd(data, bw) == pytest.approx(ref, abs=1e-11)


@pytest.mark.parametrize("bw", [1e-9, 0.003, 0.05, 0.8])  # lexicographic, hashed and dense counting
def test_sweep_path_all_counting_modes(bw):
    x = D.sample("normal3d", 5000, 12).data
    assert histogram_entropy_nd(x, bw) == pytest.approx(histogram_entropy(build_histogram(x, bw)), abs=1e-11)
