import numpy as np
import pytest

from sscc.demand import DemandModel, sample_request, zipf_pmf
from sscc.streams import stream


@pytest.mark.parametrize(
    "M, tilt, expected",
    [(4, 0.0, [0.25, 0.25, 0.25, 0.25]), (2, 1.0, [2 / 3, 1 / 3]), (1, 2.0, [1.0])],
)
def test_pmf_cases(M, tilt, expected):
    np.testing.assert_allclose(zipf_pmf(M, tilt), expected, rtol=1e-14)


def test_head_tail_ratio():
    p = zipf_pmf(100, 0.1)
    assert p[0] / p[-1] == pytest.approx(100**0.1, rel=1e-12)


@pytest.mark.parametrize("M", [1, 2, 10, 100])
@pytest.mark.parametrize("tilt", [0.0, 0.1, 1.0, 2.0])
def test_normalized_and_monotone(M, tilt):
    p = zipf_pmf(M, tilt)
    assert len(p) == M
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(np.diff(p) <= 0)


@pytest.mark.parametrize("M, tilt", [(0, 0.1), (-3, 0.1), (5, -1.0)])
def test_invalid(M, tilt):
    with pytest.raises(ValueError):
        zipf_pmf(M, tilt)


def test_model_pmf_read_only():
    d = DemandModel(10, 0.5)
    with pytest.raises(ValueError):
        d.pmf[0] = 1.0
    assert d.M == 10


def test_uniform_sampling_frequencies():
    x = sample_request(DemandModel(4, 0.0), stream(1), size=100_000)
    freq = np.bincount(x, minlength=5)[1:] / len(x)
    np.testing.assert_allclose(freq, 0.25, atol=0.01)


def test_single_item_catalog():
    x = sample_request(DemandModel(1, 0.3), stream(2), size=1000)
    assert np.all(x == 1)
    assert sample_request(DemandModel(1, 0.3), stream(2)) == 1


def test_total_variation_against_pmf():
    d = DemandModel(100, 0.1)
    x = sample_request(d, stream(3), size=1_000_000)
    emp = np.bincount(x, minlength=101)[1:] / len(x)
    assert 0.5 * np.abs(emp - d.pmf).sum() < 0.01
