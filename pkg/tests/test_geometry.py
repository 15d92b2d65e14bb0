import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imexrfm.geometry import (
    Domain,
    collocation_grid,
    decompose,
    denormalize,
    face_points,
    interface_points,
    normalize,
)

LINE = Domain((-1.0,), (1.0,))
SQUARE = Domain((-1.0, -1.0), (1.0, 1.0))


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain((1.0,), (0.0,))
    with pytest.raises(ValueError):
        Domain((0.0, 0.0), (1.0,))
    assert SQUARE.dim == 2 and SQUARE.volume == 4.0


def test_bisection():
    dec = decompose(LINE, [2])
    assert dec.M == 2
    np.testing.assert_array_equal([s.center[0] for s in dec.subdomains], [-0.5, 0.5])
    np.testing.assert_array_equal([s.half_width[0] for s in dec.subdomains], [0.5, 0.5])


def test_square_and_full_scale_line_counts():
    assert decompose(SQUARE, [2, 2]).M == 4
    dec = decompose(LINE, [8])
    assert dec.M == 8
    np.testing.assert_allclose([2 * s.half_width[0] for s in dec.subdomains], 0.25)


def test_decompose_errors():
    with pytest.raises(ValueError):
        decompose(LINE, [0])
    with pytest.raises(ValueError):
        decompose(SQUARE, [2])


def test_row_major_order():
    dec = decompose(SQUARE, [2, 3])
    assert [s.position for s in dec.subdomains][:3] == [(0, 0), (0, 1), (0, 2)]
    assert dec.index_of((1, 2)) == 5
    assert dec.neighbor(dec.subdomains[0], 1).index == 1
    assert dec.neighbor(dec.subdomains[0], 0, -1) is None


@given(st.lists(st.integers(1, 5), min_size=1, max_size=3))
def test_tiling_volume(counts):
    dim = len(counts)
    dom = Domain(tuple(-1.0 for _ in counts), tuple(0.5 + k for k in range(dim)))
    dec = decompose(dom, counts)
    vol = sum(np.prod(2 * s.half_width) for s in dec.subdomains)
    assert vol == pytest.approx(dom.volume, rel=1e-14)
    # centers of every subdomain are located in that subdomain only
    centers = np.array([s.center for s in dec.subdomains])
    np.testing.assert_array_equal(dec.locate(centers), np.arange(dec.M))


def test_no_interior_overlap():
    dec = decompose(SQUARE, [3, 2])
    subs = dec.subdomains
    for i, a in enumerate(subs):
        for b in subs[i + 1:]:
            overlap = np.minimum(a.upper, b.upper) - np.maximum(a.lower, b.lower)
            assert np.any(overlap <= 1e-15)


def test_normalize_examples():
    right = decompose(LINE, [2]).subdomains[1]
    left = decompose(LINE, [2]).subdomains[0]
    assert normalize(right, 0.5)[0, 0] == 0.0
    assert normalize(right, 1.0)[0, 0] == 1.0
    assert normalize(left, -0.75)[0, 0] == -0.5
    with pytest.raises(ValueError):
        normalize(right, np.zeros((1, 2)))


@settings(max_examples=50)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_normalize_roundtrip(t):
    sub = decompose(Domain((-3.0, 0.0), (5.0, 0.1)), [3, 4]).subdomains[7]
    ref = np.array([t])
    np.testing.assert_allclose(normalize(sub, denormalize(sub, ref)), ref, atol=1e-14)


def test_corners_map_exactly():
    sub = decompose(Domain((-1.0,), (0.7,)), [3]).subdomains[1]
    np.testing.assert_array_equal(normalize(sub, np.array([sub.lower, sub.upper])).ravel(), [-1.0, 1.0])


def test_collocation_examples():
    sub = decompose(Domain((0.0,), (1.0,)), [1]).subdomains[0]
    np.testing.assert_array_equal(collocation_grid(sub, 2).ravel(), [0.0, 1.0])
    np.testing.assert_array_equal(collocation_grid(sub, 3).ravel(), [0.0, 0.5, 1.0])
    sq = decompose(Domain((0.0, 0.0), (1.0, 1.0)), [1, 1]).subdomains[0]
    assert collocation_grid(sq, 5).shape == (25, 2)
    with pytest.raises(ValueError):
        collocation_grid(sub, 1)


def test_collocation_interior_and_stable():
    sub = decompose(LINE, [4]).subdomains[2]
    g = collocation_grid(sub, 7, "uniform-interior")
    assert np.all((g > sub.lower) & (g < sub.upper))
    np.testing.assert_array_equal(collocation_grid(sub, 7), collocation_grid(sub, 7))
    # the closed grid hits the faces exactly
    g = collocation_grid(sub, 7)
    assert g[0, 0] == sub.lower[0] and g[-1, 0] == sub.upper[0]


def test_interfaces_1d():
    pts = interface_points(decompose(LINE, [2]), 5)
    assert len(pts) == 1 and pts[0].location[0] == 0.0
    assert (pts[0].left_sub, pts[0].right_sub) == (0, 1)
    assert len(interface_points(decompose(LINE, [8]), 3)) == 7
    with pytest.raises(ValueError):
        interface_points(decompose(LINE, [1]), 1)


def test_interfaces_2d():
    dec = decompose(SQUARE, [2, 2])
    pts = interface_points(dec, 5)
    assert len(pts) == 20
    for p in pts:
        a, b = dec.subdomains[p.left_sub], dec.subdomains[p.right_sub]
        assert p.location[p.axis] == a.upper[p.axis] == b.lower[p.axis]
        other = 1 - p.axis
        assert a.lower[other] <= p.location[other] <= a.upper[other]


def test_face_points():
    sub = decompose(SQUARE, [1, 1]).subdomains[0]
    f = face_points(sub, 0, -1, 4)
    assert f.shape == (4, 2) and np.all(f[:, 0] == -1.0)
