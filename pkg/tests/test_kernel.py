import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibspread.grid import StaggeredGrid
from ibspread.kernel import (
    CosineKernel,
    Kernel,
    all_shifts,
    cosine_phi,
    delta_weight,
    shift,
    shift_table,
    support_size,
)


def test_phi_values():
    assert cosine_phi(0.0) == 0.5
    assert cosine_phi(2.0) == 0.0
    assert cosine_phi(-2.0) == 0.0
    assert cosine_phi(1.0) == pytest.approx(0.25, abs=1e-16)
    assert cosine_phi(3.7) == 0.0


def test_phi_partition_at_point_three():
    r = 0.3
    total = cosine_phi(r + 1) + cosine_phi(r) + cosine_phi(r - 1) + cosine_phi(r - 2)
    assert total == pytest.approx(1.0, abs=1e-15)


def test_phi_partition_of_unity_sampled():
    k = CosineKernel()
    r = np.linspace(-3, 3, 2001)
    total = sum(k(r - j) for j in range(-4, 5))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)
    assert np.all(k(r) >= 0)


def test_support_size():
    assert support_size(2.0) == 4
    assert support_size(1.5) == 3
    assert CosineKernel.support == 4


def test_shift_examples():
    assert shift(1, 4, 3) == (-2, -2, -2)
    assert shift(64, 4, 3) == (1, 1, 1)
    assert shift(5, 3, 2) == (0, 0)
    assert shift(2, 4, 3) == (-1, -2, -2)


def test_shift_matches_brute_force_enumeration():
    for s, d in [(3, 2), (4, 3), (5, 1), (2, 3)]:
        half = s // 2
        # colexicographic: axis 0 varies fastest
        expected = [c[::-1] for c in itertools.product(range(-half, s - half), repeat=d)]
        got = [shift(j, s, d) for j in range(1, s**d + 1)]
        assert got == expected


def test_shift_bounds_checked():
    with pytest.raises(ValueError):
        shift(0, 4, 3)
    with pytest.raises(ValueError):
        shift(65, 4, 3)


def test_shift_table_read_only():
    t = shift_table(4, 3)
    assert t.shape == (64, 3)
    assert not t.flags.writeable
    np.testing.assert_array_equal(t, all_shifts(4, 3))


@pytest.mark.parametrize("dx, sigma, h, expected", [
    (0.0, 0, 1.0, 0.5),
    ((0.0, 0.0), (-2, 0), 1.0, 0.0),
    ((0.0, 0.0, 0.0), (0, 0, 0), 0.5, 1.0),
])
def test_delta_weight_examples(dx, sigma, h, expected):
    assert delta_weight(dx, sigma, h) == pytest.approx(expected, abs=1e-15)


def test_delta_weight_shape_mismatch():
    with pytest.raises(ValueError):
        delta_weight((0.0, 0.0), (0,), 1.0)


@settings(max_examples=200, deadline=None)
@given(dx=st.lists(st.floats(-0.999999, 0.0), min_size=1, max_size=3), h=st.floats(0.01, 10))
def test_weights_sum_to_one(dx, h):
    d = len(dx)
    dx = np.array(dx) * h
    total = sum(delta_weight(dx, s, h) for s in all_shifts(4, d)) * h**d
    assert total == pytest.approx(1.0, abs=1e-13)


def test_delta_weight_matches_direct_evaluation():
    rng = np.random.default_rng(3)
    k = CosineKernel()
    g = StaggeredGrid((12, 12, 12), 0.3, staggering=(0.5, 0.0, 0.5))
    for _ in range(1000):
        X = rng.uniform(0.6, 3.0, 3)
        cell = g.cell_index(X, 4)
        sigma = all_shifts(4, 3)[rng.integers(64)]
        dx = X - g.point_of(cell)
        direct = k.delta_h(g.point_of(cell + sigma) - X, g.spacing)
        assert delta_weight(dx, sigma, g.spacing) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_kernel_is_extensible():
    from numba import njit

    @njit
    def hat(r):
        return max(0.0, 1.0 - abs(r))

    class Hat(Kernel):
        radius = 1.0
        support = support_size(1.0)

        @property
        def phi(self):
            return hat

    k = Hat()
    assert k.support == 2
    assert math.isclose(k(0.25), 0.75)
    assert delta_weight((-0.25,), (0,), 1.0, kernel=k) == pytest.approx(0.75)
