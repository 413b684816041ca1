import math

import numpy as np
import pytest

from attrforge.capacity import (
    CSV_COLUMNS,
    NormPair,
    banach_mazur_lp,
    capacity_rows,
    containment_radius,
    epsilon_capacity,
    finite_cover_count_bound,
    john_bound,
    rows_to_csv,
    unit_ball_packing,
    verify_packing,
    volume_upper_bound,
)


@pytest.mark.parametrize("eps", [0.3, 0.5, 0.7, 1.0, 1.5, 2.0])
def test_segment_packing_matches_exact_count(eps):
    """On [-1, 1] the maximal eps-separated count is floor(2/eps) + 1."""
    res = unit_ball_packing(NormPair(1), eps, budget=5000)
    assert res.count == math.floor(2 / eps + 1e-12) + 1
    assert verify_packing(NormPair(1), res.points, eps)


def test_disc_packing_reaches_seven_within_bound():
    pair = NormPair(2)
    res = unit_ball_packing(pair, 1.0)
    assert res.count == 7
    assert res.count <= volume_upper_bound(1, 1, 2) == 9
    assert verify_packing(pair, res.points, 1.0)


def test_known_small_packings():
    assert unit_ball_packing(NormPair(3), 1.0, budget=20_000).count == 13
    assert unit_ball_packing(NormPair(2, "linf", "linf"), 1.0, budget=5000).count == 9
    assert unit_ball_packing(NormPair(1, field="complex"), 1.0, budget=20_000).count == 7


def test_large_eps_gives_one_point():
    for pair in (NormPair(2), NormPair(3, "l1", "linf"), NormPair(2, "linf", "l2")):
        eps = 2 * containment_radius(pair) + 0.01
        assert unit_ball_packing(pair, eps, budget=2000).count == 1


def test_packing_is_seeded():
    pair = NormPair(2, "l1", "l2")
    a = unit_ball_packing(pair, 0.4, budget=5000, seed=7)
    b = unit_ball_packing(pair, 0.4, budget=5000, seed=7)
    assert a.count == b.count and np.array_equal(a.points, b.points)


@pytest.mark.parametrize(
    "pair",
    [NormPair(2), NormPair(2, "l1", "l2"), NormPair(2, "linf", "l1"), NormPair(3, "l2", "linf"),
     NormPair(2, "weighted-l2", "l2", weights_x=(4.0, 1.0))],
)
def test_packing_below_volume_bound(pair):
    for eps in (1.0, 0.5):
        res = unit_ball_packing(pair, eps, budget=5000)
        assert verify_packing(pair, res.points, eps)
        assert res.count <= volume_upper_bound(containment_radius(pair), eps, pair.real_dim)


def test_containment_radius_against_vertices():
    # l1 ball vertices are e_i; linf ball vertices are sign vectors
    assert containment_radius(NormPair(3, "l1", "l2")) == 1.0
    assert containment_radius(NormPair(3, "linf", "l2")) == pytest.approx(math.sqrt(3))
    assert containment_radius(NormPair(3, "l2", "l1")) == pytest.approx(math.sqrt(3))


def test_volume_bound_values():
    assert volume_upper_bound(1, 0.5, 2) == 25
    assert volume_upper_bound(1, 100, 2) == pytest.approx(1.0404)
    assert volume_upper_bound(1, 2, 3) == 8


def test_banach_mazur():
    assert banach_mazur_lp(2, math.inf) == pytest.approx(math.sqrt(2))
    assert banach_mazur_lp(9, 2) == 1
    assert banach_mazur_lp(4, 1) == 2
    assert john_bound(4) == 2
    for n in range(1, 10):
        for p in (1, 2, math.inf):
            assert banach_mazur_lp(n, p) <= john_bound(n) + 1e-15
    with pytest.raises(ValueError):
        banach_mazur_lp(3, 3)


def test_finite_cover_bounds():
    assert finite_cover_count_bound(1, 1, 0.5, 1)[0] == 5
    dbm, john = finite_cover_count_bound(2, 1, 0.5, math.sqrt(2), "complex")
    assert dbm == pytest.approx((1 + 4 * math.sqrt(2)) ** 4)
    assert dbm == pytest.approx(1963.705, abs=1e-3)
    for n in range(1, 6):
        a, b = finite_cover_count_bound(n, 1, 0.3, banach_mazur_lp(n, 1))
        assert a <= b + 1e-9
    with pytest.raises(ValueError):
        finite_cover_count_bound(1, 1, 1, 1)


def test_epsilon_capacity():
    assert epsilon_capacity(1) == 0
    assert epsilon_capacity(7) == pytest.approx(2.807, abs=1e-3)
    assert epsilon_capacity(25) == pytest.approx(4.644, abs=1e-3)
    with pytest.raises(ValueError):
        epsilon_capacity(0)


def test_norm_pair_validation():
    with pytest.raises(ValueError):
        NormPair(2, "l3")
    with pytest.raises(ValueError):
        NormPair(2, "weighted-l2", weights_x=(1.0,))
    with pytest.raises(ValueError):
        NormPair(0)


def test_capacity_table_monotone_and_csv():
    rows = capacity_rows(NormPair(2), [1.0, 0.7, 0.5], budget=3000)
    counts = [r["packing_lb"] for r in rows]
    assert counts == sorted(counts)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert text.endswith("\r\n")
