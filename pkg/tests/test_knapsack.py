import random

import pytest

from kasla import KnapsackInstance, brute_force, discretize, solve_dp
from kasla.knapsack import MAX_CAPACITY_INT, KnapsackError, dp_cell_count


def make(values, weights, capacity, scale=1):
    ids = tuple(range(len(values)))
    return KnapsackInstance(
        item_ids=ids,
        values=tuple(float(v) for v in values),
        weights_int=tuple(weights),
        capacity_int=capacity,
        scale=scale,
    )


def test_discretize_examples():
    weights_int, capacity_int = discretize([1.0, 2.0, 4.0], 3.0, 100)
    assert weights_int == (100, 200, 400)
    assert capacity_int == 300

    weights_int, _ = discretize([0.004], 1.0, 100)
    assert weights_int == (1,)

    _, capacity_int = discretize([1.0], 0.0, 100)
    assert capacity_int == 0


def test_discretize_bad_scale():
    with pytest.raises(KnapsackError):
        discretize([1.0], 1.0, 0)


def test_classic_instance():
    # frozen from exhaustive enumeration of all 8 subsets
    instance = make([60, 100, 120], [10, 20, 30], 50)
    selected = solve_dp(instance)
    assert sorted(selected) == [1, 2]
    assert instance.value_of(selected) == 220.0
    assert brute_force(instance) == selected


def test_capacity_zero_empty():
    assert solve_dp(make([1.0, 2.0], [1, 1], 0)) == []


def test_everything_fits():
    instance = make([0.5, 0.25, 0.75], [2, 3, 4], 20)
    assert solve_dp(instance) == [0, 1, 2]


def test_empty_instance():
    assert solve_dp(make([], [], 10)) == []
    assert brute_force(make([], [], 10)) == []


def test_brute_force_single_item():
    assert brute_force(make([1.0], [3], 5)) == [0]
    assert brute_force(make([1.0], [7], 5)) == []


def test_brute_force_item_limit():
    instance = make([1.0] * 21, [1] * 21, 5)
    with pytest.raises(KnapsackError, match="limited to 20"):
        brute_force(instance)


def test_tie_rule_prefers_earlier_items():
    # two identical items: both solvers keep the first
    instance = make([1.0, 1.0], [1, 1], 1)
    assert solve_dp(instance) == [0] == brute_force(instance)
    # {0,1} and {2} have equal value; the lower-indexed pair wins
    instance = make([1.0, 1.0, 2.0], [1, 1, 2], 2)
    assert solve_dp(instance) == [0, 1] == brute_force(instance)


def test_invalid_instances():
    with pytest.raises(KnapsackError):
        make([1.0], [0], 5)  # zero weight
    with pytest.raises(KnapsackError):
        make([1.0, 2.0], [1], 5)  # length mismatch
    with pytest.raises(KnapsackError):
        make([1.0], [1], -1)
    with pytest.raises(KnapsackError):
        make([1.0], [1], MAX_CAPACITY_INT + 1)


def random_instance(rng):
    n = rng.randint(1, 15)
    return make(
        [rng.random() for _ in range(n)],
        [rng.randint(1, 64) for _ in range(n)],
        rng.randint(0, 128),
    )


def test_dp_matches_brute_force_on_random_instances():
    rng = random.Random(12345)
    for _ in range(100):
        instance = random_instance(rng)
        dp_sel = solve_dp(instance)
        bf_sel = brute_force(instance)
        assert instance.value_of(dp_sel) == instance.value_of(bf_sel)
        assert dp_sel == bf_sel
        assert instance.weight_of(dp_sel) <= instance.capacity_int


def test_value_monotone_in_capacity():
    rng = random.Random(99)
    for _ in range(30):
        instance = random_instance(rng)
        previous = -1.0
        for capacity in range(0, instance.capacity_int + 1, max(1, instance.capacity_int // 7)):
            trimmed = KnapsackInstance(
                item_ids=instance.item_ids,
                values=instance.values,
                weights_int=instance.weights_int,
                capacity_int=capacity,
                scale=instance.scale,
            )
            value = trimmed.value_of(solve_dp(trimmed))
            assert value >= previous
            previous = value


def test_adding_item_never_decreases_value():
    rng = random.Random(4242)
    for _ in range(30):
        instance = random_instance(rng)
        base_value = instance.value_of(solve_dp(instance))
        grown = KnapsackInstance(
            item_ids=instance.item_ids + ("extra",),
            values=instance.values + (rng.random(),),
            weights_int=instance.weights_int + (rng.randint(1, 64),),
            capacity_int=instance.capacity_int,
            scale=instance.scale,
        )
        assert grown.value_of(solve_dp(grown)) >= base_value


def test_feasible_at_every_scale():
    rng = random.Random(31)
    for _ in range(20):
        n = rng.randint(1, 10)
        weights = [1.0 / max(rng.random(), 1e-3) for _ in range(n)]
        values = [rng.random() for _ in range(n)]
        capacity = sum(weights) * rng.random()
        for scale in (1, 10, 100, 1000):
            weights_int, capacity_int = discretize(weights, capacity, scale)
            instance = KnapsackInstance(
                item_ids=tuple(range(n)),
                values=tuple(values),
                weights_int=weights_int,
                capacity_int=capacity_int,
                scale=scale,
            )
            selected = solve_dp(instance)
            assert instance.weight_of(selected) <= capacity_int


def test_dp_cell_count():
    assert dp_cell_count(3, 10) == 33
    assert dp_cell_count(0, 10) == 0
