"""Exact 0-1 knapsack over integer-discretized weights.

The solver fills a full (n+1) x (capacity+1) value table with a parallel
keep table and reconstructs the selection by backtracking, taking an item
only when it strictly improves the value at the current capacity. Weights
are reals discretized by a fixed scale; values stay real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

MAX_CAPACITY_INT = 1_000_000  # guardrail: table memory is O(n * capacity)

BRUTE_FORCE_LIMIT = 20


class KnapsackError(ValueError):
    pass


@dataclass(frozen=True)
class KnapsackInstance:
    item_ids: tuple[Hashable, ...]
    values: tuple[float, ...]
    weights_int: tuple[int, ...]
    capacity_int: int
    scale: int = 1

    def __post_init__(self) -> None:
        if not (len(self.item_ids) == len(self.values) == len(self.weights_int)):
            raise KnapsackError("item_ids, values, weights_int must have equal length")
        if any(w < 1 for w in self.weights_int):
            raise KnapsackError("weights_int must be >= 1")
        if any(v < 0 for v in self.values):
            raise KnapsackError("values must be nonnegative")
        if self.capacity_int < 0:
            raise KnapsackError("capacity_int must be >= 0")
        if self.capacity_int > MAX_CAPACITY_INT:
            raise KnapsackError(
                f"capacity_int {self.capacity_int} exceeds guardrail {MAX_CAPACITY_INT}"
            )
        if self.scale < 1:
            raise KnapsackError("scale must be >= 1")

    def value_of(self, selected: Sequence[Hashable]) -> float:
        chosen = set(selected)
        return sum(v for item, v in zip(self.item_ids, self.values) if item in chosen)

    def weight_of(self, selected: Sequence[Hashable]) -> int:
        chosen = set(selected)
        return sum(w for item, w in zip(self.item_ids, self.weights_int) if item in chosen)


def discretize(
    weights: Sequence[float], capacity: float, scale: int
) -> tuple[tuple[int, ...], int]:
    """Map real weights/capacity onto the integer grid.

    Weights round half-up and floor at 1 so no item is free; capacity
    floors so discretization never admits a truly over-budget selection.
    """
    if scale < 1:
        raise KnapsackError("scale must be >= 1")
    if capacity < 0:
        raise KnapsackError("capacity must be >= 0")
    if any(w <= 0 for w in weights):
        raise KnapsackError("weights must be positive")
    weights_int = tuple(max(1, int(w * scale + 0.5)) for w in weights)
    capacity_int = int(math.floor(capacity * scale))
    return weights_int, capacity_int


def dp_cell_count(item_count: int, capacity_int: int) -> int:
    """Inner-loop iterations of the solver; the unit of the complexity contract."""
    return item_count * (capacity_int + 1)


def solve_dp(instance: KnapsackInstance) -> list[Hashable]:
    """Maximize total value subject to total weight <= capacity.

    Among equal-value optima returns the selection reached by taking an
    item only on strict improvement, scanning items in input order.
    """
    n = len(instance.item_ids)
    capacity = instance.capacity_int
    if n == 0 or capacity == 0:
        return []
    values = instance.values
    weights = instance.weights_int

    best = [[0.0] * (capacity + 1) for _ in range(n + 1)]
    keep = [[False] * (capacity + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        item_weight = weights[i - 1]
        item_value = values[i - 1]
        prev_row = best[i - 1]
        row = best[i]
        keep_row = keep[i]
        for w in range(capacity + 1):
            if item_weight <= w:
                candidate = item_value + prev_row[w - item_weight]
                if candidate > prev_row[w]:
                    row[w] = candidate
                    keep_row[w] = True
                else:
                    row[w] = prev_row[w]
            else:
                row[w] = prev_row[w]

    selected_indices: list[int] = []
    k = capacity
    for i in range(n, 0, -1):
        if keep[i][k]:
            selected_indices.append(i - 1)
            k -= weights[i - 1]
    selected_indices.reverse()
    return [instance.item_ids[i] for i in selected_indices]


def brute_force(instance: KnapsackInstance) -> list[Hashable]:
    """Exhaustive oracle; mirrors the solver's strict-improvement tie rule
    by keeping the first maximum in ascending subset-mask order."""
    n = len(instance.item_ids)
    if n > BRUTE_FORCE_LIMIT:
        raise KnapsackError(f"brute force limited to {BRUTE_FORCE_LIMIT} items, got {n}")
    if n == 0:
        return []
    values = instance.values
    weights = instance.weights_int
    capacity = instance.capacity_int

    size = 1 << n
    # mask tables built by adding the highest set bit last, so every total
    # reproduces the exact left-to-right float summation of value_of()
    total_value = [0.0] * size
    total_weight = [0] * size
    for mask in range(1, size):
        high = mask.bit_length() - 1
        rest = mask ^ (1 << high)
        total_value[mask] = total_value[rest] + values[high]
        total_weight[mask] = total_weight[rest] + weights[high]

    best_mask = 0
    best_value = 0.0
    for mask in range(size):
        if total_weight[mask] <= capacity and total_value[mask] > best_value:
            best_value = total_value[mask]
            best_mask = mask
    return [instance.item_ids[i] for i in range(n) if best_mask >> i & 1]
