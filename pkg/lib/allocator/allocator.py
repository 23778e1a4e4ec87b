# Copyright 2026 actlab authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Bit allocation: minimize sum(c_l * S(b_l)) subject to sum(b_l * D_l) <= B.
"""

import heapq
import itertools
import logging
import math
from collections import OrderedDict

import numpy as np

from lib.quantizer.quantizer import bit_factor
from lib.quantizer.scheme import CompressionScheme, check_bits
from lib.utils.constants import (DEFAULT_GROUP_SIZE, DEFAULT_LADDER,
                                 FULL_PRECISION)
from lib.utils.exceptions import ConfigError, InfeasibleBudgetError, SlotError
from lib.utils.util import read_csv, write_csv

logger = logging.getLogger('actlab')

MAX_EXHAUSTIVE_SLOTS = 8

# free-slot counts up to which the exchange search changes three, then two,
# slots of a downgrade path entry at once; beyond them it is skipped
EXCHANGE_WIDE_SLOTS = 8
EXCHANGE_MAX_SLOTS = 16
# relative variance drop needed to replace the greedy result
EXCHANGE_MIN_GAIN = 1e-12

SCHEME_COLUMNS = ["slot_id", "D_l", "c_l", "b_l"]


def budget_from_avg(avg_bits, dims, forced=()):
    """
    B = avg_bits * sum(D_l) over the slots not pinned to 32 bits.
    """

    if avg_bits <= 0:
        raise ConfigError("Average bits must be positive, got %s"
                          % (avg_bits))
    free = sum(d for s, d in dims.items() if s not in forced)
    return int(math.floor(avg_bits * free))


class AllocationProblem(object):
    """
    Sensitivities and sizes per slot, an admissible ladder and a budget in
    bits. Forced slots, and slots whose sensitivity is +inf, sit at 32
    bits outside the budget.
    """

    def __init__(self, c, dims, budget_bits, ladder=DEFAULT_LADDER,
                 forced=()):
        if set(c) != set(dims):
            raise SlotError("Sensitivity and size slots differ: %s vs %s"
                            % (sorted(c), sorted(dims)))
        if not ladder:
            raise ConfigError("Empty bit ladder")

        self.ladder = tuple(sorted(set(check_bits(b) for b in ladder)))
        self.c = OrderedDict((s, float(c[s])) for s in sorted(c))
        self.dims = OrderedDict((s, int(dims[s])) for s in sorted(dims))
        self.budget_bits = int(budget_bits)

        self.forced = frozenset(s for s in self.c
                                if s in set(forced) or self.c[s] == float("inf"))
        self.free = [s for s in self.c if s not in self.forced]

        for s in self.free:
            if self.c[s] < 0 or math.isnan(self.c[s]):
                raise SlotError("Sensitivity of slot %d is %s" % (s, self.c[s]))
            if self.dims[s] <= 0:
                raise SlotError("Slot %d has no elements" % (s))

    @classmethod
    def from_average(cls, c, dims, avg_bits, ladder=DEFAULT_LADDER,
                     forced=()):
        pinned = set(forced) | set(s for s, v in c.items()
                                   if v == float("inf"))
        return cls(c, dims, budget_from_avg(avg_bits, dims, pinned), ladder,
                   forced)

    def free_dims(self):
        return sum(self.dims[s] for s in self.free)

    def min_bits(self):
        return self.ladder[0] * self.free_dims()

    def max_bits(self):
        return self.ladder[-1] * self.free_dims()

    def check_feasible(self):
        if self.budget_bits < self.min_bits():
            raise InfeasibleBudgetError(
                "Budget of %d bits is below %d bits needed at %d bits/dim"
                % (self.budget_bits, self.min_bits(), self.ladder[0]))

    def cost(self, bits):
        return sum(bits[s] * self.dims[s] for s in self.free)

    def scheme(self, bits, group_size=DEFAULT_GROUP_SIZE):
        full = dict(bits)
        for s in self.forced:
            full[s] = FULL_PRECISION
        return CompressionScheme(full, group_size, self.forced)


def predicted_variance(c, scheme):
    """
    Sum of c_l * S(b_l); a 32-bit slot contributes nothing whatever its c_l.
    """

    total = 0.0
    for slot, value in c.items():
        factor = bit_factor(scheme.bits_for(slot))
        if factor:
            total += value * factor
    return total


def _step_ratio(c, d, bits, lower):
    return c * (bit_factor(lower) - bit_factor(bits)) / (d * (bits - lower))


def downgrade_path(problem):
    """
    Rung vectors (indices into the ladder, one column per free slot)
    visited by the greedy downgrade from the top of the ladder to the
    bottom, ignoring the budget. Each step takes the downgrade with the
    least variance increase per bit saved, ties to the smaller slot id.
    """

    ladder = problem.ladder
    rung = [len(ladder) - 1] * len(problem.free)
    path = [list(rung)]

    def push(heap, i):
        s = problem.free[i]
        b = ladder[rung[i]]
        lower = ladder[rung[i] - 1]
        heapq.heappush(heap, (_step_ratio(problem.c[s], problem.dims[s], b,
                                          lower), s, i))

    heap = []
    for i in range(len(rung)):
        if rung[i] > 0:
            push(heap, i)

    while heap:
        _, _, i = heapq.heappop(heap)
        rung[i] -= 1
        path.append(list(rung))
        if rung[i] > 0:
            push(heap, i)

    return np.array(path, dtype=np.int64).reshape(len(path), len(rung))


def allocate_bits(problem, group_size=DEFAULT_GROUP_SIZE):
    """
    Greedy downgrade from the top of the ladder until the budget holds,
    then any slack goes to the upgrades with the most variance removed per
    bit. The result is replaced by the best affordable assignment within a
    few slot changes of the downgrade path when that one is strictly
    better.
    """

    problem.check_feasible()
    ladder = problem.ladder
    free = problem.free
    if not free:
        return problem.scheme({}, group_size)

    d = np.array([problem.dims[s] for s in free], dtype=np.int64)
    path = downgrade_path(problem)
    costs = np.array(ladder, dtype=np.int64)[path].dot(d)
    first = int(np.argmax(costs <= problem.budget_bits))

    rung = dict((s, int(r)) for s, r in zip(free, path[first]))
    total = _spend_slack(problem, rung, int(costs[first]))

    better = _exchange_search(problem, path, rung)
    if better is not None:
        rung = better
        total = problem.cost(dict((s, ladder[r]) for s, r in rung.items()))

    bits = dict((s, ladder[r]) for s, r in rung.items())
    logger.debug("allocated %d of %d bits over %d slots", total,
                 problem.budget_bits, len(free))
    return problem.scheme(bits, group_size)


def _exchange_width(slots):
    if slots <= EXCHANGE_WIDE_SLOTS:
        return 3
    if slots <= EXCHANGE_MAX_SLOTS:
        return 2
    return 0


def _exchange_candidates(path, rungs, width):
    """
    Every rung vector that differs from a path entry in at most 'width'
    slots, deduplicated.
    """

    slots = path.shape[1]
    blocks = [path]
    for k in range(1, min(width, slots) + 1):
        positions = np.array(list(itertools.combinations(range(slots), k)),
                             dtype=np.int64)
        values = np.array(list(itertools.product(range(rungs), repeat=k)),
                          dtype=np.int64)
        pos = np.repeat(positions, len(values), axis=0)
        val = np.tile(values, (len(positions), 1))
        rows = np.arange(len(pos))[:, None]
        for start in path:
            moved = np.tile(start, (len(pos), 1))
            moved[rows, pos] = val
            blocks.append(moved)

    return np.unique(np.concatenate(blocks), axis=0)


def _dominance_pairs(c, d):
    """
    (i, j) where slot i is at least as sensitive and at most as large as
    slot j, strictly in one of the two.
    """

    pairs = []
    for i in range(len(c)):
        for j in range(len(c)):
            if i == j:
                continue
            if ((c[i] > c[j] and d[i] <= d[j])
                    or (c[i] >= c[j] and d[i] < d[j])):
                pairs.append((i, j))
    return pairs


def _order_by_dominance(candidates, pairs):
    # swapping a dominated pair never costs bits nor adds variance
    for _ in range(candidates.shape[1] ** 2 + 1):
        changed = False
        for i, j in pairs:
            wrong = candidates[:, i] < candidates[:, j]
            if wrong.any():
                low = candidates[wrong, i]
                candidates[wrong, i] = candidates[wrong, j]
                candidates[wrong, j] = low
                changed = True
        if not changed:
            break
    return candidates


def _exchange_search(problem, path, rung):
    """
    Best affordable candidate around the downgrade path, as a slot -> rung
    dict, or None when it does not beat 'rung'. The candidate set does not
    depend on the budget, so the allocated variance never grows with it.
    """

    free = problem.free
    width = _exchange_width(len(free))
    if not width:
        return None

    ladder = np.array(problem.ladder, dtype=np.int64)
    factors = np.array([bit_factor(b) for b in problem.ladder])
    c = np.array([problem.c[s] for s in free], dtype=np.float64)
    d = np.array([problem.dims[s] for s in free], dtype=np.int64)

    candidates = _exchange_candidates(path, len(ladder), width)
    candidates = _order_by_dominance(candidates, _dominance_pairs(c, d))

    cost = ladder[candidates].dot(d)
    variance = factors[candidates].dot(c)
    variance[cost > problem.budget_bits] = np.inf

    best = int(np.argmin(variance))
    current = sum(problem.c[s] * factors[r] for s, r in rung.items())
    if not variance[best] < current * (1 - EXCHANGE_MIN_GAIN):
        return None

    return dict((s, int(r)) for s, r in zip(free, candidates[best]))


def _spend_slack(problem, rung, total):
    ladder = problem.ladder
    while True:
        best = None
        for s in problem.free:
            if rung[s] + 1 >= len(ladder):
                continue
            b = ladder[rung[s]]
            upper = ladder[rung[s] + 1]
            extra = (upper - b) * problem.dims[s]
            if total + extra > problem.budget_bits:
                continue
            gain = problem.c[s] * (bit_factor(b) - bit_factor(upper)) / extra
            if gain <= 0:
                continue
            if best is None or gain > best[0]:
                best = (gain, s, extra)
        if best is None:
            return total
        rung[best[1]] += 1
        total += best[2]


def exhaustive_allocate(problem, group_size=DEFAULT_GROUP_SIZE):
    """
    Optimal scheme by enumerating ladder^L assignments of the free slots.
    """

    L = len(problem.free)
    if L > MAX_EXHAUSTIVE_SLOTS:
        raise ConfigError("Exhaustive allocation is limited to %d slots, got %d"
                          % (MAX_EXHAUSTIVE_SLOTS, L))
    problem.check_feasible()
    if not L:
        return problem.scheme({}, group_size)

    ladder = np.array(problem.ladder)
    factors = np.array([bit_factor(b) for b in problem.ladder])
    grid = np.array(list(itertools.product(range(len(ladder)), repeat=L)))

    c = np.array([problem.c[s] for s in problem.free])
    d = np.array([problem.dims[s] for s in problem.free])

    cost = ladder[grid].dot(d)
    variance = factors[grid].dot(c)
    variance[cost > problem.budget_bits] = np.inf

    best = grid[int(np.argmin(variance))]
    bits = dict((s, int(ladder[i])) for s, i in zip(problem.free, best))
    return problem.scheme(bits, group_size)


def scheme_rows(scheme, c, dims):
    return [[s, dims[s], c.get(s, 0.0), scheme.bits_for(s)]
            for s in sorted(dims)]


def write_scheme(path, scheme, c, dims):
    write_csv(path, SCHEME_COLUMNS, scheme_rows(scheme, c, dims))


def read_scheme(path, group_size=DEFAULT_GROUP_SIZE):
    """
    Scheme from a scheme dump; 32-bit rows become forced slots.
    """

    try:
        rows = read_csv(path)
    except (IOError, OSError) as e:
        raise ConfigError("Cannot read scheme %s: %s" % (path, e))

    bits = {}
    try:
        for row in rows:
            bits[int(row["slot_id"])] = int(row["b_l"])
    except (KeyError, ValueError) as e:
        raise ConfigError("Malformed scheme %s: %s" % (path, e))

    forced = [s for s, b in bits.items() if b == FULL_PRECISION]
    return CompressionScheme(bits, group_size, forced)
