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
Named verification suites run by 'actlab verify'. Each adds sections to
a TheoryReport; counts default to the full acceptance settings and can
be reduced for quick runs.
"""

import logging
import time
from collections import OrderedDict

import numpy as np

from lib.allocator.allocator import (AllocationProblem, allocate_bits,
                                     exhaustive_allocate, predicted_variance)
from lib.numerics.rng import StreamKey, derive_seed
from lib.quantizer.quantizer import bit_factor, dequantize, quantize
from lib.quantizer.scheme import CompressionScheme
from lib.sensitivity.estimator import (SensitivityProfiler,
                                       brute_force_sensitivity)
from lib.tape.engine import Batch, compute_gradients, forward
from lib.tape.graph import ModelGraph, mlp_spec
from lib.theorycheck.report import ReportSection, TheoryReport
from lib.theorycheck.theory import (additivity_check,
                                    linearization_error_scan,
                                    variance_decomposition)
from lib.trainer.datasets import two_gaussians
from lib.utils.constants import (DEFAULT_LADDER, FULL_PRECISION,
                                 SUPPORTED_BITS, NodeKind, Precision)
from lib.utils.exceptions import ConfigError

logger = logging.getLogger('actlab')

UNBIASED_SIGMAS = 4.0
# elements allowed outside the sigma band; ~6e-5 expected at 4 sigma
UNBIASED_OUTLIER_FRACTION = 1e-3
# elements whose pairwise decoded covariance is tracked
INDEPENDENCE_ELEMENTS = 16
INDEPENDENCE_OUTLIER_FRACTION = 1e-2
AUTODIFF_TOLERANCE = 1e-4
GAP_TOLERANCE = 1.05
GAP_QUANTILE = 0.95
PEARSON_MIN = 0.9
SENSITIVITY_REL_ERROR = 0.3
# hidden widths of the sensitivity suite model, under 10^3 parameters
SENSITIVITY_WIDTHS = (32, 16, 8, 4)

_CHUNK = 512


class Reference(object):
    """
    The tanh MLP and two-blob batch the theory suites run on, in double
    precision.
    """

    def __init__(self, depth=2, hidden=16, features=8, batch_size=32,
                 samples=256, seed=0):
        self.dataset = two_gaussians(samples, features, 3.0, seed)
        self.model = ModelGraph(mlp_spec(features, hidden, 2, depth))
        self.params = self.model.init_params(seed, Precision.DOUBLE)
        self.batch = self.dataset.minibatch(0, batch_size, seed)
        self.batch_size = batch_size


def _tiled_draws(x, bits, group_size, n_draws, seed):
    """
    Yields (count, decoded) blocks of independent quantizations of x;
    copies are tiled into one tensor so each call covers many draws.
    """

    done = 0
    chunk = 0
    while done < n_draws:
        count = min(_CHUNK, n_draws - done)
        tiled = np.tile(x, count)
        y = dequantize(quantize(tiled, bits, group_size,
                                StreamKey(derive_seed(seed, bits, chunk), 0)))
        yield count, y.reshape(count, x.size)
        done += count
        chunk += 1


def _pair_covariance_z(second_moment, mean, variance, draws):
    """
    z-scores of the sample covariance of every element pair against the
    sqrt(var_i * var_j / draws) spread it has under independence. Pairs
    with a deterministic element are skipped.
    """

    cov = second_moment - np.outer(mean, mean)
    live = variance > 0
    i, j = np.triu_indices(mean.size, k=1)
    keep = live[i] & live[j]
    i, j = i[keep], j[keep]
    if i.size == 0:
        return 0, 0.0, 0

    sigma = np.sqrt(variance[i] * variance[j] / draws)
    z = np.abs(cov[i, j]) / sigma
    return int(i.size), float(z.max()), int(np.sum(z > UNBIASED_SIGMAS))


def quantizer_suite(report, seed=0, size=1024, group_size=256,
                    unbiased_draws=100000, variance_draws=10000,
                    idempotence_tensors=100, widths=(2, 3, 4, 8)):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(size)
    groups = x.reshape(-1, group_size)
    mins = np.repeat(groups.min(axis=1), group_size)
    ranges = np.repeat(np.ptp(groups, axis=1), group_size)

    unbiased = report.add(ReportSection(
        "quantizer_unbiased", ["bits", "draws", "max_abs_z", "outliers"]))
    independence = report.add(ReportSection(
        "quantizer_independence", ["bits", "draws", "pairs", "max_abs_z",
                                   "outliers"]))
    bound = report.add(ReportSection(
        "quantizer_variance_bound", ["bits", "draws", "max_ratio",
                                     "violations"]))

    # the first elements of two groups, so pairs span a group boundary
    half = INDEPENDENCE_ELEMENTS // 2
    tracked = np.unique(np.concatenate([np.arange(half),
                                        group_size + np.arange(half)]) % size)

    worst_outliers = 0.0
    worst_pairs = 0.0
    violations = 0
    for bits in widths:
        step = ranges / (2 ** bits - 1)
        frac = np.where(step > 0, (x - mins) / np.where(step > 0, step, 1), 0)
        frac = frac - np.floor(frac)

        total = np.zeros(size)
        cross = np.zeros((tracked.size, tracked.size))
        for count, y in _tiled_draws(x, bits, group_size, unbiased_draws,
                                     derive_seed(seed, 1)):
            total += y.sum(axis=0)
            sub = y[:, tracked]
            cross += sub.T.dot(sub)
        mean = total / unbiased_draws
        sigma = step * np.sqrt(frac * (1 - frac) / unbiased_draws)
        err = np.abs(mean - x)
        z = np.where(sigma > 0, err / np.where(sigma > 0, sigma, 1), 0)
        # zero-variance elements must decode exactly
        outliers = int(np.sum(z > UNBIASED_SIGMAS)
                       + np.sum((sigma == 0) & (err > 1e-12)))
        unbiased.add_row(bits, unbiased_draws, float(z.max()), outliers)
        worst_outliers = max(worst_outliers, outliers / float(size))

        pairs, z_max, pair_outliers = _pair_covariance_z(
            cross / unbiased_draws, mean[tracked],
            (step * step * frac * (1 - frac))[tracked], unbiased_draws)
        independence.add_row(bits, unbiased_draws, pairs, z_max,
                             pair_outliers)
        if pairs:
            worst_pairs = max(worst_pairs, pair_outliers / float(pairs))

        total = np.zeros(size)
        total_sq = np.zeros(size)
        for count, y in _tiled_draws(x, bits, group_size, variance_draws,
                                     derive_seed(seed, 2)):
            total += y.sum(axis=0)
            total_sq += (y * y).sum(axis=0)
        mean = total / variance_draws
        var = np.maximum(total_sq / variance_draws - mean * mean, 0.0)
        limit = 0.25 * ranges ** 2 * bit_factor(bits)
        over = var > limit * (1 + 1e-9) + 1e-12
        ratio = np.where(limit > 0, var / np.where(limit > 0, limit, 1), 0)
        bound.add_row(bits, variance_draws, float(ratio.max()),
                      int(over.sum()))
        violations += int(over.sum())

    unbiased.check("outlier fraction", worst_outliers, None,
                   UNBIASED_OUTLIER_FRACTION)
    bound.check("violations", violations, None, 0)
    independence.check("outlier fraction", worst_pairs, None,
                       INDEPENDENCE_OUTLIER_FRACTION)

    idem = report.add(ReportSection("quantizer_idempotence",
                                    ["bits", "dtype", "tensors",
                                     "mismatches"]))
    tensors = [rng.standard_normal(int(rng.integers(1, 2000)))
               for _ in range(idempotence_tensors)]
    mismatches = 0
    for dtype in (np.float64, np.float32):
        for bits in SUPPORTED_BITS:
            bad = 0
            for i, t in enumerate(tensors):
                t = t.astype(dtype)
                q1 = quantize(t, bits, group_size,
                              StreamKey(derive_seed(seed, 3, i), bits))
                q2 = quantize(dequantize(q1), bits, group_size,
                              StreamKey(derive_seed(seed, 4, i), bits))
                if not q1.same_payload(q2):
                    bad += 1
            idem.add_row(bits, np.dtype(dtype).name, len(tensors), bad)
            mismatches += bad
    idem.check("mismatches", mismatches, None, 0)


def _random_model(rng):
    depth = int(rng.integers(1, 4))
    nodes = []
    for _ in range(depth):
        nodes.append({"kind": NodeKind.linear, "out": int(rng.integers(2, 7))})
        nodes.append({"kind": NodeKind.tanh})
        if rng.random() < 0.3:
            nodes.append({"kind": NodeKind.dropout, "p": 0.25})
    outputs = int(rng.integers(2, 5))
    nodes.append({"kind": NodeKind.linear, "out": outputs})
    loss = NodeKind.softmax_ce_loss if rng.random() < 0.5 else NodeKind.mse_loss
    nodes.append({"kind": loss})
    return ModelGraph({"name": "random", "input_dim": int(rng.integers(2, 7)),
                       "nodes": nodes})


def _finite_difference(model, params, batch, keys, eps=1e-6):
    grads = OrderedDict()
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        out = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = forward(model, params, batch, None, keys)[0]
            flat[i] = old - eps
            down = forward(model, params, batch, None, keys)[0]
            flat[i] = old
            out[i] = (up - down) / (2 * eps)
        grads[name] = g
    return np.concatenate([g.reshape(-1) for g in grads.values()])


def autodiff_suite(report, seed=0, n_models=20, batch_size=4):
    rng = np.random.default_rng(seed)
    section = report.add(ReportSection("autodiff",
                                       ["model", "depth", "params",
                                        "rel_error"]))
    worst = 0.0
    for m in range(n_models):
        model = _random_model(rng)
        params = model.init_params(derive_seed(seed, m), Precision.DOUBLE)
        x = rng.standard_normal((batch_size, model.input_dim))
        if model.num_classes is not None:
            y = rng.integers(0, model.num_classes, batch_size)
        else:
            y = rng.standard_normal((batch_size, model.output_dim))
        batch = Batch(x, y)

        keys = model.stream_keys(batch_size, derive_seed(seed, m, 1))
        slots = [s.slot_id for s in model.activation_slots(batch_size)]
        scheme = CompressionScheme.full_precision(slots)
        _, grads, _ = compute_gradients(model, params, batch, scheme, keys)
        g = grads.flatten()
        fd = _finite_difference(model, params, batch, keys)

        scale = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        err = float(np.linalg.norm(g - fd) / scale)
        section.add_row(m, len(model.nodes), g.size, err)
        worst = max(worst, err)

    section.check("max relative error", worst, None, AUTODIFF_TOLERANCE)


def _random_problem(rng, max_slots):
    L = int(rng.integers(1, max_slots + 1))
    c = dict((s, float(np.exp(rng.normal(0.0, 2.0)))) for s in range(L))
    dims = dict((s, int(rng.integers(16, 4096))) for s in range(L))
    return AllocationProblem.from_average(c, dims, float(rng.uniform(2.0, 8.0)),
                                          DEFAULT_LADDER)


def allocator_suite(report, seed=0, instances=1000, max_slots=6):
    rng = np.random.default_rng(seed)
    section = report.add(ReportSection("allocator_gap",
                                       ["instance", "slots", "greedy",
                                        "optimum", "ratio", "over_budget"]))
    ratios = []
    violations = 0
    for i in range(instances):
        problem = _random_problem(rng, max_slots)
        greedy = allocate_bits(problem)
        best = exhaustive_allocate(problem)

        v_greedy = predicted_variance(problem.c, greedy)
        v_best = predicted_variance(problem.c, best)
        ratio = v_greedy / v_best if v_best > 0 else (1.0 if v_greedy == 0 else float("inf"))
        bits = dict((s, greedy.bits_for(s)) for s in problem.free)
        over = problem.cost(bits) > problem.budget_bits

        section.add_row(i, len(problem.free), v_greedy, v_best, ratio, int(over))
        ratios.append(ratio)
        violations += int(over)

    within = float(np.mean(np.array(ratios) <= GAP_TOLERANCE))
    section.meta["p95_ratio"] = float(np.percentile(ratios, 95))
    section.check("fraction within %.2fx" % GAP_TOLERANCE, within,
                  GAP_QUANTILE, None)
    section.check("budget violations", violations, None, 0)


def _pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def sensitivity_suite(report, seed=0, oracle_draws=2000, n_pairs=4,
                      precise_pairs=50, bits=4, group_size=64):
    """
    Seed-pair estimates against the brute-force oracle on a 4-hidden-layer
    tanh MLP (five compressible slots). Layer widths halve with depth.
    """

    ref = Reference(depth=len(SENSITIVITY_WIDTHS), hidden=SENSITIVITY_WIDTHS,
                    seed=seed)
    model, params, batch = ref.model, ref.params, ref.batch
    B = ref.batch_size

    profiler = SensitivityProfiler(model, n_pairs)
    slots = profiler.candidates(B)
    scheme = CompressionScheme.uniform(slots, bits, group_size,
                                       profiler.pinned(B))
    quick = profiler.estimate(params, batch, scheme, derive_seed(seed, 1))
    precise = SensitivityProfiler(model, precise_pairs).estimate(
        params, batch, scheme, derive_seed(seed, 2))

    keys = model.stream_keys(B, derive_seed(seed, 3))
    section = report.add(ReportSection("sensitivity_oracle",
                                       ["slot", "alg1_quick", "alg1_precise",
                                        "oracle", "rel_error"]))
    oracle = []
    worst = 0.0
    for slot in slots:
        c = brute_force_sensitivity(model, params, batch, slot, bits,
                                    oracle_draws, scheme, keys,
                                    derive_seed(seed, 4), group_size)
        oracle.append(c)
        err = abs(precise[slot] - c) / c if c > 0 else 0.0
        worst = max(worst, err)
        section.add_row(slot, quick[slot], precise[slot], c, err)

    section.meta.update(slots=len(slots), oracle_draws=oracle_draws)
    section.check("pearson r", _pearson([quick[s] for s in slots], oracle),
                  PEARSON_MIN, None)
    section.check("max relative error", worst, None, SENSITIVITY_REL_ERROR)


def prop1_suite(report, seed=0, ladder=(3, 4, 5, 6, 8), n_draws=200,
                group_size=64):
    ref = Reference(seed=seed)
    report.add(linearization_error_scan(ref.model, ref.params, ref.batch,
                                        tuple(ladder) + (FULL_PRECISION,),
                                        n_draws, derive_seed(seed, 1),
                                        group_size))


def prop2_suite(report, seed=0, bits=4, n_data=64, n_keys=64, group_size=64):
    ref = Reference(seed=seed)
    slots = [s.slot_id for s in ref.model.activation_slots(ref.batch_size)]
    scheme = CompressionScheme.uniform(slots, bits, group_size)
    report.add(variance_decomposition(ref.model, ref.params, ref.dataset,
                                      scheme, n_data, n_keys, ref.batch_size,
                                      derive_seed(seed, 1)))


def additivity_suite(report, seed=0, bits=8, n_keys=500, group_size=64):
    ref = Reference(depth=1, seed=seed)
    slots = [s.slot_id for s in ref.model.activation_slots(ref.batch_size)]
    scheme = CompressionScheme.uniform(slots, bits, group_size)
    report.add(additivity_check(ref.model, ref.params, ref.batch, scheme,
                                n_keys, derive_seed(seed, 1)))


SUITES = OrderedDict([
    ("quantizer", quantizer_suite),
    ("autodiff", autodiff_suite),
    ("allocator", allocator_suite),
    ("sensitivity", sensitivity_suite),
    ("prop1", prop1_suite),
    ("prop2", prop2_suite),
    ("additivity", additivity_suite),
])


# smoke-run counts ("verify <suite> quick"); tolerances are unchanged
QUICK_OPTIONS = {
    "quantizer": {"unbiased_draws": 2000, "variance_draws": 500,
                  "idempotence_tensors": 5},
    "autodiff": {"n_models": 3},
    "allocator": {"instances": 200},
    "sensitivity": {"oracle_draws": 200, "n_pairs": 2, "precise_pairs": 10},
    "prop1": {"n_draws": 20},
    "prop2": {"n_data": 16, "n_keys": 16},
    "additivity": {"n_keys": 100},
}


def suite_names():
    return list(SUITES) + ["all"]


def run_suites(which, seed=0, options=None):
    """
    Runs the named suite ('all' for every one) into a fresh report.
    'options' maps suite name to keyword overrides.
    """

    if which != "all" and which not in SUITES:
        raise ConfigError("Unknown suite %s, expected one of %s"
                          % (which, ", ".join(suite_names())))

    names = list(SUITES) if which == "all" else [which]
    report = TheoryReport(OrderedDict([("suites", ",".join(names)),
                                       ("seed", seed),
                                       ("precision", Precision.DOUBLE)]))
    for name in names:
        started = time.time()
        SUITES[name](report, seed, **(options or {}).get(name, {}))
        logger.info("suite %s finished in %.1f s", name, time.time() - started)

    return report
