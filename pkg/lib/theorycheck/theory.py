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
Empirical checks of the variance structure of compressed-context
gradients: the first-order expansion around the exact context, how its
error scales with the quantization variance, the split of gradient
variance into sampling and compression terms, and the additivity of
per-slot compression variance.

Everything here runs in double precision on smooth models.
"""

import logging
from collections import OrderedDict

import numpy as np

from lib.allocator.allocator import predicted_variance
from lib.numerics.rng import derive_seed
from lib.quantizer.quantizer import dequantize, quantize
from lib.quantizer.scheme import CompressionScheme
from lib.sensitivity.estimator import (MIN_ORACLE_DRAWS,
                                       brute_force_sensitivity,
                                       gradient_samples, gradient_variance,
                                       slot_gradient_variance)
from lib.tape.engine import backward, forward
from lib.theorycheck.report import ReportSection
from lib.utils.constants import FULL_PRECISION
from lib.utils.exceptions import ConfigError
from lib.utils.util import concurrent_map

logger = logging.getLogger('actlab')

FD_SCALE = 1e-3
FD_EPSILON = 1e-30

# acceptance windows
SLOPE_RANGE = (0.8, 1.2)
DECOMPOSITION_TOLERANCE = 0.15
ADDITIVITY_TOLERANCE = 0.2


def _require_smooth(model):
    if not model.is_smooth():
        raise ConfigError("Model %s has relu/maxpool nodes; the expansion "
                          "needs a bounded second derivative" % (model.name))


def _double(params):
    return OrderedDict((n, np.asarray(p, dtype=np.float64))
                       for n, p in params.items())


def _batch_size(batch):
    return int(np.shape(batch.inputs)[0])


def _total_variance(samples):
    # centred on the first draw so identical draws give exactly 0
    samples = np.asarray(samples)
    return float(np.var(samples - samples[0], axis=0, ddof=1).sum())


def _residual(measured, reference):
    if reference == 0:
        return 0.0 if measured == 0 else float("inf")
    return abs(measured) / reference


class _Expansion(object):
    """
    The exact context h of one batch, one quantization error draw dh and
    the backward map evaluated around them.
    """

    def __init__(self, model, params, batch, scheme, keys):
        _require_smooth(model)
        params = _double(params)
        B = _batch_size(batch)

        _, self.store = forward(model, params, batch, None, keys)
        self.slots = [s.slot_id for s in model.activation_slots(B)]
        self.h = OrderedDict((s, self.store.load(s)) for s in self.slots)

        self.dh = OrderedDict()
        for s in self.slots:
            bits = FULL_PRECISION if scheme is None else scheme.bits_for(s)
            if bits == FULL_PRECISION:
                self.dh[s] = np.zeros_like(self.h[s])
            else:
                q = quantize(self.h[s], bits, scheme.group_size, keys[s])
                self.dh[s] = dequantize(q) - self.h[s]

    def gradient(self, t=0.0):
        """
        g(h + t dh), flattened.
        """

        if t == 0.0:
            return backward(self.store).flatten()
        values = dict((s, self.h[s] + t * self.dh[s]) for s in self.slots)
        return backward(self.store.with_values(values)).flatten()

    def dh_norm(self):
        return float(np.sqrt(sum(np.sum(d * d) for d in self.dh.values())))

    def h_norm(self):
        return float(np.sqrt(sum(np.sum(v * v) for v in self.h.values())))

    def linearized(self):
        g = self.gradient()
        norm_dh = self.dh_norm()
        if norm_dh == 0:
            return g

        t = FD_SCALE * self.h_norm() / max(norm_dh, FD_EPSILON)
        jdh = (self.gradient(t) - self.gradient(-t)) / (2.0 * t)
        return g + jdh


def linearized_gradient(model, params, batch, scheme, keys):
    """
    g(h) + J dh, with dh = Q(h) - h drawn with 'keys' and J dh taken by
    central differences of the backward map along dh.
    """

    return _Expansion(model, params, batch, scheme, keys).linearized()


def linearization_error(model, params, batch, scheme, keys):
    """
    (|g(Q(h)) - linearized|, |dh|^2, |g(h)|) for one draw.
    """

    e = _Expansion(model, params, batch, scheme, keys)
    exact = e.gradient(1.0)
    error = float(np.linalg.norm(exact - e.linearized()))
    return error, e.dh_norm() ** 2, float(np.linalg.norm(e.gradient()))


def _uniform(model, batch_size, bits, group_size):
    slots = [s.slot_id for s in model.activation_slots(batch_size)]
    return CompressionScheme.uniform(slots, bits, group_size)


def linearization_error_scan(model, params, batch, ladder, n_draws, seed=0,
                             group_size=64, threads=None):
    """
    Mean expansion error and mean |dh|^2 per width; the slope of
    log(error) against log(var) over the compressed widths should be
    about 1.
    """

    B = _batch_size(batch)
    section = ReportSection("prop1_linearization",
                            ["bits", "var_dh", "mean_error",
                             "relative_error"])

    fit_var = []
    fit_err = []
    for bits in ladder:
        scheme = _uniform(model, B, bits, group_size)

        def draw(i):
            keys = model.stream_keys(B, derive_seed(seed, bits, i))
            return linearization_error(model, params, batch, scheme, keys)

        results = np.array(concurrent_map(draw, list(range(n_draws)), threads))
        error, var, g_norm = results.mean(axis=0)
        section.add_row(bits, var, error, error / g_norm if g_norm else 0.0)
        logger.debug("linearization scan: %d bits var %.4g error %.4g",
                     bits, var, error)

        if bits != FULL_PRECISION and var > 0 and error > 0:
            fit_var.append(np.log(var))
            fit_err.append(np.log(error))

    if len(fit_var) >= 2:
        slope = float(np.polyfit(fit_var, fit_err, 1)[0])
    else:
        slope = float("nan")

    section.meta["n_draws"] = n_draws
    section.check("log-log slope", slope, *SLOPE_RANGE)
    return section


def variance_decomposition(model, params, dataset, scheme, n_data, n_keys,
                           batch_size, seed=0, threads=None):
    """
    Sampling variance across minibatches (exact context), compression
    variance across keys averaged over minibatches, and the total over
    joint draws; the residual is |total - sampling - compression| / total.
    """

    _require_smooth(model)
    if n_data < 2 or n_keys < 2:
        raise ConfigError("Need at least 2 data and 2 key draws")
    if batch_size > len(dataset):
        raise ConfigError("Dataset %s has %d samples, fewer than the batch %d"
                          % (dataset.name, len(dataset), batch_size))

    params = _double(params)
    data_seed = derive_seed(seed, 0)

    exact = []
    within = []
    joint = []
    for d in range(n_data):
        batch = dataset.minibatch(d, batch_size, data_seed)
        exact.append(gradient_samples(model, params, batch, None, 1)[0])
        samples = gradient_samples(model, params, batch, scheme, n_keys,
                                   derive_seed(seed, 1, d), threads=threads)
        within.append(_total_variance(samples))
        joint.extend(samples)

    sampling = _total_variance(exact)
    compression = float(np.mean(within))
    total = _total_variance(joint)
    residual = _residual(total - sampling - compression, total)

    section = ReportSection("prop2_decomposition",
                            ["term", "variance"])
    section.add_row("sampling", sampling)
    section.add_row("compression", compression)
    section.add_row("total", total)
    section.add_row("residual", residual)
    section.meta.update(n_data=n_data, n_keys=n_keys, batch_size=batch_size)
    section.check("relative residual", residual, None, DECOMPOSITION_TOLERANCE)
    return section


def additivity_check(model, params, batch, scheme, n_keys, seed=0,
                     threads=None):
    """
    V_all with every slot compressed against the sum of V_l with only
    slot l compressed. With n_keys >= MIN_ORACLE_DRAWS the sum is also
    compared to sum c_l S(b_l) from an independent oracle run.
    """

    _require_smooth(model)
    params = _double(params)
    B = _batch_size(batch)
    slots = [s.slot_id for s in model.activation_slots(B)
             if scheme.bits_for(s.slot_id) != FULL_PRECISION]

    v_all = gradient_variance(model, params, batch, scheme, n_keys,
                              derive_seed(seed, 0), threads=threads)

    section = ReportSection("thm2_additivity",
                            ["slot", "bits", "V_l", "c_l"])
    per_slot = OrderedDict()
    c = OrderedDict()
    for slot in slots:
        bits = scheme.bits_for(slot)
        per_slot[slot] = slot_gradient_variance(
            model, params, batch, slot, bits, n_keys,
            seed=derive_seed(seed, 1), group_size=scheme.group_size,
            threads=threads)
        if n_keys >= MIN_ORACLE_DRAWS:
            c[slot] = brute_force_sensitivity(
                model, params, batch, slot, bits, n_keys,
                seed=derive_seed(seed, 2), group_size=scheme.group_size,
                threads=threads)
        section.add_row(slot, bits, per_slot[slot], c.get(slot, float("nan")))

    v_sum = float(sum(per_slot.values()))
    residual = _residual(v_all - v_sum, v_all)
    predicted = predicted_variance(c, scheme) if c else float("nan")

    section.add_row("all", "", v_all, "")
    section.add_row("sum", "", v_sum, "")
    section.add_row("predicted", "", predicted, "")
    section.meta.update(n_keys=n_keys)
    section.check("additivity residual", residual, None, ADDITIVITY_TOLERANCE)
    return section

