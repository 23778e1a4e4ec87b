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
Sensitivity estimation by controlled re-seeding.

Quantization is idempotent and driven by counter streams, so two episodes
that share every stream key produce bit-identical gradients. Re-seeding a
single slot's stream therefore isolates that slot's compression noise:
half the squared distance between the two gradients is an unbiased
estimate of the gradient variance that slot contributes.
"""

import logging
import time
from collections import OrderedDict

import numpy as np

from lib.numerics.rng import derive_seed
from lib.quantizer.quantizer import bit_factor
from lib.quantizer.scheme import CompressionScheme, check_bits
from lib.sensitivity.profile import PINNED, SensitivityProfile, update_profile
from lib.tape.engine import compute_gradients
from lib.utils.constants import (DEFAULT_GROUP_SIZE, DEFAULT_SEED_PAIRS,
                                 DEFAULT_SENSITIVITY_DECAY, FULL_PRECISION)
from lib.utils.exceptions import ConfigError, SlotError
from lib.utils.util import concurrent_map

logger = logging.getLogger('actlab')

MIN_ORACLE_DRAWS = 100


def _batch_size(batch):
    return int(np.shape(batch.inputs)[0])


def _gradient(model, params, batch, scheme, keys, checkpointed):
    _, grads, _ = compute_gradients(model, params, batch, scheme, keys,
                                    checkpointed)
    return grads.flatten()


def _check_slots(model, batch_size, slots, checkpointed):
    known = set(s.slot_id for s in
                model.activation_slots(batch_size, checkpointed))
    for slot in slots:
        if slot not in known:
            raise SlotError("Slot %s is not a canonical activation slot"
                            % (str(slot)))


def estimate_sensitivities(model, params, batch, scheme, keys, fresh_seed,
                           slots=None, step=0,
                           ema_decay=DEFAULT_SENSITIVITY_DECAY,
                           checkpointed=False, threads=None):
    """
    One seed pair. g0 is computed once with 'keys'; for each slot l, g1
    is computed with only slot l's key re-seeded to 'fresh_seed', and
    c_l = |g0 - g1|^2 / (2 S(b_l)). Slots at 32 bits estimate to 0.
    """

    B = _batch_size(batch)
    if slots is None:
        slots = [s.slot_id for s in model.activation_slots(B, checkpointed)]
    _check_slots(model, B, slots, checkpointed)

    g0 = _gradient(model, params, batch, scheme, keys, checkpointed)

    def one(slot):
        bits = scheme.bits_for(slot)
        if bits == FULL_PRECISION:
            return 0.0
        if slot not in keys:
            raise SlotError("No stream key for slot %d" % (slot))

        replay = dict(keys)
        replay[slot] = keys[slot].reseed(fresh_seed)
        g1 = _gradient(model, params, batch, scheme, replay, checkpointed)
        return 0.5 * float(np.sum((g0 - g1) ** 2)) / bit_factor(bits)

    values = concurrent_map(one, list(slots), threads)
    return SensitivityProfile(dict(zip(slots, values)), step, ema_decay,
                              scheme)


def gradient_samples(model, params, batch, scheme, n_draws, seed=0,
                     checkpointed=False, threads=None):
    """
    (n_draws, P) gradients; draw i keys every stream from
    derive_seed(seed, i).
    """

    B = _batch_size(batch)

    def draw(i):
        keys = model.stream_keys(B, derive_seed(seed, i))
        return _gradient(model, params, batch, scheme, keys, checkpointed)

    return np.array(concurrent_map(draw, list(range(n_draws)), threads))


def gradient_variance(model, params, batch, scheme, n_draws, seed=0,
                      checkpointed=False, threads=None):
    """
    Summed per-coordinate gradient variance with every slot compressed
    per scheme.
    """

    if n_draws < 2:
        raise ConfigError("Need at least 2 draws, got %d" % (n_draws))
    if scheme is None or scheme.is_lossless():
        return 0.0

    samples = gradient_samples(model, params, batch, scheme, n_draws, seed,
                               checkpointed, threads)
    return float(np.var(samples, axis=0, ddof=1).sum())


def slot_gradient_variance(model, params, batch, slot, bits, n_draws,
                           scheme=None, keys=None, seed=0,
                           group_size=DEFAULT_GROUP_SIZE, checkpointed=False,
                           threads=None):
    """
    Summed per-coordinate gradient variance over n_draws independent keys
    for 'slot' at 'bits', every other stream held fixed. Slots absent
    from 'scheme' stay raw.
    """

    bits = check_bits(bits)
    if bits == FULL_PRECISION:
        return 0.0
    if n_draws < 2:
        raise ConfigError("Need at least 2 draws, got %d" % (n_draws))

    B = _batch_size(batch)
    _check_slots(model, B, [slot], checkpointed)

    if scheme is None:
        scheme = CompressionScheme({}, group_size)
    scheme = scheme.with_bits({slot: bits})
    if keys is None:
        keys = model.stream_keys(B, seed)

    def draw(i):
        replay = dict(keys)
        replay[slot] = keys[slot].reseed(derive_seed(seed, slot, i))
        return _gradient(model, params, batch, scheme, replay, checkpointed)

    samples = np.array(concurrent_map(draw, list(range(n_draws)), threads))
    return float(np.var(samples, axis=0, ddof=1).sum())


def brute_force_sensitivity(model, params, batch, slot, bits, n_draws,
                            scheme=None, keys=None, seed=0,
                            group_size=DEFAULT_GROUP_SIZE, checkpointed=False,
                            threads=None):
    """
    Monte Carlo oracle for c_l: the empirical gradient variance from
    slot l's noise alone, divided by S(b_l).
    """

    if n_draws < MIN_ORACLE_DRAWS:
        raise ConfigError("Oracle needs at least %d draws, got %d"
                          % (MIN_ORACLE_DRAWS, n_draws))

    variance = slot_gradient_variance(model, params, batch, slot, bits,
                                      n_draws, scheme, keys, seed,
                                      group_size, checkpointed, threads)
    if not variance:
        return 0.0
    return variance / bit_factor(bits)


class SensitivityProfiler(object):
    """
    Averages estimate_sensitivities over n_pairs seed pairs and smooths
    successive refreshes. Pinned slots get the +inf marker and no
    episodes.
    """

    def __init__(self, model, n_pairs=DEFAULT_SEED_PAIRS,
                 ema_decay=DEFAULT_SENSITIVITY_DECAY, pin_loss_head=True,
                 checkpointed=False, threads=None):
        if n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1, got %s" % (n_pairs))

        self.model = model
        self.n_pairs = int(n_pairs)
        self.ema_decay = ema_decay
        self.pin_loss_head = pin_loss_head
        self.checkpointed = checkpointed
        self.threads = threads

    def pinned(self, batch_size):
        return self.model.pinned_slots(batch_size, self.pin_loss_head,
                                       self.checkpointed)

    def candidates(self, batch_size):
        pinned = set(self.pinned(batch_size))
        return [s.slot_id for s in
                self.model.activation_slots(batch_size, self.checkpointed)
                if s.slot_id not in pinned]

    def estimate(self, params, batch, scheme, seed, step=0, offset=0):
        B = _batch_size(batch)
        slots = self.candidates(B)
        started = time.time()

        total = OrderedDict((s, 0.0) for s in slots)
        for pair in range(self.n_pairs):
            keys = self.model.stream_keys(B, derive_seed(seed, step, pair, 0),
                                          offset)
            fresh = derive_seed(seed, step, pair, 1)
            single = estimate_sensitivities(self.model, params, batch, scheme,
                                            keys, fresh, slots, step,
                                            self.ema_decay, self.checkpointed,
                                            self.threads)
            for s in slots:
                total[s] += single[s]

        c = OrderedDict((s, v / self.n_pairs) for s, v in total.items())
        for s in self.pinned(B):
            c[s] = PINNED

        for s, v in c.items():
            logger.debug("step %d slot %d (%s): c=%.6g", step, s,
                         self.model.layout(B)[s].label, v)
        logger.debug("profiled %d slots x %d pairs in %.3f s", len(slots),
                     self.n_pairs, time.time() - started)

        return SensitivityProfile(c, step, self.ema_decay, scheme)

    def refresh(self, old, params, batch, scheme, seed, step=0, offset=0):
        return update_profile(old, self.estimate(params, batch, scheme, seed,
                                                 step, offset))
