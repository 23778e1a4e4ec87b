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

import os
import shutil
import tempfile
import unittest

import numpy as np

from lib.quantizer.quantizer import bit_factor
from lib.quantizer.scheme import CompressionScheme
from lib.sensitivity.estimator import (SensitivityProfiler,
                                       brute_force_sensitivity,
                                       estimate_sensitivities,
                                       slot_gradient_variance)
from lib.sensitivity.profile import (PINNED, SensitivityProfile,
                                     read_profile, update_profile,
                                     write_profile)
from lib.tape.engine import Batch
from lib.tape.graph import ModelGraph
from lib.utils.constants import Precision
from lib.utils.exceptions import ConfigError, SlotError

MLP = {
    "name": "mlp",
    "input_dim": 4,
    "nodes": [
        {"kind": "linear", "out": 8},
        {"kind": "tanh"},
        {"kind": "linear", "out": 8, "segment": True},
        {"kind": "tanh"},
        {"kind": "linear", "out": 3, "segment": True},
        {"kind": "softmax_ce_loss"},
    ],
}

BATCH = 16


def make_batch(rows=BATCH, seed=1):
    rng = np.random.default_rng(seed)
    return Batch(rng.standard_normal((rows, 4)), rng.integers(0, 3, rows))


class UpdateProfileTest(unittest.TestCase):
    def test_zero_decay_returns_fresh(self):
        old = SensitivityProfile({0: 4.0, 2: 1.0}, 1)
        fresh = SensitivityProfile({0: 2.0, 2: 5.0}, 2)
        new = update_profile(old, fresh, 0.0)
        self.assertEqual(dict(new.c), {0: 2.0, 2: 5.0})
        self.assertEqual(new.estimated_at_step, 2)

    def test_unchanged(self):
        old = SensitivityProfile({0: 4.0, 2: 1.0})
        new = update_profile(old, SensitivityProfile({0: 4.0, 2: 1.0}))
        self.assertEqual(dict(new.c), dict(old.c))

    def test_blend(self):
        old = SensitivityProfile({0: 4.0, 8: PINNED}, ema_decay=0.5)
        new = update_profile(old, SensitivityProfile({0: 2.0, 8: PINNED}))
        self.assertEqual(new[0], 3.0)
        self.assertEqual(new[8], PINNED)
        self.assertEqual(new.pinned(), [8])
        self.assertEqual(list(new.finite()), [0])

    def test_first_refresh(self):
        fresh = SensitivityProfile({0: 2.0})
        self.assertIs(update_profile(None, fresh), fresh)

    def test_mismatch(self):
        self.assertRaises(SlotError, update_profile,
                          SensitivityProfile({0: 1.0}),
                          SensitivityProfile({1: 1.0}))

    def test_invalid(self):
        self.assertRaises(SlotError, SensitivityProfile, {0: -1.0})
        self.assertRaises(ConfigError, SensitivityProfile, {0: 1.0},
                          ema_decay=1.0)


class EstimateTest(unittest.TestCase):
    def setUp(self):
        self.model = ModelGraph(MLP)
        self.params = self.model.init_params(0, Precision.DOUBLE)
        self.batch = make_batch()
        self.keys = self.model.stream_keys(BATCH, seed=11)
        self.slots = [0, 2, 5]
        self.scheme = CompressionScheme.uniform(self.slots, 4, 64)

    def test_lossless_is_zero(self):
        scheme = CompressionScheme.uniform(self.slots, 32)
        profile = estimate_sensitivities(self.model, self.params, self.batch,
                                         scheme, self.keys, 99, self.slots)
        self.assertEqual(list(profile.c.values()), [0.0, 0.0, 0.0])

    def test_same_seed_replays(self):
        profile = estimate_sensitivities(self.model, self.params, self.batch,
                                         self.scheme, self.keys, 11,
                                         self.slots)
        self.assertEqual(list(profile.c.values()), [0.0, 0.0, 0.0])

    def test_nonnegative_and_positive(self):
        profile = estimate_sensitivities(self.model, self.params, self.batch,
                                         self.scheme, self.keys, 99,
                                         self.slots)
        for slot in self.slots:
            self.assertGreater(profile[slot], 0.0)
        self.assertIs(profile.scheme_used, self.scheme)

    def test_zero_jacobian(self):
        # with the middle weight zeroed nothing flows back to the first layer
        self.params["linear2.weight"][:] = 0.0
        profile = estimate_sensitivities(self.model, self.params, self.batch,
                                         self.scheme, self.keys, 99,
                                         self.slots)
        self.assertEqual(profile[0], 0.0)

    def test_scale_covariance(self):
        base = estimate_sensitivities(self.model, self.params, self.batch,
                                      self.scheme, self.keys, 99, self.slots)
        scaled = estimate_sensitivities(self.model.with_loss_scale(3.0),
                                        self.params, self.batch, self.scheme,
                                        self.keys, 99, self.slots)
        for slot in self.slots:
            self.assertAlmostEqual(scaled[slot] / base[slot], 9.0, places=9)

    def test_unknown_slot(self):
        self.assertRaises(SlotError, estimate_sensitivities, self.model,
                          self.params, self.batch, self.scheme, self.keys, 1,
                          [3])

    def test_checkpointed(self):
        profile = estimate_sensitivities(self.model, self.params, self.batch,
                                         self.scheme, self.keys, 99,
                                         self.slots, checkpointed=True)
        for slot in self.slots:
            self.assertGreater(profile[slot], 0.0)


class OracleTest(unittest.TestCase):
    def setUp(self):
        self.model = ModelGraph(MLP)
        self.params = self.model.init_params(0, Precision.DOUBLE)
        self.batch = make_batch(32)

    def test_lossless(self):
        self.assertEqual(brute_force_sensitivity(self.model, self.params,
                                                 self.batch, 0, 32, 100), 0.0)

    def test_too_few_draws(self):
        self.assertRaises(ConfigError, brute_force_sensitivity, self.model,
                          self.params, self.batch, 0, 4, 10)

    def test_loss_scale_quadruples(self):
        a = brute_force_sensitivity(self.model, self.params, self.batch, 2, 4,
                                    100, seed=3)
        b = brute_force_sensitivity(self.model.with_loss_scale(2.0),
                                    self.params, self.batch, 2, 4, 100, seed=3)
        self.assertAlmostEqual(b / a, 4.0, places=9)

    def test_bit_factor_ratio(self):
        v2 = slot_gradient_variance(self.model, self.params, self.batch, 2, 2,
                                    400, seed=5)
        v4 = slot_gradient_variance(self.model, self.params, self.batch, 2, 4,
                                    400, seed=6)
        expected = bit_factor(2) / bit_factor(4)
        self.assertLess(abs(v2 / v4 - expected) / expected, 0.4)

    def test_alg1_tracks_oracle(self):
        model = self.model
        B = 32
        scheme = CompressionScheme.uniform([0, 2, 5], 4)

        profiler = SensitivityProfiler(model, n_pairs=100, pin_loss_head=True)
        estimate = profiler.estimate(self.params, self.batch, scheme, seed=7)
        for slot in (0, 2, 5):
            oracle = brute_force_sensitivity(model, self.params, self.batch,
                                             slot, 4, 400, scheme=scheme,
                                             keys=model.stream_keys(B, 8),
                                             seed=9)
            self.assertLess(abs(estimate[slot] - oracle) / oracle, 0.5, slot)


class ProfilerTest(unittest.TestCase):
    def setUp(self):
        self.model = ModelGraph(MLP)
        self.params = self.model.init_params(0, Precision.DOUBLE)
        self.batch = make_batch()
        self.scheme = CompressionScheme.uniform([0, 2, 5], 4, 64,
                                                forced_fullprec=[8])

    def test_pinned_marker(self):
        profiler = SensitivityProfiler(self.model, n_pairs=2)
        self.assertEqual(profiler.candidates(BATCH), [0, 2, 5])
        profile = profiler.estimate(self.params, self.batch, self.scheme, 1)
        self.assertEqual(profile.slots(), [0, 2, 5, 8])
        self.assertEqual(profile[8], PINNED)

    def test_deterministic(self):
        profiler = SensitivityProfiler(self.model, n_pairs=2)
        a = profiler.estimate(self.params, self.batch, self.scheme, 1, step=4)
        b = profiler.estimate(self.params, self.batch, self.scheme, 1, step=4)
        self.assertEqual(dict(a.c), dict(b.c))

    def test_refresh(self):
        profiler = SensitivityProfiler(self.model, n_pairs=1, ema_decay=0.5)
        first = profiler.refresh(None, self.params, self.batch, self.scheme, 1)
        fresh = profiler.estimate(self.params, self.batch, self.scheme, 1,
                                  step=10)
        second = profiler.refresh(first, self.params, self.batch, self.scheme,
                                  1, step=10)
        self.assertEqual(second.estimated_at_step, 10)
        self.assertAlmostEqual(second[0], 0.5 * first[0] + 0.5 * fresh[0])

    def test_invalid_pairs(self):
        self.assertRaises(ConfigError, SensitivityProfiler, self.model, 0)


class ProfileDumpTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_write_read(self):
        model = ModelGraph(MLP)
        scheme = CompressionScheme({0: 2, 2: 8}, forced_fullprec=[8])
        profile = SensitivityProfile({0: 0.5, 2: 3.25, 8: PINNED},
                                     scheme_used=scheme)
        path = os.path.join(self.tmpdir, "profile.csv")
        write_profile(path, profile, model, BATCH)

        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "slot_id,node_kind,D_l,c_l,bits_assigned")
        self.assertEqual(lines[1], "0,linear,64,0.5,2")
        self.assertEqual(lines[3], "8,softmax_ce_loss,48,inf,32")

        loaded, dims = read_profile(path)
        self.assertEqual(dict(loaded.c), dict(profile.c))
        self.assertEqual(dims, {0: 64, 2: 128, 8: 48})

    def test_empty(self):
        path = os.path.join(self.tmpdir, "empty.csv")
        with open(path, "w") as f:
            f.write("slot_id,node_kind,D_l,c_l,bits_assigned\n")
        self.assertRaises(ConfigError, read_profile, path)


if __name__ == "__main__":
    unittest.main()
