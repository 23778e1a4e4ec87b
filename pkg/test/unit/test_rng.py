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

import unittest

import numpy as np

from lib.numerics.rng import (StreamKey, counter_rng, counter_uniforms,
                              derive_seed, make_keys, uniforms)


class CounterRngTest(unittest.TestCase):
    def setUp(self):
        self.key = StreamKey(1234, 7)

    def test_deterministic(self):
        self.assertEqual(counter_rng(self.key, 5), counter_rng(self.key, 5))
        self.assertEqual(counter_rng(StreamKey(1234, 7), 5),
                         counter_rng(self.key, 5))

    def test_scalar_matches_vector(self):
        draws = counter_uniforms(self.key, np.arange(10, dtype=np.uint64))
        for c in range(10):
            self.assertEqual(counter_rng(self.key, c), draws[c])

    def test_unit_interval(self):
        draws = uniforms(self.key, 100000)
        self.assertTrue(np.all(draws >= 0.0))
        self.assertTrue(np.all(draws < 1.0))

    def test_mean(self):
        draws = uniforms(self.key, 100000)
        self.assertAlmostEqual(draws.mean(), 0.5, delta=0.005)

    def test_streams_decorrelated(self):
        a = uniforms(StreamKey(99, 1), 100000)
        b = uniforms(StreamKey(99, 2), 100000)
        self.assertLess(abs(np.corrcoef(a, b)[0, 1]), 0.01)
        self.assertFalse(np.array_equal(a, b))

    def test_seed_changes_stream(self):
        a = uniforms(StreamKey(1, 3), 1000)
        b = uniforms(StreamKey(2, 3), 1000)
        self.assertFalse(np.array_equal(a, b))

    def test_offset_shifts_counter(self):
        shifted = StreamKey(5, 9, offset=10)
        self.assertEqual(counter_rng(shifted, 0),
                         counter_rng(StreamKey(5, 9), 10))
        self.assertEqual(shifted.reseed(6), StreamKey(6, 9, 10))

    def test_derive_seed(self):
        self.assertEqual(derive_seed(1, 2), derive_seed(1, 2))
        self.assertNotEqual(derive_seed(1, 2), derive_seed(2, 1))
        self.assertNotEqual(derive_seed(1), derive_seed(1, 0))

    def test_make_keys(self):
        keys = make_keys([0, 3], seed=11, offset=4)
        self.assertEqual(keys[3], StreamKey(11, 3, 4))
        self.assertEqual(sorted(keys), [0, 3])


if __name__ == "__main__":
    unittest.main()
