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

from lib.numerics.rng import StreamKey
from lib.numerics.tensor import group_minmax
from lib.quantizer.packing import pack_codes, unpack_codes
from lib.quantizer.quantizer import (SNAP_TOLERANCE, bit_factor,
                                     canonical_ranges, compressed_size_bits,
                                     dequantize, quantize, snap_tolerances,
                                     variance_bound)
from lib.quantizer.scheme import CompressionScheme, check_bits
from lib.quantizer.serial import (qtensor_from_bytes, qtensor_to_bytes,
                                  read_qtensor, write_qtensor)
from lib.utils.constants import SIDECAR_BITS_PER_GROUP
from lib.utils.exceptions import NonFiniteError, QuantizerError


class BitFactorTest(unittest.TestCase):
    def test_values(self):
        self.assertAlmostEqual(bit_factor(2), 1.0 / 9)
        self.assertAlmostEqual(bit_factor(4), 1.0 / 225)
        self.assertEqual(bit_factor(32), 0.0)


class QuantizeTest(unittest.TestCase):
    def setUp(self):
        self.key = StreamKey(42, 3)

    def test_constant_group(self):
        x = np.array([5.0, 5.0, 5.0, 5.0])
        for b in (1, 2, 4, 8):
            np.testing.assert_array_equal(dequantize(quantize(x, b, 4, self.key)), x)

    def test_endpoints_deterministic(self):
        x = np.array([0.0, 1.0])
        for seed in range(5):
            y = dequantize(quantize(x, 1, 2, StreamKey(seed, 0)))
            np.testing.assert_array_equal(y, x)

    def test_stochastic_rounding_frequency(self):
        n = 100000
        x = np.concatenate([[0.0, 1.0], np.full(n, 0.3)])
        y = dequantize(quantize(x, 1, n + 2, self.key))
        self.assertAlmostEqual(np.mean(y[2:] == 1.0), 0.3, delta=0.014)
        self.assertTrue(np.all((y[2:] == 0.0) | (y[2:] == 1.0)))

    def test_full_precision_passthrough(self):
        for dtype in (np.float32, np.float64):
            x = np.random.default_rng(0).standard_normal((3, 5)).astype(dtype)
            q = quantize(x, 32, 4, self.key)
            y = dequantize(q)
            self.assertEqual(y.dtype, dtype)
            np.testing.assert_array_equal(x, y)
            self.assertIsNone(q.codes)

    def test_dtype_restored(self):
        x = np.linspace(-1, 1, 20).astype(np.float32).reshape(4, 5)
        y = dequantize(quantize(x, 4, 8, self.key))
        self.assertEqual(y.dtype, np.float32)
        self.assertEqual(y.shape, (4, 5))

    def test_extremes_decode_exactly(self):
        x = np.random.default_rng(3).standard_normal(300)
        q = quantize(x, 3, 100, self.key)
        y = dequantize(q)
        codes = q.unpacked_codes()
        self.assertTrue(np.all(codes <= 7))
        for g in range(3):
            chunk = slice(100 * g, 100 * g + 100)
            lo = np.argmin(x[chunk])
            hi = np.argmax(x[chunk])
            self.assertEqual(y[chunk][lo], q.mins[g])
            self.assertEqual(y[chunk][hi], q.mins[g] + q.ranges[g])
            self.assertEqual(codes[chunk][lo], 0)
            self.assertEqual(codes[chunk][hi], 7)

    def test_unbiased(self):
        x = np.random.default_rng(5).uniform(-2, 2, 64)
        draws = 2000
        total = np.zeros_like(x)
        for i in range(draws):
            total += dequantize(quantize(x, 2, 16, StreamKey(i, 1)))
        mean = total / draws

        mins = np.repeat(x.reshape(4, 16).min(axis=1), 16)
        step = np.repeat(np.ptp(x.reshape(4, 16), axis=1), 16) / 3.0
        frac = (x - mins) / step
        frac = frac - np.floor(frac)
        sigma = step * np.sqrt(frac * (1 - frac) / draws)
        self.assertTrue(np.all(np.abs(mean - x) <= 5 * sigma + 1e-9))

    def test_variance_within_bound(self):
        x = np.random.default_rng(6).standard_normal(32)
        for b in (2, 3, 4, 8):
            samples = np.array([dequantize(quantize(x, b, 8, StreamKey(i, 2)))
                                for i in range(400)])
            per_element = np.var(samples, axis=0)
            ranges = np.repeat(np.ptp(x.reshape(4, 8), axis=1), 8)
            limit = 0.25 * ranges ** 2 * bit_factor(b)
            self.assertTrue(np.all(per_element <= limit * (1 + 1e-9) + 1e-15))

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            x = rng.standard_normal(rng.integers(1, 500))
            for b in (1, 2, 3, 4, 8):
                q1 = quantize(x, b, 64, StreamKey(trial, 0))
                q2 = quantize(dequantize(q1), b, 64, StreamKey(trial + 100, 5))
                self.assertTrue(q1.same_payload(q2))

    def test_idempotent_single_precision(self):
        # large offset, small spread: float32 rounds the decoded levels
        base = 1000.0 + 0.01 * np.random.default_rng(12).standard_normal(1024)
        for dtype in (np.float32, np.float64):
            x = base.astype(dtype)
            for b in (2, 3, 4, 8):
                for trial in range(5):
                    q1 = quantize(x, b, 256, StreamKey(trial, 1))
                    y = dequantize(q1)
                    self.assertEqual(y.dtype, np.dtype(dtype))
                    q2 = quantize(y, b, 256, StreamKey(trial + 50, 9))
                    self.assertTrue(q1.same_payload(q2),
                                    "%s at %d bits" % (np.dtype(dtype), b))

    def test_snap_tolerances(self):
        mins = np.array([1000.0, -1.0, 3.0])
        ranges = np.array([0.05, 2.0, 0.0])
        wide = snap_tolerances(np.float32, mins, ranges, 8)
        narrow = snap_tolerances(np.float64, mins, ranges, 8)
        self.assertTrue(np.all(wide >= narrow))
        self.assertTrue(np.all(narrow >= SNAP_TOLERANCE))
        # half an ulp of 1000 in float32, in 8-bit code units
        self.assertAlmostEqual(wide[0] - SNAP_TOLERANCE,
                               0.5 * 255 * 2.0 ** -14 / 0.05)
        self.assertLess(narrow[0], 1e-6)

    def test_elementwise_independent(self):
        x = np.array([0.0, 0.3, 0.55, 0.8, 1.0])
        draws = 100000
        y = dequantize(quantize(np.tile(x, draws), 2, x.size, self.key))
        y = y.reshape(draws, x.size)[:, 1:4]
        cov = np.cov(y, rowvar=False)
        for i in range(3):
            self.assertGreater(cov[i, i], 0.0)
            for j in range(i + 1, 3):
                sigma = np.sqrt(cov[i, i] * cov[j, j] / draws)
                self.assertLessEqual(abs(cov[i, j]), 4 * sigma)

    def test_deterministic(self):
        x = np.random.default_rng(8).standard_normal(100)
        q1 = quantize(x, 4, 32, self.key)
        q2 = quantize(x, 4, 32, self.key)
        self.assertTrue(q1.same_payload(q2))
        q3 = quantize(x, 4, 32, StreamKey(43, 3))
        self.assertFalse(q1.same_payload(q3))

    def test_errors(self):
        self.assertRaises(QuantizerError, quantize, np.ones(4), 16, 4, self.key)
        self.assertRaises(QuantizerError, quantize, np.ones(4), 0, 4, self.key)
        self.assertRaises(NonFiniteError, quantize, np.array([1.0, np.inf]),
                          4, 4, self.key)

        q = quantize(np.arange(100.0), 4, 16, self.key)
        q.codes = q.codes[:-1]
        self.assertRaises(QuantizerError, dequantize, q)


class BoundAndSizeTest(unittest.TestCase):
    def test_variance_bound(self):
        self.assertAlmostEqual(variance_bound(np.array([0.0, 1.0]), 1, 2), 0.5)
        self.assertEqual(variance_bound(np.full(10, 3.0), 4, 4), 0.0)
        self.assertEqual(variance_bound(np.arange(10.0), 32, 4), 0.0)

    def test_bound_counts_short_group(self):
        # groups [0, 2] and [4]: only the first has a range
        self.assertAlmostEqual(variance_bound(np.array([0.0, 2.0, 4.0]), 1, 2),
                               2 * 0.25 * 4.0)

    def test_canonical_ranges_cover(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(4096) * 3.0
        x = x + np.repeat(rng.uniform(-2, 2, 64), 64)
        mins, ranges = group_minmax(x, 64)
        canon = canonical_ranges(mins, ranges)
        self.assertTrue(np.all(mins + canon >= x.reshape(64, 64).max(axis=1)))
        np.testing.assert_array_equal(canonical_ranges(mins, canon), canon)

    def test_compressed_size(self):
        key = StreamKey(0, 0)
        q = quantize(np.random.default_rng(0).standard_normal(256), 4, 256, key)
        self.assertEqual(compressed_size_bits(q), 256 * 4 + 128 + 256)

        raw = quantize(np.ones(256), 32, 256, key)
        self.assertGreaterEqual(compressed_size_bits(raw), 256 * 32)

        big = quantize(np.random.default_rng(1).standard_normal(4096), 4, 256, key)
        self.assertGreaterEqual(32.0 * 4096 / compressed_size_bits(big), 7.0)

    def test_sidecar_accounting_matches_format(self):
        x = np.random.default_rng(14).standard_normal(256)
        one = quantize(x, 4, 256, StreamKey(0, 0))
        two = quantize(x, 4, 128, StreamKey(0, 0))
        self.assertEqual(len(qtensor_to_bytes(two)) - len(qtensor_to_bytes(one)),
                         SIDECAR_BITS_PER_GROUP // 8)
        self.assertEqual(compressed_size_bits(two) - compressed_size_bits(one),
                         SIDECAR_BITS_PER_GROUP)


class PackingTest(unittest.TestCase):
    def test_layout(self):
        self.assertEqual(int(pack_codes([1, 0, 1], 1)[0]), 5)
        self.assertEqual(int(pack_codes([3, 1], 2)[0]), 7)
        self.assertEqual(len(pack_codes(np.ones(65), 1)), 2)

    def test_unpack(self):
        codes = np.random.default_rng(2).integers(0, 8, 100)
        np.testing.assert_array_equal(unpack_codes(pack_codes(codes, 3), 3, 100),
                                      codes)

    def test_errors(self):
        self.assertRaises(QuantizerError, pack_codes, [4], 2)
        self.assertRaises(QuantizerError, unpack_codes,
                          np.zeros(3, dtype=np.uint64), 4, 10)


class SchemeTest(unittest.TestCase):
    def test_defaults(self):
        s = CompressionScheme.uniform([0, 2, 5], 4, forced_fullprec=[5])
        self.assertEqual(s.bits_for(0), 4)
        self.assertEqual(s.bits_for(5), 32)
        self.assertEqual(s.bits_for(9), 32)
        self.assertEqual(s.slots(), [0, 2, 5])

    def test_average_bits(self):
        s = CompressionScheme({0: 2, 1: 8})
        self.assertAlmostEqual(s.average_bits({0: 30, 1: 10}), 3.5)
        self.assertEqual(s.total_bits({0: 30, 1: 10}), 140)

    def test_equality(self):
        self.assertEqual(CompressionScheme({0: 4}), CompressionScheme({0: 4}))
        self.assertNotEqual(CompressionScheme({0: 4}),
                            CompressionScheme({0: 4}, group_size=64))
        self.assertEqual(CompressionScheme({0: 4}).with_bits({0: 8}),
                         CompressionScheme({0: 8}))

    def test_invalid(self):
        self.assertRaises(QuantizerError, check_bits, 12)
        self.assertRaises(QuantizerError, CompressionScheme, {0: 4}, 1)
        self.assertTrue(CompressionScheme.full_precision([0, 1]).is_lossless())


class QuantizedSerialTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_file(self):
        key = StreamKey(3, 4, 5)
        q = quantize(np.random.default_rng(0).standard_normal((6, 50)), 3, 64, key)
        path = os.path.join(self.tmpdir, "q.actq")
        write_qtensor(path, q)

        r = read_qtensor(path)
        self.assertTrue(q.same_payload(r))
        self.assertEqual(r.key, key)
        np.testing.assert_array_equal(dequantize(q), dequantize(r))

    def test_raw(self):
        x = np.arange(6, dtype=np.float32)
        r = qtensor_from_bytes(qtensor_to_bytes(quantize(x, 32, 4, StreamKey(0, 0))))
        np.testing.assert_array_equal(dequantize(r), x)

    def test_bad_magic(self):
        data = qtensor_to_bytes(quantize(np.ones(4), 2, 4, StreamKey(0, 0)))
        self.assertRaises(QuantizerError, qtensor_from_bytes, b"XXXX" + data[4:])


if __name__ == "__main__":
    unittest.main()
