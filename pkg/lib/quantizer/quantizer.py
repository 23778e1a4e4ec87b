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
Per-group stochastic-rounding quantizer.

Each group g of G consecutive elements (row-major) is mapped affinely onto
[0, 2^b - 1] through its (min, range) and every element is rounded up with
probability equal to its fractional part, so the decoded value is unbiased.
The draw for element j is counter_uniforms(key, j).

All arithmetic runs in float64 whatever the input precision; dequantize
casts back to the dtype the tensor was quantized from.
"""

import numpy as np

from lib.numerics.rng import StreamKey, counter_uniforms
from lib.numerics.tensor import (check_finite, covering_ranges, group_index,
                                 group_minmax, num_groups)
from lib.quantizer.packing import pack_codes, unpack_codes
from lib.quantizer.scheme import check_bits
from lib.utils.constants import (FULL_PRECISION, QTENSOR_HEADER_BITS,
                                 SIDECAR_BITS_PER_GROUP)
from lib.utils.exceptions import QuantizerError

# |t - round(t)| below this is treated as an exact code, which absorbs the
# float64 error of decoding. snap_tolerances widens it for narrower dtypes.
SNAP_TOLERANCE = 1e-7

_MAX_RANGE_ITERATIONS = 8


def bit_factor(bits):
    """
    S(b) = (2^b - 1)^-2, with S(32) = 0.
    """

    if bits == FULL_PRECISION:
        return 0.0
    return 1.0 / float((2 ** bits - 1) ** 2)


def levels(bits):
    return (1 << bits) - 1


class QuantizedTensor(object):

    def __init__(self, shape, dtype, bits, group_size, key, mins=None,
                 ranges=None, codes=None, raw_fallback=None):
        self.shape = tuple(int(d) for d in shape)
        self.dtype = np.dtype(dtype)
        self.bits = bits
        self.group_size = group_size
        self.key = key
        self.mins = mins
        self.ranges = ranges
        self.codes = codes
        self.raw_fallback = raw_fallback

    @property
    def size(self):
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def num_groups(self):
        return num_groups(self.size, self.group_size)

    def is_raw(self):
        return self.bits == FULL_PRECISION

    def unpacked_codes(self):
        if self.is_raw():
            raise QuantizerError("Full-precision tensor carries no codes")
        return unpack_codes(self.codes, self.bits, self.size)

    def same_payload(self, other):
        """
        True when both tensors would decode identically: same layout, same
        sidecar and same code words. The rounding key is not compared.
        """

        if (self.shape != other.shape or self.bits != other.bits
                or self.group_size != other.group_size
                or self.dtype != other.dtype):
            return False

        if self.is_raw():
            return np.array_equal(self.raw_fallback, other.raw_fallback)

        return (np.array_equal(self.mins, other.mins)
                and np.array_equal(self.ranges, other.ranges)
                and np.array_equal(self.codes, other.codes))

    def __repr__(self):
        return "QuantizedTensor(shape=%s, bits=%d, group_size=%d)" % (
            self.shape, self.bits, self.group_size)


def canonical_ranges(mins, ranges):
    """
    Adjusts each range to a fixpoint of r = covering_ranges(min, fl(min + r)),
    so the decoded group maximum min + r yields the same (min, range) again
    when the decoded tensor is quantized a second time. fl(min + r) never
    decreases along the way, so the group maximum stays covered.
    """

    mins = np.asarray(mins, dtype=np.float64)
    r = np.asarray(ranges, dtype=np.float64).copy()

    for _ in range(_MAX_RANGE_ITERATIONS):
        nxt = covering_ranges(mins, mins + r)
        nxt = np.where(r > 0, nxt, 0.0)
        if np.array_equal(nxt, r):
            break
        r = nxt

    return r


def snap_tolerances(dtype, mins, ranges, bits):
    """
    Per-group snap tolerance in code units. A decoded level cast back to
    dtype moves by at most half an ulp of the group's largest magnitude,
    i.e. L * ulp / (2 * range) codes, which re-quantization must absorb.
    """

    dtype = np.dtype(dtype)
    if not np.issubdtype(dtype, np.floating):
        dtype = np.dtype(np.float64)

    mins = np.asarray(mins, dtype=np.float64)
    ranges = np.asarray(ranges, dtype=np.float64)
    magnitude = np.maximum(np.abs(mins), np.abs(mins + ranges))
    ulp = np.spacing(magnitude.astype(dtype)).astype(np.float64)
    scaled = np.where(ranges > 0, ranges, 1.0)

    return SNAP_TOLERANCE + 0.5 * levels(bits) * ulp / scaled


def quantization_ranges(x, group_size):
    mins, ranges = group_minmax(x, group_size)
    return mins, canonical_ranges(mins, ranges)


def quantize(x, bits, group_size, key):
    bits = check_bits(bits)
    x = np.asarray(x)
    check_finite(x, "quantizer input")

    if not isinstance(key, StreamKey):
        raise QuantizerError("quantize needs a StreamKey, got %r" % (key,))

    if bits == FULL_PRECISION:
        return QuantizedTensor(x.shape, x.dtype, bits, group_size, key,
                               raw_fallback=np.array(x, copy=True))

    flat = x.astype(np.float64).reshape(-1)
    mins, ranges = quantization_ranges(flat, group_size)
    L = levels(bits)

    gi = group_index(flat.size, group_size)
    m = mins[gi]
    r = ranges[gi]
    tol = snap_tolerances(x.dtype, mins, ranges, bits)[gi]
    nonzero = r > 0

    t = np.where(nonzero, L * (flat - m) / np.where(nonzero, r, 1.0), 0.0)
    t = np.clip(t, 0.0, L)
    nearest = np.rint(t)
    t = np.where(np.abs(t - nearest) < tol, nearest, t)

    floor = np.floor(t)
    u = counter_uniforms(key, np.arange(flat.size, dtype=np.uint64))
    q = (floor + (u < (t - floor))).astype(np.uint64)

    return QuantizedTensor(x.shape, x.dtype, bits, group_size, key,
                           mins=mins, ranges=ranges,
                           codes=pack_codes(q, bits))


def dequantize(q):
    if q.is_raw():
        if q.raw_fallback is None:
            raise QuantizerError("Full-precision tensor without payload")
        return np.array(q.raw_fallback, copy=True)

    if q.mins is None or q.ranges is None or q.codes is None:
        raise QuantizerError("Incomplete QuantizedTensor")
    if q.mins.size != q.num_groups or q.ranges.size != q.num_groups:
        raise QuantizerError("Corrupted sidecar: %d groups for %d elements"
                             % (q.mins.size, q.size))

    codes = unpack_codes(q.codes, q.bits, q.size)
    L = levels(q.bits)
    if codes.size and int(codes.max()) > L:
        raise QuantizerError("Code out of range for %d bits" % (q.bits))

    gi = group_index(q.size, q.group_size)
    m = q.mins[gi]
    r = q.ranges[gi]
    top = codes == L
    values = np.where(top, m + r, m + codes.astype(np.float64) * r / L)

    return values.reshape(q.shape).astype(q.dtype)


def variance_bound(x, bits, group_size):
    """
    Sum over elements of 1/4 * range_g^2 * S(b): an upper bound on the
    summed elementwise variance of quantize(x, bits, group_size, .).
    """

    bits = check_bits(bits)
    if bits == FULL_PRECISION:
        return 0.0

    mins, ranges = quantization_ranges(x, group_size)
    size = np.asarray(x).size
    counts = np.full(ranges.size, group_size, dtype=np.float64)
    counts[-1] = size - group_size * (ranges.size - 1)

    return float(np.sum(counts * 0.25 * ranges ** 2) * bit_factor(bits))


def compressed_size_bits(q):
    if q.is_raw():
        return q.size * FULL_PRECISION + QTENSOR_HEADER_BITS
    return (q.size * q.bits + q.num_groups * SIDECAR_BITS_PER_GROUP
            + QTENSOR_HEADER_BITS)
