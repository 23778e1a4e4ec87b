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
Counter-based random numbers.

A draw is a pure function of (seed, stream_id, counter): the stream key is
hashed into a 64-bit base state and draw i is the SplitMix64 output for
state base + (i + 1) * golden. Nothing is sequential, so any draw of any
stream can be replayed without generating the ones before it.
"""

from collections import namedtuple

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0


class StreamKey(namedtuple("StreamKey", ["seed", "stream_id", "offset"])):
    """
    One compressor stream. 'offset' shifts the counter so that several
    uses of the same stream (one per training step) never overlap.
    """

    __slots__ = ()

    def __new__(cls, seed, stream_id, offset=0):
        return super(StreamKey, cls).__new__(
            cls, int(seed) & MASK64, int(stream_id) & MASK64,
            int(offset) & MASK64)

    def reseed(self, seed):
        return StreamKey(seed, self.stream_id, self.offset)


def _mix64(z):
    z = (z ^ (z >> 30)) * _MUL1 & MASK64
    z = (z ^ (z >> 27)) * _MUL2 & MASK64
    return z ^ (z >> 31)


def _stream_base(key):
    return _mix64(key.seed ^ _mix64((key.stream_id + GOLDEN) & MASK64))


def counter_uniforms(key, counters):
    """
    Uniform [0, 1) draws for an array of counters of one stream.
    """

    base = np.uint64(_stream_base(key))
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base + (c + np.uint64((key.offset + 1) & MASK64)) * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def counter_rng(key, counter):
    return float(counter_uniforms(key, np.array([counter], dtype=np.uint64))[0])


def uniforms(key, n):
    """
    Draws for counters 0..n-1 of the stream.
    """

    return counter_uniforms(key, np.arange(n, dtype=np.uint64))


def derive_seed(*parts):
    """
    Folds integers into one 64-bit seed; used to derive per-pair and
    per-draw seeds from a run seed.
    """

    z = 0
    for part in parts:
        z = _mix64((z ^ (int(part) & MASK64)) + GOLDEN & MASK64)
    return z


def make_keys(slot_ids, seed, offset=0):
    return dict((slot, StreamKey(seed, slot, offset)) for slot in slot_ids)
