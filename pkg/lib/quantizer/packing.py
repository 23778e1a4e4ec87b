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
Bit packing of b-bit codes into little-endian 64-bit words.

Code i occupies stream bits [i*b, (i+1)*b), least significant bit first;
stream bit k is bit (k % 64) of word k // 64. No padding between groups,
the last word is zero-filled.
"""

import numpy as np

from lib.utils.exceptions import QuantizerError

WORD_BITS = 64


def words_for(count, bits):
    return -(-(count * bits) // WORD_BITS)


def pack_codes(codes, bits):
    codes = np.asarray(codes, dtype=np.uint64).reshape(-1)

    if codes.size and int(codes.max()) >= (1 << bits):
        raise QuantizerError("Code exceeds %d bits" % (bits))

    shifts = np.arange(bits, dtype=np.uint64)
    bitmat = ((codes[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    packed = np.packbits(bitmat.reshape(-1), bitorder="little")

    buf = np.zeros(words_for(codes.size, bits) * 8, dtype=np.uint8)
    buf[:packed.size] = packed
    return buf.view("<u8")


def unpack_codes(words, bits, count):
    words = np.ascontiguousarray(words, dtype="<u8")

    if words.size != words_for(count, bits):
        raise QuantizerError(
            "Corrupted packing: %d words for %d codes of %d bits"
            % (words.size, count, bits))

    stream = np.unpackbits(words.view(np.uint8), bitorder="little")
    bitmat = stream[:count * bits].reshape(count, bits).astype(np.uint64)
    shifts = np.arange(bits, dtype=np.uint64)
    return np.bitwise_or.reduce(bitmat << shifts, axis=1)
