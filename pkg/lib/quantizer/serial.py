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
ACTQ quantized tensor file format, little-endian:

    magic "ACTQ" | version u32 | rank u32 | extents u64[rank] |
    bits u8 | dtype u8 (0 f32, 1 f64) | group_size u32 |
    key seed u64 | key stream_id u64 | key offset u64 |
    then for bits == 32: one ACTT tensor with the raw payload,
    otherwise: (min f64, range f64) per group, word count u64,
    packed code words u64[count]
"""

import struct

import numpy as np

from lib.numerics.rng import StreamKey
from lib.numerics.serial import tensor_from_bytes, tensor_to_bytes
from lib.quantizer.quantizer import QuantizedTensor
from lib.utils.constants import FULL_PRECISION
from lib.utils.exceptions import QuantizerError

QTENSOR_MAGIC = b"ACTQ"
QTENSOR_VERSION = 1

qtensor_header_fmt = "< 4s I I"
qtensor_meta_fmt = "< B B I Q Q Q"
g_struct_qtensor_header = struct.Struct(qtensor_header_fmt)
g_struct_qtensor_meta = struct.Struct(qtensor_meta_fmt)

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = dict((v, k) for k, v in _DTYPE_CODES.items())


def qtensor_to_bytes(q):
    if q.dtype not in _DTYPE_CODES:
        raise QuantizerError("Cannot serialize dtype %s" % (q.dtype))

    buf = [g_struct_qtensor_header.pack(QTENSOR_MAGIC, QTENSOR_VERSION,
                                        len(q.shape))]
    buf.append(struct.pack("<%dQ" % len(q.shape), *q.shape))
    buf.append(g_struct_qtensor_meta.pack(
        q.bits, _DTYPE_CODES[q.dtype], q.group_size, q.key.seed,
        q.key.stream_id, q.key.offset))

    if q.is_raw():
        buf.append(tensor_to_bytes(q.raw_fallback))
    else:
        sidecar = np.empty((q.num_groups, 2), dtype="<f8")
        sidecar[:, 0] = q.mins
        sidecar[:, 1] = q.ranges
        buf.append(sidecar.tobytes())
        buf.append(struct.pack("<Q", q.codes.size))
        buf.append(np.ascontiguousarray(q.codes, dtype="<u8").tobytes())

    return b"".join(buf)


def qtensor_from_bytes(data):
    try:
        magic, version, rank = g_struct_qtensor_header.unpack_from(data, 0)
        offset = g_struct_qtensor_header.size
        shape = struct.unpack_from("<%dQ" % rank, data, offset)
        offset += 8 * rank
        bits, dtype_code, group_size, seed, stream_id, key_offset = \
            g_struct_qtensor_meta.unpack_from(data, offset)
        offset += g_struct_qtensor_meta.size
    except struct.error:
        raise QuantizerError("Truncated quantized tensor header")

    if magic != QTENSOR_MAGIC:
        raise QuantizerError("Bad quantized tensor magic %r" % (magic))
    if version != QTENSOR_VERSION:
        raise QuantizerError("Unsupported quantized tensor version %d"
                             % (version))
    if dtype_code not in _CODE_DTYPES:
        raise QuantizerError("Unknown dtype code %d" % (dtype_code))

    key = StreamKey(seed, stream_id, key_offset)
    dtype = _CODE_DTYPES[dtype_code]

    if bits == FULL_PRECISION:
        raw, _ = tensor_from_bytes(data, offset)
        return QuantizedTensor(shape, dtype, bits, group_size, key,
                               raw_fallback=raw)

    q = QuantizedTensor(shape, dtype, bits, group_size, key)
    groups = q.num_groups
    try:
        sidecar = np.frombuffer(data, dtype="<f8", count=2 * groups,
                                offset=offset).reshape(groups, 2)
        offset += 16 * groups
        count = struct.unpack_from("<Q", data, offset)[0]
        offset += 8
        codes = np.frombuffer(data, dtype="<u8", count=count, offset=offset)
    except (ValueError, struct.error):
        raise QuantizerError("Truncated quantized tensor payload")

    q.mins = sidecar[:, 0].astype(np.float64)
    q.ranges = sidecar[:, 1].astype(np.float64)
    q.codes = codes.copy()
    return q


def write_qtensor(path, q):
    with open(path, "wb") as f:
        f.write(qtensor_to_bytes(q))


def read_qtensor(path):
    with open(path, "rb") as f:
        return qtensor_from_bytes(f.read())
