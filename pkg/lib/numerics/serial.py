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
ACTT tensor file format, all fields little-endian:

    magic "ACTT" | version u32 | rank u32 | extents u64[rank] |
    precision u8 (0 single, 1 double) | raw scalars, row-major
"""

import struct

import numpy as np

from lib.utils.constants import Precision
from lib.utils.exceptions import ShapeError

TENSOR_MAGIC = b"ACTT"
TENSOR_VERSION = 1

tensor_header_fmt = "< 4s I I"
g_struct_tensor_header = struct.Struct(tensor_header_fmt)

_PRECISION_CODES = {
    Precision.SINGLE: 0,
    Precision.DOUBLE: 1,
}
_CODE_DTYPES = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
}


def tensor_to_bytes(x):
    x = np.asarray(x)
    if x.dtype == np.float64:
        code = _PRECISION_CODES[Precision.DOUBLE]
    elif x.dtype == np.float32:
        code = _PRECISION_CODES[Precision.SINGLE]
    else:
        raise ShapeError("Cannot serialize dtype %s" % (x.dtype))

    buf = [g_struct_tensor_header.pack(TENSOR_MAGIC, TENSOR_VERSION, x.ndim)]
    buf.append(struct.pack("<%dQ" % x.ndim, *x.shape))
    buf.append(struct.pack("<B", code))
    buf.append(np.ascontiguousarray(x, dtype=_CODE_DTYPES[code]).tobytes())
    return b"".join(buf)


def tensor_from_bytes(data, offset=0):
    """
    Parses one tensor starting at 'offset'. Returns (tensor, next_offset)
    so concatenated tensors can be read back in sequence.
    """

    try:
        magic, version, rank = g_struct_tensor_header.unpack_from(data, offset)
    except struct.error:
        raise ShapeError("Truncated tensor header at offset %d" % (offset))

    if magic != TENSOR_MAGIC:
        raise ShapeError("Bad tensor magic %r" % (magic))
    if version != TENSOR_VERSION:
        raise ShapeError("Unsupported tensor version %d" % (version))

    offset += g_struct_tensor_header.size
    try:
        shape = struct.unpack_from("<%dQ" % rank, data, offset)
        offset += 8 * rank
        code = struct.unpack_from("<B", data, offset)[0]
        offset += 1
    except struct.error:
        raise ShapeError("Truncated tensor header")

    if code not in _CODE_DTYPES:
        raise ShapeError("Unknown precision code %d" % (code))

    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    end = offset + count * dtype.itemsize
    if end > len(data):
        raise ShapeError("Tensor payload shorter than its extents")

    x = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return x.reshape(shape).astype(dtype.newbyteorder("="), copy=True), end


def write_tensor(path, x):
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(x))


def read_tensor(path):
    with open(path, "rb") as f:
        data = f.read()
    x, end = tensor_from_bytes(data)
    if end != len(data):
        raise ShapeError("Trailing bytes after tensor in %s" % (path))
    return x
