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
Dense tensors are plain numpy arrays. The helpers here pin the conventions
every other module relies on: row-major flattening, float32 (SINGLE) for
training paths and float64 (DOUBLE) for verification paths, and no
non-finite values leaving a public operation.
"""

import numpy as np

from lib.utils.constants import Precision
from lib.utils.exceptions import NonFiniteError, ShapeError

_DTYPES = {
    Precision.SINGLE: np.float32,
    Precision.DOUBLE: np.float64,
}


def dtype_of(precision):
    try:
        return _DTYPES[precision]
    except KeyError:
        raise ValueError("Unknown precision: %s" % (str(precision)))


def precision_of(array):
    if np.asarray(array).dtype == np.float64:
        return Precision.DOUBLE
    return Precision.SINGLE


def as_tensor(data, precision=Precision.DOUBLE):
    x = np.array(data, dtype=dtype_of(precision))
    check_finite(x, "tensor")
    return x


def check_finite(x, what="value"):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("Non-finite entries in %s." % (what))
    return x


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)

    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D operands, got %s and %s"
                         % (a.shape, b.shape))
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul inner dimensions differ: %s x %s"
                         % (a.shape, b.shape))

    return check_finite(np.matmul(a, b), "matmul result")


def num_groups(size, group_size):
    return -(-size // group_size)


def covering_ranges(mins, tops):
    """
    Smallest float64 ranges r, up to a few ulps, with fl(mins + r) >= tops.
    A plain tops - mins may round down when |mins| dwarfs the range.
    """

    mins = np.asarray(mins, dtype=np.float64)
    tops = np.asarray(tops, dtype=np.float64)
    ranges = tops - mins
    step = np.spacing(np.maximum(np.maximum(np.abs(mins), np.abs(tops)),
                                 np.abs(ranges)))

    while True:
        short = mins + ranges < tops
        if not short.any():
            return ranges
        ranges = np.where(short, ranges + step, ranges)


def group_minmax(x, group_size):
    """
    Splits the row-major flattening of x into consecutive groups of
    group_size elements (the last one may be short) and returns per-group
    (mins, ranges) as float64 arrays.
    """

    if group_size < 2:
        raise ValueError("group_size must be >= 2, got %s" % (group_size))

    flat = np.asarray(x, dtype=np.float64).reshape(-1)
    if flat.size == 0:
        raise ShapeError("group_minmax of an empty tensor")

    starts = np.arange(0, flat.size, group_size)
    mins = np.minimum.reduceat(flat, starts)
    maxs = np.maximum.reduceat(flat, starts)

    return mins, covering_ranges(mins, maxs)


def group_index(size, group_size):
    """
    Group id of every element of a flattened tensor.
    """

    return np.arange(size) // group_size
