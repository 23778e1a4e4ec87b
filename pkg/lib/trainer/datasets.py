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
Hermetic synthetic datasets and an IDX-format loader.
"""

import os
import struct

import numpy as np

from lib.numerics.rng import derive_seed
from lib.tape.engine import Batch
from lib.utils.exceptions import ConfigError, ShapeError

# IDX: two zero bytes, element type code, rank; then big-endian u32 extents
idx_header_fmt = "> H B B"
g_idx_header = struct.Struct(idx_header_fmt)

_IDX_TYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


class Dataset(object):
    """
    Inputs (N, features) and targets: class indices when num_classes is
    set, float rows otherwise.
    """

    def __init__(self, inputs, targets, num_classes=None, name=""):
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or len(inputs) != len(targets):
            raise ShapeError("Dataset %s: %s inputs for %d targets"
                             % (name, inputs.shape, len(targets)))
        self.inputs = inputs
        self.targets = np.asarray(targets)
        self.num_classes = num_classes
        self.name = name

    def __len__(self):
        return len(self.inputs)

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    @property
    def output_dim(self):
        if self.num_classes is not None:
            return self.num_classes
        return self.targets.shape[1]

    def batch(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Batch(self.inputs[indices], self.targets[indices])

    def full(self):
        return Batch(self.inputs, self.targets)

    def minibatch(self, step, batch_size, seed):
        """
        Sorted indices drawn without replacement; a pure function of
        (seed, step).
        """

        if batch_size > len(self):
            raise ConfigError("Batch of %d exceeds the %d samples of %s"
                              % (batch_size, len(self), self.name))
        rng = np.random.default_rng(derive_seed(seed, step))
        return self.batch(np.sort(rng.choice(len(self), batch_size,
                                             replace=False)))


def two_gaussians(samples, features=2, separation=6.0, seed=0):
    """
    Two unit-variance blobs whose means sit 'separation' apart along the
    diagonal.
    """

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(samples) % 2)
    direction = np.ones(features) / np.sqrt(features)
    signs = np.where(labels == 1, 1.0, -1.0)[:, None]
    x = rng.standard_normal((samples, features)) + 0.5 * separation * signs * direction
    return Dataset(x, labels.astype(np.int64), 2, "two_gaussians")


def two_moons(samples, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(samples) % 2)
    t = rng.uniform(0.0, np.pi, samples)

    x = np.empty((samples, 2))
    outer = labels == 0
    x[outer, 0] = np.cos(t[outer])
    x[outer, 1] = np.sin(t[outer])
    x[~outer, 0] = 1.0 - np.cos(t[~outer])
    x[~outer, 1] = 0.5 - np.sin(t[~outer])
    x += noise * rng.standard_normal(x.shape)

    return Dataset(x, labels.astype(np.int64), 2, "two_moons")


def teacher_regression(samples, features=8, outputs=2, hidden=16, noise=0.1,
                       seed=0):
    """
    Targets from a fixed random one-hidden-layer tanh network plus
    Gaussian noise.
    """

    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((hidden, features)) / np.sqrt(features)
    w2 = rng.standard_normal((outputs, hidden)) / np.sqrt(hidden)

    x = rng.standard_normal((samples, features))
    y = np.tanh(x.dot(w1.T)).dot(w2.T)
    y += noise * rng.standard_normal(y.shape)

    return Dataset(x, y, None, "teacher_regression")


def read_idx(path):
    if not os.path.exists(path):
        raise ConfigError("IDX file not found: %s" % (path))

    with open(path, "rb") as f:
        data = f.read()

    if len(data) < g_idx_header.size:
        raise ShapeError("IDX file %s is truncated" % (path))
    zero, code, rank = g_idx_header.unpack_from(data, 0)
    if zero != 0 or code not in _IDX_TYPES:
        raise ShapeError("IDX file %s has a bad magic number" % (path))

    offset = g_idx_header.size
    dims_fmt = ">%dI" % rank
    if len(data) < offset + struct.calcsize(dims_fmt):
        raise ShapeError("IDX file %s is truncated" % (path))
    dims = struct.unpack_from(dims_fmt, data, offset)
    offset += struct.calcsize(dims_fmt)

    dtype = _IDX_TYPES[code]
    count = int(np.prod(dims)) if dims else 1
    if len(data) - offset != count * dtype.itemsize:
        raise ShapeError("IDX file %s holds %d payload bytes, expected %d"
                         % (path, len(data) - offset, count * dtype.itemsize))

    return np.frombuffer(data, dtype=dtype, offset=offset).reshape(dims)


def idx_dataset(path, labels_path, limit=0):
    """
    Images flattened per sample, byte images scaled to [0, 1].
    """

    images = read_idx(path)
    labels = read_idx(labels_path).reshape(-1).astype(np.int64)
    if len(images) != len(labels):
        raise ShapeError("%d images but %d labels" % (len(images), len(labels)))

    if limit:
        images = images[:limit]
        labels = labels[:limit]

    x = images.reshape(len(images), -1).astype(np.float64)
    if images.dtype == np.uint8:
        x /= 255.0

    return Dataset(x, labels, int(labels.max()) + 1, os.path.basename(path))


def make_dataset(spec):
    """
    Dataset from the flattened [dataset] config section.
    """

    name = spec.get("name", "two_gaussians")
    samples = int(spec.get("samples", 1024))
    seed = int(spec.get("seed", 0))

    if name == "two_gaussians":
        return two_gaussians(samples, int(spec.get("features", 2)),
                             float(spec.get("separation", 6.0)), seed)
    if name == "two_moons":
        return two_moons(samples, float(spec.get("noise", 0.1)), seed)
    if name == "teacher_regression":
        return teacher_regression(samples, int(spec.get("features", 8)),
                                  int(spec.get("classes", 2)),
                                  noise=float(spec.get("noise", 0.1)),
                                  seed=seed)
    if name == "idx":
        if not spec.get("path") or not spec.get("labels_path"):
            raise ConfigError("dataset idx needs path and labels-path")
        return idx_dataset(spec["path"], spec["labels_path"],
                           int(spec.get("limit", 0)))

    raise ConfigError("Unknown dataset %s" % (name))
