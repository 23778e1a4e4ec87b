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
Parameter checkpoints: a directory holding params.actt (the parameters as
concatenated ACTT tensors) and manifest.json naming them in file order.
"""

import json
import os
from collections import OrderedDict

from lib.numerics.serial import tensor_from_bytes, tensor_to_bytes
from lib.utils.constants import MANIFEST_FILE
from lib.utils.exceptions import ConfigError

TENSORS_FILE = "params.actt"


def save_checkpoint(path, params, step, extra=None):
    if not os.path.isdir(path):
        os.makedirs(path)

    offsets = []
    blobs = []
    offset = 0
    for name, value in params.items():
        blob = tensor_to_bytes(value)
        offsets.append({"name": name, "offset": offset, "bytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)

    with open(os.path.join(path, TENSORS_FILE), "wb") as f:
        f.write(b"".join(blobs))

    manifest = {"step": int(step), "file": TENSORS_FILE, "tensors": offsets}
    if extra:
        manifest.update(extra)

    with open(os.path.join(path, MANIFEST_FILE), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)

    return manifest


def load_checkpoint(path):
    """
    Returns (params, manifest).
    """

    manifest_path = os.path.join(path, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise ConfigError("No checkpoint manifest in %s" % (path))

    with open(manifest_path) as f:
        manifest = json.load(f)

    with open(os.path.join(path, manifest["file"]), "rb") as f:
        data = f.read()

    params = OrderedDict()
    offset = 0
    for entry in manifest["tensors"]:
        if entry["offset"] != offset:
            raise ConfigError("Checkpoint %s: %s at offset %d, expected %d"
                              % (path, entry["name"], entry["offset"],
                                 offset))
        params[entry["name"]], offset = tensor_from_bytes(data, offset)

    if offset != len(data):
        raise ConfigError("Checkpoint %s has trailing bytes" % (path))

    return params, manifest
