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

import csv
import hashlib
import json
import os
import sys
import threading

import numpy as np

from lib.utils.constants import THREADS_ENV


def max_threads(default=4):
    """
    Worker cap for concurrent_map, read from ACTC_THREADS.
    """

    try:
        value = int(os.environ.get(THREADS_ENV, default))
    except ValueError:
        return default
    return max(1, value)


def concurrent_map(func, data, threads=None):
    """
    Similar to the builtin function map(). But applies 'func' on a bounded
    pool of threads.

    'data' should be an indexable sequence. Results keep the input order.
    The first exception raised by a task is re-raised after all workers
    finish.
    """

    N = len(data)
    result = [None] * N
    errors = []

    if threads is None:
        threads = max_threads()
    threads = min(threads, N)

    if threads <= 1:
        return [func(datum) for datum in data]

    lock = threading.Lock()
    cursor = [0]

    def worker():
        while True:
            with lock:
                i = cursor[0]
                cursor[0] += 1
            if i >= N or errors:
                return
            try:
                result[i] = func(data[i])
            except Exception:
                errors.append(sys.exc_info())

    workers = [threading.Thread(target=worker) for _ in range(threads)]
    for t in workers:
        t.start()
    for t in workers:
        t.join()

    if errors:
        raise errors[0][1].with_traceback(errors[0][2])

    return result


def checksum64(array):
    """
    64-bit content checksum of an array, row-major.
    """

    digest = hashlib.blake2b(memoryview(array.tobytes()), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def parse_value(text):
    """
    Casts an override value: int, float, bool, null, JSON list/object, or
    plain string.
    """

    try:
        return json.loads(text)
    except ValueError:
        pass

    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    return text


def write_csv(path, columns, rows):
    """
    Writes rows (dicts or sequences) under a header. Floats are written
    with repr precision so reruns are byte-identical.
    """

    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c, "") for c in columns]
            writer.writerow([_format_cell(v) for v in row])


def read_csv(path):
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
