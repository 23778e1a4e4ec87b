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

import json
from collections import namedtuple

from lib.utils.constants import METRICS_COLUMNS
from lib.utils.exceptions import ConfigError
from lib.utils.util import read_csv, write_csv

MetricsRecord = namedtuple("MetricsRecord", METRICS_COLUMNS)

# one row per (refresh step, slot)
SENSITIVITY_COLUMNS = ["refresh_step", "slot_id", "node_kind", "D_l", "c_l",
                       "bits"]

_INT_COLUMNS = ("step", "alert")


def write_metrics(path, records):
    write_csv(path, METRICS_COLUMNS, records)


def read_metrics(path):
    """
    Metrics rows with numeric values.
    """

    try:
        rows = read_csv(path)
    except (IOError, OSError) as e:
        raise ConfigError("Cannot read metrics %s: %s" % (path, e))

    records = []
    try:
        for row in rows:
            values = []
            for column in METRICS_COLUMNS:
                cast = int if column in _INT_COLUMNS else float
                values.append(cast(row[column]))
            records.append(MetricsRecord(*values))
    except (KeyError, ValueError) as e:
        raise ConfigError("Malformed metrics %s: %s" % (path, e))

    return records


def write_sensitivity_log(path, rows):
    write_csv(path, SENSITIVITY_COLUMNS, rows)


def read_sensitivity_log(path):
    try:
        return read_csv(path)
    except (IOError, OSError) as e:
        raise ConfigError("Cannot read sensitivities %s: %s" % (path, e))


def write_summary(path, summary):
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


def read_summary(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (IOError, OSError, ValueError) as e:
        raise ConfigError("Cannot read summary %s: %s" % (path, e))
