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
Plot-ready CSVs from finished training runs: sensitivity over time,
the latest per-slot (c_l, bits) pairs, and gradient variance of several
runs aligned by step.
"""

import logging
import os
from collections import namedtuple

from lib.trainer.metrics import (SENSITIVITY_COLUMNS, read_metrics,
                                 read_sensitivity_log)
from lib.utils.constants import (BITS_FILE, EVOLUTION_FILE, METRICS_FILE,
                                 PROFILES_FILE, VARIANCE_COMPARE_FILE)
from lib.utils.exceptions import ConfigError
from lib.utils.util import write_csv

logger = logging.getLogger('actlab')

RunData = namedtuple("RunData", ["name", "metrics", "sensitivities"])

# per-run series in variance_compare.csv
COMPARED_SERIES = ["ema_grad_variance", "predicted_variance", "avg_bits"]


def load_run(path, name=None):
    metrics_path = os.path.join(path, METRICS_FILE)
    if not os.path.isfile(metrics_path):
        raise ConfigError("No %s in %s" % (METRICS_FILE, path))

    metrics = read_metrics(metrics_path)
    if not metrics:
        raise ConfigError("%s has no rows" % (metrics_path))

    sensitivities = []
    profiles_path = os.path.join(path, PROFILES_FILE)
    if os.path.isfile(profiles_path):
        sensitivities = read_sensitivity_log(profiles_path)

    name = name or os.path.basename(os.path.normpath(path))
    return RunData(name, metrics, sensitivities)


def load_runs(paths):
    if not paths:
        raise ConfigError("No run directories given")

    runs = []
    seen = {}
    for path in paths:
        name = os.path.basename(os.path.normpath(path))
        if name in seen:
            seen[name] += 1
            name = "%s_%d" % (name, seen[name])
        else:
            seen[name] = 0
        runs.append(load_run(path, name))
    return runs


def sensitivity_evolution(runs):
    rows = []
    for run in runs:
        for row in run.sensitivities:
            rows.append([run.name] + [row[c] for c in SENSITIVITY_COLUMNS])
    return ["run"] + SENSITIVITY_COLUMNS, rows


def latest_bits(runs):
    """
    Per run, the slots of the last refresh with their c_l and bits.
    """

    rows = []
    for run in runs:
        if not run.sensitivities:
            continue
        last = max(int(r["refresh_step"]) for r in run.sensitivities)
        for r in run.sensitivities:
            if int(r["refresh_step"]) == last:
                rows.append([run.name, last, r["slot_id"], r["D_l"], r["c_l"],
                             r["bits"]])
    return ["run", "refresh_step", "slot_id", "D_l", "c_l", "bits"], rows


def variance_compare(runs):
    """
    One row per step logged by any run; a run missing that step leaves
    its cells empty.
    """

    columns = ["step"]
    by_step = {}
    for i, run in enumerate(runs):
        columns.extend("%s.%s" % (run.name, s) for s in COMPARED_SERIES)
        for record in run.metrics:
            cells = by_step.setdefault(record.step,
                                       [""] * (len(runs) * len(COMPARED_SERIES)))
            at = i * len(COMPARED_SERIES)
            for j, series in enumerate(COMPARED_SERIES):
                cells[at + j] = getattr(record, series)

    rows = [[step] + by_step[step] for step in sorted(by_step)]
    return columns, rows


def write_plot_data(paths, out_dir):
    """
    Writes the three plot-data files for the runs under 'paths' into
    out_dir. Returns the written paths.
    """

    runs = load_runs(paths)

    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)

    written = []
    for fname, builder in ((EVOLUTION_FILE, sensitivity_evolution),
                           (BITS_FILE, latest_bits),
                           (VARIANCE_COMPARE_FILE, variance_compare)):
        columns, rows = builder(runs)
        path = os.path.join(out_dir, fname)
        write_csv(path, columns, rows)
        written.append(path)
        logger.debug("%s: %d rows", path, len(rows))

    logger.info("wrote plot data for %d runs to %s", len(runs), out_dir)
    return written
