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

import os
import shutil
import tempfile
import unittest

from lib.trainer.metrics import (MetricsRecord, write_metrics,
                                 write_sensitivity_log)
from lib.trainer.plotdata import (latest_bits, load_runs, sensitivity_evolution,
                                  variance_compare, write_plot_data)
from lib.utils.exceptions import ConfigError
from lib.utils.util import read_csv


def record(step, predicted=0.5, ema=1.0, bits=4.0):
    return MetricsRecord(step, 0.7, 1.2, predicted, ema, 0, bits, 7.5, 1.0)


class PlotDataTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def make_run(self, name, steps, refreshes=()):
        path = os.path.join(self.tmpdir, name)
        os.makedirs(path)
        write_metrics(os.path.join(path, "metrics.csv"),
                      [record(s) for s in steps])
        rows = []
        for r in refreshes:
            rows.append([r, 0, "linear", 512, 0.25, 4])
            rows.append([r, 3, "softmax_ce_loss", 64, float("inf"), 32])
        write_sensitivity_log(os.path.join(path, "profiles.csv"), rows)
        return path

    def test_duplicate_names(self):
        a = self.make_run("a", [0, 1])
        os.makedirs(os.path.join(self.tmpdir, "other"))
        b = self.make_run(os.path.join("other", "a"), [0, 1])
        runs = load_runs([a, b])
        self.assertEqual([r.name for r in runs], ["a", "a_1"])

    def test_errors(self):
        self.assertRaises(ConfigError, load_runs, [])
        empty = os.path.join(self.tmpdir, "empty")
        os.makedirs(empty)
        self.assertRaises(ConfigError, load_runs, [empty])
        self.assertRaises(ConfigError, load_runs, [self.make_run("none", [])])

    def test_sensitivity_tables(self):
        runs = load_runs([self.make_run("ad", [0, 1, 2], [10, 20]),
                          self.make_run("fp", [0, 1, 2])])

        columns, rows = sensitivity_evolution(runs)
        self.assertEqual(columns[:3], ["run", "refresh_step", "slot_id"])
        self.assertEqual(len(rows), 4)

        columns, rows = latest_bits(runs)
        self.assertEqual(len(rows), 2)
        self.assertEqual(set(r[1] for r in rows), set([20]))
        self.assertEqual(sorted(r[-1] for r in rows), ["32", "4"])

    def test_variance_compare(self):
        runs = load_runs([self.make_run("x", [0, 1, 2]),
                          self.make_run("y", [0, 2, 4])])
        columns, rows = variance_compare(runs)

        self.assertEqual(columns, ["step", "x.ema_grad_variance",
                                   "x.predicted_variance", "x.avg_bits",
                                   "y.ema_grad_variance",
                                   "y.predicted_variance", "y.avg_bits"])
        self.assertEqual([r[0] for r in rows], [0, 1, 2, 4])
        self.assertEqual(rows[1][4:], ["", "", ""])
        self.assertEqual(rows[3][1:4], ["", "", ""])
        self.assertEqual(rows[0][1:4], [1.0, 0.5, 4.0])

    def test_write(self):
        a = self.make_run("a", [0, 1], [1])
        out = os.path.join(self.tmpdir, "plots")
        written = write_plot_data([a], out)

        self.assertEqual(sorted(os.path.basename(p) for p in written),
                         ["bits.csv", "sensitivity_evolution.csv",
                          "variance_compare.csv"])
        rows = read_csv(os.path.join(out, "variance_compare.csv"))
        self.assertEqual([r["step"] for r in rows], ["0", "1"])


if __name__ == "__main__":
    unittest.main()
