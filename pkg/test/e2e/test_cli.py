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

import mock

import actlab
from lib.allocator.allocator import read_scheme
from lib.sensitivity.profile import read_profile
from lib.theorycheck.report import ReportSection, TheoryReport
from lib.trainer.metrics import read_summary
from lib.utils.constants import (EXIT_FAILED, EXIT_OK, EXIT_RUNTIME,
                                 EXIT_USAGE)
from lib.utils.util import read_csv
from test.e2e.util import CONF_DIR, SMALL, parse_vertical, run_cli


def fake_report(passed):
    report = TheoryReport()
    section = report.add(ReportSection("fake", ["value"]))
    section.add_row(0.5)
    section.check("value", 0.5, None, 1.0 if passed else 0.1)
    return report


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def out(self, name):
        return os.path.join(self.tmpdir, name)

    def test_version(self):
        rv, output = run_cli("-V")
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("Version", output)

    def test_help(self):
        rv, output = run_cli("-E")
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("--config", output)

        rv, output = run_cli("help", "verify")
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("quantizer", output)

    def test_missing_config(self):
        path = os.path.join(self.tmpdir, "missing.toml")
        with mock.patch.object(actlab.logger, "error") as error:
            rv, _ = run_cli("--config", path, "train")
        self.assertEqual(rv, EXIT_USAGE)
        self.assertIn(path, str(error.call_args[0][0]))

    def test_usage_errors(self):
        self.assertEqual(run_cli("--set", "train.bogus=1", "train")[0],
                         EXIT_USAGE)
        self.assertEqual(run_cli("frobnicate")[0], EXIT_USAGE)
        self.assertEqual(run_cli()[0], EXIT_USAGE)
        self.assertEqual(run_cli("train", "mode", "int3")[0], EXIT_USAGE)
        self.assertEqual(run_cli("train", "extra")[0], EXIT_USAGE)

    def test_train_fp32(self):
        rv, output = run_cli("--out", self.tmpdir, *(SMALL + ["train", "mode",
                                                              "fp32"]))
        self.assertEqual(rv, EXIT_OK)

        summary = read_summary(self.out("summary.json"))
        self.assertEqual(summary["mode"], "fp32")
        self.assertEqual(summary["compression_ratio"], 1.0)
        for name in ("metrics.csv", "profiles.csv", "checkpoint"):
            self.assertTrue(os.path.exists(self.out(name)))

        shown = parse_vertical(output, "Training Summary")
        self.assertEqual(shown["mode"], "fp32")

    def test_train_reference_compression(self):
        rv, _ = run_cli("--config", os.path.join(CONF_DIR, "reference.toml"),
                        "--set", "train.steps=150", "--out", self.tmpdir,
                        "train")
        self.assertEqual(rv, EXIT_OK)

        summary = read_summary(self.out("summary.json"))
        self.assertEqual(summary["mode"], "adaptive_b")
        self.assertLessEqual(summary["avg_bits"], 4.0)
        self.assertGreaterEqual(summary["compression_ratio"], 6.0)

    def test_divergence(self):
        rv, _ = run_cli(*(SMALL + ["--set", "train.learning-rate=1e300",
                                   "train", "mode", "fp32"]))
        self.assertEqual(rv, EXIT_RUNTIME)

    def test_infeasible_budget(self):
        rv, _ = run_cli(*(SMALL + ["--set", "train.avg-bits=1.5", "train"]))
        self.assertEqual(rv, EXIT_USAGE)

    def test_profile_then_allocate(self):
        rv, output = run_cli("--out", self.tmpdir, *(SMALL + ["profile"]))
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("Sensitivity Profile", output)

        profile, dims = read_profile(self.out("profile.csv"))
        self.assertEqual(sorted(dims), [0, 2, 5, 8])
        self.assertEqual(profile.pinned(), [8])

        rv, output = run_cli("--out", self.tmpdir, *(SMALL + ["allocate",
                                                              "bits", "3"]))
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("Bit Allocation", output)

        scheme = read_scheme(self.out("scheme.csv"), 64)
        free = dict((s, d) for s, d in dims.items() if s != 8)
        self.assertLessEqual(scheme.average_bits(free), 3.0)
        self.assertEqual(scheme.bits_for(8), 32)

    def test_profile_from_checkpoint(self):
        run = self.out("run")
        self.assertEqual(run_cli("--out", run, *(SMALL + ["train"]))[0],
                         EXIT_OK)
        checkpoint = os.path.join(run, "checkpoint")

        with mock.patch.object(actlab.logger, "info") as info:
            rv, output = run_cli("--out", self.tmpdir, *(SMALL + [
                "profile", "from", checkpoint, "step", "3"]))
        self.assertEqual(rv, EXIT_OK)
        self.assertIn("Sensitivity Profile", output)
        self.assertTrue(any(checkpoint in str(c) for c in info.call_args_list))

        profile, dims = read_profile(self.out("profile.csv"))
        self.assertEqual(sorted(dims), [0, 2, 5, 8])

        rv, _ = run_cli(*(SMALL + ["profile", "from", self.out("none")]))
        self.assertEqual(rv, EXIT_USAGE)

    def test_profile_needs_compression(self):
        rv, _ = run_cli(*(SMALL + ["--set", "train.mode=fp32", "profile"]))
        self.assertEqual(rv, EXIT_USAGE)

    def test_allocate_missing_profile(self):
        rv, _ = run_cli("allocate", "from", self.out("nope.csv"))
        self.assertEqual(rv, EXIT_USAGE)
        self.assertEqual(run_cli("allocate")[0], EXIT_USAGE)

    def test_verify_names(self):
        self.assertEqual(run_cli("verify", "nonsense")[0], EXIT_USAGE)
        self.assertEqual(run_cli("verify")[0], EXIT_USAGE)
        # prop1 and prop2 share the prefix
        self.assertEqual(run_cli("verify", "prop")[0], EXIT_USAGE)

    def test_verify_exit_codes(self):
        with mock.patch("lib.actcontroller.run_suites",
                        return_value=fake_report(True)) as suites:
            rv, output = run_cli("--out", self.tmpdir, "verify", "quant")
        self.assertEqual(rv, EXIT_OK)
        self.assertEqual(suites.call_args[0][0], "quantizer")
        self.assertIn("PASS", output)
        self.assertTrue(os.path.exists(self.out("summary.txt")))
        self.assertTrue(os.path.exists(self.out("fake.csv")))

        with mock.patch("lib.actcontroller.run_suites",
                        return_value=fake_report(False)):
            rv, _ = run_cli("verify", "allocator")
        self.assertEqual(rv, EXIT_FAILED)

    def test_verify_quick(self):
        rv, _ = run_cli("--seed", "1", "--out", self.tmpdir, "verify",
                        "autodiff", "quick")
        self.assertEqual(rv, EXIT_OK)
        rows = read_csv(self.out("autodiff.csv"))
        self.assertEqual(len(rows), 3)

    def test_bench_exit_codes(self):
        with mock.patch("lib.actcontroller.run_bench",
                        return_value=fake_report(True)):
            self.assertEqual(run_cli("bench")[0], EXIT_OK)
        with mock.patch("lib.actcontroller.run_bench",
                        return_value=fake_report(False)):
            self.assertEqual(run_cli("bench")[0], EXIT_FAILED)

    def test_report(self):
        fixed = self.out("fixed")
        adaptive = self.out("adaptive")
        self.assertEqual(run_cli("--out", fixed, *(SMALL + [
            "--set", "train.avg-bits=4", "train", "mode", "fixed_b"]))[0],
            EXIT_OK)
        self.assertEqual(run_cli("--out", adaptive, *(SMALL + ["train"]))[0],
                         EXIT_OK)

        plots = self.out("plots")
        rv, output = run_cli("--out", plots, "report", fixed, adaptive)
        self.assertEqual(rv, EXIT_OK)

        evolution = read_csv(os.path.join(plots, "sensitivity_evolution.csv"))
        adaptive_rows = [r for r in evolution if r["run"] == "adaptive"]
        # refreshes at 10, 20, 30 over slots 0, 2, 5, 8
        self.assertEqual(len(adaptive_rows), 12)
        self.assertEqual(sorted(set(r["refresh_step"] for r in adaptive_rows)),
                         ["10", "20", "30"])

        bits = read_csv(os.path.join(plots, "bits.csv"))
        self.assertEqual(set(r["refresh_step"] for r in bits), set(["30"]))

        compare = read_csv(os.path.join(plots, "variance_compare.csv"))
        self.assertEqual(len(compare), 40)
        self.assertIn("fixed.ema_grad_variance", compare[0])
        self.assertIn("adaptive.ema_grad_variance", compare[0])
        self.assertEqual(compare[0]["step"], "0")

    def test_report_empty_dir(self):
        empty = self.out("empty")
        os.makedirs(empty)
        self.assertEqual(run_cli("report", empty)[0], EXIT_USAGE)
        self.assertEqual(run_cli("report")[0], EXIT_USAGE)


if __name__ == "__main__":
    unittest.main()
