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

import math
import os
import time
from collections import OrderedDict, namedtuple

from lib.utils.constants import REPORT_SUMMARY_FILE
from lib.utils.util import write_csv

# one tolerance verdict; 'low' or 'high' None means unbounded on that side
Check = namedtuple("Check", ["section", "name", "measured", "low", "high",
                            "passed"])

CHECK_COLUMNS = ["section", "check", "measured", "low", "high", "verdict"]


def _verdict(passed):
    return "PASS" if passed else "FAIL"


def _tolerance(check):
    if check.low is not None and check.high is not None:
        return "[%g, %g]" % (check.low, check.high)
    if check.high is not None:
        return "<= %g" % (check.high)
    if check.low is not None:
        return ">= %g" % (check.low)
    return ""


class ReportSection(object):
    """
    One experiment table plus the tolerance checks judged on it.
    """

    def __init__(self, name, columns):
        self.name = name
        self.columns = list(columns)
        self.rows = []
        self.checks = []
        self.meta = OrderedDict()

    def add_row(self, *values):
        self.rows.append(list(values))

    def check(self, name, measured, low=None, high=None):
        measured = float(measured)
        passed = not math.isnan(measured)
        if low is not None:
            passed = passed and measured >= low
        if high is not None:
            passed = passed and measured <= high
        self.checks.append(Check(self.name, name, measured, low, high, passed))
        return passed

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def table(self):
        """
        Rows with the section's tolerance and verdict appended.
        """

        tolerance = "; ".join(_tolerance(c) for c in self.checks)
        verdict = _verdict(self.passed)
        return (self.columns + ["tolerance", "verdict"],
                [row + [tolerance, verdict] for row in self.rows])


class TheoryReport(object):
    def __init__(self, meta=None):
        self.sections = OrderedDict()
        self.meta = OrderedDict(meta or {})
        self.meta.setdefault("created", time.strftime("%Y-%m-%d %H:%M:%S"))

    def add(self, section):
        self.sections[section.name] = section
        return section

    def checks(self):
        return [c for s in self.sections.values() for c in s.checks]

    @property
    def passed(self):
        return all(s.passed for s in self.sections.values())

    def failures(self):
        return [c for c in self.checks() if not c.passed]

    def summary_lines(self):
        lines = []
        for key, value in self.meta.items():
            lines.append("%s: %s" % (key, value))
        for c in self.checks():
            lines.append("%s %s/%s: %.6g (%s)" % (_verdict(c.passed),
                                                 c.section, c.name,
                                                 c.measured, _tolerance(c)))
        lines.append("%s: %d checks, %d failed" % (_verdict(self.passed),
                                                   len(self.checks()),
                                                   len(self.failures())))
        return lines

    def write(self, out_dir):
        """
        <section>.csv per section, checks.csv and the summary text file.
        """

        if not os.path.isdir(out_dir):
            os.makedirs(out_dir)

        for section in self.sections.values():
            columns, rows = section.table()
            write_csv(os.path.join(out_dir, section.name + ".csv"), columns,
                      rows)

        write_csv(os.path.join(out_dir, "checks.csv"), CHECK_COLUMNS,
                  [[c.section, c.name, c.measured,
                    "" if c.low is None else c.low,
                    "" if c.high is None else c.high, _verdict(c.passed)]
                   for c in self.checks()])

        with open(os.path.join(out_dir, REPORT_SUMMARY_FILE), "w") as f:
            f.write("\n".join(self.summary_lines()) + "\n")
