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

from lib.view import terminal
from lib.view.table import Extractors, Styles, Table, TitleFormats

H1_offset = 13
H2_offset = 15
H_width = 80

# longer sections only go to their CSV
MAX_PRINTED_ROWS = 25


def _is_inf(value):
    try:
        return math.isinf(float(value))
    except (TypeError, ValueError):
        return False


class CliView(object):

    @staticmethod
    def print_result(out):
        if not isinstance(out, str):
            out = str(out)
        print(out)

    @staticmethod
    def show_summary(summary, title="Training Summary"):
        t = Table(title, list(summary.keys()), style=Styles.VERTICAL,
                  title_format=TitleFormats.no_change)
        t.add_cell_alert("alert_count", lambda data: data["alert_count"] > 0)
        t.insert_row(dict(summary))
        CliView.print_result(t)

    @staticmethod
    def show_profile(rows, step=0):
        """
        rows: [slot_id, node_kind, D_l, c_l, bits_assigned] lists.
        """

        columns = ["slot_id", "node_kind", "D_l", "c_l", "bits_assigned"]
        t = Table("Sensitivity Profile (step %d)" % (step), columns,
                  sort_by="slot_id",
                  description="Pinned slots (c_l = inf) stay at 32 bits.")
        t.add_data_source("c_l", Extractors.float_extractor("c_l"))
        t.add_cell_alert("c_l", lambda data: _is_inf(data["c_l"]),
                         color=terminal.fg_blue)

        for row in rows:
            t.insert_row(dict(zip(columns, row)))
        CliView.print_result(t)

    @staticmethod
    def show_scheme(rows, avg_bits, budget_bits):
        """
        rows: [slot_id, D_l, c_l, b_l] lists.
        """

        columns = ["slot_id", "D_l", "c_l", "b_l"]
        t = Table("Bit Allocation", columns, sort_by="slot_id",
                  description="%.4g bits/dim over a budget of %d bits"
                  % (avg_bits, budget_bits))
        t.add_data_source("c_l", Extractors.float_extractor("c_l"))
        t.add_cell_alert("b_l", lambda data: data["b_l"] == 32,
                         color=terminal.fg_blue)

        for row in rows:
            t.insert_row(dict(zip(columns, row)))
        CliView.print_result(t)

    @staticmethod
    def show_report_section(section):
        columns, rows = section.table()
        t = Table(section.name, columns, title_format=TitleFormats.no_change)
        t.add_cell_alert("verdict", lambda data: data["verdict"] == "FAIL")
        for row in rows:
            t.insert_row(dict(zip(columns, row)))
        CliView.print_result(t)

    @staticmethod
    def show_report(report, sections=True):
        if sections:
            for section in report.sections.values():
                if len(section.rows) <= MAX_PRINTED_ROWS:
                    CliView.show_report_section(section)

        s = terminal.bold() + "Checks".center(H_width, "_") + terminal.unbold()
        for c in report.checks():
            s += CliView._get_header("PASS" if c.passed else "FAIL")
            s += CliView._get_msg(["%s/%s: %.6g" % (c.section, c.name,
                                                    c.measured)],
                                  c.passed)
        s += "\n" + CliView._get_header("Total") + CliView._get_msg(
            [str(len(report.checks()))])
        s += CliView._get_header("Failed") + CliView._get_msg(
            [str(len(report.failures()))], not report.failures())
        CliView.print_result(s)

    @staticmethod
    def show_files(title, paths):
        s = terminal.bold() + title.center(H_width, "_") + terminal.unbold()
        for path in paths:
            s += "\n" + " ".rjust(H2_offset) + path
        CliView.print_result(s)

    @staticmethod
    def _get_header(header):
        return "\n" + terminal.bold() + ("%s:" % header).rjust(H1_offset) + \
            terminal.unbold() + " ".rjust(H2_offset - H1_offset)

    @staticmethod
    def _get_msg(msg, passed=None):
        text = ("\n" + " ".rjust(H2_offset)).join(msg)
        if passed is None:
            return text
        if passed:
            return terminal.fg_green() + text + terminal.fg_clear()
        return terminal.fg_red() + text + terminal.fg_clear()
