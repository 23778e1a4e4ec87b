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
import re

import numpy as np

from lib.view import terminal


class Extractors(object):
    # standard set of extractors

    @staticmethod
    def _num_extractor(column, fmt):
        def extractor(data):
            value = data[column]
            if value is None or value == "":
                return "N/E"
            value = float(value)
            if math.isinf(value):
                return "inf"
            return fmt % (value)

        return extractor

    @staticmethod
    def float_extractor(column, digits=4):
        return Extractors._num_extractor(column, "%%.%dg" % (digits))

    @staticmethod
    def fixed_extractor(column, decimals=3):
        return Extractors._num_extractor(column, "%%.%df" % (decimals))

    @staticmethod
    def int_extractor(column):
        return Extractors._num_extractor(column, "%d")


class TitleFormats(object):

    @staticmethod
    def var_to_title(name):
        rename = re.split(r'[\-_ ]', name)
        rename = ' '.join(w if w.isupper() else w.title() for w in rename)
        return rename.strip()

    @staticmethod
    def no_change(name):
        return name.strip()


class Styles(object):
    # Styles
    HORIZONTAL = 0
    VERTICAL = 1


class Table(object):

    def __init__(self, title, column_names, sort_by=None,
                 style=Styles.HORIZONTAL, title_format=TitleFormats.var_to_title,
                 description=''):

        self._data = []
        self._data_source = {}
        self._no_alert_style = lambda: ''
        self._cell_alert = {}
        self._column_padding = "   "
        self._no_entry = 'N/E'

        self._title = title
        self._style = style
        self._description = description

        if style not in (Styles.HORIZONTAL, Styles.VERTICAL):
            raise ValueError("Style must be either HORIZONAL or VERTICAL")

        self._column_names = []
        self._column_display_names = []
        for name in column_names:
            if isinstance(name, str):
                self._column_names.append(name)
                self._column_display_names.append(title_format(name))
            else:
                self._column_names.append(name[0])
                self._column_display_names.append(name[1])

        # column types: number (right aligned) or string (left aligned)
        self._column_types = ["number" for _ in self._column_names]

        if sort_by is None:
            self._sort_by = None
        elif sort_by in self._column_names:
            self._sort_by = self._column_names.index(sort_by)
        elif isinstance(sort_by, int) and 0 <= sort_by < len(column_names):
            self._sort_by = sort_by
        else:
            raise ValueError("sort_by is not a legal value")

    def add_data_source(self, column, function):
        self._data_source[column] = function

    def add_cell_alert(self, column_name, is_alert, color=terminal.fg_red):
        self._cell_alert[column_name] = (is_alert, color)

    def insert_row(self, row_data):
        if not row_data:
            # passed an empty row
            return
        if not isinstance(row_data, dict):
            raise ValueError("Data cannot be of type %s" % type(row_data))

        row = []
        for i, column in enumerate(self._column_names):
            try:
                if column in self._data_source:
                    cell = self._data_source[column](row_data)
                else:
                    cell = row_data[column]
            except KeyError:  # extractor accessed n/e column
                cell = self._no_entry

            cell = self._to_text(cell)
            if not _is_number(cell) and cell != self._no_entry:
                self._column_types[i] = "string"

            cell_format = self._no_alert_style
            if column in self._cell_alert:
                is_alert, color = self._cell_alert[column]
                try:
                    if is_alert(row_data):
                        cell_format = color
                except KeyError:  # is_alert accessed n/e column
                    pass

            row.append((cell_format, cell))

        self._data.append(row)

    def _to_text(self, cell):
        if cell is None:
            return self._no_entry
        if isinstance(cell, Exception):
            return "error"
        if isinstance(cell, (float, np.floating)):
            return "%.4g" % (cell)
        return str(cell)

    def _sorted(self):
        if self._sort_by is None:
            return self._data

        def key(row):
            cell = row[self._sort_by][1]
            if _is_number(cell):
                return (0, float(cell), "")
            return (1, 0.0, cell)

        return sorted(self._data, key=key)

    def _widths(self, data):
        widths = [max(len(w) for w in name.split(' '))
                  for name in self._column_display_names]
        for row in data:
            for i, (_, cell) in enumerate(row):
                widths[i] = max(widths[i], len(cell))
        return widths

    def gen_description(self, line_width, desc_width):
        if self._description == '':
            return []

        tdesc = self._description.split(' ')
        lines = []
        words = []
        while tdesc:
            words.append(tdesc.pop(0))
            line = ' '.join(words)
            if len(line) >= desc_width:
                if len(words) > 1:
                    tdesc.insert(0, words.pop())
                    line = ' '.join(words)
                words = []
                lines.append(line)
        if words:
            lines.append(' '.join(words))

        return ["\n".join("%s%s%s" % (terminal.dim(), l.center(line_width),
                                      terminal.reset()) for l in lines)]

    def _get_title(self, width):
        if not self._title:
            return self._title

        t = self._title.center(width, '~')
        if not t.startswith("~"):
            t = "~" + t
        if not t.endswith("~"):
            t += "~"
        return t

    def _format_cell(self, cell, index, width):
        if self._column_types[index] == "number":
            return cell.rjust(width)
        return cell.ljust(width)

    def __str__(self):
        if not self._data:
            return ''

        data = self._sorted()
        if self._style == Styles.HORIZONTAL:
            return self._str_horizontal(data)
        return self._str_vertical(data)

    def _str_horizontal(self, data):
        widths = self._widths(data)
        width = sum(widths) + len(self._column_padding) * (len(widths) - 1)

        output = [terminal.bold() + self._get_title(width) + terminal.reset()]
        output.extend(self.gen_description(width, width - 10))

        name_lines = [h.split(" ") for h in self._column_display_names]
        for r in range(max(len(n) for n in name_lines)):
            row = []
            for i, words in enumerate(name_lines):
                word = words[r] if r < len(words) else "."
                row.append(word.rjust(widths[i]))
            output.append(self._column_padding.join(row))

        for drow in data:
            row = []
            for i, (cell_format, cell) in enumerate(drow):
                row.append("%s%s%s" % (cell_format(),
                                       self._format_cell(cell, i, widths[i]),
                                       terminal.style(terminal.bg_clear,
                                                      terminal.fg_clear)))
            output.append(self._column_padding.join(row))

        output.append("Number of rows: %s" % (len(data)))
        return "\n".join(output) + '\n'

    def _str_vertical(self, data):
        name_width = max(len(n) for n in self._column_display_names)
        widths = [max(len(row[i][1]) for row in data)
                  for i in range(len(self._column_names))]
        width = name_width + 1 + len(self._column_padding) + max(widths)

        output = [terminal.bold() + self._get_title(width) + terminal.reset()]
        output.extend(self.gen_description(width, width - 10))

        for i, name in enumerate(self._column_display_names):
            row = [name.ljust(name_width), ":", self._column_padding]
            for drow in data:
                cell_format, cell = drow[i]
                row.append("%s%s%s" % (cell_format(), cell.ljust(widths[i]),
                                       terminal.style(terminal.bg_clear,
                                                      terminal.fg_clear)))
                row.append(self._column_padding)
            output.append(''.join(row).rstrip())

        return '\n'.join(output) + '\n'


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False
