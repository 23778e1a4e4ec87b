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
ANSI decorations. Every helper returns the escape sequence to print, or
'' when colouring is off (no tty or --no-color).
"""

import sys

_CODES = {
    "bold": '1',
    "dim": '2',
    "underline": '4',
    "fg_red": '31;91',
    "fg_green": '32;92',
    "fg_yellow": '33;93',
    "fg_blue": '34;94',
}
_FOREGROUND = ("fg_red", "fg_green", "fg_yellow", "fg_blue")

_ESC = '\033['
_TERM = 'm'
_CLEAR = '0'
_NORMAL = '22'

color_enabled = False
cur_format = []


def enable_color(is_enable):
    global color_enabled

    color_enabled = bool(is_enable)
    del cur_format[:]


def _emit(codes):
    if not color_enabled:
        return ''
    return _ESC + ';'.join(codes) + _TERM


def _add_it(name):
    code = _CODES[name]
    if code in cur_format:
        return ''  # nothing to do
    cur_format.append(code)
    return _emit(cur_format)


def _remove_it(names, clear_code=None):
    removed = [_CODES[n] for n in names if _CODES[n] in cur_format]
    if not removed:
        return ''  # nothing to do
    for code in removed:
        cur_format.remove(code)
    if clear_code:
        return _emit([clear_code])
    return _emit([_CLEAR] + cur_format)


# Real terminal?
enable_color(sys.stdout.isatty())


def bold():
    return _add_it("bold")


def unbold():
    return _remove_it(["bold"], _NORMAL)


def dim():
    return _add_it("dim")


def underline():
    return _add_it("underline")


def reset():
    del cur_format[:]
    return _emit([_CLEAR])


def fg_red():
    return _add_it("fg_red")


def fg_green():
    return _add_it("fg_green")


def fg_yellow():
    return _add_it("fg_yellow")


def fg_blue():
    return _add_it("fg_blue")


def fg_clear():
    return _remove_it(_FOREGROUND)


def bg_clear():
    # no background colours are used
    return ''


def style(*functions):
    if not functions:
        return ''

    for function in functions[:-1]:
        function()

    return functions[-1]()
