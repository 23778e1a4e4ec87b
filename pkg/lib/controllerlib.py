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

import inspect
import logging
import re

from lib.utils.lookupdict import PrefixDict
from lib.view import terminal, view

DEFAULT = "_do_default"


class CommandHelp(object):

    def __init__(self, *message):
        self.message = list(message)

    def __call__(self, func):
        try:
            if func.__name__ == DEFAULT:
                self.message[0] = "%sDefault%s: %s" % (
                    terminal.underline(), terminal.reset(), self.message[0])
        except Exception:
            pass

        func._command_help = self.message

        return func

    @staticmethod
    def has_help(func):
        return hasattr(func, "_command_help")

    @staticmethod
    def display(func, indent=0):
        indent = "  " * indent
        for line in getattr(func, "_command_help", []):
            print(indent + line)

    @staticmethod
    def print_text(message, indent=0):
        indent = "  " * indent
        print("%s%s" % (indent, message))


class CommandException(Exception):
    """Unknown, ambiguous or malformed command line."""

    def __call__(self, *ignore):
        # act as a callable and raise self
        raise self


class BaseController(object):
    view = None
    version = ''
    logger = None
    config = None
    out_dir = None

    def __init__(self, version='', config=None, out_dir=None):
        # Shared by every controller of one command run
        BaseController.view = view.CliView()
        BaseController.version = version
        BaseController.logger = logging.getLogger("actlab")
        BaseController.config = config
        BaseController.out_dir = out_dir
        # instance vars
        self.modifiers = set()

    def _init_commands(self):
        command_re = re.compile("^(do_(.*))$")
        commands = [command_re.match(v).groups()
                    for v in dir(self) if command_re.search(v)]

        self.commands = PrefixDict()

        for command in commands:
            self.commands.add(command[1], getattr(self, command[0]))

        for command, controller in self.controller_map.items():
            try:
                controller = controller()
            except Exception:
                pass

            self.commands.add(command, controller)

    def __call__(self, line):
        return self.execute(line)

    def _init_controller_map(self):
        if not hasattr(self, "controller_map"):
            self.controller_map = {}

    def _init(self):
        self._init_controller_map()
        self._init_commands()

    def _find_method(self, line):
        try:
            command = line.pop(0)
        except IndexError:
            # Popped last element use default
            return getattr(self, DEFAULT)

        try:
            method = self.commands[command]
        except KeyError:
            line.insert(0, command)

            # the default command may take the word as an argument
            return getattr(self, DEFAULT)

        if len(method) > 1:
            commands = sorted(self.commands.get_key(command))
            commands[-1] = "or %s" % (commands[-1])
            if len(commands) > 2:
                commands = ', '.join(commands)
            else:
                commands = ' '.join(commands)
            raise CommandException(
                "Ambiguous command: '%s' may be %s." % (command, commands))

        return method[0]

    def execute(self, line):
        self._init()

        method = self._find_method(line)

        if method is None:
            raise CommandException("Method was not set? %s" % (line))

        if inspect.ismethod(method):
            self.pre_command(line[:])

        return method(line)

    def execute_help(self, line, indent=0):
        self._init()

        method = self._find_method(line)

        if method is None:
            raise CommandException("Method was not set? %s" % (line))

        method_name = getattr(method, "__name__", None)

        if method_name == DEFAULT:  # Print controller help
            CommandHelp.display(self, indent=indent)
            if self.modifiers:
                CommandHelp.print_text(
                    "%sModifiers%s: %s" % (terminal.underline(),
                                            terminal.reset(),
                                            ", ".join(sorted(self.modifiers))),
                    indent=indent)

            if CommandHelp.has_help(method):
                CommandHelp.display(method, indent=indent)

            indent += 2
            for command in sorted(self.commands.keys()):
                CommandHelp.print_text(
                    "- %s%s%s:" % (terminal.bold(), command,
                                   terminal.reset()), indent=indent - 1)

                self.execute_help([command], indent=indent)

        elif method_name is None:  # a sub-controller
            method.execute_help(line, indent=indent)

        else:  # Print help for a command
            CommandHelp.display(method, indent=indent)

    def _do_default(self, line):
        # Override method to provide default command behavior
        raise CommandException("%s: command not found." % (" ".join(line)))

    # Hook to be defined by subclasses
    def pre_command(self, line):
        pass


class CommandController(BaseController):

    def __init__(self):
        self.modifiers = set()

    def parse_modifiers(self, line):
        """
        Groups words by the modifier preceding them; words before any
        modifier land under 'line'.
        """

        groups = dict((mod, []) for mod in self.modifiers)

        mod = 'line'
        groups[mod] = []

        while line:
            word = line.pop(0)
            if word in self.modifiers:
                mod = word
            elif word not in groups[mod]:
                groups[mod].append(word)

        return groups

    def pre_command(self, line):
        self.mods = self.parse_modifiers(line)

    def single_modifier(self, name, cast=str, default=None):
        """
        The one value given after modifier 'name', cast; default when
        the modifier is absent.
        """

        values = self.mods.get(name, [])
        if not values:
            return default
        if len(values) > 1:
            raise CommandException("'%s' takes one value, got %s"
                                   % (name, " ".join(values)))
        try:
            return cast(values[0])
        except ValueError:
            raise CommandException("Invalid value for '%s': %s"
                                   % (name, values[0]))
