#!/usr/bin/env python

# Copyright 2026 actlab authors
#
# Licensed under the Apache License, Version 2.0 (the "License")
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

import logging
import os
import sys
import traceback

# Setup logger before anything


class BaseLogger(logging.Logger, object):

    def __init__(self, name, level=logging.WARNING):
        super(BaseLogger, self).__init__(name, level=level)

    def _handle_exception(self, msg):
        if isinstance(msg, Exception) and not isinstance(
                msg, (CommandException, ACTException)):
            traceback.print_exc()

    def _print_message(self, level, red_color, msg, args):
        try:
            message = str(msg) % args if args else str(msg)
        except Exception:
            message = str(msg)

        message = level + ": " + message

        if red_color:
            message = terminal.fg_red() + message + terminal.fg_clear()

        print(message)

    def debug(self, msg, *args, **kwargs):
        if self.level <= logging.DEBUG:
            self._print_message("DEBUG", False, msg, args)

    def info(self, msg, *args, **kwargs):
        if self.level <= logging.INFO:
            self._print_message("INFO", False, msg, args)

    def warning(self, msg, *args, **kwargs):
        if self.level <= logging.WARNING:
            self._print_message("WARNING", True, msg, args)

    def error(self, msg, *args, **kwargs):
        if self.level <= logging.ERROR:
            self._print_message("ERROR", True, msg, args)
            self._handle_exception(msg)

    def critical(self, msg, *args, **kwargs):
        if self.level <= logging.CRITICAL:
            self._print_message("ERROR", True, msg, args)
            self._handle_exception(msg)
        exit(EXIT_RUNTIME)

logging.setLoggerClass(BaseLogger)
logging.basicConfig(level=logging.WARNING)

logger = logging.getLogger('actlab')
logger.setLevel(logging.INFO)

from lib.actcontroller import ACTRootController
from lib.controllerlib import CommandException
from lib.utils import conf
from lib.utils.constants import (EXIT_FAILED, EXIT_OK, EXIT_RUNTIME,
                                 EXIT_USAGE)
from lib.utils.exceptions import (ACTException, ConfigError, DivergenceError,
                                  InfeasibleBudgetError, NonFiniteError,
                                  VerificationError)
from lib.view import terminal

__version__ = '$$__version__$$'


def main(argv=None):
    """
    Runs one command; returns the process exit code.
    """

    try:
        cli_args = conf.get_cli_args(argv)
    except ConfigError as e:
        logger.error(e)
        return EXIT_USAGE

    version = get_version()

    if cli_args.help:
        conf.print_config_help()
        return EXIT_OK

    if cli_args.version:
        print("Activation Compressed Training Laboratory")
        print("Version " + str(version))
        return EXIT_OK

    if cli_args.no_color:
        disable_coloring()

    logger.setLevel(logging.DEBUG if cli_args.verbose else logging.INFO)

    use_yappi = False
    if cli_args.profile:
        try:
            import yappi
            use_yappi = True
        except Exception as a:
            print("Unable to load profiler")
            print("Yappi Exception:")
            print(str(a))
            return EXIT_RUNTIME

    try:
        config = conf.train_config(conf.loadconfig(cli_args, logger),
                                   out_dir=cli_args.out)
        ctrl = ACTRootController(version, config, cli_args.out)
        rv = execute(ctrl, list(cli_args.command), use_yappi)
        return EXIT_OK if rv is None else rv

    except (CommandException, ConfigError, InfeasibleBudgetError) as e:
        logger.error(e)
        return EXIT_USAGE
    except (IOError, OSError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except VerificationError as e:
        logger.error(e)
        return EXIT_FAILED
    except (DivergenceError, NonFiniteError) as e:
        logger.error(e)
        return EXIT_RUNTIME
    except ACTException as e:
        logger.error(e)
        return EXIT_RUNTIME


def execute(ctrl, line, use_yappi):
    if not use_yappi:
        return ctrl.execute(line)

    import yappi
    yappi.start()
    try:
        return ctrl.execute(line)
    finally:
        yappi.stop()
        yappi.get_func_stats().print_all()


def disable_coloring():
    terminal.enable_color(False)


def get_version():
    if __version__.startswith('$$'):
        vfile = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                             "version.txt")
        try:
            with open(vfile) as f:
                return f.read().strip()
        except (IOError, OSError):
            return "unknown"
    return __version__


if __name__ == '__main__':
    sys.exit(main())
