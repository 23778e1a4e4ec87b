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

import copy
import os

from lib.allocator.allocator import (AllocationProblem, allocate_bits,
                                     scheme_rows, write_scheme)
from lib.controllerlib import (BaseController, CommandController, CommandHelp,
                               CommandException)
from lib.sensitivity.profile import profile_rows, read_profile, write_profile
from lib.tape.checkpoint import load_checkpoint
from lib.theorycheck.bench import run_bench
from lib.theorycheck.suites import QUICK_OPTIONS, SUITES, run_suites
from lib.trainer.plotdata import write_plot_data
from lib.trainer.trainer import Trainer, train
from lib.utils.constants import (EXIT_OK, PROFILE_DUMP_FILE, SCHEME_DUMP_FILE,
                                 TrainMode)
from lib.utils.exceptions import VerificationError


class ACTCommandController(CommandController):

    def __init__(self):
        self.modifiers = set()

    def no_extra_words(self):
        if self.mods['line']:
            raise CommandException("Unexpected arguments: %s"
                                   % (" ".join(self.mods['line'])))

    def out_path(self, fname):
        if not self.out_dir:
            return None
        if not os.path.isdir(self.out_dir):
            os.makedirs(self.out_dir)
        return os.path.join(self.out_dir, fname)

    def finish_report(self, report, name):
        if self.out_dir:
            report.write(self.out_dir)
            self.logger.info("%s report written to %s", name, self.out_dir)

        self.view.show_report(report)

        if not report.passed:
            raise VerificationError("%s: %d of %d checks failed"
                                    % (name, len(report.failures()),
                                       len(report.checks())))
        return EXIT_OK


@CommandHelp('actlab: activation compressed training laboratory.',
             'Usage: actlab [OPTIONS] COMMAND [ARGS]')
class ACTRootController(BaseController):

    def __init__(self, version='', config=None, out_dir=None):

        super(ACTRootController, self).__init__(version, config, out_dir)

        self.controller_map = {
            'train': TrainController,
            'profile': ProfileController,
            'allocate': AllocateController,
            'verify': VerifyController,
            'bench': BenchController,
            'report': ReportController,
        }

    def _do_default(self, line):
        if not line:
            raise CommandException("No command given, try 'help'.")
        raise CommandException("%s: command not found." % (" ".join(line)))

    @CommandHelp('Returns documentation related to a command',
                 'for example, to retrieve documentation for the "verify"',
                 'command use "help verify".')
    def do_help(self, line):
        self.execute_help(line)
        return EXIT_OK


@CommandHelp('"train" runs SGD on the configured model and dataset with',
             'compressed activations and writes metrics.csv, profiles.csv,',
             'summary.json, scheme.csv, profile.csv and a checkpoint to --out.')
class TrainController(ACTCommandController):

    def __init__(self):
        self.modifiers = set(['mode'])

    @CommandHelp('Trains with the configured mode.',
                 '  Modifiers:',
                 '    mode <name>  - fp32, fixed_b, adaptive_b or',
                 '                   checkpointed_adaptive. default: train.mode')
    def _do_default(self, line):
        self.no_extra_words()

        config = copy.copy(self.config)
        config.mode = self.single_modifier('mode', default=config.mode)
        if config.mode not in TrainMode:
            raise CommandException("Unknown mode %s, expected one of %s"
                                   % (config.mode,
                                      ", ".join(sorted(TrainMode))))

        result = train(config)
        self.view.show_summary(result.summary)
        return EXIT_OK


@CommandHelp('"profile" estimates the per-slot sensitivities c_l of the',
             'configured model and writes them to <out>/profile.csv.')
class ProfileController(ACTCommandController):

    def __init__(self):
        self.modifiers = set(['from', 'step'])

    @CommandHelp('Profiles at the initial parameters or at a checkpoint.',
                 '  Modifiers:',
                 '    from <dir>   - checkpoint directory written by "train".',
                 '    step <int>   - minibatch to profile on. default: 0')
    def _do_default(self, line):
        self.no_extra_words()

        trainer = Trainer(self.config)
        if trainer.scheme is None:
            raise CommandException('"profile" needs a compressing mode, '
                                   'train.mode is fp32')

        step = self.single_modifier('step', int, 0)
        checkpoint = self.single_modifier('from')
        if checkpoint:
            params, manifest = load_checkpoint(checkpoint)
            self.logger.info("profiling checkpoint %s (step %d)", checkpoint,
                             manifest["step"])
        else:
            params = trainer.model.init_params(self.config.seed,
                                               self.config.precision)

        trainer.refresh(step, params, trainer.batch(step))
        self.view.show_profile(profile_rows(trainer.profile, trainer.model,
                                            trainer.batch_size,
                                            trainer.scheme), step)

        path = self.out_path(PROFILE_DUMP_FILE)
        if path:
            write_profile(path, trainer.profile, trainer.model,
                          trainer.batch_size, trainer.scheme)
            self.logger.info("profile written to %s", path)
        return EXIT_OK


@CommandHelp('"allocate" assigns per-slot bit widths from a sensitivity',
             'profile under the train.avg-bits budget and writes',
             '<out>/scheme.csv.')
class AllocateController(ACTCommandController):

    def __init__(self):
        self.modifiers = set(['from', 'bits'])

    @CommandHelp('Allocates from a profile dump.',
                 '  Modifiers:',
                 '    from <path>  - profile.csv to read. default: <out>/profile.csv',
                 '    bits <avg>   - average bits per dimension.',
                 '                   default: train.avg-bits')
    def _do_default(self, line):
        self.no_extra_words()

        path = self.single_modifier('from')
        if not path:
            if not self.out_dir:
                raise CommandException('"allocate" needs "from <profile>" '
                                       'or --out')
            path = os.path.join(self.out_dir, PROFILE_DUMP_FILE)

        profile, dims = read_profile(path)
        avg = self.single_modifier('bits', float, self.config.avg_bits)

        problem = AllocationProblem.from_average(profile.c, dims, avg,
                                                 self.config.ladder)
        scheme = allocate_bits(problem, self.config.group_size)
        free = dict((s, dims[s]) for s in problem.free)

        self.view.show_scheme(scheme_rows(scheme, profile.c, dims),
                              scheme.average_bits(free), problem.budget_bits)

        out = self.out_path(SCHEME_DUMP_FILE)
        if out:
            write_scheme(out, scheme, profile.c, dims)
            self.logger.info("scheme written to %s", out)
        return EXIT_OK


@CommandHelp('"verify" runs property and theory suites with pinned seeds and',
             'writes one CSV per section, checks.csv and summary.txt to --out.',
             'Exits 1 when any tolerance is missed. Add "quick" for smoke-run',
             'sample counts, e.g. "verify quantizer quick".')
class VerifyController(ACTCommandController):

    def _verify(self, name, line):
        quick = 'quick' in line
        extra = [w for w in line if w != 'quick']
        if extra:
            raise CommandException("Unexpected arguments: %s"
                                   % (" ".join(extra)))

        report = run_suites(name, self.config.seed,
                            QUICK_OPTIONS if quick else None)
        return self.finish_report(report, "verify " + name)

    def _do_default(self, line):
        if not line:
            raise CommandException("verify needs a suite: %s"
                                   % (", ".join(list(SUITES) + ["all"])))
        raise CommandException("Unknown suite %s, expected one of %s"
                               % (line[0], ", ".join(list(SUITES) + ["all"])))

    @CommandHelp('Unbiasedness, variance bound and idempotence of the quantizer.')
    def do_quantizer(self, line):
        return self._verify("quantizer", line)

    @CommandHelp('Reverse-mode gradients against finite differences.')
    def do_autodiff(self, line):
        return self._verify("autodiff", line)

    @CommandHelp('Greedy allocation against the exhaustive optimum.')
    def do_allocator(self, line):
        return self._verify("allocator", line)

    @CommandHelp('Seed-pair sensitivity estimates against brute force.')
    def do_sensitivity(self, line):
        return self._verify("sensitivity", line)

    @CommandHelp('Linearization error scaling with quantization variance.')
    def do_prop1(self, line):
        return self._verify("prop1", line)

    @CommandHelp('Gradient variance split into sampling and compression terms.')
    def do_prop2(self, line):
        return self._verify("prop2", line)

    @CommandHelp('Per-slot compression variances adding up.')
    def do_additivity(self, line):
        return self._verify("additivity", line)

    @CommandHelp('Every suite above.')
    def do_all(self, line):
        return self._verify("all", line)


@CommandHelp('"bench" compares uniform bit widths with adaptive allocation at',
             'bench.avg-bits on the reference model: predicted and measured',
             'gradient variance and compression ratio per scheme.')
class BenchController(ACTCommandController):

    def _do_default(self, line):
        self.no_extra_words()
        return self.finish_report(run_bench(self.config), "bench")


@CommandHelp('"report" turns finished training runs into plot data:',
             'sensitivity_evolution.csv, bits.csv and variance_compare.csv.',
             'Usage: report <run dir> [<run dir> ...]',
             'Files go to --out, or to the first run dir.')
class ReportController(ACTCommandController):

    def _do_default(self, line):
        paths = self.mods['line']
        if not paths:
            raise CommandException('"report" needs at least one run directory')

        written = write_plot_data(paths, self.out_dir or paths[0])
        self.view.show_files("Plot Data", written)
        return EXIT_OK
