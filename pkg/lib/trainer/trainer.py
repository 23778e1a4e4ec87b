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
The training loop: SGD on gradients computed from compressed context,
with periodic sensitivity refresh and bit re-allocation.
"""

import logging
import os
import time
from collections import OrderedDict, namedtuple

import numpy as np

from lib.allocator.allocator import (AllocationProblem, allocate_bits,
                                     predicted_variance, write_scheme)
from lib.numerics.rng import derive_seed
from lib.quantizer.scheme import CompressionScheme
from lib.sensitivity.estimator import SensitivityProfiler
from lib.sensitivity.profile import write_profile
from lib.tape.checkpoint import save_checkpoint
from lib.tape.engine import accuracy, compute_gradients, forward
from lib.tape.graph import ModelGraph, mlp_spec
from lib.trainer.datasets import make_dataset
from lib.trainer.metrics import (MetricsRecord, write_metrics,
                                 write_sensitivity_log, write_summary)
from lib.trainer.monitor import GradVarianceTracker, compression_alert
from lib.utils import filesize
from lib.utils.constants import (CHECKPOINT_DIR, FULL_PRECISION, METRICS_FILE,
                                 PROFILE_DUMP_FILE, PROFILES_FILE,
                                 SCHEME_DUMP_FILE, SUMMARY_FILE,
                                 SUPPORTED_BITS, NodeKind, TrainMode)
from lib.utils.exceptions import (ConfigError, DivergenceError,
                                  InfeasibleBudgetError, NonFiniteError)

logger = logging.getLogger('actlab')

StepResult = namedtuple("StepResult",
                        ["params", "loss", "grads", "store", "velocity"])

TrainResult = namedtuple("TrainResult",
                         ["params", "metrics", "sensitivity_log", "scheme",
                          "summary"])

# seed streams derived from the run seed
_STREAM_SEED = 1
_DATA_SEED = 2
_PROFILE_SEED = 3


def sgd_update(params, grads, learning_rate, momentum=0.0, velocity=None):
    """
    v = momentum * v + g; p = p - learning_rate * v. Returns new dicts.
    """

    new_params = OrderedDict()
    new_velocity = OrderedDict() if momentum else None

    for name, p in params.items():
        g = grads[name]
        if momentum:
            v = g if velocity is None else momentum * velocity[name] + g
            new_velocity[name] = v
        else:
            v = g
        new_params[name] = (p - learning_rate * v).astype(p.dtype, copy=False)

    return new_params, new_velocity


def act_step(model, params, batch, scheme, keys, learning_rate, momentum=0.0,
             velocity=None, checkpointed=False):
    """
    One compressed forward, backward and SGD update.
    """

    for name, p in params.items():
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("Non-finite parameter %s" % (name))

    loss, grads, store = compute_gradients(model, params, batch, scheme, keys,
                                           checkpointed)
    new_params, new_velocity = sgd_update(params, grads, learning_rate,
                                          momentum, velocity)
    return StepResult(new_params, loss, grads, store, new_velocity)


def resolve_model(config, dataset):
    """
    The configured model (inline or by path), else the built-in tanh MLP
    sized to the dataset.
    """

    if isinstance(config.model, dict):
        model = ModelGraph(config.model)
    elif config.model:
        model = ModelGraph.load(config.model)
    else:
        loss = NodeKind.softmax_ce_loss if dataset.num_classes else NodeKind.mse_loss
        model = ModelGraph(mlp_spec(dataset.input_dim, config.hidden,
                                    dataset.output_dim, loss=loss))

    if model.input_dim != dataset.input_dim:
        raise ConfigError("Model input %d does not match dataset %s width %d"
                          % (model.input_dim, dataset.name, dataset.input_dim))
    return model


def warmup_bits(avg_bits, ladder):
    fits = [b for b in ladder if b <= avg_bits]
    if not fits:
        raise InfeasibleBudgetError("Average of %s bits is below the ladder %s"
                                    % (avg_bits, list(ladder)))
    return max(fits)


class Trainer(object):
    def __init__(self, config, dataset=None, model=None):
        self.config = config
        self.mode = config.mode
        if self.mode not in TrainMode:
            raise ConfigError("Unknown mode %s" % (self.mode))

        self.checkpointed = self.mode == TrainMode.checkpointed_adaptive
        self.adaptive = self.mode in (TrainMode.adaptive_b,
                                      TrainMode.checkpointed_adaptive)

        self.dataset = dataset or make_dataset(config.dataset)
        self.model = model or resolve_model(config, self.dataset)
        self.batch_size = config.batch_size
        if self.batch_size > len(self.dataset):
            raise ConfigError("batch-size %d exceeds %d samples"
                              % (self.batch_size, len(self.dataset)))

        B = self.batch_size
        layout = self.model.layout(B)
        self.pinned = self.model.pinned_slots(B, config.pin_loss_head,
                                              self.checkpointed)
        self.dims = OrderedDict(
            (s.slot_id, s.dims)
            for s in self.model.activation_slots(B, self.checkpointed))
        self.free_dims = OrderedDict((s, d) for s, d in self.dims.items()
                                     if s not in self.pinned)
        self.labels = dict((s.slot_id, s) for s in layout)

        self.profiler = SensitivityProfiler(self.model, config.seed_pairs,
                                            config.sensitivity_decay,
                                            config.pin_loss_head,
                                            self.checkpointed)
        self.tracker = GradVarianceTracker(config.grad_ema_decay)

        self.scheme = self._initial_scheme()
        self.profile = None
        self.predicted = 0.0
        self.sensitivity_log = []
        self.metrics = []
        self.alerts = 0

    def _initial_scheme(self):
        config = self.config
        free = list(self.free_dims)

        if self.mode == TrainMode.fp32:
            return None

        if self.mode == TrainMode.fixed_b:
            bits = config.avg_bits
            if bits != int(bits) or int(bits) not in SUPPORTED_BITS:
                raise ConfigError("fixed_b needs an integer avg-bits in 1..8, "
                                  "got %s" % (bits))
            return CompressionScheme.uniform(free, int(bits), config.group_size,
                                             self.pinned)

        AllocationProblem.from_average(
            dict((s, 1.0) for s in self.dims), self.dims, config.avg_bits,
            config.ladder, self.pinned).check_feasible()

        return CompressionScheme.uniform(free, warmup_bits(config.avg_bits,
                                                           config.ladder),
                                         config.group_size, self.pinned)

    def _seed(self, stream):
        return derive_seed(self.config.seed, stream)

    def batch(self, step):
        return self.dataset.minibatch(step, self.batch_size,
                                      self._seed(_DATA_SEED))

    def refresh(self, step, params, batch):
        config = self.config
        self.profile = self.profiler.refresh(self.profile, params, batch,
                                             self.scheme,
                                             self._seed(_PROFILE_SEED), step,
                                             step << 32)

        if self.adaptive:
            problem = AllocationProblem.from_average(
                self.profile.c, self.dims, config.avg_bits, config.ladder,
                self.pinned)
            self.scheme = allocate_bits(problem, config.group_size)

        self.predicted = predicted_variance(self.profile.finite(), self.scheme)

        for slot, value in self.profile.c.items():
            info = self.labels[slot]
            self.sensitivity_log.append([step, slot, info.node_kind,
                                         info.dims, value,
                                         self.scheme.bits_for(slot)])

        logger.info("step %d: refreshed %d sensitivities, predicted "
                    "compression variance %.6g, %.3f bits/dim", step,
                    len(self.profile), self.predicted, self.avg_bits())

    def avg_bits(self):
        if self.scheme is None:
            return float(FULL_PRECISION)
        return self.scheme.average_bits(self.free_dims)

    def _refresh_due(self, step):
        return (self.mode != TrainMode.fp32 and step > 0
                and step % self.config.adapt_interval == 0)

    def run(self):
        config = self.config
        B = self.batch_size
        params = self.model.init_params(config.seed, config.precision)
        velocity = None
        store = None
        alerting = False
        started = time.time()

        logger.info("training %s (%s) on %s: %d steps, batch %d", self.model.name,
                    self.mode, self.dataset.name, config.steps, B)

        for step in range(config.steps):
            t0 = time.time()
            batch = self.batch(step)

            if self._refresh_due(step):
                self.refresh(step, params, batch)

            keys = self.model.stream_keys(B, self._seed(_STREAM_SEED),
                                          step << 32)
            try:
                result = act_step(self.model, params, batch, self.scheme, keys,
                                  config.learning_rate, config.momentum,
                                  velocity, self.checkpointed)
            except NonFiniteError as e:
                raise DivergenceError("Diverged at step %d: %s" % (step, e))

            params = result.params
            velocity = result.velocity
            store = result.store
            grad_var = self.tracker.update(result.grads.flatten())

            alert = (self.scheme is not None and
                     compression_alert(self.predicted, grad_var,
                                       config.alert_threshold))
            if alert:
                self.alerts += 1
                if not alerting:
                    logger.warning("step %d: predicted compression variance "
                                   "%.6g exceeds %.2f of gradient variance "
                                   "%.6g; raise avg-bits", step,
                                   self.predicted, config.alert_threshold,
                                   grad_var)
            alerting = alert

            if step % config.log_interval == 0 or step == config.steps - 1:
                self.metrics.append(MetricsRecord(
                    step, result.loss, result.grads.norm(), self.predicted,
                    grad_var, int(alert), self.avg_bits(),
                    store.compression_ratio(),
                    round((time.time() - t0) * 1000.0, 3)))

            if (config.checkpoint_interval and config.out_dir
                    and (step + 1) % config.checkpoint_interval == 0):
                self._checkpoint(params, step + 1)

        summary = self._summary(params, store, time.time() - started)
        return TrainResult(params, self.metrics, self.sensitivity_log,
                           self.scheme, summary)

    def _checkpoint(self, params, step):
        save_checkpoint(os.path.join(self.config.out_dir, CHECKPOINT_DIR),
                        params, step, {"mode": self.mode,
                                       "model": self.model.spec})

    def evaluate(self, params):
        """
        (loss, accuracy) over the whole dataset, dropout off; accuracy is
        None for regression.
        """

        full = self.dataset.full()
        loss, _ = forward(self.model, params, full, training=False)
        acc = None
        if self.model.num_classes is not None:
            acc = accuracy(self.model, params, full)
        return loss, acc

    def _summary(self, params, store, wall):
        loss, acc = self.evaluate(params)
        stored = store.activation_bits() if store is not None else 0
        full = sum(self.dims.values()) * FULL_PRECISION

        return OrderedDict([
            ("mode", self.mode),
            ("model", self.model.name),
            ("dataset", self.dataset.name),
            ("steps", self.config.steps),
            ("final_loss", loss),
            ("final_accuracy", acc),
            ("avg_bits", self.avg_bits()),
            ("compression_ratio",
             store.compression_ratio() if store is not None else 1.0),
            ("alert_count", self.alerts),
            ("activation_bits", stored),
            ("activation_size", filesize.bits(stored)),
            ("fp32_activation_size", filesize.bits(full)),
            ("wall_seconds", round(wall, 3)),
        ])

    def write_artifacts(self, out_dir, result):
        if not os.path.isdir(out_dir):
            os.makedirs(out_dir)

        write_metrics(os.path.join(out_dir, METRICS_FILE), result.metrics)
        write_sensitivity_log(os.path.join(out_dir, PROFILES_FILE),
                              result.sensitivity_log)
        write_summary(os.path.join(out_dir, SUMMARY_FILE), result.summary)

        if self.scheme is not None:
            c = self.profile.c if self.profile is not None else {}
            write_scheme(os.path.join(out_dir, SCHEME_DUMP_FILE), self.scheme,
                         c, self.dims)
        if self.profile is not None:
            write_profile(os.path.join(out_dir, PROFILE_DUMP_FILE),
                          self.profile, self.model, self.batch_size,
                          self.scheme)

        self._checkpoint(result.params, self.config.steps)
        logger.info("wrote metrics, summary and checkpoint to %s", out_dir)


def train(config, dataset=None, model=None):
    """
    Runs the configured training. Returns TrainResult; artifacts are
    written when config.out_dir is set.
    """

    trainer = Trainer(config, dataset, model)
    result = trainer.run()
    if config.out_dir:
        trainer.write_artifacts(config.out_dir, result)
    return result
