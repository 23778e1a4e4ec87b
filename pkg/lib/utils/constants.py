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

THREADS_ENV = "ACTC_THREADS"

# quantizer
FULL_PRECISION = 32
DEFAULT_LADDER = (2, 3, 4, 8)
SUPPORTED_BITS = (1, 2, 3, 4, 5, 6, 7, 8)
DEFAULT_GROUP_SIZE = 256
QTENSOR_HEADER_BITS = 256
SIDECAR_BITS_PER_GROUP = 2 * 64

# sensitivity / allocation
MIN_COMPRESSIBLE_DIMS = 16
DEFAULT_SEED_PAIRS = 4
DEFAULT_SENSITIVITY_DECAY = 0.5

# trainer
DEFAULT_GRAD_EMA_DECAY = 0.99
DEFAULT_ADAPT_INTERVAL = 100
DEFAULT_ALERT_THRESHOLD = 0.5
ALERT_EPSILON = 1e-12

# exit codes
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

# file names
METRICS_FILE = "metrics.csv"
PROFILES_FILE = "profiles.csv"
SUMMARY_FILE = "summary.json"
PROFILE_DUMP_FILE = "profile.csv"
SCHEME_DUMP_FILE = "scheme.csv"
CHECKPOINT_DIR = "checkpoint"
MANIFEST_FILE = "manifest.json"
REPORT_SUMMARY_FILE = "summary.txt"
EVOLUTION_FILE = "sensitivity_evolution.csv"
BITS_FILE = "bits.csv"
VARIANCE_COMPARE_FILE = "variance_compare.csv"

METRICS_COLUMNS = ["step", "loss", "grad_norm", "predicted_variance",
                   "ema_grad_variance", "alert", "avg_bits",
                   "compression_ratio", "wall_ms"]


class Enumeration(set):
    def __getattr__(self, name):
        if name in self:
            return name
        raise AttributeError

    def __getitem__(self, name):
        if name in self:
            return name
        raise AttributeError


Precision = Enumeration([
    # fp32, used by training paths
    "SINGLE",

    # fp64, used by verification paths
    "DOUBLE",
])

SlotKind = Enumeration([
    # quantizable saved tensor
    "ACTIVATION",

    # model parameter referenced by an operator, never quantized
    "PARAMETER",

    # masks and indices, never quantized
    "INTEGER_STATE",
])

TrainMode = Enumeration([
    # no compression
    "fp32",

    # uniform bits on every activation slot
    "fixed_b",

    # per-slot bits from sensitivity estimates
    "adaptive_b",

    # adaptive_b with segment checkpointing
    "checkpointed_adaptive",
])

NodeKind = Enumeration([
    "linear",
    "relu",
    "tanh",
    "dropout",
    "maxpool2d",
    "softmax_ce_loss",
    "mse_loss",
])

LOSS_KINDS = ("softmax_ce_loss", "mse_loss")
SMOOTH_KINDS = ("linear", "tanh", "dropout", "softmax_ce_loss", "mse_loss")
