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
from collections import OrderedDict

from lib.utils.constants import DEFAULT_SENSITIVITY_DECAY, FULL_PRECISION
from lib.utils.exceptions import ConfigError, SlotError
from lib.utils.util import read_csv, write_csv

PINNED = float("inf")

PROFILE_COLUMNS = ["slot_id", "node_kind", "D_l", "c_l", "bits_assigned"]


class SensitivityProfile(object):
    """
    Per-slot sensitivities c_l. Pinned slots carry +inf and are never
    demoted by the allocator.
    """

    def __init__(self, c, estimated_at_step=0,
                 ema_decay=DEFAULT_SENSITIVITY_DECAY, scheme_used=None):
        if not 0.0 <= ema_decay < 1.0:
            raise ConfigError("ema_decay must be in [0, 1), got %s"
                              % (ema_decay))

        self.c = OrderedDict()
        for slot in sorted(c):
            value = float(c[slot])
            if math.isnan(value) or value < 0:
                raise SlotError("Sensitivity of slot %d is %s"
                                % (slot, value))
            self.c[slot] = value

        self.estimated_at_step = int(estimated_at_step)
        self.ema_decay = float(ema_decay)
        self.scheme_used = scheme_used

    def __getitem__(self, slot):
        return self.c[slot]

    def __contains__(self, slot):
        return slot in self.c

    def __len__(self):
        return len(self.c)

    def slots(self):
        return list(self.c)

    def pinned(self):
        return [s for s, v in self.c.items() if v == PINNED]

    def finite(self):
        return OrderedDict((s, v) for s, v in self.c.items() if v != PINNED)

    def __repr__(self):
        return "SensitivityProfile(step=%d, %s)" % (self.estimated_at_step,
                                                    dict(self.c))


def _blend(old, fresh, decay):
    if old == PINNED or fresh == PINNED:
        return PINNED
    return decay * old + (1.0 - decay) * fresh


def update_profile(old, fresh, decay=None):
    """
    Exponential smoothing of a fresh estimate into the running profile,
    c = decay * c_old + (1 - decay) * c_fresh. 'decay' defaults to the
    running profile's ema_decay.
    """

    if old is None:
        return fresh

    if set(old.c) != set(fresh.c):
        raise SlotError("Profile slots differ: %s vs %s"
                        % (sorted(old.c), sorted(fresh.c)))

    if decay is None:
        decay = old.ema_decay

    if decay == 0:
        c = fresh.c
    else:
        c = dict((s, _blend(old.c[s], fresh.c[s], decay)) for s in old.c)

    return SensitivityProfile(c, fresh.estimated_at_step, decay,
                              fresh.scheme_used)


def profile_rows(profile, model, batch_size, scheme=None):
    scheme = scheme or profile.scheme_used
    layout = model.layout(batch_size)
    rows = []
    for slot, value in profile.c.items():
        info = layout[slot]
        bits = scheme.bits_for(slot) if scheme is not None else FULL_PRECISION
        rows.append([slot, info.node_kind, info.dims, value, bits])
    return rows


def write_profile(path, profile, model, batch_size, scheme=None):
    write_csv(path, PROFILE_COLUMNS,
              profile_rows(profile, model, batch_size, scheme))


def read_profile(path, ema_decay=DEFAULT_SENSITIVITY_DECAY):
    """
    Returns (profile, dims) from a profile dump; dims maps slot -> D_l.
    """

    try:
        rows = read_csv(path)
    except (IOError, OSError) as e:
        raise ConfigError("Cannot read profile %s: %s" % (path, e))

    c = {}
    dims = {}
    try:
        for row in rows:
            slot = int(row["slot_id"])
            c[slot] = float(row["c_l"])
            dims[slot] = int(row["D_l"])
    except (KeyError, ValueError) as e:
        raise ConfigError("Malformed profile %s: %s" % (path, e))

    if not c:
        raise ConfigError("Profile %s is empty" % (path))

    return SensitivityProfile(c, ema_decay=ema_decay), dims
