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

from lib.utils.constants import (DEFAULT_GROUP_SIZE, FULL_PRECISION,
                                 SUPPORTED_BITS)
from lib.utils.exceptions import QuantizerError


def check_bits(bits):
    if bits != FULL_PRECISION and bits not in SUPPORTED_BITS:
        raise QuantizerError("Unsupported bit width: %s" % (str(bits)))
    return int(bits)


class CompressionScheme(object):
    """
    Per-slot bit widths. Slots absent from bits_per_slot are stored at full
    precision; forced_fullprec slots are pinned to 32 whatever the map says.
    """

    def __init__(self, bits_per_slot=None, group_size=DEFAULT_GROUP_SIZE,
                 forced_fullprec=()):
        if group_size < 2:
            raise QuantizerError("group_size must be >= 2, got %s"
                                 % (group_size))

        self.group_size = int(group_size)
        self.forced_fullprec = frozenset(forced_fullprec)
        self.bits_per_slot = {}

        for slot, bits in (bits_per_slot or {}).items():
            self.bits_per_slot[slot] = check_bits(bits)
        for slot in self.forced_fullprec:
            self.bits_per_slot[slot] = FULL_PRECISION

    @classmethod
    def uniform(cls, slots, bits, group_size=DEFAULT_GROUP_SIZE,
                forced_fullprec=()):
        return cls(dict((s, bits) for s in slots), group_size,
                   forced_fullprec)

    @classmethod
    def full_precision(cls, slots=(), group_size=DEFAULT_GROUP_SIZE):
        return cls.uniform(slots, FULL_PRECISION, group_size)

    def bits_for(self, slot):
        if slot in self.forced_fullprec:
            return FULL_PRECISION
        return self.bits_per_slot.get(slot, FULL_PRECISION)

    def slots(self):
        return sorted(self.bits_per_slot)

    def with_bits(self, updates):
        merged = dict(self.bits_per_slot)
        merged.update(updates)
        return CompressionScheme(merged, self.group_size, self.forced_fullprec)

    def total_bits(self, dims):
        return sum(self.bits_for(s) * d for s, d in dims.items())

    def average_bits(self, dims):
        """
        Sum(b_l * D_l) / Sum(D_l) over the slots in 'dims' (slot -> D_l).
        """

        total = sum(dims.values())
        if not total:
            return 0.0
        return float(self.total_bits(dims)) / total

    def is_lossless(self):
        return all(b == FULL_PRECISION for b in self.bits_per_slot.values())

    def __eq__(self, other):
        if not isinstance(other, CompressionScheme):
            return NotImplemented
        return (self.group_size == other.group_size
                and self.forced_fullprec == other.forced_fullprec
                and self.bits_per_slot == other.bits_per_slot)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __repr__(self):
        return "CompressionScheme(%s, group_size=%d, forced=%s)" % (
            dict(sorted(self.bits_per_slot.items())), self.group_size,
            sorted(self.forced_fullprec))
