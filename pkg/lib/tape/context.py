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
from collections import OrderedDict, namedtuple

import numpy as np

from lib.quantizer.quantizer import (QuantizedTensor, compressed_size_bits,
                                     dequantize, quantize)
from lib.utils.constants import FULL_PRECISION, SlotKind
from lib.utils.exceptions import SlotError
from lib.utils.util import checksum64

# (value token within one forward pass, element count, content checksum)
Footprint = namedtuple("Footprint", ["token", "size", "checksum"])


class _Entry(object):
    def __init__(self, payload, kind, footprint):
        self.payload = payload
        self.kind = kind
        self.footprint = footprint


class ContextStore(object):
    """
    Tensors saved for backward, keyed by slot id.

    Activation slots are quantized with the bits and stream key of their
    canonical slot; parameter and integer-state slots keep a reference to
    the caller's array. A slot whose footprint matches an earlier one is
    stored as an alias of that payload. scheme=None stores every slot raw.
    """

    def __init__(self, scheme=None, keys=None, model=None, params=None,
                 batch_size=None, training=True):
        self.scheme = scheme
        self.training = training
        self.keys = keys or {}
        self.model = model
        self.params = params
        self.batch_size = batch_size

        self.slots = OrderedDict()
        self.slot_meta = OrderedDict()
        self._entries = []
        self._by_footprint = {}

    def __len__(self):
        return len(self.slots)

    def __contains__(self, slot_id):
        return slot_id in self.slots

    def _bits_for(self, info):
        if self.scheme is None:
            return None
        return self.scheme.bits_for(info.canonical)

    def save(self, info, tensor):
        footprint = Footprint(info.token, int(np.size(tensor)),
                              checksum64(np.ascontiguousarray(tensor)))

        index = self._by_footprint.get(footprint)
        if index is None:
            payload = tensor
            if info.kind == SlotKind.ACTIVATION and self.scheme is not None:
                if info.canonical not in self.keys:
                    raise SlotError("No stream key for slot %d (%s)"
                                    % (info.canonical, info.label))
                payload = quantize(tensor, self._bits_for(info),
                                   self.scheme.group_size,
                                   self.keys[info.canonical])

            index = len(self._entries)
            self._entries.append(_Entry(payload, info.kind, footprint))
            self._by_footprint[footprint] = index

        self.slots[info.slot_id] = index
        self.slot_meta[info.slot_id] = info
        return index

    def adopt(self, info, other, other_slot_id):
        """
        Stores 'info' as an alias of a payload held by another store, used
        when a recomputed segment starts from that payload's decoded value.
        """

        entry = other._entry(other_slot_id)
        index = len(self._entries)
        self._entries.append(entry)
        self._by_footprint[entry.footprint] = index
        self.slots[info.slot_id] = index
        self.slot_meta[info.slot_id] = info

    def _entry(self, slot_id):
        try:
            return self._entries[self.slots[slot_id]]
        except KeyError:
            raise SlotError("Missing context slot %s" % (str(slot_id)))

    def payload(self, slot_id):
        return self._entry(slot_id).payload

    def load(self, slot_id):
        payload = self.payload(slot_id)
        if isinstance(payload, QuantizedTensor):
            return dequantize(payload)
        return payload

    def is_alias(self, slot_id):
        return slot_id != self.canonical_slot(slot_id)

    def canonical_slot(self, slot_id):
        """
        First slot stored against the same payload.
        """

        if slot_id not in self.slots:
            raise SlotError("Missing context slot %s" % (str(slot_id)))

        index = self.slots[slot_id]
        for s, i in self.slots.items():
            if i == index:
                return s
        return slot_id

    def with_values(self, values):
        """
        Shallow copy whose payloads for the given slots (and their
        aliases) are replaced by raw arrays.
        """

        clone = copy.copy(self)
        clone.slots = OrderedDict(self.slots)
        clone.slot_meta = OrderedDict(self.slot_meta)
        clone._entries = list(self._entries)
        clone._by_footprint = dict(self._by_footprint)

        for slot_id, value in values.items():
            index = self.slots.get(slot_id)
            if index is None:
                raise SlotError("Missing context slot %s" % (str(slot_id)))
            old = self._entries[index]
            clone._entries[index] = _Entry(value, old.kind, old.footprint)

        return clone

    def _unique_entries(self, kind=None):
        seen = set()
        for index in self.slots.values():
            if index in seen:
                continue
            seen.add(index)
            entry = self._entries[index]
            if kind is None or entry.kind == kind:
                yield entry

    def context_dims(self):
        return sum(e.footprint.size
                   for e in self._unique_entries(SlotKind.ACTIVATION))

    def activation_bits(self):
        """
        Storage of the activation payloads as held: compressed_size_bits
        for quantized entries, 32 bits per element for raw ones.
        """

        total = 0
        for e in self._unique_entries(SlotKind.ACTIVATION):
            if isinstance(e.payload, QuantizedTensor):
                total += compressed_size_bits(e.payload)
            else:
                total += e.footprint.size * FULL_PRECISION
        return total

    def compression_ratio(self):
        """
        32-bit storage over compressed storage, counting only payloads that
        were actually quantized below full precision; 1.0 when none were.
        """

        raw = 0
        packed = 0
        for e in self._unique_entries(SlotKind.ACTIVATION):
            p = e.payload
            if isinstance(p, QuantizedTensor) and not p.is_raw():
                raw += p.size * FULL_PRECISION
                packed += compressed_size_bits(p)
        if not packed:
            return 1.0
        return float(raw) / packed

    def realized_bits(self):
        """
        Payload bits per element over activation entries (sidecar and
        headers excluded).
        """

        dims = 0
        bits = 0
        for e in self._unique_entries(SlotKind.ACTIVATION):
            p = e.payload
            width = p.bits if isinstance(p, QuantizedTensor) else FULL_PRECISION
            dims += e.footprint.size
            bits += e.footprint.size * width
        if not dims:
            return 0.0
        return float(bits) / dims
