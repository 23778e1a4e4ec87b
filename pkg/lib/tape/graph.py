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
import json
import os
from collections import OrderedDict, namedtuple

import numpy as np
from jsonschema import ValidationError, validate

from lib.numerics.rng import make_keys
from lib.numerics.tensor import dtype_of
from lib.utils.constants import (LOSS_KINDS, MIN_COMPRESSIBLE_DIMS, NodeKind,
                                 Precision, SlotKind)
from lib.utils.exceptions import ConfigError

_modelspec = '''{
    "$schema": "http://json-schema.org/draft-04/schema#",
    "title" : "actlab model",
    "type" : "object",
    "additionalProperties" : false,
    "required" : ["input_dim", "nodes"],
    "properties" : {
        "name" : { "type" : "string" },
        "input_dim" : { "type" : "integer", "minimum" : 1 },
        "loss_scale" : { "type" : "number", "minimum" : 0,
                         "exclusiveMinimum" : true },
        "nodes" : {
            "type" : "array",
            "minItems" : 1,
            "items" : { "$ref" : "#/definitions/node" }
        }
    },
    "definitions" : {
        "node" : {
            "type" : "object",
            "additionalProperties" : false,
            "required" : ["kind"],
            "properties" : {
                "kind" : {
                    "enum" : ["linear", "relu", "tanh", "dropout",
                              "maxpool2d", "softmax_ce_loss", "mse_loss"]
                },
                "name" : { "type" : "string" },
                "out" : { "type" : "integer", "minimum" : 1 },
                "p" : { "type" : "number", "minimum" : 0, "maximum" : 1,
                        "exclusiveMaximum" : true },
                "channels" : { "type" : "integer", "minimum" : 1 },
                "height" : { "type" : "integer", "minimum" : 1 },
                "width" : { "type" : "integer", "minimum" : 1 },
                "kernel" : { "type" : "integer", "minimum" : 1 },
                "stride" : { "type" : "integer", "minimum" : 1 },
                "segment" : { "type" : "boolean" }
            }
        }
    }
}'''

# one tensor saved for backward; 'canonical' is the slot whose payload this
# one shares when both hold the same value
SlotInfo = namedtuple("SlotInfo", [
    "slot_id", "label", "node_index", "node_kind", "role", "kind", "token",
    "dims", "canonical",
])

SEGMENT_INPUT = "segment_input"


class Node(object):

    def __init__(self, index, spec, in_dim):
        self.index = index
        self.kind = spec["kind"]
        self.name = spec.get("name", "%s%d" % (self.kind, index))
        self.segment = bool(spec.get("segment", False))
        self.in_dim = in_dim
        self.out_dim = in_dim
        self.p = float(spec.get("p", 0.0))
        self.pool = None

        if self.kind == NodeKind.linear:
            if "out" not in spec:
                raise ConfigError("Node %s: linear needs 'out'" % (self.name))
            self.out_dim = int(spec["out"])

        elif self.kind == NodeKind.maxpool2d:
            try:
                c, h, w = spec["channels"], spec["height"], spec["width"]
                k, s = spec["kernel"], spec.get("stride", spec["kernel"])
            except KeyError as e:
                raise ConfigError("Node %s: maxpool2d needs %s"
                                  % (self.name, str(e)))
            if c * h * w != in_dim:
                raise ConfigError(
                    "Node %s: %dx%dx%d pool input does not match width %d"
                    % (self.name, c, h, w, in_dim))
            if k > h or k > w:
                raise ConfigError("Node %s: kernel larger than input"
                                  % (self.name))
            oh = (h - k) // s + 1
            ow = (w - k) // s + 1
            self.pool = (c, h, w, k, s, oh, ow)
            self.out_dim = c * oh * ow

        elif self.kind == NodeKind.softmax_ce_loss:
            if in_dim < 2:
                raise ConfigError("Node %s: need at least 2 classes"
                                  % (self.name))

    @property
    def input_token(self):
        return self.index

    @property
    def output_token(self):
        return self.index + 1

    def is_loss(self):
        return self.kind in LOSS_KINDS

    def __repr__(self):
        return "Node(%d, %s)" % (self.index, self.kind)


class ModelGraph(object):
    """
    Feed-forward operator list ending in one loss node. Value token 0 is
    the batch input and node i produces token i + 1.
    """

    def __init__(self, spec):
        try:
            validate(spec, json.loads(_modelspec))
        except ValidationError as e:
            raise ConfigError("Invalid model: %s" % (e.message))

        self.spec = copy.deepcopy(spec)
        self.name = spec.get("name", "model")
        self.input_dim = int(spec["input_dim"])
        self.loss_scale = float(spec.get("loss_scale", 1.0))
        self.nodes = []

        width = self.input_dim
        for i, node_spec in enumerate(spec["nodes"]):
            node = Node(i, node_spec, width)
            self.nodes.append(node)
            width = node.out_dim

        losses = [n for n in self.nodes if n.is_loss()]
        if len(losses) != 1 or not self.nodes[-1].is_loss():
            raise ConfigError("Model needs exactly one loss node, last")

        self._layouts = {}

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise ConfigError("Model file not found: %s" % (path))
        with open(path) as f:
            try:
                spec = json.load(f)
            except ValueError as e:
                raise ConfigError("Model file parse error: %s %s"
                                  % (path, str(e)))
        return cls(spec)

    @property
    def loss_node(self):
        return self.nodes[-1]

    @property
    def num_classes(self):
        if self.loss_node.kind == NodeKind.softmax_ce_loss:
            return self.loss_node.in_dim
        return None

    @property
    def output_dim(self):
        return self.loss_node.in_dim

    def with_loss_scale(self, scale):
        spec = copy.deepcopy(self.spec)
        spec["loss_scale"] = scale
        return ModelGraph(spec)

    def param_names(self):
        names = []
        for node in self.nodes:
            if node.kind == NodeKind.linear:
                names.append(node.name + ".weight")
                names.append(node.name + ".bias")
        return names

    def init_params(self, seed, precision=Precision.SINGLE):
        """
        Weights ~ N(0, 1/fan_in), biases zero.
        """

        rng = np.random.default_rng(seed)
        dtype = dtype_of(precision)
        params = OrderedDict()

        for node in self.nodes:
            if node.kind != NodeKind.linear:
                continue
            w = rng.standard_normal((node.out_dim, node.in_dim))
            params[node.name + ".weight"] = (w / np.sqrt(node.in_dim)).astype(dtype)
            params[node.name + ".bias"] = np.zeros(node.out_dim, dtype=dtype)

        return params

    def segment_starts(self):
        return [n.index for n in self.nodes if n.segment]

    def segments(self):
        """
        [start, end) node ranges. Nodes before the first declared boundary
        form a segment of their own.
        """

        starts = self.segment_starts()
        if not starts:
            raise ConfigError("Model %s declares no segment boundary"
                              % (self.name))
        if starts[0] != 0:
            starts = [0] + starts
        ends = starts[1:] + [len(self.nodes)]
        return list(zip(starts, ends))

    def is_smooth(self):
        return all(n.kind not in (NodeKind.relu, NodeKind.maxpool2d)
                   for n in self.nodes)

    def layout(self, batch_size):
        """
        Static slot assignment for one batch size: node context slots in
        node order, then one segment-input slot per segment start.
        """

        if batch_size not in self._layouts:
            self._layouts[batch_size] = self._build_layout(batch_size)
        return self._layouts[batch_size]

    def _build_layout(self, batch_size):
        B = batch_size
        entries = []

        for node in self.nodes:
            if node.kind == NodeKind.linear:
                entries.append((node, "input", SlotKind.ACTIVATION,
                                node.input_token, B * node.in_dim))
                entries.append((node, "weight", SlotKind.PARAMETER,
                                "param:" + node.name + ".weight",
                                node.out_dim * node.in_dim))
            elif node.kind == NodeKind.relu:
                entries.append((node, "input", SlotKind.ACTIVATION,
                                node.input_token, B * node.in_dim))
            elif node.kind == NodeKind.tanh:
                entries.append((node, "output", SlotKind.ACTIVATION,
                                node.output_token, B * node.out_dim))
            elif node.kind == NodeKind.dropout:
                entries.append((node, "mask", SlotKind.INTEGER_STATE,
                                "mask:%d" % node.index, B * node.in_dim))
            elif node.kind == NodeKind.maxpool2d:
                entries.append((node, "indices", SlotKind.INTEGER_STATE,
                                "indices:%d" % node.index, B * node.out_dim))
            elif node.kind == NodeKind.softmax_ce_loss:
                entries.append((node, "probs", SlotKind.ACTIVATION,
                                "probs:%d" % node.index, B * node.in_dim))
                entries.append((node, "labels", SlotKind.INTEGER_STATE,
                                "labels:%d" % node.index, B))
            elif node.kind == NodeKind.mse_loss:
                entries.append((node, "residual", SlotKind.ACTIVATION,
                                "residual:%d" % node.index, B * node.in_dim))

        for start in self.segment_starts():
            node = self.nodes[start]
            entries.append((node, SEGMENT_INPUT, SlotKind.ACTIVATION,
                            node.input_token, B * node.in_dim))

        slots = []
        first = {}
        for slot_id, (node, role, kind, token, dims) in enumerate(entries):
            canonical = first.setdefault((token, dims), slot_id)
            slots.append(SlotInfo(slot_id, "%s.%s" % (node.name, role),
                                  node.index, node.kind, role, kind, token,
                                  dims, canonical))
        return slots

    def stream_keys(self, batch_size, seed, offset=0):
        """
        One StreamKey per slot id: stream_id is the slot id.
        """

        return make_keys([s.slot_id for s in self.layout(batch_size)],
                         seed, offset)

    def slot(self, batch_size, node_index, role):
        for s in self.layout(batch_size):
            if s.node_index == node_index and s.role == role:
                return s
        raise KeyError("No slot %s on node %d" % (role, node_index))

    def activation_slots(self, batch_size, checkpointed=False):
        """
        Canonical activation slots, the ones a CompressionScheme assigns.
        Segment inputs that alias no node slot are only stored by the
        checkpointed path.
        """

        return [s for s in self.layout(batch_size)
                if s.kind == SlotKind.ACTIVATION
                and s.canonical == s.slot_id
                and (checkpointed or s.role != SEGMENT_INPUT)]

    def context_dims(self, batch_size, checkpointed=False):
        return sum(s.dims for s in
                   self.activation_slots(batch_size, checkpointed))

    def pinned_slots(self, batch_size, pin_loss_head=True,
                     checkpointed=False):
        """
        Activation slots held at full precision: tiny tensors and,
        optionally, the probabilities saved by the classification head.
        """

        pinned = []
        for s in self.activation_slots(batch_size, checkpointed):
            if s.dims < MIN_COMPRESSIBLE_DIMS:
                pinned.append(s.slot_id)
            elif pin_loss_head and s.role == "probs":
                pinned.append(s.slot_id)
        return pinned


def mlp_spec(input_dim, hidden, outputs, depth=2, activation=NodeKind.tanh,
             loss=NodeKind.softmax_ce_loss, name="mlp"):
    """
    Model description of a 'depth'-hidden-layer MLP with a segment
    boundary at every hidden linear layer after the first. 'hidden' is
    one width for every layer or a list of 'depth' widths.
    """

    if isinstance(hidden, (list, tuple)):
        widths = [int(w) for w in hidden]
        if len(widths) != depth:
            raise ConfigError("%d hidden widths for %d layers"
                              % (len(widths), depth))
    else:
        widths = [int(hidden)] * depth

    nodes = []
    for layer, width in enumerate(widths):
        node = {"kind": NodeKind.linear, "out": width}
        if layer:
            node["segment"] = True
        nodes.append(node)
        nodes.append({"kind": activation})
    nodes.append({"kind": NodeKind.linear, "out": int(outputs),
                  "segment": True})
    nodes.append({"kind": loss})

    return {"name": name, "input_dim": int(input_dim), "nodes": nodes}
