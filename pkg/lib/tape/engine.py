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
Forward and backward passes over a ModelGraph.

The forward computes exact values and hands every tensor a node needs for
its backward to a ContextStore, which compresses activations per the
scheme. The backward only sees what the store gives back.
"""

import logging
from collections import OrderedDict, namedtuple

import numpy as np

from lib.numerics.tensor import check_finite
from lib.tape import ops
from lib.tape.context import ContextStore
from lib.tape.graph import SEGMENT_INPUT
from lib.utils.constants import NodeKind
from lib.utils.exceptions import NonFiniteError, ShapeError, SlotError

logger = logging.getLogger('actlab')

Batch = namedtuple("Batch", ["inputs", "targets"])


class Gradients(OrderedDict):
    """
    Parameter name -> gradient array, in parameter order.
    """

    def flatten(self):
        if not self:
            return np.zeros(0)
        return np.concatenate([np.asarray(g, dtype=np.float64).ravel()
                               for g in self.values()])

    def norm(self):
        return float(np.linalg.norm(self.flatten()))

    def check_finite(self):
        for name, g in self.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("Non-finite gradient for %s" % (name))
        return self


def _param_dtype(params):
    for p in params.values():
        return np.asarray(p).dtype
    return np.dtype(np.float64)


def _prepare_inputs(model, params, inputs):
    x = np.asarray(inputs)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    x = x.reshape(x.shape[0], -1).astype(_param_dtype(params))

    if x.shape[1] != model.input_dim:
        raise ShapeError("Batch width %d does not match model input %d"
                         % (x.shape[1], model.input_dim))
    if x.shape[0] == 0:
        raise ShapeError("Empty batch")

    return check_finite(x, "batch inputs")


def _slot_map(model, batch_size):
    return dict(((s.node_index, s.role), s)
                for s in model.layout(batch_size))


def _keep_prob(node, training):
    return 1.0 - node.p if training else 1.0


class _Pass(object):
    """
    One walk over a node range; 'store' None means nothing is saved.
    """

    def __init__(self, model, params, targets, store, keys, training,
                 batch_size, adopt=None):
        self.model = model
        self.params = params
        self.targets = targets
        self.store = store
        self.keys = keys or {}
        self.training = training
        self.slots = _slot_map(model, batch_size)
        self.adopt = adopt or {}

    def save(self, node, role, tensor):
        if self.store is None:
            return
        info = self.slots[(node.index, role)]
        if info.token in self.adopt:
            other, other_slot = self.adopt[info.token]
            self.store.adopt(info, other, other_slot)
        else:
            self.store.save(info, tensor)

    def run(self, start, end, value):
        for node in self.model.nodes[start:end]:
            value = self.node(node, value)
            if not node.is_loss():
                check_finite(value, "output of %s" % (node.name))
        return value

    def node(self, node, x):
        kind = node.kind
        scale = self.model.loss_scale

        if kind == NodeKind.linear:
            w = self.params[node.name + ".weight"]
            b = self.params[node.name + ".bias"]
            self.save(node, "input", x)
            self.save(node, "weight", w)
            return ops.linear_forward(x, w, b)

        if kind == NodeKind.relu:
            self.save(node, "input", x)
            return ops.relu_forward(x)

        if kind == NodeKind.tanh:
            y = ops.tanh_forward(x)
            self.save(node, "output", y)
            return y

        if kind == NodeKind.dropout:
            if self.training and node.p > 0:
                info = self.slots[(node.index, "mask")]
                if info.slot_id not in self.keys:
                    raise SlotError("No stream key for dropout mask %s"
                                    % (info.label))
                mask = ops.dropout_mask(self.keys[info.slot_id], x.shape,
                                        node.p)
            else:
                mask = np.ones(x.shape, dtype=np.uint8)
            self.save(node, "mask", mask)
            return ops.dropout_forward(x, mask, _keep_prob(node, self.training))

        if kind == NodeKind.maxpool2d:
            c, h, w, k, s, _, _ = node.pool
            y, indices = ops.maxpool2d_forward(x, c, h, w, k, s)
            self.save(node, "indices", indices)
            return y

        if kind == NodeKind.softmax_ce_loss:
            labels = ops.class_labels(self.targets, x.shape[0], node.in_dim)
            loss, probs = ops.softmax_ce_forward(x, labels)
            self.save(node, "probs", probs)
            self.save(node, "labels", labels)
            return _finite_loss(scale * loss)

        if kind == NodeKind.mse_loss:
            loss, residual = ops.mse_forward(x, self.targets)
            self.save(node, "residual", residual)
            return _finite_loss(scale * loss)

        raise ShapeError("Unknown node kind %s" % (kind))


def _finite_loss(loss):
    if not np.isfinite(loss):
        raise NonFiniteError("Non-finite loss")
    return float(loss)


def _backprop(model, store, start, end, upstream, grads, training=True):
    slots = _slot_map(model, store.batch_size)

    def ctx(node, role):
        return store.load(slots[(node.index, role)].slot_id)

    for node in reversed(model.nodes[start:end]):
        kind = node.kind

        if kind == NodeKind.softmax_ce_loss:
            upstream = ops.softmax_ce_vjp(ctx(node, "probs"),
                                          ctx(node, "labels"), upstream)
        elif kind == NodeKind.mse_loss:
            upstream = ops.mse_vjp(ctx(node, "residual"), upstream)
        elif kind == NodeKind.maxpool2d:
            upstream = ops.maxpool2d_vjp(ctx(node, "indices"), upstream,
                                         node.in_dim)
        elif kind == NodeKind.dropout:
            upstream = ops.dropout_vjp(ctx(node, "mask"), upstream,
                                       _keep_prob(node, training))
        elif kind == NodeKind.tanh:
            upstream = ops.tanh_vjp(ctx(node, "output"), upstream)
        elif kind == NodeKind.relu:
            upstream = ops.relu_vjp(ctx(node, "input"), upstream)
        elif kind == NodeKind.linear:
            gi, gw, gb = ops.linear_vjp(ctx(node, "input"),
                                        ctx(node, "weight"), upstream)
            grads[node.name + ".weight"] = gw
            grads[node.name + ".bias"] = gb
            upstream = gi

        if not np.all(np.isfinite(upstream)):
            raise NonFiniteError("Non-finite gradient at %s" % (node.name))

    return upstream


def _ordered(model, grads):
    return Gradients((name, grads[name]) for name in model.param_names())


def forward(model, params, batch, scheme=None, keys=None, training=True):
    """
    Returns (loss, ContextStore). The loss never depends on the scheme.
    """

    x = _prepare_inputs(model, params, batch.inputs)
    B = x.shape[0]
    store = ContextStore(scheme, keys, model, params, B, training)

    loss = _Pass(model, params, batch.targets, store, keys, training,
                 B).run(0, len(model.nodes), x)
    return loss, store


def backward(store):
    if store.model is None:
        raise SlotError("ContextStore was not produced by forward")

    grads = {}
    _backprop(store.model, store, 0, len(store.model.nodes),
              store.model.loss_scale, grads, store.training)
    return _ordered(store.model, grads).check_finite()


def infer(model, params, inputs):
    """
    Model output before the loss node, dropout disabled, nothing saved.
    """

    x = _prepare_inputs(model, params, inputs)
    return _Pass(model, params, None, None, None, False,
                 x.shape[0]).run(0, len(model.nodes) - 1, x)


def predict_classes(model, params, inputs):
    return np.argmax(infer(model, params, inputs), axis=1)


def accuracy(model, params, batch):
    if model.num_classes is None:
        raise ShapeError("accuracy needs a classification model")
    labels = ops.class_labels(batch.targets, np.shape(batch.inputs)[0],
                              model.num_classes)
    return float(np.mean(predict_classes(model, params, batch.inputs)
                         == labels))


def checkpointed_forward(model, params, batch, scheme=None, keys=None):
    """
    Full forward that keeps only the declared segment inputs, quantized
    per the scheme. Returns (loss, store).
    """

    x = _prepare_inputs(model, params, batch.inputs)
    B = x.shape[0]
    store = ContextStore(scheme, keys, model, params, B)

    walk = _Pass(model, params, batch.targets, None, keys, True, B)
    value = x
    segments = model.segments()
    for start, end in segments:
        if model.nodes[start].segment:
            store.save(model.slot(B, start, SEGMENT_INPUT), value)
        value = walk.run(start, end, value)

    return value, store


def checkpointed_backward(model, params, batch, scheme=None, keys=None,
                          store=None):
    """
    Gradients from segment recomputation: each segment is re-run from its
    decoded input into a scratch store (within-segment context quantized
    per the scheme), then backpropagated.
    """

    if store is None:
        _, store = checkpointed_forward(model, params, batch, scheme, keys)

    x = _prepare_inputs(model, params, batch.inputs)
    B = x.shape[0]
    grads = {}
    upstream = model.loss_scale

    for start, end in reversed(model.segments()):
        adopt = {}
        if model.nodes[start].segment:
            seg_slot = model.slot(B, start, SEGMENT_INPUT).slot_id
            seg_input = store.load(seg_slot)
            adopt[model.nodes[start].input_token] = (store, seg_slot)
        else:
            seg_input = x

        scratch = ContextStore(scheme, keys, model, params, B)
        _Pass(model, params, batch.targets, scratch, keys, True, B,
              adopt).run(start, end, seg_input)
        upstream = _backprop(model, scratch, start, end, upstream, grads)

        logger.debug("recomputed segment [%d, %d) of %s", start, end,
                     model.name)

    return _ordered(model, grads).check_finite()


def compute_gradients(model, params, batch, scheme=None, keys=None,
                      checkpointed=False):
    """
    One forward/backward episode. Returns (loss, Gradients, store).
    """

    if checkpointed:
        loss, store = checkpointed_forward(model, params, batch, scheme, keys)
        grads = checkpointed_backward(model, params, batch, scheme, keys,
                                      store)
        return loss, grads, store

    loss, store = forward(model, params, batch, scheme, keys)
    return loss, backward(store), store
