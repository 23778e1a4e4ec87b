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
Operator kernels and their vector-Jacobian products. Activations are
(batch, features) matrices; weights are (out, in).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lib.numerics.rng import uniforms
from lib.numerics.tensor import matmul
from lib.utils.exceptions import ShapeError, SlotError


def _same_shape(a, b, what):
    if np.shape(a) != np.shape(b):
        raise ShapeError("%s: shape %s does not match %s"
                         % (what, np.shape(a), np.shape(b)))


###### linear ######

def linear_forward(x, weight, bias):
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError("linear: input %s does not fit weight %s"
                         % (x.shape, weight.shape))
    return matmul(x, weight.T) + bias


def linear_vjp(ctx_input, weight, upstream):
    """
    Returns (grad_input, grad_weight, grad_bias).
    """

    if upstream.ndim != 2 or upstream.shape[1] != weight.shape[0] \
            or upstream.shape[0] != ctx_input.shape[0] \
            or ctx_input.shape[1] != weight.shape[1]:
        raise ShapeError("linear_vjp: input %s, weight %s, upstream %s"
                         % (ctx_input.shape, weight.shape, upstream.shape))

    grad_input = matmul(upstream, weight)
    grad_weight = matmul(upstream.T, ctx_input)
    grad_bias = upstream.sum(axis=0)
    return grad_input, grad_weight, grad_bias


###### elementwise ######

def relu_forward(x):
    return np.maximum(x, 0)


def relu_vjp(ctx_input, upstream):
    _same_shape(ctx_input, upstream, "relu_vjp")
    return upstream * (ctx_input > 0)


def tanh_forward(x):
    return np.tanh(x)


def tanh_vjp(ctx_output, upstream):
    _same_shape(ctx_output, upstream, "tanh_vjp")
    return upstream * (1 - ctx_output * ctx_output)


###### dropout ######

def dropout_mask(key, shape, p):
    """
    Keep mask (uint8) drawn from the slot's stream: element kept iff its
    uniform draw is >= p.
    """

    n = int(np.prod(shape, dtype=np.int64))
    return (uniforms(key, n) >= p).astype(np.uint8).reshape(shape)


def dropout_forward(x, mask, keep_prob):
    _same_shape(x, mask, "dropout")
    return x * mask.astype(x.dtype) / x.dtype.type(keep_prob)


def dropout_vjp(ctx_mask, upstream, keep_prob):
    _same_shape(ctx_mask, upstream, "dropout_vjp")
    if ctx_mask.size and (ctx_mask.max() > 1 or ctx_mask.min() < 0):
        raise SlotError("dropout_vjp: mask entries must be 0 or 1")
    return upstream * ctx_mask.astype(upstream.dtype) / \
        upstream.dtype.type(keep_prob)


###### maxpool2d ######

def maxpool2d_forward(x, channels, height, width, kernel, stride):
    """
    x is (batch, channels*height*width). Returns (output, indices), both
    (batch, channels*out_h*out_w); indices hold the flat input position of
    each window's first maximum in row-major scan order.
    """

    B = x.shape[0]
    if x.shape[1] != channels * height * width:
        raise ShapeError("maxpool2d: input width %d, expected %d"
                         % (x.shape[1], channels * height * width))

    grid = x.reshape(B, channels, height, width)
    windows = sliding_window_view(grid, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    windows = windows.reshape(B, channels, out_h, out_w, kernel * kernel)

    local = np.argmax(windows, axis=-1)
    output = np.take_along_axis(windows, local[..., None], axis=-1)[..., 0]

    rows = np.arange(out_h)[None, None, :, None] * stride + local // kernel
    cols = np.arange(out_w)[None, None, None, :] * stride + local % kernel
    chan = np.arange(channels)[None, :, None, None]
    indices = (chan * height + rows) * width + cols

    return output.reshape(B, -1), indices.reshape(B, -1).astype(np.int64)


def maxpool2d_vjp(ctx_indices, upstream, input_width):
    _same_shape(ctx_indices, upstream, "maxpool2d_vjp")
    if ctx_indices.size and (ctx_indices.min() < 0
                             or ctx_indices.max() >= input_width):
        raise SlotError("maxpool2d_vjp: index out of range")

    B = upstream.shape[0]
    grad = np.zeros((B, input_width), dtype=upstream.dtype)
    batch_rows = np.broadcast_to(np.arange(B)[:, None], ctx_indices.shape)
    np.add.at(grad, (batch_rows, ctx_indices), upstream)
    return grad


###### losses ######

def class_labels(labels, batch_size, num_classes):
    """
    Accepts class indices or one-hot rows; returns int64 indices.
    """

    labels = np.asarray(labels)
    if labels.ndim == 2:
        if labels.shape != (batch_size, num_classes):
            raise ShapeError("one-hot labels %s, expected %s"
                             % (labels.shape, (batch_size, num_classes)))
        labels = np.argmax(labels, axis=1)

    labels = labels.reshape(-1)
    if labels.size != batch_size:
        raise ShapeError("%d labels for a batch of %d"
                         % (labels.size, batch_size))
    if np.any(labels != np.floor(labels)):
        raise ShapeError("labels must be integers")

    labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ShapeError("label out of range for %d classes" % (num_classes))
    return labels


def softmax_ce_forward(logits, labels):
    """
    Returns (loss, probs): mean over the batch of -log softmax[label].
    """

    B, K = logits.shape
    labels = class_labels(labels, B, K)

    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(B), labels].mean()
    return float(loss), np.exp(log_probs)


def softmax_ce_vjp(ctx_probs, labels, upstream=1.0):
    B, K = ctx_probs.shape
    labels = class_labels(labels, B, K)

    grad = ctx_probs.copy()
    grad[np.arange(B), labels] -= 1
    return grad * (ctx_probs.dtype.type(upstream) / B)


def mse_forward(prediction, target):
    """
    Returns (loss, residual): half the squared error summed over features,
    averaged over the batch.
    """

    target = np.asarray(target, dtype=prediction.dtype).reshape(
        prediction.shape[0], -1)
    _same_shape(prediction, target, "mse_loss")

    residual = prediction - target
    loss = 0.5 * float(np.sum(residual.astype(np.float64) ** 2)) / \
        prediction.shape[0]
    return loss, residual


def mse_vjp(ctx_residual, upstream=1.0):
    B = ctx_residual.shape[0]
    return ctx_residual * (ctx_residual.dtype.type(upstream) / B)
