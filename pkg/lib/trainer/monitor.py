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

from collections import namedtuple

import numpy as np

from lib.utils.constants import (ALERT_EPSILON, DEFAULT_ALERT_THRESHOLD,
                                 DEFAULT_GRAD_EMA_DECAY)

# running means of g and of |g|^2; count 0 means nothing seen yet
GradVarianceState = namedtuple("GradVarianceState",
                               ["mean", "sq_norm", "count"])


def initial_state():
    return GradVarianceState(None, 0.0, 0)


def update_grad_variance_ema(state, gradient, decay=DEFAULT_GRAD_EMA_DECAY):
    g = np.asarray(gradient, dtype=np.float64).ravel()
    sq = float(g.dot(g))

    if not state.count:
        return GradVarianceState(g.copy(), sq, 1)

    if state.mean.shape != g.shape:
        raise ValueError("Gradient size changed from %d to %d"
                         % (state.mean.size, g.size))

    return GradVarianceState(decay * state.mean + (1.0 - decay) * g,
                             decay * state.sq_norm + (1.0 - decay) * sq,
                             state.count + 1)


def grad_variance(state):
    """
    E|g|^2 - |E g|^2 from the running means, clamped at 0.
    """

    if not state.count:
        return 0.0
    return max(state.sq_norm - float(state.mean.dot(state.mean)), 0.0)


class GradVarianceTracker(object):
    """
    Online estimate of the total gradient variance across steps.
    """

    def __init__(self, decay=DEFAULT_GRAD_EMA_DECAY):
        self.decay = decay
        self.state = initial_state()

    def update(self, gradient):
        self.state = update_grad_variance_ema(self.state, gradient,
                                              self.decay)
        return self.variance()

    def variance(self):
        return grad_variance(self.state)


def compression_alert(predicted, grad_var, threshold=DEFAULT_ALERT_THRESHOLD):
    """
    True when the predicted compression variance exceeds 'threshold' times
    the gradient variance.
    """

    return predicted > threshold * max(grad_var, ALERT_EPSILON)
