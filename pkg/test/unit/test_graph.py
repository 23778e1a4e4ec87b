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

import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from lib.tape.graph import SEGMENT_INPUT, ModelGraph, mlp_spec
from lib.utils.constants import Precision, SlotKind
from lib.utils.exceptions import ConfigError

MLP = {
    "name": "mlp",
    "input_dim": 4,
    "nodes": [
        {"kind": "linear", "out": 8},
        {"kind": "tanh"},
        {"kind": "linear", "out": 8, "segment": True},
        {"kind": "tanh"},
        {"kind": "linear", "out": 3, "segment": True},
        {"kind": "softmax_ce_loss"},
    ],
}


class ModelGraphTest(unittest.TestCase):
    def setUp(self):
        self.model = ModelGraph(MLP)

    def test_shapes(self):
        self.assertEqual(len(self.model.nodes), 6)
        self.assertEqual(self.model.num_classes, 3)
        self.assertEqual(self.model.param_names(),
                         ["linear0.weight", "linear0.bias", "linear2.weight",
                          "linear2.bias", "linear4.weight", "linear4.bias"])

    def test_layout(self):
        layout = self.model.layout(10)
        self.assertEqual([s.label for s in layout],
                         ["linear0.input", "linear0.weight", "tanh1.output",
                          "linear2.input", "linear2.weight", "tanh3.output",
                          "linear4.input", "linear4.weight",
                          "softmax_ce_loss5.probs", "softmax_ce_loss5.labels",
                          "linear2.segment_input", "linear4.segment_input"])
        self.assertEqual([s.slot_id for s in layout], list(range(12)))

        # the tanh output is the next linear's input
        self.assertEqual(layout[3].canonical, 2)
        self.assertEqual(layout[6].canonical, 5)
        self.assertEqual(layout[10].canonical, 2)
        self.assertEqual(layout[1].kind, SlotKind.PARAMETER)
        self.assertEqual(layout[9].kind, SlotKind.INTEGER_STATE)
        self.assertEqual(layout[9].dims, 10)
        self.assertEqual(layout[10].role, SEGMENT_INPUT)

    def test_activation_slots(self):
        slots = [s.slot_id for s in self.model.activation_slots(10)]
        self.assertEqual(slots, [0, 2, 5, 8])
        self.assertEqual(self.model.context_dims(10), 10 * (4 + 8 + 8 + 3))

    def test_pinned(self):
        self.assertEqual(self.model.pinned_slots(10), [8])
        self.assertEqual(self.model.pinned_slots(10, pin_loss_head=False), [])
        # with 3 rows the input (12) and the probs (9) are too small
        self.assertEqual(self.model.pinned_slots(3, pin_loss_head=False), [0, 8])

    def test_segments(self):
        self.assertEqual(self.model.segments(), [(0, 2), (2, 4), (4, 6)])
        plain = dict(MLP, nodes=[dict(n, segment=False) for n in MLP["nodes"]])
        self.assertRaises(ConfigError, ModelGraph(plain).segments)

    def test_init_params(self):
        params = self.model.init_params(3, Precision.DOUBLE)
        self.assertEqual(params["linear0.weight"].shape, (8, 4))
        self.assertEqual(params["linear4.bias"].dtype, np.float64)
        again = self.model.init_params(3, Precision.DOUBLE)
        np.testing.assert_array_equal(params["linear2.weight"],
                                      again["linear2.weight"])
        self.assertEqual(self.model.init_params(3)["linear0.bias"].dtype,
                         np.float32)

    def test_stream_keys(self):
        keys = self.model.stream_keys(10, seed=5, offset=7)
        self.assertEqual(len(keys), 12)
        self.assertEqual(keys[4].stream_id, 4)
        self.assertEqual(keys[4].offset, 7)

    def test_loss_scale(self):
        self.assertEqual(self.model.loss_scale, 1.0)
        self.assertEqual(self.model.with_loss_scale(2.0).loss_scale, 2.0)

    def test_smooth(self):
        self.assertTrue(self.model.is_smooth())
        relu = dict(MLP, nodes=[{"kind": "linear", "out": 3}, {"kind": "relu"},
                                {"kind": "softmax_ce_loss"}])
        self.assertFalse(ModelGraph(relu).is_smooth())


class ModelValidationTest(unittest.TestCase):
    def test_unknown_key(self):
        spec = dict(MLP, colour="red")
        self.assertRaises(ConfigError, ModelGraph, spec)

    def test_unknown_kind(self):
        spec = dict(MLP, nodes=[{"kind": "conv2d"}, {"kind": "mse_loss"}])
        self.assertRaises(ConfigError, ModelGraph, spec)

    def test_loss_placement(self):
        no_loss = dict(MLP, nodes=[{"kind": "linear", "out": 2}])
        self.assertRaises(ConfigError, ModelGraph, no_loss)

        early = dict(MLP, nodes=[{"kind": "mse_loss"}, {"kind": "linear", "out": 2},
                                 {"kind": "mse_loss"}])
        self.assertRaises(ConfigError, ModelGraph, early)

    def test_mlp_widths(self):
        model = ModelGraph(mlp_spec(4, (8, 6), 3, depth=2))
        self.assertEqual([n.out_dim for n in model.nodes[:5]],
                         [8, 8, 6, 6, 3])
        self.assertEqual(mlp_spec(4, 8, 3), mlp_spec(4, [8, 8], 3))
        self.assertRaises(ConfigError, mlp_spec, 4, (8, 6), 3, 3)

    def test_pool_shape(self):
        spec = {"input_dim": 16, "nodes": [
            {"kind": "maxpool2d", "channels": 1, "height": 4, "width": 3,
             "kernel": 2},
            {"kind": "mse_loss"}]}
        self.assertRaises(ConfigError, ModelGraph, spec)

        spec["nodes"][0]["width"] = 4
        model = ModelGraph(spec)
        self.assertEqual(model.nodes[0].out_dim, 4)

    def test_load(self):
        tmpdir = tempfile.mkdtemp()
        try:
            path = os.path.join(tmpdir, "m.json")
            with open(path, "w") as f:
                json.dump(MLP, f)
            self.assertEqual(ModelGraph.load(path).name, "mlp")
            self.assertRaises(ConfigError, ModelGraph.load,
                              os.path.join(tmpdir, "missing.json"))
        finally:
            shutil.rmtree(tmpdir)


if __name__ == "__main__":
    unittest.main()
