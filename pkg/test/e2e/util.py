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

import io
import os

import mock
import numpy as np

import actlab

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
CONF_DIR = os.path.join(ROOT, "conf")

# a run small enough for a test: 40 steps, refresh every 10
SMALL = ["--set", "train.steps=40", "--set", "train.batch-size=32",
         "--set", "train.hidden=32", "--set", "train.adapt-interval=10",
         "--set", "train.group-size=64", "--set", "train.seed-pairs=2",
         "--set", "dataset.samples=256", "--set", "dataset.features=8"]


def run_cli(*argv):
    """
    (exit code, stdout) of one actlab invocation.
    """

    with mock.patch("sys.stdout", new_callable=io.StringIO) as out:
        with np.errstate(over="ignore", invalid="ignore"):
            rv = actlab.main(["--no-color"] + list(argv))
    return rv, out.getvalue()


def parse_vertical(output, title):
    """
    Key/value pairs of the vertical table titled 'title'.
    """

    lines = output.split("\n")
    start = [i for i, l in enumerate(lines) if title in l and "~" in l]
    if not start:
        return {}

    values = {}
    for line in lines[start[0] + 1:]:
        if ":" not in line:
            break
        key, value = line.split(":", 1)
        values[key.strip()] = value.strip()
    return values
