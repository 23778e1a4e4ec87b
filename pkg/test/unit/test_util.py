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

import os
import shutil
import tempfile
import threading
import unittest

import numpy as np

from lib.utils import filesize, util


class ConcurrentMapTest(unittest.TestCase):
    def test_order(self):
        value = list(range(50))
        expected = [v * v for v in value]
        self.assertEqual(util.concurrent_map(lambda v: v * v, value, 4), expected)
        self.assertEqual(util.concurrent_map(lambda v: v * v, value, 1), expected)
        self.assertEqual(util.concurrent_map(lambda v: v, [], 4), [])

    def test_uses_threads(self):
        seen = set()

        def record(v):
            seen.add(threading.current_thread().name)
            return v

        util.concurrent_map(record, list(range(20)), 1)
        self.assertEqual(seen, set([threading.current_thread().name]))

    def test_error(self):
        def fail(v):
            if v == 3:
                raise KeyError(v)
            return v

        self.assertRaises(KeyError, util.concurrent_map, fail, list(range(8)), 3)

    def test_max_threads(self):
        old = os.environ.get("ACTC_THREADS")
        try:
            os.environ["ACTC_THREADS"] = "7"
            self.assertEqual(util.max_threads(), 7)
            os.environ["ACTC_THREADS"] = "x"
            self.assertEqual(util.max_threads(3), 3)
            os.environ["ACTC_THREADS"] = "0"
            self.assertEqual(util.max_threads(), 1)
        finally:
            if old is None:
                del os.environ["ACTC_THREADS"]
            else:
                os.environ["ACTC_THREADS"] = old


class ParseValueTest(unittest.TestCase):
    def test_values(self):
        self.assertEqual(util.parse_value("3"), 3)
        self.assertEqual(util.parse_value("2.5"), 2.5)
        self.assertEqual(util.parse_value("true"), True)
        self.assertEqual(util.parse_value("True"), True)
        self.assertEqual(util.parse_value("[2, 4]"), [2, 4])
        self.assertEqual(util.parse_value("adaptive_b"), "adaptive_b")
        self.assertEqual(util.parse_value("conf/models/mlp.json"),
                         "conf/models/mlp.json")


class CsvTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_cells(self):
        path = os.path.join(self.tmpdir, "t.csv")
        util.write_csv(path, ["a", "b", "c"],
                       [[np.float64(0.1), np.int64(3), True],
                        {"a": 1.5, "c": "x"}])
        with open(path) as f:
            self.assertEqual(f.read(), "a,b,c\n0.1,3,1\n1.5,,x\n")

        rows = util.read_csv(path)
        self.assertEqual(rows[0]["a"], "0.1")
        self.assertEqual(rows[1]["c"], "x")

    def test_checksum(self):
        a = np.arange(10.0)
        self.assertEqual(util.checksum64(a), util.checksum64(a.copy()))
        b = a.copy()
        b[3] = -1
        self.assertNotEqual(util.checksum64(a), util.checksum64(b))


class FileSizeTest(unittest.TestCase):
    def test_size(self):
        self.assertEqual(filesize.size(0), "0.000 B")
        self.assertEqual(filesize.size(2048), "2.000 KB")
        self.assertEqual(filesize.size(1500, filesize.si), "1.500K")
        self.assertEqual(filesize.size(90, filesize.time), "1.500 mins")

    def test_bits(self):
        self.assertEqual(filesize.bits(8 * 1024 * 1024), "1.000 MB")


if __name__ == "__main__":
    unittest.main()
