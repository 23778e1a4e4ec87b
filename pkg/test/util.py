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

import mock


def capture_stdout(func, *args, **kwargs):
    """
    Everything func prints to stdout, as one string.
    """

    with mock.patch("sys.stdout", new_callable=io.StringIO) as out:
        func(*args, **kwargs)
    return out.getvalue()
