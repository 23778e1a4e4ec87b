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


class PrefixDict(object):
    """
    Dictionary whose lookups match every key starting with the given
    prefix. Used to resolve abbreviated command names ("tr" -> "train").
    """

    def __init__(self):
        self._kv = {}

    def __setitem__(self, key, value):
        return self.add(key, value)

    def __getitem__(self, key):
        return self.get(key)

    def __delitem__(self, key):
        self.remove(key)

    def __str__(self):
        return str(self._kv)

    def __len__(self):
        return len(self._kv)

    def __contains__(self, k):
        try:
            self.get_key(k)
            return True
        except KeyError:
            return False

    def add(self, key, data):
        self._kv[key] = data

    def keys(self):
        return list(self._kv.keys())

    def get_key(self, prefix):
        if prefix in self._kv:
            # exact match wins over longer keys sharing the prefix
            return [prefix]

        keys = sorted(k for k in self._kv if k.startswith(prefix))
        if not keys:
            raise KeyError("Unable to find keys with '%s'" % (prefix))
        return keys

    def get(self, prefix):
        return [self._kv[k] for k in self.get_key(prefix)]

    def remove(self, prefix):
        keys = self.get_key(prefix)

        if len(keys) > 1:
            raise KeyError(
                "Prefix may not be ambiguous for removal: %s" % (prefix))

        return self._kv.pop(keys[0])

    def get_prefix(self, key):
        """
        Shortest unambiguous prefix of an existing key.
        """

        if key not in self._kv:
            raise KeyError("Unable to find keys with '%s'" % (key))

        for i in range(1, len(key) + 1):
            if len([k for k in self._kv if k.startswith(key[:i])]) == 1:
                return key[:i]
        return key
