# Test collection wiring: mirror `python -m unittest discover -t .` by putting
# the project root first on sys.path, so `test.*` resolves to this project's
# test package rather than the stdlib `test` package.
import os
import sys

_ROOT = os.path.dirname(os.path.abspath(__file__))
if sys.path[:1] != [_ROOT]:
    sys.path.insert(0, _ROOT)
_mod = sys.modules.get("test")
if _mod is not None and not os.path.dirname(
        os.path.abspath(getattr(_mod, "__file__", "") or "")).startswith(_ROOT):
    for _name in [n for n in sys.modules if n == "test" or n.startswith("test.")]:
        del sys.modules[_name]
