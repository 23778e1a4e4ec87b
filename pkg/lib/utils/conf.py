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

import collections.abc
import copy
import json
import os

import toml
from jsonschema import ValidationError, validate

from lib.utils.constants import (DEFAULT_ADAPT_INTERVAL,
                                 DEFAULT_ALERT_THRESHOLD,
                                 DEFAULT_GRAD_EMA_DECAY, DEFAULT_GROUP_SIZE,
                                 DEFAULT_LADDER, DEFAULT_SEED_PAIRS,
                                 DEFAULT_SENSITIVITY_DECAY, TrainMode)
from lib.utils.exceptions import ConfigError
from lib.utils.util import parse_value


class _Namespace(object):
    def __init__(self, adict):
        self.__dict__.update(adict)

    def __repr__(self):
        return "%s(%s)" % (self.__class__.__name__,
                           json.dumps(self.__dict__, sort_keys=True,
                                      default=str))


class TrainConfig(_Namespace):
    pass


# Reference run: adaptive 4 bits/dim on two Gaussian blobs with the
# built-in tanh MLP ("model" empty)
_confdefault = {
    "train": {
        "mode": TrainMode.adaptive_b,
        "steps": 500,
        "batch-size": 64,
        "learning-rate": 0.1,
        "momentum": 0.0,
        "avg-bits": 4.0,
        "ladder": list(DEFAULT_LADDER),
        "group-size": DEFAULT_GROUP_SIZE,
        "adapt-interval": DEFAULT_ADAPT_INTERVAL,
        "alert-threshold": DEFAULT_ALERT_THRESHOLD,
        "grad-ema-decay": DEFAULT_GRAD_EMA_DECAY,
        "sensitivity-decay": DEFAULT_SENSITIVITY_DECAY,
        "seed-pairs": DEFAULT_SEED_PAIRS,
        "pin-loss-head": True,
        "precision": "SINGLE",
        "seed": 0,
        "log-interval": 1,
        "checkpoint-interval": 0,
        "hidden": 64,
    },
    "dataset": {
        "name": "two_gaussians",
        "samples": 1024,
        "features": 16,
        "classes": 2,
        "noise": 0.1,
        "separation": 6.0,
        "path": "",
        "labels-path": "",
        "limit": 0,
        "seed": 0,
    },
    "bench": {
        "avg-bits": 4.0,
        "draws": 200,
        "batch-size": 64,
        "hidden": 128,
    },
    "model": "",
}

_confspec = '''{
    "$schema": "http://json-schema.org/draft-04/schema#",
    "title" : "actlabconf",
    "type" : "object",
    "additionalProperties" : false,
    "properties": {
        "train" : { "$ref" : "#/definitions/train" },
        "dataset" : { "$ref" : "#/definitions/dataset" },
        "bench" : { "$ref" : "#/definitions/bench" },
        "model" : { "type" : ["object", "string"] },
        "include" : {
            "type" : "object",
            "additionalProperties" : false,
            "properties" : {
                "file" : { "type" : "string" }
            }
        }
    },
    "definitions" : {
        "bits" : { "type" : "integer", "enum" : [1, 2, 3, 4, 5, 6, 7, 8, 32] },
        "train" : {
            "type" : "object",
            "additionalProperties" : false,
            "properties" : {
                "mode" : { "enum" : ["fp32", "fixed_b", "adaptive_b",
                                     "checkpointed_adaptive"] },
                "steps" : { "type" : "integer", "minimum" : 1 },
                "batch-size" : { "type" : "integer", "minimum" : 1 },
                "learning-rate" : { "type" : "number", "minimum" : 0,
                                    "exclusiveMinimum" : true },
                "momentum" : { "type" : "number", "minimum" : 0,
                               "maximum" : 1, "exclusiveMaximum" : true },
                "avg-bits" : { "type" : "number", "minimum" : 1,
                               "maximum" : 32 },
                "ladder" : { "type" : "array", "minItems" : 1,
                             "items" : { "$ref" : "#/definitions/bits" } },
                "group-size" : { "type" : "integer", "minimum" : 2 },
                "adapt-interval" : { "type" : "integer", "minimum" : 1 },
                "alert-threshold" : { "type" : "number", "minimum" : 0,
                                      "exclusiveMinimum" : true,
                                      "maximum" : 1 },
                "grad-ema-decay" : { "type" : "number", "minimum" : 0,
                                     "maximum" : 1, "exclusiveMaximum" : true },
                "sensitivity-decay" : { "type" : "number", "minimum" : 0,
                                        "maximum" : 1,
                                        "exclusiveMaximum" : true },
                "seed-pairs" : { "type" : "integer", "minimum" : 1 },
                "pin-loss-head" : { "type" : "boolean" },
                "precision" : { "enum" : ["SINGLE", "DOUBLE"] },
                "seed" : { "type" : "integer", "minimum" : 0 },
                "log-interval" : { "type" : "integer", "minimum" : 1 },
                "checkpoint-interval" : { "type" : "integer", "minimum" : 0 },
                "hidden" : { "type" : "integer", "minimum" : 1 }
            }
        },
        "dataset" : {
            "type" : "object",
            "additionalProperties" : false,
            "properties" : {
                "name" : { "enum" : ["two_gaussians", "two_moons",
                                     "teacher_regression", "idx"] },
                "samples" : { "type" : "integer", "minimum" : 2 },
                "features" : { "type" : "integer", "minimum" : 1 },
                "classes" : { "type" : "integer", "minimum" : 1 },
                "noise" : { "type" : "number", "minimum" : 0 },
                "separation" : { "type" : "number", "minimum" : 0 },
                "path" : { "type" : "string" },
                "labels-path" : { "type" : "string" },
                "limit" : { "type" : "integer", "minimum" : 0 },
                "seed" : { "type" : "integer", "minimum" : 0 }
            }
        },
        "bench" : {
            "type" : "object",
            "additionalProperties" : false,
            "properties" : {
                "avg-bits" : { "type" : "number", "minimum" : 1,
                               "maximum" : 8 },
                "draws" : { "type" : "integer", "minimum" : 2 },
                "batch-size" : { "type" : "integer", "minimum" : 1 },
                "hidden" : { "type" : "integer", "minimum" : 1 }
            }
        }
    }
}'''


def _getdefault():
    return copy.deepcopy(_confdefault)


def _parse(fname, text):
    if fname.endswith(".toml"):
        return toml.loads(text)
    return json.loads(text)


def _validate(conf_dict, where):
    try:
        validate(conf_dict, json.loads(_confspec))
    except ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path)
        raise ConfigError("Config error in %s%s: %s"
                          % (where, " at " + path if path else "",
                             str(e).split("\n")[0]))


def _loadfile(fname, logger=None):
    """
    Reads one config file (TOML for *.toml, JSON otherwise) and the file
    named by its include section, included values first.
    """

    if not os.path.exists(fname):
        raise ConfigError("Config file read error: %s No such file" % (fname))

    try:
        with open(fname) as f:
            conf_dict = _parse(fname, f.read())
    except (ValueError, toml.TomlDecodeError) as e:
        raise ConfigError("Config file parse error: %s %s"
                          % (fname, str(e).split("\n")[0]))

    if not isinstance(conf_dict, dict):
        raise ConfigError("Config file %s must hold an object" % (fname))

    _validate(conf_dict, fname)

    include = conf_dict.pop("include", {})
    if "file" in include:
        f = os.path.expanduser(include["file"])
        if not os.path.isabs(f):
            f = os.path.join(os.path.dirname(os.path.abspath(fname)), f)
        merged = _loadfile(f, logger)
        _merge(merged, conf_dict)
        conf_dict = merged

    return conf_dict


def _merge(dct, merge_dct, ignore_false=False):
    for k, v in merge_dct.items():
        if (k in dct and isinstance(dct[k], dict)
                and isinstance(merge_dct[k], collections.abc.Mapping)):
            _merge(dct[k], merge_dct[k], ignore_false=ignore_false)
        else:
            if merge_dct[k] is not None and (not ignore_false or merge_dct[k] is not False):
                dct[k] = copy.deepcopy(merge_dct[k])


def _flatten(conf_dict, section):
    return dict((k.replace("-", "_"), v)
                for k, v in conf_dict.get(section, {}).items())


def apply_overrides(conf_dict, overrides):
    """
    Applies "section.key=value" strings; values are cast by parse_value.
    A bare "model=path" replaces the model reference.
    """

    for item in overrides or []:
        if "=" not in item:
            raise ConfigError("Override %s is not key=value" % (item))

        key, value = item.split("=", 1)
        key = key.strip()
        value = parse_value(value)

        if key == "model":
            conf_dict["model"] = value
            continue

        if "." not in key:
            raise ConfigError("Override key %s is not section.key" % (key))

        section, name = key.split(".", 1)
        name = name.replace("_", "-")
        if not isinstance(conf_dict.get(section), dict):
            raise ConfigError("Unknown config section %s" % (section))
        conf_dict[section][name] = value

    return conf_dict


def loadconfig(cli_args, logger=None):
    """
    Defaults < config file < --set overrides < --seed. Validated as a
    whole, so any unknown key aborts before compute.
    """

    conf_dict = _getdefault()

    config_file = getattr(cli_args, "config", None)
    if config_file:
        _merge(conf_dict, _loadfile(config_file, logger))
        if logger:
            logger.debug("Config file: %s", config_file)

    apply_overrides(conf_dict, getattr(cli_args, "set", None))

    seed = getattr(cli_args, "seed", None)
    if seed is not None:
        conf_dict["train"]["seed"] = seed

    _validate(conf_dict, config_file or "overrides")
    return conf_dict


def train_config(conf_dict=None, out_dir=None):
    """
    TrainConfig from a (partial) config dict merged over the defaults.
    """

    merged = _getdefault()
    if conf_dict:
        _merge(merged, conf_dict)
    _validate(merged, "config")

    values = _flatten(merged, "train")
    values["ladder"] = tuple(sorted(set(values["ladder"])))
    values["dataset"] = _flatten(merged, "dataset")
    values["bench"] = _flatten(merged, "bench")
    values["model"] = merged["model"]
    values["out_dir"] = out_dir
    return TrainConfig(values)


def print_config_help():
    print("\n")
    print("Usage: actlab [OPTIONS] COMMAND [ARGS]")
    print("---------------------------------------------------------------------------------------\n")

    print(" -V --version         Show the version of actlab and exit")
    print(" -E --help            Show program usage.")
    print(" --config=path        Config file (TOML for *.toml, JSON syntax otherwise).")
    print(" --out=dir            Directory for metrics, checkpoints and reports.")
    print(" --set section.key=value\n"
          "                      Override one config value. Repeatable.\n"
          "                      e.g. --set train.avg-bits=2 --set dataset.samples=256")
    print(" --seed=N             Override train.seed.")
    print(" --no-color           Disable colored output.")
    print(" -v --verbose         Debug logging.")
    print(" --profile            Run the command under yappi and print function stats.")

    print_config_file_option()


def print_config_file_option():
    print("\n")
    print("Configuration File Allowed Options")
    print("----------------------------------\n")
    print("[train]")
    print(" mode                 fp32, fixed_b, adaptive_b or checkpointed_adaptive.\n"
          "                      Default: " + _confdefault["train"]["mode"])
    print(" steps, batch-size, learning-rate, momentum\n"
          "                      SGD loop. Defaults: 500, 64, 0.1, 0.0")
    print(" avg-bits             Average bits/dim over compressed activations. Default: 4")
    print(" ladder               Admissible widths for the allocator. Default: [2, 3, 4, 8]")
    print(" group-size           Elements per quantization group. Default: 256")
    print(" adapt-interval       Steps between sensitivity refreshes. Default: 100")
    print(" alert-threshold      Alert when predicted compression variance exceeds\n"
          "                      this fraction of the gradient variance. Default: 0.5")
    print(" grad-ema-decay, sensitivity-decay, seed-pairs, pin-loss-head,\n"
          " precision, seed, log-interval, checkpoint-interval, hidden")
    print("")
    print("[dataset]")
    print(" name                 two_gaussians, two_moons, teacher_regression or idx")
    print(" samples, features, classes, noise, separation, seed")
    print(" path, labels-path, limit\n"
          "                      IDX image and label files for name = idx")
    print("")
    print("[bench]")
    print(" avg-bits, draws, batch-size, hidden")
    print("")
    print("model                 Model description (JSON object) or path to one.\n"
          "                      Empty selects the built-in tanh MLP.")
    print("")
    print("[include]")
    print(" file                 Config file read first, then overridden by this one.")


def get_cli_args(argv=None):
    import argparse

    parser = argparse.ArgumentParser(add_help=False, conflict_handler='resolve')
    add_fn = parser.add_argument

    add_fn("-V", "--version", action="store_true")
    add_fn("-E", "--help", action="store_true")
    add_fn("--config")
    add_fn("--out")
    add_fn("--set", action="append", default=[])
    add_fn("--seed", type=int)
    add_fn("--no-color", action="store_true")
    add_fn("-v", "--verbose", action="store_true")
    add_fn("--profile", action="store_true")
    add_fn("command", nargs="*")

    try:
        return parser.parse_intermixed_args(argv)
    except SystemExit:
        raise ConfigError("Invalid command line: %s" % (" ".join(argv or [])))
