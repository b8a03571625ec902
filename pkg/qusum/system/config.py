"""Scenario configuration for the qusum command line: presets, key = value
parameter files (or JSON), and validation.
"""

import datetime
import json
import os
import os.path as op
import re
from typing import Dict, List, Tuple, Union

import numpy as np

from ..info import __version__
from .exceptions import ConfigError
from .utils import filedigest, writejson

MEASUREMENTS = ("hayashi", "optimized", "variational-report")

# key -> (kind, default)
FIELDS = {
    "r0": ("float", 0.9),
    "r1": ("float", 0.9),
    "theta": ("angle", np.pi / 4),
    "l_list": ("intlist", [1, 5, 50]),
    "measurement": ("str", "optimized"),
    "h_list": ("floatlist", [3.0, 4.0, 5.0, 6.0]),
    "trials": ("int", 1000),
    "cap": ("int", 10**7),
    "seed": ("int", 0),
    "family": ("family", None),
    "truths": ("family", None),
    "bias_pre": ("float", None),
    "bias_post": ("float", None),
    "alpha": ("floatlist", [0.5, 1.5, 2.0]),
    "eps": ("floatlist", [0.1]),
    "nu": ("int", 10**4),
    "steps": ("int", 2 * 10**4),
    "trajectories": ("int", 0),
    "straddle": ("bool", False),
    "max_censored": ("float", 1.0),
    "threads": ("int", 1),
}

PRESETS = {
    "fig2": {
        "r0": 0.9,
        "r1": 0.9,
        "theta": np.pi / 4,
        "l_list": [1, 5, 50],
        "measurement": "optimized",
        "h_list": [3.0, 4.0, 5.0, 6.0],
        "trials": 1000,
        "trajectories": 5,
    },
    "sm-classical": {
        "bias_pre": 0.2,
        "bias_post": 0.25,
        "l_list": [1],
        "h_list": [6.0, 22.0],
        "nu": 10**4,
        "steps": 2 * 10**4,
        "trials": 200,
        "trajectories": 20,
    },
    "fast-accept": {
        "bias_pre": 0.2,
        "bias_post": 0.6,
        "l_list": [1],
        "h_list": [2.0, 3.0, 4.0, 6.0],
        "trials": 2000,
        "cap": 10**6,
    },
}

_ANGLE = re.compile(r"^\s*(?:(?P<num>[-+]?[0-9.eE+-]+)\s*\*?\s*)?(?P<pi>pi)?\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$")


def parse_angle(text: str) -> float:
    """Reads an angle such as ``0.785``, ``pi/4`` or ``3*pi/4``."""
    m = _ANGLE.match(str(text))
    if m is None or not (m.group("num") or m.group("pi")):
        raise ValueError("cannot read angle {!r}".format(text))
    val = float(m.group("num")) if m.group("num") else 1.0
    if m.group("pi"):
        val *= np.pi
    elif m.group("den") and not m.group("num"):
        raise ValueError("cannot read angle {!r}".format(text))
    if m.group("den"):
        val /= float(m.group("den"))
    return val


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("cannot read boolean {!r}".format(text))


def _parse_family(text) -> List[Tuple[float, float]]:
    if isinstance(text, (list, tuple)):
        return [(float(a), float(b)) for a, b in text]
    out = []
    for entry in str(text).split(";"):
        if not entry.strip():
            continue
        r1, sep, theta = entry.partition(":")
        if not sep:
            raise ValueError("family entries are r1:theta, got {!r}".format(entry.strip()))
        out.append((float(r1), parse_angle(theta)))
    return out


def _toint(value) -> int:
    if isinstance(value, bool):
        raise ValueError("not an integer")
    f = float(value)
    if not np.isfinite(f) or f != int(f):
        raise ValueError("not an integer")
    return int(value) if isinstance(value, int) else int(f)


def _split(text) -> list:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [x for x in (s.strip() for s in str(text).split(",")) if x]


def convert(key: str, value, line: Union[int, None] = None):
    """Converts a raw value to the type of `key`."""
    if key not in FIELDS:
        raise ConfigError("unknown key", key, line)
    kind = FIELDS[key][0]
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return _toint(value)
        if kind == "angle":
            return float(value) if isinstance(value, (int, float)) else parse_angle(value)
        if kind == "str":
            return str(value).strip()
        if kind == "bool":
            return value if isinstance(value, bool) else _parse_bool(value)
        if kind == "intlist":
            return [_toint(x) for x in _split(value)]
        if kind == "floatlist":
            return [float(x) for x in _split(value)]
        if kind == "family":
            return _parse_family(value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError("invalid value {!r} ({})".format(value, err), key, line) from None
    raise ConfigError("unsupported field kind {}".format(kind), key, line)


def read_parameter_file(path: str) -> Tuple[Dict[str, object], Dict[str, int]]:
    """Reads a flat ``key = value`` parameter file (``#`` starts a comment)
    or a JSON object when the name ends in ``.json``. A run manifest is
    accepted as well; its ``config`` object is read and null values keep
    their defaults.

    Parameters
    ----------
    path : str
        Path to the parameter file

    Returns
    -------
    values : dict
        Converted values per key
    lines : dict
        Line number per key (empty for JSON)
    """
    if not op.exists(path):
        raise OSError("Configuration file {} does not exist".format(path))
    values, lines = {}, {}
    if path.lower().endswith(".json"):
        with open(path) as fp:
            try:
                raw = json.load(fp)
            except json.JSONDecodeError as err:
                raise ConfigError("invalid JSON: {}".format(err)) from None
        if not isinstance(raw, dict):
            raise ConfigError("JSON configuration must be an object")
        # run manifests carry the configuration under "config"
        if isinstance(raw.get("config"), dict):
            raw = raw["config"]
        for key, val in raw.items():
            if val is None:
                continue
            values[key] = convert(key, val)
        return values, lines
    with open(path) as fp:
        for num, raw in enumerate(fp, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            key, sep, val = text.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError("expected 'key = value', got {!r}".format(text), line=num)
            values[key] = convert(key, val.strip(), num)
            lines[key] = num
    return values, lines


class ScenarioConfig:
    """Validated experiment configuration.

    Values come from the defaults, then a preset, then a parameter file,
    then explicit overrides (command-line flags); later sources win.
    """

    def __init__(self, values: Union[Dict[str, object], None] = None, lines: Union[Dict[str, int], None] = None):
        self._lines = dict(lines or {})
        for key, (_, default) in FIELDS.items():
            setattr(self, key, list(default) if isinstance(default, list) else default)
        for key, val in (values or {}).items():
            setattr(self, key, convert(key, val, self._lines.get(key)))
        self.validate()

    @classmethod
    def build(
        cls,
        preset: Union[str, None] = None,
        path: Union[str, None] = None,
        overrides: Union[Dict[str, object], None] = None,
    ) -> "ScenarioConfig":
        """Merges preset, parameter file and overrides into one config."""
        values, lines = {}, {}
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError("unknown preset {!r}; choose from {}".format(preset, ", ".join(PRESETS)), "preset")
            values.update(PRESETS[preset])
        if path is not None:
            fvals, flines = read_parameter_file(path)
            values.update(fvals)
            lines.update(flines)
        for key, val in (overrides or {}).items():
            if val is not None:
                values[key] = val
                lines.pop(key, None)
        return cls(values, lines)

    def _fail(self, key: str, message: str) -> None:
        raise ConfigError(message, key, self._lines.get(key))

    def validate(self) -> None:
        """Checks every range before any computation starts."""
        for key in ("r0", "r1"):
            if not 0 <= getattr(self, key) <= 1:
                self._fail(key, "Bloch length must lie in [0, 1], got {}".format(getattr(self, key)))
        if not np.isfinite(self.theta):
            self._fail("theta", "angle must be finite")
        if not self.l_list:
            self._fail("l_list", "at least one block length is required")
        if any(l < 1 for l in self.l_list):
            self._fail("l_list", "block lengths must be positive, got {}".format(self.l_list))
        if self.measurement not in MEASUREMENTS:
            self._fail("measurement", "must be one of {}, got {!r}".format(", ".join(MEASUREMENTS), self.measurement))
        if not self.h_list:
            self._fail("h_list", "at least one threshold is required")
        if any(not (np.isfinite(h) and h > 0) for h in self.h_list):
            self._fail("h_list", "thresholds must be positive, got {}".format(self.h_list))
        if self.trials < 1:
            self._fail("trials", "must be at least 1, got {}".format(self.trials))
        if self.cap < 1:
            self._fail("cap", "must be at least 1, got {}".format(self.cap))
        if not 0 <= self.seed < 2**64:
            self._fail("seed", "must be a 64-bit unsigned integer, got {}".format(self.seed))
        for key in ("family", "truths"):
            entries = getattr(self, key)
            if entries is None:
                continue
            if key == "family" and not entries:
                self._fail(key, "family must hold at least one r1:theta entry")
            for r1, theta in entries:
                if not 0 <= r1 <= 1 or not np.isfinite(theta):
                    self._fail(key, "entry {}:{} is out of range".format(r1, theta))
        if (self.bias_pre is None) != (self.bias_post is None):
            self._fail("bias_post" if self.bias_post is None else "bias_pre", "bias_pre and bias_post go together")
        for key in ("bias_pre", "bias_post"):
            val = getattr(self, key)
            if val is not None and not 0 <= val <= 1:
                self._fail(key, "probability must lie in [0, 1], got {}".format(val))
        if any(not (a > 0 and a != 1) for a in self.alpha):
            self._fail("alpha", "Renyi orders must be positive and different from 1, got {}".format(self.alpha))
        if any(not 0 < e < 1 for e in self.eps):
            self._fail("eps", "values must lie in (0, 1), got {}".format(self.eps))
        if self.steps < 2:
            self._fail("steps", "must be at least 2, got {}".format(self.steps))
        if not 0 < self.nu < self.steps:
            self._fail("nu", "must satisfy 0 < nu < steps, got {} and {}".format(self.nu, self.steps))
        if self.trajectories < 0:
            self._fail("trajectories", "must be non-negative, got {}".format(self.trajectories))
        if not 0 <= self.max_censored <= 1:
            self._fail("max_censored", "must lie in [0, 1], got {}".format(self.max_censored))
        if self.threads < -1 or self.threads == 0:
            self._fail("threads", "must be a positive integer or -1, got {}".format(self.threads))

    @property
    def classical(self) -> bool:
        """True when the scenario is a classical Bernoulli pair."""
        return self.bias_pre is not None

    def to_json(self) -> dict:
        return {key: getattr(self, key) for key in FIELDS}

    def __repr__(self) -> str:
        return "ScenarioConfig({})".format(", ".join("{}={!r}".format(k, getattr(self, k)) for k in FIELDS))


def default_out_dir() -> str:
    """Output directory from QUSUM_OUT_DIR, else the working directory."""
    return os.environ.get("QUSUM_OUT_DIR", os.getcwd())


class RunManifest:
    """Record of one command-line run: configuration echo, tool version,
    UTC timestamp and SHA-256 digests of every emitted file."""

    def __init__(self, command: str, config: ScenarioConfig) -> None:
        self.command = command
        self.config = config
        self.version = __version__
        self.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.outputs = {}

    def add(self, path: str) -> None:
        self.outputs[op.basename(path)] = filedigest(path)

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        """Reads a run_manifest.json written by `write`."""
        if not op.exists(path):
            raise OSError("Run manifest {} does not exist".format(path))
        with open(path) as fp:
            try:
                raw = json.load(fp)
            except json.JSONDecodeError as err:
                raise ConfigError("invalid JSON: {}".format(err)) from None
        if not isinstance(raw, dict) or not isinstance(raw.get("config"), dict):
            raise ConfigError("run manifest {} has no config object".format(path))
        values, _ = read_parameter_file(path)
        manifest = cls(str(raw.get("command", "")), ScenarioConfig(values))
        manifest.version = raw.get("version", manifest.version)
        manifest.timestamp = raw.get("timestamp", manifest.timestamp)
        manifest.outputs = dict(raw.get("outputs") or {})
        return manifest

    def mismatches(self, directory: str) -> List[str]:
        """Names of recorded files that are missing or changed."""
        bad = []
        for name, digest in sorted(self.outputs.items()):
            path = op.join(directory, name)
            if not op.exists(path) or filedigest(path) != digest:
                bad.append(name)
        return bad

    def verify(self, directory: str) -> bool:
        """True when every recorded file still matches its digest."""
        return not self.mismatches(directory)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config.to_json(),
            "version": self.version,
            "timestamp": self.timestamp,
            "outputs": self.outputs,
        }

    def write(self, directory: str) -> str:
        return writejson(self.to_json(), op.join(directory, "run_manifest.json"))
