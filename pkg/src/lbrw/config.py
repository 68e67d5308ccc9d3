"""Run configuration: a strict ``[section]`` / ``key = value`` text format.

Values are Python literals (numbers, strings, tuples, lists, ``true`` /
``false``); a bare word that is not a literal is read as a string.  ``#``
starts a comment line.  Every key must be known for the command being run,
and every resolved config can be serialized back to text that parses to
an equal config.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

from .errors import ParseError, RangeError, UnknownKey

COMMANDS = ("forward", "trace", "coal-tail", "meet-tail", "phi", "wm-table", "stepping-stone", "oracle-rw", "selftest")


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _pair(conv):
    def f(v):
        if not isinstance(v, (tuple, list)) or len(v) != 2:
            raise TypeError("expected a pair")
        return (conv(v[0]), conv(v[1]))
    return f


def _list(conv):
    def f(v):
        if not isinstance(v, (tuple, list)):
            v = [v]
        return tuple(conv(x) for x in v)
    return f


def _kernel(v):
    # preset name or list of (dx, dy, weight) triples
    if isinstance(v, str):
        return v
    if not isinstance(v, (tuple, list)) or not v:
        raise TypeError("expected a preset name or a list of (dx, dy, weight)")
    out = []
    for t in v:
        if not isinstance(t, (tuple, list)) or len(t) != 3:
            raise TypeError("kernel triples must be (dx, dy, weight)")
        out.append((_int(t[0]), _int(t[1]), _float(t[2])))
    return tuple(out)


def _open_unit(name):
    def check(v):
        if not 0 < v < 1:
            raise RangeError(f"{name} = {v} must lie in (0, 1)")
    return check


def _positive(name):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        if any(not (x > 0) for x in vals):
            raise RangeError(f"{name} must be > 0, got {v}")
    return check


def _at_least(name, lo):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        if any(x < lo for x in vals):
            raise RangeError(f"{name} must be >= {lo}, got {v}")
    return check


def _check_m(v):
    if not 1 < v < 3:
        raise RangeError(f"m = {v} outside (1, 3): survival with a stable positive density needs 1 < m < 3")


# section -> key -> (converter, default, check)
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "command": (_str, None, None),
        "seed": (_int, 0, _at_least("seed", 0)),
        "workers": (_int, 1, _at_least("workers", 1)),
        "out": (_str, ".", None),
    },
    "model": {
        "m": (_float, 2.0, _check_m),
        "lambda": (_kernel, ((0, 0, 0.025),), None),
        "p": (_kernel, "box1", None),
        "torus_side": (_int, 64, _at_least("torus_side", 4)),
        "burn_in": (_int, 200, _at_least("burn_in", 0)),
        "memory_budget": (_int, 2 << 30, _at_least("memory_budget", 1)),
    },
    "forward": {
        "generations": (_int, 400, _at_least("generations", 2)),
        "save_record": (_bool, False, None),
    },
    "experiment": {
        "N": (_list(_int), (8,), _at_least("N", 1)),
        "gamma": (_float, 1.0, _at_least("gamma", 1)),
        "gammas": (_list(_float), (), _at_least("gammas", 1)),
        "direction": (_pair(_float), (1.0, 0.0), None),
        "mu_coefficient": (_float, 1.0, _positive("mu_coefficient")),
        "replicates": (_int, 100, _at_least("replicates", 1)),
        "horizon_factor": (_float, 1.0, _at_least("horizon_factor", 1)),
        "pairs_per_environment": (_int, 1, _at_least("pairs_per_environment", 1)),
        "auto_side": (_bool, False, None),
        "log_replicates": (_bool, False, None),
    },
    "wm": {
        "delta": (_float, 0.1, _positive("delta")),
        "sigma": (_float, 1.0, _positive("sigma")),
        "kappa": (_float, 1.0, _positive("kappa")),
        "mu": (_float, 1e-4, _open_unit("mu")),
        "r": (_list(_float), (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0), _positive("r")),
        "m": (_float, 1.0, _positive("m")),
        "y_norm": (_float, 1.0, _positive("y_norm")),
        "N": (_list(_float), (1e4, 1e6, 1e8), _positive("N")),
        "gamma": (_list(_float), (1.0, 1.5, 2.0), _at_least("gamma", 1)),
    },
    "stepping_stone": {
        "N_deme": (_int, 20, _at_least("N_deme", 1)),
        "u": (_float, 0.02, _open_unit("u")),
        "kernel": (_kernel, "ss", None),
        "separations": (_list(_pair(_int)), ((0, 0), (1, 0), (5, 0)), None),
        "series_tol": (_float, 1e-12, _positive("series_tol")),
        "monte_carlo": (_bool, True, None),
        "replicates": (_int, 100_000, _at_least("replicates", 1)),
        "bias_tol": (_float, 1e-6, _positive("bias_tol")),
    },
    "oracle_rw": {
        "x": (_pair(_int), (10, 0), None),
        "n": (_int, 100_000, _at_least("n", 0)),
        "thresholds": (_list(_int), (), _at_least("thresholds", 0)),
        "replicates": (_int, 10_000, _at_least("replicates", 1)),
        "kernel": (_kernel, "eight", None),
    },
}

SECTIONS_FOR = {
    "forward": ("run", "model", "forward"),
    "trace": ("run", "model", "experiment"),
    "coal-tail": ("run", "model", "experiment"),
    "meet-tail": ("run", "model", "experiment"),
    "phi": ("run", "model", "experiment"),
    "wm-table": ("run", "wm"),
    "stepping-stone": ("run", "stepping_stone"),
    "oracle-rw": ("run", "oracle_rw"),
    "selftest": ("run",),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    sections: dict = field(default_factory=dict)  # section -> {key: value}, defaults filled

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    @property
    def workers(self) -> int:
        return self.sections["run"]["workers"]

    @property
    def out(self) -> str:
        return self.sections["run"]["out"]

    def with_run(self, **changes) -> "RunConfig":
        secs = {k: dict(v) for k, v in self.sections.items()}
        secs["run"].update({k: v for k, v in changes.items() if v is not None})
        resolved = resolve(self.command, {s: dict(v) for s, v in secs.items()}, {})
        return resolved

    def to_dict(self) -> dict:
        return {"command": self.command, **{s: _jsonable(v) for s, v in self.sections.items()}}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return [_jsonable(v) for v in obj]
    return obj


def _literal(text: str, line: int, col: int):
    s = text.strip()
    low = s.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return ast.literal_eval(s)
    except (ValueError, SyntaxError) as exc:
        if s and (s[0].isalpha() or s[0] == "_") and all(c.isalnum() or c in "_-./" for c in s):
            return s
        off = getattr(exc, "offset", None) or 1
        raise ParseError(f"cannot read value {s!r}", line, col + off - 1) from None


def parse_raw(text: str) -> tuple[dict, dict]:
    """``({section: {key: value}}, {(section, key): line})`` without schema checks."""
    data: dict = {}
    where: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lead = len(raw) - len(raw.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", lineno, lead + len(stripped) + 1)
            section = stripped[1:-1].strip()
            if not section:
                raise ParseError("empty section name", lineno, lead + 1)
            if section in data:
                raise ParseError(f"duplicate section [{section}]", lineno, lead + 1)
            data[section] = {}
            continue
        if "=" not in raw:
            raise ParseError("expected 'key = value'", lineno, lead + 1)
        if section is None:
            raise ParseError("key outside any [section]", lineno, lead + 1)
        k, v = raw.split("=", 1)
        key = k.strip()
        if not key:
            raise ParseError("missing key before '='", lineno, lead + 1)
        if key in data[section]:
            raise ParseError(f"duplicate key {key!r}", lineno, lead + 1)
        vcol = len(k) + 2 + (len(v) - len(v.lstrip()))
        data[section][key] = _literal(v, lineno, vcol)
        where[(section, key)] = lineno
    return data, where


def resolve(command: str, data: dict, where: dict) -> RunConfig:
    if command not in COMMANDS:
        raise UnknownKey(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    allowed = SECTIONS_FOR[command]
    for sec in data:
        if sec not in allowed:
            raise UnknownKey(f"section [{sec}] is not used by '{command}' (allowed: {', '.join(allowed)})")
    out = {}
    for sec in allowed:
        given = data.get(sec, {})
        schema = SCHEMA[sec]
        for key in given:
            if key not in schema:
                line = where.get((sec, key))
                raise UnknownKey(f"unknown key {key!r} in [{sec}]" + (f" (line {line})" if line else ""))
        vals = {}
        for key, (conv, default, check) in schema.items():
            if key in given:
                try:
                    v = conv(given[key])
                except TypeError as exc:
                    raise ParseError(f"[{sec}] {key}: {exc}", where.get((sec, key))) from None
                if isinstance(v, float) and not math.isfinite(v):
                    raise RangeError(f"[{sec}] {key} must be finite")
                if check is not None:
                    check(v)
            else:
                v = default
            vals[key] = v
        out[sec] = vals
    cmd_in_file = out["run"]["command"]
    if cmd_in_file is not None and cmd_in_file != command:
        raise ParseError(f"config is for '{cmd_in_file}', not '{command}'", where.get(("run", "command")))
    out["run"]["command"] = command
    return RunConfig(command, out)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate; ``command`` falls back to ``[run] command``."""
    data, where = parse_raw(text)
    if command is None:
        command = data.get("run", {}).get("command")
        if command is None:
            raise ParseError("no command given")
    return resolve(command, data, where)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


def serialize(cfg: RunConfig) -> str:
    lines = []
    for sec, vals in cfg.sections.items():
        lines.append(f"[{sec}]")
        for k, v in vals.items():
            lines.append(f"{k} = {_fmt(v)}")
        lines.append("")
    return "\n".join(lines)
