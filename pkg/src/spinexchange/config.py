"""Strict TOML scenario configuration.

Physics inputs must be stated explicitly. Numerical knobs have defaults, and
every resolved value (defaults included) is returned so it can be echoed into
output metadata. Frequencies may be given as angular frequency (``kappa``, in
rad/s) or as ordinary frequency with an ``_hz`` suffix (``kappa_hz``); the
resolved config always holds rad/s.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .params import TWO_PI

SCENARIOS = ("hop", "sign_sweep", "spin_mixing", "oracle_compare", "response_curve")

_REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key and line if known."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 source: Optional[str] = None):
        self.key = key
        self.line = line
        self.source = source
        loc = source or "<config>"
        if line is not None:
            loc += f":{line}"
        if key:
            loc += f": key '{key}'"
        super().__init__(f"{loc}: {message}")


@dataclass(frozen=True)
class Field:
    kind: Any
    default: Any = _REQUIRED
    angular: bool = False
    choices: Optional[tuple] = None
    check: Optional[Callable[[Any], bool]] = None
    check_msg: str = ""


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


_PARAMS = {
    "kappa": Field(float, angular=True, check=_pos, check_msg="must be > 0"),
    "g": Field(float, angular=True, check=_nonneg, check_msg="must be >= 0"),
    "gamma_atom": Field(float, angular=True, check=_pos, check_msg="must be > 0"),
    "delta_atom": Field(float, angular=True),
    "delta_c": Field(float, angular=True),
    "n_bar": Field(float, check=_nonneg, check_msg="must be >= 0"),
    "n_atoms": Field(float, check=lambda x: x >= 1, check_msg="must be >= 1"),
    "q_over_b2": Field(float, angular=True),
    "b_field": Field(float, default=None, check=_nonneg, check_msg="must be >= 0"),
    "omega_z": Field(float, default=None, angular=True),
}

_PROFILE_GAUSSIAN = {
    "kind": Field(str, choices=("gaussian", "table")),
    "waist_um": Field(float, check=_pos, check_msg="must be > 0"),
    "cloud_center_um": Field(float),
    "cloud_rms_um": Field(float, check=_pos, check_msg="must be > 0"),
    "omega_peak": Field(float, angular=True),
    "x_min_um": Field(float, default=None),
    "x_max_um": Field(float, default=None),
    "n_sites": Field(int, default=128, check=_pos, check_msg="must be >= 1"),
    "wavelength_um": Field(float, default=0.780, check=_pos, check_msg="must be > 0"),
    "transverse_rms_um": Field(float, default=None, check=_pos, check_msg="must be > 0"),
    "profile_seed": Field(int, default=0, check=_nonneg, check_msg="must be >= 0"),
}

_PROFILE_TABLE = {
    "kind": Field(str, choices=("gaussian", "table")),
    "path": Field(str),
}

_COUPLING = {
    "dissipation_scale": Field(float, default=1.0, check=_nonneg, check_msg="must be >= 0"),
}

_HOP_PROTOCOL = {
    "a_min_um": Field(float),
    "a_max_um": Field(float),
    "pulse_angle_deg": Field(float, default=90.0),
    "transition": Field(str, default="-1,0", choices=("-1,0", "0,+1", "spin1")),
    "initial_level": Field(int, default=-1, choices=(-1, 0, 1)),
    "smoothing_um": Field(float, default=0.0, check=_nonneg, check_msg="must be >= 0"),
}

_CUTS = {
    "a_um": Field(float),
    "b_um": Field(float),
}

_EVOLUTION = {
    "t_final_us": Field(float, check=_pos, check_msg="must be > 0"),
    "samples": Field(int, default=401, check=lambda n: n >= 2, check_msg="must be >= 2"),
    "onsite": Field(bool, default=True),
    "rtol": Field(float, default=1e-8, check=_pos, check_msg="must be > 0"),
    "atol": Field(float, default=1e-10, check=_pos, check_msg="must be > 0"),
}

_SWEEP = {
    "range_over_omega_z": Field(list),
    "n_points": Field(int, check=lambda n: n >= 2, check_msg="must be >= 2"),
    "boundary_um": Field(float),
    "a_side": Field(str, default="right", choices=("left", "right")),
    "window_periods": Field(float, default=0.1, check=_pos, check_msg="must be > 0"),
    "samples": Field(int, default=41, check=lambda n: n >= 4, check_msg="must be >= 4"),
    "degree": Field(int, default=3, check=_pos, check_msg="must be >= 1"),
    "onsite": Field(bool, default=True),
    "rtol": Field(float, default=1e-8, check=_pos, check_msg="must be > 0"),
    "atol": Field(float, default=1e-10, check=_pos, check_msg="must be > 0"),
}

_SPIN_MIXING = {
    "n0": Field(float, check=_nonneg, check_msg="must be >= 0"),
    "q": Field(float, default=None, angular=True),
    "b_field": Field(float, default=None, check=_nonneg, check_msg="must be >= 0"),
    "q_over_b2": Field(float, default=None, angular=True),
    "chi": Field(float, default=None, angular=True),
    "growth_time_us": Field(float, default=None, check=_pos, check_msg="must be > 0"),
    "ns0": Field(float, default=0.0, check=_nonneg, check_msg="must be >= 0"),
    "t_final_us": Field(float, check=_pos, check_msg="must be > 0"),
    "samples": Field(int, default=101, check=lambda n: n >= 4, check_msg="must be >= 4"),
    "n_traj": Field(int, default=2000, check=lambda n: n >= 2, check_msg="must be >= 2"),
    "pump": Field(str, default="coherent", choices=("coherent", "fock")),
    "seed_model": Field(str, default="thermal", choices=("thermal", "coherent")),
    "detection_noise_fraction": Field(float, default=0.01, check=_nonneg,
                                      check_msg="must be >= 0"),
    "fit_max_fraction": Field(float, default=0.1, check=_pos, check_msg="must be > 0"),
    "exact_oracle": Field(bool, default=False),
    "write_trajectories": Field(bool, default=False),
    "rtol": Field(float, default=1e-9, check=_pos, check_msg="must be > 0"),
    "atol": Field(float, default=1e-9, check=_pos, check_msg="must be > 0"),
}

_ORACLE = {
    "n_sites": Field(int, default=2, check=lambda n: 1 <= n <= 4, check_msg="must be in 1..4"),
    "chi_plus_scale": Field(float, default=0.3),
    "chi_minus_scale": Field(float, default=0.7),
    "omega_low": Field(float, default=0.5, check=_pos, check_msg="must be > 0"),
    "omega_high": Field(float, default=1.5, check=_pos, check_msg="must be > 0"),
    "q": Field(float, default=0.0),
    "samples": Field(int, default=201, check=lambda n: n >= 4, check_msg="must be >= 4"),
    "meanfield_tol": Field(float, default=0.05, check=_nonneg, check_msg="must be >= 0"),
    "equivalence_tol": Field(float, default=1e-12, check=_nonneg, check_msg="must be >= 0"),
    "norm_tol": Field(float, default=1e-9, check=_nonneg, check_msg="must be >= 0"),
    "twa_tol": Field(float, default=0.10, check=_nonneg, check_msg="must be >= 0"),
    "twa_n0": Field(int, default=20, check=_pos, check_msg="must be >= 1"),
    "twa_chi": Field(float, default=-1.0),
    "twa_q": Field(float, default=4.0),
    "twa_n_traj": Field(int, default=8000, check=lambda n: n >= 2, check_msg="must be >= 2"),
    "twa_ns_max_fraction": Field(float, default=0.25, check=_pos, check_msg="must be > 0"),
}

_RESPONSE = {
    "kappa": Field(float, angular=True, check=_pos, check_msg="must be > 0"),
    "delta_min_over_kappa": Field(float, default=-5.0),
    "delta_max_over_kappa": Field(float, default=5.0),
    "n_points": Field(int, default=1001, check=lambda n: n >= 3, check_msg="must be >= 3"),
}

_TOP = {
    "scenario": Field(str, choices=SCENARIOS),
    "description": Field(str, default=""),
    "seed": Field(int, default=0, check=_nonneg, check_msg="must be >= 0"),
    "output_dir": Field(str, default="output"),
}

# sections required (True) or optional (False) per scenario
_LAYOUT = {
    "hop": {"params": True, "profile": True, "coupling": False, "protocol": True,
            "cuts": True, "evolution": True},
    "sign_sweep": {"params": True, "profile": True, "coupling": False, "sweep": True},
    "spin_mixing": {"spin_mixing": True},
    "oracle_compare": {"oracle": False},
    "response_curve": {"response": True},
}

_SECTION_FIELDS = {
    "params": _PARAMS,
    "coupling": _COUPLING,
    "protocol": _HOP_PROTOCOL,
    "cuts": _CUTS,
    "evolution": _EVOLUTION,
    "sweep": _SWEEP,
    "spin_mixing": _SPIN_MIXING,
    "oracle": _ORACLE,
    "response": _RESPONSE,
}

# keys that do not influence results and are kept out of the table echo
NON_RESULT_KEYS = ("output_dir", "description")


def _find_line(text: str, section: Optional[str], key: str) -> Optional[int]:
    """Best-effort line number of ``key`` inside ``[section]``."""
    current = None
    pat = re.compile(r"^\s*(?:\"?)" + re.escape(key) + r"(?:\"?)\s*=")
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", s)
        if m:
            current = m.group(1)
            if section is not None and current == section and key == section:
                return n
            continue
        if current == section and pat.match(line):
            return n
    return None


class _Ctx:
    def __init__(self, text: str, source: Optional[str]):
        self.text = text
        self.source = source

    def error(self, msg, section, key):
        dotted = f"{section}.{key}" if section and key else (section or key)
        line = _find_line(self.text, section, key if key else section) if (key or section) else None
        if line is None and section and key:
            line = _find_line(self.text, section, section)
        return ConfigError(msg, dotted, line, self.source)


def _coerce(value, f: Field, ctx: _Ctx, section, key):
    kind = f.kind
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ctx.error(f"expected a number, got {type(value).__name__}", section, key)
        value = float(value)
        if not math.isfinite(value):
            raise ctx.error("must be finite", section, key)
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ctx.error(f"expected an integer, got {type(value).__name__}", section, key)
    elif kind is bool:
        if not isinstance(value, bool):
            raise ctx.error(f"expected true/false, got {type(value).__name__}", section, key)
    elif kind is str:
        if not isinstance(value, str):
            raise ctx.error(f"expected a string, got {type(value).__name__}", section, key)
    elif kind is list:
        if not isinstance(value, list):
            raise ctx.error(f"expected an array, got {type(value).__name__}", section, key)
    if f.choices is not None and value not in f.choices:
        raise ctx.error(f"must be one of {list(f.choices)}, got {value!r}", section, key)
    if f.check is not None and not f.check(value):
        raise ctx.error(f"{f.check_msg} (got {value!r})", section, key)
    return value


def _resolve_section(raw: dict, fields: dict, ctx: _Ctx, section: Optional[str]) -> dict:
    if not isinstance(raw, dict):
        raise ctx.error("expected a table", section, None)
    allowed = set(fields)
    allowed |= {k + "_hz" for k, f in fields.items() if f.angular}
    for key in raw:
        if key not in allowed:
            if section is None and isinstance(raw[key], dict):
                continue  # sections are checked by the caller
            raise ctx.error("unknown key", section, key)
    out = {}
    for key, f in fields.items():
        hz = key + "_hz"
        if f.angular and key in raw and hz in raw:
            raise ctx.error(f"give either '{key}' (rad/s) or '{hz}' (Hz), not both", section, hz)
        if f.angular and hz in raw:
            v = _coerce(raw[hz], Field(float), ctx, section, hz)
            v = TWO_PI * v
            if f.check is not None and not f.check(v):
                raise ctx.error(f"{f.check_msg} (got {raw[hz]!r} Hz)", section, hz)
            out[key] = v
        elif key in raw:
            out[key] = _coerce(raw[key], f, ctx, section, key)
        elif f.default is _REQUIRED:
            raise ctx.error("required key is missing", section, key)
        else:
            out[key] = f.default
    return out


def _scenario_checks(cfg: dict, ctx: _Ctx) -> None:
    sc = cfg["scenario"]
    if "params" in cfg:
        p = cfg["params"]
        if p["b_field"] is None and p["omega_z"] is None:
            raise ctx.error("one of 'b_field' or 'omega_z' is required", "params", "b_field")
    if "profile" in cfg and cfg["profile"]["kind"] == "gaussian":
        pr = cfg["profile"]
        if (pr["x_min_um"] is None) != (pr["x_max_um"] is None):
            raise ctx.error("give both x_min_um and x_max_um or neither", "profile", "x_min_um")
        if pr["x_min_um"] is None:
            pr["x_min_um"] = pr["cloud_center_um"] - 3.0 * pr["cloud_rms_um"]
            pr["x_max_um"] = pr["cloud_center_um"] + 3.0 * pr["cloud_rms_um"]
        if pr["x_max_um"] <= pr["x_min_um"]:
            raise ctx.error("x_max_um must exceed x_min_um", "profile", "x_max_um")
    if sc == "hop":
        pr = cfg["protocol"]
        if pr["a_max_um"] <= pr["a_min_um"]:
            raise ctx.error("a_max_um must exceed a_min_um", "protocol", "a_max_um")
        ang = pr["pulse_angle_deg"]
        if not 0.0 <= ang < 360.0:
            raise ctx.error("pulse_angle_deg must lie in [0, 360)", "protocol", "pulse_angle_deg")
    if sc == "sign_sweep":
        rng = cfg["sweep"]["range_over_omega_z"]
        if (len(rng) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                     for v in rng) or not rng[0] < rng[1]):
            raise ctx.error("expected [low, high] with low < high", "sweep", "range_over_omega_z")
        cfg["sweep"]["range_over_omega_z"] = [float(rng[0]), float(rng[1])]
    if sc == "spin_mixing":
        sm = cfg["spin_mixing"]
        has_q = sm["q"] is not None
        has_b = sm["b_field"] is not None or sm["q_over_b2"] is not None
        if has_q == has_b:
            raise ctx.error("give either 'q' or both 'b_field' and 'q_over_b2'", "spin_mixing", "q")
        if has_b and (sm["b_field"] is None or sm["q_over_b2"] is None):
            raise ctx.error("'b_field' and 'q_over_b2' must be given together",
                            "spin_mixing", "b_field")
        if (sm["chi"] is None) == (sm["growth_time_us"] is None):
            raise ctx.error("give exactly one of 'chi' or 'growth_time_us'", "spin_mixing", "chi")
    if sc == "oracle_compare":
        o = cfg["oracle"]
        if o["omega_high"] < o["omega_low"]:
            raise ctx.error("omega_high must be >= omega_low", "oracle", "omega_high")
    if sc == "response_curve":
        r = cfg["response"]
        if r["delta_max_over_kappa"] <= r["delta_min_over_kappa"]:
            raise ctx.error("delta range is empty", "response", "delta_max_over_kappa")


def parse_config(text: str, source: Optional[str] = None, base_dir: Optional[Path] = None) -> dict:
    """Parse and validate a TOML config string into a resolved nested dict."""
    ctx = _Ctx(text, source)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {getattr(exc, 'msg', str(exc))}", None,
                          getattr(exc, "lineno", None), source) from None
    if "scenario" not in raw:
        raise ConfigError("required key is missing", "scenario", None, source)
    top = _resolve_section(raw, _TOP, ctx, None)
    scenario = top["scenario"]
    layout = _LAYOUT[scenario]
    for key, val in raw.items():
        if isinstance(val, dict) and key not in layout:
            raise ConfigError(f"section not used by scenario '{scenario}'", key,
                              _find_line(text, key, key), source)
    cfg = dict(top)
    for section, required in layout.items():
        if section not in raw:
            if required:
                raise ConfigError(f"required section [{section}] is missing", section, None, source)
            raw_sec = {}
        else:
            raw_sec = raw[section]
        if section == "profile":
            if not isinstance(raw_sec, dict):
                raise ctx.error("expected a table", "profile", None)
            kind = raw_sec.get("kind")
            if kind not in ("gaussian", "table"):
                raise ctx.error("'kind' must be 'gaussian' or 'table'", "profile", "kind")
            fields = _PROFILE_GAUSSIAN if kind == "gaussian" else _PROFILE_TABLE
            sec = _resolve_section(raw_sec, fields, ctx, "profile")
            if kind == "table":
                path = Path(sec["path"])
                if not path.is_absolute() and base_dir is not None:
                    path = (base_dir / path).resolve()
                sec["path"] = str(path)
            cfg["profile"] = sec
        else:
            fields = _SECTION_FIELDS[section]
            if scenario == "sign_sweep" and section == "params":
                # delta_c is the swept variable
                fields = {k: v for k, v in fields.items() if k != "delta_c"}
            cfg[section] = _resolve_section(raw_sec, fields, ctx, section)
    _scenario_checks(cfg, ctx)
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    return parse_config(text, str(path), path.parent)


def result_config(cfg: dict) -> dict:
    """The subset of a resolved config that can influence results."""
    return {k: v for k, v in cfg.items() if k not in NON_RESULT_KEYS}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(result_config(cfg)).encode()).hexdigest()[:16]
