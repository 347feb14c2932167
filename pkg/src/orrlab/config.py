"""Run configuration: a versioned JSON schema with strict validation.

A config file is a nested JSON object. Validation walks the whole tree and
collects every problem as a "path: message" string before raising, so a bad
file is diagnosed in one shot. Unknown keys are rejected at every level.
Materialization fills in every default, producing a complete dict that is
written back next to the run outputs; rerunning from that copy reproduces
the run bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, ProfileError
from .profiles import ChannelConfig, registry_names

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version",
    "profile",
    "channel",
    "modes",
    "initial_data",
    "time",
    "weights",
    "ladder",
    "diagnostics",
    "output_dir",
    "seed",
}

_WEIGHT_DEFAULTS = {"c_exp": 0.5, "C_low": None, "beta": 0.25, "gamma": 0.25, "delta": 0.5}

# per-shape parameter tables: name -> (default, finite_only)
_SHAPE_PARAMS = {
    "zero": {},
    "mode": {"eta": None, "amplitude": 1.0, "phase": 0.0},
    "gaussian": {"center": None, "width": 1.0, "oscillation": 0.0, "amplitude": 1.0},
    "bump": {"center": None, "width": None, "oscillation": 0.0, "amplitude": 1.0},
    "wall_poly": {"power": 2, "oscillation": 0.0, "amplitude": 1.0},
    "cos_sum": {"terms": None},
    "noise": {"band_limit": None, "amplitude": 1.0},
}
_FINITE_ONLY_SHAPES = {"wall_poly", "cos_sum"}


@dataclass(frozen=True)
class DiagnosticsConfig:
    dissipation: bool = True
    decay_window: tuple | None = None
    gevrey_s: float = 1.0
    boundary_traces: bool = False
    refinement_probe: bool = False
    support_check: bool = True
    save_snapshots: bool = True
    strict: bool = False


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run description plus its materialized JSON form."""

    schema_version: int
    profile_name: str
    profile_params: dict
    channel: ChannelConfig
    modes: tuple
    initial_data: dict
    dt: float | None
    t_end: float
    snapshot_every: int
    weights_raw: dict
    ladder_J: int
    ladder_constant: float
    tol_mono: float
    diagnostics: DiagnosticsConfig
    output_dir: str
    seed: int
    materialized: dict = field(repr=False)

    @property
    def mode_ks(self):
        scale = 2.0 * math.pi / self.channel.x_period
        return tuple(scale * m for m in self.modes)


def _check_keys(obj, allowed, path, problems):
    for key in sorted(set(obj) - set(allowed)):
        problems.append(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _number(obj, key, path, problems, default="__required__", minimum=None,
            maximum=None, integer=False, allow_none=False):
    loc = f"{path}.{key}" if path else key
    if key not in obj:
        if default == "__required__":
            problems.append(f"{loc}: missing required key")
            return None
        return default
    val = obj[key]
    if val is None:
        if allow_none:
            return None
        problems.append(f"{loc}: must not be null")
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        problems.append(f"{loc}: expected a number, got {type(val).__name__}")
        return None
    if integer:
        if float(val) != int(val):
            problems.append(f"{loc}: expected an integer, got {val!r}")
            return None
        val = int(val)
    else:
        val = float(val)
        if not math.isfinite(val):
            problems.append(f"{loc}: must be finite, got {val!r}")
            return None
    if minimum is not None and val < minimum:
        problems.append(f"{loc}: must be >= {minimum}, got {val!r}")
        return None
    if maximum is not None and val > maximum:
        problems.append(f"{loc}: must be <= {maximum}, got {val!r}")
        return None
    return val


def _boolean(obj, key, path, problems, default):
    loc = f"{path}.{key}" if path else key
    if key not in obj:
        return default
    val = obj[key]
    if not isinstance(val, bool):
        problems.append(f"{loc}: expected true or false, got {val!r}")
        return default
    return val


def _section(raw, key, problems, required=False):
    val = raw.get(key)
    if val is None:
        if required:
            problems.append(f"{key}: missing required section")
        return {}
    if not isinstance(val, dict):
        problems.append(f"{key}: expected an object, got {type(val).__name__}")
        return {}
    return val


def _validate_profile(raw, problems):
    sec = _section(raw, "profile", problems, required=True)
    _check_keys(sec, {"name", "params"}, "profile", problems)
    name = sec.get("name")
    if not isinstance(name, str):
        problems.append("profile.name: missing or not a string")
        name = None
    elif name not in registry_names():
        known = ", ".join(registry_names())
        problems.append(f"profile.name: unknown profile {name!r}; registry has: {known}")
        name = None
    params = sec.get("params", {})
    if not isinstance(params, dict):
        problems.append("profile.params: expected an object")
        params = {}
    else:
        for key, val in params.items():
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                problems.append(f"profile.params.{key}: expected a number, got {val!r}")
    return name, {k: float(v) for k, v in params.items()
                  if isinstance(v, (int, float)) and not isinstance(v, bool)}


def _validate_channel(raw, problems):
    sec = _section(raw, "channel", problems, required=True)
    kind = sec.get("kind")
    if kind not in ("finite", "infinite"):
        problems.append(f"channel.kind: must be 'finite' or 'infinite', got {kind!r}")
        kind = None
    allowed = {"kind", "n_grid", "x_period", "support_interval", "vanish_order"}
    if kind != "finite":
        allowed.add("half_width")
    _check_keys(sec, allowed, "channel", problems)
    n_grid = _number(sec, "n_grid", "channel", problems, minimum=8, integer=True)
    half_width = _number(sec, "half_width", "channel", problems, default=8.0, minimum=1e-8)
    x_period = _number(sec, "x_period", "channel", problems,
                       default=2.0 * math.pi, minimum=1e-8)
    vanish_order = _number(sec, "vanish_order", "channel", problems,
                           default=None, minimum=0, integer=True, allow_none=True)
    support = sec.get("support_interval")
    if support is not None:
        ok = (isinstance(support, (list, tuple)) and len(support) == 2
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in support)
              and float(support[0]) < float(support[1]))
        if not ok:
            problems.append("channel.support_interval: expected [a, b] with a < b")
            support = None
        else:
            support = (float(support[0]), float(support[1]))
    if kind is None or n_grid is None or _has_problems_under(problems, "channel."):
        return None, sec
    try:
        if kind == "finite":
            channel = ChannelConfig.finite(
                n_grid, x_period=x_period, support_interval=support, vanish_order=vanish_order)
        else:
            channel = ChannelConfig.infinite(
                n_grid, half_width=half_width, x_period=x_period,
                support_interval=support, vanish_order=vanish_order)
    except (ProfileError, ValueError) as exc:
        problems.append(f"channel: {exc}")
        return None, sec
    return channel, sec


def _has_problems_under(problems, prefix):
    return any(p.startswith(prefix) for p in problems)


def _validate_modes(raw, problems):
    modes = raw.get("modes")
    if modes is None:
        problems.append("modes: missing required key")
        return ()
    if not isinstance(modes, (list, tuple)) or not modes:
        problems.append("modes: expected a non-empty list of integers")
        return ()
    out = []
    for i, m in enumerate(modes):
        if isinstance(m, bool) or not isinstance(m, (int, float)) or float(m) != int(m):
            problems.append(f"modes[{i}]: expected an integer, got {m!r}")
            continue
        m = int(m)
        if m == 0:
            problems.append(f"modes[{i}]: mode 0 carries no shear dynamics; remove it")
            continue
        out.append(m)
    if len(set(out)) != len(out):
        problems.append("modes: duplicate entries")
    return tuple(out)


def _validate_initial(raw, channel, problems):
    sec = _section(raw, "initial_data", problems, required=True)
    shape = sec.get("shape")
    if shape not in _SHAPE_PARAMS:
        known = ", ".join(sorted(_SHAPE_PARAMS))
        problems.append(f"initial_data.shape: must be one of {known}, got {shape!r}")
        return {}
    if shape in _FINITE_ONLY_SHAPES and channel is not None and channel.kind != "finite":
        problems.append(f"initial_data.shape: {shape!r} needs a finite channel")
    spec = _SHAPE_PARAMS[shape]
    _check_keys(sec, set(spec) | {"shape"}, "initial_data", problems)
    out = {"shape": shape}
    mid = 0.5 if (channel is None or channel.kind == "finite") else 0.0

    if shape == "mode":
        out["eta"] = _number(sec, "eta", "initial_data", problems)
        out["amplitude"] = _number(sec, "amplitude", "initial_data", problems, default=1.0)
        out["phase"] = _number(sec, "phase", "initial_data", problems, default=0.0)
    elif shape in ("gaussian", "bump"):
        out["center"] = _number(sec, "center", "initial_data", problems, default=mid)
        default_w = 1.0 if shape == "gaussian" else "__required__"
        out["width"] = _number(sec, "width", "initial_data", problems,
                               default=default_w, minimum=1e-12)
        out["oscillation"] = _number(sec, "oscillation", "initial_data", problems, default=0.0)
        out["amplitude"] = _number(sec, "amplitude", "initial_data", problems, default=1.0)
    elif shape == "wall_poly":
        out["power"] = _number(sec, "power", "initial_data", problems,
                               default=2, minimum=1, integer=True)
        out["oscillation"] = _number(sec, "oscillation", "initial_data", problems, default=0.0)
        out["amplitude"] = _number(sec, "amplitude", "initial_data", problems, default=1.0)
    elif shape == "cos_sum":
        terms = sec.get("terms")
        good = []
        if not isinstance(terms, (list, tuple)) or not terms:
            problems.append("initial_data.terms: expected a non-empty list of [m, re, im]")
        else:
            for i, term in enumerate(terms):
                ok = (isinstance(term, (list, tuple)) and len(term) == 3
                      and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                              for v in term)
                      and float(term[0]) == int(term[0]))
                if not ok:
                    problems.append(f"initial_data.terms[{i}]: expected [m, re, im]")
                else:
                    good.append([int(term[0]), float(term[1]), float(term[2])])
        out["terms"] = good
    elif shape == "noise":
        out["band_limit"] = _number(sec, "band_limit", "initial_data", problems, minimum=1e-12)
        out["amplitude"] = _number(sec, "amplitude", "initial_data", problems, default=1.0)
    return out


def _validate_time(raw, problems):
    sec = _section(raw, "time", problems, required=True)
    _check_keys(sec, {"dt", "t_end", "snapshot_every"}, "time", problems)
    dt = _number(sec, "dt", "time", problems, default=None, minimum=1e-12, allow_none=True)
    t_end = _number(sec, "t_end", "time", problems, minimum=1e-12)
    every = _number(sec, "snapshot_every", "time", problems, default=1, minimum=1, integer=True)
    return dt, t_end, every


def _validate_weights(raw, problems):
    sec = _section(raw, "weights", problems)
    _check_keys(sec, set(_WEIGHT_DEFAULTS), "weights", problems)
    out = {}
    for key, default in _WEIGHT_DEFAULTS.items():
        allow_none = key == "C_low"
        out[key] = _number(sec, key, "weights", problems, default=default,
                           minimum=1e-8 if not allow_none else None, allow_none=allow_none)
    if out.get("C_low") is not None and out["C_low"] <= 0:
        problems.append(f"weights.C_low: must be positive, got {out['C_low']!r}")
    return out


def _validate_ladder(raw, problems):
    sec = _section(raw, "ladder", problems)
    _check_keys(sec, {"J", "constant", "tol_mono"}, "ladder", problems)
    J = _number(sec, "J", "ladder", problems, default=4, minimum=0, maximum=6, integer=True)
    const = _number(sec, "constant", "ladder", problems, default=1.0, minimum=1e-8)
    tol = _number(sec, "tol_mono", "ladder", problems, default=1e-8, minimum=0.0)
    return J, const, tol


def _validate_diagnostics(raw, channel, problems):
    sec = _section(raw, "diagnostics", problems)
    allowed = {"dissipation", "decay_window", "gevrey_s", "boundary_traces",
               "refinement_probe", "support_check", "save_snapshots", "strict"}
    _check_keys(sec, allowed, "diagnostics", problems)
    window = sec.get("decay_window")
    if window is not None:
        ok = (isinstance(window, (list, tuple)) and len(window) == 2
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in window)
              and 0.0 < float(window[0]) < float(window[1]))
        if not ok:
            problems.append("diagnostics.decay_window: expected [a, b] with 0 < a < b")
            window = None
        else:
            window = (float(window[0]), float(window[1]))
    traces = _boolean(sec, "boundary_traces", "diagnostics", problems, False)
    if traces and channel is not None and channel.kind != "finite":
        problems.append("diagnostics.boundary_traces: needs a finite channel")
        traces = False
    return DiagnosticsConfig(
        dissipation=_boolean(sec, "dissipation", "diagnostics", problems, True),
        decay_window=window,
        gevrey_s=_number(sec, "gevrey_s", "diagnostics", problems, default=1.0, minimum=0.1),
        boundary_traces=traces,
        refinement_probe=_boolean(sec, "refinement_probe", "diagnostics", problems, False),
        support_check=_boolean(sec, "support_check", "diagnostics", problems, True),
        save_snapshots=_boolean(sec, "save_snapshots", "diagnostics", problems, True),
        strict=_boolean(sec, "strict", "diagnostics", problems, False),
    )


def validate(raw):
    """Validate a parsed config dict, returning a RunConfig.

    Collects every problem before raising ConfigError, so one run reports
    all mistakes in a file.
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a JSON object"])
    _check_keys(raw, _TOP_KEYS, "", problems)
    version = _number(raw, "schema_version", "", problems,
                      default=SCHEMA_VERSION, integer=True)
    if version is not None and version != SCHEMA_VERSION:
        problems.append(f"schema_version: this build reads version {SCHEMA_VERSION}, "
                        f"got {version}")

    profile_name, profile_params = _validate_profile(raw, problems)
    channel, channel_sec = _validate_channel(raw, problems)
    modes = _validate_modes(raw, problems)
    initial = _validate_initial(raw, channel, problems)
    dt, t_end, every = _validate_time(raw, problems)
    weights = _validate_weights(raw, problems)
    ladder_J, ladder_constant, tol_mono = _validate_ladder(raw, problems)
    diagnostics = _validate_diagnostics(raw, channel, problems)

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        problems.append("output_dir: expected a non-empty string")
        output_dir = "out"
    seed = _number(raw, "seed", "", problems, default=0, minimum=0, integer=True)

    if initial.get("shape") == "mode" and channel is not None and initial.get("eta") is not None:
        # single-bin data must sit on the channel's frequency lattice
        span = channel.z_max - channel.z_min
        steps = initial["eta"] * span / (2.0 * math.pi)
        if abs(steps - round(steps)) > 1e-9:
            problems.append("initial_data.eta: not on the channel frequency lattice "
                            f"(eta * span / 2pi = {steps!r} is not an integer)")

    if problems:
        raise ConfigError(problems)

    materialized = {
        "schema_version": SCHEMA_VERSION,
        "profile": {"name": profile_name, "params": profile_params},
        "channel": {
            "kind": channel.kind,
            "n_grid": channel.n_grid,
            "x_period": channel.x_period,
            "support_interval": list(channel.support_interval)
            if channel.support_interval else None,
            "vanish_order": channel.vanish_order,
        },
        "modes": list(modes),
        "initial_data": initial,
        "time": {"dt": dt, "t_end": t_end, "snapshot_every": every},
        "weights": weights,
        "ladder": {"J": ladder_J, "constant": ladder_constant, "tol_mono": tol_mono},
        "diagnostics": {
            "dissipation": diagnostics.dissipation,
            "decay_window": list(diagnostics.decay_window)
            if diagnostics.decay_window else None,
            "gevrey_s": diagnostics.gevrey_s,
            "boundary_traces": diagnostics.boundary_traces,
            "refinement_probe": diagnostics.refinement_probe,
            "support_check": diagnostics.support_check,
            "save_snapshots": diagnostics.save_snapshots,
            "strict": diagnostics.strict,
        },
        "output_dir": output_dir,
        "seed": seed,
    }
    if channel.kind == "infinite":
        materialized["channel"]["half_width"] = channel.z_max

    return RunConfig(
        schema_version=SCHEMA_VERSION,
        profile_name=profile_name,
        profile_params=profile_params,
        channel=channel,
        modes=modes,
        initial_data=initial,
        dt=dt,
        t_end=t_end,
        snapshot_every=every,
        weights_raw=weights,
        ladder_J=ladder_J,
        ladder_constant=ladder_constant,
        tol_mono=tol_mono,
        diagnostics=diagnostics,
        output_dir=output_dir,
        seed=seed,
        materialized=materialized,
    )


def load(path):
    """Read and validate a config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}"])
    return validate(raw)


def set_in(raw, dotted, value):
    """Set a dotted-path key in a nested config dict, for sweeps.

    The path must address an existing key (or an existing list index), so a
    typo fails loudly instead of creating an ignored setting.
    """
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError([f"sweep parameter {dotted!r}: no element {part!r}"])
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError([f"sweep parameter {dotted!r}: no section {part!r}"])
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError([f"sweep parameter {dotted!r}: no element {last!r}"])
    elif isinstance(node, dict) and last in node:
        node[last] = value
    else:
        raise ConfigError([f"sweep parameter {dotted!r}: config has no such key"])
    return raw
