"""Experiment configuration: defaults, YAML loading, unit conversion, validation.

Config files are YAML with nested sections.  Values carry human units in
their key names (GHz, pF, nH, dBm, m) and are converted to SI at parse time;
everything downstream of this module is SI.
"""

from __future__ import annotations

import copy
import hashlib
import json

import numpy as np
import yaml

from .channel import AVAILABLE, BLOCKED, NetworkScenario, PowerConfig
from .circuit import CircuitParams
from .errors import ConfigError

ARCHITECTURES = ("fully-connected", "group-connected", "single-connected")

EXPERIMENTS = ("freq-response", "target-shift", "per-bs-power", "network-power",
               "interference")

DEFAULT_CONFIG: dict = {
    "scenario": {
        "bs_positions_m": [[0.0, 0.0], [80.0, 0.0]],
        "user_positions_m": [[[25.0, 10.0], [35.0, 0.0]],
                             [[70.0, 10.0], [55.0, 0.0]]],
        "ris_position_m": [40.0, 20.0],
        "m_antennas": 40,
        "frequencies_ghz": [7.4, 8.0],
        "eta_direct": 3.5,
        "eta_reflected": 2.5,
        "direct_links": "blocked",
    },
    "circuit": {
        "r_ohm": 1.0,
        "l0_nh": 2.5,
        "l_nh": 0.7,
        "r_tilde_ohm": 1.0,
        "l0_tilde_nh": 12.5,
        "l_tilde_nh": 0.2,
        "z0_ohm": 50.0,
        "self_cap_range_pf": [0.1, 2.0],
        "inter_cap_range_pf": [0.001, 0.6],
        "codebook_bits": 6,
    },
    "optimization": {
        "bs_weights": [0.3, 0.7],
        "user_weights": [[0.5, 0.5], [0.5, 0.5]],
        "target_frequency_ghz": 7.4,
        "fw_iterations": 500,
        "fw_step_rule": "line-search",
        "group_count": 2,
    },
    "power": {
        "total_dbm": 20.0,
        "noise_dbm": -40.0,
        "alpha": [[0.5, 0.5], [0.5, 0.5]],
    },
    "simulation": {
        "trials": 200,
        "seed": 1,
        "architectures": list(ARCHITECTURES),
    },
    "experiments": {
        "freq-response": {
            "d_values": [60, 100],
            "grid_ghz": {"start": 1.0, "stop": 16.0, "step": 0.5},
            "tracked_bs": 1,
            "tracked_user": 1,
        },
        "target-shift": {
            "targets_ghz": [7.4, 8.0],
            "half_span_ghz": 1.0,
            "step_ghz": 0.1,
            "d": 100,
            "tracked_bs": 1,
            "tracked_user": 1,
        },
        "per-bs-power": {
            "d_grid": [20, 40, 60, 80, 100],
            "weight_sets": [[0.3, 0.7], [1.0, 0.0], [0.0, 1.0]],
            "link_modes": ["blocked", "available"],
        },
        "network-power": {
            "d_grid": [20, 40, 60, 80, 100],
            "weight_sets": [[0.3, 0.7], [1.0, 0.0], [0.0, 1.0]],
            "link_modes": ["blocked", "available"],
        },
        "interference": {
            "ris_positions_m": [[20.0, 20.0], [40.0, 20.0], [60.0, 20.0]],
            "d_grid": [20, 40, 60, 80],
            "interferer_frequency_ghz": 8.4,
            "victim_bs": 2,
        },
    },
    "output": {
        "dir": "results",
    },
}


def ghz(x) -> float:
    return float(x) * 1e9


def picofarad(x) -> float:
    return float(x) * 1e-12


def nanohenry(x) -> float:
    return float(x) * 1e-9


def dbm_to_watts(x) -> float:
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def _deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _walk_lines(node, prefix: str, lines: dict):
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            _walk_lines(value_node, path, lines)


def load_yaml_with_lines(text: str) -> tuple[dict, dict]:
    """Parse YAML and record the source line of every (dotted) key path."""
    data = yaml.safe_load(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level of a config file must be a mapping")
    lines: dict = {}
    root = yaml.compose(text)
    if root is not None:
        _walk_lines(root, "", lines)
    return data, lines


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` overrides; values are parsed as YAML."""
    out = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        target = out
        for key in keys[:-1]:
            if not isinstance(target.get(key), dict):
                target[key] = {}
            target = target[key]
        target[keys[-1]] = yaml.safe_load(raw)
    return out


def load_config(path: str | None = None, overrides: list[str] | None = None
                ) -> tuple[dict, dict, str]:
    """Resolved config (defaults merged with the file and overrides).

    Returns (config, key line map, source label for messages).
    """
    lines: dict = {}
    source = "<defaults>"
    user: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            user, lines = load_yaml_with_lines(fh.read())
        source = str(path)
    cfg = _deep_merge(DEFAULT_CONFIG, user)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg, lines, source


def config_hash(cfg: dict) -> str:
    """Stable hash of the fully resolved configuration."""
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


class _Check:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines
        self.errors: list[str] = []

    def fail(self, path: str, message: str):
        line = self.lines.get(path)
        anchor = f"{self.source}:{line}" if line else self.source
        self.errors.append(f"{anchor}: {path}: {message}")

    def require(self, condition: bool, path: str, message: str) -> bool:
        if not condition:
            self.fail(path, message)
        return bool(condition)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def validate_config(cfg: dict, source: str = "<config>", lines: dict | None = None) -> list[str]:
    """Check every invariant the pipeline relies on; return error messages."""
    chk = _Check(source, lines or {})

    sc = cfg.get("scenario", {})
    bs = sc.get("bs_positions_m", [])
    users = sc.get("user_positions_m", [])
    freqs = sc.get("frequencies_ghz", [])
    chk.require(isinstance(bs, list) and len(bs) >= 1,
                "scenario.bs_positions_m", "need at least one base station")
    chk.require(len(users) == len(bs),
                "scenario.user_positions_m", "need one user list per base station")
    chk.require(len(freqs) == len(bs),
                "scenario.frequencies_ghz", "need one operating frequency per base station")
    for b, user_list in enumerate(users if isinstance(users, list) else []):
        chk.require(isinstance(user_list, list) and len(user_list) >= 1,
                    "scenario.user_positions_m", f"base station {b + 1} needs at least one user")
    for path, positions in (("scenario.bs_positions_m", bs),
                            ("scenario.ris_position_m", [sc.get("ris_position_m", [0, 0])])):
        flat = np.asarray(positions, dtype=float).ravel() if positions else np.array([np.nan])
        chk.require(bool(np.all(np.isfinite(flat))), path, "positions must be finite")
    m = sc.get("m_antennas", 0)
    chk.require(isinstance(m, int) and m >= 1, "scenario.m_antennas", "must be a positive integer")
    if isinstance(users, list) and all(isinstance(u, list) for u in users):
        max_users = max((len(u) for u in users), default=0)
        chk.require(m >= max_users, "scenario.m_antennas",
                    "zero-forcing needs at least as many antennas as users per base station")
    for key in ("eta_direct", "eta_reflected"):
        chk.require(_is_number(sc.get(key)) and sc.get(key) > 0, f"scenario.{key}", "must be > 0")
    chk.require(sc.get("direct_links") in (BLOCKED, AVAILABLE),
                "scenario.direct_links", f"must be '{BLOCKED}' or '{AVAILABLE}'")

    ci = cfg.get("circuit", {})
    for key in ("r_ohm", "l_nh", "r_tilde_ohm", "l_tilde_nh"):
        chk.require(_is_number(ci.get(key)) and ci.get(key) >= 0, f"circuit.{key}", "must be >= 0")
    for key in ("l0_nh", "l0_tilde_nh", "z0_ohm"):
        chk.require(_is_number(ci.get(key)) and ci.get(key) > 0, f"circuit.{key}", "must be > 0")
    for key in ("self_cap_range_pf", "inter_cap_range_pf"):
        rng = ci.get(key, [])
        ok = (isinstance(rng, list) and len(rng) == 2 and all(_is_number(x) for x in rng)
              and 0 < rng[0] < rng[1])
        chk.require(ok, f"circuit.{key}", "must be a positive increasing pair")
    bits = ci.get("codebook_bits", 0)
    chk.require(isinstance(bits, int) and bits >= 1, "circuit.codebook_bits",
                "must be an integer >= 1")

    op = cfg.get("optimization", {})
    mu = op.get("bs_weights", [])
    nu = op.get("user_weights", [])
    chk.require(isinstance(mu, list) and len(mu) == len(bs) and all(
        _is_number(w) and w >= 0 for w in mu),
        "optimization.bs_weights", "need one weight >= 0 per base station")
    nu_ok = (isinstance(nu, list) and len(nu) == len(users)
             and all(isinstance(row, list) and len(row) == len(u)
                     and all(_is_number(w) and w >= 0 for w in row)
                     for row, u in zip(nu, users)))
    chk.require(nu_ok, "optimization.user_weights",
                "need one weight >= 0 per user, matching the scenario layout")
    if isinstance(mu, list) and nu_ok and mu:
        products = [m_ * w for m_, row in zip(mu, nu) for w in row]
        chk.require(any(p > 0 for p in products), "optimization.bs_weights",
                    "at least one (bs weight x user weight) product must be positive")
    target = op.get("target_frequency_ghz")
    chk.require(_is_number(target) and target in [float(f) for f in freqs],
                "optimization.target_frequency_ghz",
                "must be one of scenario.frequencies_ghz")
    iters = op.get("fw_iterations", 0)
    chk.require(isinstance(iters, int) and iters >= 1, "optimization.fw_iterations",
                "must be an integer >= 1")
    chk.require(op.get("fw_step_rule") in ("line-search", "diminishing"),
                "optimization.fw_step_rule",
                "must be 'line-search' or 'diminishing'")
    g = op.get("group_count", 0)
    chk.require(isinstance(g, int) and g >= 1, "optimization.group_count",
                "must be an integer >= 1")

    pw = cfg.get("power", {})
    for key in ("total_dbm", "noise_dbm"):
        chk.require(_is_number(pw.get(key)), f"power.{key}", "must be a finite number")
    alpha = pw.get("alpha", [])
    alpha_ok = (isinstance(alpha, list) and len(alpha) == len(users)
                and all(isinstance(row, list) and len(row) == len(u) for row, u in zip(alpha, users)))
    chk.require(alpha_ok, "power.alpha", "need one power fraction per user")
    if alpha_ok:
        for b, row in enumerate(alpha):
            chk.require(all(_is_number(a) and a >= 0 for a in row) and sum(row) <= 1 + 1e-12,
                        "power.alpha", f"base station {b + 1} fractions must be >= 0 and sum to <= 1")

    sim = cfg.get("simulation", {})
    chk.require(isinstance(sim.get("trials"), int) and sim.get("trials") >= 1,
                "simulation.trials", "must be an integer >= 1")
    chk.require(isinstance(sim.get("seed"), int), "simulation.seed", "must be an integer")
    archs = sim.get("architectures", [])
    chk.require(isinstance(archs, list) and archs
                and all(a in ARCHITECTURES for a in archs),
                "simulation.architectures", f"entries must be among {ARCHITECTURES}")

    exps = cfg.get("experiments", {})
    all_d: list[int] = []
    for name in ("per-bs-power", "network-power", "interference"):
        grid = exps.get(name, {}).get("d_grid", [])
        chk.require(isinstance(grid, list) and grid and all(
            isinstance(d, int) and d >= 1 for d in grid),
            f"experiments.{name}.d_grid", "must be a non-empty list of positive integers")
        all_d.extend(d for d in grid if isinstance(d, int))
    fr = exps.get("freq-response", {})
    dv = fr.get("d_values", [])
    chk.require(isinstance(dv, list) and dv and all(isinstance(d, int) and d >= 1 for d in dv),
                "experiments.freq-response.d_values",
                "must be a non-empty list of positive integers")
    all_d.extend(d for d in dv if isinstance(d, int))
    ts_d = exps.get("target-shift", {}).get("d", 0)
    chk.require(isinstance(ts_d, int) and ts_d >= 1, "experiments.target-shift.d",
                "must be a positive integer")
    all_d.append(ts_d if isinstance(ts_d, int) else 0)
    if isinstance(g, int) and g >= 1:
        group_archs_requested = not isinstance(archs, list) or "group-connected" in archs
        for d in all_d:
            if group_archs_requested and d >= 1 and d % g:
                chk.fail("optimization.group_count",
                         f"group count {g} must divide every element count (found D={d})")
    grid_spec = fr.get("grid_ghz", {})
    grid_ok = (isinstance(grid_spec, dict)
               and all(_is_number(grid_spec.get(k)) for k in ("start", "stop", "step"))
               and grid_spec.get("step", 0) > 0
               and grid_spec.get("start", 0) > 0
               and grid_spec.get("stop", 0) >= grid_spec.get("start", 1))
    chk.require(grid_ok, "experiments.freq-response.grid_ghz",
                "need positive start/stop/step with stop >= start")
    ts = exps.get("target-shift", {})
    chk.require(isinstance(ts.get("targets_ghz"), list) and ts.get("targets_ghz"),
                "experiments.target-shift.targets_ghz", "must be a non-empty list")
    chk.require(_is_number(ts.get("step_ghz")) and ts.get("step_ghz", 0) > 0,
                "experiments.target-shift.step_ghz", "must be > 0")
    chk.require(_is_number(ts.get("half_span_ghz")) and ts.get("half_span_ghz", 0) > 0,
                "experiments.target-shift.half_span_ghz", "must be > 0")
    for name in ("per-bs-power", "network-power"):
        ws = exps.get(name, {}).get("weight_sets", [])
        ws_ok = (isinstance(ws, list) and ws and all(
            isinstance(w, list) and len(w) == len(bs)
            and all(_is_number(x) and x >= 0 for x in w) and any(x > 0 for x in w)
            for w in ws))
        chk.require(ws_ok, f"experiments.{name}.weight_sets",
                    "each set needs one weight >= 0 per base station, not all zero")
        modes = exps.get(name, {}).get("link_modes", [])
        chk.require(isinstance(modes, list) and modes
                    and all(mode in (BLOCKED, AVAILABLE) for mode in modes),
                    f"experiments.{name}.link_modes",
                    f"entries must be '{BLOCKED}' or '{AVAILABLE}'")
    itf = exps.get("interference", {})
    pos = itf.get("ris_positions_m", [])
    chk.require(isinstance(pos, list) and pos, "experiments.interference.ris_positions_m",
                "must be a non-empty list of positions")
    chk.require(_is_number(itf.get("interferer_frequency_ghz")),
                "experiments.interference.interferer_frequency_ghz", "must be a number")
    victim = itf.get("victim_bs", 0)
    chk.require(isinstance(victim, int) and 1 <= victim <= len(bs),
                "experiments.interference.victim_bs",
                "must be a 1-based base station index")
    for key in ("tracked_bs", "tracked_user"):
        val = fr.get(key, 0)
        chk.require(isinstance(val, int) and val >= 1, f"experiments.freq-response.{key}",
                    "must be a 1-based index")
    return chk.errors


def require_valid(cfg: dict, source: str = "<config>", lines: dict | None = None):
    errors = validate_config(cfg, source, lines)
    if errors:
        raise ConfigError("\n".join(errors))


# ---------------------------------------------------------------------------
# Typed views over a validated config


def circuit_params(cfg: dict) -> CircuitParams:
    ci = cfg["circuit"]
    return CircuitParams(
        r=float(ci["r_ohm"]), l0=nanohenry(ci["l0_nh"]), l=nanohenry(ci["l_nh"]),
        r_tilde=float(ci["r_tilde_ohm"]), l0_tilde=nanohenry(ci["l0_tilde_nh"]),
        l_tilde=nanohenry(ci["l_tilde_nh"]), z0=float(ci["z0_ohm"]),
    )


def cap_ranges(cfg: dict) -> tuple[tuple[float, float], tuple[float, float]]:
    ci = cfg["circuit"]
    lo, hi = ci["self_cap_range_pf"]
    lo_t, hi_t = ci["inter_cap_range_pf"]
    return (picofarad(lo), picofarad(hi)), (picofarad(lo_t), picofarad(hi_t))


def base_scenario(cfg: dict, direct_links: str | None = None,
                  ris_position: tuple[float, float] | None = None,
                  frequencies: tuple[float, ...] | None = None) -> NetworkScenario:
    sc = cfg["scenario"]
    return NetworkScenario(
        bs_positions=tuple(tuple(map(float, p)) for p in sc["bs_positions_m"]),
        user_positions=tuple(tuple(tuple(map(float, u)) for u in users)
                             for users in sc["user_positions_m"]),
        ris_position=tuple(map(float, ris_position if ris_position is not None
                               else sc["ris_position_m"])),
        m=int(sc["m_antennas"]),
        frequencies=frequencies if frequencies is not None
        else tuple(ghz(f) for f in sc["frequencies_ghz"]),
        eta_direct=float(sc["eta_direct"]),
        eta_reflected=float(sc["eta_reflected"]),
        direct_links=direct_links if direct_links is not None else sc["direct_links"],
    )


def single_user_scenario(cfg: dict, bs: int, user: int, frequency: float,
                         direct_links: str = BLOCKED) -> NetworkScenario:
    """Scenario reduced to one base station serving one of its users."""
    sc = cfg["scenario"]
    return NetworkScenario(
        bs_positions=(tuple(map(float, sc["bs_positions_m"][bs])),),
        user_positions=((tuple(map(float, sc["user_positions_m"][bs][user])),),),
        ris_position=tuple(map(float, sc["ris_position_m"])),
        m=int(sc["m_antennas"]),
        frequencies=(frequency,),
        eta_direct=float(sc["eta_direct"]),
        eta_reflected=float(sc["eta_reflected"]),
        direct_links=direct_links,
    )


def power_config(cfg: dict, scenario: NetworkScenario) -> PowerConfig:
    """Power budget for a scenario; uniform fractions when the configured
    alpha layout does not match the scenario's user layout."""
    pw = cfg["power"]
    p = dbm_to_watts(pw["total_dbm"])
    noise = dbm_to_watts(pw["noise_dbm"])
    alpha = pw.get("alpha")
    layout = tuple(len(row) for row in alpha) if isinstance(alpha, list) else ()
    if layout == scenario.users_per_bs:
        return PowerConfig(p=p, alpha=tuple(tuple(map(float, row)) for row in alpha),
                           noise=noise)
    return PowerConfig.uniform(scenario, p, noise)
