"""Named experiments: frequency response, target shifts, power sweeps, interference.

Each experiment draws per-trial fading with deterministic substreams,
configures every requested architecture through the relaxed solvers and the
codebook projection, evaluates the metrics, and aggregates mean and standard
error per grid point.  Where the relaxed solve is frequency independent it is
hoisted out of the frequency loop; conditional-gradient solves are batched
over trials in memory-bounded chunks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import (AVAILABLE, BLOCKED, NetworkScenario, sample_channels,
                      stream_rng)
from .circuit import CapacitancePlan, Codebook, RisTopology, build_codebook, \
    scattering_from_capacitances
from .config import cap_ranges, circuit_params, ghz, power_config, \
    base_scenario, single_user_scenario
from .errors import DegenerateChannelError
from .matrixkit import leading_right_singular_vector, unvech
from .metrics import (AggregateResult, ResultRow, aggregate,
                      evaluate_received_powers, network_sum_power,
                      sum_power_per_bs, sum_spectral_efficiency_outdated)
from .optimizer import (FwConfig, GroupAssignment, ObjectiveWeights, _snap,
                        _split_blocks, frank_wolfe_batch, relaxed_block_branches,
                        snap_to_codebook, stack_fc, stack_gc)

logger = logging.getLogger(__name__)

MAX_DEGENERATE_FRACTION = 0.01

# Working-memory budget for batching conditional-gradient solves over trials.
BATCH_BYTES = 250_000_000


def topology_for(architecture: str, d: int, group_count: int) -> RisTopology:
    if architecture == "fully-connected":
        return RisTopology.fully_connected(d)
    if architecture == "group-connected":
        return RisTopology.group_connected(d, group_count)
    if architecture == "single-connected":
        return RisTopology.single_connected(d)
    raise ValueError(f"unknown architecture {architecture!r}")


def priority_assignment(weights: ObjectiveWeights, topology: RisTopology,
                        frequencies: tuple[float, ...]) -> GroupAssignment:
    """Dedicate the groups to the positive-weight base stations, evenly split.

    With a single positive-weight base station every group serves it; with
    several, contiguous group subsets are assigned in base-station order,
    each targeted at that base station's own operating frequency.
    """
    priority = tuple(b for b, mu in enumerate(weights.mu) if mu > 0)
    return GroupAssignment.even_split(
        priority, topology, tuple(frequencies[b] for b in priority))


def fc_target_bs(weights: ObjectiveWeights, frequencies: tuple[float, ...],
                 preferred: float) -> int:
    """Base station whose frequency the fully-connected codebook targets.

    The preferred target is kept as long as its base station carries positive
    weight; otherwise the highest-weight base station is targeted.
    """
    diffs = [abs(f - preferred) for f in frequencies]
    idx = int(np.argmin(diffs))
    if weights.mu[idx] > 0:
        return idx
    return int(np.argmax(weights.mu))


@dataclass
class _TrialState:
    """Frequency-independent part of one trial's configuration.

    Holds the relaxed branch impedances per group (or, for one-element
    groups, the vector of relaxed scalar impedances) plus each group's
    priority base station, so plans can be snapped cheaply against any
    codebook set.
    """

    topo: RisTopology
    group_bs: dict[int, int]
    blocks: dict | None = None
    diag_z: np.ndarray | None = None
    diag_finite: np.ndarray | None = None

    def plan(self, codebooks: dict[int, Codebook]) -> CapacitancePlan:
        d = self.topo.d
        caps = np.zeros((d, d))
        if self.diag_z is not None:
            for bs in sorted(set(self.group_bs.values())):
                idx = np.array([g for g, owner in self.group_bs.items() if owner == bs])
                cb = codebooks[bs]
                caps[idx, idx] = _snap(self.diag_z[idx], self.diag_finite[idx],
                                       cb.self_z, cb.self_caps)
            return CapacitancePlan(caps, self.topo)
        for g, branches in self.blocks.items():
            sl = self.topo.group_slice(g)
            caps[sl, sl] = snap_to_codebook(branches, codebooks[self.group_bs[g]])
        return CapacitancePlan(caps, self.topo)


def _stacks(chans, weights: ObjectiveWeights, topo: RisTopology,
            assignment: GroupAssignment) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    if topo.g == 1:
        return {assignment.bs[0]: stack_fc(chans, weights, drop_zero_rows=True)}
    return {bs: stack_gc(chans, weights, topo, bs) for bs in assignment.bs}


def _state_from_thetas(thetas: dict[int, np.ndarray], topo: RisTopology,
                       assignment: GroupAssignment, z0: float) -> _TrialState:
    group_bs = {g: bs for s, bs in enumerate(assignment.bs)
                for g in assignment.groups[s]}
    if topo.g == 1:
        matrix = unvech(thetas[assignment.bs[0]], topo.d)
        return _TrialState(topo, group_bs,
                           blocks={0: relaxed_block_branches(matrix, z0)})
    if topo.d_bar == 1:
        diag = np.zeros(topo.d, dtype=complex)
        for s, bs in enumerate(assignment.bs):
            for g in assignment.groups[s]:
                diag[g] = thetas[bs][g]
        denom = 1.0 - diag
        finite = np.abs(denom) >= 1e-14 * np.maximum(1.0, np.abs(diag))
        z = np.zeros(topo.d, dtype=complex)
        z[finite] = z0 * (1.0 + diag[finite]) / denom[finite]
        return _TrialState(topo, group_bs, diag_z=z, diag_finite=finite)
    blocks = {}
    for s, bs in enumerate(assignment.bs):
        per_group = _split_blocks(thetas[bs], topo)
        for g in assignment.groups[s]:
            blocks[g] = relaxed_block_branches(per_group[g], z0)
    return _TrialState(topo, group_bs, blocks=blocks)


def _solve_blocked_one(chans, weights, topo, assignment, z0) -> _TrialState:
    scale = 1.0 if topo.g == 1 else np.sqrt(topo.g)
    thetas = {}
    for bs, (r, _) in _stacks(chans, weights, topo, assignment).items():
        v, _sigma = leading_right_singular_vector(r)
        thetas[bs] = scale * v
    return _state_from_thetas(thetas, topo, assignment, z0)


def _solve_direct_one(chans, weights, topo, assignment, z0, fw: FwConfig) -> _TrialState:
    radius = 1.0 if topo.g == 1 else float(np.sqrt(topo.g))
    thetas = {}
    for bs, (r, h) in _stacks(chans, weights, topo, assignment).items():
        thetas[bs] = frank_wolfe_batch(r[None], h[None], radius, fw.iterations,
                                       step_rule=fw.step_rule)[0]
    return _state_from_thetas(thetas, topo, assignment, z0)


def _solve_trials(chans_list, weights, topo, assignment, z0, direct: bool,
                  fw: FwConfig) -> list[_TrialState]:
    """Solve a list of trials; conditional-gradient solves run batched."""
    if not direct:
        return [_solve_blocked_one(c, weights, topo, assignment, z0) for c in chans_list]
    radius = 1.0 if topo.g == 1 else float(np.sqrt(topo.g))
    per_trial_stacks = [_stacks(c, weights, topo, assignment) for c in chans_list]
    thetas_per_bs = {}
    for bs in assignment.bs:
        r = np.stack([s[bs][0] for s in per_trial_stacks])
        h = np.stack([s[bs][1] for s in per_trial_stacks])
        thetas_per_bs[bs] = frank_wolfe_batch(r, h, radius, fw.iterations,
                                              step_rule=fw.step_rule,
                                              max_bytes=BATCH_BYTES)
    return [
        _state_from_thetas({bs: thetas_per_bs[bs][i] for bs in assignment.bs},
                           topo, assignment, z0)
        for i in range(len(chans_list))
    ]


def _direct_chunk(rows: int, cols: int, trials: int) -> int:
    per_trial = max(rows * cols * 16 * 3, 1)
    return max(1, min(trials, BATCH_BYTES // per_trial))


class _RedrawBudget:
    """Caps the fraction of degenerate fading draws tolerated per grid point."""

    def __init__(self, trials: int, context: str):
        self.allowed = max(1, int(MAX_DEGENERATE_FRACTION * trials))
        self.count = 0
        self.context = context

    def bump(self):
        self.count += 1
        logger.warning("degenerate channel draw at %s; redrawing", self.context)
        if self.count > self.allowed:
            raise RuntimeError(f"more than {MAX_DEGENERATE_FRACTION:.0%} degenerate "
                               f"trials at {self.context}")


def _run_point(scenario: NetworkScenario, d: int, seed: int, trials: int,
               weights, topo, assignment, z0, direct, fw, evaluate, context: str
               ) -> dict[str, list[float]]:
    """One (architecture, grid value) point: solve all trials, evaluate, redraw
    degenerate draws individually."""
    budget = _RedrawBudget(trials, context)
    samples: dict[str, list[float]] = {}

    def run_chunk(trial_indices):
        chans_list = [sample_channels(scenario, d, stream_rng(seed, t))
                      for t in trial_indices]
        states = _solve_trials(chans_list, weights, topo, assignment, z0, direct, fw)
        for t, chans, state in zip(trial_indices, chans_list, states):
            attempt = 0
            while True:
                try:
                    metrics = evaluate(chans, state)
                    break
                except DegenerateChannelError:
                    budget.bump()
                    attempt += 1
                    chans = sample_channels(scenario, d, stream_rng(seed, t, attempt=attempt))
                    solver = _solve_direct_one if direct else _solve_blocked_one
                    args = (chans, weights, topo, assignment, z0)
                    state = solver(*args, fw) if direct else solver(*args)
            for name, value in metrics.items():
                samples.setdefault(name, []).append(float(value))

    if direct:
        probe = _stacks(sample_channels(scenario, d, stream_rng(seed, 0)),
                        weights, topo, assignment)
        rows, cols = next(iter(probe.values()))[0].shape
        chunk = _direct_chunk(rows, cols, trials)
    else:
        chunk = trials
    for start in range(0, trials, chunk):
        run_chunk(range(start, min(start + chunk, trials)))
    return samples


def _sim_settings(cfg: dict) -> tuple[int, int, tuple[str, ...]]:
    sim = cfg["simulation"]
    return int(sim["trials"]), int(sim["seed"]), tuple(sim["architectures"])


def _ghz_grid(start: float, stop: float, step: float) -> np.ndarray:
    return np.round(np.arange(float(start), float(stop) + float(step) / 2.0,
                              float(step)), 9)


def _weight_tag(weight_set: list[float]) -> str:
    return "mu_" + "_".join(f"{w:g}" for w in weight_set)


# ---------------------------------------------------------------------------
# freq-response: received power versus operating frequency, surface
# reconfigured (re-projected onto that frequency's codebook) at every grid
# point; the relaxed solve is frequency blind and done once per trial.


def freq_response(cfg: dict) -> dict[str, AggregateResult]:
    exp = cfg["experiments"]["freq-response"]
    trials, seed, archs = _sim_settings(cfg)
    params = circuit_params(cfg)
    self_range, inter_range = cap_ranges(cfg)
    bits = cfg["circuit"]["codebook_bits"]
    group_count = cfg["optimization"]["group_count"]
    bs, user = exp["tracked_bs"] - 1, exp["tracked_user"] - 1
    grid = exp["grid_ghz"]
    ghz_values = _ghz_grid(grid["start"], grid["stop"], grid["step"])
    freqs_hz = [ghz(f) for f in ghz_values]
    codebooks = {f: build_codebook(f, bits, self_range, inter_range, params)
                 for f in freqs_hz}
    weights = ObjectiveWeights(mu=(1.0,), nu=((1.0,),))

    rows = []
    for d in exp["d_values"]:
        scenario = single_user_scenario(cfg, bs, user, freqs_hz[0], BLOCKED)
        power = power_config(cfg, scenario)
        for arch in archs:
            topo = topology_for(arch, d, group_count)
            label = f"{arch} D={d}"
            samples = [[] for _ in freqs_hz]
            budget = _RedrawBudget(trials, f"freq-response {label}")
            for t in range(trials):
                attempt = 0
                while True:
                    try:
                        chans = sample_channels(scenario, d,
                                                stream_rng(seed, t, attempt=attempt))
                        state = _solve_blocked_one(chans, weights, topo,
                                                   GroupAssignment.single(0, topo, freqs_hz[0]),
                                                   params.z0)
                        trial_powers = []
                        for f in freqs_hz:
                            plan = state.plan({0: codebooks[f]})
                            theta = scattering_from_capacitances(plan, f, params)
                            res = evaluate_received_powers(chans, [theta], power, t)
                            trial_powers.append(res.user_powers[0][0])
                        break
                    except DegenerateChannelError:
                        budget.bump()
                        attempt += 1
                for fi, value in enumerate(trial_powers):
                    samples[fi].append(value)
            for fi, f_ghz in enumerate(ghz_values):
                mean, stderr = aggregate(samples[fi])
                rows.append(ResultRow("frequency_ghz", float(f_ghz), label,
                                      "received_power_w", mean, stderr, trials))
    return {"freq_response": AggregateResult(tuple(rows))}


# ---------------------------------------------------------------------------
# target-shift: configure once for a priority frequency, then sweep the
# operating frequency with the capacitance plan held fixed.


def target_shift(cfg: dict) -> dict[str, AggregateResult]:
    exp = cfg["experiments"]["target-shift"]
    trials, seed, archs = _sim_settings(cfg)
    params = circuit_params(cfg)
    self_range, inter_range = cap_ranges(cfg)
    bits = cfg["circuit"]["codebook_bits"]
    group_count = cfg["optimization"]["group_count"]
    bs, user = exp["tracked_bs"] - 1, exp["tracked_user"] - 1
    d = exp["d"]
    weights = ObjectiveWeights(mu=(1.0,), nu=((1.0,),))

    out = {}
    for target_ghz in exp["targets_ghz"]:
        f_star = ghz(target_ghz)
        ghz_values = _ghz_grid(target_ghz - exp["half_span_ghz"],
                               target_ghz + exp["half_span_ghz"], exp["step_ghz"])
        freqs_hz = [ghz(f) for f in ghz_values]
        codebook = build_codebook(f_star, bits, self_range, inter_range, params)
        scenario = single_user_scenario(cfg, bs, user, f_star, BLOCKED)
        power = power_config(cfg, scenario)
        rows = []
        for arch in archs:
            topo = topology_for(arch, d, group_count)
            samples = [[] for _ in freqs_hz]
            budget = _RedrawBudget(trials, f"target-shift {arch}")
            for t in range(trials):
                attempt = 0
                while True:
                    try:
                        chans = sample_channels(scenario, d,
                                                stream_rng(seed, t, attempt=attempt))
                        state = _solve_blocked_one(chans, weights, topo,
                                                   GroupAssignment.single(0, topo, f_star),
                                                   params.z0)
                        plan = state.plan({0: codebook})
                        trial_powers = []
                        for f in freqs_hz:
                            theta = scattering_from_capacitances(plan, f, params)
                            res = evaluate_received_powers(chans, [theta], power, t)
                            trial_powers.append(res.user_powers[0][0])
                        break
                    except DegenerateChannelError:
                        budget.bump()
                        attempt += 1
                for fi, value in enumerate(trial_powers):
                    samples[fi].append(value)
            for fi, f_ghz in enumerate(ghz_values):
                mean, stderr = aggregate(samples[fi])
                rows.append(ResultRow("frequency_ghz", float(f_ghz), arch,
                                      "received_power_w", mean, stderr, trials))
        tag = f"{target_ghz:g}".replace(".", "p")
        out[f"target_shift_{tag}ghz"] = AggregateResult(tuple(rows))
    return out


# ---------------------------------------------------------------------------
# per-bs-power / network-power: received sum power versus element count for
# several base-station weight sets, with blocked or available direct links.


def _power_sweep(cfg: dict, weight_set: list[float], link_mode: str,
                 d_grid: list[int]) -> AggregateResult:
    trials, seed, archs = _sim_settings(cfg)
    params = circuit_params(cfg)
    self_range, inter_range = cap_ranges(cfg)
    bits = cfg["circuit"]["codebook_bits"]
    group_count = cfg["optimization"]["group_count"]
    fw = FwConfig(cfg["optimization"]["fw_iterations"],
                  cfg["optimization"]["fw_step_rule"])

    scenario = base_scenario(cfg, direct_links=link_mode)
    power = power_config(cfg, scenario)
    nu = tuple(tuple(map(float, row)) for row in cfg["optimization"]["user_weights"])
    weights = ObjectiveWeights(mu=tuple(map(float, weight_set)), nu=nu)
    direct = link_mode == AVAILABLE
    preferred = ghz(cfg["optimization"]["target_frequency_ghz"])
    codebooks = {b: build_codebook(f, bits, self_range, inter_range, params)
                 for b, f in enumerate(scenario.frequencies)}

    def evaluate(chans, state, codebook_map):
        plan = state.plan(codebook_map)
        thetas = [scattering_from_capacitances(plan, f, params)
                  for f in scenario.frequencies]
        result = evaluate_received_powers(chans, thetas, power)
        per_bs = sum_power_per_bs(result)
        metrics = {f"sum_power_bs{b + 1}_w": v for b, v in enumerate(per_bs)}
        metrics["network_sum_power_w"] = network_sum_power(result)
        return metrics

    rows = []
    for arch in archs:
        for d in d_grid:
            topo = topology_for(arch, d, group_count)
            if topo.g == 1:
                target = fc_target_bs(weights, scenario.frequencies, preferred)
                assignment = GroupAssignment.single(target, topo,
                                                    scenario.frequencies[target])
            else:
                assignment = priority_assignment(weights, topo, scenario.frequencies)
            samples = _run_point(
                scenario, d, seed, trials, weights, topo, assignment, params.z0,
                direct, fw,
                lambda chans, state: evaluate(chans, state, codebooks),
                context=f"{arch} D={d} {link_mode}")
            for name, values in samples.items():
                mean, stderr = aggregate(values)
                rows.append(ResultRow("elements", int(d), arch, name, mean, stderr,
                                      trials))
    return AggregateResult(tuple(rows))


def per_bs_power(cfg: dict) -> dict[str, AggregateResult]:
    exp = cfg["experiments"]["per-bs-power"]
    out = {}
    for weight_set in exp["weight_sets"]:
        for mode in exp["link_modes"]:
            result = _power_sweep(cfg, weight_set, mode, exp["d_grid"])
            keep = tuple(r for r in result.rows if r.metric.startswith("sum_power_bs"))
            out[f"per_bs_power__{_weight_tag(weight_set)}__{mode}"] = \
                AggregateResult(keep)
    return out


def network_power(cfg: dict) -> dict[str, AggregateResult]:
    exp = cfg["experiments"]["network-power"]
    out = {}
    for weight_set in exp["weight_sets"]:
        for mode in exp["link_modes"]:
            result = _power_sweep(cfg, weight_set, mode, exp["d_grid"])
            keep = tuple(r for r in result.rows if r.metric == "network_sum_power_w")
            out[f"network_power__{_weight_tag(weight_set)}__{mode}"] = \
                AggregateResult(keep)
    return out


# ---------------------------------------------------------------------------
# interference: the surface is dedicated to one base station while a victim
# base station, unaware of it, zero-forces against outdated (surface-free)
# channel estimates.


def interference(cfg: dict) -> dict[str, AggregateResult]:
    exp = cfg["experiments"]["interference"]
    trials, seed, archs = _sim_settings(cfg)
    params = circuit_params(cfg)
    self_range, inter_range = cap_ranges(cfg)
    bits = cfg["circuit"]["codebook_bits"]
    group_count = cfg["optimization"]["group_count"]
    fw = FwConfig(cfg["optimization"]["fw_iterations"])

    victim = exp["victim_bs"] - 1
    num_bs = len(cfg["scenario"]["bs_positions_m"])
    aided = min(b for b in range(num_bs) if b != victim)
    freqs = [ghz(f) for f in cfg["scenario"]["frequencies_ghz"]]
    freqs[victim] = ghz(exp["interferer_frequency_ghz"])

    nu = tuple(tuple(map(float, row)) for row in cfg["optimization"]["user_weights"])
    mu = tuple(1.0 if b == aided else 0.0 for b in range(num_bs))
    weights = ObjectiveWeights(mu=mu, nu=nu)
    ref_metric = f"sum_se_bs{victim + 1}_ref"
    act_metric = f"sum_se_bs{victim + 1}"

    out = {}
    for position in exp["ris_positions_m"]:
        scenario = base_scenario(cfg, direct_links=AVAILABLE,
                                 ris_position=tuple(map(float, position)),
                                 frequencies=tuple(freqs))
        power = power_config(cfg, scenario)
        codebook = build_codebook(scenario.frequencies[aided], bits,
                                  self_range, inter_range, params)

        def evaluate(chans, state):
            plan = state.plan({aided: codebook})
            theta_at_victim = scattering_from_capacitances(
                plan, scenario.frequencies[victim], params)
            d = chans.num_ris_elements
            return {
                act_metric: sum_spectral_efficiency_outdated(
                    chans, victim, theta_at_victim, power),
                ref_metric: sum_spectral_efficiency_outdated(
                    chans, victim, np.zeros((d, d), dtype=complex), power),
            }

        rows = []
        for arch in archs:
            for d in exp["d_grid"]:
                topo = topology_for(arch, d, group_count)
                assignment = GroupAssignment.single(aided, topo,
                                                    scenario.frequencies[aided])
                samples = _run_point(
                    scenario, d, seed, trials, weights, topo, assignment, params.z0,
                    True, fw, evaluate,
                    context=f"interference {arch} D={d} at {position}")
                mean, stderr = aggregate(samples[act_metric])
                rows.append(ResultRow("elements", int(d), arch, act_metric,
                                      mean, stderr, trials))
                if arch == archs[0]:
                    mean, stderr = aggregate(samples[ref_metric])
                    rows.append(ResultRow("elements", int(d), "interference-free",
                                          act_metric, mean, stderr, trials))
        tag = f"x{position[0]:g}_y{position[1]:g}".replace(".", "p")
        out[f"interference_{tag}"] = AggregateResult(tuple(rows))
    return out


RUNNERS = {
    "freq-response": freq_response,
    "target-shift": target_shift,
    "per-bs-power": per_bs_power,
    "network-power": network_power,
    "interference": interference,
}
