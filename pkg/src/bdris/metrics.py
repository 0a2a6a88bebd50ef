"""Received-power and spectral-efficiency metrics plus the Monte Carlo engine."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, PowerConfig, effective_channels, zf_precoder
from .errors import DegenerateChannelError

logger = logging.getLogger(__name__)

# A grid point aborts once more than this fraction of its trials hit
# degenerate fading draws (each degenerate draw is redrawn and logged).
MAX_DEGENERATE_FRACTION = 0.01


def received_power(effective_row: np.ndarray, precoder: np.ndarray,
                   p: float, alpha: float) -> float:
    """|e^H p|^2 P alpha for one user's effective channel row and precoder."""
    gain = np.asarray(effective_row) @ np.asarray(precoder)
    return float(np.abs(gain) ** 2 * p * alpha)


@dataclass(frozen=True)
class TrialResult:
    """Per-user received powers of one trial, grouped by base station."""

    user_powers: tuple[tuple[float, ...], ...]
    trial: int = 0
    seed: int = 0


def sum_power_per_bs(result: TrialResult) -> tuple[float, ...]:
    return tuple(float(sum(powers)) for powers in result.user_powers)


def network_sum_power(result: TrialResult) -> float:
    return float(sum(sum_power_per_bs(result)))


def evaluate_received_powers(channels: ChannelSet, thetas: list[np.ndarray],
                             power: PowerConfig, trial: int = 0,
                             seed: int = 0) -> TrialResult:
    """Received powers under synchronized zero-forcing precoding.

    ``thetas[b]`` is the reflection matrix at base station b's operating
    frequency; precoders are derived from the same effective channels the
    signal propagates through.
    """
    per_bs = []
    for b, theta in enumerate(thetas):
        eff = effective_channels(channels, b, theta)
        cross = eff @ zf_precoder(eff)
        per_bs.append(tuple(
            float(np.abs(cross[k, k]) ** 2 * power.p * power.alpha[b][k])
            for k in range(cross.shape[0])
        ))
    return TrialResult(user_powers=tuple(per_bs), trial=trial, seed=seed)


def sum_spectral_efficiency_outdated(channels: ChannelSet, b: int,
                                     theta_actual: np.ndarray, power: PowerConfig,
                                     theta_assumed: np.ndarray | None = None) -> float:
    """Sum spectral efficiency of base station b under outdated channel knowledge.

    Precoders are zero-forced against the effective channels the base station
    believes in: by default the direct channels alone (it is unaware of the
    reflecting surface), or optionally a stale reflection matrix
    ``theta_assumed``.  The received symbols propagate through
    ``theta_actual``, so residual inter-user interference enters each user's
    SINR.
    """
    d = channels.num_ris_elements
    if theta_assumed is None:
        theta_assumed = np.zeros((d, d), dtype=complex)
    precoders = zf_precoder(effective_channels(channels, b, theta_assumed))
    cross = effective_channels(channels, b, theta_actual) @ precoders
    k_users = cross.shape[0]
    se = 0.0
    for k in range(k_users):
        signal = np.abs(cross[k, k]) ** 2 * power.p * power.alpha[b][k]
        interference = sum(
            np.abs(cross[k, u]) ** 2 * power.p * power.alpha[b][u]
            for u in range(k_users) if u != k
        )
        se += math.log2(1.0 + signal / (interference + power.noise))
    return float(se)


def frequency_sweep(configured, channels: ChannelSet, b: int,
                    frequencies: np.ndarray, power: PowerConfig) -> np.ndarray:
    """Received powers of base station b's users across operating frequencies.

    The capacitance plan stays fixed (configured for its own target
    frequency); the reflection matrix is re-evaluated and the zero-forcing
    precoders re-derived at every grid frequency.
    """
    out = []
    for f in frequencies:
        theta = configured.scattering_at(f)
        eff = effective_channels(channels, b, theta)
        cross = eff @ zf_precoder(eff)
        out.append([
            np.abs(cross[k, k]) ** 2 * power.p * power.alpha[b][k]
            for k in range(cross.shape[0])
        ])
    return np.asarray(out)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep: variable name, value grid, trials per point, architectures."""

    variable: str
    grid: tuple
    trials: int
    architectures: tuple[str, ...]

    def __post_init__(self):
        if not self.grid:
            raise ValueError("sweep grid must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.architectures:
            raise ValueError("need at least one architecture")


@dataclass(frozen=True)
class ResultRow:
    variable: str
    value: object
    architecture: str
    metric: str
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class AggregateResult:
    rows: tuple[ResultRow, ...]

    def mean_of(self, value, architecture: str, metric: str) -> float:
        return self._one(value, architecture, metric).mean

    def stderr_of(self, value, architecture: str, metric: str) -> float:
        return self._one(value, architecture, metric).stderr

    def _one(self, value, architecture: str, metric: str) -> ResultRow:
        hits = [r for r in self.rows
                if r.value == value and r.architecture == architecture and r.metric == metric]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match ({value}, {architecture}, {metric})")
        return hits[0]

    def curve(self, architecture: str, metric: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(grid values, means, stderrs) of one curve, in row order."""
        rows = [r for r in self.rows
                if r.architecture == architecture and r.metric == metric]
        return (np.array([r.value for r in rows]),
                np.array([r.mean for r in rows]),
                np.array([r.stderr for r in rows]))


def aggregate(samples) -> tuple[float, float]:
    """Sample mean and standard error, accumulated in trial order."""
    arr = np.asarray(samples, dtype=float)
    mean = float(arr.mean())
    stderr = 0.0 if arr.size < 2 else float(arr.std(ddof=1) / np.sqrt(arr.size))
    return mean, stderr


def run_monte_carlo(spec: SweepSpec, point_fn) -> AggregateResult:
    """Run the sweep: per (architecture, grid value), average metrics over trials.

    ``point_fn(value, architecture, trial, attempt)`` performs one trial
    (sample channels with the per-trial substream, configure the surface,
    evaluate) and returns a dict of metric name to float.  Trials raising
    :class:`DegenerateChannelError` are redrawn with the next attempt index;
    a grid point fails once more than 1% of its trials degenerate.
    """
    rows = []
    for architecture in spec.architectures:
        for value in spec.grid:
            samples: dict[str, list[float]] = {}
            degenerate = 0
            allowed = max(1, int(MAX_DEGENERATE_FRACTION * spec.trials))
            for trial in range(spec.trials):
                attempt = 0
                while True:
                    try:
                        metrics = point_fn(value, architecture, trial, attempt)
                        break
                    except DegenerateChannelError:
                        degenerate += 1
                        attempt += 1
                        logger.warning("degenerate draw at %s=%r trial %d; redrawing",
                                       spec.variable, value, trial)
                        if degenerate > allowed:
                            raise RuntimeError(
                                f"more than {MAX_DEGENERATE_FRACTION:.0%} degenerate trials "
                                f"at {spec.variable}={value!r}")
                for name, sample in metrics.items():
                    samples.setdefault(name, []).append(float(sample))
            for name in samples:
                mean, stderr = aggregate(samples[name])
                rows.append(ResultRow(spec.variable, value, architecture, name,
                                      mean, stderr, spec.trials))
    return AggregateResult(rows=tuple(rows))
