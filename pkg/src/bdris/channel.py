"""Network geometry, Rayleigh fading channel generation, and zero-forcing precoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError

BLOCKED = "blocked"
AVAILABLE = "available"

# Default stream tag; other purposes (baselines, comparisons) use distinct tags.
STREAM_CHANNELS = 0

ZF_RANK_THRESHOLD = 1e-10


@dataclass(frozen=True)
class NetworkScenario:
    """Geometry and link parameters of the multi-band downlink network.

    One base station per operating frequency; ``user_positions[b]`` lists the
    single-antenna users served by base station ``b``.  Path gains follow
    distance power laws with exponent ``eta_direct`` on the direct links and
    ``eta_reflected`` on both segments of the reflected link.
    """

    bs_positions: tuple[tuple[float, float], ...]
    user_positions: tuple[tuple[tuple[float, float], ...], ...]
    ris_position: tuple[float, float]
    m: int
    frequencies: tuple[float, ...]
    eta_direct: float
    eta_reflected: float
    direct_links: str = BLOCKED

    def __post_init__(self):
        if len(self.user_positions) != len(self.bs_positions):
            raise ValueError("need one user list per base station")
        if len(self.frequencies) != len(self.bs_positions):
            raise ValueError("need one operating frequency per base station")
        if any(k < 1 for k in self.users_per_bs):
            raise ValueError("every base station needs at least one user")
        if self.m < 1:
            raise ValueError("antenna count must be >= 1")
        if self.eta_direct <= 0 or self.eta_reflected <= 0:
            raise ValueError("path-loss exponents must be > 0")
        if self.direct_links not in (BLOCKED, AVAILABLE):
            raise ValueError(f"direct_links must be '{BLOCKED}' or '{AVAILABLE}'")
        coords = [self.ris_position, *self.bs_positions]
        for users in self.user_positions:
            coords.extend(users)
        if not np.all(np.isfinite(np.asarray(coords, dtype=float))):
            raise ValueError("all positions must be finite")

    @property
    def num_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def users_per_bs(self) -> tuple[int, ...]:
        return tuple(len(u) for u in self.user_positions)

    def bs_ris_distance(self, b: int) -> float:
        return _dist(self.bs_positions[b], self.ris_position)

    def ris_user_distance(self, b: int, k: int) -> float:
        return _dist(self.ris_position, self.user_positions[b][k])

    def bs_user_distance(self, b: int, k: int) -> float:
        return _dist(self.bs_positions[b], self.user_positions[b][k])


def _dist(p: tuple[float, float], q: tuple[float, float]) -> float:
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


@dataclass(frozen=True)
class PowerConfig:
    """Transmit power budget, per-user power fractions, and noise variance (watts)."""

    p: float
    alpha: tuple[tuple[float, ...], ...]
    noise: float

    def __post_init__(self):
        if self.p <= 0 or self.noise <= 0:
            raise ValueError("power budget and noise variance must be > 0")
        for fractions in self.alpha:
            if any(a < 0 for a in fractions):
                raise ValueError("power fractions must be >= 0")
            if sum(fractions) > 1 + 1e-12:
                raise ValueError("power fractions at a base station must sum to <= 1")

    @classmethod
    def uniform(cls, scenario: NetworkScenario, p: float, noise: float) -> "PowerConfig":
        alpha = tuple(tuple(1.0 / k for _ in range(k)) for k in scenario.users_per_bs)
        return cls(p=p, alpha=alpha, noise=noise)


def path_gain(distance: float, exponent: float) -> float:
    """Distance power-law gain d^-exponent."""
    if distance <= 0:
        raise ValueError("distance must be > 0")
    return float(distance) ** -exponent


@dataclass(frozen=True)
class ChannelSet:
    """One fading realization: per-BS RIS channels and per-user vectors.

    ``g[b]`` is the (D, M) BS-to-RIS matrix, ``f[b][k]`` the (D,) RIS-to-user
    vector, ``h[b][k]`` the (M,) direct BS-to-user vector (exactly zero when
    direct links are blocked).  Path gains are baked into the entries.
    """

    g: tuple[np.ndarray, ...]
    f: tuple[tuple[np.ndarray, ...], ...]
    h: tuple[tuple[np.ndarray, ...], ...]

    @property
    def num_ris_elements(self) -> int:
        return self.g[0].shape[0]


def stream_rng(master_seed: int, trial: int, purpose: int = STREAM_CHANNELS,
               attempt: int = 0) -> np.random.Generator:
    """Deterministic per-(trial, purpose, attempt) random stream."""
    return np.random.default_rng([int(master_seed), int(trial), int(purpose), int(attempt)])


def _crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_channels(scenario: NetworkScenario, d: int,
                    rng: np.random.Generator) -> ChannelSet:
    """Draw one i.i.d. Rayleigh realization of every link, scaled by its path gain.

    Draw order is fixed: every base station's RIS matrix and RIS-to-user
    vectors first, then (only when direct links are available) every direct
    vector.  Blocked and available modes therefore share the reflected-link
    draws for a given stream.
    """
    g, f = [], []
    for b in range(scenario.num_bs):
        gain_g = path_gain(scenario.bs_ris_distance(b), scenario.eta_reflected)
        g.append(_crandn(rng, d, scenario.m) * np.sqrt(gain_g))
        f_b = []
        for k in range(scenario.users_per_bs[b]):
            gain_f = path_gain(scenario.ris_user_distance(b, k), scenario.eta_reflected)
            f_b.append(_crandn(rng, d) * np.sqrt(gain_f))
        f.append(tuple(f_b))
    h = []
    for b in range(scenario.num_bs):
        h_b = []
        for k in range(scenario.users_per_bs[b]):
            if scenario.direct_links == AVAILABLE:
                gain_h = path_gain(scenario.bs_user_distance(b, k), scenario.eta_direct)
                h_b.append(_crandn(rng, scenario.m) * np.sqrt(gain_h))
            else:
                h_b.append(np.zeros(scenario.m, dtype=complex))
        h.append(tuple(h_b))
    return ChannelSet(g=tuple(g), f=tuple(f), h=tuple(h))


def effective_channels(channels: ChannelSet, b: int, theta: np.ndarray) -> np.ndarray:
    """Rows e_k^H = f_k^H Theta G + h_k^H of base station b's users."""
    f_rows = np.array([fk.conj() for fk in channels.f[b]])
    h_rows = np.array([hk.conj() for hk in channels.h[b]])
    return f_rows @ theta @ channels.g[b] + h_rows


def zf_precoder(effective: np.ndarray) -> np.ndarray:
    """Unit-norm zero-forcing precoders for stacked effective channel rows.

    Returns an (M, K) matrix whose column u satisfies e_k^H p_u = 0 for every
    k != u.  Built from the pseudo-inverse of the channel matrix; raises
    :class:`DegenerateChannelError` when the rows are (numerically) rank
    deficient so the caller can redraw the fading.
    """
    effective = np.asarray(effective, dtype=complex)
    k, m = effective.shape
    if k > m:
        raise ValueError("cannot zero-force more users than antennas")
    u, s, vh = np.linalg.svd(effective, full_matrices=False)
    if s[0] == 0 or s[-1] / s[0] < ZF_RANK_THRESHOLD:
        raise DegenerateChannelError("effective channel matrix is rank deficient")
    pinv = (vh.conj().T / s) @ u.conj().T
    return pinv / np.linalg.norm(pinv, axis=0, keepdims=True)
