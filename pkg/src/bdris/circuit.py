"""Frequency-dependent lumped-circuit reflection model.

Each reflecting element is grounded through a tunable resonant branch
(self impedance) and, depending on the architecture, connected to other
elements of its group through tunable varactor branches (inter-element
impedances).  The pipeline capacitances -> branch impedances -> admittance
matrix -> impedance matrix -> scattering matrix is implemented here for
fully-connected (one group), group-connected, and single-connected
(one element per group) surfaces.

All quantities are SI internally: Hz, farads, henries, ohms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import OpenCircuitError, SingularBranchError, SingularNetworkError

# Inversions abort rather than return garbage past this conditioning.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CircuitParams:
    """Fixed lumped-element values of the reflection hardware (SI units).

    ``r``, ``l0`` and ``l`` describe the grounded self branch (outer inductor
    ``l0`` in parallel with the series varactor path ``l`` + capacitor + ``r``);
    ``r_tilde``, ``l0_tilde``, ``l_tilde`` play the same roles in the
    inter-element branches.  ``z0`` is the reference impedance.
    """

    r: float
    l0: float
    l: float
    r_tilde: float
    l0_tilde: float
    l_tilde: float
    z0: float

    def __post_init__(self):
        if min(self.r, self.l, self.r_tilde, self.l_tilde) < 0:
            raise ValueError("resistances and inductances must be >= 0")
        if self.l0 <= 0 or self.l0_tilde <= 0:
            raise ValueError("shunt inductances must be > 0")
        if self.z0 <= 0:
            raise ValueError("reference impedance must be > 0")

    @classmethod
    def defaults(cls) -> "CircuitParams":
        """Reference hardware values used by the bundled experiments."""
        return cls(r=1.0, l0=2.5e-9, l=0.7e-9,
                   r_tilde=1.0, l0_tilde=12.5e-9, l_tilde=0.2e-9, z0=50.0)


@dataclass(frozen=True)
class RisTopology:
    """Element count ``d`` and group count ``g`` of a surface.

    ``g == 1`` is fully-connected, ``g == d`` single-connected, anything in
    between group-connected with ``d // g`` elements per group.
    """

    d: int
    g: int

    def __post_init__(self):
        if self.d < 1 or self.g < 1:
            raise ValueError("element and group counts must be >= 1")
        if self.d % self.g:
            raise ValueError(f"group count {self.g} must divide element count {self.d}")

    @property
    def d_bar(self) -> int:
        return self.d // self.g

    @property
    def architecture(self) -> str:
        if self.g == 1:
            return "fully-connected"
        if self.g == self.d:
            return "single-connected"
        return "group-connected"

    def group_slice(self, k: int) -> slice:
        if not 0 <= k < self.g:
            raise ValueError(f"group index {k} out of range for {self.g} groups")
        return slice(k * self.d_bar, (k + 1) * self.d_bar)

    @classmethod
    def fully_connected(cls, d: int) -> "RisTopology":
        return cls(d, 1)

    @classmethod
    def group_connected(cls, d: int, g: int) -> "RisTopology":
        return cls(d, g)

    @classmethod
    def single_connected(cls, d: int) -> "RisTopology":
        return cls(d, d)


def self_impedance(c, f: float, params: CircuitParams):
    """Impedance of the grounded self branch for capacitance ``c`` at frequency ``f``.

    Parallel combination of the shunt inductor ``l0`` with the series path
    ``l`` + capacitor + ``r``.  Accepts scalar or array capacitances.
    """
    return _resonant_branch(c, f, params.r, params.l0, params.l)


def inter_impedance(c, f: float, params: CircuitParams):
    """Impedance of an inter-element branch; same circuit with the tilde values."""
    return _resonant_branch(c, f, params.r_tilde, params.l0_tilde, params.l_tilde)


def _resonant_branch(c, f, r, l0, l):
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("capacitance must be > 0")
    if f <= 0:
        raise ValueError("frequency must be > 0")
    jw = 2j * np.pi * f
    series = jw * l + 1.0 / (jw * c) + r
    z = (jw * l0) * series / (jw * l0 + series)
    return complex(z) if z.ndim == 0 else z


def admittance_matrix(self_z: np.ndarray, inter_z: np.ndarray | None = None,
                      inter_mask: np.ndarray | None = None) -> np.ndarray:
    """Admittance matrix of the branch network.

    Off-diagonal entries are -1/inter_z[p, q]; diagonal entries are
    1/self_z[p] plus the sum of the reciprocal inter-element impedances
    leaving port p.  ``inter_mask`` marks which off-diagonal branches exist
    (default: all of them when ``inter_z`` is given, none otherwise); absent
    branches contribute zero admittance.
    """
    self_z = np.atleast_1d(np.asarray(self_z, dtype=complex))
    d = self_z.size
    if np.any(self_z == 0):
        raise SingularBranchError("zero self impedance has undefined admittance")

    inv_inter = np.zeros((d, d), dtype=complex)
    if inter_z is not None and d > 1:
        inter_z = np.asarray(inter_z, dtype=complex)
        if inter_z.shape != (d, d):
            raise ValueError(f"inter impedance matrix must be {d}x{d}")
        if inter_mask is None:
            inter_mask = ~np.eye(d, dtype=bool)
        else:
            inter_mask = np.asarray(inter_mask, dtype=bool) & ~np.eye(d, dtype=bool)
        if not np.array_equal(inter_mask, inter_mask.T):
            raise ValueError("inter-element branch mask must be symmetric")
        if np.any(inter_z[inter_mask] != inter_z.T[inter_mask]):
            raise ValueError("inter-element impedances must be symmetric")
        if np.any(inter_z[inter_mask] == 0):
            raise SingularBranchError("zero inter-element impedance has undefined admittance")
        inv_inter[inter_mask] = 1.0 / inter_z[inter_mask]

    y = -inv_inter
    y[np.diag_indices(d)] = 1.0 / self_z + inv_inter.sum(axis=1)
    return y


def _solve_guarded(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    """Solve a @ x = b with an LU factorization and a condition-number guard."""
    a = np.asarray(a, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    anorm = np.linalg.norm(a, 1)
    rcond, info = scipy.linalg.lapack.zgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond < 1.0 / CONDITION_LIMIT:
        raise SingularNetworkError(
            f"{what} is singular or ill-conditioned (rcond={rcond:.2e})")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def _require_symmetric(a: np.ndarray, what: str, tol: float = 1e-8):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise ValueError(f"{what} must be symmetric")


def scattering_from_impedance(z: np.ndarray, z0: float) -> np.ndarray:
    """Scattering matrix (Z + z0 I)^-1 (Z - z0 I) of a reciprocal network."""
    z = np.asarray(z, dtype=complex)
    _require_symmetric(z, "impedance matrix")
    eye = z0 * np.eye(z.shape[0])
    theta = _solve_guarded(z + eye, z - eye, "Z + z0*I")
    return 0.5 * (theta + theta.T)


def impedance_from_scattering(theta: np.ndarray, z0: float) -> np.ndarray:
    """Impedance matrix z0 (I + Theta)(I - Theta)^-1 realizing a reflection matrix.

    Raises :class:`OpenCircuitError` when (I - Theta) is singular (a unit
    eigenvalue corresponds to an open-circuit port with no finite impedance).
    """
    theta = np.asarray(theta, dtype=complex)
    _require_symmetric(theta, "scattering matrix")
    eye = np.eye(theta.shape[0])
    try:
        # (I + Theta) and (I - Theta)^-1 commute, both being polynomials in Theta.
        z = z0 * _solve_guarded(eye - theta, eye + theta, "I - Theta")
    except SingularNetworkError as exc:
        raise OpenCircuitError(str(exc)) from exc
    return 0.5 * (z + z.T)


@dataclass(frozen=True)
class BranchImpedances:
    """Self and inter-element branch impedances recovered from a network matrix.

    Branches whose recovered impedance is effectively infinite (decoupled
    ports, vanishing row sums) are flagged non-finite instead of holding a
    floating-point infinity; their impedance entry is zero and must not be
    read.
    """

    self_z: np.ndarray       # (d,) complex
    self_finite: np.ndarray  # (d,) bool
    inter_z: np.ndarray      # (d, d) complex, symmetric where finite
    inter_finite: np.ndarray  # (d, d) bool, False on the diagonal

    @property
    def order(self) -> int:
        return self.self_z.size


def retrieve_branch_impedances(z: np.ndarray) -> BranchImpedances:
    """Invert the admittance assembly: recover branch impedances from Z.

    With Y = Z^-1, the inter-element impedance between ports p and q is
    -1/Y[p, q] and the self impedance of port p is 1/(row sum of Y at p).
    Entries whose denominator is below 1e-15 * ||Y||_F are flagged infinite.
    """
    z = np.asarray(z, dtype=complex)
    _require_symmetric(z, "impedance matrix")
    d = z.shape[0]
    y = _solve_guarded(z, np.eye(d, dtype=complex), "impedance matrix")
    y = 0.5 * (y + y.T)
    threshold = 1e-15 * np.linalg.norm(y)

    row_sums = y.sum(axis=1)
    self_finite = np.abs(row_sums) >= threshold
    self_z = np.zeros(d, dtype=complex)
    self_z[self_finite] = 1.0 / row_sums[self_finite]

    off = ~np.eye(d, dtype=bool)
    inter_finite = off & (np.abs(y) >= threshold)
    inter_z = np.zeros((d, d), dtype=complex)
    inter_z[inter_finite] = -1.0 / y[inter_finite]
    return BranchImpedances(self_z, self_finite, inter_z, inter_finite)


@dataclass(frozen=True)
class Codebook:
    """Realizable (capacitance, impedance) pairs at one frequency.

    Capacitances are strictly increasing; impedances are the branch values
    those capacitances produce at ``frequency``.
    """

    frequency: float
    bits: int
    self_caps: np.ndarray
    self_z: np.ndarray
    inter_caps: np.ndarray
    inter_z: np.ndarray

    def __len__(self) -> int:
        return self.self_caps.size


def build_codebook(f: float, bits: int, self_range: tuple[float, float],
                   inter_range: tuple[float, float], params: CircuitParams) -> Codebook:
    """Uniformly spaced capacitance codebooks and their impedances at ``f``."""
    if bits < 1:
        raise ValueError("codebook needs at least one quantization bit")
    for lo, hi in (self_range, inter_range):
        if not 0 < lo < hi:
            raise ValueError(f"capacitance range must be positive and increasing, got ({lo}, {hi})")
    n = 2 ** bits
    self_caps = np.linspace(self_range[0], self_range[1], n)
    inter_caps = np.linspace(inter_range[0], inter_range[1], n)
    return Codebook(
        frequency=f,
        bits=bits,
        self_caps=self_caps,
        self_z=self_impedance(self_caps, f, params),
        inter_caps=inter_caps,
        inter_z=inter_impedance(inter_caps, f, params),
    )


@dataclass(frozen=True)
class CapacitancePlan:
    """Symmetric matrix of tunable capacitances for one surface.

    Diagonal entries drive the self branches, off-diagonal entries the
    inter-element branches.  Entries outside the blocks of ``topology`` are
    absent branches and are ignored by the circuit.
    """

    c: np.ndarray
    topology: RisTopology

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.topology.d, self.topology.d):
            raise ValueError(f"capacitance matrix must be {self.topology.d}x{self.topology.d}")
        if not np.array_equal(c, c.T):
            raise ValueError("capacitance matrix must be symmetric")
        object.__setattr__(self, "c", c)


def random_plan(topology: RisTopology, self_range: tuple[float, float],
                inter_range: tuple[float, float], rng: np.random.Generator) -> CapacitancePlan:
    """Capacitances drawn uniformly within the tunable ranges (baseline plans)."""
    d = topology.d
    c = np.zeros((d, d))
    c[np.diag_indices(d)] = rng.uniform(*self_range, size=d)
    for k in range(topology.g):
        sl = topology.group_slice(k)
        d_bar = topology.d_bar
        block = rng.uniform(*inter_range, size=(d_bar, d_bar))
        block = np.triu(block, 1)
        c[sl, sl] += block + block.T
    return CapacitancePlan(c, topology)


def scattering_from_capacitances(plan: CapacitancePlan, f: float,
                                 params: CircuitParams) -> np.ndarray:
    """Scattering matrix produced by a capacitance plan at frequency ``f``.

    Assembles each group's branch impedances into its admittance matrix,
    inverts it, and converts to scattering; groups are independent so the
    result is block-diagonal with symmetric blocks.
    """
    topo = plan.topology
    theta = np.zeros((topo.d, topo.d), dtype=complex)

    if topo.d_bar == 1:
        # Every port only has its self branch: the network is a stack of
        # decoupled one-ports with reflection (z - z0) / (z + z0).
        z = self_impedance(np.diag(plan.c), f, params)
        theta[np.diag_indices(topo.d)] = (z - params.z0) / (z + params.z0)
        return theta

    for k in range(topo.g):
        sl = topo.group_slice(k)
        block = plan.c[sl, sl]
        self_z = self_impedance(np.diag(block), f, params)
        off = ~np.eye(topo.d_bar, dtype=bool)
        inter_z = np.zeros((topo.d_bar, topo.d_bar), dtype=complex)
        inter_z[off] = inter_impedance(block[off], f, params)
        try:
            y = admittance_matrix(self_z, inter_z)
            z = _solve_guarded(y, np.eye(topo.d_bar, dtype=complex), "admittance matrix")
            theta[sl, sl] = scattering_from_impedance(0.5 * (z + z.T), params.z0)
        except (SingularBranchError, SingularNetworkError) as exc:
            raise type(exc)(f"group {k}: {exc}") from exc
    return theta
