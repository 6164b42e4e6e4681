"""Frequency-domain coherence of coupled linear dynamical networks.

A network couples ``n`` heterogeneous scalar transfer functions ``g_i``
through a weighted graph Laplacian ``L`` and a scalar coupling filter
``f``.  The closed-loop transfer matrix from nodal inputs to nodal
outputs is

    T(s) = (diag{1/g_i(s)} + f(s) L)^{-1}.

As the effective connectivity ``|f(s)| * lambda_2(L)`` grows, ``T(s)``
concentrates around the rank-one coherent part ``(1/n) gbar(s) 11^T``,
where ``gbar`` is the harmonic mean of the node dynamics.  This module
computes ``T``, the coherent projection, the incoherence (spectral-norm
distance between the two), an a-priori upper bound on that distance,
frequency sweeps, connectivity-scaling studies, and diagnostic checks
for the regimes where coherence is and is not guaranteed.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.polynomial as npoly

from ._parallel import map_ordered
from .errors import NumericalError, ValidationError, IllConditionedWarning, GridRefinementWarning
from .network import LaplacianMatrix, algebraic_connectivity, grounded, scale_connectivity
from .rational import (
    AT_INFINITY,
    ExtComplex,
    IndeterminateAt,
    Properness,
    RationalTF,
    harmonic_mean,
    is_at_infinity,
    poles,
    properness,
    simplify,
    tf_approx_equal,
    tf_eval,
    zeros,
)
from .rational import ExcessiveDegree, _poly_envelope  # reuse the evaluation envelope

import warnings

__all__ = [
    "PoleOfCoupling",
    "NodePole",
    "SingularSystem",
    "PoleOfCoherent",
    "NotAPoleOfCoherent",
    "BoundHypothesisViolated",
    "PoleOnGrid",
    "ZeroOnGrid",
    "UndefinedPointInGrid",
    "HypothesisViolated",
    "DegenerateGamma",
    "AssumptionReport",
    "NetworkModel",
    "FrequencyGrid",
    "CoherenceReport",
    "SweepResult",
    "ConvergenceRow",
    "FailureRow",
    "UniformityVerdict",
    "COND_LIMIT",
    "DEFAULT_TOL_CLASSIFY",
    "transfer_matrix",
    "transfer_matrix_direct",
    "transfer_matrix_modal",
    "gbar_value",
    "coherent_projection",
    "incoherence",
    "effective_connectivity",
    "nodal_multiplicity",
    "lemma4_bound",
    "default_bounds",
    "evaluate_point",
    "sweep",
    "sup_incoherence",
    "convergence_study",
    "coherent_pole_direction",
    "normalized_incoherence",
    "rhp_uniform_check",
    "failure_experiment",
    "report_csv_header",
    "report_csv_row",
]

# Condition-number threshold above which a linear solve is flagged.
COND_LIMIT = 1e12
# Distance below which a probe point is classified as hitting a root.
DEFAULT_TOL_CLASSIFY = 1e-6
# Relative tolerance used when validating bound hypotheses numerically.
_HYPOTHESIS_RTOL = 1e-9
# Relative tolerance for deciding that s0 sits on a pole of gbar.
DEFAULT_TOL_POLE = 1e-8


class PoleOfCoupling(ValidationError):
    """The probe point is a pole of the coupling filter ``f``."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"coupling filter has a pole at s = {self.s}")


class NodePole(ValidationError):
    """A node transfer function is infinite at the probe point."""

    def __init__(self, s: complex, node: int):
        self.s = complex(s)
        self.node = int(node)
        super().__init__(f"node {node} has a pole at s = {self.s}")


class SingularSystem(NumericalError):
    """The closed-loop system matrix is numerically singular."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"closed-loop system matrix is singular at s = {self.s}")


class PoleOfCoherent(ValidationError):
    """The probe point is a pole of the coherent dynamics ``gbar``."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"coherent dynamics have a pole at s = {self.s}")


class NotAPoleOfCoherent(ValidationError):
    """The probe point is not a pole of ``gbar`` (required here)."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"s = {self.s} is not a pole of the coherent dynamics")


class BoundHypothesisViolated(ValidationError):
    """Supplied envelope constants do not dominate the sampled values."""


class PoleOnGrid(ValidationError):
    """A grid point coincides with a pole of ``gbar``."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"grid point s = {self.s} is a pole of the coherent dynamics")


class ZeroOnGrid(ValidationError):
    """A grid point coincides with a zero of ``gbar``."""

    def __init__(self, s: complex):
        self.s = complex(s)
        super().__init__(f"grid point s = {self.s} is a zero of the coherent dynamics")


class UndefinedPointInGrid(ValidationError):
    """The requested scalar summary is undefined at some grid point."""

    def __init__(self, s: complex, status: str):
        self.s = complex(s)
        self.status = status
        super().__init__(f"incoherence undefined at grid point s = {self.s} ({status})")


class HypothesisViolated(ValidationError):
    """An experiment's structural hypothesis fails for the given network."""


class DegenerateGamma(NumericalError):
    """The coherent-pole direction is numerically indeterminate."""


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


def _inverse_value(g: RationalTF, s: complex, tol_zero: float) -> ExtComplex:
    """Evaluate 1/g at ``s`` with envelope-based zero detection."""
    num_val = npoly.polyval(s, g.num.coeffs)
    den_val = npoly.polyval(s, g.den.coeffs)
    r = abs(s)
    num_env = _poly_envelope(g.num.coeffs, r)
    den_env = _poly_envelope(g.den.coeffs, r)
    num_small = abs(num_val) <= tol_zero * max(num_env, 1e-300)
    den_small = abs(den_val) <= tol_zero * max(den_env, 1e-300)
    if num_small and den_small:
        raise IndeterminateAt(s)
    if num_small:
        return AT_INFINITY
    if den_small:
        return 0j
    return complex(den_val) / complex(num_val)


@dataclass(frozen=True)
class AssumptionReport:
    """Structural validation of a network model.

    Hard violations (``ok`` is False): an improper node or coupling
    filter, or a pole of the coupling filter that coincides with a zero
    of some node (the closed loop is not well posed there).  A
    disconnected graph is reported but is only a warning: the model is
    usable, coherence simply cannot be achieved globally.
    """

    improper_nodes: tuple[int, ...]
    coupling_improper: bool
    connected: bool
    coupling_pole_clashes: tuple[tuple[int, complex], ...]

    @property
    def ok(self) -> bool:
        return not self.improper_nodes and not self.coupling_improper and not self.coupling_pole_clashes

    def summary(self) -> str:
        lines: list[str] = []
        for i in self.improper_nodes:
            lines.append(f"violation: node {i} is improper (more zeros than poles)")
        if self.coupling_improper:
            lines.append("violation: coupling filter is improper")
        for i, p in self.coupling_pole_clashes:
            lines.append(f"violation: coupling pole at {p} coincides with a zero of node {i}")
        if not self.connected:
            lines.append("warning: graph is disconnected (algebraic connectivity is zero)")
        if not lines:
            lines.append("ok: all structural assumptions hold")
        return "\n".join(lines)


class NetworkModel:
    """A graph Laplacian, per-node dynamics, and a scalar coupling filter."""

    __slots__ = (
        "laplacian",
        "nodes",
        "coupling",
        "gbar",
        "assumptions",
        "node_zeros",
        "node_poles",
        "coupling_poles",
        "gbar_poles",
        "gbar_zeros",
        "homogeneous",
    )

    def __init__(
        self,
        laplacian: LaplacianMatrix,
        nodes: Sequence[RationalTF],
        coupling: RationalTF,
        *,
        tol_cancel: float | None = None,
    ):
        nodes = tuple(simplify(g, tol_cancel) if tol_cancel is not None else simplify(g) for g in nodes)
        coupling = simplify(coupling, tol_cancel) if tol_cancel is not None else simplify(coupling)
        if len(nodes) != laplacian.n:
            raise ValidationError(
                f"got {len(nodes)} node dynamics for a graph with {laplacian.n} nodes"
            )
        self.laplacian = laplacian
        self.nodes = nodes
        self.coupling = coupling
        try:
            self.gbar: RationalTF | None = harmonic_mean(nodes)
        except ExcessiveDegree:
            self.gbar = None
        self.node_zeros = tuple(zeros(g) for g in nodes)
        self.node_poles = tuple(poles(g) for g in nodes)
        self.coupling_poles = poles(coupling)
        self.gbar_poles = poles(self.gbar) if self.gbar is not None else None
        self.gbar_zeros = zeros(self.gbar) if self.gbar is not None else None
        self.homogeneous = all(tf_approx_equal(g, nodes[0]) for g in nodes[1:]) if nodes else True
        self.assumptions = self._validate()

    @property
    def n(self) -> int:
        return self.laplacian.n

    def _validate(self) -> AssumptionReport:
        improper = tuple(
            i for i, g in enumerate(self.nodes) if properness(g) is Properness.IMPROPER
        )
        coupling_improper = properness(self.coupling) is Properness.IMPROPER
        clashes: list[tuple[int, complex]] = []
        for p in self.coupling_poles:
            for i, zs in enumerate(self.node_zeros):
                if zs.size and np.min(np.abs(zs - p)) <= DEFAULT_TOL_CLASSIFY:
                    clashes.append((i, complex(p)))
        return AssumptionReport(
            improper_nodes=improper,
            coupling_improper=coupling_improper,
            connected=self.laplacian.connected,
            coupling_pole_clashes=tuple(clashes),
        )

    def with_laplacian(self, laplacian: LaplacianMatrix) -> "NetworkModel":
        """Same dynamics on a different graph, skipping the re-derivation."""
        if laplacian.n != self.n:
            raise ValidationError("replacement graph has a different node count")
        clone = object.__new__(NetworkModel)
        clone.laplacian = laplacian
        clone.nodes = self.nodes
        clone.coupling = self.coupling
        clone.gbar = self.gbar
        clone.node_zeros = self.node_zeros
        clone.node_poles = self.node_poles
        clone.coupling_poles = self.coupling_poles
        clone.gbar_poles = self.gbar_poles
        clone.gbar_zeros = self.gbar_zeros
        clone.homogeneous = self.homogeneous
        clone.assumptions = AssumptionReport(
            improper_nodes=self.assumptions.improper_nodes,
            coupling_improper=self.assumptions.coupling_improper,
            connected=laplacian.connected,
            coupling_pole_clashes=self.assumptions.coupling_pole_clashes,
        )
        return clone


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyGrid:
    """Probe points ``sigma + j*omega`` along a vertical line."""

    sigma: float
    omegas: np.ndarray
    spacing: str  # "lin" | "log"

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        if om.ndim != 1:
            raise ValidationError("frequencies must form a one-dimensional sequence")
        if not np.all(np.isfinite(om)) or not math.isfinite(self.sigma):
            raise ValidationError("frequency grid values must be finite")
        if om.size > 1 and not np.all(np.diff(om) > 0):
            raise ValidationError("frequencies must be strictly increasing")
        if self.spacing not in ("lin", "log"):
            raise ValidationError(f"spacing must be 'lin' or 'log', got {self.spacing!r}")
        object.__setattr__(self, "omegas", om)

    @classmethod
    def linear(cls, sigma: float, omega_min: float, omega_max: float, points: int) -> "FrequencyGrid":
        if points < 1:
            raise ValidationError("points must be >= 1")
        if points == 1:
            om = np.array([float(omega_min)])
        else:
            if not omega_max > omega_min:
                raise ValidationError("omega_max must exceed omega_min")
            om = np.linspace(omega_min, omega_max, points)
        return cls(float(sigma), om, "lin")

    @classmethod
    def logarithmic(cls, sigma: float, omega_min: float, omega_max: float, points: int) -> "FrequencyGrid":
        if points < 1:
            raise ValidationError("points must be >= 1")
        if omega_min <= 0:
            raise ValidationError("log spacing requires omega_min > 0")
        if points == 1:
            om = np.array([float(omega_min)])
        else:
            if not omega_max > omega_min:
                raise ValidationError("omega_max must exceed omega_min")
            om = np.geomspace(omega_min, omega_max, points)
        return cls(float(sigma), om, "log")

    @property
    def points(self) -> np.ndarray:
        return self.sigma + 1j * self.omegas

    def refined(self) -> "FrequencyGrid":
        """A nested grid with doubled density (midpoints inserted)."""
        om = self.omegas
        if om.size <= 1:
            return self
        if self.spacing == "lin":
            mids = (om[:-1] + om[1:]) / 2.0
        else:
            mids = np.sqrt(om[:-1] * om[1:])
        merged = np.sort(np.concatenate([om, mids]))
        return FrequencyGrid(self.sigma, merged, self.spacing)


# ---------------------------------------------------------------------------
# Point evaluation
# ---------------------------------------------------------------------------


def _node_inverse_values(net: NetworkModel, s: complex, tol_zero: float) -> tuple[np.ndarray, list[int]]:
    """Values of 1/g_i at ``s``; indices of nodes whose gain vanishes there."""
    inv = np.zeros(net.n, dtype=complex)
    vanished: list[int] = []
    for i, g in enumerate(net.nodes):
        v = _inverse_value(g, s, tol_zero)
        if is_at_infinity(v):
            vanished.append(i)
        else:
            inv[i] = v
    return inv, vanished


def _coupling_value(net: NetworkModel, s: complex, tol_zero: float) -> ExtComplex:
    return tf_eval(net.coupling, s, tol_zero=tol_zero)


def _solve_transfer(
    net: NetworkModel, s: complex, tol_zero: float
) -> tuple[np.ndarray, float, np.ndarray, list[int]]:
    """Closed-loop transfer matrix, its solve condition estimate, the node
    inverse gains, and the list of vanished-gain nodes.

    Nodes with vanishing gain pin their outputs to zero; the remaining
    block is solved against the grounded Laplacian obtained by deleting
    their rows and columns.
    """
    f_val = _coupling_value(net, s, tol_zero)
    if is_at_infinity(f_val):
        raise PoleOfCoupling(s)
    inv, vanished = _node_inverse_values(net, s, tol_zero)
    n = net.n
    if not vanished:
        a = np.diag(inv) + f_val * net.laplacian.matrix.astype(complex)
        try:
            t = np.linalg.solve(a, np.eye(n, dtype=complex))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(s) from exc
        cond = float(np.linalg.norm(a, 1) * np.linalg.norm(t, 1))
        return t, cond, inv, vanished
    t = np.zeros((n, n), dtype=complex)
    kept = [i for i in range(n) if i not in set(vanished)]
    if not kept:
        return t, 1.0, inv, vanished
    sub = net.laplacian.matrix[np.ix_(kept, kept)].astype(complex)
    a = np.diag(inv[kept]) + f_val * sub
    try:
        x = np.linalg.solve(a, np.eye(len(kept), dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(s) from exc
    cond = float(np.linalg.norm(a, 1) * np.linalg.norm(x, 1))
    t[np.ix_(kept, kept)] = x
    return t, cond, inv, vanished


def transfer_matrix(
    net: NetworkModel,
    s: complex,
    *,
    tol_zero: float = 1e-12,
    cond_limit: float = COND_LIMIT,
) -> np.ndarray:
    """Closed-loop transfer matrix T(s) of the coupled network.

    Solves ``(diag{1/g_i(s)} + f(s) L) T = I``.  Nodes whose gain
    vanishes at ``s`` have identically zero rows and columns; the rest
    of the matrix comes from the correspondingly grounded graph.  Emits
    ``IllConditionedWarning`` when the solve's condition estimate
    exceeds ``cond_limit``.
    """
    t, cond, _, _ = _solve_transfer(net, s, tol_zero)
    if cond > cond_limit:
        warnings.warn(
            f"transfer-matrix solve at s = {s} has condition estimate {cond:.3e}",
            IllConditionedWarning,
            stacklevel=2,
        )
    return t


def transfer_matrix_direct(
    net: NetworkModel, s: complex, *, tol_zero: float = 1e-12
) -> np.ndarray:
    """Reference evaluation ``(I + G(s) f(s) L)^{-1} G(s)``.

    Requires every node gain to be finite at ``s`` (raises ``NodePole``
    otherwise); algebraically identical to ``transfer_matrix`` wherever
    both are defined, and kept as an independent cross-check.
    """
    f_val = _coupling_value(net, s, tol_zero)
    if is_at_infinity(f_val):
        raise PoleOfCoupling(s)
    gains = np.zeros(net.n, dtype=complex)
    for i, g in enumerate(net.nodes):
        v = tf_eval(g, s, tol_zero=tol_zero)
        if is_at_infinity(v):
            raise NodePole(s, i)
        gains[i] = v
    g_mat = np.diag(gains)
    a = np.eye(net.n, dtype=complex) + g_mat @ (f_val * net.laplacian.matrix.astype(complex))
    try:
        return np.linalg.solve(a, g_mat)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(s) from exc


def transfer_matrix_modal(
    net: NetworkModel, s: complex, *, tol_zero: float = 1e-12
) -> np.ndarray:
    """Eigenbasis evaluation for identical node dynamics.

    With every node equal to ``g``, the closed loop diagonalizes in the
    Laplacian eigenbasis: ``T(s) = sum_k v_k v_k^T / (1/g(s) + f(s) lambda_k)``.
    Raises ``ValidationError`` for heterogeneous networks; used as an
    independent oracle for the linear-solve path.
    """
    if not net.homogeneous:
        raise ValidationError("eigenbasis evaluation requires identical node dynamics")
    f_val = _coupling_value(net, s, tol_zero)
    if is_at_infinity(f_val):
        raise PoleOfCoupling(s)
    g_inv = _inverse_value(net.nodes[0], s, tol_zero)
    lam = net.laplacian.eigenvalues
    vecs = net.laplacian.eigenvectors
    if is_at_infinity(g_inv):
        return np.zeros((net.n, net.n), dtype=complex)
    denoms = g_inv + f_val * lam
    if np.any(np.abs(denoms) == 0.0):
        raise SingularSystem(s)
    return (vecs * (1.0 / denoms)) @ vecs.T


def gbar_value(net: NetworkModel, s: complex, *, tol_zero: float = 1e-12) -> ExtComplex:
    """Point value of the coherent dynamics: harmonic mean of node gains.

    Returns ``AT_INFINITY`` at poles of the mean and ``0j`` wherever any
    node gain vanishes.  Works point-wise, so it never needs the symbolic
    mean (which can be expensive for large heterogeneous networks).
    """
    inv, vanished = _node_inverse_values(net, s, tol_zero)
    if vanished:
        return 0j
    mean = complex(np.sum(inv)) / net.n
    scale = float(np.sum(np.abs(inv))) / net.n
    if abs(mean) <= tol_zero * max(scale, 1e-300):
        return AT_INFINITY
    return 1.0 / mean


def coherent_projection(net: NetworkModel, s: complex, *, tol_zero: float = 1e-12) -> np.ndarray:
    """Rank-one coherent part ``(1/n) gbar(s) 11^T``."""
    v = gbar_value(net, s, tol_zero=tol_zero)
    if is_at_infinity(v):
        raise PoleOfCoherent(s)
    n = net.n
    return (v / n) * np.ones((n, n), dtype=complex)


def incoherence(net: NetworkModel, s: complex, *, tol_zero: float = 1e-12) -> float:
    """Spectral-norm distance between T(s) and its coherent part."""
    proj = coherent_projection(net, s, tol_zero=tol_zero)
    t, _, _, _ = _solve_transfer(net, s, tol_zero)
    return float(np.linalg.norm(t - proj, 2))


def effective_connectivity(net: NetworkModel, s: complex, *, tol_zero: float = 1e-12) -> float:
    """|f(s)| times the algebraic connectivity; ``inf`` at poles of f."""
    f_val = _coupling_value(net, s, tol_zero)
    lam2 = algebraic_connectivity(net.laplacian)
    if is_at_infinity(f_val):
        return math.inf
    return abs(f_val) * lam2


def nodal_multiplicity(net: NetworkModel, s: complex, *, tol: float = DEFAULT_TOL_CLASSIFY) -> int:
    """Number of nodes whose gain vanishes at ``s`` (zero within ``tol``)."""
    count = 0
    for zs in net.node_zeros:
        if zs.size and np.min(np.abs(zs - s)) <= tol:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Bound
# ---------------------------------------------------------------------------


def lemma4_bound(
    net: NetworkModel,
    s: complex,
    m1: float,
    m2: float,
    *,
    tol_zero: float = 1e-12,
) -> float | None:
    """A-priori incoherence bound from envelope constants.

    With ``m1 >= |gbar(s)|`` and ``m2 >= max_i |1/g_i(s)|`` the
    incoherence at ``s`` is at most

        (m1 m2 + 1)^2 / (|f(s)| lambda_2 - m2 - m1 m2^2)

    whenever the denominator is positive; returns ``None`` (not
    applicable) otherwise.  The two envelope hypotheses are validated
    numerically and ``BoundHypothesisViolated`` is raised when they
    fail at ``s``.
    """
    if m1 <= 0 or m2 <= 0:
        raise ValidationError("envelope constants must be positive")
    f_val = _coupling_value(net, s, tol_zero)
    if is_at_infinity(f_val):
        raise PoleOfCoupling(s)
    gb = gbar_value(net, s, tol_zero=tol_zero)
    if is_at_infinity(gb):
        raise BoundHypothesisViolated(
            f"coherent dynamics are infinite at s = {s}; no finite envelope applies"
        )
    if abs(gb) > m1 * (1.0 + _HYPOTHESIS_RTOL):
        raise BoundHypothesisViolated(
            f"|gbar({s})| = {abs(gb):.6g} exceeds the envelope m1 = {m1:.6g}"
        )
    inv, vanished = _node_inverse_values(net, s, tol_zero)
    if vanished:
        raise BoundHypothesisViolated(
            f"node {vanished[0]} gain vanishes at s = {s}; inverse gains unbounded"
        )
    max_inv = float(np.max(np.abs(inv))) if net.n else 0.0
    if max_inv > m2 * (1.0 + _HYPOTHESIS_RTOL):
        raise BoundHypothesisViolated(
            f"max_i |1/g_i({s})| = {max_inv:.6g} exceeds the envelope m2 = {m2:.6g}"
        )
    lam2 = algebraic_connectivity(net.laplacian)
    denom = abs(f_val) * lam2 - m2 - m1 * m2 * m2
    if denom <= 0.0:
        return None
    return (m1 * m2 + 1.0) ** 2 / denom


def default_bounds(
    net: NetworkModel,
    grid: FrequencyGrid,
    *,
    margin: float = 1.05,
    tol_zero: float = 1e-12,
) -> tuple[float, float]:
    """Envelope constants from a frequency sweep, inflated by ``margin``.

    ``m1`` dominates ``|gbar|`` and ``m2`` dominates ``max_i |1/g_i|``
    over the grid.  Raises ``PoleOnGrid``/``ZeroOnGrid`` when a grid
    point makes one of the suprema infinite.
    """
    if margin < 1.0:
        raise ValidationError("margin must be >= 1")
    m1 = 0.0
    m2 = 0.0
    for s in grid.points:
        gb = gbar_value(net, complex(s), tol_zero=tol_zero)
        if is_at_infinity(gb):
            raise PoleOnGrid(complex(s))
        inv, vanished = _node_inverse_values(net, complex(s), tol_zero)
        if vanished:
            raise ZeroOnGrid(complex(s))
        m1 = max(m1, abs(gb))
        m2 = max(m2, float(np.max(np.abs(inv))) if inv.size else 0.0)
    if m1 == 0.0 or m2 == 0.0:
        raise ValidationError("degenerate envelopes: node gains vanish identically on the grid")
    return margin * m1, margin * m2


# ---------------------------------------------------------------------------
# Reports and sweeps
# ---------------------------------------------------------------------------

STATUS_OK = "ok"
STATUS_POLE_F = "pole_f"
STATUS_POLE_GBAR = "pole_gbar"
STATUS_ZERO_GBAR = "zero_gbar"
STATUS_ILL_CONDITIONED = "ill_conditioned"


@dataclass(frozen=True)
class CoherenceReport:
    """Everything measured at one probe point.

    ``incoherence`` and ``bound`` are ``None`` where undefined or not
    applicable; ``effective_connectivity`` is ``inf`` at poles of the
    coupling filter.  ``norm_transfer`` is reported whenever the
    transfer matrix itself exists (in particular at poles of the
    coherent mean, where the incoherence is undefined but ``|T|``
    remains informative).
    """

    s0: complex
    status: str
    gbar: complex | None
    incoherence: float | None
    bound: float | None
    effective_connectivity: float
    norm_transfer: float | None
    multiplicity: int
    transfer: np.ndarray | None = field(repr=False, default=None)


@dataclass(frozen=True)
class SweepResult:
    grid: FrequencyGrid
    reports: tuple[CoherenceReport, ...]
    m1: float | None
    m2: float | None

    def sup_incoherence(self) -> float:
        sup = 0.0
        for r in self.reports:
            if r.incoherence is None:
                raise UndefinedPointInGrid(r.s0, r.status)
            sup = max(sup, r.incoherence)
        return sup


@dataclass(frozen=True)
class _PointCore:
    status: str
    transfer: np.ndarray | None
    cond: float
    gbar: ExtComplex | None
    inv_max: float | None
    multiplicity: int


def _classify_gbar(net: NetworkModel, s: complex, value: ExtComplex, tol: float) -> str:
    """Status of gbar at ``s``: '', 'pole', or 'zero'."""
    if net.gbar_poles is not None:
        if net.gbar_poles.size and np.min(np.abs(net.gbar_poles - s)) <= tol:
            return "pole"
        if net.gbar_zeros.size and np.min(np.abs(net.gbar_zeros - s)) <= tol:
            return "zero"
        return ""
    if is_at_infinity(value):
        return "pole"
    if value == 0:
        return "zero"
    return ""


def _point_core(
    net: NetworkModel,
    s: complex,
    *,
    tol_zero: float = 1e-12,
    tol_classify: float = DEFAULT_TOL_CLASSIFY,
) -> _PointCore:
    multiplicity = nodal_multiplicity(net, s, tol=tol_classify)
    if net.coupling_poles.size and np.min(np.abs(net.coupling_poles - s)) <= tol_classify:
        return _PointCore(STATUS_POLE_F, None, 0.0, None, None, multiplicity)
    try:
        t, cond, inv, vanished = _solve_transfer(net, s, tol_zero)
    except SingularSystem:
        # A pole of the closed loop itself: T does not exist there.  The
        # point is still classified (it typically coincides with a pole
        # of the coherent mean) instead of aborting a whole sweep.
        t = None
        cond = math.inf
        inv, vanished = _node_inverse_values(net, s, tol_zero)
    if vanished:
        gb: ExtComplex = 0j
    else:
        mean = complex(np.sum(inv)) / net.n
        scale = float(np.sum(np.abs(inv))) / net.n
        gb = AT_INFINITY if abs(mean) <= tol_zero * max(scale, 1e-300) else 1.0 / mean
    kind = _classify_gbar(net, s, gb, tol_classify)
    if kind == "pole":
        status = STATUS_POLE_GBAR
    elif kind == "zero":
        status = STATUS_ZERO_GBAR
    elif cond > COND_LIMIT:
        status = STATUS_ILL_CONDITIONED
    else:
        status = STATUS_OK
    inv_max = None if vanished else (float(np.max(np.abs(inv))) if inv.size else 0.0)
    return _PointCore(status, t, cond, gb, inv_max, multiplicity)


def _report_from_core(
    net: NetworkModel,
    s: complex,
    core: _PointCore,
    m1: float | None,
    m2: float | None,
    *,
    tol_zero: float = 1e-12,
    keep_transfer: bool = False,
) -> CoherenceReport:
    eff = effective_connectivity(net, s, tol_zero=tol_zero)
    if core.status == STATUS_POLE_F:
        return CoherenceReport(
            s0=complex(s),
            status=core.status,
            gbar=None,
            incoherence=None,
            bound=None,
            effective_connectivity=eff,
            norm_transfer=None,
            multiplicity=core.multiplicity,
        )
    norm_t = None if core.transfer is None else float(np.linalg.norm(core.transfer, 2))
    gb_finite = None if is_at_infinity(core.gbar) else complex(core.gbar)
    if core.transfer is None or core.status == STATUS_POLE_GBAR or is_at_infinity(core.gbar):
        inc: float | None = None
    else:
        proj = (complex(core.gbar) / net.n) * np.ones((net.n, net.n), dtype=complex)
        inc = float(np.linalg.norm(core.transfer - proj, 2))
    bound: float | None = None
    if m1 is not None and m2 is not None and inc is not None:
        try:
            bound = lemma4_bound(net, s, m1, m2, tol_zero=tol_zero)
        except (BoundHypothesisViolated, PoleOfCoupling):
            bound = None
    return CoherenceReport(
        s0=complex(s),
        status=core.status,
        gbar=gb_finite,
        incoherence=inc,
        bound=bound,
        effective_connectivity=eff,
        norm_transfer=norm_t,
        multiplicity=core.multiplicity,
        transfer=core.transfer if keep_transfer else None,
    )


def evaluate_point(
    net: NetworkModel,
    s: complex,
    *,
    m1: float | None = None,
    m2: float | None = None,
    tol_zero: float = 1e-12,
    tol_classify: float = DEFAULT_TOL_CLASSIFY,
    keep_transfer: bool = True,
) -> CoherenceReport:
    """Full coherence report at one probe point.

    When envelope constants are omitted they are derived from this
    single point (so the reported bound is the tightest this form
    offers there).  Bound hypotheses that fail merely leave the bound
    empty; structural problems (poles of the coupling filter) surface
    in ``status`` rather than raising.
    """
    core = _point_core(net, s, tol_zero=tol_zero, tol_classify=tol_classify)
    if (
        m1 is None
        and m2 is None
        and core.status in (STATUS_OK, STATUS_ILL_CONDITIONED)
        and not is_at_infinity(core.gbar)
        and core.gbar != 0
        and core.inv_max is not None
        and core.inv_max > 0.0
    ):
        m1 = 1.05 * abs(core.gbar)
        m2 = 1.05 * core.inv_max
    return _report_from_core(
        net, s, core, m1, m2, tol_zero=tol_zero, keep_transfer=keep_transfer
    )


def sweep(
    net: NetworkModel,
    grid: FrequencyGrid,
    *,
    with_bounds: bool = True,
    margin: float = 1.05,
    tol_zero: float = 1e-12,
    tol_classify: float = DEFAULT_TOL_CLASSIFY,
) -> SweepResult:
    """Coherence reports over a frequency grid.

    Never fails on individual points: poles of the coupling filter or
    of the coherent mean, vanishing node gains, and ill-conditioned
    solves are all recorded in each report's ``status``.  Envelope
    constants for the bound column are derived from the clean subset of
    the grid (points where both envelopes are finite), inflated by
    ``margin``.
    """
    pts = [complex(s) for s in grid.points]
    cores = map_ordered(
        lambda s: _point_core(net, s, tol_zero=tol_zero, tol_classify=tol_classify), pts
    )
    m1 = m2 = None
    if with_bounds:
        sup_g = 0.0
        sup_inv = 0.0
        usable = False
        for core in cores:
            if core.status in (STATUS_OK, STATUS_ILL_CONDITIONED) and core.inv_max is not None:
                if not is_at_infinity(core.gbar):
                    usable = True
                    sup_g = max(sup_g, abs(core.gbar))
                    sup_inv = max(sup_inv, core.inv_max)
        if usable and sup_g > 0.0 and sup_inv > 0.0:
            m1 = margin * sup_g
            m2 = margin * sup_inv
    reports = tuple(
        _report_from_core(net, s, core, m1, m2, tol_zero=tol_zero)
        for s, core in zip(pts, cores)
    )
    return SweepResult(grid=grid, reports=reports, m1=m1, m2=m2)


def sup_incoherence(
    net: NetworkModel,
    grid: FrequencyGrid,
    *,
    refine_check: bool = True,
    refine_rtol: float = 0.05,
    tol_zero: float = 1e-12,
) -> float:
    """Largest incoherence over the grid.

    Raises ``UndefinedPointInGrid`` when the incoherence is undefined at
    some grid point.  With ``refine_check`` the grid is re-evaluated at
    doubled density; if the supremum grows by more than ``refine_rtol``
    (relative), a ``GridRefinementWarning`` flags the grid as too coarse.
    """
    result = sweep(net, grid, with_bounds=False, tol_zero=tol_zero)
    sup = result.sup_incoherence()
    if refine_check and grid.omegas.size > 1:
        fine = sweep(net, grid.refined(), with_bounds=False, tol_zero=tol_zero)
        sup_fine = fine.sup_incoherence()
        if sup_fine > sup * (1.0 + refine_rtol) and sup_fine - sup > 1e-15:
            warnings.warn(
                f"doubling the grid density raised the supremum from {sup:.6g} "
                f"to {sup_fine:.6g} (> {refine_rtol:.0%}); the grid is too coarse",
                GridRefinementWarning,
                stacklevel=2,
            )
    return sup


# ---------------------------------------------------------------------------
# Connectivity-scaling study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    alpha: float
    value: float
    bound: float | None
    kind: str  # "incoherence" | "norm_T"


def convergence_study(
    net: NetworkModel,
    s: complex,
    alphas: Sequence[float],
    *,
    tol_zero: float = 1e-12,
    tol_classify: float = DEFAULT_TOL_CLASSIFY,
) -> list[ConvergenceRow]:
    """Incoherence versus uniformly scaled coupling strength.

    Evaluates the network on ``alpha * L`` for each multiplier.  At
    poles of the coherent mean the incoherence is undefined, so the
    study reports ``|T|`` there instead (kind ``norm_T``); the decay
    rate in the connectivity is the same.  Envelope constants for the
    bound column come from the probe point itself and are shared across
    all multipliers (they do not depend on the graph).
    """
    if not alphas:
        raise ValidationError("need at least one multiplier")
    alphas = sorted(float(a) for a in alphas)
    if any(a <= 0 for a in alphas):
        raise ValidationError("multipliers must be positive")
    if net.coupling_poles.size and np.min(np.abs(net.coupling_poles - s)) <= tol_classify:
        raise PoleOfCoupling(s)
    gb = gbar_value(net, s, tol_zero=tol_zero)
    kind = "incoherence"
    if net.gbar_poles is not None:
        if net.gbar_poles.size and np.min(np.abs(net.gbar_poles - s)) <= tol_classify:
            kind = "norm_T"
    elif is_at_infinity(gb):
        kind = "norm_T"
    m1 = m2 = None
    if kind == "incoherence" and not is_at_infinity(gb) and gb != 0:
        inv, vanished = _node_inverse_values(net, s, tol_zero)
        if not vanished:
            inv_max = float(np.max(np.abs(inv)))
            if inv_max > 0.0:
                m1 = 1.05 * abs(gb)
                m2 = 1.05 * inv_max

    def one(alpha: float) -> ConvergenceRow:
        scaled = net.with_laplacian(scale_connectivity(net.laplacian, alpha))
        try:
            t, _, _, _ = _solve_transfer(scaled, s, tol_zero)
        except SingularSystem:
            if kind == "norm_T":
                return ConvergenceRow(alpha, math.inf, None, kind)
            raise
        if kind == "norm_T":
            return ConvergenceRow(alpha, float(np.linalg.norm(t, 2)), None, kind)
        proj = coherent_projection(scaled, s, tol_zero=tol_zero)
        value = float(np.linalg.norm(t - proj, 2))
        bound = None
        if m1 is not None and m2 is not None:
            try:
                bound = lemma4_bound(scaled, s, m1, m2, tol_zero=tol_zero)
            except (BoundHypothesisViolated, PoleOfCoupling):
                bound = None
        return ConvergenceRow(alpha, value, bound, kind)

    return map_ordered(one, alphas)


# ---------------------------------------------------------------------------
# Behaviour at poles of the coherent mean
# ---------------------------------------------------------------------------


def _pole_direction_data(
    net: NetworkModel,
    s: complex,
    lambda_lim: Sequence[float] | None,
    tol_pole: float,
    tol_zero: float,
) -> tuple[complex, complex]:
    """Shared core for the coherent-pole direction.

    Returns ``(gamma, direction)`` where ``gamma`` is the reported
    unit-modulus coefficient ``y/|y|`` with
    ``y = h21^T diag(1/lambda_lim) h21`` (no conjugation: the bilinear
    form follows the transpose), and ``direction`` is the unit complex
    number such that ``T/|T| -> direction * 11^T/n`` as the pole is
    approached, namely ``-(f/|f|) * conj(y)/|y|``.
    """
    n = net.n
    if n < 2:
        raise ValidationError("pole direction needs at least two nodes")
    inv, vanished = _node_inverse_values(net, s, tol_zero)
    if vanished:
        raise NotAPoleOfCoherent(s)
    mean = complex(np.sum(inv)) / n
    scale = float(np.sum(np.abs(inv))) / n
    if not abs(mean) <= tol_pole * max(scale, 1e-300):
        raise NotAPoleOfCoherent(s)
    f_val = _coupling_value(net, s, tol_zero)
    if is_at_infinity(f_val):
        raise PoleOfCoupling(s)
    if f_val == 0:
        raise ValidationError(f"coupling filter vanishes at s = {s}; nodes are decoupled there")
    lam = net.laplacian.eigenvalues[1:]
    vecs = net.laplacian.eigenvectors[:, 1:]
    if lambda_lim is None:
        lam2 = algebraic_connectivity(net.laplacian)
        if lam2 <= 0.0:
            raise ValidationError("pole direction requires a connected graph")
        weights = lam / lam2
    else:
        weights = np.asarray([float(w) for w in lambda_lim], dtype=float)
        if weights.shape != (n - 1,):
            raise ValidationError(
                f"lambda_lim must supply {n - 1} positive values, got shape {weights.shape}"
            )
        if np.any(weights <= 0.0):
            raise ValidationError("lambda_lim values must be positive")
    h21 = vecs.T @ (inv / math.sqrt(n))
    y = complex(np.sum(h21 * h21 / weights))
    y_scale = float(np.sum(np.abs(h21) ** 2 / weights))
    if abs(y) <= 1e-12 * max(y_scale, 1e-300):
        raise DegenerateGamma(
            f"the limiting quadratic form at s = {s} has negligible magnitude"
        )
    gamma = y / abs(y)
    f_phase = complex(f_val) / abs(f_val)
    direction = -f_phase * gamma.conjugate()
    return gamma, direction


def coherent_pole_direction(
    net: NetworkModel,
    s: complex,
    *,
    lambda_lim: Sequence[float] | None = None,
    tol_pole: float = DEFAULT_TOL_POLE,
    tol_zero: float = 1e-12,
) -> complex:
    """Unit-modulus coefficient gamma of the limiting rank-one shape.

    At a pole of the coherent mean, ``T(s)/|T(s)|`` approaches a scalar
    multiple of ``11^T/n``; ``gamma = y/|y|`` with
    ``y = h21^T diag(1/lambda_lim) h21`` determines that scalar, where
    ``h21`` collects the inverse gains projected on the non-uniform
    eigenvectors.  ``lambda_lim`` defaults to the positive Laplacian
    eigenvalues divided by the smallest one.
    """
    gamma, _ = _pole_direction_data(net, s, lambda_lim, tol_pole, tol_zero)
    return gamma


def normalized_incoherence(
    net: NetworkModel,
    s: complex,
    *,
    lambda_lim: Sequence[float] | None = None,
    tol_pole: float = DEFAULT_TOL_POLE,
    tol_zero: float = 1e-12,
) -> float:
    """Shape distance between T and the limiting rank-one profile.

    Valid only at poles of the coherent mean (``NotAPoleOfCoherent``
    otherwise).  Measures ``| T/|T| - c 11^T/n |`` where ``c`` is the
    unit-modulus limit direction; decays as connectivity grows even
    though the raw incoherence is undefined at such points.
    """
    _, direction = _pole_direction_data(net, s, lambda_lim, tol_pole, tol_zero)
    t, _, _, _ = _solve_transfer(net, s, tol_zero)
    norm_t = float(np.linalg.norm(t, 2))
    if norm_t == 0.0:
        raise DegenerateGamma(f"transfer matrix vanishes at s = {s}")
    n = net.n
    target = direction * np.ones((n, n), dtype=complex) / n
    return float(np.linalg.norm(t / norm_t - target, 2))


# ---------------------------------------------------------------------------
# Eligibility for uniform closed-right-half-plane coherence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformityVerdict:
    eligible: bool
    reason: str | None = None

    def __str__(self) -> str:
        if self.eligible:
            return "eligible: uniform right-half-plane coherence guarantees apply"
        return f"ineligible: {self.reason}"


def rhp_uniform_check(
    net: NetworkModel,
    *,
    tol_classify: float = DEFAULT_TOL_CLASSIFY,
    tol_stability: float = 1e-9,
) -> UniformityVerdict:
    """Checks the structural conditions for coherence that is uniform
    over the closed right half-plane (not just point-wise):

    - every node is proper but not strictly proper (finite nonzero
      high-frequency gain),
    - the coherent mean is stable (all poles strictly in the open left
      half-plane),
    - no point of the closed right half-plane is a zero of two or more
      nodes (shared right-half-plane zeros defeat uniformity).
    """
    for i, g in enumerate(net.nodes):
        if properness(g) is Properness.STRICTLY_PROPER:
            return UniformityVerdict(False, f"node {i} is strictly proper (gain vanishes at high frequency)")
        if properness(g) is Properness.IMPROPER:
            return UniformityVerdict(False, f"node {i} is improper")
    if net.gbar is None:
        raise ExcessiveDegree(
            "the symbolic coherent mean is too large to analyze; reduce the network"
        )
    pole_scale = 1.0 + float(np.max(np.abs(net.gbar_poles))) if net.gbar_poles.size else 1.0
    for p in net.gbar_poles:
        if p.real >= -tol_stability * pole_scale:
            return UniformityVerdict(
                False, f"coherent mean has a pole at {complex(p)} (not strictly stable)"
            )
    rhp_zeros: list[complex] = []
    for zs in net.node_zeros:
        for z in zs:
            if z.real >= -tol_classify:
                rhp_zeros.append(complex(z))
    for z in rhp_zeros:
        if nodal_multiplicity(net, z, tol=tol_classify) >= 2:
            return UniformityVerdict(
                False, f"multiple nodes share a right-half-plane zero near {z}"
            )
    return UniformityVerdict(True)


# ---------------------------------------------------------------------------
# Failure experiment: shared zeros defeat uniform coherence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureRow:
    alpha: float
    sup_value: float
    argmax: complex


def _gain_linearization_scale(net: NetworkModel, z: complex, tol: float) -> np.ndarray:
    """|g_i(z)| per node, replaced by |g_i'(z)| at nodes vanishing there.

    Near a shared zero ``z`` the node gains behave like their first
    nonvanishing Taylor term; these magnitudes weight the graph when
    locating where the closed loop loses coherence.
    """
    out = np.zeros(net.n, dtype=float)
    for i, g in enumerate(net.nodes):
        zs = net.node_zeros[i]
        vanishes = bool(zs.size and np.min(np.abs(zs - z)) <= tol)
        num_val = npoly.polyval(z, g.num.coeffs)
        den_val = npoly.polyval(z, g.den.coeffs)
        if vanishes:
            dnum = npoly.polyval(z, npoly.polyder(g.num.coeffs))
            mag = abs(dnum / den_val) if den_val != 0 else 0.0
        else:
            mag = abs(num_val / den_val) if den_val != 0 else 0.0
        out[i] = mag if mag > 0.0 else 1.0
    return out


def failure_experiment(
    net: NetworkModel,
    z: complex,
    radius: float,
    alphas: Sequence[float],
    *,
    angles: int = 24,
    radii: int = 16,
    expect_shared: bool = True,
    tol: float = DEFAULT_TOL_CLASSIFY,
    tol_zero: float = 1e-12,
) -> list[FailureRow]:
    """Sup of the incoherence on a disk around ``z`` versus coupling scale.

    When every node gain vanishes at ``z`` (``expect_shared=True``,
    validated, else ``HypothesisViolated``), the supremum stays bounded
    away from zero no matter how strong the coupling: the obstruction
    migrates toward ``z`` but never disappears.  The sampling disk uses
    log-spaced radii augmented, per multiplier, with the predicted
    obstruction distance ``1 / max eig(D^{1/2} (alpha L) D^{1/2})``
    (``D`` from ``_gain_linearization_scale``), so the shrinking feature
    is actually sampled.  With ``expect_shared=False`` the same sweep
    serves as a control on networks without a shared zero.
    """
    if radius <= 0:
        raise ValidationError("radius must be positive")
    if angles < 4 or radii < 2:
        raise ValidationError("need at least 4 angles and 2 radii")
    if not alphas or any(float(a) <= 0 for a in alphas):
        raise ValidationError("multipliers must be positive")
    mult = nodal_multiplicity(net, z, tol=tol)
    if expect_shared and mult != net.n:
        raise HypothesisViolated(
            f"expected every node gain to vanish at {complex(z)}; only {mult} of {net.n} do"
        )
    scale_diag = _gain_linearization_scale(net, z, tol)
    sqrt_d = np.sqrt(scale_diag)
    base_radii = np.geomspace(radius, radius * 1e-3, radii - 1)
    thetas = 2.0 * math.pi * np.arange(angles) / angles
    rows: list[FailureRow] = []
    for alpha in alphas:
        alpha = float(alpha)
        weighted = sqrt_d[:, None] * (alpha * net.laplacian.matrix) * sqrt_d[None, :]
        lam_max = float(np.max(np.linalg.eigvalsh((weighted + weighted.T) / 2.0)))
        rset = list(base_radii)
        if lam_max > 0.0:
            r_star = 1.0 / lam_max
            if 0.0 < r_star < radius:
                rset.append(r_star)
        sup_val = 0.0
        arg = complex(z)
        for r in rset:
            for th in thetas:
                s = complex(z) + r * cmath.exp(1j * th)
                scaled = net.with_laplacian(scale_connectivity(net.laplacian, alpha))
                try:
                    val = incoherence(scaled, s, tol_zero=tol_zero)
                except (PoleOfCoherent, PoleOfCoupling, SingularSystem, IndeterminateAt):
                    continue
                if val > sup_val:
                    sup_val = val
                    arg = s
        rows.append(FailureRow(alpha=alpha, sup_value=sup_val, argmax=arg))
    return rows


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if isinstance(value, int):
        return str(value)
    return str(value)


def report_csv_header() -> str:
    return "sigma,omega,incoherence,bound,eff_conn,norm_T,multiplicity,status"


def report_csv_row(report: CoherenceReport) -> str:
    cells = [
        _fmt(float(report.s0.real)),
        _fmt(float(report.s0.imag)),
        _fmt(report.incoherence),
        _fmt(report.bound),
        _fmt(report.effective_connectivity),
        _fmt(report.norm_transfer),
        _fmt(report.multiplicity),
        report.status,
    ]
    return ",".join(cells)
