"""State-space realization and simulation of coupled networks.

Realizes each node's rational dynamics in controllable canonical form,
assembles the closed loop ``y = G(u - f L y)`` as one state-space
system (eliminating any algebraic loop created by biproper blocks), and
integrates impulse, step, and sinusoid responses with a fixed-step
fourth-order Runge-Kutta scheme.  The coherent reference trajectory —
the response of ``(1/n) gbar`` to the summed input — is what node
outputs collapse onto as connectivity grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from .errors import ValidationError
from .coherence import NetworkModel
from .rational import Properness, RationalTF, properness, tf_scale

__all__ = [
    "ImproperTF",
    "AlgebraicLoop",
    "StepTooLarge",
    "StateSpace",
    "Trajectory",
    "ImpulseAll",
    "StepNode",
    "SinusoidAll",
    "InputSignal",
    "realize",
    "closed_loop",
    "simulate",
    "coherent_reference",
    "default_step",
    "trajectory_csv_lines",
    "write_trajectory_csv",
    "STEP_NORM_LIMIT",
]

# |A|_inf * dt beyond which fixed-step integration is refused.
STEP_NORM_LIMIT = 2.5


class ImproperTF(ValidationError):
    """Only proper transfer functions have state-space realizations."""


class AlgebraicLoop(ValidationError):
    """The interconnection's instantaneous loop matrix is singular."""


class StepTooLarge(ValidationError):
    """The requested time step is too coarse for the system's dynamics."""

    def __init__(self, norm_a: float, dt: float, limit: float):
        self.norm_a = norm_a
        self.dt = dt
        super().__init__(
            f"|A|*dt = {norm_a * dt:.3g} exceeds the stability guard {limit}; "
            f"reduce dt below {limit / max(norm_a, 1e-300):.3g}"
        )


@dataclass(frozen=True)
class StateSpace:
    """Real matrices (A, B, C, D) of dx/dt = Ax + Bu, y = Cx + Du."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        d = np.atleast_2d(np.asarray(self.d, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValidationError(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValidationError(f"B has {b.shape[0]} rows for {a.shape[0]} states")
        if c.shape[1] != a.shape[0]:
            raise ValidationError(f"C has {c.shape[1]} columns for {a.shape[0]} states")
        if d.shape != (c.shape[0], b.shape[1]):
            raise ValidationError(f"D shape {d.shape} does not match C rows x B columns")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    def frequency_response(self, s: complex) -> np.ndarray:
        """C (sI - A)^{-1} B + D at one complex frequency."""
        n = self.n_states
        if n == 0:
            return self.d.astype(complex)
        resolvent = np.linalg.solve(
            s * np.eye(n, dtype=complex) - self.a.astype(complex), self.b.astype(complex)
        )
        return self.c.astype(complex) @ resolvent + self.d.astype(complex)


@dataclass(frozen=True)
class Trajectory:
    """Sampled outputs on a uniform time grid."""

    times: np.ndarray
    outputs: np.ndarray  # n_outputs x len(times)
    input_label: str

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("a trajectory needs at least two samples")
        steps = np.diff(t)
        if not np.all(steps > 0):
            raise ValidationError("times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValidationError("times must be uniformly spaced")
        if y.ndim != 2 or y.shape[1] != t.size:
            raise ValidationError(f"outputs shaped {y.shape} do not match {t.size} samples")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "outputs", y)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_outputs(self) -> int:
        return int(self.outputs.shape[0])


# ---------------------------------------------------------------------------
# Input signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImpulseAll:
    """Dirac impulse of the given magnitude applied to every input."""

    magnitude: float = 1.0

    def label(self) -> str:
        return f"impulse_all(magnitude={self.magnitude})"


@dataclass(frozen=True)
class StepNode:
    """Unit-step input at one node, zero elsewhere."""

    node: int
    magnitude: float = 1.0

    def label(self) -> str:
        return f"step_node(node={self.node}, magnitude={self.magnitude})"


@dataclass(frozen=True)
class SinusoidAll:
    """sin(omega t) of the given amplitude applied to every input."""

    omega: float
    amplitude: float = 1.0

    def label(self) -> str:
        return f"sinusoid_all(omega={self.omega}, amplitude={self.amplitude})"


InputSignal = ImpulseAll | StepNode | SinusoidAll


def _input_function(signal: InputSignal, n_inputs: int) -> Callable[[float], np.ndarray]:
    if isinstance(signal, ImpulseAll):
        zero = np.zeros(n_inputs)
        return lambda t: zero
    if isinstance(signal, StepNode):
        if not 0 <= signal.node < n_inputs:
            raise ValidationError(
                f"step node {signal.node} out of range for {n_inputs} inputs"
            )
        vec = np.zeros(n_inputs)
        vec[signal.node] = signal.magnitude
        return lambda t: vec
    if isinstance(signal, SinusoidAll):
        ones = np.full(n_inputs, signal.amplitude)
        omega = float(signal.omega)
        return lambda t: math.sin(omega * t) * ones
    raise ValidationError(f"unknown input signal {signal!r}")


def _initial_state(signal: InputSignal, ss: StateSpace) -> np.ndarray:
    if isinstance(signal, ImpulseAll):
        # A Dirac impulse through B is equivalent to starting from x(0) = B u0.
        return ss.b @ np.full(ss.n_inputs, signal.magnitude)
    return np.zeros(ss.n_states)


# ---------------------------------------------------------------------------
# Realization
# ---------------------------------------------------------------------------


def realize(g: RationalTF) -> StateSpace:
    """Controllable canonical state-space form of a proper scalar system.

    The denominator is monic by construction; the direct term D is the
    top numerator coefficient when the function is biproper, zero when
    strictly proper.
    """
    if properness(g) is Properness.IMPROPER:
        raise ImproperTF(
            f"degree {g.num.degree} numerator over degree {g.den.degree} denominator"
        )
    den = np.asarray(g.den.coeffs, dtype=float)
    num = np.asarray(g.num.coeffs, dtype=float)
    r = len(den) - 1
    if r == 0:
        gain = num[0] / den[0] if num.size else 0.0
        return StateSpace(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[gain]]
        )
    padded = np.zeros(r + 1)
    padded[: num.size] = num
    d_term = padded[r]
    num_sp = padded[:r] - d_term * den[:r]
    a = np.zeros((r, r))
    if r > 1:
        a[:-1, 1:] = np.eye(r - 1)
    a[-1, :] = -den[:r]
    b = np.zeros((r, 1))
    b[-1, 0] = 1.0
    c = num_sp.reshape(1, r)
    return StateSpace(a, b, c, [[d_term]])


def closed_loop(net: NetworkModel) -> StateSpace:
    """State-space form of the coupled network ``y = G(u - f L y)``.

    Each node contributes its canonical realization; the coupling filter
    is realized once per node channel and fed by the corresponding row
    of ``L y``.  Any instantaneous feedthrough around the loop is
    eliminated by solving the loop matrix ``I + D_G d_f L``; when that
    matrix is singular the interconnection is ill posed.
    """
    n = net.n
    lap = net.laplacian.matrix
    node_ss = [realize(g) for g in net.nodes]
    f_ss = realize(net.coupling)
    ng = sum(ss.n_states for ss in node_ss)
    nf = n * f_ss.n_states

    a_g = np.zeros((ng, ng))
    b_g = np.zeros((ng, n))
    c_g = np.zeros((n, ng))
    d_g = np.zeros((n, n))
    offset = 0
    for i, ss in enumerate(node_ss):
        k = ss.n_states
        a_g[offset : offset + k, offset : offset + k] = ss.a
        b_g[offset : offset + k, i] = ss.b[:, 0]
        c_g[i, offset : offset + k] = ss.c[0, :]
        d_g[i, i] = ss.d[0, 0]
        offset += k

    kf = f_ss.n_states
    a_f = np.kron(np.eye(n), f_ss.a) if kf else np.zeros((0, 0))
    b_f = np.kron(np.eye(n), f_ss.b) if kf else np.zeros((0, n))
    c_f = np.kron(np.eye(n), f_ss.c) if kf else np.zeros((n, 0))
    d_f = f_ss.d[0, 0]

    loop = np.eye(n) + d_g @ (d_f * lap)
    try:
        loop_inv = np.linalg.inv(loop)
    except np.linalg.LinAlgError as exc:
        raise AlgebraicLoop(
            "instantaneous feedthrough around the coupling loop is singular"
        ) from exc
    # Guard near-singular loops too: they produce meaningless dynamics.
    if np.linalg.cond(loop) > 1e12:
        raise AlgebraicLoop(
            "instantaneous feedthrough around the coupling loop is numerically singular"
        )

    y_g = loop_inv @ c_g  # y = y_g x_G + y_f x_F + y_u u
    y_f = -loop_inv @ d_g @ c_f
    y_u = loop_inv @ d_g

    dfl = d_f * lap
    a_cl = np.zeros((ng + nf, ng + nf))
    a_cl[:ng, :ng] = a_g - b_g @ dfl @ y_g
    a_cl[:ng, ng:] = -b_g @ (c_f + dfl @ y_f)
    a_cl[ng:, :ng] = b_f @ lap @ y_g
    a_cl[ng:, ng:] = a_f + b_f @ lap @ y_f
    b_cl = np.vstack([b_g @ (np.eye(n) - dfl @ y_u), b_f @ lap @ y_u])
    c_cl = np.hstack([y_g, y_f])
    return StateSpace(a_cl, b_cl, c_cl, y_u)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def default_step(ss: StateSpace, cap: float = 0.01) -> float:
    """Step size keeping |A|*dt comfortably inside the stability guard."""
    norm_a = float(np.linalg.norm(ss.a, np.inf)) if ss.n_states else 0.0
    if norm_a == 0.0:
        return cap
    return min(cap, 0.5 / norm_a)


def simulate(
    ss: StateSpace,
    signal: InputSignal,
    t_end: float,
    dt: float | None = None,
    *,
    step_norm_limit: float = STEP_NORM_LIMIT,
) -> Trajectory:
    """Fixed-step fourth-order Runge-Kutta integration of the system.

    Impulses are realized exactly as the equivalent initial condition
    ``x(0) = B u0`` with zero forcing.  ``StepTooLarge`` rejects steps
    with ``|A|_inf * dt`` beyond the stability guard.
    """
    if t_end <= 0:
        raise ValidationError("t_end must be positive")
    if dt is None:
        dt = default_step(ss)
    if dt <= 0:
        raise ValidationError("dt must be positive")
    norm_a = float(np.linalg.norm(ss.a, np.inf)) if ss.n_states else 0.0
    if norm_a * dt > step_norm_limit:
        raise StepTooLarge(norm_a, dt, step_norm_limit)
    steps = max(1, int(round(t_end / dt)))
    times = np.arange(steps + 1) * dt
    u = _input_function(signal, ss.n_inputs)
    x = _initial_state(signal, ss)
    a, b, c, d = ss.a, ss.b, ss.c, ss.d
    outputs = np.empty((ss.n_outputs, steps + 1))

    def deriv(t: float, state: np.ndarray) -> np.ndarray:
        return a @ state + b @ u(t)

    outputs[:, 0] = c @ x + d @ u(0.0)
    for k in range(steps):
        t = times[k]
        k1 = deriv(t, x)
        k2 = deriv(t + dt / 2.0, x + (dt / 2.0) * k1)
        k3 = deriv(t + dt / 2.0, x + (dt / 2.0) * k2)
        k4 = deriv(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        outputs[:, k + 1] = c @ x + d @ u(times[k + 1])
    return Trajectory(times, outputs, signal.label())


def coherent_reference(
    net: NetworkModel,
    signal: InputSignal,
    t_end: float,
    dt: float | None = None,
    *,
    dynamics: RationalTF | None = None,
) -> Trajectory:
    """Response of the coherent aggregate ``(1/n) gbar`` to the summed input.

    This is the single reference curve that all node outputs approach as
    connectivity grows.  ``dynamics`` substitutes another mean system
    (for example the expected dynamics of a random family) in place of
    the network's own harmonic mean.
    """
    gbar = dynamics if dynamics is not None else net.gbar
    if gbar is None:
        raise ValidationError(
            "the symbolic coherent mean is unavailable; pass explicit dynamics"
        )
    ref = realize(tf_scale(gbar, 1.0 / net.n))
    # The aggregate sees the scalar input 1^T u.
    if isinstance(signal, ImpulseAll):
        scalar_signal: InputSignal = ImpulseAll(magnitude=net.n * signal.magnitude)
    elif isinstance(signal, StepNode):
        scalar_signal = StepNode(node=0, magnitude=signal.magnitude)
    elif isinstance(signal, SinusoidAll):
        scalar_signal = SinusoidAll(omega=signal.omega, amplitude=net.n * signal.amplitude)
    else:
        raise ValidationError(f"unknown input signal {signal!r}")
    return simulate(ref, scalar_signal, t_end, dt)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def trajectory_csv_lines(traj: Trajectory, reference: Trajectory | None = None) -> list[str]:
    """Rows ``t, y_0, ..., y_{n-1}[, y_ref]``."""
    if reference is not None:
        if reference.n_outputs != 1:
            raise ValidationError("the reference trajectory must have a single output")
        if reference.times.size != traj.times.size or not np.allclose(
            reference.times, traj.times, rtol=1e-12, atol=1e-12
        ):
            raise ValidationError("reference and trajectory must share the time grid")
    header = "t," + ",".join(f"y_{i}" for i in range(traj.n_outputs))
    if reference is not None:
        header += ",y_ref"
    lines = [header]
    for k, t in enumerate(traj.times):
        cells = [repr(float(t))] + [repr(float(v)) for v in traj.outputs[:, k]]
        if reference is not None:
            cells.append(repr(float(reference.outputs[0, k])))
        lines.append(",".join(cells))
    return lines


def write_trajectory_csv(
    traj: Trajectory, stream: TextIO, reference: Trajectory | None = None
) -> None:
    for line in trajectory_csv_lines(traj, reference):
        stream.write(line + "\n")
