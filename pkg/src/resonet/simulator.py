"""Time-domain simulation of the coupled resonator lattice.

Dynamics: with D the diagonal inertia matrix (FDNR values or masses), Y the
symmetric coupling matrix (conductances or spring constants) and e_in the
injection vector,

    D u'' + Y u = e_in * i(t)

is integrated by the explicit central-difference scheme

    u[t+1] = 2 u[t] - u[t-1] - dt^2 D^-1 Y u[t] + dt^2 D^-1 e_in i[t]

which is stable for dt <= 2 / w_max with w_max the largest natural frequency.
Stacking h[t] = (u[t+1], u[t]) turns one step into a linear recurrence

    h[t] = W_h h[t-1] + W_i i[t],   W_h = [[2I - dt^2 D^-1 Y, -I], [I, 0]]

i.e. the lattice is a recurrent network whose weights are circuit element
values; ``run`` and ``run_rnn`` implement both forms and agree to rounding.

Degrees of freedom are the outer and inner node of every non-grounded cell,
in cell order (outer before inner).  Input current is injected at the input
cell's outer node; readout is the inner-node voltage of each output cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (InvalidParameterError, NumericError, TopologyError,
                     UndecidableError)
from .lattice import CircuitParams, LatticeSpec, MechanicalParams
from .unitcell import UnitCellParams, resonance_freqs

if TYPE_CHECKING:  # pragma: no cover
    from .signals import Signal

BLOWUP_LIMIT = 1e12  # |u| beyond this aborts the run as numerically unstable


@dataclass(frozen=True)
class SystemMatrices:
    """Assembled second-order system plus the DOF bookkeeping."""

    spec: LatticeSpec
    inertia: np.ndarray          # (n,) diagonal of D, > 0
    stiffness: np.ndarray        # (n, n) symmetric PSD coupling matrix Y
    outer_dof: np.ndarray        # (n_cells,) DOF index of each outer node, -1 if grounded
    inner_dof: np.ndarray        # (n_cells,) likewise for inner nodes
    input_dof: int
    output_dofs: tuple[int, ...]
    damping: float = 0.0         # uniform velocity damping rate (1/s), 0 = lossless

    @property
    def n_dof(self) -> int:
        return len(self.inertia)


def _cell_quantities(params) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(inertia_outer, inertia_inner, g_internal, g_coupling) in either domain."""
    if isinstance(params, MechanicalParams):
        return params.mass_outer, params.mass_inner, params.k_internal, params.k_coupling
    if isinstance(params, CircuitParams):
        return (params.d_outer, params.d_inner,
                1.0 / params.r_internal, 1.0 / params.r_coupling)
    raise InvalidParameterError(f"unsupported parameter type {type(params).__name__}")


def assemble(spec: LatticeSpec, params, damping: float = 0.0) -> SystemMatrices:
    """Build D and Y for the active cells of the lattice.

    Works for either parameter domain (the two produce identical dynamics up
    to the analogy scale).  Grounded cells contribute only the grounding
    conductance of their coupling edges.  Raises TopologyError if any output
    is unreachable from the input through non-grounded cells.
    """
    io, ii, gi, gc = _cell_quantities(params)
    if len(io) != spec.n_cells:
        raise InvalidParameterError(f"per-cell arrays have length {len(io)}, spec has {spec.n_cells} cells")
    if len(gc) != spec.n_edges:
        raise InvalidParameterError(f"per-edge array has length {len(gc)}, spec has {spec.n_edges} edges")
    if damping < 0.0 or not np.isfinite(damping):
        raise InvalidParameterError("damping must be finite and >= 0")

    active = spec.active_cells
    outer = np.full(spec.n_cells, -1, dtype=int)
    inner = np.full(spec.n_cells, -1, dtype=int)
    for k, c in enumerate(active):
        outer[c] = 2 * k
        inner[c] = 2 * k + 1
    n = 2 * len(active)

    inertia = np.empty(n)
    inertia[0::2] = io[list(active)]
    inertia[1::2] = ii[list(active)]

    y = np.zeros((n, n))
    for c in active:
        o, i = outer[c], inner[c]
        g = gi[c]
        y[o, o] += g
        y[i, i] += g
        y[o, i] -= g
        y[i, o] -= g
    for k, (a, b) in enumerate(spec.edges):
        g = gc[k]
        ga, gb = a in spec.grounded, b in spec.grounded
        if ga and gb:
            continue
        if ga or gb:
            live = b if ga else a
            y[outer[live], outer[live]] += g  # edge to a clamped cell grounds the live node
        else:
            oa, ob = outer[a], outer[b]
            y[oa, oa] += g
            y[ob, ob] += g
            y[oa, ob] -= g
            y[ob, oa] -= g

    # reachability: every output must see the input through live cells
    adj = {c: [] for c in active}
    for a, b in spec.edges:
        if a in adj and b in adj:
            adj[a].append(b)
            adj[b].append(a)
    seen = {spec.input_cell}
    frontier = [spec.input_cell]
    while frontier:
        nxt = []
        for c in frontier:
            for d in adj[c]:
                if d not in seen:
                    seen.add(d)
                    nxt.append(d)
        frontier = nxt
    missing = [c for c in spec.outputs if c not in seen]
    if missing:
        raise TopologyError(f"outputs {missing} unreachable from input cell {spec.input_cell}")

    y.setflags(write=False)
    inertia.setflags(write=False)
    outer.setflags(write=False)
    inner.setflags(write=False)
    return SystemMatrices(
        spec=spec, inertia=inertia, stiffness=y,
        outer_dof=outer, inner_dof=inner,
        input_dof=int(outer[spec.input_cell]),
        output_dofs=tuple(int(inner[c]) for c in spec.outputs),
        damping=float(damping),
    )


def natural_frequencies(sys: SystemMatrices) -> np.ndarray:
    """Sorted natural angular frequencies (rad/s) of the undamped system."""
    scale = 1.0 / np.sqrt(sys.inertia)
    sym = sys.stiffness * scale[:, None] * scale[None, :]
    lam = np.linalg.eigvalsh(sym)
    return np.sqrt(np.clip(lam, 0.0, None))


def eigenfrequencies_hz(sys: SystemMatrices) -> np.ndarray:
    return natural_frequencies(sys) / (2.0 * np.pi)


def max_stable_dt(sys: SystemMatrices) -> float:
    """Largest stable step of the central-difference scheme: 2 / w_max."""
    w_max = float(natural_frequencies(sys)[-1])
    if w_max == 0.0:
        return np.inf
    return 2.0 / w_max


def default_dt(sys: SystemMatrices, params) -> float:
    """1 / (20 * max cell zero-crossing frequency), capped at half the stability limit.

    Resolves the fastest single-cell dynamics while keeping a 2x stability margin.
    """
    io, ii, gi, _ = _cell_quantities(params)
    f1_max = 0.0
    for c in sys.spec.active_cells:
        cell = UnitCellParams(d_outer=io[c], d_inner=ii[c], r_internal=1.0 / gi[c])
        f1_max = max(f1_max, resonance_freqs(cell)[1] / (2.0 * np.pi))
    return min(1.0 / (20.0 * f1_max), 0.5 * max_stable_dt(sys))


# --- stepping ---------------------------------------------------------------

@dataclass
class SimState:
    """Rolling pair of displacement vectors; u_curr is u[t], u_prev is u[t-1]."""

    u_prev: np.ndarray
    u_curr: np.ndarray
    step_index: int = 0


def initial_state(sys: SystemMatrices, u_prev=None, u_curr=None) -> SimState:
    n = sys.n_dof
    up = np.zeros(n) if u_prev is None else np.array(u_prev, dtype=float)
    uc = np.zeros(n) if u_curr is None else np.array(u_curr, dtype=float)
    if up.shape != (n,) or uc.shape != (n,):
        raise InvalidParameterError(f"state vectors must have shape ({n},)")
    return SimState(u_prev=up, u_curr=uc)


def _step_coeffs(sys: SystemMatrices, dt: float):
    if not np.isfinite(dt) or dt <= 0.0:
        raise InvalidParameterError(f"dt must be finite and > 0, got {dt}")
    a = dt * dt * (sys.stiffness / sys.inertia[:, None])
    b = np.zeros(sys.n_dof)
    b[sys.input_dof] = dt * dt / sys.inertia[sys.input_dof]
    c_plus = 1.0 + 0.5 * sys.damping * dt
    c_minus = 1.0 - 0.5 * sys.damping * dt
    return a, b, c_plus, c_minus


def step(sys: SystemMatrices, state: SimState, drive: float, dt: float) -> SimState:
    """Advance one central-difference step under injected current/force `drive`."""
    a, b, c_plus, c_minus = _step_coeffs(sys, dt)
    u_next = (2.0 * state.u_curr - c_minus * state.u_prev
              - a @ state.u_curr + b * drive) / c_plus
    return SimState(u_prev=state.u_curr, u_curr=u_next,
                    step_index=state.step_index + 1)


@dataclass(frozen=True)
class SimConfig:
    """Run controls.  dt=None derives the step from the drive signal's rate."""

    dt: float | None = None
    duration: float | None = None     # used only when no drive signal is given
    record: str | tuple[int, ...] = "outputs"   # "outputs", "all", or DOF indices
    blowup_limit: float = BLOWUP_LIMIT
    enforce_stability: bool = True


@dataclass(frozen=True)
class Trajectory:
    """Recorded displacement history; row t holds u[(t+1) * dt] at `dofs`."""

    dt: float
    dofs: tuple[int, ...]
    values: np.ndarray   # (n_steps, len(dofs))

    @property
    def times(self) -> np.ndarray:
        return (np.arange(len(self.values)) + 1) * self.dt

    def column(self, dof: int) -> np.ndarray:
        try:
            return self.values[:, self.dofs.index(dof)]
        except ValueError:
            raise InvalidParameterError(f"DOF {dof} was not recorded") from None


def _resolve_dt(sys: SystemMatrices, signal, cfg: SimConfig) -> tuple[float, int]:
    if signal is not None:
        sig_dt = 1.0 / signal.rate_hz
        if cfg.dt is not None and abs(cfg.dt - sig_dt) > 1e-9 * sig_dt:
            raise InvalidParameterError(
                f"configured dt={cfg.dt} does not match signal rate {signal.rate_hz} Hz; "
                "resample the signal instead")
        return sig_dt, len(signal.values)
    if cfg.dt is None or cfg.duration is None:
        raise InvalidParameterError("zero-input runs need both cfg.dt and cfg.duration")
    return cfg.dt, int(round(cfg.duration / cfg.dt))


def _recorded_dofs(sys: SystemMatrices, cfg: SimConfig) -> tuple[int, ...]:
    if cfg.record == "outputs":
        return sys.output_dofs
    if cfg.record == "all":
        return tuple(range(sys.n_dof))
    dofs = tuple(int(d) for d in cfg.record)
    for d in dofs:
        if not 0 <= d < sys.n_dof:
            raise InvalidParameterError(f"record DOF {d} outside 0..{sys.n_dof - 1}")
    return dofs


def run(sys: SystemMatrices, signal: "Signal | None" = None,
        cfg: SimConfig = SimConfig(), initial: SimState | None = None) -> Trajectory:
    """Integrate the lattice and record selected DOFs.

    Drive samples are consumed one per step; the trajectory has exactly one
    row per drive sample (or duration/dt rows for zero-input runs).  Raises
    NumericError citing the step index if any |u| exceeds the blow-up limit.
    """
    dt, n_steps = _resolve_dt(sys, signal, cfg)
    if cfg.enforce_stability:
        dt_max = max_stable_dt(sys)
        if dt > dt_max:
            raise InvalidParameterError(
                f"dt={dt} exceeds the stability limit {dt_max:.3e}; "
                "reduce dt or the stiffest element values")
    a, b, c_plus, c_minus = _step_coeffs(sys, dt)
    dofs = _recorded_dofs(sys, cfg)
    state = initial if initial is not None else initial_state(sys)
    u_prev = state.u_prev.copy()
    u_curr = state.u_curr.copy()
    drive = np.zeros(n_steps) if signal is None else np.asarray(signal.values, dtype=float)
    out = np.empty((n_steps, len(dofs)))
    limit = cfg.blowup_limit
    col = np.asarray(dofs, dtype=int)
    for t in range(n_steps):
        u_next = (2.0 * u_curr - c_minus * u_prev - a @ u_curr + b * drive[t]) / c_plus
        peak = np.max(np.abs(u_next))
        if not peak <= limit:
            raise NumericError(
                f"|u| reached {peak:.3e} (> {limit:.1e}) at step {t}: unstable or diverging",
                step=t)
        out[t] = u_next[col]
        u_prev, u_curr = u_curr, u_next
    return Trajectory(dt=dt, dofs=dofs, values=out)


# --- explicit recurrent-network form ---------------------------------------

def build_rnn_weights(sys: SystemMatrices, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """State-update and input matrices of the equivalent one-step recurrence."""
    a, b, c_plus, c_minus = _step_coeffs(sys, dt)
    n = sys.n_dof
    w_h = np.zeros((2 * n, 2 * n))
    w_h[:n, :n] = (2.0 * np.eye(n) - a) / c_plus
    w_h[:n, n:] = -(c_minus / c_plus) * np.eye(n)
    w_h[n:, :n] = np.eye(n)
    w_i = np.zeros(2 * n)
    w_i[:n] = b / c_plus
    return w_h, w_i


def run_rnn(sys: SystemMatrices, signal: "Signal", cfg: SimConfig = SimConfig()) -> Trajectory:
    """Same trajectory as run(), computed through the explicit W_h/W_i matrices."""
    dt, n_steps = _resolve_dt(sys, signal, cfg)
    w_h, w_i = build_rnn_weights(sys, dt)
    dofs = _recorded_dofs(sys, cfg)
    n = sys.n_dof
    h = np.zeros(2 * n)
    drive = np.asarray(signal.values, dtype=float)
    out = np.empty((n_steps, len(dofs)))
    col = np.asarray(dofs, dtype=int)
    for t in range(n_steps):
        h = w_h @ h + w_i * drive[t]
        out[t] = h[col]
    return Trajectory(dt=dt, dofs=dofs, values=out)


# --- energy and readout -----------------------------------------------------

def discrete_energy(sys: SystemMatrices, u_prev: np.ndarray, u_curr: np.ndarray,
                    dt: float) -> float:
    """Conserved quadratic invariant of the undamped central-difference scheme.

    Velocity is the central difference at the half step, the potential term the
    symmetric product across it:

        E = 1/2 v' D v + 1/2 u_prev' Y u_curr,   v = (u_curr - u_prev) / dt

    For damping=0 this is constant to rounding for every stable dt.
    """
    v = (u_curr - u_prev) / dt
    return float(0.5 * v @ (sys.inertia * v) + 0.5 * u_prev @ (sys.stiffness @ u_curr))


def integrate_energy(traj: Trajectory, dofs) -> np.ndarray:
    """Time-integrated squared displacement, sum(u^2) * dt, per requested DOF."""
    dofs = tuple(int(d) for d in dofs)
    cols = np.stack([traj.column(d) for d in dofs], axis=1)
    return np.sum(cols * cols, axis=0) * traj.dt


def classify(energies) -> tuple[int, np.ndarray]:
    """Energies -> (class, probabilities): L1-normalized shares, argmax wins.

    Ties break to the lowest index.  All-zero energies are undecidable.
    """
    e = np.asarray(energies, dtype=float)
    if e.ndim != 1 or len(e) == 0:
        raise InvalidParameterError("energies must be a non-empty 1-D array")
    if np.any(e < 0.0) or not np.all(np.isfinite(e)):
        raise InvalidParameterError("energies must be finite and >= 0")
    total = float(e.sum())
    if total == 0.0:
        raise UndecidableError("all channel energies are zero")
    probs = e / total
    return int(np.argmax(probs)), probs


def comparator(values: np.ndarray, dt: float, tau_s: float = 0.05,
               hysteresis: float = 0.1) -> np.ndarray:
    """Behavioral winner-take-all readout; returns a boolean (T, C) logic trace.

    Each channel's |u| is smoothed by a single-pole low-pass with time constant
    tau_s; at each step the largest smoothed channel goes high iff it exceeds
    the runner-up by the hysteresis fraction, everything else (and everything
    in an undecided step) stays low.
    """
    x = np.abs(np.asarray(values, dtype=float))
    if x.ndim != 2 or x.shape[1] < 2:
        raise InvalidParameterError("comparator needs a (T, C>=2) array")
    if tau_s <= 0.0 or hysteresis < 0.0:
        raise InvalidParameterError("tau_s must be > 0 and hysteresis >= 0")
    alpha = dt / tau_s
    if alpha > 1.0:
        raise InvalidParameterError("dt must not exceed tau_s")
    t_len, n_ch = x.shape
    logic = np.zeros((t_len, n_ch), dtype=bool)
    y = np.zeros(n_ch)
    for t in range(t_len):
        y += alpha * (x[t] - y)
        order = np.argsort(y)
        top, runner = order[-1], order[-2]
        if y[top] > (1.0 + hysteresis) * y[runner]:
            logic[t, top] = True
    return logic
