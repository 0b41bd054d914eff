"""Frequency-domain nodal analysis of the assembled lattice.

At angular frequency w the lossless network reduces to the real symmetric
(indefinite) system

    (Y - w^2 D) v = e_in * i_in

solved densely per frequency.  Near a natural frequency the matrix becomes
singular; solves guard on the condition number, and swept transmission skips
grid bins inside a guard band around the computed eigenfrequencies (the
response there is a true pole of the undamped model).

Also provided: per-edge branch currents and per-cell effective-impedance maps,
the data behind current-routing and impedance-landscape plots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NearResonanceError
from .lattice import CircuitParams, LatticeSpec
from .simulator import SystemMatrices, eigenfrequencies_hz
from .unitcell import UnitCellParams, resonance_freqs, z_eff

COND_LIMIT = 1e12          # condition number beyond which a solve is rejected
GUARD_BAND_HZ = 0.25       # default half-width skipped around eigenfrequencies


@dataclass(frozen=True)
class AcSolution:
    """Steady-state node voltages for a unit-phasor current injection."""

    omega: float
    i_in: float
    voltages: np.ndarray     # (n_dof,) real: lossless network, real drive
    residual: float          # ||(Y - w^2 D) v - b|| / ||b||
    cond: float


def ac_solve(sys: SystemMatrices, omega: float, i_in: float = 1.0) -> AcSolution:
    """Solve the nodal system at one frequency.

    Raises NearResonanceError when the matrix condition number exceeds
    COND_LIMIT, i.e. the requested frequency sits numerically on a resonance.
    """
    if not np.isfinite(omega) or omega <= 0.0:
        raise InvalidParameterError(f"omega must be finite and > 0, got {omega}")
    if sys.damping != 0.0:
        raise InvalidParameterError("ac_solve covers the lossless model only (damping=0)")
    mat = sys.stiffness - (omega * omega) * np.diag(sys.inertia)
    svals = np.linalg.svd(mat, compute_uv=False)
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0.0 else np.inf
    if cond > COND_LIMIT:
        raise NearResonanceError(
            f"system is within rounding of a resonance at omega={omega} rad/s "
            f"({omega / (2 * np.pi):.6g} Hz): cond={cond:.3e}",
            omega=omega, cond=cond)
    b = np.zeros(sys.n_dof)
    b[sys.input_dof] = i_in
    v = np.linalg.solve(mat, b)
    err = float(np.linalg.norm(mat @ v - b))
    b_norm = float(np.linalg.norm(b))
    residual = err / b_norm if b_norm > 0.0 else err
    return AcSolution(omega=float(omega), i_in=float(i_in), voltages=v,
                      residual=residual, cond=cond)


@dataclass(frozen=True)
class BranchCurrents:
    """Signed currents through every coupling edge plus per-node shunt currents."""

    omega: float
    edge_current: np.ndarray     # (n_edges,) current a -> b through R_c; 0 for inert edges
    node_shunt: np.ndarray       # (n_dof,) current into each node's FDNR (to ground)
    internal_current: np.ndarray  # (n_cells,) outer -> inner current through R_n (0 if grounded)


def branch_currents(sys: SystemMatrices, circ: CircuitParams, sol: AcSolution) -> BranchCurrents:
    """Currents implied by an AC solution.  KCL holds at every node to rounding."""
    spec = sys.spec
    if len(circ.r_coupling) != spec.n_edges:
        raise InvalidParameterError("circuit parameters do not match the lattice spec")
    v = sol.voltages
    w2 = sol.omega * sol.omega

    def volt(cell: int) -> float:
        d = sys.outer_dof[cell]
        return 0.0 if d < 0 else v[d]

    edge = np.zeros(spec.n_edges)
    for k, (a, b) in enumerate(spec.edges):
        if a in spec.grounded and b in spec.grounded:
            continue
        edge[k] = (volt(a) - volt(b)) / circ.r_coupling[k]

    shunt = -w2 * sys.inertia * v  # FDNR admittance at w is -w^2 D

    internal = np.zeros(spec.n_cells)
    for c in spec.active_cells:
        o, i = sys.outer_dof[c], sys.inner_dof[c]
        internal[c] = (v[o] - v[i]) / circ.r_internal[c]

    return BranchCurrents(omega=sol.omega, edge_current=edge,
                          node_shunt=shunt, internal_current=internal)


def cell_input_currents(sys: SystemMatrices, bc: BranchCurrents) -> np.ndarray:
    """Net current each active cell absorbs from the lattice (edge inflow).

    For an output cell this is the branch current feeding its effective
    impedance; the injection cell additionally receives the source current.
    """
    spec = sys.spec
    inflow = np.zeros(spec.n_cells)
    for k, (a, b) in enumerate(spec.edges):
        inflow[a] -= bc.edge_current[k]
        inflow[b] += bc.edge_current[k]
    return inflow


def kcl_residual(sys: SystemMatrices, sol: AcSolution, bc: BranchCurrents) -> float:
    """Worst per-node current imbalance, relative to the injection."""
    spec = sys.spec
    balance = np.zeros(sys.n_dof)
    balance[sys.input_dof] += sol.i_in
    for k, (a, b) in enumerate(spec.edges):
        if a not in spec.grounded:
            balance[sys.outer_dof[a]] -= bc.edge_current[k]
        if b not in spec.grounded:
            balance[sys.outer_dof[b]] += bc.edge_current[k]
    for c in spec.active_cells:
        o, i = sys.outer_dof[c], sys.inner_dof[c]
        balance[o] -= bc.internal_current[c]
        balance[i] += bc.internal_current[c]
    balance -= bc.node_shunt
    return float(np.max(np.abs(balance)) / abs(sol.i_in))


# --- per-cell impedance landscape -------------------------------------------

def impedance_map(circ: CircuitParams, omega: float,
                  flag_rtol: float = 1e-9) -> tuple[np.ndarray, list[str]]:
    """Effective impedance of every cell at one frequency.

    Returns (values, flags); flags are "" for plain values, "zero" when the
    frequency sits on the cell's local resonance (value 0) and "pole" when it
    sits on the zero-crossing frequency (value NaN -- not representable).
    """
    if not np.isfinite(omega) or omega <= 0.0:
        raise InvalidParameterError(f"omega must be finite and > 0, got {omega}")
    n = len(circ.d_outer)
    values = np.empty(n)
    flags: list[str] = []
    for c in range(n):
        cell = UnitCellParams(d_outer=circ.d_outer[c], d_inner=circ.d_inner[c],
                              r_internal=circ.r_internal[c])
        w0, w1 = resonance_freqs(cell)
        if abs(omega - w1) <= flag_rtol * w1:
            values[c] = np.nan
            flags.append("pole")
        elif abs(omega - w0) <= flag_rtol * w0:
            values[c] = 0.0
            flags.append("zero")
        else:
            values[c] = z_eff(cell, omega)
            flags.append("")
    return values, flags


# --- transmission ------------------------------------------------------------

def transmission(sys: SystemMatrices, omegas, guard_hz: float = GUARD_BAND_HZ,
                 z_ref_ohm: float = 1.0) -> tuple[np.ndarray, list[str]]:
    """|v_out / i_in| per output channel over a frequency grid.

    Bins within guard_hz of a computed eigenfrequency are skipped (NaN) and
    flagged "guard"; bins where the solve still turns out near-singular are
    flagged "singular".  z_ref_ohm divides the raw V/A magnitude (1.0 keeps
    raw values).
    """
    om = np.asarray(omegas, dtype=float)
    if om.ndim != 1:
        raise InvalidParameterError("omegas must be a 1-D array")
    if z_ref_ohm <= 0.0 or not np.isfinite(z_ref_ohm):
        raise InvalidParameterError("z_ref_ohm must be finite and > 0")
    eig_hz = eigenfrequencies_hz(sys)
    h = np.full((len(sys.output_dofs), len(om)), np.nan)
    flags: list[str] = []
    for j, w in enumerate(om):
        f = w / (2.0 * np.pi)
        if np.any(np.abs(eig_hz - f) < guard_hz):
            flags.append("guard")
            continue
        try:
            sol = ac_solve(sys, w)
        except NearResonanceError:
            flags.append("singular")
            continue
        h[:, j] = np.abs(sol.voltages[list(sys.output_dofs)] / sol.i_in) / z_ref_ohm
        flags.append("")
    return h, flags
