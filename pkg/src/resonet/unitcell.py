"""Closed-form frequency response of one isolated resonator cell.

A cell is two FDNR-loaded nodes joined by a resistance: the outer node carries
d_outer, the inner node d_inner.  Seen from the outer node the pair behaves as
a single frequency-dependent FDNR

    d_eff(w) = d_outer + d_inner / (1 - (w/w0)^2)

with the local resonance w0 = 1/sqrt(d_inner * r_internal).  d_eff crosses
zero at w1 = w0 * sqrt((d_outer + d_inner) / d_outer), where the cell's
effective impedance

    z_eff(w) = -1 / (w^2 * d_eff(w))
             = -(w^2 - w0^2) / (w^2 * (w^2 - w1^2) * d_outer)

has its pole.  The inner node sees the outer voltage amplified by
beta(w) = 1 / (1 - (w/w0)^2), so the drive-current-to-inner-voltage transfer

    h(w) = beta * z_eff = w0^2 / (w^2 * (w^2 - w1^2) * d_outer)

is finite at w0 (the z_eff zero cancels the beta pole) and diverges at w1.

All functions take angular frequency in rad/s, scalar or array, and raise
PoleError when any point falls within a tiny relative guard of a pole, so
sweeps must exclude pole bins explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PoleError

POLE_RTOL = 1e-12  # relative guard around analytic poles


@dataclass(frozen=True)
class UnitCellParams:
    """One cell's element values: FDNRs in s^2/ohm, resistance in ohm."""

    d_outer: float
    d_inner: float
    r_internal: float

    def __post_init__(self):
        for name in ("d_outer", "d_inner", "r_internal"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise InvalidParameterError(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)


def resonance_freqs(cell: UnitCellParams) -> tuple[float, float]:
    """(w0, w1) in rad/s: local resonance and the d_eff zero crossing."""
    w0 = 1.0 / math.sqrt(cell.d_inner * cell.r_internal)
    w1 = w0 * math.sqrt((cell.d_outer + cell.d_inner) / cell.d_outer)
    return w0, w1


def _check_omega(omega) -> np.ndarray:
    om = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(om)) or np.any(om <= 0.0):
        raise InvalidParameterError("omega must be finite and > 0")
    return om


def _guard_pole(om: np.ndarray, pole: float, name: str) -> None:
    hit = np.abs(om - pole) <= POLE_RTOL * pole
    if np.any(hit):
        bad = float(np.atleast_1d(om)[np.atleast_1d(hit)][0])
        raise PoleError(f"omega={bad} is on the {name} pole at {pole} rad/s", omega=bad)


def _ret(values: np.ndarray, omega):
    return float(values) if np.isscalar(omega) or np.ndim(omega) == 0 else values


def d_eff(cell: UnitCellParams, omega):
    """Effective FDNR value seen at the outer node.  Pole at w0."""
    om = _check_omega(omega)
    w0, w1 = resonance_freqs(cell)
    _guard_pole(om, w0, "local-resonance")
    val = cell.d_outer * ((om - w1) * (om + w1)) / ((om - w0) * (om + w0))
    return _ret(val, omega)


def z_eff(cell: UnitCellParams, omega):
    """Effective impedance at the outer node.  Zero at w0, pole at w1."""
    om = _check_omega(omega)
    w0, w1 = resonance_freqs(cell)
    _guard_pole(om, w1, "zero-crossing")
    val = -((om - w0) * (om + w0)) / (om * om * (om - w1) * (om + w1) * cell.d_outer)
    return _ret(val, omega)


def beta(cell: UnitCellParams, omega):
    """Inner/outer voltage amplification.  Pole at w0."""
    om = _check_omega(omega)
    w0, _ = resonance_freqs(cell)
    _guard_pole(om, w0, "local-resonance")
    val = -w0 * w0 / ((om - w0) * (om + w0))
    return _ret(val, omega)


def transfer_h(cell: UnitCellParams, omega):
    """Drive current to inner-node voltage transfer beta*z_eff.  Pole at w1."""
    om = _check_omega(omega)
    w0, w1 = resonance_freqs(cell)
    _guard_pole(om, w1, "zero-crossing")
    val = w0 * w0 / (om * om * (om - w1) * (om + w1) * cell.d_outer)
    return _ret(val, omega)
