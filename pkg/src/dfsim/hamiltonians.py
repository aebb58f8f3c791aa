"""Internal, RF and gradient Hamiltonians of the two-proton register.

All Hamiltonians are returned in angular-frequency units (rad/s); the
constructors take chemical shifts and couplings in Hz and multiply by pi,
so that exp(-i H t) with t in seconds is the literal propagator.

The sequencer frame is the transmitter rotating frame with spin 1 on
resonance: nu1 defaults to 0 and the chemical-shift evolution of spin 2 is
kept in the internal Hamiltonian.
"""

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .units import GAMMA_PROTON


@dataclass(frozen=True)
class SpinSystem:
    """Static parameters of the two-spin molecule.

    nu1, nu2: chemical shifts in Hz; j_coupling in Hz; t1, t2 relaxation
    times in seconds; gamma: gyromagnetic ratio in rad s^-1 T^-1.
    """

    nu1: float = 0.0
    nu2: float = 137.5
    j_coupling: float = 5.7
    t1: float = 7.0
    t2: float = 3.5
    gamma: float = GAMMA_PROTON

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("relaxation times must be positive")
        if self.t2 > 2 * self.t1 + 1e-12:
            raise ValueError(f"t2={self.t2} exceeds 2*t1={2 * self.t1}")


@dataclass(frozen=True)
class RfParams:
    """Transmitter settings: angular frequency offset omega_rf (rad/s,
    relative to the rotating-frame reference), initial phase phi (rad) and
    nutation power omega (rad/s)."""

    omega: float
    phi: float = 0.0
    omega_rf: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("nutation power omega must be >= 0")


def internal_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """pi (nu1 sz1 + nu2 sz2 + J sigma.sigma / 2), rad/s.

    Commutes with Jz for every parameter choice, so it generates pure
    zero-quantum dynamics on the code space.
    """
    return np.pi * (
        sys.nu1 * ops.SIGMA_Z1 + sys.nu2 * ops.SIGMA_Z2 + sys.j_coupling * ops.DOT_12 / 2
    )


def rf_hamiltonian(params: RfParams, t: float = 0.0) -> np.ndarray:
    """RF drive at time t:
    (omega/2) sum_k (cos(omega_rf t + phi) sx^k + sin(omega_rf t + phi) sy^k),
    i.e. the nutation field conjugated by the accumulated transmitter phase.

    The sequencer works in the transmitter frame (omega_rf = 0), where this
    is time independent and set by the pulse phase alone.
    """
    angle = params.omega_rf * t + params.phi
    sx = ops.pauli_embed(1, "x") + ops.pauli_embed(2, "x")
    sy = ops.pauli_embed(1, "y") + ops.pauli_embed(2, "y")
    return (params.omega / 2) * (np.cos(angle) * sx + np.sin(angle) * sy)


def gradient_hamiltonian(grad: float, z: float, sys: SpinSystem) -> np.ndarray:
    """gamma z grad Jz / 2 in rad/s for a field gradient grad (T/m) at
    position z (m). Diagonal, and identically zero on the code space."""
    return sys.gamma * z * grad * ops.J_Z / 2


def logical_decompose(h: np.ndarray, frame: ops.LogicalFrame) -> tuple[float, float, float, float]:
    """Coefficients (c_z, c_x, c_y, c_id) of the code-block restriction of a
    DFS-preserving hermitian operator, in the frame's logical Pauli basis.

    Raises ValueError naming the offending entries when h couples the code
    space to its complement.
    """
    bad = ops.dfs_violations(h)
    if bad:
        listing = ", ".join(f"[{r},{c}]={v:.3e}" for r, c, v in bad)
        raise ValueError(f"operator is not DFS preserving; offending entries: {listing}")
    blk = ops.code_block(h)
    cz = float(np.trace(ops.code_block(frame.sz) @ blk).real) / 2
    cx = float(np.trace(ops.code_block(frame.sx) @ blk).real) / 2
    cy = float(np.trace(ops.code_block(frame.sy) @ blk).real) / 2
    cid = float(np.trace(blk).real) / 2
    recon = (
        cid * np.eye(2)
        + cx * ops.code_block(frame.sx)
        + cy * ops.code_block(frame.sy)
        + cz * ops.code_block(frame.sz)
    )
    err = np.abs(recon - blk).max()
    if err > 1e-10:
        raise ValueError(f"code-block reconstruction error {err:.3e} exceeds 1e-10")
    return cz, cx, cy, cid
