"""Spatial/temporal noise ensemble: gradient phase accrual and diffusion.

A sample is modeled as a stratified set of positions along z. A field
gradient makes every position precess at its own rate, which is a purely
coherent evolution per member; averaging over members turns it into the
engineered decoherence the storage experiments use. Molecular diffusion
between a gradient pulse and its inverse makes the echo imperfect, with the
order-m coherence decaying as exp(-D (gamma grad m delta)^2 Delta).

The time-varying case ("fast switching") uses a reflected bounded random
walk for the gradient strength, changing every step_time, so the waveform's
correlation time is of the order of the stepping time -- too fast for the
control sequences to refocus.

All randomness flows through numpy Generators seeded from the spec, and the
member sum runs in a fixed order, so outputs are bit-reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .errors import NumericalContractError
from .hamiltonians import SpinSystem, internal_hamiltonian
from .pulses import PulseSequence, piecewise_segments

DEFAULT_STEP_TIME = 50.6e-6


@dataclass(frozen=True)
class EnsembleSpec:
    """Sample geometry and noise configuration."""

    n_members: int = 1001
    sample_length: float = 0.01   # m
    grad_max: float = 0.0         # T/m
    diffusion_d: float = 2.0e-9   # m^2/s
    seed: int = 0

    def __post_init__(self):
        if self.n_members < 2:
            raise ValueError("need at least 2 ensemble members")
        if self.sample_length < 0 or self.grad_max < 0 or self.diffusion_d < 0:
            raise ValueError("physical ensemble quantities must be >= 0")


@dataclass(frozen=True, eq=False)
class GradientWaveform:
    """Piecewise-constant gradient strength values (T/m) on a uniform clock."""

    step_time: float
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.step_time <= 0:
            raise ValueError("step_time must be positive")
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("values must be a non-empty 1-d array")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("time_us,grad_T_per_m\n")
            for i, v in enumerate(self.values):
                fh.write(f"{i * self.step_time * 1e6:.12g},{v:.12g}\n")


def _reflect(x: np.ndarray, bound: float) -> np.ndarray:
    """Fold an unbounded walk into [-bound, bound] (triangle-wave map)."""
    if bound == 0.0:
        return np.zeros_like(x)
    y = np.mod(x + bound, 4.0 * bound)
    y = np.where(y > 2.0 * bound, 4.0 * bound - y, y)
    return y - bound


def random_walk_waveform(spec: EnsembleSpec, n_steps: int,
                         step_time: float = DEFAULT_STEP_TIME,
                         step_scale: float = 1.0,
                         seed: int | None = None) -> GradientWaveform:
    """Reflected bounded random walk in [-grad_max, +grad_max].

    Increments are uniform in +-step_scale * grad_max; with the default scale
    the empirical autocorrelation falls below 1/e within a few steps, so the
    correlation time is of the order of step_time. Deterministic for a fixed
    seed (defaults to spec.seed).
    """
    if n_steps < 1:
        raise ValueError("need n_steps >= 1")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    g = spec.grad_max
    increments = rng.uniform(-step_scale * g, step_scale * g, size=n_steps) if g > 0 else np.zeros(n_steps)
    values = _reflect(np.cumsum(increments), g)
    return GradientWaveform(step_time, values, seed=spec.seed if seed is None else seed)


def member_positions(spec: EnsembleSpec, jitter: bool = False,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Stratified midpoint positions over the sample, centered on z = 0.

    With jitter=True each member moves uniformly within its stratum (needs an
    rng); the default midpoint rule keeps acceptance runs deterministic.
    """
    n, length = spec.n_members, spec.sample_length
    offsets = np.full(n, 0.5)
    if jitter:
        if rng is None:
            raise ValueError("jitter requires an rng")
        offsets = rng.uniform(0.0, 1.0, size=n)
    return (np.arange(n) + offsets) / n * length - length / 2


_JZ_EIG = np.array([1.0, 0.0, 0.0, -1.0])  # eigenvalues of Jz/2


def _commutes_with_jz(h: np.ndarray) -> bool:
    jz = np.diag([2.0, 0.0, 0.0, -2.0])
    return np.abs(h @ jz - jz @ h).max() < 1e-9


def ensemble_propagators(seq: PulseSequence, sys: SpinSystem, waveform,
                         z: np.ndarray) -> np.ndarray:
    """Exact propagators of one sequence for every member position at once.

    Returns an (n, 4, 4) array. Delay segments commute with the gradient and
    factor into one shared exponential times member-dependent phases; RF
    segments fall back to a batched eigendecomposition.
    """
    z = np.asarray(z, dtype=float)
    n = len(z)
    u = np.broadcast_to(np.eye(4, dtype=complex), (n, 4, 4)).copy()
    cache: dict = {}
    commute_cache: dict = {}
    grad_diag = np.diag([2.0, 0.0, 0.0, -2.0]) / 2
    for seg in piecewise_segments(seq, sys, waveform):
        if seg.kind == "rotate":
            u = seg.u[None, :, :] @ u
            continue
        hkey = seg.h.tobytes()
        commutes = commute_cache.get(hkey)
        if commutes is None:
            commutes = commute_cache.setdefault(hkey, _commutes_with_jz(seg.h))
        if commutes or seg.grad == 0.0:
            ukey = (hkey, seg.duration)
            u0 = cache.get(ukey)
            if u0 is None:
                u0 = cache.setdefault(ukey, ops.expm_hermitian(seg.h, seg.duration))
            if seg.grad != 0.0:
                phases = np.exp(-1j * (sys.gamma * seg.grad * seg.duration) * np.outer(z, _JZ_EIG))
                u = u0[None, :, :] @ (phases[:, :, None] * u)
            else:
                u = u0[None, :, :] @ u
        else:
            hb = seg.h[None, :, :] + (sys.gamma * seg.grad * z)[:, None, None] * grad_diag[None, :, :]
            w, v = np.linalg.eigh(hb)
            useg = np.einsum("nij,nj,nkj->nik", v, np.exp(-1j * w * seg.duration), v.conj())
            u = useg @ u
    return u


def _average_conjugation(us: np.ndarray, rho0: np.ndarray) -> np.ndarray:
    rho = np.einsum("nij,jk,nlk->il", us, np.asarray(rho0, dtype=complex), us.conj()) / len(us)
    return rho


def _check_output_state(rho: np.ndarray) -> None:
    if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
        raise NumericalContractError("ensemble state lost trace normalization")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-8:
        raise NumericalContractError("ensemble state positivity violated beyond 1e-8")


def evolve_ensemble(seq: PulseSequence, waveform, spec: EnsembleSpec,
                    sys: SpinSystem, rho0: np.ndarray) -> np.ndarray:
    """Ensemble-averaged final state: mean over member positions of the
    coherent evolution, i.e. the trace over the spatial degree of freedom."""
    zs = member_positions(spec)
    us = ensemble_propagators(seq, sys, waveform, zs)
    rho = _average_conjugation(us, rho0)
    _check_output_state(rho)
    return rho


def diffusion_phase_factors(grad: float, delta: float, big_delta: float,
                            spec: EnsembleSpec, sys: SpinSystem,
                            seed: int | None = None) -> np.ndarray:
    """Per-member residual echo phases gamma * grad * delta * dz.

    dz is the Gaussian diffusion displacement accumulated over big_delta,
    std sqrt(2 D big_delta). The uniform member positions cancel exactly
    between a gradient pulse and its inverse; only the displacement survives.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    dz = rng.normal(0.0, math.sqrt(2.0 * spec.diffusion_d * big_delta), size=spec.n_members)
    return sys.gamma * grad * delta * dz


def diffusion_phase_kicks(grad: float, delta: float, big_delta: float,
                          spec: EnsembleSpec, sys: SpinSystem,
                          seed: int | None = None) -> np.ndarray:
    """(n, 4, 4) diagonal unitaries implementing the imperfect-echo phases."""
    phi = diffusion_phase_factors(grad, delta, big_delta, spec, sys, seed)
    diag = np.exp(1j * np.outer(phi, _JZ_EIG))
    out = np.zeros((len(phi), 4, 4), dtype=complex)
    out[:, np.arange(4), np.arange(4)] = diag
    return out


def gradient_diffusion_echo(grad: float, delta: float, big_delta: float,
                            spec: EnsembleSpec, sys: SpinSystem,
                            rho0: np.ndarray, seed: int | None = None) -> np.ndarray:
    """Gradient pulse, diffusion delay, inverse gradient: the ensemble state
    after the imperfect echo, including coherent internal evolution over the
    full duration 2 delta + big_delta.

    The gradient Hamiltonian commutes with the internal one, so the member
    unitaries factor exactly into the shared internal propagator times the
    member's residual phase kick.
    """
    u_int = ops.expm_hermitian(internal_hamiltonian(sys), 2 * delta + big_delta)
    kicks = diffusion_phase_kicks(grad, delta, big_delta, spec, sys, seed)
    us = u_int[None, :, :] @ kicks
    rho = _average_conjugation(us, rho0)
    _check_output_state(rho)
    return rho
