import math

import numpy as np
import pytest

from dfsim import SpinSystem
from dfsim import operators as ops


@pytest.fixture
def spin_system():
    return SpinSystem()


def lindblad_superoperator(sys: SpinSystem, f: float) -> np.ndarray:
    """Continuous-time oracle for the ambient-relaxation model.

    Jumps: sqrt(1/T1) |0><1| per spin, sqrt(c/2) Jz with c the collective
    dephasing rate, sqrt(r/2) sz per spin with r the independent rate.
    Column-stacking convention.
    """
    gamma_phi = 1.0 / sys.t2 - 1.0 / (2.0 * sys.t1)
    c = 0.5 * (1.0 + f) * gamma_phi
    r = 0.5 * (1.0 - f) * gamma_phi
    lower = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    jumps = []
    for spin in (1, 2):
        embed = (lambda m: np.kron(m, np.eye(2))) if spin == 1 else (lambda m: np.kron(np.eye(2), m))
        jumps.append(math.sqrt(1.0 / sys.t1) * embed(lower))
        jumps.append(math.sqrt(r / 2.0) * embed(ops.PAULI["z"]))
    jumps.append(math.sqrt(c / 2.0) * ops.J_Z)
    eye = np.eye(4)
    gen = np.zeros((16, 16), dtype=complex)
    for a in jumps:
        ada = a.conj().T @ a
        gen += np.kron(a.conj(), a) - 0.5 * (np.kron(eye, ada) + np.kron(ada.T, eye))
    return gen


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def random_hermitian(rng, dim=4, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def random_ket(rng, dim=2):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(rng, dim=4, rank=None):
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_unitary(rng, dim=2):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))
