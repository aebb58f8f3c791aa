"""Reliability measures and tomography.

Entanglement fidelity follows the operator-sum form

    F_e = sum_mu | Tr(U_target^dag A_mu) / N |^2

which compares a channel against a target unitary through a maximally
entangled reference state; it is insensitive to global phase by
construction. For unital trace-preserving one-qubit channels the same number
can be assembled from three pure-state fidelities,

    F_e = ( F_{U|0>} + F_{U|+>} + F_{U|+i>} - 1 ) / 2,

and the average gate fidelity is fbar = 2/3 F_e + 1/3. When the dynamics is
not unital (T1 relaxation), the retained transverse magnetization

    C = ( Tr sigma_x E(|+><+|) + Tr sigma_y E(|i><i|) ) / 2

is used instead.

Pauli-transfer matrices use the basis ordering (identity, x, y, z): entry
[i, j] = Tr(P_i E(P_j)) / 2. Superoperators and Choi matrices use the
column-stacking convention of the channels module.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .channels import KrausChannel, unvec, vec

PAULI_ORDER = ("i", "x", "y", "z")

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
KET_PLUS_I = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2)

PROBE_STATES = tuple(np.outer(k, k.conj()) for k in (KET0, KET1, KET_PLUS, KET_PLUS_I))

ENTANGLEMENT_THRESHOLD = 0.5


def entanglement_fidelity(ch: KrausChannel, u_target: np.ndarray) -> float:
    """Gate entanglement fidelity of a channel against a target unitary."""
    u_target = np.asarray(u_target, dtype=complex)
    if u_target.shape != (ch.dim, ch.dim):
        raise ValueError("target dimension does not match channel")
    if not ops.is_unitary(u_target):
        raise ValueError("target must be unitary")
    n = ch.dim
    return float(sum(abs(np.trace(u_target.conj().T @ k) / n) ** 2 for k in ch.kraus_ops))


def is_unital(ch: KrausChannel, tol: float = 1e-9) -> bool:
    s = ch.superoperator()
    eye = np.eye(ch.dim, dtype=complex)
    return bool(np.abs(unvec(s @ vec(eye)) - eye).max() <= tol)


def state_fidelities(ch: KrausChannel, u_target: np.ndarray) -> tuple[float, float, float]:
    """F_{U|psi>} = Tr( U|psi><psi|U^dag E(|psi><psi|) ) for |0>, |+>, |+i>."""
    out = []
    for ket in (KET0, KET_PLUS, KET_PLUS_I):
        rho = np.outer(ket, ket.conj())
        ideal = u_target @ rho @ u_target.conj().T
        out.append(float(np.trace(ideal @ ch.apply(rho)).real))
    return tuple(out)


def gate_fidelity_from_states(ch: KrausChannel, u_target: np.ndarray) -> "FidelityReport":
    """Entanglement fidelity assembled from the three-state formula.

    Only valid for unital trace-preserving one-qubit channels; anything else
    raises ValueError pointing at entanglement_fidelity / coherence_metric.
    """
    if ch.dim != 2:
        raise ValueError("three-state formula applies to one-qubit channels")
    if not is_unital(ch):
        raise ValueError(
            "channel is not unital; the three-state formula does not apply -- "
            "use entanglement_fidelity on a Kraus set, or coherence_metric if "
            "only phase information matters"
        )
    f0, fplus, fplusi = state_fidelities(ch, np.asarray(u_target, dtype=complex))
    fe = 0.5 * (f0 + fplus + fplusi - 1.0)
    return FidelityReport(label=ch.label, f0=f0, fplus=fplus, fplusi=fplusi, fe=fe)


def coherence_metric(ch: KrausChannel) -> float:
    """Average retained transverse magnetization of a one-qubit channel."""
    if ch.dim != 2:
        raise ValueError("coherence metric is defined for one-qubit channels")
    sx, sy = ops.PAULI["x"], ops.PAULI["y"]
    rho_x = np.outer(KET_PLUS, KET_PLUS.conj())
    rho_y = np.outer(KET_PLUS_I, KET_PLUS_I.conj())
    return float(0.5 * (np.trace(sx @ ch.apply(rho_x)).real + np.trace(sy @ ch.apply(rho_y)).real))


def induced_data_channel(ch: KrausChannel, encoded: bool) -> KrausChannel:
    """One-qubit channel seen by the data spin.

    The two-spin channel acts between preparation (data state, ancilla |0>)
    and readout; with encoded=True the encode/decode unitaries wrap it. The
    ancilla is traced out exactly, giving Kraus operators
    K_{mu b} = <b| U_dec E_mu U_enc |0> on the data spin.
    """
    if ch.dim != 4:
        raise ValueError("induced channel needs a two-spin channel")
    u_enc = ops.encoding_unitary() if encoded else np.eye(4, dtype=complex)
    u_dec = u_enc.conj().T
    kraus = []
    for e in ch.kraus_ops:
        m = u_dec @ e @ u_enc
        for b in (0, 1):
            k = m[np.ix_((b, 2 + b), (0, 2))]
            if np.abs(k).max() > 0.0:
                kraus.append(k)
    return KrausChannel(tuple(kraus), label=f"data({ch.label})")


def pauli_expectations(rho: np.ndarray) -> np.ndarray:
    """The 15 non-identity two-spin Pauli expectation values of a state, in
    (i, x, y, z) x (i, x, y, z) order with the identity-identity term dropped."""
    rho = np.asarray(rho, dtype=complex)
    vals = []
    for a in PAULI_ORDER:
        for b in PAULI_ORDER:
            if a == b == "i":
                continue
            p = np.kron(ops.PAULI[a], ops.PAULI[b])
            vals.append(float(np.trace(p @ rho).real))
    return np.array(vals)


def nearest_psd(rho: np.ndarray) -> tuple[np.ndarray, float]:
    """Clip negative eigenvalues and renormalize the trace.

    Returns the repaired state and the Frobenius norm of the correction.
    """
    rho = np.asarray(rho, dtype=complex)
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w_clipped = np.clip(w, 0.0, None)
    if w_clipped.sum() == 0.0:
        raise ValueError("state has no positive weight to renormalize")
    fixed = (v * (w_clipped / w_clipped.sum())) @ v.conj().T
    return fixed, float(np.linalg.norm(fixed - rho))


def state_tomography(expectations) -> tuple[np.ndarray, float]:
    """Reconstruct a two-spin state from its 15 Pauli expectation values.

    rho = (identity + sum_P c_P P) / 4. If reconstruction is indefinite the
    nearest PSD unit-trace state is returned instead, together with the norm
    of the correction (0.0 when no repair was needed).
    """
    expectations = np.asarray(expectations, dtype=float)
    if expectations.shape != (15,):
        raise ValueError("need exactly 15 expectation values")
    if np.abs(expectations).max() > 1.0 + 1e-12:
        raise ValueError("expectation values must lie in [-1, 1]")
    rho = np.eye(4, dtype=complex)
    idx = 0
    for a in PAULI_ORDER:
        for b in PAULI_ORDER:
            if a == b == "i":
                continue
            rho = rho + expectations[idx] * np.kron(ops.PAULI[a], ops.PAULI[b])
            idx += 1
    rho /= 4.0
    if np.linalg.eigvalsh(rho).min() < 0.0:
        return nearest_psd(rho)
    return rho, 0.0


@dataclass(frozen=True)
class ProcessTomographyResult:
    superoperator: np.ndarray
    pauli_transfer: np.ndarray
    choi: np.ndarray
    kraus_ops: tuple
    choi_eigenvalues: np.ndarray
    negative_choi_flag: bool


def process_tomography(channel_map, tol: float = 1e-8) -> ProcessTomographyResult:
    """Reconstruct a one-qubit map from queries on |0>, |1>, |+>, |+i>.

    Linear inversion gives the superoperator; the Choi matrix follows, and
    its eigendecomposition yields a Kraus set. Choi eigenvalues below -1e-6
    are flagged. The map is cross-checked for linearity on the maximally
    mixed state and must return hermitian outputs, otherwise ValueError.
    """
    outs = [np.asarray(channel_map(rho), dtype=complex) for rho in PROBE_STATES]
    for o in outs:
        if o.shape != (2, 2):
            raise ValueError("map must return 2x2 states")
        if np.abs(o - o.conj().T).max() > 1e-8:
            raise ValueError("map returned a non-hermitian output; responses inconsistent")
    o0, o1, op, oip = outs
    # linearity probe: E(I/2) must match (E(|0><0|) + E(|1><1|)) / 2
    probe = np.asarray(channel_map(np.eye(2, dtype=complex) / 2), dtype=complex)
    if np.abs(probe - (o0 + o1) / 2).max() > tol:
        raise ValueError("map responses are not consistent with a linear channel")

    # images of the matrix units |k><l|
    e00, e11 = o0, o1
    e01 = ((2 * op - o0 - o1) + 1j * (2 * oip - o0 - o1)) / 2
    e10 = ((2 * op - o0 - o1) - 1j * (2 * oip - o0 - o1)) / 2
    images = {(0, 0): e00, (0, 1): e01, (1, 0): e10, (1, 1): e11}

    s = np.zeros((4, 4), dtype=complex)
    for (k, l), img in images.items():
        unit = np.zeros((2, 2), dtype=complex)
        unit[k, l] = 1.0
        s[:, int(np.flatnonzero(vec(unit))[0])] = vec(img)

    paulis = [ops.PAULI[a] for a in PAULI_ORDER]
    ptm = np.empty((4, 4))
    for i, pi in enumerate(paulis):
        for j, pj in enumerate(paulis):
            ptm[i, j] = np.trace(pi @ unvec(s @ vec(pj))).real / 2

    choi = sum(np.kron(np.outer(np.eye(2)[l], np.eye(2)[n]), images[(l, n)])
               for l in range(2) for n in range(2))
    w, v = np.linalg.eigh(choi)
    kraus = tuple(unvec(np.sqrt(lam) * vec_k) for lam, vec_k in zip(w, v.T) if lam > 1e-12)
    return ProcessTomographyResult(
        superoperator=s,
        pauli_transfer=ptm,
        choi=choi,
        kraus_ops=kraus,
        choi_eigenvalues=w,
        negative_choi_flag=bool(w.min() < -1e-6),
    )


@dataclass
class FidelityReport:
    """Per-experiment metric bundle, serializable with fixed field names."""

    label: str = ""
    f0: float | None = None
    fplus: float | None = None
    fplusi: float | None = None
    fe: float | None = None
    fbar: float | None = None
    coherence: float | None = None
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.fe is not None and self.fbar is None:
            self.fbar = 2.0 / 3.0 * self.fe + 1.0 / 3.0
        eps = 1e-8
        for name in ("f0", "fplus", "fplusi", "fe", "fbar"):
            v = getattr(self, name)
            if v is not None and not -eps <= v <= 1.0 + eps:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "f0": self.f0,
            "fplus": self.fplus,
            "fplusi": self.fplusi,
            "fe": self.fe,
            "fbar": self.fbar,
            "coherence": self.coherence,
            "seed": self.seed,
        }
        if self.fe is not None:
            d["fe_above_threshold"] = bool(self.fe > ENTANGLEMENT_THRESHOLD)
        d.update(self.metadata)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
