"""Post-selected output states of the swapping and parity-check circuits.

Both circuits mix one photon from each source on a two-port element: a half
beamsplitter (HBS) for the Bell-state measurement, a polarizing beamsplitter
(PBS) for the parity check. Mode labels follow the experiment: source A emits
into modes 1 and 4, source B into modes 2 and 3, and modes 3 and 4 meet at the
element whose outputs are 3' and 4'. A source's state is a 2-qubit density
operator ordered (herald photon, interfering photon).

Partial distinguishability enters through a single overlap ``v``: the photon
pair behaves as an incoherent mixture of an indistinguishable part (weight v)
and a fully distinguishable part (weight 1 - v). Only cross terms between the
two routing paths are affected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import (
    DensityOperator,
    StateVector,
    as_matrix,
    check_physical,
    density,
    permute_qubits,
)

H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)
_S = 1 / math.sqrt(2)

# single-photon transfer matrices; rows (3'H, 3'V, 4'H, 4'V), cols (3H, 3V, 4H, 4V)
HBS = np.array(
    [
        [_S, 0, _S, 0],
        [0, _S, 0, _S],
        [_S, 0, -_S, 0],
        [0, _S, 0, -_S],
    ],
    dtype=complex,
)
PBS = np.array(
    [
        [1, 0, 0, 0],  # 3'H <- 3H (transmitted)
        [0, 0, 0, 1],  # 3'V <- 4V (reflected)
        [0, 0, 1, 0],  # 4'H <- 4H
        [0, 1, 0, 0],  # 4'V <- 3V
    ],
    dtype=complex,
)

PATTERNS = {"V3H4": (V, H), "H3V4": (H, V)}


@dataclass(frozen=True)
class SourceSpec:
    state: DensityOperator
    label: str = "A"

    def __post_init__(self):
        if self.state.dim != 4:
            raise ValueError("a pair source is a 2-qubit state")
        if self.label not in ("A", "B"):
            raise ValueError("source label must be 'A' or 'B'")


@dataclass(frozen=True)
class InterferenceVisibility:
    v: float

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility {self.v} outside [0, 1]")


@dataclass(frozen=True)
class HeraldedOutcome:
    state: DensityOperator
    success_probability: float


def visibility_array(dt, tau_c: float) -> np.ndarray:
    """Squared overlap of two Gaussian wavepackets (intensity FWHM ``tau_c``)
    whose centers are ``dt`` apart: exp(-4 ln2 dt^2 / (2 tau_c^2))."""
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")
    dt = np.asarray(dt, dtype=float)
    return np.exp(-4 * math.log(2) * dt**2 / (2 * tau_c**2))


def visibility_from_dt(dt: float, tau_c: float) -> InterferenceVisibility:
    return InterferenceVisibility(float(visibility_array(dt, tau_c)))


def _vis(v) -> float:
    return v.v if isinstance(v, InterferenceVisibility) else InterferenceVisibility(float(v)).v


def path_operators(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kraus maps for one-photon-per-output post-selection.

    Input space: (photon in 3) x (photon in 4) polarizations; output space:
    (photon in 3') x (photon in 4'). K1 routes 3->3', 4->4'; K2 routes 3->4',
    4->3'.
    """
    K1 = np.zeros((4, 4), dtype=complex)
    K2 = np.zeros((4, 4), dtype=complex)
    for p in range(2):
        for q in range(2):
            for x in range(2):
                for y in range(2):
                    K1[2 * p + q, 2 * x + y] = M[p, x] * M[2 + q, 2 + y]
                    K2[2 * p + q, 2 * x + y] = M[2 + q, x] * M[p, 2 + y]
    return K1, K2


def _embed(K: np.ndarray, n_front: int) -> np.ndarray:
    return np.kron(np.eye(2**n_front), K)


def _mix(rho: np.ndarray, K1: np.ndarray, K2: np.ndarray, v: float) -> np.ndarray:
    a = K1 @ rho
    b = K2 @ rho
    return (
        a @ K1.conj().T
        + b @ K2.conj().T
        + v * (a @ K2.conj().T + b @ K1.conj().T)
    )


def _probability(out: np.ndarray) -> float:
    # amplitude products such as (1/sqrt2)^2 carry ~1e-16 of noise; dropping it
    # keeps dyadic probabilities (1/2, 1/8) exact
    return round(float(np.real(np.trace(out))), 14)


def _physical(src) -> np.ndarray:
    m = as_matrix(src.state if isinstance(src, SourceSpec) else src)
    check_physical(m)
    return m


def swap_input(rho_a, rho_b) -> np.ndarray:
    """Joint 4-qubit state ordered (1, 2, 3, 4) from A on (1,4) and B on (2,3)."""
    return permute_qubits(np.kron(rho_a, rho_b), [0, 2, 3, 1])


def bsm_swap(src_a, src_b, vis, pattern: str = "V3H4") -> HeraldedOutcome:
    """State of modes 1, 2 heralded by an orthogonal-polarization coincidence
    behind the HBS (default: V at 3', H at 4')."""
    ra, rb = _physical(src_a), _physical(src_b)
    try:
        p3, p4 = PATTERNS[pattern]
    except KeyError:
        raise ValueError(f"unknown detector pattern {pattern!r}") from None
    K1, K2 = path_operators(HBS)
    sigma = _mix(swap_input(ra, rb), _embed(K1, 2), _embed(K2, 2), _vis(vis))
    bra = np.kron(np.eye(4), np.kron(p3, p4).conj()[None, :])
    out = bra @ sigma @ bra.conj().T
    prob = _probability(out)
    if prob <= 1e-15:
        raise ValueError("heralding pattern has zero probability for these inputs")
    return HeraldedOutcome(DensityOperator(out / prob), prob)


def qpc_ghz(src_a, ancilla: StateVector, vis) -> HeraldedOutcome:
    """Parity check of mode 4 (source A) with an ancilla in mode 3 on a PBS,
    keeping one photon per output. Output qubits are (1, 3', 4')."""
    ra = _physical(src_a)
    anc = ancilla.amplitudes if isinstance(ancilla, StateVector) else np.asarray(ancilla)
    if anc.size != 2:
        raise ValueError("ancilla must be a single-qubit state")
    joint = permute_qubits(np.kron(ra, np.outer(anc, anc.conj())), [0, 2, 1])
    K1, K2 = path_operators(PBS)
    out = _mix(joint, _embed(K1, 1), _embed(K2, 1), _vis(vis))
    prob = _probability(out)
    if prob <= 1e-15:
        raise ValueError("parity check has zero success probability for these inputs")
    return HeraldedOutcome(DensityOperator(out / prob), prob)


def local_unitary(m: np.ndarray, U: np.ndarray, mode: int) -> np.ndarray:
    n = int(round(math.log2(m.shape[0])))
    if not 0 <= mode < n:
        raise ValueError(f"mode {mode} out of range for {n} qubits")
    full = np.kron(np.kron(np.eye(2**mode), U), np.eye(2 ** (n - mode - 1)))
    return full @ m @ full.conj().T


def apply_local_phase(state, mode: int, theta: float) -> DensityOperator:
    """Conjugate qubit ``mode`` (0-based) by diag(1, e^{i theta})."""
    m = as_matrix(state)
    U = np.diag([1.0, np.exp(1j * theta)])
    return DensityOperator(local_unitary(m, U, mode), validate=False)


# -- event-level tables for the Monte Carlo -----------------------------------

# output mode after the port analyzers: transmitted/blocked at 3', at 4'
T3, R3, T4, R4 = range(4)
UNORDERED = [(m, n) for m in range(4) for n in range(m, 4)]


def _analyzer_basis(a: np.ndarray) -> np.ndarray:
    a = a / np.linalg.norm(a)
    perp = np.array([-np.conj(a[1]), np.conj(a[0])])
    return np.vstack([a.conj(), perp.conj()])


def analyzed_transfer(M: np.ndarray, a3: np.ndarray, a4: np.ndarray) -> np.ndarray:
    """Transfer matrix into (t3, r3, t4, r4): photon passes or is blocked by the
    polarizer projecting on ``a3`` at 3' and ``a4`` at 4'."""
    A = np.zeros((4, 4), dtype=complex)
    A[0:2, 0:2] = _analyzer_basis(a3)
    A[2:4, 2:4] = _analyzer_basis(a4)
    return A @ M


def _proj_pair(p: np.ndarray) -> np.ndarray:
    P = np.outer(p, p.conj()) / np.vdot(p, p).real
    return np.stack([P, np.eye(2) - P])


@dataclass(frozen=True)
class EventTables:
    """Outcome probabilities for one analyzer setting.

    Index conventions: o1, o2 in {0: herald photon passes its analyzer, 1:
    blocked}; port modes in (t3, r3, t4, r4).

    ind[o1, o2, k]        indistinguishable pair, unordered pattern UNORDERED[k]
    dist[o1, o2, m, n]    distinguishable pair, photon 3 -> m, photon 4 -> n
    alone_a[o1, n]        isolated source-A pair, photon 4 -> n
    alone_b[o2, m]        isolated source-B pair, photon 3 -> m
    """

    ind: np.ndarray
    dist: np.ndarray
    alone_a: np.ndarray
    alone_b: np.ndarray


def event_tables(M, rho_a, rho_b, p1, p2, a3, a4) -> EventTables:
    Mp = analyzed_transfer(M, a3, a4)
    P1, P2 = _proj_pair(p1), _proj_pair(p2)
    rho = swap_input(as_matrix(rho_a), as_matrix(rho_b))  # (1, 2, 3, 4)
    r = rho.reshape(4, 4, 4, 4)  # (12, 34, 12', 34')

    def herald_probs(k: np.ndarray) -> np.ndarray:
        # k: row vector on the (3,4) polarization space; returns p[o1, o2]
        sig = np.einsum("x,axby,y->ab", k, r, k.conj()).reshape(2, 2, 2, 2)
        return np.real(np.einsum("oik,pjl,klij->op", P1, P2, sig))

    def amp(m, n):
        return np.outer(Mp[m, 0:2], Mp[n, 2:4]).ravel()

    ind = np.zeros((2, 2, len(UNORDERED)))
    for k, (m, n) in enumerate(UNORDERED):
        row = amp(m, n) + amp(n, m) if m != n else math.sqrt(2) * amp(m, m)
        ind[:, :, k] = herald_probs(row)
    dist = np.zeros((2, 2, 4, 4))
    for m in range(4):
        for n in range(4):
            dist[:, :, m, n] = herald_probs(amp(m, n))

    ra = as_matrix(rho_a).reshape(2, 2, 2, 2)
    rb = as_matrix(rho_b).reshape(2, 2, 2, 2)
    alone_a = np.stack([_single(P1, Mp[n, 2:4], ra) for n in range(4)], axis=1)
    alone_b = np.stack([_single(P2, Mp[m, 0:2], rb) for m in range(4)], axis=1)
    return EventTables(*(np.clip(t, 0.0, None) for t in (ind, dist, alone_a, alone_b)))


def _single(P: np.ndarray, k: np.ndarray, r: np.ndarray) -> np.ndarray:
    # r indexed (herald, photon, herald', photon'); k is a bra on the photon
    sig = np.einsum("y,aybw,w->ab", k, r, k.conj())
    return np.real(np.einsum("oik,ki->o", P, sig))


def werner_pair(fidelity: float, target: str = "phi_plus", phase: float = 0.0) -> DensityOperator:
    """Mixture of a Bell state with white noise with the given Bell fidelity;
    ``phase`` is a local phase on the herald photon."""
    from .states import canonical_state

    if not 0.25 <= fidelity <= 1.0:
        raise ValueError("Werner fidelity must lie in [1/4, 1]")
    p = (4 * fidelity - 1) / 3
    psi = canonical_state(target).amplitudes
    m = p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4
    if phase:
        m = local_unitary(m, np.diag([1.0, np.exp(1j * phase)]), 0)
    return density(m)
