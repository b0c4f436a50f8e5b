"""Small dense polarization-qubit states and entanglement metrics.

Basis convention used everywhere in the package: H -> 0, V -> 1, and the
leftmost qubit (qubit index 0, i.e. optical mode 1 for the swapped pair) is
the most significant bit. A 2-qubit vector is ordered |HH>, |HV>, |VH>, |VV>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = -1e-8


class NonPhysicalStateError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _n_qubits(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _fix_global_phase(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size == 0:
        return v
    first = v[nz[0]]
    return v * (abs(first) / first)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        _n_qubits(v.size)
        norm = np.linalg.norm(v)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"state vector norm {norm} != 1")
        object.__setattr__(self, "amplitudes", _readonly(v))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()))


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density operator must be a square matrix")
        _n_qubits(m.shape[0])
        if self.validate:
            check_physical(m)
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def __eq__(self, other):
        if not isinstance(other, DensityOperator):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def check_physical(m: np.ndarray) -> None:
    m = np.asarray(m)
    if np.max(np.abs(m - m.conj().T)) > HERM_TOL:
        raise NonPhysicalStateError("matrix is not Hermitian")
    if abs(np.trace(m) - 1) > TRACE_TOL:
        raise NonPhysicalStateError(f"trace {np.trace(m).real:.3g} != 1")
    lo = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
    if lo < EIG_TOL:
        raise NonPhysicalStateError(f"negative eigenvalue {lo:.3g}")


def as_matrix(x) -> np.ndarray:
    """Density matrix of a DensityOperator, StateVector or raw array."""
    if isinstance(x, DensityOperator):
        return x.matrix
    if isinstance(x, StateVector):
        v = x.amplitudes
        return np.outer(v, v.conj())
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        return np.outer(a, a.conj())
    return a


def density(x) -> DensityOperator:
    if isinstance(x, DensityOperator):
        return x
    return DensityOperator(as_matrix(x))


_SQ2 = 1 / math.sqrt(2)


def canonical_state(name: str, theta: float | None = None) -> StateVector:
    """Named polarization states.

    ``psi_minus_theta`` is (|HV> - e^{i theta}|VH>)/sqrt2 and ``ghz_theta`` is
    (|HHH> + e^{i theta}|VVV>)/sqrt2. The global phase is fixed so that the
    first nonzero amplitude is real and positive.
    """
    key = name.lower()
    needs_theta = key in ("psi_minus_theta", "ghz_theta")
    if needs_theta:
        if theta is None:
            raise ValueError(f"{name} requires theta")
        if not -math.pi - 1e-12 <= theta <= math.pi + 1e-12:
            raise ValueError("theta must lie in [-pi, pi]")
    phase = np.exp(1j * theta) if needs_theta else 1.0
    if key == "h":
        v = [1, 0]
    elif key == "v":
        v = [0, 1]
    elif key == "d":
        v = [_SQ2, _SQ2]
    elif key == "phi_plus":
        v = [_SQ2, 0, 0, _SQ2]
    elif key == "psi_minus":
        v = [0, _SQ2, -_SQ2, 0]
    elif key == "psi_minus_theta":
        v = [0, _SQ2, -phase * _SQ2, 0]
    elif key in ("ghz", "ghz_theta"):
        v = np.zeros(8, dtype=complex)
        v[0] = _SQ2
        v[7] = phase * _SQ2
    else:
        raise ValueError(f"unknown state {name!r}")
    return StateVector(_fix_global_phase(np.asarray(v, dtype=complex)))


def tensor(a, b):
    """Kronecker product with ``a``'s qubits most significant."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix))
    raise TypeError("tensor requires two StateVectors or two DensityOperators")


def partial_trace(rho, keep: Iterable[int]) -> DensityOperator:
    """Reduced state on the qubits in ``keep`` (0-based, order preserved)."""
    m = as_matrix(rho)
    n = _n_qubits(m.shape[0])
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit index out of range for {n} qubits")
    return DensityOperator(reduce_matrix(m, keep), validate=False)


def reduce_matrix(m: np.ndarray, keep: list[int]) -> np.ndarray:
    n = _n_qubits(m.shape[0])
    t = m.reshape([2] * (2 * n))
    drop = [q for q in range(n) if q not in keep]
    # trace highest index first so remaining axis numbers stay valid
    for q in sorted(drop, reverse=True):
        nq = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + nq)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def permute_qubits(m: np.ndarray, order: list[int]) -> np.ndarray:
    """Reorder qubits of a density matrix: new qubit k is old qubit order[k]."""
    n = _n_qubits(m.shape[0])
    t = m.reshape([2] * (2 * n))
    t = t.transpose(list(order) + [n + q for q in order])
    return t.reshape(m.shape)


def fidelity(rho, target: StateVector) -> float:
    """<target|rho|target>, clamped to [0, 1]."""
    m = as_matrix(rho)
    t = target.amplitudes if isinstance(target, StateVector) else np.asarray(target)
    if m.shape[0] != t.size:
        raise ValueError(f"dimension mismatch: rho {m.shape[0]} vs target {t.size}")
    val = float(np.real(np.vdot(t, m @ t)))
    return min(1.0, max(0.0, val))


_FAMILIES = {
    # (dim, i, j, sign) for states (e_i + sign e^{i theta} e_j)/sqrt2
    "psi_minus_theta": (4, 1, 2, -1.0),
    "ghz_theta": (8, 0, 7, 1.0),
}


def phase_max_fidelity(rho, family: str) -> tuple[float, float]:
    """Maximize <psi_theta|rho|psi_theta> over theta in closed form.

    The overlap is a + Re(w e^{i theta}) with a the mean of the two populations
    and w the signed coherence, so the maximum a + |w| sits at theta = -arg w.
    Returns (theta_star, value); theta_star is 0 when the coherence vanishes.
    """
    try:
        dim, i, j, sign = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}") from None
    m = as_matrix(rho)
    if m.shape[0] != dim:
        raise ValueError(f"family {family} needs dim {dim}, got {m.shape[0]}")
    a = 0.5 * float(np.real(m[i, i] + m[j, j]))
    w = sign * m[i, j]
    b, c = float(w.real), float(-w.imag)
    amp = math.hypot(b, c)
    theta = math.atan2(c, b) if amp > 1e-15 else 0.0
    return theta, a + amp


def phase_family_overlap(rho, family: str, theta: float) -> float:
    """Unclamped <psi_theta|rho|psi_theta> for a phase family."""
    dim, i, j, sign = _FAMILIES[family]
    m = as_matrix(rho)
    if m.shape[0] != dim:
        raise ValueError(f"family {family} needs dim {dim}, got {m.shape[0]}")
    return 0.5 * float(np.real(m[i, i] + m[j, j])) + float(
        np.real(sign * m[i, j] * np.exp(1j * theta))
    )


_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def _binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def concurrence_eof(rho) -> tuple[float, float]:
    """Wootters concurrence and entanglement of formation of a 2-qubit state."""
    m = as_matrix(rho)
    if m.shape[0] != 4:
        raise ValueError("concurrence is defined for two qubits only")
    tilde = _SYSY @ m.conj() @ _SYSY
    ev = np.linalg.eigvals(m @ tilde).real
    lam = np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1]
    c = max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))
    c = min(c, 1.0)
    eof = _binary_entropy((1 + math.sqrt(max(0.0, 1 - c * c))) / 2)
    return c, eof


def witness_value(rho, theta: float) -> float:
    """Tr(W rho) for W = I/2 - |GHZ_theta><GHZ_theta|."""
    m = as_matrix(rho)
    if m.shape[0] != 8:
        raise ValueError("GHZ witness needs a 3-qubit state")
    return 0.5 - phase_family_overlap(m, "ghz_theta", theta)


@dataclass(frozen=True)
class EntanglementReport:
    fidelity: float
    theta_star: float
    phase_max_fidelity: float
    concurrence: float | None = None
    eof: float | None = None
    witness_value: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def entanglement_report(rho) -> EntanglementReport:
    """Metrics for a swapped pair (2 qubits, target psi-) or a GHZ state (3 qubits)."""
    m = as_matrix(rho)
    if m.shape[0] == 4:
        f = fidelity(m, canonical_state("psi_minus"))
        theta, fmax = phase_max_fidelity(m, "psi_minus_theta")
        c, e = concurrence_eof(m)
        return EntanglementReport(f, theta, fmax, concurrence=c, eof=e)
    if m.shape[0] == 8:
        f = fidelity(m, canonical_state("ghz"))
        theta, fmax = phase_max_fidelity(m, "ghz_theta")
        return EntanglementReport(f, theta, fmax, witness_value=witness_value(m, theta))
    raise ValueError("entanglement report supports 2- and 3-qubit states")


# -- text serialization ------------------------------------------------------

def dumps_density(rho) -> str:
    m = as_matrix(rho)
    lines = ["# density operator", f"dim = {m.shape[0]}", "[real]"]
    lines += [",".join(f"{x:.17g}" for x in row) for row in m.real]
    lines.append("[imag]")
    lines += [",".join(f"{x:.17g}" for x in row) for row in m.imag]
    return "\n".join(lines) + "\n"


def loads_density(text: str, validate: bool = True) -> DensityOperator:
    dim = None
    block = None
    rows: dict[str, list[list[float]]] = {"real": [], "imag": []}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("dim"):
            dim = int(line.split("=", 1)[1])
        elif line in ("[real]", "[imag]"):
            block = line[1:-1]
        elif line.startswith("["):
            block = None  # foreign section, e.g. a metrics block
        elif block is not None:
            rows[block].append([float(x) for x in line.split(",")])
    if dim is None:
        raise ValueError("missing 'dim' in density operator text")
    re_, im_ = np.array(rows["real"]), np.array(rows["imag"])
    if re_.shape != (dim, dim) or im_.shape != (dim, dim):
        raise ValueError("density operator text has wrong matrix shape")
    return DensityOperator(re_ + 1j * im_, validate=validate)
