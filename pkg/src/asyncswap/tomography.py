"""Polarization state tomography with the six Pauli-eigenstate projectors.

Each analyzed photon is projected on one of H, V, D, A, R, L, giving 6^n
settings per state. Settings are ordered lexicographically in that letter
order, so for two photons the first setting is HH and the last LL.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .states import DensityOperator, as_matrix, entanglement_report

_S = 1 / math.sqrt(2)
LETTERS = "HVDARL"
POLARIZATION = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}
# Pauli basis (Z, X, Y) and eigenvalue sign of each projector
_BASIS = {"H": (3, 1), "V": (3, -1), "D": (1, 1), "A": (1, -1), "R": (2, 1), "L": (2, -1)}
_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSetting:
    label: str

    def __post_init__(self):
        if not self.label or any(c not in LETTERS for c in self.label):
            raise ValueError(f"bad setting label {self.label!r}")

    @property
    def n_modes(self) -> int:
        return len(self.label)

    def vectors(self) -> list[np.ndarray]:
        return [POLARIZATION[c] for c in self.label]

    def projector(self) -> np.ndarray:
        P = np.ones((1, 1), dtype=complex)
        for v in self.vectors():
            P = np.kron(P, np.outer(v, v.conj()))
        return P


def settings(n_modes: int) -> list[MeasurementSetting]:
    if n_modes not in (2, 3):
        raise ValueError("tomography supports 2 or 3 analyzed modes")
    return [MeasurementSetting("".join(t)) for t in itertools.product(LETTERS, repeat=n_modes)]


def setting_labels(n_modes: int) -> list[str]:
    return [s.label for s in settings(n_modes)]


def projectors(n_modes: int) -> np.ndarray:
    return np.stack([s.projector() for s in settings(n_modes)])


@dataclass
class CountTable:
    n_modes: int
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (6**self.n_modes,):
            raise ValueError(f"expected {6**self.n_modes} counts")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def labels(self) -> list[str]:
        return setting_labels(self.n_modes)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.counts.tolist()))

    def __add__(self, other: "CountTable") -> "CountTable":
        if other.n_modes != self.n_modes:
            raise ValueError("cannot add count tables of different size")
        return CountTable(self.n_modes, self.counts + other.counts, dict(self.metadata))

    def to_text(self) -> str:
        head = [f"# n_modes = {self.n_modes}"]
        for key in ("tau_w_ps", "duration_s", "seed_digest"):
            if key in self.metadata:
                head.append(f"# {key} = {self.metadata[key]}")
        rows = [f"{lab},{c}" for lab, c in zip(self.labels, self.counts)]
        return "\n".join(head + ["setting,count"] + rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CountTable":
        meta: dict = {}
        found: dict[str, int] = {}
        n_modes = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                key, val = key.strip(), val.strip()
                if key == "n_modes":
                    n_modes = int(val)
                elif key:
                    meta[key] = _parse_scalar(val)
                continue
            if line.startswith("setting"):
                continue
            lab, c = line.split(",")
            found[lab.strip()] = int(c)
        if n_modes is None:
            n_modes = len(next(iter(found)))
        return accumulate(found, n_modes, meta)


def _parse_scalar(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def accumulate(grouped: Mapping[str, object], n_modes: int, metadata: dict | None = None) -> CountTable:
    """Build a CountTable from events (or plain counts) grouped by setting label.

    Every setting must be present; a value is either an int or a sized
    collection of events.
    """
    labels = setting_labels(n_modes)
    missing = [lab for lab in labels if lab not in grouped]
    if missing:
        raise TomographyError(f"missing settings: {', '.join(missing[:5])}")
    extra = set(grouped) - set(labels)
    if extra:
        raise TomographyError(f"unknown settings: {sorted(extra)[:5]}")
    counts = [v if isinstance(v, (int, np.integer)) else len(v) for v in (grouped[lab] for lab in labels)]
    return CountTable(n_modes, np.array(counts), dict(metadata or {}))


def count_setting_indices(indices: np.ndarray, n_modes: int, metadata: dict | None = None) -> CountTable:
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=6**n_modes)
    return CountTable(n_modes, counts, dict(metadata or {}))


def _group_key(label: str) -> tuple[int, ...]:
    return tuple(_BASIS[c][0] for c in label)


def linear_inversion(counts: CountTable) -> np.ndarray:
    """Pauli-moment inversion; Hermitian with unit trace, not necessarily positive."""
    n = counts.n_modes
    labels = counts.labels
    groups: dict[tuple[int, ...], list[tuple[str, int]]] = {}
    for lab, c in zip(labels, counts.counts):
        groups.setdefault(_group_key(lab), []).append((lab, int(c)))
    freqs: dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]] = {}
    for key, items in groups.items():
        tot = sum(c for _, c in items)
        if tot == 0:
            raise TomographyError(f"no counts in basis group {key}")
        freqs[key] = [(tuple(_BASIS[ch][1] for ch in lab), c / tot) for lab, c in items]

    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    for pauli in itertools.product(range(4), repeat=n):
        support = [k for k, p in enumerate(pauli) if p]
        vals = []
        for key, items in freqs.items():
            if all(key[k] == pauli[k] for k in support):
                vals.append(sum(f * np.prod([s[k] for k in support]) for s, f in items))
        op = np.ones((1, 1), dtype=complex)
        for p in pauli:
            op = np.kron(op, _PAULI[p])
        rho += np.mean(vals) * op
    rho /= d
    return (rho + rho.conj().T) / 2


@dataclass
class ReconstructionResult:
    rho: DensityOperator
    log_likelihood: float
    iterations: int
    converged: bool
    likelihood_trace: np.ndarray = field(repr=False, default=None)
    bootstrap_std: dict = field(default_factory=dict)

    def to_text(self, metrics: Mapping[str, float] | None = None) -> str:
        from .states import dumps_density

        lines = [dumps_density(self.rho).rstrip("\n"), "[metrics]",
                 f"log_likelihood = {self.log_likelihood:.17g}",
                 f"iterations = {self.iterations}",
                 f"converged = {str(self.converged).lower()}"]
        for k, v in (metrics or {}).items():
            lines.append(f"{k} = {v:.17g}")
        for k, v in self.bootstrap_std.items():
            lines.append(f"{k}_std = {v:.17g}")
        return "\n".join(lines) + "\n"


class _Model:
    def __init__(self, n_modes: int, counts: np.ndarray):
        P = projectors(n_modes)
        self.d = 2**n_modes
        self.g = 3**n_modes  # the projectors sum to g * I
        self.Pflat = P.reshape(len(P), -1)
        self.counts = counts.astype(float)
        self.freqs = self.counts / self.counts.sum()
        self.nz = self.counts > 0

    def probs(self, rho: np.ndarray) -> np.ndarray:
        return np.real(self.Pflat @ rho.T.ravel()) / self.g

    def loglik(self, q: np.ndarray) -> float:
        return float(np.sum(self.counts[self.nz] * np.log(q[self.nz])))

    def R(self, q: np.ndarray) -> np.ndarray:
        w = np.zeros_like(q)
        w[self.nz] = self.freqs[self.nz] / q[self.nz]
        return (w @ self.Pflat).reshape(self.d, self.d) / self.g


def mle_reconstruct(
    counts: CountTable,
    epsilon: float = 0.1,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    rho0: np.ndarray | None = None,
) -> ReconstructionResult:
    """Diluted iterative maximum-likelihood reconstruction.

    Each step maps rho -> (I + eps R) rho (I + eps R) / trace, with
    R = sum_j f_j / p_j(rho) * Pi_j. The step size is halved whenever the
    likelihood would drop, so the accepted trace is non-decreasing. Stops when
    the relative likelihood gain falls below ``tol``.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if counts.total == 0:
        raise TomographyError("all counts are zero")
    model = _Model(counts.n_modes, counts.counts)
    d = model.d
    rho = np.eye(d, dtype=complex) / d if rho0 is None else np.array(rho0, dtype=complex)
    q = model.probs(rho)
    L = model.loglik(q)
    trace = [L]
    eps = epsilon
    eye = np.eye(d)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        A = eye + eps * model.R(q)
        new = A @ rho @ A.conj().T
        new /= np.real(np.trace(new))
        new = (new + new.conj().T) / 2
        q_new = model.probs(new)
        if np.any(q_new[model.nz] <= 0):
            L_new = -np.inf
        else:
            L_new = model.loglik(q_new)
        if L_new < L:
            eps /= 2
            if eps < 1e-12:
                break
            continue
        gain = L_new - L
        rho, q, L = new, q_new, L_new
        trace.append(L)
        if gain <= tol * abs(L) or gain == 0.0:
            converged = True
            break
    return ReconstructionResult(
        DensityOperator(rho, validate=False), L, it, converged, np.array(trace)
    )


def log_likelihood(counts: CountTable, rho) -> float:
    model = _Model(counts.n_modes, counts.counts)
    q = model.probs(as_matrix(rho))
    if np.any(q[model.nz] <= 0):
        return -np.inf
    return model.loglik(q)


def clip_to_physical(m: np.ndarray) -> np.ndarray:
    """Zero negative eigenvalues and renormalize."""
    w, U = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0, None)
    out = (U * w) @ U.conj().T
    return out / np.real(np.trace(out))


def expected_counts(rho, n_modes: int, per_setting: float) -> np.ndarray:
    """Mean counts for equal acquisition per setting with ``per_setting``
    events expected per measurement basis group."""
    P = projectors(n_modes)
    p = np.real(np.einsum("jab,ba->j", P, as_matrix(rho)))
    return per_setting * p


def default_metrics(n_modes: int) -> dict[str, Callable[[np.ndarray], float]]:
    if n_modes == 2:
        keys = ("fidelity", "phase_max_fidelity", "concurrence", "eof")
    else:
        keys = ("fidelity", "phase_max_fidelity", "witness_value")
    return {k: (lambda m, k=k: getattr(entanglement_report(m), k)) for k in keys}


def bootstrap_errors(
    counts: CountTable,
    n_resamples: int = 200,
    metrics: Mapping[str, Callable[[np.ndarray], float]] | None = None,
    rng: np.random.Generator | int | None = None,
    resampler: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
    **mle_kwargs,
) -> dict[str, float]:
    """Poisson bootstrap: resample every setting's count, rerun the MLE and
    return the sample standard deviation of each metric."""
    if n_resamples < 100:
        raise ValueError("use at least 100 bootstrap resamples")
    rng = np.random.default_rng(rng)
    metrics = dict(metrics or default_metrics(counts.n_modes))
    resampler = resampler or (lambda c, g: g.poisson(c))
    vals: dict[str, list[float]] = {k: [] for k in metrics}
    for _ in range(n_resamples):
        sample = CountTable(counts.n_modes, resampler(counts.counts, rng))
        if sample.total == 0:
            continue
        rho = mle_reconstruct(sample, **mle_kwargs).rho.matrix
        for k, fn in metrics.items():
            vals[k].append(float(fn(rho)))
    # shifting by the first sample keeps identical resamples at exactly zero spread
    return {k: float(np.std(np.subtract(v, v[0]), ddof=1)) if len(v) > 1 else 0.0
            for k, v in vals.items()}
