"""Independent reference implementations used only by the tests.

The optics oracle works in first quantization with explicit bosonic
symmetrization. Each interfering photon lives in spatial mode {3, 4} x
polarization {H, V} x temporal label {0, 1}. Partial distinguishability is an
amplitude overlap sqrt(v) between the two photons' temporal states. Output
amplitudes for one photon at 3' and one at 4' are enumerated mode by mode and
the temporal labels are traced out. Mixed inputs are handled through their
eigen-decompositions.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

S = 1 / math.sqrt(2)


def _mode(spatial: int, pol: int, t: int) -> int:
    # spatial 0 -> mode 3 (or 3'), 1 -> mode 4 (or 4')
    return spatial * 4 + pol * 2 + t


def _beamsplitter(kind: str) -> np.ndarray:
    """8x8 single-photon map (spatial, pol, time) -> (spatial', pol, time)."""
    U = np.zeros((8, 8), dtype=complex)
    for pol, t in itertools.product(range(2), range(2)):
        i3, i4 = _mode(0, pol, t), _mode(1, pol, t)
        o3, o4 = _mode(0, pol, t), _mode(1, pol, t)
        if kind == "hbs":
            U[o3, i3], U[o4, i3] = S, S
            U[o3, i4], U[o4, i4] = S, -S
        elif kind == "pbs":
            if pol == 0:  # H transmits
                U[o3, i3] = 1
                U[o4, i4] = 1
            else:  # V reflects
                U[o4, i3] = 1
                U[o3, i4] = 1
    return U


def _eig(rho: np.ndarray):
    w, vecs = np.linalg.eigh(rho)
    return [(float(p), vecs[:, k]) for k, p in enumerate(w) if p > 1e-14]


def _two_photon_output(kind, a, b, v):
    """Amplitude tensor over (herald_a, herald_b, mode at 3', mode at 4').

    ``a``: 2x2 amplitudes [herald, pol] of source A (photon in mode 4);
    ``b``: 2x2 amplitudes [herald, pol] of source B (photon in mode 3).
    """
    U = _beamsplitter(kind)
    s = math.sqrt(v)
    tau_a = np.array([1.0, 0.0])
    tau_b = np.array([s, math.sqrt(max(0.0, 1 - v))])
    out = np.zeros((a.shape[0], b.shape[0], 8, 8), dtype=complex)
    for h, g in itertools.product(range(a.shape[0]), range(b.shape[0])):
        phi_a = np.zeros(8, dtype=complex)
        phi_b = np.zeros(8, dtype=complex)
        for pol, t in itertools.product(range(2), range(2)):
            phi_a[_mode(1, pol, t)] += a[h, pol] * tau_a[t]
            phi_b[_mode(0, pol, t)] += b[g, pol] * tau_b[t]
        ua, ub = U @ phi_a, U @ phi_b
        # coefficient of c+_p c+_q |0> for p != q
        out[h, g] = np.outer(ua, ub) + np.outer(ub, ua)
    return out


def _post_select(amp, pol3=None, pol4=None):
    """State after one click at 3' and one at 4', temporal labels traced.
    With fixed polarizations the port qubits are projected out; otherwise
    they are kept as output qubits."""
    na, nb = amp.shape[:2]
    keep3 = [pol3] if pol3 is not None else [0, 1]
    keep4 = [pol4] if pol4 is not None else [0, 1]
    dim = na * nb * len(keep3) * len(keep4)
    rho = np.zeros((dim, dim), dtype=complex)
    for t3, t4 in itertools.product(range(2), range(2)):
        vec = np.zeros(dim, dtype=complex)
        k = 0
        for h, g, p3, p4 in itertools.product(range(na), range(nb), keep3, keep4):
            vec[k] = amp[h, g, _mode(0, p3, t3), _mode(1, p4, t4)]
            k += 1
        rho += np.outer(vec, vec.conj())
    return rho


def swap_oracle(rho_a, rho_b, v, pattern=(1, 0)):
    """Post-selected (modes 1, 2) state and probability for V at 3', H at 4'
    by default."""
    total = np.zeros((4, 4), dtype=complex)
    for pa, va in _eig(np.asarray(rho_a)):
        for pb, vb in _eig(np.asarray(rho_b)):
            amp = _two_photon_output("hbs", va.reshape(2, 2), vb.reshape(2, 2), v)
            total += pa * pb * _post_select(amp, *pattern)
    p = float(np.real(np.trace(total)))
    return total / p, p


def ghz_oracle(rho_a, ancilla, v):
    """Output on (1, 3', 4') of the parity check of mode 4 with the ancilla."""
    total = np.zeros((8, 8), dtype=complex)
    anc = np.asarray(ancilla, dtype=complex).reshape(1, 2)
    for pa, va in _eig(np.asarray(rho_a)):
        amp = _two_photon_output("pbs", va.reshape(2, 2), anc, v)
        total += pa * _post_select(amp)
    p = float(np.real(np.trace(total)))
    return total / p, p


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def trace_distance(a, b) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b)))))


def _family_vectors(family: str, thetas: np.ndarray) -> np.ndarray:
    if family == "psi_minus_theta":
        psi = np.zeros((thetas.size, 4), dtype=complex)
        psi[:, 1], psi[:, 2] = S, -S * np.exp(1j * thetas)
    else:
        psi = np.zeros((thetas.size, 8), dtype=complex)
        psi[:, 0], psi[:, 7] = S, S * np.exp(1j * thetas)
    return psi


def grid_phase_max(rho: np.ndarray, family: str, n: int = 10_000):
    """Dense scan of <psi_theta|rho|psi_theta> over theta."""
    thetas = np.linspace(-math.pi, math.pi, n, endpoint=False)
    psi = _family_vectors(family, thetas)
    vals = np.real(np.einsum("ti,ij,tj->t", psi.conj(), rho, psi))
    k = int(np.argmax(vals))
    return float(thetas[k]), float(vals[k])


def grid_phase_max_refined(rho: np.ndarray, family: str, n: int = 10_000):
    """Grid scan followed by golden-section refinement of the best cell, so
    that the comparison tolerance is not limited by the grid spacing."""
    th0, _ = grid_phase_max(rho, family, n)
    h = 2 * math.pi / n

    def f(th):
        psi = _family_vectors(family, np.array([th]))[0]
        return float(np.real(np.vdot(psi, rho @ psi)))

    lo, hi = th0 - h, th0 + h
    g = (math.sqrt(5) - 1) / 2
    for _ in range(100):
        m1, m2 = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    th = 0.5 * (lo + hi)
    return th, f(th)


def wootters_concurrence(rho: np.ndarray) -> float:
    """Concurrence from the Hermitian form sqrt(sqrt(rho) rho~ sqrt(rho))."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    w, U = np.linalg.eigh(rho)
    sq = (U * np.sqrt(np.clip(w, 0, None))) @ U.conj().T
    r = sq @ yy @ rho.conj() @ yy @ sq
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvalsh((r + r.conj().T) / 2), 0, None)))[::-1]
    return max(0.0, float(lam[0] - lam[1:].sum()))


def brute_fourfolds(record, tau_w: int) -> int:
    """O(N^2) closest-policy four-fold count: for every start look at every
    stop on every channel."""
    h = int(tau_w) // 2
    n = 0
    starts = record.times[0].tolist()
    stops = [record.times[c].tolist() for c in (1, 2, 3)]
    for s in starts:
        if all(any(abs(t - s) <= h for t in ch) for ch in stops):
            n += 1
    return n


def brute_fourfold_events(record, tau_w: int):
    """Closest stop per channel (ties to the earlier) for every start."""
    h = int(tau_w) // 2
    out = []
    for s in record.times[0].tolist():
        pick = []
        for c in (1, 2, 3):
            best = None
            for t in record.times[c].tolist():
                d = abs(t - s)
                if d <= h and (best is None or d < best[0] or (d == best[0] and t < best[1])):
                    best = (d, t)
            if best is None:
                break
            pick.append(best[1])
        if len(pick) == 3:
            out.append((s, *pick))
    return out


def brute_histogram(record, start_ch, stop_ch, rng_ps):
    counts = {}
    for s in record.times[start_ch].tolist():
        for t in record.times[stop_ch].tolist():
            d = t - s
            if abs(d) <= rng_ps:
                counts[d] = counts.get(d, 0) + 1
    return counts
