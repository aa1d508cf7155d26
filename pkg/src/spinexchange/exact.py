"""Exact small-system references.

Dense state-vector and density-matrix evolution for up to six spin-1 atoms,
and Fock-space evolution of the three-mode pair-creation model. These are
deliberately simple; they exist to check the approximate engines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .coupling import CouplingGraph
from .meanfield import spin1_matrices
from .spinmixing import MomentSeries, ThreeModeParams

MAX_SITES = 6
MAX_LINDBLAD_SITES = 4

_FX, _FY, _FZ, _FP, _FM = spin1_matrices()
_I3 = np.eye(3, dtype=complex)


class OracleSizeError(ValueError):
    """Requested system is too large for dense exact treatment."""


class LeakageError(RuntimeError):
    """Fock-space truncation is too small for the evolved state."""


def site_operator(op: np.ndarray, i: int, n_sites: int) -> np.ndarray:
    """``op`` acting on site ``i`` of an ``n_sites`` chain (site 0 leftmost)."""
    return _kron_sites({i: op}, n_sites)


def _kron_sites(ops: dict, n_sites: int) -> np.ndarray:
    return reduce(np.kron, [ops.get(k, _I3) for k in range(n_sites)])


def _check_sites(n: int, limit: int = MAX_SITES):
    if n > limit:
        raise OracleSizeError(f"{n} sites exceeds the dense limit of {limit} (dimension {3 ** n})")


def _pair_term(a: np.ndarray, b: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    if i == j:
        return site_operator(a @ b, i, n)
    return _kron_sites({i: a, j: b}, n)


def build_flipflop_hamiltonian(graph: CouplingGraph, q: float = 0.0) -> np.ndarray:
    """sum_ij (chi+_ij f_i^+ f_j^- + chi-_ij f_i^- f_j^+) + q sum_i (f_i^z)^2."""
    n = graph.n_sites
    _check_sites(n)
    dim = 3 ** n
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for j in range(n):
            if graph.chi_plus[i, j] != 0:
                H += graph.chi_plus[i, j] * _pair_term(_FP, _FM, i, j, n)
            if graph.chi_minus[i, j] != 0:
                H += graph.chi_minus[i, j] * _pair_term(_FM, _FP, i, j, n)
        if q != 0:
            H += q * site_operator(_FZ @ _FZ, i, n)
    return 0.5 * (H + H.conj().T)


def build_xy_hamiltonian(graph: CouplingGraph, q: float = 0.0) -> np.ndarray:
    """sum_ij chi_ij (f_i^x f_j^x + f_i^y f_j^y) + sum_i h_i f_i^z + q sum_i (f_i^z)^2."""
    n = graph.n_sites
    _check_sites(n)
    dim = 3 ** n
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for j in range(n):
            c = graph.chi[i, j]
            if c != 0:
                H += c * (_pair_term(_FX, _FX, i, j, n) + _pair_term(_FY, _FY, i, j, n))
        H += graph.h[i] * site_operator(_FZ, i, n)
        if q != 0:
            H += q * site_operator(_FZ @ _FZ, i, n)
    return 0.5 * (H + H.conj().T)


def total_fz(n_sites: int) -> np.ndarray:
    return sum(site_operator(_FZ, i, n_sites) for i in range(n_sites))


@dataclass(eq=False)
class ManyBodyState:
    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (3 ** self.n_sites,):
            raise ValueError("amplitude vector must have dimension 3^n_sites")

    @classmethod
    def product(cls, site_vectors: Sequence[np.ndarray]) -> "ManyBodyState":
        vecs = [np.asarray(v, dtype=complex) / np.linalg.norm(v) for v in site_vectors]
        return cls(reduce(np.kron, vecs), len(vecs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(eq=False)
class ExactSeries:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim) amplitudes or (n_times, dim, dim) density matrices
    n_sites: int

    def expectation(self, op: np.ndarray) -> np.ndarray:
        if self.states.ndim == 2:
            return np.einsum("ti,ij,tj->t", self.states.conj(), op, self.states).real
        return np.einsum("tij,ji->t", self.states, op).real

    def site_fz(self) -> np.ndarray:
        """<f_i^z>(t), shape (n_times, n_sites)."""
        return np.stack([self.expectation(site_operator(_FZ, i, self.n_sites))
                         for i in range(self.n_sites)], axis=1)

    def norms(self) -> np.ndarray:
        if self.states.ndim == 2:
            return np.linalg.norm(self.states, axis=1)
        return np.trace(self.states, axis1=1, axis2=2).real


def _uniform_times(t_final, samples, t0=0.0):
    if np.isscalar(samples):
        return np.linspace(t0, t_final, int(samples))
    return np.asarray(samples, dtype=float)


def propagate(psi0: np.ndarray, H: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Apply exp(-i H dt) by scaling-and-squaring; one exponential per distinct step."""
    out = np.empty((times.size, psi0.size), dtype=complex)
    psi = psi0.astype(complex)
    cache = {}
    t_prev = times[0]
    for k, t in enumerate(times):
        dt = t - t_prev
        if dt != 0:
            key = round(dt / max(abs(times[-1]), 1e-300), 12)
            U = cache.get(key)
            if U is None:
                U = cache[key] = expm(-1j * dt * H)
            psi = U @ psi
        out[k] = psi
        t_prev = t
    return out


def evolve_exact(state: ManyBodyState, hamiltonian: np.ndarray, t_final: float,
                 samples=101) -> ExactSeries:
    """Schroedinger evolution sampled on ``samples`` times (count or array).

    The initial sample reproduces the input state exactly.
    """
    times = _uniform_times(t_final, samples)
    if hamiltonian.shape != (state.amplitudes.size,) * 2:
        raise ValueError("Hamiltonian dimension does not match the state")
    return ExactSeries(times, propagate(state.amplitudes, hamiltonian, times), state.n_sites)


def evolve_exact_ode(state: ManyBodyState, hamiltonian: np.ndarray, t_final: float,
                     samples=101, rtol=1e-11, atol=1e-12) -> ExactSeries:
    """Independent adaptive-ODE route for cross-checking :func:`evolve_exact`."""
    times = _uniform_times(t_final, samples)
    H = hamiltonian
    sol = solve_ivp(lambda t, y: -1j * (H @ y), (times[0], times[-1]), state.amplitudes,
                    method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return ExactSeries(times, sol.y.T.copy(), state.n_sites)


def local_jumps(gamma: Sequence[float]) -> list:
    """Independent relaxation toward m=+1: L_i = sqrt(gamma_i) f_i^+."""
    n = len(gamma)
    return [math.sqrt(g) * site_operator(_FP, i, n) for i, g in enumerate(gamma) if g > 0]


def collective_jump(gamma: Sequence[float]) -> list:
    """Single collective jump L = sum_i sqrt(gamma_i) f_i^+."""
    n = len(gamma)
    L = sum(math.sqrt(g) * site_operator(_FP, i, n) for i, g in enumerate(gamma))
    return [L] if np.any(L) else []


def evolve_lindblad(rho0: np.ndarray, hamiltonian: np.ndarray, jumps: Sequence[np.ndarray],
                    t_final: float, samples=101, n_sites: Optional[int] = None,
                    rtol=1e-10, atol=1e-12) -> ExactSeries:
    """Master-equation evolution d rho/dt = -i[H, rho] + sum_k D[L_k] rho."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    dim = rho0.shape[0]
    if n_sites is None:
        n_sites = int(round(math.log(dim, 3)))
    _check_sites(n_sites, MAX_LINDBLAD_SITES)
    H = np.asarray(hamiltonian, dtype=complex)
    Ls = [np.asarray(L, dtype=complex) for L in jumps]
    LdL = sum((L.conj().T @ L for L in Ls), np.zeros((dim, dim), dtype=complex))
    Heff = H - 0.5j * LdL

    def fun(t, y):
        rho = y.reshape(dim, dim)
        d = -1j * (Heff @ rho) + 1j * (rho @ Heff.conj().T)
        for L in Ls:
            d += L @ rho @ L.conj().T
        return d.ravel()

    times = _uniform_times(t_final, samples)
    sol = solve_ivp(fun, (times[0], times[-1]), rho0.ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    states = sol.y.T.reshape(times.size, dim, dim)
    states[0] = rho0
    return ExactSeries(times, states, n_sites)


# -- three-mode Fock space ---------------------------------------------------

@dataclass(eq=False)
class FockState3:
    amplitudes: np.ndarray
    basis: np.ndarray  # (dim, 3) occupations (n_a, n_b, n_c)
    n_total: int


def fock_basis(n_total: int, cutoff: int) -> np.ndarray:
    """All (n_a, n_b, n_c) with sum ``n_total`` and each entry <= ``cutoff``."""
    rows = [(na, nb, n_total - na - nb)
            for na in range(min(n_total, cutoff) + 1)
            for nb in range(min(n_total - na, cutoff) + 1)
            if n_total - na - nb <= cutoff]
    if not rows:
        raise ValueError(f"cutoff {cutoff} cannot hold {n_total} bosons in three modes")
    return np.array(rows, dtype=int)


def build_threemode_hamiltonian(p: ThreeModeParams, cutoff: int,
                                n_total: Optional[int] = None):
    """Dense H_mix on the fixed-total-number block. Returns ``(H, basis)``.

    H_mix = 2 chi (c^2 a+ b+ + h.c.) + (2 chi c+c + q + chi)(a+a + b+b + 1)
    """
    if n_total is None:
        n_total = int(round(p.n0))
    basis = fock_basis(n_total, cutoff)
    index = {tuple(r): k for k, r in enumerate(basis)}
    dim = len(basis)
    H = np.zeros((dim, dim))
    chi, q = p.chi, p.q
    for k, (na, nb, nc) in enumerate(basis):
        H[k, k] = (2 * chi * nc + q + chi) * (na + nb + 1)
        target = index.get((na + 1, nb + 1, nc - 2))
        if target is not None and nc >= 2:
            amp = 2 * chi * math.sqrt((na + 1) * (nb + 1) * nc * (nc - 1))
            H[target, k] += amp
            H[k, target] += amp
    return H, basis


def threemode_number_ops(basis: np.ndarray):
    """Diagonals of (N_s, F_z) in the given Fock basis."""
    na, nb = basis[:, 0].astype(float), basis[:, 1].astype(float)
    return na + nb, na - nb


def pair_sector(p: ThreeModeParams, n_total: int, cutoff: int):
    """H_mix restricted to the pair ladder |k, k, n_total - 2k> reachable from
    |0, 0, n_total>. F_z is conserved, so the restriction is exact."""
    ks = [k for k in range(n_total // 2 + 1) if k <= cutoff and n_total - 2 * k <= cutoff]
    if not ks or ks[0] != 0:
        raise LeakageError(f"|0,0,{n_total}> is not representable with cutoff {cutoff}")
    ks = ks[:next((i for i in range(1, len(ks)) if ks[i] != ks[i - 1] + 1), len(ks))]
    basis = np.array([(k, k, n_total - 2 * k) for k in ks], dtype=int)
    na, nc = basis[:, 0].astype(float), basis[:, 2].astype(float)
    H = np.diag((2 * p.chi * nc + p.q + p.chi) * (2 * na + 1))
    off = 2 * p.chi * np.sqrt((na[:-1] + 1) ** 2 * nc[:-1] * (nc[:-1] - 1))
    H += np.diag(off, 1) + np.diag(off, -1)
    return H, basis


def _block_moments(p: ThreeModeParams, n_total: int, cutoff: int, times: np.ndarray,
                   leak_tol: float):
    H, basis = pair_sector(p, n_total, cutoff)
    psi0 = np.zeros(len(basis), dtype=complex)
    psi0[0] = 1.0
    prob = np.abs(propagate(psi0, H, times)) ** 2
    if basis[-1, 0] < n_total // 2:
        leak = prob[:, -1].max()
        if leak > leak_tol:
            raise LeakageError(f"population {leak:.2e} at the Fock cutoff {cutoff}")
    ns_op, fz_op = threemode_number_ops(basis)
    return prob @ ns_op, prob @ ns_op ** 2, prob @ fz_op, prob @ fz_op ** 2


def exact_pair_creation(p: ThreeModeParams, t_final: float, samples=101,
                        cutoff: Optional[int] = None, pump: str = "fock",
                        leak_tol: float = 1e-6) -> MomentSeries:
    """Moments of N_s and F_z from exact evolution with empty side modes.

    pump
        ``"fock"`` starts from |0, 0, N0> (integer N0). ``"coherent"`` starts
        from a coherent pump of mean N0; since N_s and F_z are block diagonal
        in total number, the result is the Poisson-weighted sum of the
        fixed-number blocks.

    ``p.ns0`` is not used here.
    """
    times = _uniform_times(t_final, samples)
    if pump == "fock":
        n0 = int(round(p.n0))
        if abs(p.n0 - n0) > 1e-9:
            raise ValueError("a Fock pump needs an integer N0")
        weights = {n0: 1.0}
    elif pump == "coherent":
        from scipy.stats import poisson
        hi = int(math.ceil(p.n0 + 10 * math.sqrt(p.n0) + 10))
        weights = {n: float(poisson.pmf(n, p.n0)) for n in range(hi + 1)}
    else:
        raise ValueError(f"unknown pump model {pump!r}")
    acc = np.zeros((4, times.size))
    for n, w in weights.items():
        if w < 1e-16:
            continue
        cut = n if cutoff is None else cutoff
        acc += w * np.array(_block_moments(p, n, cut, times, leak_tol))
    total = sum(w for w in weights.values() if w >= 1e-16)
    ns, ns2, fz, fz2 = acc / total
    return MomentSeries(times, ns, np.sqrt(np.maximum(ns2 - ns ** 2, 0.0)),
                        fz, np.sqrt(np.maximum(fz2 - fz ** 2, 0.0)))


def fock_block_leakage(p: ThreeModeParams, cutoff: int, t_final: float, samples=11) -> float:
    """Amplitude outside the initial total-number block after evolving in the
    direct sum of neighbouring blocks (structurally zero)."""
    n0 = int(round(p.n0))
    blocks = [build_threemode_hamiltonian(p, cutoff, n)[0] for n in (n0 - 1, n0, n0 + 1)]
    dims = [b.shape[0] for b in blocks]
    H = np.zeros((sum(dims), sum(dims)))
    off = 0
    for b in blocks:
        H[off:off + b.shape[0], off:off + b.shape[0]] = b
        off += b.shape[0]
    _, basis = build_threemode_hamiltonian(p, cutoff, n0)
    psi0 = np.zeros(sum(dims), dtype=complex)
    start = dims[0] + int(np.flatnonzero((basis[:, 0] == 0) & (basis[:, 1] == 0))[0])
    psi0[start] = 1.0
    psi_t = propagate(psi0, H, _uniform_times(t_final, samples))
    outside = np.concatenate([psi_t[:, :dims[0]], psi_t[:, dims[0] + dims[1]:]], axis=1)
    return float(np.abs(outside).max())
