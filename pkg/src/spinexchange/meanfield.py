"""Mean-field dynamics of an extended cloud of spin-1 sites.

Each site carries a 3x3 density matrix in the (m=+1, 0, -1) basis and
evolves under

    H_i = B_i^x f^x + B_i^y f^y + h_i f^z + q (f^z)^2 [+ chi_ii (f^x f^x + f^y f^y)]

with ``B_i^{x,y} = 2 sum_{j != i} chi_ij w_j <f_j^{x,y}>`` and local
relaxation ``gamma_i D[f^+]`` toward m = +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import kernels
from .coupling import CouplingGraph, ModeProfile

BASIS_M = (1, 0, -1)
_SQRT2 = math.sqrt(2.0)


class IntegrationError(RuntimeError):
    """Integrator failed; ``last_good_time`` is the last accepted time."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time {last_good_time!r} s)")
        self.last_good_time = last_good_time


def spin1_matrices():
    """Spin-1 operators (f_x, f_y, f_z, f_plus, f_minus) in the (+1, 0, -1) basis."""
    fp = np.zeros((3, 3), dtype=complex)
    fp[0, 1] = fp[1, 2] = _SQRT2
    fm = fp.conj().T
    fx = (fp + fm) / 2
    fy = (fp - fm) / 2j
    fz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return fx, fy, fz, fp, fm


_FX, _FY, _FZ, _FP, _FM = spin1_matrices()


def level_vector(m: int) -> np.ndarray:
    if m not in BASIS_M:
        raise ValueError(f"Zeeman level must be one of {BASIS_M}, got {m!r}")
    v = np.zeros(3, dtype=complex)
    v[BASIS_M.index(m)] = 1.0
    return v


def pulse_unitary(axis: str, angle: float, transition: Optional[str] = None) -> np.ndarray:
    """Rotation by ``angle`` about ``axis``.

    With ``transition=None`` this is the spin-1 rotation ``exp(-i angle f_axis)``.
    With ``transition="-1,0"`` or ``"0,+1"`` it is a two-level (Raman) pulse
    acting only on that pair of levels, ``exp(-i angle sigma_axis / 2)``.
    """
    if axis not in ("x", "y", "z"):
        raise ValueError(f"pulse axis must be x, y or z, got {axis!r}")
    if transition is None:
        gen = {"x": _FX, "y": _FY, "z": _FZ}[axis]
        return expm(-1j * angle * gen)
    pairs = {"-1,0": (2, 1), "0,+1": (1, 0)}
    if transition not in pairs:
        raise ValueError(f"transition must be one of {sorted(pairs)}, got {transition!r}")
    lo, hi = pairs[transition]
    sigma = {"x": np.array([[0, 1], [1, 0]], dtype=complex),
             "y": np.array([[0, -1j], [1j, 0]]),
             "z": np.diag([1.0, -1.0]).astype(complex)}[axis]
    # two-level basis ordered (lower m, upper m)
    u2 = expm(-0.5j * angle * sigma)
    u = np.eye(3, dtype=complex)
    idx = [lo, hi]
    for r in range(2):
        for c in range(2):
            u[idx[r], idx[c]] = u2[r, c]
    return u


@dataclass(frozen=True)
class Region:
    """Interval ``x_min <= x < x_max`` (um) with an optional pulse."""

    name: str
    x_min: float
    x_max: float
    axis: Optional[str] = None
    angle: float = 0.0
    transition: Optional[str] = None

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"region {self.name!r}: x_min must be < x_max")
        if not 0.0 <= self.angle < 2 * math.pi:
            raise ValueError(f"region {self.name!r}: pulse angle must be in [0, 2pi)")
        if self.axis is None and self.angle != 0.0:
            raise ValueError(f"region {self.name!r}: angle given without an axis")


@dataclass(frozen=True)
class QuenchProtocol:
    kind: str
    regions: tuple
    initial_level: int = -1
    smoothing_width: float = 0.0

    def __post_init__(self):
        if self.kind not in ("hop", "bipartite_xy", "custom"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        level_vector(self.initial_level)
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ValueError("region names must be unique")
        ordered = sorted(self.regions, key=lambda r: r.x_min)
        for left, right in zip(ordered, ordered[1:]):
            if right.x_min < left.x_max:
                raise ValueError(f"regions {left.name!r} and {right.name!r} overlap")
        object.__setattr__(self, "regions", tuple(self.regions))

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(name)

    def masks(self, grid: np.ndarray) -> dict:
        """Boolean site mask per region; raises if the regions miss any site."""
        grid = np.asarray(grid)
        covered = np.zeros(grid.shape, dtype=int)
        out = {}
        for r in self.regions:
            m = (grid >= r.x_min) & (grid < r.x_max)
            out[r.name] = m
            covered += m
        if np.any(covered == 0):
            missing = grid[covered == 0]
            raise ValueError(f"regions do not cover grid sites at x = {missing[:5].tolist()}")
        return out


def hop_protocol(x_min: float, x_max: float, a_min: float, a_max: float,
                 angle: float = math.pi / 2, initial_level: int = -1,
                 transition: Optional[str] = "-1,0") -> QuenchProtocol:
    """Local pulse on region A = [a_min, a_max); the rest of the cloud untouched.

    The default is a two-level Raman pi/2 pulse on the m=-1 <-> 0 transition,
    leaving A with <f^z> = -1/2.
    """
    regions = []
    if a_min > x_min:
        regions.append(Region("left", x_min, a_min))
    regions.append(Region("A", a_min, a_max, "y", angle, transition))
    if a_max < x_max:
        regions.append(Region("right", a_max, x_max))
    return QuenchProtocol("hop", tuple(regions), initial_level)


def bipartite_xy_protocol(x_min: float, x_max: float, boundary: float,
                          a_side: str = "right") -> QuenchProtocol:
    """Region A polarized along +x, region B along +y, starting from m = -1."""
    ax = Region("A", boundary, x_max, "y", 3 * math.pi / 2)
    bx = Region("B", x_min, boundary, "x", math.pi / 2)
    if a_side == "left":
        ax = Region("A", x_min, boundary, "y", 3 * math.pi / 2)
        bx = Region("B", boundary, x_max, "x", math.pi / 2)
    return QuenchProtocol("bipartite_xy", (ax, bx), -1)


@dataclass(eq=False)
class EnsembleState:
    sites: np.ndarray
    weights: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.sites = np.ascontiguousarray(self.sites, dtype=np.complex128)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.sites.ndim != 3 or self.sites.shape[1:] != (3, 3):
            raise ValueError("sites must have shape (n, 3, 3)")
        if self.weights.shape != (self.sites.shape[0],):
            raise ValueError("weights must have one entry per site")

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def check(self, herm_tol=1e-10, trace_tol=1e-9, eig_tol=1e-9) -> None:
        """Raise ValueError if any site is not a valid density matrix."""
        rho = self.sites
        herm = np.max(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))))
        if herm > herm_tol:
            raise ValueError(f"Hermiticity violated by {herm:.3e}")
        tr = np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1.0))
        if tr > trace_tol:
            raise ValueError(f"trace deviates from 1 by {tr:.3e}")
        hpart = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
        emin = np.min(np.linalg.eigvalsh(hpart))
        if emin < -eig_tol:
            raise ValueError(f"negative eigenvalue {emin:.3e}")


def initialize(protocol: QuenchProtocol, profile: ModeProfile) -> EnsembleState:
    masks = protocol.masks(profile.grid)
    psi0 = level_vector(protocol.initial_level)
    rho = np.empty((profile.n_sites, 3, 3), dtype=complex)
    rho[:] = np.outer(psi0, psi0.conj())
    lo = min(r.x_min for r in protocol.regions)
    hi = max(r.x_max for r in protocol.regions)
    unpulsed = np.zeros(profile.n_sites, dtype=bool)
    for r in protocol.regions:
        if r.axis is None:
            unpulsed |= masks[r.name]
    for r in protocol.regions:
        if r.axis is None:
            continue
        if protocol.smoothing_width > 0:
            # erf edges at interior boundaries only; the taper may spill into
            # unpulsed neighbours but never into another pulsed region
            from scipy.special import erf
            idx = np.flatnonzero(masks[r.name] | unpulsed)
            x = profile.grid[idx]
            s = protocol.smoothing_width * math.sqrt(2.0)
            left = np.ones(idx.size) if r.x_min <= lo else 0.5 * (1 + erf((x - r.x_min) / s))
            right = np.ones(idx.size) if r.x_max >= hi else 0.5 * (1 - erf((x - r.x_max) / s))
            frac = left * right
        else:
            idx = np.flatnonzero(masks[r.name])
            frac = np.ones(idx.size)
        for i, f in zip(idx, frac):
            psi = pulse_unitary(r.axis, r.angle * f, r.transition) @ psi0
            rho[i] = np.outer(psi, psi.conj())
    return EnsembleState(rho, profile.density.copy(), 0.0)


# -- observables -----------------------------------------------------------

def _fplus(rho):
    return _SQRT2 * (rho[..., 1, 0] + rho[..., 2, 1])


def spin_expectations(rho: np.ndarray):
    """(<f^x>, <f^y>, <f^z>) for an array of density matrices (..., 3, 3)."""
    fp = _fplus(rho)
    fz = (rho[..., 0, 0] - rho[..., 2, 2]).real
    return fp.real, fp.imag, fz


def excitation_density(state: EnsembleState) -> np.ndarray:
    """weights_i * (1 + <f_i^z>)."""
    _, _, fz = spin_expectations(state.sites)
    return state.weights * (1.0 + fz)


@dataclass(eq=False)
class MeanFieldSeries:
    times: np.ndarray
    rho: np.ndarray  # (n_times, n_sites, 3, 3)
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def state(self, k: int) -> EnsembleState:
        return EnsembleState(self.rho[k], self.weights, float(self.times[k]))

    @property
    def states(self):
        return [self.state(k) for k in range(len(self))]

    def expectations(self):
        return spin_expectations(self.rho)

    @property
    def fz(self) -> np.ndarray:
        return (self.rho[..., 0, 0] - self.rho[..., 2, 2]).real

    def excitation_density(self) -> np.ndarray:
        return self.weights[None, :] * (1.0 + self.fz)

    def region_mean_fz(self, mask: np.ndarray) -> np.ndarray:
        w = self.weights * mask
        return self.fz @ w / w.sum()

    def total_magnetization(self) -> np.ndarray:
        return self.fz @ self.weights


# -- dynamics --------------------------------------------------------------

def onsite_shift(graph: CouplingGraph, onsite: bool = True) -> np.ndarray:
    """Per-site coefficient of (f^z)^2 from the i = j exchange term.

    chi_ii (f^x f^x + f^y f^y) = chi_ii (2 - (f^z)^2) for spin 1.
    """
    if not onsite:
        return np.zeros(graph.n_sites)
    return -np.diag(graph.chi).copy()


def _rhs_factory(graph: CouplingGraph, weights, q: float, onsite: bool, gamma=None):
    n = graph.n_sites
    chi = np.ascontiguousarray(graph.chi, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    h = np.ascontiguousarray(graph.h, dtype=float)
    qeff = np.ascontiguousarray(q + onsite_shift(graph, onsite), dtype=float)
    gam = np.ascontiguousarray(graph.gamma if gamma is None else gamma, dtype=float)
    out = np.empty((n, 3, 3), dtype=np.complex128)
    rhs = kernels.meanfield_rhs

    def fun(t, y):
        rho = np.ascontiguousarray(y).reshape(n, 3, 3)
        rhs(rho, chi, w, h, qeff, gam, out)
        return out.ravel().copy()

    return fun


def time_derivative(state: EnsembleState, graph: CouplingGraph, q: float = 0.0,
                    onsite: bool = True) -> np.ndarray:
    """d rho_i / dt for every site, shape (n, 3, 3)."""
    fun = _rhs_factory(graph, state.weights, q, onsite)
    return fun(state.time, state.sites.ravel()).reshape(state.n_sites, 3, 3)


def initial_fz_slopes(state: EnsembleState, graph: CouplingGraph, q: float = 0.0,
                      onsite: bool = True) -> np.ndarray:
    d = time_derivative(state, graph, q, onsite)
    return (d[:, 0, 0] - d[:, 2, 2]).real


def sample_times(t_final: float, dt_spec=None, t0: float = 0.0) -> np.ndarray:
    """Resolve a sampling request: None (201 points), an int count, a float step,
    or an explicit array of times."""
    if dt_spec is None:
        return np.linspace(t0, t_final, 201)
    if isinstance(dt_spec, (int, np.integer)) and not isinstance(dt_spec, bool):
        if dt_spec < 2:
            raise ValueError("need at least 2 samples")
        return np.linspace(t0, t_final, int(dt_spec))
    if np.isscalar(dt_spec):
        n = int(math.floor((t_final - t0) / float(dt_spec) + 1e-9)) + 1
        return t0 + float(dt_spec) * np.arange(n)
    times = np.asarray(dt_spec, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return times


def evolve(state: EnsembleState, graph: CouplingGraph, q: float, t_final: float,
           dt_spec=None, onsite: bool = True, rtol: float = 1e-8, atol: float = 1e-10,
           method: str = "DOP853") -> MeanFieldSeries:
    """Integrate the mean-field equations and return states at the sample times.

    ``onsite`` keeps the single-site part of the exchange sum,
    ``chi_ii (f^x f^x + f^y f^y)``, in each site Hamiltonian so that the
    mean-field equations coincide with the exact model for one atom per site.
    """
    if graph.n_sites != state.n_sites:
        raise ValueError(f"graph has {graph.n_sites} sites, state has {state.n_sites}")
    times = sample_times(t_final, dt_spec, state.time)
    if times[0] < state.time or times[-1] > t_final * (1 + 1e-12) + 1e-300:
        raise ValueError("sample times must lie within [state.time, t_final]")
    fun = _rhs_factory(graph, state.weights, q, onsite)
    y0 = state.sites.ravel().copy()
    n = state.n_sites
    if t_final == state.time:
        rho = np.repeat(state.sites[None], times.size, axis=0)
        return MeanFieldSeries(times, rho, state.weights.copy())
    sol = solve_ivp(fun, (state.time, t_final), y0, method=method, t_eval=times,
                    rtol=rtol, atol=atol)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else state.time
        raise IntegrationError(f"mean-field integration failed: {sol.message}", last)
    rho = sol.y.T.reshape(times.size, n, 3, 3)
    # t_eval includes t0 exactly; restore the bit-exact initial state there
    if times[0] == state.time:
        rho[0] = state.sites
    return MeanFieldSeries(times, rho, state.weights.copy())


def characteristic_rate(graph: CouplingGraph, weights, q: float = 0.0) -> float:
    """Upper estimate of the fastest local precession/relaxation rate (rad/s)."""
    total = np.abs(graph.chi @ np.asarray(weights))
    return float(2 * total.max() + np.abs(graph.h).max() + abs(q)
                 + np.abs(np.diag(graph.chi)).max() + 2 * graph.gamma.max())


def estimated_period(graph: CouplingGraph, weights, q: float = 0.0) -> float:
    rate = characteristic_rate(graph, weights, q)
    if rate <= 0:
        return math.inf
    return 2 * math.pi / rate


# -- analysis --------------------------------------------------------------

def fit_initial_slope(times: np.ndarray, values: np.ndarray, window: float,
                      degree: int = 3) -> float:
    """Slope at the first sample from a polynomial fit over ``[t0, t0 + window]``.

    The higher-order terms absorb coherent curvature and the onset of
    exponential relaxation.
    """
    times = np.asarray(times, dtype=float)
    sel = times <= times[0] + window * (1 + 1e-12)
    if sel.sum() < 3:
        raise ValueError("slope window must contain at least 3 samples")
    deg = min(degree, int(sel.sum()) - 1)
    tau = times[sel] - times[0]
    scale = tau[-1] if tau[-1] > 0 else 1.0
    coef = np.polynomial.polynomial.polyfit(tau / scale, np.asarray(values)[sel], deg)
    return float(coef[1] / scale)


@dataclass(frozen=True)
class ExtractedCouplings:
    chi_A: float
    chi_B: float
    gamma_A: float
    gamma_B: float
    slope_A: float
    slope_B: float
    coupling_scale: float
    relaxation_scale: float

    def __iter__(self):
        return iter((self.chi_A, self.chi_B, self.gamma_A, self.gamma_B))


def extract_couplings(series: MeanFieldSeries, regions: dict, omega: np.ndarray,
                      window: Optional[float] = None, degree: int = 3) -> ExtractedCouplings:
    """Region-mean total coupling and relaxation rate from early-time slopes.

    With couplings of the separable form ``chi_ij = c Omega_i Omega_j`` and
    rates ``gamma_i = g Omega_i^2``, the initial slope of the density-weighted
    region magnetization is linear in (c, g) with coefficients fixed by the
    prepared state and the calibrated light-shift profile ``omega``. The
    measured A/B slopes are inverted for (c, g); the returned values are the
    region means of ``chi_i = sum_j chi_ij w_j`` and ``gamma_i``.

    Parameters
    ----------
    regions
        ``{"A": mask_A, "B": mask_B}`` boolean site masks.
    window
        Fit window (s) from the first sample; defaults to the full series.
    """
    omega = np.asarray(omega, dtype=float)
    w = series.weights
    if window is None:
        window = float(series.times[-1] - series.times[0])
    fx, fy, fz = spin_expectations(series.rho[0])
    fzz = (series.rho[0][:, 0, 0] + series.rho[0][:, 2, 2]).real
    X = np.sum(omega * w * fx)
    Y = np.sum(omega * w * fy)
    coh = 2 * omega * (X * fy - Y * fx)
    dis = omega ** 2 * (2.0 - fzz - fz)

    rows, slopes, out = [], [], {}
    for name in ("A", "B"):
        mask = np.asarray(regions[name], dtype=bool)
        ww = w * mask
        if ww.sum() <= 0:
            raise ValueError(f"region {name} has no weight")
        avg = lambda v: float(np.sum(ww * v) / ww.sum())
        rows.append([avg(coh), avg(dis)])
        s = fit_initial_slope(series.times, series.region_mean_fz(mask), window, degree)
        slopes.append(s)
        out[name] = (avg(omega), avg(omega ** 2))
    c, g = np.linalg.solve(np.array(rows), np.array(slopes))
    total = float(np.sum(omega * w))
    return ExtractedCouplings(
        chi_A=c * out["A"][0] * total, chi_B=c * out["B"][0] * total,
        gamma_A=g * out["A"][1], gamma_B=g * out["B"][1],
        slope_A=slopes[0], slope_B=slopes[1],
        coupling_scale=float(c), relaxation_scale=float(g))
