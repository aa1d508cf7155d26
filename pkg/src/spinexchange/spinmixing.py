"""Three-mode pair creation: m=0 pump (c) feeding correlated m=+1 (a), m=-1 (b) pairs.

Semiclassical trajectories follow the symmetric-ordered (Weyl) symbol of

    H_mix = 2 chi (c^2 a+ b+ + h.c.) + (2 chi c+c + q + chi)(a+a + b+b + 1),

which is ``2 chi (c^2 a* b* + c.c.) + (2 chi |c|^2 + q)(|a|^2 + |b|^2)``.
Initial conditions are sampled from Wigner distributions with half a quantum
of noise per mode.
"""
from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit

from . import kernels

CHUNK_SIZE = 256


@dataclass(frozen=True)
class ThreeModeParams:
    chi: float
    q: float
    n0: float
    ns0: float = 0.0

    def __post_init__(self):
        for name in ("chi", "q", "n0", "ns0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.n0 < 0 or self.ns0 < 0:
            raise ValueError("n0 and ns0 must be >= 0")


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


def instability_condition(p: ThreeModeParams) -> Stability:
    """Unstable when 4 N0 chi exceeds |q| in magnitude with opposite sign.

    At q = 0 any nonzero chi with a populated pump counts as unstable.
    """
    collective = 4.0 * p.n0 * p.chi
    if p.q == 0:
        return Stability.UNSTABLE if (p.chi != 0 and p.n0 > 0) else Stability.STABLE
    if collective != 0 and np.sign(collective) == -np.sign(p.q) and abs(collective) > abs(p.q):
        return Stability.UNSTABLE
    return Stability.STABLE


def growth_rate(p: ThreeModeParams) -> float:
    """lambda = 4 sqrt(N0 |q| |chi|)."""
    prod = p.n0 * abs(p.q) * abs(p.chi)
    if prod == 0:
        raise ValueError("growth rate undefined when q * n0 * chi = 0")
    return 4.0 * math.sqrt(prod)


def linear_growth_rate(p: ThreeModeParams) -> float:
    """Exact undepleted-pump rate 2 sqrt(-q (4 chi N0 + q)) of N_s; 0 when stable.

    Reduces to :func:`growth_rate` for |q| << N0 |chi|.
    """
    disc = -p.q * (4.0 * p.chi * p.n0 + p.q)
    return 2.0 * math.sqrt(disc) if disc > 0 else 0.0


def growth_prefactor(p: ThreeModeParams) -> float:
    """[4 N0 chi / lambda]^2, equal to N0 |chi| / |q|."""
    return (4.0 * p.n0 * p.chi / growth_rate(p)) ** 2


def analytic_growth(p: ThreeModeParams, t):
    """Undepleted-pump side-mode population

        N_s(t) = [4 N0 chi / lambda]^2 (N_s(0) + 1)(cosh(lambda t) - 1) + N_s(0).
    """
    lam = growth_rate(p)
    if instability_condition(p) is Stability.STABLE:
        warnings.warn("analytic growth law evaluated in the stable regime", RuntimeWarning)
    t = np.asarray(t, dtype=float)
    return growth_prefactor(p) * (p.ns0 + 1.0) * (np.cosh(lam * t) - 1.0) + p.ns0


def coupling_for_growth(q: float, n0: float, target_rate: float, exact: bool = True) -> float:
    """Magnitude of chi giving side-mode growth rate ``target_rate``.

    With ``exact`` the undepleted-pump rate is matched, otherwise the
    ``4 sqrt(N0 q |chi|)`` law. Sign must be chosen opposite to q by the caller.
    """
    q = abs(q)
    if exact:
        return (target_rate ** 2 / 4.0 + q ** 2) / (4.0 * n0 * q)
    return target_rate ** 2 / (16.0 * n0 * q)


# -- trajectories --------------------------------------------------------------

@dataclass(eq=False)
class TrajectoryEnsemble:
    times: np.ndarray
    amplitudes: np.ndarray  # (n_times, n_traj, 3) columns (a, b, c)
    seed: int
    params: Optional[ThreeModeParams] = None

    @property
    def n_traj(self) -> int:
        return self.amplitudes.shape[1]

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_initial(p: ThreeModeParams, seed: int, indices, pump: str = "coherent",
                   seed_model: str = "thermal") -> np.ndarray:
    """Wigner samples of (a, b, c) for the given trajectory indices.

    pump
        ``"coherent"``: c = sqrt(N0) + vacuum noise.
        ``"fock"``: |c|^2 = N0 + 1/2 with uniformly random phase.
    seed_model
        How an initial side population ``ns0`` (split equally between a and b)
        is represented: ``"thermal"`` (incoherent) or ``"coherent"`` (fixed
        amplitude, random phase per run).
    """
    if pump not in ("coherent", "fock"):
        raise ValueError(f"unknown pump model {pump!r}")
    if seed_model not in ("thermal", "coherent"):
        raise ValueError(f"unknown seed model {seed_model!r}")
    indices = list(indices)
    y = np.empty((len(indices), 3), dtype=np.complex128)
    n_side = p.ns0 / 2.0
    for row, k in enumerate(indices):
        rng = trajectory_rng(seed, k)
        noise = rng.standard_normal(6)
        phases = rng.uniform(0.0, 2 * math.pi, size=3)
        vac = 0.5 * (noise[0::2] + 1j * noise[1::2])
        if seed_model == "thermal":
            side = math.sqrt(n_side + 0.5) * np.sqrt(0.5) * (noise[0:4:2] + 1j * noise[1:4:2])
        else:
            side = math.sqrt(n_side) * np.exp(1j * phases[:2]) + vac[:2]
        y[row, 0:2] = side
        if pump == "coherent":
            y[row, 2] = math.sqrt(p.n0) + vac[2]
        else:
            y[row, 2] = math.sqrt(p.n0 + 0.5) * np.exp(1j * phases[2])
    return y


def _integrate_chunk(args):
    p, seed, indices, times, pump, seed_model, rtol, atol = args
    y0 = sample_initial(p, seed, indices, pump, seed_model)
    n = y0.shape[0]
    out = np.empty((n, 3), dtype=np.complex128)
    rhs = kernels.threemode_rhs
    chi, q = float(p.chi), float(p.q)

    def fun(t, y):
        rhs(np.ascontiguousarray(y).reshape(n, 3), chi, q, out)
        return out.ravel().copy()

    if times[-1] == times[0]:
        return np.repeat(y0[None], times.size, axis=0)
    sol = solve_ivp(fun, (times[0], times[-1]), y0.ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed near t={sol.t[-1]!r}: {sol.message}")
    res = sol.y.T.reshape(times.size, n, 3)
    res[0] = y0
    return res


def semiclassical_evolve(p: ThreeModeParams, n_traj: int, t_final: float, seed: int,
                         samples=101, pump: str = "coherent", seed_model: str = "thermal",
                         jobs: int = 1, rtol: float = 1e-9, atol: float = 1e-9,
                         chunk_size: int = CHUNK_SIZE) -> TrajectoryEnsemble:
    """Truncated-Wigner ensemble of the three-mode model.

    Trajectory ``k`` draws its initial noise from ``SeedSequence(seed, spawn_key=(k,))``
    and trajectories are integrated in fixed-size chunks, so results do not
    depend on ``jobs``.
    """
    if n_traj < 2:
        raise ValueError("need at least 2 trajectories")
    times = (np.linspace(0.0, t_final, int(samples)) if np.isscalar(samples)
             else np.asarray(samples, dtype=float))
    chunks = [range(s, min(s + chunk_size, n_traj)) for s in range(0, n_traj, chunk_size)]
    tasks = [(p, seed, c, times, pump, seed_model, rtol, atol) for c in chunks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_integrate_chunk, tasks))
    else:
        parts = [_integrate_chunk(t) for t in tasks]
    return TrajectoryEnsemble(times, np.concatenate(parts, axis=1), seed, p)


# -- statistics ----------------------------------------------------------------

@dataclass(eq=False)
class MomentSeries:
    times: np.ndarray
    ns_mean: np.ndarray
    ns_std: np.ndarray
    fz_mean: np.ndarray
    fz_std: np.ndarray
    n_traj: Optional[int] = None

    def ns_stderr(self) -> np.ndarray:
        if not self.n_traj:
            return np.zeros_like(self.ns_mean)
        return self.ns_std / math.sqrt(self.n_traj)


def moments(ensemble: TrajectoryEnsemble, detection_noise: float = 0.0) -> MomentSeries:
    """Symmetric-ordering-corrected N_s and F_z statistics across trajectories.

    Means subtract 1/2 per side mode; variances subtract 1/2 (the Weyl
    correction for the square of a two-mode number operator). A detection
    noise floor, if given, is added in quadrature to both standard deviations.
    """
    if ensemble.n_traj < 2:
        raise ValueError("need at least 2 trajectories")
    pops = ensemble.populations()
    w_ns = pops[..., 0] + pops[..., 1] - 1.0
    w_fz = pops[..., 0] - pops[..., 1]
    ns_mean = w_ns.mean(axis=1)
    fz_mean = w_fz.mean(axis=1)
    ns_var = np.maximum(w_ns.var(axis=1, ddof=1) - 0.5, 0.0)
    fz_var = np.maximum(w_fz.var(axis=1, ddof=1) - 0.5, 0.0)
    floor2 = detection_noise ** 2
    return MomentSeries(ensemble.times, ns_mean, np.sqrt(ns_var + floor2),
                        fz_mean, np.sqrt(fz_var + floor2), ensemble.n_traj)


class FitError(RuntimeError):
    """No usable growth signal in the series."""


@dataclass(frozen=True)
class GrowthFit:
    lambda_fit: float
    ns0_fit: float
    lambda_ci: tuple
    ns0_ci: tuple

    def __iter__(self):
        return iter((self.lambda_fit, self.ns0_fit))


def growth_model(t, lam, ns0, q):
    """Growth law with the prefactor written as (lambda / 4q)^2."""
    return (lam / (4.0 * q)) ** 2 * (ns0 + 1.0) * (np.cosh(lam * t) - 1.0) + ns0


def fit_growth(times, ns, q: float, max_fraction: Optional[float] = None,
               n_total: Optional[float] = None) -> GrowthFit:
    """Least-squares fit of the growth law for (lambda, N_s(0)) with q known.

    Uses the identity [4 N0 chi / lambda]^2 = (lambda / 4 q)^2 so the model
    depends on lambda and N_s(0) only. Residuals are weighted by the inverse
    population so early points count. Returns 95% confidence intervals.

    Raises :class:`FitError` when the series never rises one count above its
    start, when it spans less than one e-folding of the fitted rate, or when
    the fit does not converge.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(ns, dtype=float)
    q = abs(q)
    if q == 0:
        raise ValueError("q must be nonzero")
    if max_fraction is not None and n_total:
        keep = y <= max_fraction * n_total
        t, y = t[keep], y[keep]
    if t.size < 4:
        raise FitError("need at least 4 points to fit")
    if np.nanmax(y) < y[0] + 1.0:
        raise FitError("series does not grow by one count; no growth signal")
    t = t - t[0]
    # initial guess from the late-time exponential
    rise = np.maximum(y - y[0], 1e-12)
    late = slice(t.size // 2, None)
    slope = np.polyfit(t[late], np.log(rise[late] + 1.0), 1)[0]
    lam0 = max(slope, 1.0 / t[-1])
    ns00 = max(y[0], 0.0)
    sigma = np.maximum(y, 1.0)
    try:
        popt, pcov = curve_fit(lambda tt, lam, n0: growth_model(tt, lam, n0, q), t, y,
                               p0=[lam0, ns00], sigma=sigma, bounds=([0.0, 0.0], [np.inf, np.inf]),
                               maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"growth fit did not converge: {exc}") from exc
    lam, n0 = popt
    if not np.all(np.isfinite(pcov)):
        raise FitError("growth fit is ill-conditioned")
    if lam * t[-1] < 1.0:
        raise FitError(f"fitted rate {lam:.3g}/s spans less than one e-fold")
    err = 1.96 * np.sqrt(np.diag(pcov))
    if err[0] > lam:
        raise FitError("growth rate undetermined by the data")
    return GrowthFit(float(lam), float(n0), (float(lam - err[0]), float(lam + err[0])),
                     (float(n0 - err[1]), float(n0 + err[1])))
