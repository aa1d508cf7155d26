"""Cavity mode profile, response functions and the spin-exchange coupling graph."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .params import PhysicalParams, raman_detunings

PROBE_WAVELENGTH_UM = 0.780


@dataclass(frozen=True, eq=False)
class ModeProfile:
    """Per-site positions (um), light shift per photon (rad/s) and relative density."""

    grid: np.ndarray
    omega: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=float)
        omega = np.ascontiguousarray(self.omega, dtype=float)
        density = np.ascontiguousarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a non-empty 1-D array")
        if omega.shape != grid.shape or density.shape != grid.shape:
            raise ValueError("omega and density must match the grid length")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(omega))
                and np.all(np.isfinite(density))):
            raise ValueError("profile values must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(density < 0) or np.any(density > 1):
            raise ValueError("density must lie in [0, 1]")
        for a in (grid, omega, density):
            a.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "density", density)

    @property
    def n_sites(self) -> int:
        return self.grid.size


def _grid_from_spec(grid_spec, cloud_center: float, cloud_rms: float) -> np.ndarray:
    if grid_spec is None:
        return np.linspace(cloud_center - 3 * cloud_rms, cloud_center + 3 * cloud_rms, 128)
    if isinstance(grid_spec, dict):
        x_min, x_max, n = grid_spec["x_min"], grid_spec["x_max"], grid_spec["n_sites"]
    elif len(grid_spec) == 3 and not isinstance(grid_spec, np.ndarray):
        x_min, x_max, n = grid_spec
    else:
        return np.asarray(grid_spec, dtype=float)
    n = int(n)
    if n < 1:
        raise ValueError("grid must contain at least one site")
    if n == 1:
        return np.array([0.5 * (x_min + x_max)])
    return np.linspace(x_min, x_max, n)


def gaussian_mode_profile(waist: float, cloud_center: float, cloud_rms: float,
                          grid_spec=None, omega_peak: float = 1.0,
                          wavelength: float = PROBE_WAVELENGTH_UM,
                          transverse_rms: Optional[float] = None,
                          seed: int = 0) -> ModeProfile:
    """Light-shift envelope of a fundamental Gaussian mode along the cavity axis.

    Positions are measured from the cavity waist (um). The on-axis intensity
    falls off as ``1 / (1 + (x / x_R)^2)`` with Rayleigh range
    ``x_R = pi w0^2 / lambda``, so a cloud displaced from the waist sees a
    monotone coupling gradient.

    Parameters
    ----------
    grid_spec
        ``(x_min, x_max, n_sites)``, a dict with those keys, an explicit array
        of positions, or None for 128 sites over +-3 rms of the cloud.
    transverse_rms
        If given, each site's light shift is multiplied by the transverse
        mode envelope ``exp(-2 r^2 / w(x)^2)`` at a radius drawn from an
        isotropic Gaussian of this rms per axis (seeded). Models coupling
        dispersion from finite transverse cloud size.
    """
    if waist <= 0 or cloud_rms <= 0:
        raise ValueError("waist and cloud_rms must be positive")
    grid = _grid_from_spec(grid_spec, cloud_center, cloud_rms)
    if grid.size == 0:
        raise ValueError("empty grid")
    if math.isinf(waist):
        envelope = np.ones_like(grid)
        w_x = np.full_like(grid, np.inf)
    else:
        x_r = math.pi * waist ** 2 / wavelength
        envelope = 1.0 / (1.0 + (grid / x_r) ** 2)
        w_x = waist * np.sqrt(1.0 + (grid / x_r) ** 2)
    omega = omega_peak * envelope
    if transverse_rms is not None and transverse_rms > 0:
        rng = np.random.default_rng(seed)
        xy = rng.normal(0.0, transverse_rms, size=(grid.size, 2))
        r2 = np.sum(xy ** 2, axis=1)
        omega = omega * np.exp(-2.0 * r2 / w_x ** 2)
    density = np.exp(-0.5 * ((grid - cloud_center) / cloud_rms) ** 2)
    density = density / density.max()
    return ModeProfile(grid, omega, density)


def tabulated_mode_profile(records: Iterable[Sequence[float]]) -> ModeProfile:
    """Profile from ``(x_um, omega, density)`` rows; density is peak-normalized."""
    arr = np.asarray(list(records), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise ValueError("expected non-empty rows of (x_um, omega, density)")
    x, omega, density = arr.T
    if np.any(density < 0):
        raise ValueError("density must be non-negative")
    peak = density.max()
    if peak <= 0:
        raise ValueError("density must have a positive maximum")
    return ModeProfile(x, omega, density / peak)


def read_profile(path) -> ModeProfile:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
            rows.append([float(v) for v in parts])
    return tabulated_mode_profile(rows)


def write_profile(profile: ModeProfile, path) -> None:
    lines = ["# x_um omega_rad_per_s density"]
    for x, om, rho in zip(profile.grid, profile.omega, profile.density):
        lines.append(f"{float(x)!r} {float(om)!r} {float(rho)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def dispersive_response(delta, kappa):
    """Real part of the cavity response, delta*kappa / (16 (delta^2 + (kappa/2)^2)).

    Odd in ``delta``; extremal value +-1/16 at ``delta = +-kappa/2``.
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    delta = np.asarray(delta, dtype=float) if not np.isscalar(delta) else float(delta)
    return delta * kappa / (16.0 * (delta * delta + 0.25 * kappa * kappa))


def absorptive_response(delta, kappa):
    """Imaginary counterpart (kappa/2)*kappa / (16 (delta^2 + (kappa/2)^2)).

    Even and positive, maximal (1/8) on resonance.
    """
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    delta = np.asarray(delta, dtype=float) if not np.isscalar(delta) else float(delta)
    return 0.5 * kappa * kappa / (16.0 * (delta * delta + 0.25 * kappa * kappa))


@dataclass(frozen=True, eq=False)
class CouplingGraph:
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    chi: np.ndarray
    h: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        n = self.h.shape[0]
        for name in ("chi_plus", "chi_minus", "chi"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if not np.array_equal(m, m.T):
                raise ValueError(f"{name} must be symmetric")
        if self.gamma.shape != (n,) or np.any(self.gamma < 0):
            raise ValueError("gamma must be a non-negative per-site vector")
        for name in ("chi_plus", "chi_minus", "chi", "h", "gamma"):
            getattr(self, name).setflags(write=False)

    @property
    def n_sites(self) -> int:
        return self.h.shape[0]

    @classmethod
    def from_matrices(cls, chi_plus, chi_minus, gamma=None) -> "CouplingGraph":
        """Graph from arbitrary symmetric channel matrices (useful for oracles)."""
        cp = np.array(chi_plus, dtype=float)
        cm = np.array(chi_minus, dtype=float)
        n = cp.shape[0]
        g = np.zeros(n) if gamma is None else np.array(gamma, dtype=float)
        return cls(cp, cm, cp + cm, np.diag(cp) - np.diag(cm), g)

    def scaled(self, factor: float) -> "CouplingGraph":
        """Same graph with every coherent coupling multiplied by ``factor``."""
        return CouplingGraph.from_matrices(self.chi_plus * factor,
                                           self.chi_minus * factor, self.gamma.copy())


def build_coupling_graph(profile: ModeProfile, p: PhysicalParams,
                         dissipation_scale: float = 1.0) -> CouplingGraph:
    """Couplings chi_ij^+- = n_bar Omega_i Omega_j A(delta_+-) / kappa.

    Relaxation rates use the absorptive part of the same response,
    ``gamma_i = n_bar Omega_i^2 [B(delta_+) + B(delta_-)] / kappa``, times an
    optional ``dissipation_scale``.
    """
    d_plus, d_minus = raman_detunings(p)
    om = profile.omega
    outer = np.outer(om, om)
    pref = p.n_bar / p.kappa
    chi_plus = pref * dispersive_response(d_plus, p.kappa) * outer
    chi_minus = pref * dispersive_response(d_minus, p.kappa) * outer
    absorb = absorptive_response(d_plus, p.kappa) + absorptive_response(d_minus, p.kappa)
    gamma = dissipation_scale * pref * absorb * om ** 2
    return CouplingGraph(chi_plus, chi_minus, chi_plus + chi_minus,
                         np.diag(chi_plus) - np.diag(chi_minus), gamma)
