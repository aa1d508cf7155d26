"""Physical constants and derived quantities.

All frequencies are angular (rad/s). Use :func:`two_pi` to convert values
quoted as ``2π × f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import Optional

TWO_PI = 2.0 * math.pi

# Bohr magneton over hbar, rad/s per gauss.
MU_B_OVER_HBAR = TWO_PI * 1.3996e6


def two_pi(f_hz: float) -> float:
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f_hz


def zeeman_splitting(b_field: float) -> float:
    """Linear Zeeman splitting mu_B B / (2 hbar) in rad/s for B in gauss."""
    return MU_B_OVER_HBAR * b_field / 2.0


@dataclass(frozen=True)
class PhysicalParams:
    """Validated cavity/atom constants.

    Either ``omega_z`` or ``b_field`` may be omitted; the missing one is
    derived through :func:`zeeman_splitting`. If both are given they must
    agree to 1e-9 relative.
    """

    kappa: float
    g: float
    gamma_atom: float
    delta_atom: float
    delta_c: float
    n_bar: float
    n_atoms: float
    q_over_b2: float = field(default=TWO_PI * 144.0)
    b_field: Optional[float] = None
    omega_z: Optional[float] = None

    def __post_init__(self):
        for name in ("kappa", "g", "gamma_atom", "delta_atom", "delta_c",
                     "n_bar", "n_atoms", "q_over_b2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.gamma_atom <= 0:
            raise ValueError("gamma_atom must be > 0")
        if self.g < 0:
            raise ValueError("g must be >= 0")
        if self.n_bar < 0:
            raise ValueError("n_bar must be >= 0")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")

        if self.b_field is None and self.omega_z is None:
            raise ValueError("one of b_field or omega_z is required")
        if self.b_field is not None and self.b_field < 0:
            raise ValueError("b_field must be >= 0")
        if self.omega_z is None:
            object.__setattr__(self, "omega_z", zeeman_splitting(self.b_field))
        elif self.b_field is None:
            object.__setattr__(self, "b_field", 2.0 * self.omega_z / MU_B_OVER_HBAR)
        else:
            expected = zeeman_splitting(self.b_field)
            if not math.isclose(self.omega_z, expected, rel_tol=1e-9, abs_tol=0.0):
                raise ValueError(
                    f"omega_z={self.omega_z!r} inconsistent with b_field={self.b_field!r} "
                    f"(expected {expected!r})")

    def to_dict(self) -> dict:
        return asdict(self)


def cooperativity(p: PhysicalParams) -> float:
    """Single-atom cooperativity 4 g^2 / (kappa Gamma)."""
    return 4.0 * p.g ** 2 / (p.kappa * p.gamma_atom)


def raman_detunings(p: PhysicalParams) -> tuple[float, float]:
    """Detunings (delta_plus, delta_minus) = (delta_c - omega_z, delta_c + omega_z)."""
    return p.delta_c - p.omega_z, p.delta_c + p.omega_z


def quadratic_zeeman(p: PhysicalParams) -> float:
    return p.q_over_b2 * p.b_field ** 2


def optimal_detuning(p: PhysicalParams) -> float:
    """sqrt(N eta) * kappa.

    The proportionality constant of the scaling law is set to 1 by
    convention; treat the result as an order-of-magnitude scale.
    """
    return math.sqrt(p.n_atoms * cooperativity(p)) * p.kappa
