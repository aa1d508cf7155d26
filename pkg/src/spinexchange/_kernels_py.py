"""NumPy implementations of the integration kernels.

Used when the compiled extension is unavailable or disabled with
``SPINEXCHANGE_PURE_PYTHON=1``. Signatures match ``_kernels.pyx``.
"""
import numpy as np

_SQRT2 = np.sqrt(2.0)
_LDL = np.array([0.0, 2.0, 2.0])  # diagonal of f^- f^+ in the (+1, 0, -1) basis


def meanfield_rhs(rho, chi, weights, h, qeff, gamma, out):
    """Time derivative of per-site spin-1 density matrices.

    rho, out : (n, 3, 3) complex128
    chi      : (n, n) float64, diagonal ignored
    weights, h, qeff, gamma : (n,) float64
    """
    # <f^+> = sqrt2 (rho[1,0] + rho[2,1])
    fp = _SQRT2 * (rho[:, 1, 0] + rho[:, 2, 1])
    s = weights * fp
    field = 2.0 * (chi @ s - np.diagonal(chi) * s)
    bc = np.conj(field) / _SQRT2
    bb = field / _SQRT2

    n = rho.shape[0]
    H = np.zeros((n, 3, 3), dtype=np.complex128)
    H[:, 0, 0] = h + qeff
    H[:, 2, 2] = -h + qeff
    H[:, 0, 1] = bc
    H[:, 1, 2] = bc
    H[:, 1, 0] = bb
    H[:, 2, 1] = bb

    hr = H @ rho
    out[...] = -1j * (hr - np.conj(np.swapaxes(hr, 1, 2)))

    # gamma * (f+ rho f- - {f- f+, rho}/2)
    g = gamma[:, None, None]
    out[:, :2, :2] += g * 2.0 * rho[:, 1:, 1:]
    out -= g * 0.5 * (_LDL[None, :, None] + _LDL[None, None, :]) * rho
    return out


def threemode_rhs(y, chi, q, out):
    """Classical flow of the symmetric-ordered three-mode Hamiltonian.

    y, out : (n_traj, 3) complex128 with columns (a, b, c)
    """
    a = y[:, 0]
    b = y[:, 1]
    c = y[:, 2]
    na = a.real ** 2 + a.imag ** 2
    nb = b.real ** 2 + b.imag ** 2
    nc = c.real ** 2 + c.imag ** 2
    c2 = c * c
    det = 2.0 * chi * nc + q
    out[:, 0] = -1j * (2.0 * chi * c2 * np.conj(b) + det * a)
    out[:, 1] = -1j * (2.0 * chi * c2 * np.conj(a) + det * b)
    out[:, 2] = -1j * (4.0 * chi * np.conj(c) * a * b + 2.0 * chi * c * (na + nb))
    return out
