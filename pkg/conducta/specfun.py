"""
Special Functions
=================

Bessel/Hankel functions and the planar fundamental solutions

    Φ(x, y)  = (i/4) H0⁽¹⁾(k|x − y|)     (Helmholtz)
    Φ0(x, y) = −(1/2π) ln|x − y|          (Laplace)

with gradients in the first argument. Bessel values come from scipy.special
(AMOS); bessel_j_series is an independent power-series oracle used by the
tests and by the Wronskian audit.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from conducta.errors import EvaluationError, ValidationError, Violation

EULER_GAMMA = 0.5772156649015329
MAX_ORDER = 200


@dataclass(frozen=True)
class FundamentalSolutionValue:
    """Kernel value and its gradient with respect to the first argument."""

    value: np.ndarray
    gradient: np.ndarray   # shape (..., 2)


def bessel_jy(m, r):
    """Return (J_m(r), Y_m(r)) for integer orders 0..200 and r > 0."""
    m = np.asarray(m)
    r = np.asarray(r, dtype=float)
    problems = []
    if np.any(r <= 0):
        problems.append(Violation("domain", "Bessel argument must be positive"))
    if np.any(m < 0) or np.any(m > MAX_ORDER):
        problems.append(Violation("domain", f"order must lie in 0..{MAX_ORDER}"))
    if problems:
        raise ValidationError(problems)
    return special.jv(m, r), special.yv(m, r)


def bessel_j_series(m, x, terms=30):
    """J_m(x) from its ascending power series (oracle for moderate |x|)."""
    x = np.asarray(x, dtype=complex)
    half = x / 2.0
    total = np.zeros_like(x)
    for p in range(terms):
        total = total + (-1) ** p * half ** (2 * p + m) / (special.factorial(p) * special.factorial(p + m))
    return total.real if np.all(np.isreal(x)) else total


def bessel_j_zero(m, s=1):
    """s-th positive zero of J_m."""
    return float(special.jn_zeros(m, s)[-1])


def wronskian_residual(m, r):
    """|J_m Y'_m − J'_m Y_m − 2/(πr)| for the audit of bessel_jy."""
    j, y = bessel_jy(m, r)
    jp = special.jvp(m, r)
    yp = special.yvp(m, r)
    return np.abs(j * yp - jp * y - 2.0 / (np.pi * np.asarray(r)))


def radial_kernel(r, k):
    """
    Radial profile g(r) of the fundamental solution and its first two
    derivatives. k = 0 selects the Laplace kernel.
    """
    r = np.asarray(r, dtype=float)
    if k == 0:
        g = -np.log(r) / (2 * np.pi)
        g1 = -1.0 / (2 * np.pi * r)
        g2 = 1.0 / (2 * np.pi * r ** 2)
        return g, g1, g2
    kr = k * r
    h0 = special.hankel1(0, kr)
    h1 = special.hankel1(1, kr)
    g = 0.25j * h0
    g1 = -0.25j * k * h1
    g2 = -0.25j * k ** 2 * (h0 - h1 / kr)
    return g, g1, g2


def _separation(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise EvaluationError("fundamental solution evaluated at coincident points")
    return d, r


def phi_helmholtz(x, y, k):
    """Φ(x, y) = (i/4) H0(k|x−y|) and ∇ₓΦ. Broadcasts over leading axes."""
    d, r = _separation(x, y)
    g, g1, _ = radial_kernel(r, k)
    grad = (g1 / r)[..., None] * d
    return FundamentalSolutionValue(value=g, gradient=grad)


def phi_laplace(x, y):
    """Φ0(x, y) = −ln|x−y| / 2π and ∇ₓΦ0."""
    d, r = _separation(x, y)
    g, g1, _ = radial_kernel(r, 0)
    grad = (g1 / r)[..., None] * d
    return FundamentalSolutionValue(value=g, gradient=grad)


def phi_hessian(x, y, k):
    """Hessian ∇ₓ∇ₓΦ(x, y), shape (..., 2, 2). k = 0 gives the Laplace kernel."""
    d, r = _separation(x, y)
    _, g1, g2 = radial_kernel(r, k)
    e = d / r[..., None]
    outer = e[..., :, None] * e[..., None, :]
    eye = np.eye(2)
    return g2[..., None, None] * outer + (g1 / r)[..., None, None] * (eye - outer)


def farfield_factor(k):
    """Normalisation e^{iπ/4}/√(8πk) so that Φ∞(x̂; z) = e^{−ik x̂·z}."""
    return np.exp(0.25j * np.pi) / np.sqrt(8 * np.pi * k)


def small_argument_constant(k):
    """c_k with Φ(x,y) = −ln|x−y|/2π + c_k + o(1) as |x−y| → 0."""
    return 0.25j - (np.log(k / 2.0) + EULER_GAMMA) / (2 * np.pi)
