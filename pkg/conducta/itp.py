"""
Interior Transmission Problems
==============================

Well-posedness analysis on a disk Ω = B_R for the two interior transmission
problems attached to the conductive scattering model:

  * the λ-weighted pair  div(λ₁∇U) − b₁U = g₁, div(λ₂∇V) − b₂V = g₂ with
    Cauchy coupling on ∂Ω, solvable whenever some ε < min(b₂, 1) satisfies
    ε·b₁ > Q and ε·inf(λ₁/λ₂) > Q with Q = ((1 + b₂)/2)²;
  * the λ = 1 pair  Δv + k²n₁v = 0, Δw + k²n₂w = 0,
    v − w = f₁, ∂νv + ηw − ∂νw = f₂, covered by six sufficient conditions in
    terms of λ₁(Ω) (first Dirichlet eigenvalue) and
    C₁(Ω) = sup ∫_∂Ω|∂νu|² / ∫_Ω|Δu|² over H²∩H₀¹.

Coefficients are constants (inf = sup); ITPParameters still carries separate
bounds so variable coefficients can be bounded externally.

Per Fourier mode u = f(r)e^{imθ}, the subspace functions are
f = s^m Q(x), s = r/R, x = 2s² − 1, Q = ((1 − x)/2)^p P_j(x) with p = 1
(H²∩H₀¹) or p = 2 (H₀², used when η = 0). In these variables

    Δu = R⁻² s^m [8(m + 1) Q′(x) + 16 s² Q″(x)] e^{imθ},   ∂νu|_∂Ω = 4Q′(1)/R.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg, special

from conducta.errors import NumericalError, ValidationError, Violation
from conducta.specfun import bessel_j_zero

log = logging.getLogger(__name__)

C1_SAFETY = 1.5
DEFAULT_MODES = 8
DEFAULT_RADIAL = 16
BASIS_CUTOFF = 1e-12
SCALING_TOL = 1e-8
BISECTION_RTOL = 1e-13


@dataclass(frozen=True)
class ITPParameters:
    """Inputs of the λ = 1 problem on B_R, plus the optional λ-weighted data (b₁, b₂, ratio)."""

    k: float
    n1: float
    n2: float
    eta: float
    R: float
    b1: float | None = None
    b2: float | None = None
    ratio: float | None = None
    delta1: float = 1e-6
    n1_bounds: tuple | None = None     # (inf, sup); defaults to (n1, n1)
    n2_bounds: tuple | None = None

    def __post_init__(self):
        problems = []
        if not self.k > 0:
            problems.append(Violation("wavenumber", f"k must be positive, got {self.k}"))
        if not self.R > 0:
            problems.append(Violation("domain", f"radius must be positive, got {self.R}"))
        if math.isnan(self.eta):
            problems.append(Violation("domain", "eta must be a real number"))
        if not (self.n1_inf > self.delta1 and self.n2_inf > self.delta1):
            problems.append(Violation("refractive sign", f"n1, n2 must exceed delta1={self.delta1}"))
        if not abs(self.n1 - self.n2) > self.delta1:
            problems.append(Violation("contrast", f"|n1 - n2| must exceed delta1={self.delta1}"))
        for name in ("b1", "b2", "ratio"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                problems.append(Violation("domain", f"{name} must be positive, got {value}"))
        if problems:
            raise ValidationError(problems)

    @property
    def n1_inf(self):
        return (self.n1_bounds or (self.n1, self.n1))[0]

    @property
    def n1_sup(self):
        return (self.n1_bounds or (self.n1, self.n1))[1]

    @property
    def n2_inf(self):
        return (self.n2_bounds or (self.n2, self.n2))[0]

    @property
    def n2_sup(self):
        return (self.n2_bounds or (self.n2, self.n2))[1]

    @property
    def c_prime(self):
        """C′ = 1/sup|n₁ − n₂|."""
        return 1.0 / max(abs(self.n1_sup - self.n2_inf), abs(self.n2_sup - self.n1_inf))

    def with_radius(self, R):
        return ITPParameters(
            self.k, self.n1, self.n2, self.eta, R, self.b1, self.b2, self.ratio,
            self.delta1, self.n1_bounds, self.n2_bounds,
        )

    def to_dict(self):
        return {
            "k": self.k, "n1": self.n1, "n2": self.n2, "eta": _finite_or_none(self.eta),
            "R": self.R, "b1": self.b1, "b2": self.b2, "ratio": self.ratio, "delta1": self.delta1,
            "n1_bounds": [self.n1_inf, self.n1_sup], "n2_bounds": [self.n2_inf, self.n2_sup],
        }


@dataclass(frozen=True)
class FeasibleInterval:
    """Open ε-interval (lower, upper) of the λ-weighted lemma; empty when lower ≥ upper."""

    lower: float
    upper: float
    swapped: bool = False
    retry: "FeasibleInterval | None" = None

    @property
    def feasible(self):
        return self.lower < self.upper

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "feasible": self.feasible,
            "swapped": self.swapped,
            "retry": self.retry.to_dict() if self.retry is not None else None,
        }


@dataclass(frozen=True)
class ConditionResult:
    index: int
    applicable: bool
    holds: bool
    margin: float | None

    def to_dict(self):
        return {"index": self.index, "applicable": self.applicable, "holds": self.holds,
                "margin": _finite_or_none(self.margin)}


@dataclass(frozen=True)
class WellPosednessReport:
    params: ITPParameters
    conditions: tuple
    lambda1: float
    c1_bound: float
    c1_safety: float
    c_prime: float
    eta_margin: float
    lemma: FeasibleInterval | None = None
    notes: list = field(default_factory=list)

    @property
    def holding(self):
        return [c.index for c in self.conditions if c.holds]

    @property
    def well_posed(self):
        return bool(self.holding)

    def margin(self, index):
        return self.conditions[index - 1].margin

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "conditions": [c.to_dict() for c in self.conditions],
            "holding": self.holding,
            "well_posed": self.well_posed,
            "constants": {
                "lambda1": self.lambda1,
                "C1_bound": self.c1_bound,
                "C1_safety": self.c1_safety,
                "C_prime": self.c_prime,
            },
            "eta_margin": _finite_or_none(self.eta_margin),
            "lemma": self.lemma.to_dict() if self.lemma is not None else None,
            "notes": list(self.notes),
        }


def _finite_or_none(value):
    if value is None or not math.isfinite(value):
        return None
    return float(value)


# ---------------------------------------------------------------------------
# λ-weighted lemma
# ---------------------------------------------------------------------------

def _interval(b1, b2, rho):
    q = ((1.0 + b2) / 2.0) ** 2
    return max(q / b1, q / rho), min(b2, 1.0)


def weighted_feasible_interval(b1, b2, rho, rho_swapped=None):
    """
    Feasible ε-interval for the λ-weighted transmission pair.

    When the interval is empty and inf(λ₁/λ₂) ≤ 1 the roles of the two media
    are exchanged (b₁ ↔ b₂, ratio → inf(λ₂/λ₁)) and the retry is attached to
    the result. For constant coefficients inf(λ₂/λ₁) = 1/rho.
    """
    problems = [
        Violation("domain", f"{name} must be positive, got {value}")
        for name, value in (("b1", b1), ("b2", b2), ("rho", rho))
        if not value > 0
    ]
    if problems:
        raise ValidationError(problems)
    lower, upper = _interval(b1, b2, rho)
    result = FeasibleInterval(lower, upper)
    if not result.feasible and rho <= 1:
        other = rho_swapped if rho_swapped is not None else 1.0 / rho
        s_lower, s_upper = _interval(b2, b1, other)
        result = FeasibleInterval(lower, upper, retry=FeasibleInterval(s_lower, s_upper, swapped=True))
    return result


# ---------------------------------------------------------------------------
# Disk constants
# ---------------------------------------------------------------------------

def dirichlet_eig_disk(R):
    """λ₁(B_R) = (j₀,₁/R)²."""
    return (bessel_j_zero(0, 1) / R) ** 2


def dirichlet_rayleigh_quotient(R, nodes=64):
    """∫|∇u|²/∫|u|² for u = J₀(j₀,₁ r/R) by Gauss quadrature; equals λ₁(B_R)."""

    j01 = bessel_j_zero(0, 1)
    x, w = legendre.leggauss(nodes)
    r = 0.5 * R * (x + 1.0)
    w = 0.5 * R * w
    u = special.j0(j01 * r / R)
    du = -(j01 / R) * special.j1(j01 * r / R)
    return float(np.sum(w * du ** 2 * r) / np.sum(w * u ** 2 * r))


def _radial_basis(m, size, power, R, nodes):
    """
    Values of the per-mode basis on Gauss nodes in s ∈ (0, 1).

    Returns (s, w, f, lap, dn): samples of f_j(s), of R²Δ-profile scaled back
    by R⁻², and the boundary normal derivatives ∂νu_j, for j < size.
    """
    x_gl, w_gl = legendre.leggauss(nodes)
    s = 0.5 * (x_gl + 1.0)
    w = 0.5 * w_gl
    x = 2.0 * s ** 2 - 1.0
    clamp = legendre.legpow([0.5, -0.5], power)
    f = np.empty((size, s.size))
    lap = np.empty((size, s.size))
    dn = np.empty(size)
    for j in range(size):
        coeffs = np.zeros(j + 1)
        coeffs[j] = 1.0
        q = legendre.legmul(clamp, coeffs)
        q1 = legendre.legder(q)
        q2 = legendre.legder(q, 2)
        sm = s ** m
        f[j] = sm * legendre.legval(x, q)
        lap[j] = sm * (8.0 * (m + 1) * legendre.legval(x, q1) + 16.0 * s ** 2 * legendre.legval(x, q2)) / R ** 2
        dn[j] = 4.0 * legendre.legval(1.0, q1) / R
    return s, w, f, lap, dn


def _mode_basis(m, size, power, R):
    """
    Per-mode samples plus a whitening map W (size × rank) with
    Wᵀ G W = I for the ‖Δu‖² Gram matrix G. Directions whose singular value
    falls below BASIS_CUTOFF relative to the largest are dropped.
    """
    nodes = m + 2 * (size + power) + 24
    s, w, f, lap, dn = _radial_basis(m, size, power, R, nodes)
    area = w * s * R ** 2                      # r dr on [0, R]
    u, sigma, _ = linalg.svd(lap * np.sqrt(area), full_matrices=False)
    keep = sigma > BASIS_CUTOFF * sigma[0]
    if not np.any(keep):
        raise NumericalError(f"radial basis degenerate in mode {m}")
    if not np.all(keep):
        log.debug("mode %d: dropped %d ill-conditioned basis directions", m, int(np.sum(~keep)))
    return f, lap, dn, area, u[:, keep] / sigma[keep]


def c1_disk(R, modes=DEFAULT_MODES, radial=DEFAULT_RADIAL, check_scaling=True):
    """
    Subspace estimate of C₁(B_R): the largest generalized eigenvalue of the
    boundary flux form against the ‖Δu‖² Gram matrix, over Fourier modes
    0..modes-1 and `radial` polynomial profiles per mode.

    The estimate scales linearly in R; the scaling is checked against the
    R = 1 estimate unless check_scaling is False.
    """
    problems = []
    if not R > 0:
        problems.append(Violation("domain", f"radius must be positive, got {R}"))
    if modes < DEFAULT_MODES or radial < DEFAULT_RADIAL:
        problems.append(Violation("truncation", f"need modes >= {DEFAULT_MODES} and radial >= {DEFAULT_RADIAL}"))
    if problems:
        raise ValidationError(problems)
    best = 0.0
    for m in range(modes):
        _, _, dn, _, white = _mode_basis(m, radial, 1, R)
        b = white.T @ dn
        top = R * float(b @ b)                 # rank-one flux form: its top eigenvalue
        log.debug("C1 mode %d: %.12g", m, top)
        best = max(best, top)
    if check_scaling and R != 1.0:
        unit = _c1_unit(modes, radial)
        if abs(best / R - unit) > SCALING_TOL * unit:
            raise NumericalError(f"C1 estimate breaks linear scaling: {best / R!r} vs {unit!r}")
    return best


@lru_cache(maxsize=8)
def _c1_unit(modes, radial):
    return c1_disk(1.0, modes, radial, check_scaling=False)


def c1_upper_bound(R, modes=DEFAULT_MODES, radial=DEFAULT_RADIAL, safety=C1_SAFETY):
    """Scaling bound C₀·R with C₀ = safety × C̃₁(B₁)."""
    return safety * _c1_unit(modes, radial) * R


# ---------------------------------------------------------------------------
# Sufficient conditions
# ---------------------------------------------------------------------------

def _small_k_margin(k, lam1, n_inf, n_sup):
    return lam1 * n_inf / n_sup ** 2 - k ** 2


def _boundary_margin(k, lam1, c1, c_prime, eta, n_inf, n_sup):
    denom = c_prime * abs(eta) - c1 * k ** 2
    if denom <= 0:
        return None
    lhs = c_prime * c1 * k ** 2 / denom
    rhs = lam1 / (k ** 2 * n_sup ** 2) - 1.0 / n_inf
    return rhs - lhs


def check_wellposedness(params, lemma=True):
    """Evaluate the six sufficient conditions of the λ = 1 problem and report margins."""
    lam1 = dirichlet_eig_disk(params.R)
    c1 = c1_upper_bound(params.R)
    cp = params.c_prime
    k, eta = params.k, params.eta
    n2_larger = params.n2 > params.n1
    results = []
    # (index, applies, margin) for conditions 1-6
    table = [
        (1, n2_larger and eta > 0, lambda: _small_k_margin(k, lam1, params.n2_inf, params.n2_sup)),
        (2, not n2_larger and eta < 0, lambda: _small_k_margin(k, lam1, params.n1_inf, params.n1_sup)),
        (3, not n2_larger and eta > 0,
         lambda: _boundary_margin(k, lam1, c1, cp, eta, params.n1_inf, params.n1_sup)),
        (4, n2_larger and eta < 0,
         lambda: _boundary_margin(k, lam1, c1, cp, eta, params.n2_inf, params.n2_sup)),
        (5, n2_larger and eta == 0, lambda: _small_k_margin(k, lam1, params.n2_inf, params.n2_sup)),
        (6, not n2_larger and eta == 0, lambda: _small_k_margin(k, lam1, params.n1_inf, params.n1_sup)),
    ]
    for index, applies, margin_of in table:
        if not applies:
            results.append(ConditionResult(index, False, False, None))
            continue
        margin = margin_of()
        results.append(ConditionResult(index, True, margin is not None and margin > 0, margin))

    notes = [f"C1 bound uses safety factor {C1_SAFETY} on the unit-disk subspace estimate"]
    interval = None
    if lemma and None not in (params.b1, params.b2, params.ratio):
        interval = weighted_feasible_interval(params.b1, params.b2, params.ratio)
    report = WellPosednessReport(
        params=params,
        conditions=tuple(results),
        lambda1=lam1,
        c1_bound=c1,
        c1_safety=C1_SAFETY,
        c_prime=cp,
        eta_margin=abs(eta),
        lemma=interval,
        notes=notes,
    )
    log.info("well-posedness at R=%g: conditions %s", params.R, report.holding or "none")
    return report


def max_wellposed_radius(k, n1, n2, eta, r_start=1.0, max_steps=200):
    """
    Largest disk radius for which some condition holds, by bracketing and
    bisection. Every condition is monotone in R, and all hold for small R.
    """
    base = ITPParameters(k, n1, n2, eta, r_start)

    def holds(R):
        return check_wellposedness(base.with_radius(R), lemma=False).well_posed

    lo, hi = r_start, r_start
    steps = 0
    if holds(lo):
        while holds(hi):
            hi *= 2.0
            steps += 1
            if steps > max_steps:
                raise NumericalError("no upper radius found where the conditions fail")
        lo = hi / 2.0
    else:
        while not holds(lo):
            lo /= 2.0
            steps += 1
            if steps > max_steps:
                raise NumericalError("no radius found where a condition holds")
        hi = lo * 2.0
    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    log.info("max well-posed radius for k=%g n1=%g n2=%g eta=%g: %.15g", k, n1, n2, eta, lo)
    return lo


def condition1_radius(k, n2_inf, n2_sup):
    """Closed form of the condition-1 family: R* = j₀,₁ √(inf n₂)/(k sup n₂)."""
    return bessel_j_zero(0, 1) * math.sqrt(n2_inf) / (k * n2_sup)


# ---------------------------------------------------------------------------
# Coercivity
# ---------------------------------------------------------------------------

def coercivity_sign(params):
    """+1 when n₂ > n₁, −1 otherwise: the orientation in which the form is coercive."""
    # Per condition the orientation is +1 for conditions 1, 2, 5, 6 and −1 for
    # 3, 4. B is always divided by n₂ − n₁ here, so one sign(n₂ − n₁) keeps the
    # volume term nonnegative in both contrast orientations, and the boundary
    # term sign(n₂ − n₁)·k²/η comes out negative exactly for conditions 3 and 4.
    return 1.0 if params.n2 > params.n1 else -1.0


def coercivity_lower_bound(params, modes=DEFAULT_MODES, radial=DEFAULT_RADIAL):
    """
    inf over the subspace of Re(sign·B(u, u)) / ‖Δu‖² with

        B(u, u) = ∫ (Δu + k²n₁u)(Δū + k²n₂ū)/(n₂ − n₁) + ∫_∂Ω (k²/η)|∂νu|².

    η = 0 drops the boundary term and restricts to H₀²; η = ±inf drops it
    on H²∩H₀¹.
    """
    k2 = params.k ** 2
    sign = coercivity_sign(params)
    power = 2 if params.eta == 0 else 1
    boundary = 0.0 if params.eta == 0 or math.isinf(params.eta) else k2 / params.eta
    contrast = params.n2 - params.n1
    best = np.inf
    for m in range(modes):
        f, lap, dn, area, white = _mode_basis(m, radial, power, params.R)
        left = lap + k2 * params.n1 * f
        right = lap + k2 * params.n2 * f
        form = (left * area) @ right.T / contrast + boundary * params.R * np.outer(dn, dn)
        sym = sign * 0.5 * (form + form.T)
        low = linalg.eigvalsh(white.T @ sym @ white)[0]
        best = min(best, float(low))
    log.debug("coercivity bound (sign %+d, %d modes x %d): %.6g", sign, modes, radial, best)
    return best
