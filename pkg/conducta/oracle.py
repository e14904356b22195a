"""
Series Oracle
=============

Separation-of-variables solution for a disk of radius R with an optional
concentric obstacle of radius R_b. Per angular mode m the fields are
normalized by their boundary values:

    u^s_m(r) = A_m H_m(kr)/H_m(kR)                               (r > R)
    v_m(r)   = B_m [Ĵ_m(r) + ε_m Ĥ_m(r)] / (1 + ε_m)              (R_b < r < R)

with Ĵ(r) = J_m(k₁r)/J_m(k₁R), Ĥ(r) = H_m(k₁r)/H_m(k₁R), and ε_m fixed by
the obstacle law at R_b. With the log-derivatives ℓZ = d/dr ln Z at R the
transmission conditions give

    τ_m = (ℓH − ℓJ) / (ℓH − λℓ_eff − γ),   B_m = τ_m I_m,   A_m = (τ_m − 1) I_m

where I_m is the incident boundary coefficient. Bessel values are handled as
logarithms built from ratio recurrences (forward for H, backward for J), so
orders in the tens of thousands neither overflow nor underflow.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from conducta.errors import EvaluationError, NumericalError, ResonanceError, ValidationError, Violation
from conducta.forward import FarFieldPattern, incident_field
from conducta.geometry import Dipole, ObstacleCondition, PlaneWave, PointSource

log = logging.getLogger(__name__)

DIRECT_MARGIN = 20         # orders ≤ |x| + margin come straight from scipy
MILLER_TAIL = 60
MODE_CAP = 30000
TAIL_TOL = 1e-16
SERIES_TAIL = 1e-14
RADIUS_CHUNK = 16


@dataclass(frozen=True)
class RadialConfig:
    R: float
    k: float
    lam: float
    n: complex
    gamma: complex = 0.0
    Rb: float | None = None
    condition: ObstacleCondition | None = None

    def __post_init__(self):
        problems = []
        if self.Rb is not None and not 0 < self.Rb < self.R:
            problems.append(Violation("containment", f"need 0 < R_b < R, got R_b={self.Rb}, R={self.R}"))
        if (self.Rb is None) != (self.condition is None):
            problems.append(Violation("obstacle condition", "obstacle radius and condition go together"))
        if not self.lam > 0:
            problems.append(Violation("coefficient sign", "lambda must be positive"))
        n = complex(self.n)
        if not (n.real > 0 and n.imag >= 0):
            problems.append(Violation("refractive sign", f"need Re(n) > 0 and Im(n) >= 0, got {n}"))
        if complex(self.gamma).imag > 0:
            problems.append(Violation("conductive sign", "Im(gamma) must be <= 0"))
        if problems:
            raise ValidationError(problems)

    @property
    def k_int(self):
        kk = self.k * np.sqrt(complex(self.n) / self.lam)
        return kk if kk.imag >= 0 else -kk


def radial_config_from(config):
    """RadialConfig for a ScattererConfig made of origin-centred circles and constant γ."""
    problems = []

    def centred_circle(curve):
        return curve.kind == "circle" and np.allclose(curve.params.get("center", (0.0, 0.0)), 0.0)

    if not centred_circle(config.outer):
        problems.append(Violation("oracle", "outer boundary must be an origin-centred circle"))
    if len(config.obstacles) > 1 or any(not centred_circle(c) for c in config.obstacles):
        problems.append(Violation("oracle", "at most one concentric circular obstacle"))
    if not config.gamma_profile.is_constant:
        problems.append(Violation("oracle", "gamma must be constant"))
    if problems:
        raise ValidationError(problems)
    obstacle = config.obstacles[0] if config.obstacles else None
    return RadialConfig(
        R=float(config.outer.params.get("R", 1.0)),
        k=config.k,
        lam=config.lam,
        n=complex(config.n),
        gamma=complex(config.gamma_profile.value[0]),
        Rb=float(obstacle.params.get("R", 1.0)) if obstacle else None,
        condition=config.conditions[0] if obstacle else None,
    )


# --- Log-Bessel tables --------------------------------------------------------

def log_bessel(kind, p_max, x):
    """
    ln Z_p(x) and Z'_p(x)/Z_p(x) for p = 0..p_max and every x, with
    Z = J ("J") or H⁽¹⁾ ("H"). Returns two arrays of shape (p_max+1, len(x)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    P = int(p_max)
    m0 = min(P, int(np.max(np.abs(x))) + DIRECT_MARGIN)
    p = np.arange(m0 + 1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        if kind == "J":
            z, dz = special.jv(p, x[None, :]), special.jvp(p, x[None, :])
        else:
            z, dz = special.hankel1(p, x[None, :]), special.h1vp(p, x[None, :])
        logs = np.log(z)
        dlog = dz / z
    if P == m0:
        return logs, dlog

    ratios = np.empty((P - m0 + 1, len(x)), dtype=complex)   # Z_{q+1}/Z_q, q = m0..P
    if kind == "J":
        top = P + MILLER_TAIL + int(np.max(np.abs(x)))
        rho = x / (2 * (top + 2))
        for q in range(top, m0 - 1, -1):
            rho = x / (2 * (q + 1) - x * rho)
            if q <= P:
                ratios[q - m0] = rho
    else:
        h = special.hankel1(m0 + 1, x) / special.hankel1(m0, x)
        ratios[0] = h
        for q in range(m0, P):
            h = 2 * (q + 1) / x - 1 / h
            ratios[q - m0 + 1] = h

    tail_logs = logs[m0] + np.cumsum(np.log(ratios[:-1]), axis=0)
    q = np.arange(m0 + 1, P + 1)[:, None]
    tail_dlog = q / x[None, :] - ratios[1:]
    return np.vstack([logs, tail_logs]), np.vstack([dlog, tail_dlog])


# --- Mode table ---------------------------------------------------------------

@dataclass(frozen=True)
class ModeTable:
    """
    Per-mode coefficients for m = −M..M.

    A: scattered boundary values, B: interior boundary values, tau = B/I,
    eps: obstacle mixing ε_m, ratio_b: obstacle law factor, incident: I_m.
    """

    radial: RadialConfig
    incidence: object
    m: np.ndarray
    incident: np.ndarray
    tau: np.ndarray
    eps: np.ndarray
    ratio_b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    log_h_boundary: np.ndarray      # ln H_|m|(kR)
    log_j_boundary: np.ndarray      # ln J_|m|(kR)

    @property
    def M(self):
        return int(self.m[-1])

    @property
    def exterior_coefficients(self):
        """a_m in u^s = Σ a_m H_|m|(kr) e^{imθ}."""
        with np.errstate(over="ignore", under="ignore"):
            return self.A * np.exp(-self.log_h_boundary)

    def tail_ratio(self):
        mags = np.abs(self.A)
        peak = np.max(mags)
        return float(max(mags[0], mags[-1]) / peak) if peak > 0 else 0.0


def _incident_coefficients(radial, incidence, M, m):
    k, R = radial.k, radial.R
    p = np.abs(m)
    LJ, _ = log_bessel("J", M, k * R)
    LJ = LJ[p, 0]
    if isinstance(incidence, PlaneWave):
        theta_d = np.arctan2(incidence.direction[1], incidence.direction[0])
        with np.errstate(under="ignore"):
            return (1j ** p) * np.exp(LJ - 1j * m * theta_d)
    z = np.asarray(incidence.location, dtype=float)
    rho_z = float(np.hypot(*z))
    if rho_z <= R:
        raise ValidationError([Violation("source inside", "source radius must exceed the disk radius")])
    theta_z = np.arctan2(z[1], z[0])
    LH, dH = log_bessel("H", M, k * rho_z)
    with np.errstate(under="ignore", over="ignore"):
        base = 0.25j * np.exp(LH[p, 0] + LJ - 1j * m * theta_z)
    if isinstance(incidence, PointSource):
        return base
    if isinstance(incidence, Dipole):
        a = np.asarray(incidence.axis, dtype=float)
        e_rho = z / rho_z
        e_theta = np.array([-e_rho[1], e_rho[0]])
        return -base * ((a @ e_rho) * k * dH[p, 0] - (a @ e_theta) * 1j * m / rho_z)
    raise ValidationError([Violation("incidence", f"unsupported incidence {incidence!r}")])


def required_modes(radial, incidence):
    """Starting mode count for this incidence; series_solve grows it until the tail criterion holds."""
    base = int(np.ceil(max(abs(radial.k), abs(radial.k_int)) * radial.R)) + 25
    if isinstance(incidence, PlaneWave):
        return base
    rho_z = float(np.hypot(*incidence.location))
    decay = np.log(rho_z / radial.R)
    return min(MODE_CAP, base + int(np.ceil(-np.log(TAIL_TOL) / decay)))


def series_solve(radial, incidence, M=None):
    """
    Solve every mode of the transmission problem; returns a ModeTable.

    Without M the mode count starts at required_modes and grows until the
    outermost coefficients fall below SERIES_TAIL of the peak. An explicit M
    is used as given. NumericalError when the tail is not met.
    """
    if M is not None:
        if M < abs(radial.k) * radial.R + 20:
            raise ValidationError([Violation("modes", f"M={M} is below kR + 20")])
        return _checked(_solve_modes(radial, incidence, int(M)))
    M = required_modes(radial, incidence)
    while True:
        table = _solve_modes(radial, incidence, M)
        if table.tail_ratio() <= SERIES_TAIL or M >= MODE_CAP:
            return _checked(table)
        log.debug("Mode tail %.2e at M=%d, growing", table.tail_ratio(), M)
        M = min(MODE_CAP, int(np.ceil(1.5 * M)) + 10)


def _checked(table):
    tail = table.tail_ratio()
    if tail > SERIES_TAIL:
        raise NumericalError(f"series tail {tail:.2e} above {SERIES_TAIL:.0e} at M={table.M}")
    log.debug("Series solved with M=%d, tail %.2e", table.M, tail)
    return table


def _solve_modes(radial, incidence, M):
    m = np.arange(-M, M + 1)
    p = np.abs(m)
    k, k1, R, lam = radial.k, radial.k_int, radial.R, radial.lam

    LJ, dJ = log_bessel("J", M, k * R)
    LH, dH = log_bessel("H", M, k * R)
    LJ1, dJ1 = log_bessel("J", M, k1 * R)
    LH1, dH1 = log_bessel("H", M, k1 * R)
    ellJ, ellH = k * dJ[p, 0], k * dH[p, 0]
    ellJ1, ellH1 = k1 * dJ1[p, 0], k1 * dH1[p, 0]

    eps = np.zeros(len(m), dtype=complex)
    ratio_b = np.zeros(len(m), dtype=complex)
    if radial.Rb is not None:
        LJb, dJb = log_bessel("J", M, k1 * radial.Rb)
        LHb, dHb = log_bessel("H", M, k1 * radial.Rb)
        if radial.condition.type == "dirichlet":
            ratio_b[:] = 1.0
        else:
            irho = 1j * radial.condition.rho
            ratio_b = (k1 * dJb[p, 0] + irho) / (k1 * dHb[p, 0] + irho)
        with np.errstate(under="ignore", over="ignore"):
            eps = -ratio_b * np.exp(LJb[p, 0] - LHb[p, 0] + LH1[p, 0] - LJ1[p, 0])

    ell_eff = (ellJ1 + eps * ellH1) / (1 + eps)
    den = ellH - lam * ell_eff - radial.gamma
    scale = np.abs(ellH) + lam * np.abs(ell_eff) + abs(radial.gamma)
    bad = np.abs(den) <= 1e-14 * scale
    if np.any(bad) or not np.all(np.isfinite(den)):
        mode = int(m[np.argmax(bad | ~np.isfinite(den))])
        raise ResonanceError(f"series mode {mode} is singular", mode=mode)
    tau = (ellH - ellJ) / den

    incident = _incident_coefficients(radial, incidence, M, m)
    table = ModeTable(
        radial=radial, incidence=incidence, m=m, incident=incident, tau=tau, eps=eps,
        ratio_b=ratio_b, A=(tau - 1) * incident, B=tau * incident,
        log_h_boundary=LH[p, 0], log_j_boundary=LJ[p, 0],
    )
    return table


def unitarity_defects(table):
    """| |1 + 2a_m/c_m| − 1 | per mode (zero for lossless scatterers)."""
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        ratio = (table.tau - 1) * np.exp(table.log_j_boundary - table.log_h_boundary)
    defects = np.abs(np.abs(1 + 2 * ratio) - 1)
    return np.where(np.isfinite(defects), defects, 0.0)


def series_far_field(table, angles):
    """u∞(θ) = 4 Σ a_m (−i)^{|m|+1} e^{imθ}."""
    angles = np.asarray(angles, dtype=float)
    coeff = 4 * table.exterior_coefficients * (-1j) ** (np.abs(table.m) + 1)
    values = np.exp(1j * np.outer(angles, table.m)) @ coeff
    return FarFieldPattern(
        angles=angles, values=values, k=table.radial.k, incidence=table.incidence.to_dict()
    )


# --- Fields -------------------------------------------------------------------

def _radial_profiles(table, radii, exterior):
    """Per-mode radial factors (and r-derivatives) normalized at the boundary."""
    rc = table.radial
    M = table.M
    p = np.abs(table.m)
    if exterior:
        LH, dH = log_bessel("H", M, rc.k * radii)
        with np.errstate(under="ignore", over="ignore"):
            f = np.exp(LH[p] - table.log_h_boundary[:, None])
        return f, f * rc.k * dH[p]
    k1 = rc.k_int
    LJ1R, _ = log_bessel("J", M, k1 * rc.R)
    LJ, dJ = log_bessel("J", M, k1 * radii)
    with np.errstate(under="ignore", over="ignore"):
        jhat = np.exp(LJ[p] - LJ1R[p])
    f, df = jhat, jhat * k1 * dJ[p]
    if rc.Rb is not None:
        LJb, _ = log_bessel("J", M, k1 * rc.Rb)
        LHb, _ = log_bessel("H", M, k1 * rc.Rb)
        LH, dH = log_bessel("H", M, k1 * radii)
        with np.errstate(under="ignore", over="ignore"):
            ehat = -table.ratio_b[:, None] * np.exp(
                LJb[p] - LHb[p] - LJ1R[p] + LH[p]
            )
        f = f + ehat
        df = df + ehat * k1 * dH[p]
    norm = (1 + table.eps)[:, None]
    return f / norm, df / norm


def series_field_eval(table, points, with_gradient=False):
    """
    u^s at points outside the disk and v in the annulus/disk, from the mode
    table. Modes are truncated per radius once their terms fall below
    TAIL_TOL of the largest.
    """
    rc = table.radial
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(points[:, 0], points[:, 1])
    theta = np.arctan2(points[:, 1], points[:, 0])
    tol = 1e-12 * rc.R
    if np.any(np.abs(r - rc.R) < tol) or (rc.Rb is not None and np.any(np.abs(r - rc.Rb) < tol)):
        raise EvaluationError("series evaluated on a boundary circle")
    if rc.Rb is not None and np.any(r < rc.Rb):
        raise EvaluationError("point lies inside the obstacle")

    values = np.zeros(len(points), dtype=complex)
    grads = np.zeros((len(points), 2), dtype=complex)
    radii, inverse = np.unique(np.round(np.maximum(r, 1e-300), 14), return_inverse=True)

    for exterior, coef in ((True, table.A), (False, table.B)):
        group = np.flatnonzero((radii > rc.R) == exterior)
        for start in range(0, len(group), RADIUS_CHUNK):
            ids = group[start:start + RADIUS_CHUNK]
            f, df = _radial_profiles(table, radii[ids], exterior)
            for col, rid in enumerate(ids):
                idx = np.flatnonzero(inverse == rid)
                terms = coef * f[:, col]
                dterms = coef * df[:, col]
                mags = np.abs(terms) + (np.abs(dterms) if with_gradient else 0)
                mags = np.where(np.isfinite(mags), mags, 0.0)
                keep = mags > TAIL_TOL * np.max(mags) if np.max(mags) > 0 else mags > 0
                if not np.any(keep):
                    continue
                mk = table.m[keep]
                phase = np.exp(1j * np.outer(theta[idx], mk))
                values[idx] = phase @ terms[keep]
                if with_gradient:
                    rr = radii[rid]
                    d_r = phase @ dterms[keep]
                    d_t = phase @ (1j * mk * terms[keep]) / rr
                    c, s = np.cos(theta[idx]), np.sin(theta[idx])
                    grads[idx, 0] = c * d_r - s * d_t
                    grads[idx, 1] = s * d_r + c * d_t
    return (values, grads) if with_gradient else values


def series_total_field(table, points, with_gradient=False):
    """Total field: u^i + u^s outside, v inside."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = series_field_eval(table, points, with_gradient)
    exterior = np.hypot(points[:, 0], points[:, 1]) > table.radial.R
    if not np.any(exterior):
        return out
    ui, gi = incident_field(table.incidence, points[exterior], table.radial.k)
    if with_gradient:
        values, grads = out
        values[exterior] += ui
        grads[exterior] += gi
        return values, grads
    out[exterior] += ui
    return out
