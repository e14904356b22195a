"""
Far-Field Data
==============

Far-field matrices F[i, j] = u∞(θ_i; d_j) on equispaced grids, the
reciprocity audit u∞(x̂; d) = u∞(−d; −x̂), mixed-reciprocity synthesis of
point-source data from plane-wave data, a linear-sampling indicator with
contour extraction, and far-field distances between two scatterers.

All far fields use the normalization where Φ∞(x̂, z) = e^{−ik x̂·z}; in it
the plane-wave scattered field at z equals the point-source far field at −d:
u^s(z; d) = u∞(−d; z).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.interpolate import RectBivariateSpline
from scipy.spatial.distance import directed_hausdorff

from conducta.errors import NumericalError, RegularizationError, ValidationError, Violation
from conducta.forward import assemble_system, equispaced_angles, far_field
from conducta.geometry import plane_wave, validate_scatterer
from conducta.layerpot import FARFIELD_TAG
from conducta.oracle import radial_config_from, series_far_field, series_solve
from conducta.specfun import phi_helmholtz

log = logging.getLogger(__name__)

DEFAULT_GRID = 16
ALPHA_FRACTION = 1e-4
THRESHOLD_FRACTION = 0.5
DISCREPANCY = 1e-3
CONTOUR_RAYS = 128
RAY_STEPS = 400
ENGINES = ("bie", "oracle")


@dataclass(frozen=True)
class FarFieldMatrix:
    """u∞(θ_i; d_j) with observation angles θ (rows) and incidence angles (columns)."""

    theta: np.ndarray
    directions: np.ndarray
    values: np.ndarray
    k: float
    normalization: str = FARFIELD_TAG
    noise: float = 0.0

    def __post_init__(self):
        problems = []
        if self.values.shape != (len(self.theta), len(self.directions)):
            problems.append(Violation("far field", "matrix shape does not match the angle grids"))
        if not np.all(np.isfinite(self.values)):
            problems.append(Violation("far field", "non-finite far-field entries"))
        for name, grid in (("observation", self.theta), ("incidence", self.directions)):
            if len(grid) and (np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] >= 2 * np.pi):
                problems.append(Violation("far field", f"{name} angles must increase strictly within [0, 2π)"))
        if problems:
            raise ValidationError(problems)

    @property
    def shape(self):
        return self.values.shape

    @property
    def operator(self):
        """F with the trapezoid weight 2π/M₂, acting on densities over incidence angles."""
        return self.values * (2 * np.pi / len(self.directions))


@dataclass(frozen=True)
class IndicatorField:
    """Indicator values on a rectangular grid; values[ix, iy] belongs to (xs[ix], ys[iy])."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    alpha: float
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def threshold(self):
        return THRESHOLD_FRACTION * float(np.max(self.values))

    def rows(self):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return [
            {"x": float(x), "y": float(y), "indicator": float(v)}
            for x, y, v in zip(X.ravel(), Y.ravel(), self.values.ravel())
        ]


@dataclass(frozen=True)
class Synthesis:
    """Point-source data for a source at x synthesized from a far-field matrix."""

    source: np.ndarray
    theta: np.ndarray
    far_field: np.ndarray             # u∞(θ_i; x)
    directions: np.ndarray            # d = θ_i + π
    scattered: np.ndarray             # u^s(x; d), by mixed reciprocity
    alpha: float
    discrepancy: float


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

def _with_noise(values, noise, seed):
    if noise <= 0:
        return values
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    scale = noise * np.linalg.norm(values) / np.linalg.norm(e)
    return values + scale * e


def far_field_matrix(config, M1=DEFAULT_GRID, M2=None, N=None, engine="bie",
                     noise=0.0, seed=0, threads=1):
    """
    Plane-wave far-field matrix on equispaced grids. The BIE engine shares one
    factorization across the M₂ solves; `noise` adds relative complex Gaussian
    noise in Frobenius norm, seeded by `seed`.
    """
    if engine not in ENGINES:
        raise ValidationError([Violation("engine", f"engine must be one of {ENGINES}, got '{engine}'")])
    validate_scatterer(config)
    M2 = M2 or M1
    theta = equispaced_angles(M1)
    directions = equispaced_angles(M2)
    incidences = [plane_wave(a) for a in directions]
    if engine == "oracle":
        radial = radial_config_from(config)
        columns = [series_far_field(series_solve(radial, inc), theta).values for inc in incidences]
    else:
        system = assemble_system(config, N)
        solutions = system.solve_many(incidences, threads=threads)
        columns = [far_field(sol, theta).values for sol in solutions]
    values = _with_noise(np.column_stack(columns), noise, seed)
    log.info("far-field matrix %dx%d (%s), noise %.3g", M1, M2, engine, noise)
    return FarFieldMatrix(theta=theta, directions=directions, values=values, k=config.k, noise=noise)


def _match(grid, angles):
    """Index of each angle in the grid (mod 2π), or −1."""
    diff = np.angle(np.exp(1j * (grid[None, :] - np.asarray(angles)[:, None])))
    idx = np.argmin(np.abs(diff), axis=1)
    hit = np.abs(diff[np.arange(len(idx)), idx]) < 1e-9
    return np.where(hit, idx, -1)


def reciprocity_check(matrix):
    """max |u∞(θ_i; d_j) − u∞(d_j + π; θ_i + π)| over the grid."""
    rows = _match(matrix.theta, matrix.directions + np.pi)     # −d_j as an observation
    cols = _match(matrix.directions, matrix.theta + np.pi)     # −x̂_i as an incidence
    if np.any(rows < 0) or np.any(cols < 0):
        raise ValidationError([Violation("far field", "angle grids are not closed under negation")])
    swapped = matrix.values[rows[None, :], cols[:, None]]
    residual = float(np.max(np.abs(matrix.values - swapped))) if matrix.values.size else 0.0
    log.info("reciprocity residual %.3e", residual)
    return residual


def distinguishability(config_a, config_b, M=DEFAULT_GRID, N=None, engine="bie", threads=1):
    """‖F_A − F_B‖_F / ‖F_A‖_F on a shared M×M grid."""
    fa = far_field_matrix(config_a, M, M, N, engine, threads=threads).values
    fb = far_field_matrix(config_b, M, M, N, engine, threads=threads).values
    norm = np.linalg.norm(fa)
    diff = np.linalg.norm(fa - fb)
    if norm == 0:
        return 0.0 if diff == 0 else float("inf")
    return float(diff / norm)


# ---------------------------------------------------------------------------
# Mixed reciprocity
# ---------------------------------------------------------------------------

def _tikhonov_morozov(H, b, target):
    """Tikhonov solution of H g ≈ b with α chosen so the relative residual equals target."""
    u, sigma, vh = linalg.svd(H, full_matrices=False)
    beta = u.conj().T @ b
    bnorm = np.linalg.norm(b)
    floor = np.linalg.norm(b - u @ beta)

    def residual(log_alpha):
        a = 10.0 ** log_alpha
        filt = a / (sigma ** 2 + a)
        return np.sqrt(np.sum(np.abs(filt * beta) ** 2) + floor ** 2) / bnorm

    if floor / bnorm >= target:
        raise RegularizationError(f"discrepancy {target:g} unattainable: best residual {floor / bnorm:.3e}")
    top = 2 * np.log10(sigma[0])
    log_alpha = optimize.brentq(lambda la: residual(la) - target, top - 40.0, top + 4.0, xtol=1e-10)
    alpha = 10.0 ** log_alpha
    g = vh.conj().T @ (sigma / (sigma ** 2 + alpha) * beta)
    return g, alpha, residual(log_alpha)


def mixed_reciprocity_synthesize(matrix, x, curve, discrepancy=DISCREPANCY):
    """
    Approximate Φ(·, x) near the scatterer by a Herglotz wave over the
    incidence grid (Cauchy data on `curve`, Tikhonov with a Morozov
    discrepancy), apply the far-field matrix to get the point-source far
    field u∞(θ; x), and read off u^s(x; d) = u∞(−d; x).
    """
    x = np.asarray(x, dtype=float)
    k = matrix.k
    d = np.stack([np.cos(matrix.directions), np.sin(matrix.directions)], axis=-1)
    w = 2 * np.pi / len(matrix.directions)
    y, nu = curve.points, curve.normals
    plane = np.exp(1j * k * y @ d.T) * w
    dplane = 1j * (nu @ d.T) * plane                    # normal derivative / k
    H = np.vstack([plane, dplane])
    phi = phi_helmholtz(y, x[None, :], k)
    b = np.concatenate([phi.value, np.sum(phi.gradient * nu, axis=1) / k])
    g, alpha, achieved = _tikhonov_morozov(H, b, discrepancy)
    u_inf = matrix.values @ (g * w)
    opposite = np.mod(matrix.theta + np.pi, 2 * np.pi)
    order = np.argsort(opposite)
    log.info("mixed reciprocity at %s: alpha %.3e, residual %.2e", x.tolist(), alpha, achieved)
    return Synthesis(
        source=x, theta=matrix.theta, far_field=u_inf,
        directions=opposite[order], scattered=u_inf[order],
        alpha=alpha, discrepancy=achieved,
    )


# ---------------------------------------------------------------------------
# Linear sampling
# ---------------------------------------------------------------------------

def search_grid(box, n):
    """(xs, ys) for box = (xmin, xmax, ymin, ymax) with n points per side."""
    xmin, xmax, ymin, ymax = box
    if not (xmax > xmin and ymax > ymin and n >= 2):
        raise ValidationError([Violation("grid", f"bad search box {box} or size {n}")])
    return np.linspace(xmin, xmax, n), np.linspace(ymin, ymax, n)


def lsm_indicator(matrix, grid, alpha=None):
    """
    I(z) = 1/‖g_z‖ with (αI + F*F) g_z = F*Φ∞(·, z) and Φ∞(x̂, z) = e^{−ik x̂·z}.
    α defaults to ALPHA_FRACTION × σ_max(F)².
    """
    if matrix.shape[0] != matrix.shape[1]:
        raise ValidationError([Violation("far field", "linear sampling needs a square far-field matrix")])
    xs, ys = grid
    F = matrix.operator
    u, sigma, vh = linalg.svd(F)
    alpha = ALPHA_FRACTION * sigma[0] ** 2 if alpha is None else alpha
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    z = np.stack([X.ravel(), Y.ravel()], axis=-1)
    xhat = np.stack([np.cos(matrix.theta), np.sin(matrix.theta)], axis=-1)
    rhs = np.exp(-1j * matrix.k * xhat @ z.T)
    coeff = (sigma / (sigma ** 2 + alpha))[:, None] * (u.conj().T @ rhs)
    norms = np.linalg.norm(coeff, axis=0)               # ‖V c‖ = ‖c‖
    values = (1.0 / np.maximum(norms, np.finfo(float).tiny)).reshape(X.shape)
    log.info("LSM indicator on %dx%d grid, alpha %.3e", len(xs), len(ys), alpha)
    return IndicatorField(xs=np.asarray(xs), ys=np.asarray(ys), values=values, alpha=alpha, singular_values=sigma)


def indicator_contour(indicator, level=None, rays=CONTOUR_RAYS):
    """
    Boundary points of the superlevel set {I ≥ level} along rays from its
    centroid; level defaults to THRESHOLD_FRACTION × max I. The indicator is
    read off a bicubic spline of the grid values, zero outside the box.

    When the centroid lies inside the superlevel set the indicator fills the
    scatterer and each ray contributes its outermost downward crossing of
    the level. Otherwise the set is a ring around the boundary and each ray
    contributes the position of its peak (parabolic refinement), provided
    the peak reaches the level.
    """
    level = indicator.threshold if level is None else level
    xs, ys = indicator.xs, indicator.ys
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = indicator.values >= level
    if not np.any(inside):
        raise NumericalError(f"indicator never reaches the level {level:.3e}")
    center = np.array([X[inside].mean(), Y[inside].mean()])
    spline = RectBivariateSpline(xs, ys, indicator.values, kx=3, ky=3)

    def sample(pts):
        vals = spline.ev(pts[..., 0], pts[..., 1])
        box = (pts[..., 0] >= xs[0]) & (pts[..., 0] <= xs[-1]) & (pts[..., 1] >= ys[0]) & (pts[..., 1] <= ys[-1])
        return np.where(box, vals, 0.0)

    filled = float(sample(center)) >= level
    reach = np.hypot(xs[-1] - xs[0], ys[-1] - ys[0])
    radii = np.linspace(0.0, reach, RAY_STEPS)
    dr = radii[1] - radii[0]
    angles = 2 * np.pi * np.arange(rays) / rays
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    profiles = sample(center + radii[None, :, None] * dirs[:, None, :])

    points = []
    for e, vals in zip(dirs, profiles):
        if filled:
            down = np.flatnonzero((vals[:-1] >= level) & (vals[1:] < level))
            if len(down) == 0:
                continue
            i = down[-1] + 1
            r0, r1, v0, v1 = radii[i - 1], radii[i], vals[i - 1], vals[i]
            r = r0 + (v0 - level) / (v0 - v1) * (r1 - r0)
        else:
            i = int(np.argmax(vals))
            if vals[i] < level or i == 0 or i == len(vals) - 1:
                continue
            curv = vals[i - 1] - 2 * vals[i] + vals[i + 1]
            shift = 0.5 * (vals[i - 1] - vals[i + 1]) / curv if curv < 0 else 0.0
            r = radii[i] + shift * dr
        points.append(center + r * e)
    if not points:
        raise NumericalError("indicator contour is empty")
    log.debug("contour: %d points (%s), level %.3e", len(points), "filled" if filled else "ring", level)
    return np.array(points)


def hausdorff_distance(points, curve, oversample=8):
    """Symmetric Hausdorff distance between a point set and a densely sampled curve."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise ValidationError([Violation("contour", "Hausdorff distance needs at least one point")])
    M = oversample * curve.n_nodes
    ref = curve.evaluate(2 * np.pi * np.arange(M) / M)[0]
    return max(directed_hausdorff(points, ref)[0], directed_hausdorff(ref, points)[0])
