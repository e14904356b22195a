"""
Singularity Lab
===============

Sources marching onto the boundary along the outward normal,

    x_j = x₀ + (δ/j) ν(x₀),   j = 1..J,

drive the transmitted field v_j into a logarithmic singularity at x₀. Two
families are studied:

  * point sources u^i_j = Φ(·, x_j): v_j ≈ c Φ₀(·, x_j) with c → 2/(λ(x₀) + 1);
  * normal dipoles u^i_j = ∇ₓΦ(·, x_j)·ν(x₀) with λ = 1:
    v_j − u^i_j ≈ −(γ(x₀)/2) Φ₀(·, x_j) + O(1).

Fits use samples on the inward normal ray; remainders are measured in a
discrete H¹ norm on a mesh of D \\ D̄_b graded toward x₀.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from conducta.errors import NumericalError, RankError, ValidationError, Violation
from conducta.forward import assemble_system, incident_field, scattered_and_transmitted
from conducta.geometry import (
    Dipole,
    PointSource,
    curve_frame,
    distance_to_curve,
    region_mesh,
    validate_scatterer,
    winding_number,
)
from conducta.oracle import radial_config_from, series_field_eval, series_solve
from conducta.specfun import phi_laplace

log = logging.getLogger(__name__)

ENGINES = ("bie", "oracle")
SAMPLE_FACTORS = (0.5, 1.0, 2.0, 4.0)   # inward sample distances in units of δ/j
DELTA_FRACTION = 0.05                    # default δ as a fraction of diam(D)
MESH_RADIAL = 50
MESH_ANGULAR = 200
MESH_ORDER = 2
MESH_GRADING = 2.0


@dataclass
class SingularityExperiment:
    """One source family marched onto x₀ = x(t₀), with per-j fits and norms."""

    config: object
    kind: str
    engine: str
    t0: float
    x0: np.ndarray
    normal: np.ndarray
    delta: float
    js: np.ndarray
    sources: np.ndarray
    c: np.ndarray = None
    remainder: np.ndarray = None
    vnorm: np.ndarray = None
    incident_norm: np.ndarray = None
    slope: complex | None = None
    intercept: complex | None = None
    notes: list = field(default_factory=list)

    @property
    def c_fit(self):
        """Best available singular constant: the last per-j fit, or the joint slope."""
        if self.kind == "dipole":
            return self.slope
        return self.c[-1]

    def rows(self):
        """CSV rows: j, c_fit (real, imag), remainder_h1, vnorm_h1."""
        out = []
        for i, j in enumerate(self.js):
            c = self.c[i] if self.c is not None else self.slope
            out.append({
                "j": int(j),
                "c_fit_re": float(np.real(c)),
                "c_fit_im": float(np.imag(c)),
                "remainder_h1": float(self.remainder[i]),
                "vnorm_h1": float(self.vnorm[i]),
            })
        return out

    def summary(self):
        data = {
            "kind": self.kind,
            "engine": self.engine,
            "t0": self.t0,
            "x0": self.x0.tolist(),
            "delta": self.delta,
            "J": int(self.js[-1]),
            "notes": list(self.notes),
        }
        if self.kind == "point":
            lam_hat, spread = recover_lambda_at_boundary(self)
            data.update(
                c_fit=[float(np.real(self.c_fit)), float(np.imag(self.c_fit))],
                c_expected=2.0 / (self.config.lam + 1.0),
                lambda_hat=lam_hat,
                lambda_spread=spread,
            )
        else:
            gamma_x0 = complex(self.config.gamma_profile(np.array([self.t0]))[0])
            data.update(
                slope=[float(np.real(self.slope)), float(np.imag(self.slope))],
                intercept=[float(np.real(self.intercept)), float(np.imag(self.intercept))],
                gamma_hat=gamma_estimate(self),
                gamma_expected=gamma_x0.real,
            )
        return data


# ---------------------------------------------------------------------------
# Geometry of the experiment
# ---------------------------------------------------------------------------

def default_delta(config):
    return DELTA_FRACTION * config.outer.diameter


def source_sequence(curve, t0, delta, J):
    """x_j = x₀ + (δ/j)ν(x₀) for j = 1..J; every x_j must lie outside the curve."""
    if not delta > 0 or J < 1:
        raise ValidationError([Violation("domain", f"need delta > 0 and J >= 1, got {delta}, {J}")])
    frame = curve_frame(curve, t0)
    js = np.arange(1, J + 1)
    sources = frame.point[None, :] + (delta / js)[:, None] * frame.normal[None, :]
    outside = winding_number(curve, sources) == 0
    near = distance_to_curve(curve, sources) >= 0.5 * delta / js
    if not np.all(outside & near):
        bad = int(js[np.argmin(outside & near)])
        raise ValidationError([Violation(
            "containment", f"source x_{bad} for delta={delta} is not separated from the boundary near x0"
        )])
    return sources


def _ray_samples(frame, delta, j):
    """Points at distances SAMPLE_FACTORS·δ/j inside along the normal ray."""
    dist = np.asarray(SAMPLE_FACTORS) * delta / j
    return frame.point[None, :] - dist[:, None] * frame.normal[None, :]


def _check_samples(config, points):
    inside = winding_number(config.outer, points) != 0
    for obs in config.obstacles:
        inside &= winding_number(obs, points) == 0
    if not np.all(inside):
        raise ValidationError([Violation("containment", "normal-ray samples leave D \\ D_b; reduce delta")])


# ---------------------------------------------------------------------------
# Field engines
# ---------------------------------------------------------------------------

def _engine(config, engine, N=None):
    """
    Returns solve(incidence) -> evaluator, with evaluator(points) giving
    (v, ∇v) of the transmitted field at points of D \\ D̄_b.
    """
    if engine not in ENGINES:
        raise ValidationError([Violation("engine", f"engine must be one of {ENGINES}, got '{engine}'")])
    if engine == "oracle":
        radial = radial_config_from(config)

        def solve_oracle(incidence):
            table = series_solve(radial, incidence)
            return lambda pts: series_field_eval(table, pts, with_gradient=True)

        return solve_oracle

    system = assemble_system(config, N)
    system.factor()

    def solve_bie(incidence):
        solution = system.solve(incidence)

        def evaluate(pts):
            sample = scattered_and_transmitted(solution, pts, with_gradient=True)
            return sample.values, sample.gradients

        return evaluate

    return solve_bie


def _fan_out(func, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _experiment_mesh(config, t0, mesh=None):
    if mesh is not None:
        return mesh
    return region_mesh(
        config, n_radial=MESH_RADIAL, n_angular=MESH_ANGULAR,
        order=MESH_ORDER, focus=t0, grading=MESH_GRADING,
    )


# ---------------------------------------------------------------------------
# Norms and fits
# ---------------------------------------------------------------------------

def h1_discrete_norm(evaluator, mesh):
    """
    sqrt(Σ w (|f|² + |∇f|²)) over the mesh. evaluator(points) returns
    (values, gradients); masked cells (zero weight) are not evaluated.
    """
    active = mesh.weights > 0
    values, grads = evaluator(mesh.points[active])
    density = np.abs(values) ** 2 + np.sum(np.abs(grads) ** 2, axis=1)
    return float(np.sqrt(np.sum(mesh.weights[active] * density)))


def fit_gradient_constant(grad_v, grad_phi0):
    """Least-squares c minimising |∇v − c∇Φ₀| over the samples."""
    den = np.sum(grad_phi0 * grad_phi0)
    if den == 0:
        raise RankError("Laplace kernel gradient vanishes on the sample set")
    return complex(np.sum(grad_phi0 * grad_v) / den)


def recover_lambda_at_boundary(experiment):
    """λ̂(x₀) = 2/c − 1 from the last fitted constant; spread from the last two fits."""
    c = experiment.c
    if c is None or len(c) == 0:
        raise ValidationError([Violation("experiment", "point-source fits are required")])
    last = float(np.real(c[-1]))
    if not 0 < last < 2:
        raise NumericalError(f"inconsistent fit: c = {last} outside (0, 2)")
    lam_hat = 2.0 / last - 1.0
    spread = 0.0
    if len(c) > 1:
        prev = float(np.real(c[-2]))
        if 0 < prev < 2:
            spread = abs(2.0 / prev - 1.0 - lam_hat)
    log.info("lambda(x0) recovered: %.6g ± %.2g", lam_hat, spread)
    return lam_hat, spread


def gamma_estimate(experiment):
    """γ̂(x₀) = −2·Re(ĉ) from the joint dipole regression."""
    if experiment.slope is None:
        raise ValidationError([Violation("experiment", "dipole regression is required")])
    return -2.0 * float(np.real(experiment.slope))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _prepare(config, t0, delta, J):
    validate_scatterer(config)
    delta = default_delta(config) if delta is None else delta
    frame = curve_frame(config.outer, t0)
    sources = source_sequence(config.outer, t0, delta, J)
    for j in range(1, J + 1):
        _check_samples(config, _ray_samples(frame, delta, j))
    return delta, frame, sources


def run_point_source_experiment(config, t0=0.0, delta=None, J=16, engine="bie",
                                N=None, mesh=None, threads=1):
    """
    March point sources onto x₀ = x(t₀) and fit v_j ≈ c_j Φ₀(·, x_j) from
    gradients on the inward normal ray. Remainders are discrete H¹ norms of
    v_j − c_j Φ₀(·, x_j) on a mesh graded toward x₀.
    """
    delta, frame, sources = _prepare(config, t0, delta, J)
    solve = _engine(config, engine, N)
    mesh = _experiment_mesh(config, t0, mesh)
    js = np.arange(1, J + 1)

    def one(j):
        z = sources[j - 1]
        evaluate = solve(PointSource(tuple(z)))
        samples = _ray_samples(frame, delta, j)
        _, grad_v = evaluate(samples)
        c = fit_gradient_constant(grad_v, phi_laplace(samples, z[None, :]).gradient)

        def remainder(pts):
            v, g = evaluate(pts)
            phi0 = phi_laplace(pts, z[None, :])
            return v - c * phi0.value, g - c * phi0.gradient

        rem = h1_discrete_norm(remainder, mesh)
        vn = h1_discrete_norm(evaluate, mesh)
        log.debug("point source j=%d: c=%.8g%+.2gi remainder=%.4g |v|=%.4g", j, c.real, c.imag, rem, vn)
        return c, rem, vn

    results = _fan_out(one, list(js), threads)
    experiment = SingularityExperiment(
        config=config, kind="point", engine=engine, t0=t0, x0=frame.point, normal=frame.normal,
        delta=delta, js=js, sources=sources,
        c=np.array([r[0] for r in results]),
        remainder=np.array([r[1] for r in results]),
        vnorm=np.array([r[2] for r in results]),
    )
    log.info("point-source experiment (%s, J=%d): c_J=%.6g, expected %.6g",
             engine, J, experiment.c[-1].real, 2.0 / (config.lam + 1.0))
    return experiment


def run_dipole_experiment(config, t0=0.0, delta=None, J=16, engine="bie",
                          N=None, mesh=None, threads=1):
    """
    Normal dipoles marched onto x₀ with λ = 1. (v_j − u^i_j) is regressed
    jointly over all j and normal-ray samples against {Φ₀(·, x_j), 1}; the
    slope ĉ estimates −γ(x₀)/2.
    """
    if config.lam != 1:
        raise ValidationError([Violation("coefficient sign", f"dipole experiment needs lambda = 1, got {config.lam}")])
    delta, frame, sources = _prepare(config, t0, delta, J)
    solve = _engine(config, engine, N)
    mesh = _experiment_mesh(config, t0, mesh)
    js = np.arange(1, J + 1)
    axis = tuple(frame.normal)

    def one(j):
        z = sources[j - 1]
        incidence = Dipole(tuple(z), axis)
        evaluate = solve(incidence)

        def difference(pts):
            v, g = evaluate(pts)
            ui, gi = incident_field(incidence, pts, config.k)
            return v - ui, g - gi

        samples = _ray_samples(frame, delta, j)
        diff, _ = difference(samples)
        phi0 = phi_laplace(samples, z[None, :]).value
        vn = h1_discrete_norm(evaluate, mesh)
        inc_l2 = float(np.sum(mesh.weights * np.abs(incident_field(incidence, mesh.points, config.k)[0]) ** 2))
        return diff, phi0, difference, vn, inc_l2

    results = _fan_out(one, list(js), threads)
    y = np.concatenate([r[0] for r in results])
    design = np.column_stack([np.concatenate([r[1] for r in results]), np.ones(len(y))])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 2:
        raise RankError("dipole regression is rank deficient; enlarge J or the sample set")
    slope, intercept = complex(coef[0]), complex(coef[1])

    remainders = []
    for j, r in zip(js, results):
        z = sources[j - 1]
        difference = r[2]

        def remainder(pts, difference=difference, z=z):
            d, g = difference(pts)
            phi0 = phi_laplace(pts, z[None, :])
            return d - slope * phi0.value, g - slope * phi0.gradient

        remainders.append(h1_discrete_norm(remainder, mesh))

    experiment = SingularityExperiment(
        config=config, kind="dipole", engine=engine, t0=t0, x0=frame.point, normal=frame.normal,
        delta=delta, js=js, sources=sources,
        remainder=np.array(remainders),
        vnorm=np.array([r[3] for r in results]),
        incident_norm=np.array([r[4] for r in results]),
        slope=slope, intercept=intercept,
    )
    log.info("dipole experiment (%s, J=%d): slope %.6g, gamma_hat %.6g", engine, J, slope.real, -2 * slope.real)
    return experiment
