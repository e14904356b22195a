"""
Forward Solver
==============

Conductive transmission problem

    Δu + k²u = 0 outside D,   λΔv + k²nv = 0 in D \\ D̄_b,
    u = v,  ∂ν u = λ∂ν v + γv on ∂D,   B(v) = 0 on ∂D_b,

with u = u^i + u^s and u^s radiating. The scattered and interior fields are

    u^s = S φ + λ D ψ                          (wavenumber k)
    v   = S₁ φ + D₁ ψ + Σ_l L_l η_l             (wavenumber k₁ = k√(n/λ))

where L_l is a single layer on a Neumann/impedance obstacle and D − iκS
(κ = max(Re k₁, 1)) on a Dirichlet one. With h = 1/(λ+1) the unknowns
x = (ψ, φ, η_1, …) solve

    2h (u^s − v)|∂D           = −2h u^i
    −2h (∂ν u^s − λ∂ν v − γv) =  2h ∂ν u^i
    2·v|Γ_j = 0  or  −2(∂ν v + iρ v)|Γ_j = 0

which is identity plus compact. All boundary traces are kept as matrices on
x so that the a-posteriori checks and the energy audit reuse them.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from conducta.errors import EvaluationError, ResonanceError, ValidationError, Violation
from conducta.geometry import (
    Dipole,
    PlaneWave,
    PointSource,
    curve_frame,
    region_mesh,
    validate_incidence,
    winding_number,
)
from conducta.layerpot import (
    FARFIELD_TAG,
    DensitySet,
    assemble_operator,
    eval_potential,
    far_kernel,
    limit_at_zero,
)
from conducta.settings import DEFAULT_RESONANCE_THRESHOLD
from conducta.specfun import phi_helmholtz, phi_hessian

log = logging.getLogger(__name__)

CHECK_STEPS = 6               # one-sided samples per side for a-posteriori traces
CHECK_FRACTION = 0.01         # sample spacing as a fraction of perimeter/2π


@dataclass(frozen=True)
class FarFieldPattern:
    angles: np.ndarray
    values: np.ndarray
    k: float
    incidence: dict
    normalization: str = FARFIELD_TAG

    def __post_init__(self):
        a = self.angles
        if len(a) != len(self.values):
            raise ValidationError([Violation("far field", "sample count differs from angle count")])
        if len(a) and (np.any(np.diff(a) <= 0) or a[0] < 0 or a[-1] >= 2 * np.pi):
            raise ValidationError([Violation("far field", "angles must increase strictly within [0, 2π)")])


@dataclass(frozen=True)
class FieldSample:
    """Fields at sample points: u^s outside D, v inside D \\ D̄_b."""

    points: np.ndarray
    region: np.ndarray          # "exterior" | "interior"
    values: np.ndarray
    incident: np.ndarray
    gradients: np.ndarray | None = None

    @property
    def total(self):
        return np.where(self.region == "exterior", self.values + self.incident, self.values)


def equispaced_angles(count):
    return 2 * np.pi * np.arange(count) / count


# --- Incidence ----------------------------------------------------------------

def incident_field(incidence, points, k):
    """Values and gradients (P, 2) of a plane wave, point source or dipole."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(incidence, PlaneWave):
        d = np.asarray(incidence.direction, dtype=float)
        values = np.exp(1j * k * points @ d)
        return values, 1j * k * values[:, None] * d[None, :]
    z = np.asarray(incidence.location, dtype=float)
    if isinstance(incidence, PointSource):
        phi = phi_helmholtz(points, z[None, :], k)
        return phi.value, phi.gradient
    if isinstance(incidence, Dipole):
        a = np.asarray(incidence.axis, dtype=float)
        phi = phi_helmholtz(points, z[None, :], k)
        hess = phi_hessian(points, z[None, :], k)
        return phi.gradient @ a, hess @ a
    raise ValidationError([Violation("incidence", f"unsupported incidence {incidence!r}")])


def _incident_traces(incidence, curve, k):
    values, grads = incident_field(incidence, curve.points, k)
    return values, np.sum(grads * curve.normals, axis=1)


# --- System -------------------------------------------------------------------

class ForwardSystem:
    """
    Assembled transmission system for one scatterer at fixed resolution.

    Trace matrices act on the unknown vector x = (ψ, φ, η_1, …):
        u_ext, dn_u_ext     exterior traces of u^s on ∂D
        v_int, dn_v_int     interior traces of v on ∂D
        v_obs[j], dn_v_obs[j]  traces of v on obstacle j (from D \\ D̄_b)
    """

    def __init__(self, config, resonance_threshold=DEFAULT_RESONANCE_THRESHOLD):
        self.config = config
        self.resonance_threshold = resonance_threshold
        self.k = config.k
        self.k_int = config.k_int
        self.kappa = max(self.k_int.real, 1.0)
        self.h = 1.0 / (config.lam + 1.0)
        self.N = config.outer.n_nodes
        self.sizes = tuple(c.n_nodes for c in config.obstacles)
        self.size = 2 * self.N + sum(self.sizes)
        self._lu = None
        self.condition = None
        self._build()

    def _slices(self):
        N = self.N
        out = {"psi": slice(0, N), "phi": slice(N, 2 * N)}
        start = 2 * N
        for j, size in enumerate(self.sizes):
            out[j] = slice(start, start + size)
            start += size
        return out

    def _obstacle_layer(self, l, target):
        """Value and normal-derivative operators of obstacle layer l on `target`."""
        curve = self.config.obstacles[l]
        cond = self.config.conditions[l]
        same = target is curve
        tgt = None if same else target
        k1 = self.k_int
        half = 0.5 * np.eye(curve.n_nodes) if same else 0.0
        S = assemble_operator("S", curve, tgt, k=k1).matrix
        Kp = assemble_operator("K'", curve, tgt, k=k1).matrix
        if cond.type == "dirichlet":
            K = assemble_operator("K", curve, tgt, k=k1).matrix
            T = assemble_operator("T", curve, tgt, k=k1).matrix
            value = K + half - 1j * self.kappa * S
            normal = T - 1j * self.kappa * (Kp - half)
        else:
            value = S
            normal = Kp - half
        return value, normal

    def _build(self):
        cfg = self.config
        outer = cfg.outer
        N, lam, k, k1 = self.N, cfg.lam, self.k, self.k_int
        sl = self._slices()
        half = 0.5 * np.eye(N)

        ext = {kind: assemble_operator(kind, outer, k=k).matrix for kind in ("S", "K", "K'", "T")}
        inn = {kind: assemble_operator(kind, outer, k=k1).matrix for kind in ("S", "K", "K'", "T")}

        def blank(rows):
            return np.zeros((rows, self.size), dtype=complex)

        self.u_ext, self.dn_u_ext = blank(N), blank(N)
        self.v_int, self.dn_v_int = blank(N), blank(N)
        self.u_ext[:, sl["phi"]] = ext["S"]
        self.u_ext[:, sl["psi"]] = lam * (ext["K"] + half)
        self.dn_u_ext[:, sl["phi"]] = ext["K'"] - half
        self.dn_u_ext[:, sl["psi"]] = lam * ext["T"]
        self.v_int[:, sl["phi"]] = inn["S"]
        self.v_int[:, sl["psi"]] = inn["K"] - half
        self.dn_v_int[:, sl["phi"]] = inn["K'"] + half
        self.dn_v_int[:, sl["psi"]] = inn["T"]

        self.v_obs, self.dn_v_obs = [], []
        for j, curve in enumerate(cfg.obstacles):
            value, normal = self._obstacle_layer(j, outer)
            self.v_int[:, sl[j]] = value
            self.dn_v_int[:, sl[j]] = normal

            vo, dvo = blank(curve.n_nodes), blank(curve.n_nodes)
            vo[:, sl["phi"]] = assemble_operator("S", outer, curve, k=k1).matrix
            vo[:, sl["psi"]] = assemble_operator("K", outer, curve, k=k1).matrix
            dvo[:, sl["phi"]] = assemble_operator("K'", outer, curve, k=k1).matrix
            dvo[:, sl["psi"]] = assemble_operator("T", outer, curve, k=k1).matrix
            for l in range(len(cfg.obstacles)):
                value, normal = self._obstacle_layer(l, curve)
                vo[:, sl[l]] = value
                dvo[:, sl[l]] = normal
            self.v_obs.append(vo)
            self.dn_v_obs.append(dvo)

        gamma = cfg.gamma[:, None]
        h = self.h
        rows = [
            2 * h * (self.u_ext - self.v_int),
            -2 * h * (self.dn_u_ext - lam * self.dn_v_int - gamma * self.v_int),
        ]
        for j, cond in enumerate(cfg.conditions):
            if cond.type == "dirichlet":
                rows.append(2 * self.v_obs[j])
            else:
                rows.append(-2 * (self.dn_v_obs[j] + 1j * cond.rho * self.v_obs[j]))
        self.matrix = np.vstack(rows)
        log.debug("Assembled transmission system of size %d (k=%g, k_int=%s)", self.size, k, k1)

    # --- Solving ---------------------------------------------------------

    def factor(self):
        """LU-factor once; estimate the 1-norm condition number."""
        if self._lu is None:
            lu, piv = linalg.lu_factor(self.matrix)
            gecon, = lapack.get_lapack_funcs(("gecon",), (lu,))
            rcond, _ = gecon(lu, np.linalg.norm(self.matrix, 1), norm="1")
            self.condition = np.inf if rcond == 0 else 1.0 / rcond
            log.debug("Condition estimate %.3e", self.condition)
            if self.condition > self.resonance_threshold:
                log.warning("Transmission system near resonance: cond=%.3e at k=%g", self.condition, self.k)
                raise ResonanceError(
                    f"system condition {self.condition:.3e} exceeds {self.resonance_threshold:.1e} "
                    f"(k={self.k}); near a resonance of the integral formulation",
                    condition=self.condition,
                )
            self._lu = (lu, piv)
        return self._lu

    def rhs(self, incidence):
        ui, dui = _incident_traces(incidence, self.config.outer, self.k)
        b = np.zeros(self.size, dtype=complex)
        b[:self.N] = -2 * self.h * ui
        b[self.N:2 * self.N] = 2 * self.h * dui
        return b

    def solve(self, incidence):
        validate_incidence(self.config, incidence)
        lu = self.factor()
        b = self.rhs(incidence)
        x = linalg.lu_solve(lu, b)
        bnorm = np.linalg.norm(b)
        residual = np.linalg.norm(self.matrix @ x - b) / (bnorm if bnorm > 0 else 1.0)
        log.debug("Solved %s incidence: residual %.2e", incidence.kind, residual)
        densities = DensitySet.from_vector(x, self.N, self.sizes)
        return ForwardSolution(
            config=self.config, incidence=incidence, densities=densities,
            condition=self.condition, residual=float(residual), system=self,
        )

    def solve_many(self, incidences, threads=1):
        """Solve for several incidences sharing the factorization."""
        self.factor()
        if threads <= 1 or len(incidences) <= 1:
            return [self.solve(inc) for inc in incidences]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(self.solve, incidences))


def assemble_system(config, N=None, resonance_threshold=DEFAULT_RESONANCE_THRESHOLD):
    """Assemble the block system (resampling the curves when N is given)."""
    if N:
        config = config.with_resolution(N)
    return ForwardSystem(config, resonance_threshold=resonance_threshold)


@dataclass(frozen=True, eq=False)
class ForwardSolution:
    config: object
    incidence: object
    densities: DensitySet
    condition: float
    residual: float
    system: ForwardSystem

    @property
    def vector(self):
        return self.densities.as_vector()


def solve_forward(config, incidence, N=None, resonance_threshold=DEFAULT_RESONANCE_THRESHOLD):
    """Assemble, factor and solve for one incidence."""
    return assemble_system(config, N, resonance_threshold).solve(incidence)


# --- Fields -------------------------------------------------------------------

def classify_points(config, points):
    """'exterior' or 'interior' per point; raises EvaluationError inside an obstacle."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inside = winding_number(config.outer, points) != 0
    for j, obs in enumerate(config.obstacles):
        hit = inside & (winding_number(obs, points) != 0)
        if np.any(hit):
            raise EvaluationError(f"point {tuple(points[np.argmax(hit)])} lies inside obstacle {j}")
    return np.where(inside, "interior", "exterior")


def _interior_field(solution, points, with_gradient):
    sys = solution.system
    cfg = solution.config
    dens = solution.densities
    k1 = sys.k_int
    parts = [
        eval_potential("single", dens.phi, cfg.outer, points, k1, with_gradient),
        eval_potential("double", dens.psi, cfg.outer, points, k1, with_gradient),
    ]
    for curve, cond, eta in zip(cfg.obstacles, cfg.conditions, dens.eta):
        single = eval_potential("single", eta, curve, points, k1, with_gradient)
        if cond.type == "dirichlet":
            double = eval_potential("double", eta, curve, points, k1, with_gradient)
            if with_gradient:
                parts.append((double[0] - 1j * sys.kappa * single[0], double[1] - 1j * sys.kappa * single[1]))
            else:
                parts.append(double - 1j * sys.kappa * single)
        else:
            parts.append(single)
    if with_gradient:
        return sum(p[0] for p in parts), sum(p[1] for p in parts)
    return sum(parts)


def _exterior_field(solution, points, with_gradient):
    cfg = solution.config
    dens = solution.densities
    k = cfg.k
    single = eval_potential("single", dens.phi, cfg.outer, points, k, with_gradient)
    double = eval_potential("double", dens.psi, cfg.outer, points, k, with_gradient)
    if with_gradient:
        return single[0] + cfg.lam * double[0], single[1] + cfg.lam * double[1]
    return single + cfg.lam * double


def scattered_and_transmitted(solution, points, with_gradient=False):
    """u^s at exterior points and v at points of D \\ D̄_b."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    region = classify_points(solution.config, points)
    values = np.zeros(len(points), dtype=complex)
    grads = np.zeros((len(points), 2), dtype=complex) if with_gradient else None
    for label, evaluator in (("exterior", _exterior_field), ("interior", _interior_field)):
        mask = region == label
        if not np.any(mask):
            continue
        out = evaluator(solution, points[mask], with_gradient)
        if with_gradient:
            values[mask], grads[mask] = out
        else:
            values[mask] = out
    incident = np.zeros(len(points), dtype=complex)
    ext = region == "exterior"
    if np.any(ext):
        incident[ext] = incident_field(solution.incidence, points[ext], solution.config.k)[0]
    return FieldSample(points=points, region=region, values=values, incident=incident, gradients=grads)


def far_field(solution, angles):
    """Far-field pattern of u^s at the given observation angles."""
    cfg = solution.config
    dens = solution.densities
    angles = np.asarray(angles, dtype=float)
    values = far_kernel("single", dens.phi, cfg.outer, angles, cfg.k) + cfg.lam * far_kernel(
        "double", dens.psi, cfg.outer, angles, cfg.k
    )
    return FarFieldPattern(angles=angles, values=values, k=cfg.k, incidence=solution.incidence.to_dict())


# --- Diagnostics --------------------------------------------------------------

def _one_sided(evaluator, curve, t, side, step):
    """Value and normal derivative at curve(t), extrapolated from one side."""
    frame = curve_frame(curve, t)
    distances = step * np.arange(1, CHECK_STEPS + 1)
    vals, dns = [], []
    for s in distances:
        pts = frame.point + side * s * frame.normal
        v, g = evaluator(pts)
        vals.append(v)
        dns.append(np.sum(g * frame.normal, axis=1))
    return limit_at_zero(np.array(vals), distances), limit_at_zero(np.array(dns), distances)


def boundary_residuals(solution):
    """
    A-posteriori transmission and obstacle residuals at the parameter
    midpoints between nodes, from fields extrapolated off each curve.
    Residuals are relative to the largest boundary value of |u| or |∂ν u|/k.
    """
    cfg = solution.config
    outer = cfg.outer
    t_mid = outer.t + np.pi / outer.n_nodes
    step = CHECK_FRACTION * outer.perimeter / (2 * np.pi)

    def exterior(pts):
        us, gs = _exterior_field(solution, pts, True)
        ui, gi = incident_field(solution.incidence, pts, cfg.k)
        return us + ui, gs + gi

    def interior(pts):
        return _interior_field(solution, pts, True)

    u, dn_u = _one_sided(exterior, outer, t_mid, 1.0, step)
    v, dn_v = _one_sided(interior, outer, t_mid, -1.0, step)
    gamma = cfg.gamma_profile(t_mid)
    scale = max(np.max(np.abs(u)), np.max(np.abs(dn_u)) / cfg.k)

    out = {
        "continuity": float(np.max(np.abs(u - v)) / scale),
        "flux": float(np.max(np.abs(dn_u - cfg.lam * dn_v - gamma * v)) / scale),
        "obstacle": 0.0,
    }
    for curve, cond in zip(cfg.obstacles, cfg.conditions):
        t_obs = curve.t + np.pi / curve.n_nodes
        ostep = CHECK_FRACTION * curve.perimeter / (2 * np.pi)
        vb, dvb = _one_sided(interior, curve, t_obs, 1.0, ostep)
        law = vb if cond.type == "dirichlet" else dvb + 1j * cond.rho * vb
        out["obstacle"] = max(out["obstacle"], float(np.max(np.abs(law)) / scale))
    return out


def energy_audit(solution, volume_radial=16, volume_order=4):
    """
    Flux balance from the boundary traces of a solution:

        exterior_flux  = Im ∫_{∂D} ū ∂ν u ds              (total exterior field)
        interface_flux = Im ∫_{∂D} λ v̄ ∂ν v ds
        obstacle_flux  = Im ∫_{∂D_b} λ v̄ ∂ν v ds          (ν out of D_b)
        conductive     = ∫_{∂D} Im γ |v|² ds
        dissipation    = k² Im n ∫_{D \\ D̄_b} |v|² dx      (volume quadrature)

    Balance: exterior_flux = obstacle_flux − dissipation + conductive.
    Residuals are relative to ∫_{∂D} |u||∂ν u| ds.
    """
    sys = solution.system
    cfg = solution.config
    x = solution.vector
    outer = cfg.outer
    w = outer.weights

    ui, dui = _incident_traces(solution.incidence, outer, cfg.k)
    u = sys.u_ext @ x + ui
    dn_u = sys.dn_u_ext @ x + dui
    v = sys.v_int @ x
    dn_v = sys.dn_v_int @ x

    exterior_flux = float(np.imag(np.sum(w * np.conj(u) * dn_u)))
    interface_flux = float(np.imag(np.sum(w * cfg.lam * np.conj(v) * dn_v)))
    conductive = float(np.sum(w * cfg.gamma.imag * np.abs(v) ** 2))

    obstacle_flux, impedance_loss = 0.0, 0.0
    for j, (curve, cond) in enumerate(zip(cfg.obstacles, cfg.conditions)):
        vb = sys.v_obs[j] @ x
        dvb = sys.dn_v_obs[j] @ x
        obstacle_flux += float(np.imag(np.sum(curve.weights * cfg.lam * np.conj(vb) * dvb)))
        if cond.type == "impedance":
            impedance_loss -= float(cfg.lam * cond.rho * np.sum(curve.weights * np.abs(vb) ** 2))

    dissipation = 0.0
    n_imag = complex(cfg.n).imag
    if n_imag != 0:
        mesh = region_mesh(cfg, n_radial=volume_radial, order=volume_order)
        keep = mesh.weights > 0
        field = _interior_field(solution, mesh.points[keep], False)
        dissipation = float(cfg.k ** 2 * n_imag * np.sum(mesh.weights[keep] * np.abs(field) ** 2))

    scale = float(np.sum(w * np.abs(u) * np.abs(dn_u))) or 1.0
    lossless = (
        n_imag == 0
        and np.all(cfg.gamma.imag == 0)
        and all(c.type != "impedance" or c.rho == 0 for c in cfg.conditions)
    )
    residuals = {
        "transmission": abs(exterior_flux - interface_flux - conductive) / scale,
        "balance": abs(exterior_flux - (obstacle_flux - dissipation + conductive)) / scale,
    }
    if lossless:
        residuals["lossless"] = abs(exterior_flux) / scale
    if any(c.type == "impedance" and c.rho > 0 for c in cfg.conditions):
        residuals["impedance"] = abs(obstacle_flux - impedance_loss) / max(abs(impedance_loss), 1e-300)

    return {
        "exterior_flux": exterior_flux,
        "interface_flux": interface_flux,
        "obstacle_flux": obstacle_flux,
        "conductive": conductive,
        "dissipation": dissipation,
        "impedance_loss": impedance_loss,
        "scale": scale,
        "lossless": bool(lossless),
        "residuals": residuals,
    }
