"""
Geometry
========

Analytic closed curves sampled on the equispaced Nyström grid t_i = 2πi/N,
the scatterer configuration (outer boundary, embedded obstacles, physical
coefficients) and the incidence descriptors.

Every curve is counterclockwise, so the normal (x2', −x1')/|x'| points to the
unbounded side. Derivatives are analytic; nothing here finite-differences.

Config JSON:
    {"outer": {"kind": "circle", "params": {"R": 1.0}, "N": 128},
     "obstacles": [{"kind": "circle", "params": {"R": 0.4}, "N": 64}],
     "k": 1.0, "lambda": 2.0, "n": [1.5, 0.0],
     "gamma": {"kind": "const", "value": [0.3, 0.0]},
     "obstacle_condition": [{"type": "impedance", "rho": 0.5}]}
"""

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from conducta.errors import GeometryError, ValidationError, Violation

log = logging.getLogger(__name__)

MIN_NODES = 16
CLEARANCE_FRACTION = 1e-3      # of diam(D), for containment and source distance
OBSTACLE_TYPES = ("dirichlet", "neumann", "impedance")


# --- Parametrizations ---------------------------------------------------------
# Each returns (x, x', x'') with shape (len(t), 2).

def _stack(a, b):
    return np.stack([a, b], axis=-1)


def _circle(t, R=1.0, center=(0.0, 0.0)):
    c, s = np.cos(t), np.sin(t)
    x = _stack(center[0] + R * c, center[1] + R * s)
    return x, _stack(-R * s, R * c), _stack(-R * c, -R * s)


def _ellipse(t, a=1.0, b=0.5, center=(0.0, 0.0)):
    c, s = np.cos(t), np.sin(t)
    x = _stack(center[0] + a * c, center[1] + b * s)
    return x, _stack(-a * s, b * c), _stack(-a * c, -b * s)


def _kite(t, scale=1.0, center=(0.0, 0.0)):
    c, s = np.cos(t), np.sin(t)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    x = _stack(center[0] + scale * (c + 0.65 * c2 - 0.65), center[1] + scale * 1.5 * s)
    d1 = _stack(scale * (-s - 1.3 * s2), scale * 1.5 * c)
    d2 = _stack(scale * (-c - 2.6 * c2), scale * -1.5 * s)
    return x, d1, d2


def _star(t, R=1.0, amp=0.2, m=5, center=(0.0, 0.0)):
    # r(t) = R(1 + amp·cos(mt))
    c, s = np.cos(t), np.sin(t)
    r = R * (1 + amp * np.cos(m * t))
    r1 = -R * amp * m * np.sin(m * t)
    r2 = -R * amp * m * m * np.cos(m * t)
    x = _stack(center[0] + r * c, center[1] + r * s)
    d1 = _stack(r1 * c - r * s, r1 * s + r * c)
    d2 = _stack(r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s)
    return x, d1, d2


PARAMETRIZATIONS = {
    "circle": _circle,
    "ellipse": _ellipse,
    "kite": _kite,
    "star": _star,
}


# --- Curves -------------------------------------------------------------------

@dataclass(frozen=True)
class CurveFrame:
    point: np.ndarray
    normal: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """
    A smooth closed curve sampled at N equispaced parameters.

    Arrays are indexed by node: points/d1/d2/normals have shape (N, 2),
    speed and curvature shape (N,).
    """

    kind: str
    params: dict
    n_nodes: int
    t: np.ndarray
    points: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    normals: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray

    @property
    def weights(self):
        """Trapezoid weights for ∫ f ds: (2π/N)|x'(t_i)|."""
        return (2 * np.pi / self.n_nodes) * self.speed

    @property
    def perimeter(self):
        return float(np.sum(self.weights))

    @property
    def area(self):
        # Green: ½∮(x dy − y dx)
        x, d = self.points, self.d1
        return float(0.5 * (2 * np.pi / self.n_nodes) * np.sum(x[:, 0] * d[:, 1] - x[:, 1] * d[:, 0]))

    @property
    def diameter(self):
        diff = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt(np.max(np.sum(diff ** 2, axis=-1))))

    @property
    def node_spacing(self):
        return float(np.max(self.weights))

    def evaluate(self, t):
        """Analytic (x, x', x'') at arbitrary parameters."""
        return PARAMETRIZATIONS[self.kind](np.atleast_1d(np.asarray(t, dtype=float)), **self.params)

    def resample(self, n_nodes):
        return make_curve(self.kind, self.params, n_nodes)

    def to_dict(self):
        return {"kind": self.kind, "params": _jsonable(self.params), "N": self.n_nodes}


def _frame_arrays(x, d1, d2):
    speed = np.hypot(d1[:, 0], d1[:, 1])
    normals = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / speed[:, None]
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
    return normals, speed, curvature


def _self_intersects(points):
    """True if two nodes coincide or two non-adjacent polygon edges cross."""
    a = points
    b = np.roll(points, -1, axis=0)
    n = len(points)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((n, n))
    gap = np.abs(i - j)
    crossing &= (gap > 1) & (gap < n - 1)
    dist = np.hypot(A[..., 0] - C[..., 0], A[..., 1] - C[..., 1])
    coincident = (dist == 0) & (gap > 0)
    return bool(np.any(crossing) or np.any(coincident))


def make_curve(kind, params, N, check=True):
    """
    Build a BoundaryCurve of the given kind on N nodes.

    Raises GeometryError for an odd or too small N, an unknown kind, a
    self-intersecting or clockwise curve.
    """
    if kind not in PARAMETRIZATIONS:
        raise GeometryError(f"Unknown curve kind '{kind}'. Options: {', '.join(PARAMETRIZATIONS)}")
    N = int(N)
    if N % 2 or N < MIN_NODES:
        raise GeometryError(f"Node count must be even and >= {MIN_NODES}, got {N}")
    params = dict(params or {})
    if "center" in params:
        params["center"] = tuple(float(c) for c in params["center"])

    t = np.pi * np.arange(N) / (N // 2)
    try:
        x, d1, d2 = PARAMETRIZATIONS[kind](t, **params)
    except TypeError as e:
        raise GeometryError(f"Bad parameters for {kind}: {e}")

    normals, speed, curvature = _frame_arrays(x, d1, d2)
    if np.any(speed <= 0):
        raise GeometryError(f"{kind} curve is degenerate (zero speed)")

    signed_area = 0.5 * np.sum(x[:, 0] * d1[:, 1] - x[:, 1] * d1[:, 0])
    if signed_area <= 0:
        raise GeometryError(f"{kind} curve is not counterclockwise")

    if check and _self_intersects(x):
        raise GeometryError(f"{kind} curve with params {params} self-intersects")

    return BoundaryCurve(
        kind=kind, params=params, n_nodes=N, t=t, points=x, d1=d1, d2=d2,
        normals=normals, speed=speed, curvature=curvature,
    )


def curve_frame(curve, t):
    """Point, outward normal, speed and signed curvature at parameter(s) t."""
    x, d1, d2 = curve.evaluate(t)
    normals, speed, curvature = _frame_arrays(x, d1, d2)
    if np.ndim(t) == 0:
        return CurveFrame(x[0], normals[0], speed[0], curvature[0])
    return CurveFrame(x, normals, speed, curvature)


def winding_number(curve, points, oversample=4):
    """Winding number of the curve around each point (0 outside, 1 inside)."""
    fine = curve.evaluate(2 * np.pi * np.arange(oversample * curve.n_nodes) / (oversample * curve.n_nodes))[0]
    p = np.atleast_2d(np.asarray(points, dtype=float))
    rel = fine[None, :, :] - p[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    dang = (dang + np.pi) % (2 * np.pi) - np.pi
    return np.rint(np.sum(dang, axis=1) / (2 * np.pi)).astype(int)


def distance_to_curve(curve, points, oversample=8):
    """Distance from points to the curve, measured on an oversampled node set."""
    M = oversample * curve.n_nodes
    fine = curve.evaluate(2 * np.pi * np.arange(M) / M)[0]
    p = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.sqrt(np.sum((p[:, None, :] - fine[None, :, :]) ** 2, axis=-1))
    return np.min(d, axis=1)


# --- Coefficients and obstacles -----------------------------------------------

@dataclass(frozen=True)
class GammaProfile:
    """
    Conductivity γ on the outer boundary as a function of the parameter t.

    kind "const":   value is one complex number.
    kind "fourier": value lists cosine coefficients, γ(t) = Σ c_m cos(mt).
    kind "samples": value is sampled on an equispaced grid and evaluated by
                    trigonometric interpolation.
    """

    kind: str
    value: tuple

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return np.full(t.shape, complex(self.value[0]))
        if self.kind == "fourier":
            return sum(complex(c) * np.cos(m * t) for m, c in enumerate(self.value))
        if self.kind == "samples":
            return trig_interpolate(np.asarray(self.value, dtype=complex), t).reshape(t.shape)
        raise ValidationError([Violation("gamma", f"unknown gamma kind '{self.kind}'")])

    @property
    def is_constant(self):
        return self.kind == "const"

    def to_dict(self):
        pairs = [[complex(v).real, complex(v).imag] for v in self.value]
        return {"kind": self.kind, "value": pairs[0] if self.is_constant else pairs}


def trig_interpolate(samples, t):
    """Evaluate the trigonometric interpolant of equispaced samples at t."""
    n = len(samples)
    c = np.fft.fft(samples) / n
    m = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        c[n // 2] *= 0.5
        c = np.append(c, c[n // 2])
        m = np.append(m, n // 2)
        m[n // 2] = -n // 2
    return np.exp(1j * np.outer(np.atleast_1d(t), m)) @ c


@dataclass(frozen=True)
class ObstacleCondition:
    type: str
    rho: float = 0.0

    def to_dict(self):
        return {"type": self.type, "rho": self.rho}


# --- Incidences ---------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWave:
    direction: tuple

    kind = "plane"

    def to_dict(self):
        return {"type": "plane", "direction": list(self.direction)}


@dataclass(frozen=True)
class PointSource:
    location: tuple

    kind = "point"

    def to_dict(self):
        return {"type": "point", "location": list(self.location)}


@dataclass(frozen=True)
class Dipole:
    location: tuple
    axis: tuple

    kind = "dipole"

    def to_dict(self):
        return {"type": "dipole", "location": list(self.location), "axis": list(self.axis)}


def plane_wave(angle):
    return PlaneWave((float(np.cos(angle)), float(np.sin(angle))))


def parse_incidence(spec):
    """Build an incidence from its JSON form."""
    kind = spec.get("type")
    if kind == "plane":
        return PlaneWave(tuple(float(v) for v in spec["direction"]))
    if kind == "point":
        return PointSource(tuple(float(v) for v in spec["location"]))
    if kind == "dipole":
        return Dipole(tuple(float(v) for v in spec["location"]), tuple(float(v) for v in spec["axis"]))
    raise ValidationError([Violation("incidence", f"unknown incidence type '{kind}'")])


# --- Scatterer configuration --------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScattererConfig:
    outer: BoundaryCurve
    k: float
    lam: float
    n: complex
    gamma_profile: GammaProfile
    obstacles: tuple = ()
    conditions: tuple = ()
    source: str | None = field(default=None, compare=False)

    @property
    def gamma(self):
        """γ sampled at the outer nodes."""
        return self.gamma_profile(self.outer.t)

    @property
    def k_int(self):
        """Interior wavenumber k·√(n/λ), branch with Im ≥ 0."""
        kk = self.k * np.sqrt(complex(self.n) / self.lam)
        return kk if kk.imag >= 0 else -kk

    @property
    def is_transparent(self):
        return (
            self.lam == 1 and complex(self.n) == 1 and not self.obstacles
            and np.all(self.gamma == 0)
        )

    @property
    def size(self):
        return 2 * self.outer.n_nodes + sum(c.n_nodes for c in self.obstacles)

    def with_resolution(self, N=None, N_obstacle=None):
        """Same scatterer with resampled curves."""
        if not N and not N_obstacle:
            return self
        scale = (N or self.outer.n_nodes) / self.outer.n_nodes
        outer = self.outer.resample(N) if N else self.outer
        obstacles = tuple(
            c.resample(N_obstacle or max(MIN_NODES, 2 * round(c.n_nodes * scale / 2)))
            for c in self.obstacles
        )
        return replace(self, outer=outer, obstacles=obstacles)

    def to_dict(self):
        n = complex(self.n)
        return {
            "outer": self.outer.to_dict(),
            "obstacles": [c.to_dict() for c in self.obstacles],
            "k": self.k,
            "lambda": self.lam,
            "n": [n.real, n.imag],
            "gamma": self.gamma_profile.to_dict(),
            "obstacle_condition": [c.to_dict() for c in self.conditions],
        }


def validate_scatterer(config):
    """
    Check every ScattererConfig invariant; raise ValidationError listing all
    violations, or return the config unchanged.
    """
    problems = []
    if not config.k > 0:
        problems.append(Violation("wavenumber", f"k must be positive, got {config.k}"))
    if not config.lam > 0:
        problems.append(Violation("coefficient sign", f"lambda must be positive, got {config.lam}"))
    n = complex(config.n)
    if not (n.real > 0 and n.imag >= 0):
        problems.append(Violation("refractive sign", f"need Re(n) > 0 and Im(n) >= 0, got {n}"))
    gamma = config.gamma
    if not np.all(np.isfinite(gamma)):
        problems.append(Violation("conductive sign", "gamma has non-finite samples"))
    elif np.any(gamma.imag > 0):
        bad = int(np.argmax(gamma.imag))
        problems.append(Violation(
            "conductive sign",
            f"Im(gamma) must be <= 0, got {gamma[bad].imag:.3g} at node {bad}",
        ))

    if len(config.conditions) != len(config.obstacles):
        problems.append(Violation(
            "obstacle condition",
            f"{len(config.obstacles)} obstacles but {len(config.conditions)} conditions",
        ))
    for j, cond in enumerate(config.conditions):
        if cond.type not in OBSTACLE_TYPES:
            problems.append(Violation("obstacle condition", f"unknown type '{cond.type}'", j))
        elif cond.rho < 0:
            problems.append(Violation("impedance sign", f"rho must be >= 0, got {cond.rho}", j))

    clearance = CLEARANCE_FRACTION * config.outer.diameter
    for j, obs in enumerate(config.obstacles):
        inside = winding_number(config.outer, obs.points) == 1
        gap = np.min(distance_to_curve(config.outer, obs.points))
        if not np.all(inside) or gap <= clearance:
            problems.append(Violation("containment", "obstacle is not strictly inside the outer boundary", j))
        for i in range(j):
            other = config.obstacles[i]
            hit = np.any(winding_number(other, obs.points) != 0) or np.any(winding_number(obs, other.points) != 0)
            if hit or np.min(distance_to_curve(other, obs.points)) <= clearance:
                problems.append(Violation("overlap", f"obstacles {i} and {j} intersect", j))

    if problems:
        raise ValidationError(problems)
    return config


def validate_incidence(config, incidence):
    """Unit direction/axis; sources strictly outside the closed outer domain."""
    problems = []
    if isinstance(incidence, PlaneWave):
        if abs(np.hypot(*incidence.direction) - 1) > 1e-12:
            problems.append(Violation("incidence", "plane-wave direction must be a unit vector"))
        if problems:
            raise ValidationError(problems)
        return incidence
    if isinstance(incidence, Dipole) and abs(np.hypot(*incidence.axis) - 1) > 1e-12:
        problems.append(Violation("incidence", "dipole axis must be a unit vector"))
    z = np.asarray(incidence.location, dtype=float)
    inside = winding_number(config.outer, z[None, :])[0] != 0
    if inside or distance_to_curve(config.outer, z[None, :])[0] <= 0:
        problems.append(Violation("source inside", f"source at {tuple(z)} is not outside the scatterer"))
    if problems:
        raise ValidationError(problems)
    return incidence


# --- Region meshes ------------------------------------------------------------

@dataclass(frozen=True)
class RegionMesh:
    """Quadrature points and weights for ∫ f dx over D \\ D̄_b."""

    points: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    t: np.ndarray

    @property
    def area(self):
        return float(np.sum(self.weights))


def _cells(breaks, order):
    """Gauss-Legendre nodes/weights on each [breaks[i], breaks[i+1]]."""
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def region_mesh(config, n_radial=16, n_angular=None, order=2, focus=None, grading=0.0):
    """
    Tensor mesh of the region between the obstacle and the outer curve.

    With no obstacle the map is x(s,t) = c + s(x(t) − c) about the node
    centroid c; with one obstacle it is y(t) + s(x(t) − y(t)) over the shared
    parameter. More obstacles fall back to the star map with obstacle points
    masked out. `order` Gauss points per radial cell.

    focus:   parameter t₀ to grade toward (s → 1 and t → t₀), or None.
    grading: geometric ratio exponent; 0 keeps uniform cells.
    """
    outer = config.outer
    n_angular = n_angular or outer.n_nodes

    if grading > 0:
        u = np.linspace(0.0, 1.0, n_radial + 1)
        s_breaks = 1.0 - (1.0 - u) ** (1.0 + grading)
        s_nodes, s_w = _cells(s_breaks, order)
        v = np.linspace(-1.0, 1.0, n_angular + 1)
        t_breaks = (focus or 0.0) + np.pi * np.sign(v) * np.abs(v) ** (1.0 + grading)
        t_nodes, t_w = _cells(t_breaks, order)
    else:
        s_nodes, s_w = _cells(np.linspace(0.0, 1.0, n_radial + 1), order)
        t_nodes = 2 * np.pi * np.arange(n_angular) / n_angular
        t_w = np.full(n_angular, 2 * np.pi / n_angular)

    x, dx, _ = outer.evaluate(t_nodes)
    if len(config.obstacles) == 1:
        y, dy, _ = config.obstacles[0].evaluate(t_nodes)
    else:
        y = np.broadcast_to(outer.points.mean(axis=0), x.shape)
        dy = np.zeros_like(dx)

    S = s_nodes[:, None, None]
    pts = y[None, :, :] + S * (x - y)[None, :, :]
    ds = np.broadcast_to((x - y)[None, :, :], pts.shape)
    dt = dy[None, :, :] + S * (dx - dy)[None, :, :]
    jac = np.abs(ds[..., 0] * dt[..., 1] - ds[..., 1] * dt[..., 0])
    weights = jac * s_w[:, None] * t_w[None, :]

    pts = pts.reshape(-1, 2)
    weights = weights.ravel()
    if len(config.obstacles) > 1:
        for obs in config.obstacles:
            weights = np.where(winding_number(obs, pts) != 0, 0.0, weights)

    ss, tt = np.meshgrid(s_nodes, t_nodes, indexing="ij")
    return RegionMesh(points=pts, weights=weights, s=ss.ravel(), t=tt.ravel())


# --- JSON ---------------------------------------------------------------------

def _complex(value):
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]) if len(value) > 1 else 0.0)
    return complex(value)


def _jsonable(params):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


def _curve_from(spec, default_N):
    return make_curve(spec["kind"], spec.get("params", {}), spec.get("N", default_N))


def scatterer_from_dict(data, source=None):
    """Build and validate a ScattererConfig from its JSON form."""
    try:
        outer = _curve_from(data["outer"], 128)
        obstacles = tuple(_curve_from(o, 64) for o in data.get("obstacles", []))
        gamma = data.get("gamma", {"kind": "const", "value": 0.0})
        if isinstance(gamma, (int, float, list)):
            gamma = {"kind": "const", "value": gamma}
        values = gamma["value"]
        if gamma["kind"] == "const":
            values = [values]
        profile = GammaProfile(gamma["kind"], tuple(_complex(v) for v in values))
        conditions = tuple(
            ObstacleCondition(c["type"].lower(), float(c.get("rho", 0.0)))
            for c in data.get("obstacle_condition", [])
        )
        config = ScattererConfig(
            outer=outer,
            obstacles=obstacles,
            conditions=conditions,
            k=float(data["k"]),
            lam=float(data["lambda"]),
            n=_complex(data.get("n", 1.0)),
            gamma_profile=profile,
            source=source,
        )
    except KeyError as e:
        raise ValidationError([Violation("schema", f"missing field {e}")])
    except GeometryError as e:
        raise ValidationError([Violation("geometry", str(e))])
    return validate_scatterer(config)


def load_scatterer(path):
    """Read a scatterer JSON file."""
    with open(path) as f:
        data = json.load(f)
    log.debug("Loaded scatterer config %s", path)
    return scatterer_from_dict(data, source=str(path))
