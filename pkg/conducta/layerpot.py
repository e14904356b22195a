"""
Layer Potentials
================

Nyström matrices for the boundary operators

    S  φ(x) = ∫ Φ(x,y) φ(y) ds(y)           K  ψ(x) = ∫ ∂Φ(x,y)/∂ν(y) ψ(y) ds(y)
    K' φ(x) = ∫ ∂Φ(x,y)/∂ν(x) φ(y) ds(y)    T  ψ(x) = ∂/∂ν(x) ∫ ∂Φ(x,y)/∂ν(y) ψ(y) ds(y)

on one curve (logarithmic splitting with the trigonometric product weights)
and between distinct curves (plain trapezoid). T on a single curve uses the
Maue form T = d/ds S d/ds + k² ν·S ν.

Jump convention: the double layer of density 1 is −1 inside, 0 outside for
the Laplace kernel. One-sided limits from outside (+) and inside (−):

    D ψ|±    = K ψ ± ψ/2
    ∂ν S φ|± = K' φ ∓ φ/2

Far fields use u^s(x) = e^{iπ/4}/√(8πk) · e^{ik|x|}/√|x| · (u∞(x̂) + O(1/|x|)),
so Φ(·, z) has far field e^{−ik x̂·z}.
"""

import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from conducta.errors import EvaluationError, GeometryError
from conducta.geometry import make_curve
from conducta.specfun import EULER_GAMMA, radial_kernel

log = logging.getLogger(__name__)

OPERATOR_KINDS = ("S", "K", "K'", "T")
UPSAMPLE = 8
POINT_BLOCK = 256
MAX_UPSAMPLE = 128
NEAR_RATIO = 5.0            # fine spacings; trapezoid error ~ exp(−2π·ratio)
JUMP_STEP = 0.004           # normal offsets h·(1..JUMP_SAMPLES), h relative to perimeter/2π
JUMP_SAMPLES = 10
FARFIELD_TAG = "exp(i*pi/4)/sqrt(8*pi*k)"


@dataclass(frozen=True, eq=False)
class BoundaryOperatorMatrix:
    kind: str
    k: complex
    source: object
    target: object
    matrix: np.ndarray

    def __matmul__(self, density):
        return self.matrix @ density

    def symmetry_residual(self):
        """For S on one curve: max |S_ij/w_j − S_ji/w_i| relative to max |S|."""
        w = self.source.speed
        scaled = self.matrix / w[None, :]
        return float(np.max(np.abs(scaled - scaled.T)) / np.max(np.abs(scaled)))


@dataclass
class DensitySet:
    """Boundary densities of the transmission representation."""

    psi: np.ndarray
    phi: np.ndarray
    eta: tuple = ()

    def as_vector(self):
        return np.concatenate([self.psi, self.phi, *self.eta])

    @classmethod
    def from_vector(cls, vec, n_outer, obstacle_sizes=()):
        psi = vec[:n_outer]
        phi = vec[n_outer:2 * n_outer]
        eta, start = [], 2 * n_outer
        for size in obstacle_sizes:
            eta.append(vec[start:start + size])
            start += size
        return cls(psi=psi, phi=phi, eta=tuple(eta))


# --- Quadrature helpers -------------------------------------------------------

@functools.lru_cache(maxsize=32)
def _log_weights(N):
    """Circulant R[i,j] = R(t_i − t_j) for ∫ ln(4 sin²((t−τ)/2)) f(τ) dτ."""
    n = N // 2
    t = np.pi * np.arange(N) / n
    m = np.arange(1, n)
    row = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1) - (np.pi / n ** 2) * np.cos(n * t)
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return row[idx]


@functools.lru_cache(maxsize=32)
def differentiation_matrix(N):
    """Spectral d/dt on N equispaced nodes (Nyquist mode dropped)."""
    m = np.fft.fftfreq(N, d=1.0 / N)
    m[N // 2] = 0
    eye = np.eye(N)
    return np.real(np.fft.ifft(1j * m[:, None] * np.fft.fft(eye, axis=0), axis=0))


def upsample_density(values, M):
    """Trigonometric interpolation of equispaced samples onto M ≥ N nodes."""
    N = len(values)
    if M == N:
        return np.asarray(values)
    c = np.fft.fft(values)
    padded = np.zeros(M, dtype=complex)
    half = N // 2
    padded[:half] = c[:half]
    padded[M - half + 1:] = c[half + 1:]
    padded[half] = 0.5 * c[half]
    padded[M - half] = 0.5 * c[half]
    return np.fft.ifft(padded) * (M / N)


@functools.lru_cache(maxsize=64)
def _fine_curve(kind, params_key, M):
    return make_curve(kind, dict(params_key), M, check=False)


def fine_curve(curve, M):
    if M == curve.n_nodes:
        return curve
    return _fine_curve(curve.kind, tuple(sorted(curve.params.items())), M)


# --- Assembly -----------------------------------------------------------------

def _pairwise(target, source):
    diff = target.points[:, None, :] - source.points[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    return diff, r


def _self_operator(kind, curve, k):
    N = curve.n_nodes
    n = N // 2
    speed = curve.speed
    diff, r = _pairwise(curve, curve)
    eye = np.eye(N, dtype=bool)
    r_safe = np.where(eye, 1.0, r)
    tdiff = curve.t[:, None] - curve.t[None, :]
    logsin = np.log(np.where(eye, 1.0, 4 * np.sin(tdiff / 2) ** 2))
    weights = _log_weights(N)

    if kind == "S":
        if k == 0:
            M1 = np.broadcast_to(-speed[None, :] / (4 * np.pi), (N, N))
            full = -np.log(r_safe) / (2 * np.pi) * speed[None, :]
            diag = -np.log(speed) / (2 * np.pi) * speed
        else:
            M1 = -special.jv(0, k * r) * speed[None, :] / (4 * np.pi)
            full = 0.25j * special.hankel1(0, k * r_safe) * speed[None, :]
            diag = (0.25j - EULER_GAMMA / (2 * np.pi) - np.log(k * speed / 2) / (2 * np.pi)) * speed
        M2 = full - M1 * logsin
        M2[eye] = diag
        return weights * M1 + (np.pi / n) * M2

    if kind == "T":
        S = _self_operator("S", curve, k)
        D = differentiation_matrix(N)
        T = (D / speed[:, None]) @ (S / speed[None, :]) @ D
        if k != 0:
            T = T + k ** 2 * (curve.normals @ curve.normals.T) * S
        return T

    d1, d2 = curve.d1, curve.d2
    diag = (d1[:, 1] * d2[:, 0] - d1[:, 0] * d2[:, 1]) / (4 * np.pi * speed ** 2)
    if kind == "K":
        proj = np.einsum("ijc,jc->ij", diff, curve.normals)
        sign = 1.0
    else:
        proj = np.einsum("ijc,ic->ij", diff, curve.normals)
        sign = -1.0
    ratio = proj / r_safe

    if k == 0:
        full = sign * ratio / (2 * np.pi * r_safe) * speed[None, :]
        full[eye] = diag
        return (np.pi / n) * full
    full = sign * 0.25j * k * special.hankel1(1, k * r_safe) * ratio * speed[None, :]
    M1 = -sign * k / (4 * np.pi) * special.jv(1, k * r) * ratio * speed[None, :]
    M1[eye] = 0
    M2 = full - M1 * logsin
    M2[eye] = diag
    return weights * M1 + (np.pi / n) * M2


def _cross_operator(kind, source, target, k):
    diff, r = _pairwise(target, source)
    if np.min(r) <= 1e-12 * max(1.0, source.diameter):
        raise GeometryError("distinct curves share a point")
    g, g1, g2 = radial_kernel(r, k)
    if kind == "S":
        kern = g
    else:
        b = np.einsum("ijc,jc->ij", diff, source.normals)
        a = np.einsum("ijc,ic->ij", diff, target.normals)
        if kind == "K":
            kern = -(g1 / r) * b
        elif kind == "K'":
            kern = (g1 / r) * a
        else:
            nn = target.normals @ source.normals.T
            kern = -(g2 - g1 / r) * a * b / r ** 2 - (g1 / r) * nn
    return kern * source.weights[None, :]


def assemble_operator(kind, source, target=None, k=1.0, static=False):
    """
    Dense Nyström matrix of S, K, K' or T from densities on `source` to values
    on `target` (same curve when target is None). static=True selects the
    Laplace kernel.
    """
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"Unknown operator '{kind}'. Options: {', '.join(OPERATOR_KINDS)}")
    kk = 0 if static else k
    if target is None or target is source:
        mat = _self_operator(kind, source, kk)
        target = source
    else:
        mat = _cross_operator(kind, source, target, kk)
    log.debug("Assembled %s: %dx%d at k=%s", kind, mat.shape[0], mat.shape[1], kk)
    return BoundaryOperatorMatrix(kind=kind, k=kk, source=source, target=target, matrix=mat)


# --- Potentials off the curve -------------------------------------------------

def _node_distance(curve, points, M):
    fine = fine_curve(curve, M)
    out = np.empty(len(points))
    for start in range(0, len(points), POINT_BLOCK):
        block = points[start:start + POINT_BLOCK]
        d = block[:, None, :] - fine.points[None, :, :]
        out[start:start + len(block)] = np.min(np.hypot(d[..., 0], d[..., 1]), axis=1)
    return out


def eval_potential(kind, density, curve, points, k, with_gradient=False, upsample=UPSAMPLE):
    """
    Single ("single") or double ("double") layer potential at off-curve points.

    The density is interpolated to upsample·N nodes before quadrature. Points
    closer than NEAR_RATIO fine spacings to the curve are evaluated on a finer
    grid (doubling up to MAX_UPSAMPLE·N).
    Returns values, or (values, gradients) with gradients of shape (P, 2).
    """
    if kind not in ("single", "double"):
        raise ValueError(f"Unknown potential '{kind}'")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    density = np.asarray(density, dtype=complex)
    N = curve.n_nodes
    values = np.zeros(len(points), dtype=complex)
    grads = np.zeros((len(points), 2), dtype=complex) if with_gradient else None
    if len(points) == 0:
        return (values, grads) if with_gradient else values

    dist = _node_distance(curve, points, upsample * N)
    if np.min(dist) <= 1e-9 * max(1.0, curve.diameter):
        raise EvaluationError("potential evaluated on its source curve")

    factors = np.full(len(points), upsample)
    spacing = np.max(curve.speed) * 2 * np.pi / N
    while True:
        near = (dist < NEAR_RATIO * spacing / factors) & (factors < MAX_UPSAMPLE)
        if not np.any(near):
            break
        factors[near] *= 2

    for factor in np.unique(factors):
        idx = np.flatnonzero(factors == factor)
        fine = fine_curve(curve, int(factor) * N)
        dens = upsample_density(density, int(factor) * N) * fine.weights
        block = max(8, POINT_BLOCK * UPSAMPLE // int(factor))
        for start in range(0, len(idx), block):
            sel = idx[start:start + block]
            diff = points[sel][:, None, :] - fine.points[None, :, :]
            r = np.hypot(diff[..., 0], diff[..., 1])
            g, g1, g2 = radial_kernel(r, k)
            if kind == "single":
                values[sel] = g @ dens
                if with_gradient:
                    grads[sel] = np.einsum("pj,pjc,j->pc", g1 / r, diff, dens)
            else:
                b = np.einsum("pjc,jc->pj", diff, fine.normals)
                values[sel] = (-(g1 / r) * b) @ dens
                if with_gradient:
                    radial = -(g2 - g1 / r) * b / r ** 2
                    grads[sel] = (
                        np.einsum("pj,pjc,j->pc", radial, diff, dens)
                        - np.einsum("pj,jc,j->pc", g1 / r, fine.normals, dens)
                    )
    return (values, grads) if with_gradient else values


def far_kernel(kind, density, curve, angles, k):
    """Far-field pattern of a single or double layer potential at the given angles."""
    angles = np.asarray(angles, dtype=float)
    xhat = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    phase = np.exp(-1j * k * (xhat @ curve.points.T))
    dens = np.asarray(density) * curve.weights
    if kind == "single":
        return phase @ dens
    if kind == "double":
        return (-1j * k * (xhat @ curve.normals.T) * phase) @ dens
    raise ValueError(f"Unknown potential '{kind}'")


# --- Audits -------------------------------------------------------------------

def limit_at_zero(values_by_distance, distances):
    """Polynomial extrapolation to distance 0 (Lagrange weights at the origin)."""
    s = np.asarray(distances, dtype=float)
    w = np.array([np.prod([s[j] / (s[j] - s[i]) for j in range(len(s)) if j != i]) for i in range(len(s))])
    return np.tensordot(w, values_by_distance, axes=(0, 0))


def apply_jump_relations(curve, k=1.0, density=None, distances=None, static=False, upsample=16):
    """
    Compare one-sided limits of the layer potentials with the on-curve
    operators. Limits are extrapolated from potentials sampled along the
    normals at the given distances.

    Returns a dict of max-abs residuals relative to the density scale.
    """
    density = density or (lambda t: np.exp(2j * t) + 0.5 * np.cos(3 * t))
    dens = density(curve.t)
    h = JUMP_STEP * curve.perimeter / (2 * np.pi)
    distances = np.asarray(distances if distances is not None else h * np.arange(1, JUMP_SAMPLES + 1))
    kk = 0 if static else k

    ops = {kind: assemble_operator(kind, curve, k=kk) @ dens for kind in OPERATOR_KINDS}

    sides = {}
    for label, sign in (("exterior", 1.0), ("interior", -1.0)):
        sv, sg, dv, dg = [], [], [], []
        for s in distances:
            pts = curve.points + sign * s * curve.normals
            v, g = eval_potential("single", dens, curve, pts, kk, with_gradient=True, upsample=upsample)
            sv.append(v)
            sg.append(np.sum(g * curve.normals, axis=1))
            v, g = eval_potential("double", dens, curve, pts, kk, with_gradient=True, upsample=upsample)
            dv.append(v)
            dg.append(np.sum(g * curve.normals, axis=1))
        sides[label] = [limit_at_zero(np.array(a), distances) for a in (sv, sg, dv, dg)]

    scale = np.max(np.abs(dens))
    ext, inn = sides["exterior"], sides["interior"]
    residuals = {
        "single_exterior": np.max(np.abs(ext[0] - ops["S"])),
        "single_interior": np.max(np.abs(inn[0] - ops["S"])),
        "single_normal_exterior": np.max(np.abs(ext[1] - (ops["K'"] - dens / 2))),
        "single_normal_interior": np.max(np.abs(inn[1] - (ops["K'"] + dens / 2))),
        "double_exterior": np.max(np.abs(ext[2] - (ops["K"] + dens / 2))),
        "double_interior": np.max(np.abs(inn[2] - (ops["K"] - dens / 2))),
        "hypersingular_exterior": np.max(np.abs(ext[3] - ops["T"])),
        "hypersingular_interior": np.max(np.abs(inn[3] - ops["T"])),
    }
    return {key: float(val / scale) for key, val in residuals.items()}


def green_identity_residual(curve, k, points, direction=(1.0, 0.0)):
    """
    max |S(∂ν w) − D(w) − w| at interior points for the plane wave
    w(x) = exp(ik x·d).
    """
    d = np.asarray(direction, dtype=float)
    w = np.exp(1j * k * curve.points @ d)
    dw = 1j * k * (curve.normals @ d) * w
    rep = eval_potential("single", dw, curve, points, k) - eval_potential("double", w, curve, points, k)
    exact = np.exp(1j * k * np.atleast_2d(points) @ d)
    return float(np.max(np.abs(rep - exact)))
