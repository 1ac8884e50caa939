"""Nystrom discretization of Laplace layer potentials on smooth closed curves.

Kernel conventions (2D Laplace):

    Gamma(x, y) = (1/2pi) log|x - y|
    S[phi](x)   = int Gamma(x, y) phi(y) dsigma(y)
    K*[phi](x)  = int <x - y, nu(x)> / (2 pi |x - y|^2) phi(y) dsigma(y)

with outward normal nu and the jump relations dS/dnu|_+- = (+-1/2 I + K*)[phi].
K* is self-adjoint and compact for the inner product
(phi, psi)_* = -int phi S[psi] dsigma restricted to zero-mean densities, and
its eigenvalues lie in (-1/2, 1/2].

Curves are parameterized over a uniform grid in [0, 2pi); all boundary
integrals use the periodic trapezoidal rule (spectrally accurate for analytic
data), and the weakly singular on-boundary single layer uses the standard
log-splitting  log|x(t)-x(tau)| = smooth + log|2 sin((t-tau)/2)|  with the
singular factor convolved exactly in Fourier space.  Densities are plain
arrays of node values; points and direction vectors are complex (x + i y).
"""

from __future__ import annotations

import warnings
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geometry import DiskPerturbation

__all__ = [
    "DiscretizedCurve",
    "SingularSystemError",
    "TargetTooCloseWarning",
    "UniformField",
    "permittivity_contrast",
    "np_star_matrix",
    "SecondKindSolver",
    "solve_second_kind",
    "single_layer_offboundary",
    "single_layer_gradient",
    "single_layer_onboundary",
    "slp_normal_derivative_matrix",
    "circle_singlelayer_fourier",
    "circle_harmonic_slp",
    "hstar_inner",
    "solve_single_particle",
    "solve_coupled",
]


class SingularSystemError(RuntimeError):
    """Second-kind system is (numerically) singular at this contrast."""


class TargetTooCloseWarning(UserWarning):
    """Off-boundary evaluation requested closer to the curve than one mesh width."""


def permittivity_contrast(eps_inside, eps_outside):
    """Contrast lambda = (eps_in + eps_out) / (2 (eps_in - eps_out))."""
    if eps_inside == eps_outside:
        raise ValueError("contrast undefined for eps_inside == eps_outside")
    return (eps_inside + eps_outside) / (2.0 * (eps_inside - eps_outside))


@dataclass(frozen=True, eq=False)
class DiscretizedCurve:
    """Closed planar curve sampled on a uniform parameter grid.

    Orientation is counterclockwise (positive signed area) and normals point
    outward.  ``weights`` is the discrete arclength measure |z'(t_j)| dt.
    """

    theta: np.ndarray
    nodes: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    kind: str = "generic"
    radius0: float = 0.0  # circle radius when kind == "circle" (center 0)

    @property
    def M(self):
        return self.nodes.size

    def signed_area(self):
        # (1/2) oint (x dy - y dx) = (1/2) int Im(conj(z) z') dt
        return 0.5 * float(np.sum(np.imag(np.conj(self.nodes) * self.tangents) * self.weights))

    def perimeter(self):
        return float(np.sum(self.weights))

    # ----- factories ------------------------------------------------------

    @classmethod
    def from_parameterization(cls, z, zp, zpp, kind="generic", radius0=0.0):
        """Build node data from samples of z(t), z'(t), z''(t) on a uniform grid."""
        z = np.asarray(z, dtype=complex)
        M = z.size
        theta = np.arange(M) * (2.0 * np.pi / M)
        speed = np.abs(zp)
        if np.any(speed == 0.0):
            raise ValueError("degenerate parameterization (z' vanishes)")
        tangents = zp / speed
        normals = -1j * tangents
        curvature = -np.real(np.conj(zpp) * normals) / speed**2
        weights = speed * (2.0 * np.pi / M)
        return cls(
            theta=theta,
            nodes=z,
            tangents=tangents,
            normals=normals,
            curvature=curvature,
            weights=weights,
            kind=kind,
            radius0=radius0,
        )

    @classmethod
    def circle(cls, M, radius=1.0, center=0j):
        t = np.arange(M) * (2.0 * np.pi / M)
        e = np.exp(1j * t)
        z = center + radius * e
        kind = "circle" if center == 0 else "generic"
        return cls.from_parameterization(
            z, 1j * radius * e, -radius * e, kind=kind, radius0=float(radius)
        )

    @classmethod
    def ellipse(cls, M, a, b):
        t = np.arange(M) * (2.0 * np.pi / M)
        z = a * np.cos(t) + 1j * b * np.sin(t)
        zp = -a * np.sin(t) + 1j * b * np.cos(t)
        zpp = -a * np.cos(t) - 1j * b * np.sin(t)
        return cls.from_parameterization(z, zp, zpp)

    @classmethod
    def from_radial_samples(cls, r):
        """Curve r(theta) e^{i theta} from radius samples on the uniform grid.

        Derivatives are spectral: the curve is the trigonometric interpolant
        of its own samples (this is the discrete geometry all quadratures see).
        """
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise ValueError("radius samples must be positive")
        M = r.size
        k = np.fft.fftfreq(M, d=1.0 / M)
        dk = 1j * k.copy()
        dk[M // 2] = 0.0  # odd derivative: drop the unpaired Nyquist mode
        rhat = np.fft.fft(r)
        rp = np.fft.ifft(dk * rhat).real
        rpp = np.fft.ifft(-(k**2) * rhat).real
        t = np.arange(M) * (2.0 * np.pi / M)
        e = np.exp(1j * t)
        z = r * e
        zp = (rp + 1j * r) * e
        zpp = (rpp + 2j * rp - r) * e
        return cls.from_parameterization(z, zp, zpp)

    @classmethod
    def from_perturbation(cls, h: DiskPerturbation):
        """Perturbed disk (1 + delta h(theta)) e^{i theta}."""
        return cls.from_radial_samples(h.radius())


def np_star_matrix(curve):
    """Dense Nystrom matrix of the Neumann-Poincare operator K*.

    Off-diagonal entries are <x_i - y_j, nu(x_i)> / (2 pi |x_i - y_j|^2) w_j;
    the diagonal carries the continuous-kernel limit kappa(x_i)/(4 pi) w_i,
    valid for C^2 curves with outward normals and counterclockwise orientation.
    """
    z = curve.nodes
    dz = z[:, None] - z[None, :]
    r2 = np.abs(dz) ** 2
    np.fill_diagonal(r2, 1.0)
    K = np.real(np.conj(curve.normals)[:, None] * dz) / (2.0 * np.pi * r2)
    np.fill_diagonal(K, curve.curvature / (4.0 * np.pi))
    return K * curve.weights[None, :]


class SecondKindSolver:
    """LU-factored resolvent (lambda I - K*)^{-1} on a fixed curve.

    Every solve is residual-checked; a residual above ``residual_tol`` times
    the data norm signals that lambda sits at (or within machine tolerance of)
    a discrete eigenvalue of K* and raises :class:`SingularSystemError`.
    """

    def __init__(self, lam, curve, residual_tol=1e-10):
        self.lam = complex(lam)
        self.curve = curve
        self.residual_tol = residual_tol
        kstar = np_star_matrix(curve)
        dtype = complex if np.iscomplexobj(np.asarray(lam)) or self.lam.imag else float
        lam_cast = self.lam if dtype is complex else self.lam.real
        self.matrix = lam_cast * np.eye(curve.M, dtype=dtype) - kstar
        try:
            self._lu = scipy.linalg.lu_factor(self.matrix)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - exact singularity
            raise SingularSystemError(str(exc)) from exc

    def solve(self, rhs):
        """Solve (lambda I - K*) phi = rhs for one or many right-hand sides."""
        b = np.asarray(rhs)
        x = scipy.linalg.lu_solve(self._lu, b)
        resid = np.max(np.abs(self.matrix @ x - b))
        scale = max(np.max(np.abs(b)), 1e-300)
        if resid > self.residual_tol * scale:
            raise SingularSystemError(
                f"residual {resid:.2e} exceeds {self.residual_tol:.1e} x data norm; "
                f"lambda={self.lam} is numerically at an eigenvalue of K*"
            )
        return x


def solve_second_kind(lam, curve, rhs):
    """One-shot (lambda I - K*) phi = rhs on ``curve`` (dense direct solve)."""
    return SecondKindSolver(lam, curve).solve(rhs)


def single_layer_offboundary(curve, phi, targets, warn_distance=None):
    """Trapezoidal S[phi] at targets off the curve.

    Accuracy degrades within about one mesh width of the curve; closer targets
    trigger a :class:`TargetTooCloseWarning` (default threshold max weight).
    """
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    d = np.abs(t[:, None] - curve.nodes[None, :])
    if warn_distance is None:
        warn_distance = float(np.max(curve.weights))
    if np.min(d) < warn_distance:
        warnings.warn(
            "target within one mesh width of the curve; quadrature unreliable",
            TargetTooCloseWarning,
        )
    vals = (np.log(d) @ (phi * curve.weights)) / (2.0 * np.pi)
    return vals if np.ndim(targets) else vals[0]


def single_layer_gradient(curve, phi, targets):
    """Complex gradient (d/dx + i d/dy) of S[phi] at off-curve targets."""
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    diff = t[:, None] - curve.nodes[None, :]
    grad = (diff / np.abs(diff) ** 2) @ (phi * curve.weights) / (2.0 * np.pi)
    return grad if np.ndim(targets) else grad[0]


def slp_normal_derivative_matrix(source, target_nodes, target_normals):
    """Matrix taking a density on ``source`` to nu . grad S[phi] at targets.

    Targets must be disjoint from the source curve (smooth quadrature).
    """
    diff = target_nodes[:, None] - source.nodes[None, :]
    r2 = np.abs(diff) ** 2
    ker = np.real(np.conj(target_normals)[:, None] * diff) / (2.0 * np.pi * r2)
    return ker * source.weights[None, :]


def single_layer_onboundary(curve, phi):
    """S[phi] on the curve itself by the singularity-subtracted trapezoidal rule.

    log|x(t) - x(tau)| is split into log(|x(t)-x(tau)| / |2 sin((t-tau)/2)|)
    (smooth, -> log|x'(t)| on the diagonal, trapezoidal rule) plus
    log|2 sin((t-tau)/2)| (convolved exactly: Fourier multiplier -1/(2|k|),
    zero mean).
    """
    M = curve.M
    t = curve.theta
    speed = curve.weights / (2.0 * np.pi / M)
    dt_half = 0.5 * (t[:, None] - t[None, :])
    sin_fac = np.abs(2.0 * np.sin(dt_half))
    np.fill_diagonal(sin_fac, 1.0)
    d = np.abs(curve.nodes[:, None] - curve.nodes[None, :])
    np.fill_diagonal(d, 1.0)
    smooth = np.log(d / sin_fac)
    np.fill_diagonal(smooth, np.log(speed))
    v_smooth = (smooth @ (phi * curve.weights)) / (2.0 * np.pi)

    g = phi * speed
    k = np.fft.fftfreq(M, d=1.0 / M)
    mult = np.zeros(M)
    mult[1:] = -0.5 / np.abs(k[1:])
    v_sing = np.fft.ifft(np.fft.fft(g) * mult)
    if not np.iscomplexobj(phi):
        v_sing = v_sing.real
    return v_smooth + v_sing


Multipliers = namedtuple("Multipliers", ["value", "ddr"])


def circle_singlelayer_fourier(n, r0, r, side=None):
    """Radial multipliers of S[e^{i n theta}] on the circle of radius r0.

    S[e^{in.}](r e^{i theta}) = value * e^{in theta} with
    value = -(r0/(2|n|)) (r/r0)^{|n|} for r <= r0 and -(r0/(2|n|)) (r0/r)^{|n|}
    for r >= r0; ``ddr`` is the radial derivative of that value,
    -(1/2)(r/r0)^{|n|-1} inside and +(1/2)(r0/r)^{|n|+1} outside, whose
    one-sided boundary limits -1/2 and +1/2 reproduce the jump relation.
    On the circle itself (r == r0) the side must be named explicitly.
    """
    if n == 0:
        raise ValueError("n = 0 has no decaying harmonic multiplier")
    if r0 <= 0.0 or r < 0.0:
        raise ValueError("radii must be positive")
    a = abs(n)
    if side is None:
        if r == r0:
            raise ValueError("r == r0: pass side='inside' or side='outside'")
        side = "inside" if r < r0 else "outside"
    if side == "inside":
        value = -(r0 / (2.0 * a)) * (r / r0) ** a
        ddr = -0.5 * (r / r0) ** (a - 1)
    elif side == "outside":
        value = -(r0 / (2.0 * a)) * (r0 / r) ** a
        ddr = 0.5 * (r0 / r) ** (a + 1)
    else:
        raise ValueError("side must be 'inside' or 'outside'")
    return Multipliers(value=value, ddr=ddr)


def circle_harmonic_slp(n, r0, targets, normals=None):
    """S[e^{i n theta}] of the circle of radius r0 at points strictly off it.

    Returns the potential values, and additionally the directional derivative
    along ``normals`` when given.  Uses the closed forms
    S = -(r0^{1-|n|}/(2|n|)) z^{|n|} inside and -(r0^{1+|n|}/(2|n|)) zbar^{-|n|}
    outside (n > 0; negative n is the complex conjugate mirror).
    """
    if n == 0:
        raise ValueError("n = 0 has no decaying harmonic multiplier")
    z = np.asarray(targets, dtype=complex)
    a = abs(n)
    radii = np.abs(z)
    inside = radii < r0
    if not (np.all(inside) or np.all(~inside)):
        raise ValueError("targets must lie strictly on one side of the circle")
    if np.any(np.abs(radii - r0) < 1e-12 * r0):
        raise ValueError("targets must be strictly off the circle")
    if inside.all():
        coef = -(r0 ** (1 - a)) / (2.0 * a)
        vals = coef * z**a
        dvals = None if normals is None else coef * a * z ** (a - 1) * normals
    else:
        coef = -(r0 ** (1 + a)) / (2.0 * a)
        zb = np.conj(z)
        vals = coef * zb ** (-a)
        dvals = None if normals is None else coef * (-a) * zb ** (-a - 1) * np.conj(normals)
    if n < 0:
        vals = np.conj(vals)
        dvals = None if dvals is None else np.conj(dvals)
    return (vals, dvals) if normals is not None else (vals, None)


def _check_zero_mean(curve, values, tol):
    scale = max(float(np.max(np.abs(values))), 1e-300) * curve.perimeter()
    if abs(np.sum(curve.weights * values)) > tol * scale:
        raise ValueError("density is not zero-mean; the *-inner product needs "
                         "zero-mean inputs (the resolvent excludes the eigenvalue 1/2)")


def hstar_inner(phi, psi, curve, tol_mean=1e-8):
    """Bilinear *-inner product  -int phi S[psi] dsigma  of zero-mean densities.

    On origin-centered circles S[psi] is applied analytically through the
    Fourier multipliers -r0/(2|k|); on general curves the singularity-
    subtracted on-boundary rule is used.  The pairing is bilinear (no complex
    conjugation), matching the duality pairing it discretizes; for real
    densities it is the usual inner product under which K* is self-adjoint.
    """
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    _check_zero_mean(curve, phi, tol_mean)
    _check_zero_mean(curve, psi, tol_mean)
    if curve.kind == "circle":
        M = curve.M
        k = np.fft.fftfreq(M, d=1.0 / M)
        mult = np.zeros(M)
        mult[1:] = -curve.radius0 / (2.0 * np.abs(k[1:]))
        s_psi = np.fft.ifft(np.fft.fft(psi) * mult)
        if not np.iscomplexobj(psi):
            s_psi = s_psi.real
    else:
        s_psi = single_layer_onboundary(curve, psi)
    return -np.sum(curve.weights * phi * s_psi)


@dataclass(frozen=True)
class UniformField:
    """Incident potential u(z) = a . x of a uniform field with direction a."""

    a: complex

    def potential(self, z):
        return np.real(np.conj(self.a) * np.asarray(z, dtype=complex))

    def gradient(self, z):
        z = np.asarray(z, dtype=complex)
        return np.full(z.shape, self.a, dtype=complex)


def solve_single_particle(curve, lam, incident):
    """Quasi-static transmission solve for one inclusion: u = u_i + S[phi].

    ``incident`` provides harmonic ``potential(z)`` and complex ``gradient(z)``;
    the density solves (lambda I - K*) phi = nu . grad u_i on the boundary.
    Returns (phi, evaluate) where evaluate(targets) is the exterior total field.
    """
    rhs = np.real(np.conj(incident.gradient(curve.nodes)) * curve.normals)
    phi = solve_second_kind(lam, curve, rhs)

    def evaluate(targets):
        return incident.potential(targets) + single_layer_offboundary(curve, phi, targets)

    return phi, evaluate


def solve_coupled(curve1, curve2, lambda_mp, lambda_pc, rhs1, rhs2,
                  residual_tol=1e-9):
    """Dense solve of the two-curve transmission system.

        (lambda_mp I - K*_1) phi_1 - dS_2[phi_2]/dnu_1 = rhs1   on curve1
        (lambda_pc I - K*_2) phi_2 - dS_1[phi_1]/dnu_2 = rhs2   on curve2

    The curves must be disjoint (the cross blocks use smooth quadrature).
    Returns (phi_1, phi_2); raises :class:`SingularSystemError` when the block
    system is numerically singular (lambda_pc at a resonance of the reduced
    operator).
    """
    M1, M2 = curve1.M, curve2.M
    b12 = slp_normal_derivative_matrix(curve2, curve1.nodes, curve1.normals)
    b21 = slp_normal_derivative_matrix(curve1, curve2.nodes, curve2.normals)
    A = np.zeros((M1 + M2, M1 + M2), dtype=complex)
    A[:M1, :M1] = lambda_mp * np.eye(M1) - np_star_matrix(curve1)
    A[:M1, M1:] = -b12
    A[M1:, :M1] = -b21
    A[M1:, M1:] = lambda_pc * np.eye(M2) - np_star_matrix(curve2)
    b = np.concatenate([np.asarray(rhs1, dtype=complex), np.asarray(rhs2, dtype=complex)])
    x = np.linalg.solve(A, b)
    resid = np.max(np.abs(A @ x - b))
    scale = max(np.max(np.abs(b)), 1e-300)
    if resid > residual_tol * scale:
        raise SingularSystemError(
            f"coupled system residual {resid:.2e} exceeds {residual_tol:.1e} x data norm"
        )
    return x[:M1], x[M1:]
