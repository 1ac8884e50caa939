"""Probe/interface geometry and the half-plane <-> concentric-disk conformal map.

A circular probe of radius ``r`` centered at height ``d > r`` above a flat
interface (the real axis, substrate below) is mapped, together with the
interface, onto a pair of concentric circles by the Mobius transformation

    Phi(z) = (z + ic) / (z - ic),        c = sqrt(d^2 - r^2).

Phi sends the interface to the unit circle, the probe boundary to the circle
of radius e^s where sinh(s) = c/r (equivalently e^s = (d + c)/r), and the
point ic to infinity.  A small graph perturbation of the interface,

    x  ->  x + i * delta * h0(x),        supp(h0) subset [-R, R],

becomes a small radial perturbation of the unit circle,

    e^{i theta}  ->  (1 + delta * h(theta)) e^{i theta}.

This module transports profiles between the two pictures (``pushforward`` /
``pullback``) and owns the Fourier bookkeeping of the circle perturbation h.
Fourier coefficients follow the convention
``hhat(k) = (1/2pi) int h(theta) exp(-ik theta) dtheta``, so real h satisfies
``hhat(-k) = conj(hhat(k))`` and even h has real coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "StarShapeError",
    "ProbeGeometry",
    "PlaneProfile",
    "DiskPerturbation",
    "compute_modulus",
    "mobius_forward",
    "mobius_inverse",
    "pushforward_profile",
    "pullback_curve",
]

# relative threshold for "input sits on a pole of the map"
_POLE_TOL = 1e-13


class StarShapeError(RuntimeError):
    """Mapped interface is not star-shaped about the origin."""


def compute_modulus(d, r):
    """Conformal modulus s > 0 of the probe/interface pair.

    Defined by sinh(s) = sqrt((d/r)^2 - 1); equivalently
    s = log((d + sqrt(d^2 - r^2)) / r).

    Raises
    ------
    ValueError
        If not d > r > 0 (the probe must sit strictly above the interface).
    """
    if not (d > r > 0.0):
        raise ValueError(f"require d > r > 0, got d={d}, r={r}")
    return float(np.arcsinh(np.sqrt((d / r) ** 2 - 1.0)))


@dataclass(frozen=True)
class ProbeGeometry:
    """Circular probe of radius ``r_particle`` centered at height ``d``.

    Only the ratio d/r enters the conformal modulus; the bundled setups use
    r_particle = 1 so that d is quoted directly in probe radii.
    """

    d: float
    r_particle: float = 1.0

    def __post_init__(self):
        if not (self.d > self.r_particle > 0.0):
            raise ValueError(
                f"require d > r_particle > 0, got d={self.d}, r={self.r_particle}"
            )

    @property
    def c(self):
        """Mobius parameter sqrt(d^2 - r^2); the map's poles sit at +-ic."""
        return float(np.sqrt(self.d**2 - self.r_particle**2))

    @property
    def s(self):
        """Conformal modulus, sinh(s) = c / r_particle."""
        return compute_modulus(self.d, self.r_particle)

    @property
    def image_radius(self):
        """Radius e^s = (d + c)/r of the image circle of the probe boundary."""
        return (self.d + self.c) / self.r_particle


def _restore_scalar(out, arg):
    if np.isscalar(arg) or getattr(arg, "ndim", 1) == 0:
        return complex(out)
    return out


def mobius_forward(z, geom):
    """Evaluate Phi(z) = (z + ic)/(z - ic).

    The real axis maps onto the unit circle, the lower half-plane to its
    interior, and the probe boundary to the circle of radius e^s.

    Raises
    ------
    ValueError
        If any input lies at (or within machine distance of) the pole ic.
    """
    zc = np.asarray(z, dtype=complex)
    ic = 1j * geom.c
    denom = zc - ic
    if np.any(np.abs(denom) < _POLE_TOL * (1.0 + np.abs(zc))):
        raise ValueError("mobius_forward evaluated at the pole z = ic")
    return _restore_scalar((zc + ic) / denom, z)


def mobius_inverse(zeta, geom):
    """Evaluate Phi^{-1}(zeta) = ic (zeta + 1)/(zeta - 1).

    Raises
    ------
    ValueError
        If any input lies at (or within machine distance of) zeta = 1,
        the image of infinity.
    """
    zc = np.asarray(zeta, dtype=complex)
    denom = zc - 1.0
    if np.any(np.abs(denom) < _POLE_TOL * (1.0 + np.abs(zc))):
        raise ValueError("mobius_inverse evaluated at the pole zeta = 1")
    return _restore_scalar(1j * geom.c * (zc + 1.0) / denom, zeta)


@dataclass
class PlaneProfile:
    """Compactly supported graph perturbation h0 of the flat interface.

    The perturbed interface is {(x, delta * h0(x))}; h0 is one of

    - ``piecewise_constant``: a fixed value on a union of intervals, 0 outside;
    - ``gaussian_bumps``: sum of a_i * exp(-((x - c_i)/w_i)^2), truncated to 0
      beyond the numerical support radius max(|c_i| + 6 w_i);
    - ``tabulated``: linear interpolation of sorted samples, 0 outside their range;
    - ``zero``: the flat interface.

    ``support_radius`` is the radius R with h0 = 0 outside [-R, R] (enforced
    exactly by :meth:`evaluate`); ``even_symmetric`` is detected by sampling.
    """

    kind: str
    delta: float
    support_radius: float = 0.0
    even_symmetric: bool = True
    intervals: tuple = ()
    value: float = 0.0
    centers: tuple = ()
    widths: tuple = ()
    amplitudes: tuple = ()
    x_table: tuple = ()
    y_table: tuple = ()

    _KINDS = ("zero", "piecewise_constant", "gaussian_bumps", "tabulated")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.kind != "zero" and not self.support_radius > 0.0:
            raise ValueError("support_radius must be positive")
        self.even_symmetric = bool(self._detect_even())

    # ----- constructors -------------------------------------------------

    @classmethod
    def zero(cls):
        return cls(kind="zero", delta=0.0)

    @classmethod
    def piecewise_constant(cls, intervals, value, delta):
        ivs = tuple((float(a), float(b)) for a, b in intervals)
        if any(b <= a for a, b in ivs):
            raise ValueError("intervals must satisfy left < right")
        radius = max(max(abs(a), abs(b)) for a, b in ivs)
        return cls(
            kind="piecewise_constant",
            delta=float(delta),
            support_radius=radius,
            intervals=ivs,
            value=float(value),
        )

    @classmethod
    def gaussian_bumps(cls, centers, widths, amplitudes, delta):
        c = tuple(float(v) for v in centers)
        w = tuple(float(v) for v in widths)
        a = tuple(float(v) for v in amplitudes)
        if not (len(c) == len(w) == len(a)) or not c:
            raise ValueError("centers, widths, amplitudes must have equal nonzero length")
        if any(v <= 0 for v in w):
            raise ValueError("widths must be positive")
        radius = max(abs(ci) + 6.0 * wi for ci, wi in zip(c, w))
        return cls(
            kind="gaussian_bumps",
            delta=float(delta),
            support_radius=radius,
            centers=c,
            widths=w,
            amplitudes=a,
        )

    @classmethod
    def tabulated(cls, x, y, delta):
        xs = np.asarray(x, dtype=float)
        ys = np.asarray(y, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("need matching 1-d x, y with at least 2 samples")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("x samples must be strictly increasing")
        radius = float(max(abs(xs[0]), abs(xs[-1])))
        return cls(
            kind="tabulated",
            delta=float(delta),
            support_radius=radius,
            x_table=tuple(xs),
            y_table=tuple(ys),
        )

    # ----- evaluation ---------------------------------------------------

    def evaluate(self, x):
        """h0(x), identically 0 outside [-support_radius, support_radius]."""
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        if self.kind == "zero":
            return out
        inside = np.abs(xa) <= self.support_radius
        xi = xa[inside]
        if self.kind == "piecewise_constant":
            vals = np.zeros_like(xi)
            for a, b in self.intervals:
                vals[(xi >= a) & (xi <= b)] = self.value
        elif self.kind == "gaussian_bumps":
            vals = np.zeros_like(xi)
            for ci, wi, ai in zip(self.centers, self.widths, self.amplitudes):
                vals += ai * np.exp(-(((xi - ci) / wi) ** 2))
        else:  # tabulated
            vals = np.interp(xi, self.x_table, self.y_table, left=0.0, right=0.0)
        out[inside] = vals
        return out

    __call__ = evaluate

    def _detect_even(self, n=257, tol=1e-12):
        if self.kind == "zero":
            return True
        xs = np.linspace(0.0, self.support_radius, n)
        return np.max(np.abs(self.evaluate(xs) - self.evaluate(-xs))) <= tol

    # ----- serialization (config files) ---------------------------------

    def to_dict(self):
        d = {"kind": self.kind, "delta": self.delta}
        if self.kind == "piecewise_constant":
            d["intervals"] = [list(iv) for iv in self.intervals]
            d["value"] = self.value
        elif self.kind == "gaussian_bumps":
            d["centers"] = list(self.centers)
            d["widths"] = list(self.widths)
            d["amplitudes"] = list(self.amplitudes)
        elif self.kind == "tabulated":
            d["x"] = list(self.x_table)
            d["y"] = list(self.y_table)
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "zero":
            return cls.zero()
        delta = d["delta"]
        if kind == "piecewise_constant":
            return cls.piecewise_constant(d["intervals"], d["value"], delta)
        if kind == "gaussian_bumps":
            return cls.gaussian_bumps(d["centers"], d["widths"], d["amplitudes"], delta)
        if kind == "tabulated":
            return cls.tabulated(d["x"], d["y"], delta)
        raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True, eq=False)
class DiskPerturbation:
    """Radial perturbation h of the unit circle on a uniform theta grid.

    The perturbed curve is (1 + delta * h(theta)) e^{i theta}.  ``hhat`` holds
    the discrete Fourier coefficients hhat[k % M] ~ (1/M) sum_j h_j e^{-ik theta_j};
    real samples guarantee hhat(-k) = conj(hhat(k)).
    """

    samples: np.ndarray
    delta: float
    theta: np.ndarray = field(repr=False)
    hhat: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, samples, delta):
        h = np.asarray(samples, dtype=float)
        if h.ndim != 1 or h.size % 2:
            raise ValueError("need a 1-d sample vector of even length")
        M = h.size
        theta = np.arange(M) * (2.0 * np.pi / M)
        hhat = np.fft.fft(h) / M
        return cls(samples=h, delta=float(delta), theta=theta, hhat=hhat)

    @property
    def M(self):
        return self.samples.size

    def coeff(self, k):
        """Fourier coefficient hhat(k), |k| <= M/2."""
        if abs(k) > self.M // 2:
            raise ValueError(f"|k|={abs(k)} exceeds Nyquist order {self.M // 2}")
        return complex(self.hhat[k % self.M])

    def coeff_table(self, kmax):
        """Dict {k: hhat(k)} for |k| <= kmax."""
        return {k: self.coeff(k) for k in range(-kmax, kmax + 1)}

    def is_even(self, tol=1e-8):
        """True when h(-theta) = h(theta), i.e. all hhat(k) are real."""
        return bool(np.max(np.abs(self.hhat.imag)) <= tol)

    def radius(self):
        """Samples of 1 + delta * h(theta)."""
        return 1.0 + self.delta * self.samples

    def evaluate(self, theta):
        """Trigonometric interpolant of the samples at arbitrary angles."""
        th = np.asarray(theta, dtype=float)
        M = self.M
        out = np.full(th.shape, self.hhat[0].real, dtype=float)
        for k in range(1, M // 2):
            c = self.hhat[k]
            out += 2.0 * (c.real * np.cos(k * th) - c.imag * np.sin(k * th))
        out += self.hhat[M // 2].real * np.cos((M // 2) * th)
        return out


def pushforward_profile(profile, geom, M, fine_factor=4):
    """Transport a plane profile to the radial perturbation of the unit circle.

    A fine sampling of the perturbed interface (``fine_factor * M`` points,
    parameterized through the preimages x = c cot(theta'/2) of a uniform
    offset angle grid) is mapped by Phi, converted to polar form, and the
    radius rho(theta) is interpolated with a periodic cubic spline onto the
    uniform M-grid; then h = (rho - 1)/delta.  Grid angles whose interface
    preimage lies outside the profile support carry h = 0 exactly (those
    interface points are unperturbed, so their images sit on the unit circle).

    Raises
    ------
    StarShapeError
        If the mapped angles are not strictly monotone, i.e. the image curve
        is not star-shaped about the origin (delta too large).
    """
    if M % 2 or M < 4:
        raise ValueError("M must be even and >= 4")
    delta = profile.delta
    if delta == 0.0 or profile.kind == "zero":
        return DiskPerturbation.from_samples(np.zeros(M), delta)

    Mf = fine_factor * M
    tf = (np.arange(Mf) + 0.5) * (2.0 * np.pi / Mf)
    x = geom.c / np.tan(0.5 * tf)
    zeta = mobius_forward(x + 1j * delta * profile.evaluate(x), geom)
    rho = np.abs(zeta)
    ang = np.mod(np.angle(zeta), 2.0 * np.pi)
    flat = np.abs(x) >= profile.support_radius
    rho[flat] = 1.0
    ang[flat] = tf[flat]

    order = np.argsort(ang)
    ang = ang[order]
    rho = rho[order]
    if np.any(np.diff(ang) <= 0.0) or np.any(rho <= 0.0):
        raise StarShapeError(
            "image of the perturbed interface is not star-shaped about 0; "
            "reduce delta or refine the sampling"
        )

    knots = np.concatenate([ang, ang[:1] + 2.0 * np.pi])
    vals = np.concatenate([rho, rho[:1]])
    theta = np.arange(M) * (2.0 * np.pi / M)
    rho_grid = CubicSpline(knots, vals, bc_type="periodic")(theta)

    h = (rho_grid - 1.0) / delta
    with np.errstate(divide="ignore"):
        x_grid = geom.c / np.tan(0.5 * theta)
    h[np.abs(x_grid) >= profile.support_radius] = 0.0
    return DiskPerturbation.from_samples(h, delta)


def pullback_curve(h, geom, x_max=None, min_angle=None):
    """Map the perturbed circle (1 + delta h(theta)) e^{i theta} back to the plane.

    Returns the sampled interface graph as a pair of arrays (x, y), sorted by
    x, with y = delta * h0(x).  A neighborhood of theta = 0 is excluded (it
    maps to infinity); when ``x_max`` is given, only |x| <= x_max is kept.
    """
    if min_angle is None:
        min_angle = 8.0 * np.pi / h.M
    theta = h.theta
    keep = (theta >= min_angle) & (theta <= 2.0 * np.pi - min_angle)
    if x_max is not None:
        with np.errstate(divide="ignore"):
            x_pre = geom.c / np.tan(0.5 * theta)
        keep &= np.abs(x_pre) <= 1.5 * x_max + geom.c
    if not np.any(keep):
        raise ValueError("no samples left after excluding the pole neighborhood")
    zeta = h.radius()[keep] * np.exp(1j * theta[keep])
    z = mobius_inverse(zeta, geom)
    x, y = z.real, z.imag
    if x_max is not None:
        inside = np.abs(x) <= x_max
        x, y = x[inside], y[inside]
    order = np.argsort(x)
    return x[order], y[order]
