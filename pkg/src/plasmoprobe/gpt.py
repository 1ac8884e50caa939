"""Contracted polarization tensors of a planar inclusion and their shape derivative.

For an inclusion D with contrast lambda, sources/receivers are the harmonic
polynomials P_m(z) = r^m e^{i m theta} = z^m.  The four real tensor families
combine the cosine/sine flavors,

    M^{ab}_{mn} = int_{dD} (b-part of P_n) (lambda I - K*)^{-1}[d(a-part of P_m)/dnu] dsigma,

(a, b in {c, s}; first index = source, second = receiver), and the complex
combinations per Fourier order are

    N1_{nm} = Mcc - Mss + i (Mcs + Msc),      N2_{nm} = Mcc + Mss - i (Mcs - Msc).

N2 extends to signed orders n, m in {-N..-1, 1..N} through the bilinear form

    N2[n, m] = int_{dD} r^{|m|} e^{-i m theta} (lambda I - K*)^{-1}[d(r^{|n|} e^{i n theta})/dnu] dsigma,

which restricts to the positive-order combination above and carries the
first-order shape sensitivity: for the unit disk perturbed radially by
delta * h(theta),

    N2[n, m](D_delta) - N2[n, m](disk)
        = delta * 2 pi (eps_D |nm| + eps_0 nm) / ((eps_D - eps_0) lambda_D^2) * hhat(m - n) + O(delta^2),

with lambda_D = (eps_D + eps_0)/(2 (eps_D - eps_0)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import DiscretizedCurve, SecondKindSolver, permittivity_contrast

__all__ = [
    "signed_indices",
    "signed_position",
    "SignedTable",
    "CGPTSet",
    "harmonic_normal_derivative",
    "harmonic_receiver",
    "compute_cgpt",
    "shape_derivative_prediction",
    "cgpt_delta",
]


def signed_indices(N):
    """Signed Fourier orders [-N, ..., -1, 1, ..., N] (no zero mode)."""
    if N < 1:
        raise ValueError("order must be >= 1")
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


def signed_position(k, N):
    """Array position of signed order k in :func:`signed_indices`."""
    if k == 0 or abs(k) > N:
        raise ValueError(f"order {k} outside the signed range 1..{N}")
    return k + N if k < 0 else k + N - 1


@dataclass(frozen=True, eq=False)
class SignedTable:
    """Complex table indexed by a pair of signed Fourier orders."""

    order: int
    data: np.ndarray  # (2N, 2N), [source position, receiver position]

    def __getitem__(self, nm):
        n, m = nm
        return complex(self.data[signed_position(n, self.order),
                                 signed_position(m, self.order)])

    @property
    def indices(self):
        return signed_indices(self.order)


@dataclass(frozen=True, eq=False)
class CGPTSet:
    """Contracted polarization tensors of one inclusion at one contrast.

    ``mcc``/``mcs``/``msc``/``mss`` are the real N x N families indexed
    [source-1, receiver-1]; ``n1``/``n2`` the complex combinations with the
    same layout; ``n2_signed`` the signed-order extension of N2.
    """

    order: int
    contrast: complex
    mcc: np.ndarray
    mcs: np.ndarray
    msc: np.ndarray
    mss: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    n2_signed: SignedTable


def harmonic_normal_derivative(curve, n):
    """d(r^{|n|} e^{i n theta})/dnu at the curve nodes (signed order n)."""
    if n == 0:
        raise ValueError("order 0 is constant; its normal derivative vanishes")
    z, nu = curve.nodes, curve.normals
    if n > 0:
        return n * z ** (n - 1) * nu
    a = -n
    return a * np.conj(z) ** (a - 1) * np.conj(nu)


def harmonic_receiver(curve, m):
    """Receiver samples r^{|m|} e^{-i m theta} at the curve nodes."""
    if m == 0:
        raise ValueError("order 0 is not a receiver")
    return np.conj(curve.nodes) ** m if m > 0 else curve.nodes ** (-m)


def compute_cgpt(curve, lambda_d, N):
    """All contracted polarization tensors of ``curve`` up to order N.

    One LU factorization of (lambda I - K*) serves every source; receivers are
    integrated with the curve's trapezoidal weights.  The curve must enclose
    the origin (polar sources/receivers are centered there).
    """
    if np.min(np.abs(curve.nodes)) <= 0.0 or _winding_about_origin(curve) != 1:
        raise ValueError("curve must enclose the origin")
    solver = SecondKindSolver(lambda_d, curve)
    w = curve.weights

    # real families, positive orders
    rhs = np.empty((curve.M, 2 * N))
    for m in range(1, N + 1):
        dpm = harmonic_normal_derivative(curve, m)
        rhs[:, m - 1] = dpm.real          # cos flavor
        rhs[:, N + m - 1] = dpm.imag      # sin flavor
    phi = solver.solve(rhs)
    rec_c = np.empty((N, curve.M))
    rec_s = np.empty((N, curve.M))
    for n in range(1, N + 1):
        pn = curve.nodes**n
        rec_c[n - 1] = pn.real
        rec_s[n - 1] = pn.imag
    mcc = (rec_c * w) @ phi[:, :N]
    mcs = (rec_s * w) @ phi[:, :N]
    msc = (rec_c * w) @ phi[:, N:]
    mss = (rec_s * w) @ phi[:, N:]
    # [source, receiver] layout
    mcc, mcs, msc, mss = mcc.T, mcs.T, msc.T, mss.T
    n1 = mcc - mss + 1j * (mcs + msc)
    n2 = mcc + mss - 1j * (mcs - msc)

    # signed complex table
    idx = signed_indices(N)
    rhs_s = np.column_stack([harmonic_normal_derivative(curve, n) for n in idx])
    phi_s = solver.solve(rhs_s)
    rec = np.vstack([harmonic_receiver(curve, m) for m in idx])
    n2_signed = ((rec * w) @ phi_s).T  # [source position, receiver position]

    return CGPTSet(
        order=N,
        contrast=complex(lambda_d),
        mcc=mcc,
        mcs=mcs,
        msc=msc,
        mss=mss,
        n1=n1,
        n2=n2,
        n2_signed=SignedTable(order=N, data=n2_signed),
    )


def _winding_about_origin(curve):
    closed = np.concatenate([curve.nodes, curve.nodes[:1]])
    ang = np.unwrap(np.angle(closed))
    return int(np.round((ang[-1] - ang[0]) / (2.0 * np.pi)))


def shape_derivative_prediction(eps_d, eps_0, delta, h_fourier, n, m):
    """First-order predicted change of N2[n, m] under a radial disk perturbation.

    ``h_fourier`` maps signed integers to Fourier coefficients hhat(k) of the
    real perturbation profile h(theta) (so hhat(-k) = conj(hhat(k))).
    Returns delta * 2 pi (eps_d |nm| + eps_0 n m) / ((eps_d - eps_0) lambda_d^2) * hhat(m - n).
    """
    if n == 0 or m == 0:
        raise ValueError("orders must be nonzero")
    if eps_d == eps_0:
        raise ValueError("zero contrast: eps_d must differ from eps_0")
    lam = permittivity_contrast(eps_d, eps_0)
    coef = 2.0 * np.pi * (eps_d * abs(n * m) + eps_0 * n * m) / ((eps_d - eps_0) * lam**2)
    hh = h_fourier(m - n) if callable(h_fourier) else h_fourier[m - n]
    return delta * coef * hh


def cgpt_delta(curve_perturbed, curve_reference, lambda_d, N):
    """Signed N2 difference between two inclusions at the same contrast."""
    t1 = compute_cgpt(curve_perturbed, lambda_d, N).n2_signed
    t0 = compute_cgpt(curve_reference, lambda_d, N).n2_signed
    if t1.order != t0.order:
        raise ValueError("order mismatch between the two tables")
    return SignedTable(order=N, data=t1.data - t0.data)
