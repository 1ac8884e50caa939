"""Truncated coupling operator of the probe/interface system and its spectrum.

In the mapped picture the interface becomes a perturbed unit disk D1 and the
probe exterior becomes the disk D2 of radius e^s.  The probe's resonances are
the eigenvalues of the coupling operator

    A = K*_{D2} + d/dnu_2 S_{D1} (lambda_mp I - K*_{D1})^{-1} dS_{D2}[.]/dnu_1,

acting on densities on the circle dD2, expressed here in the signed Fourier
basis {e^{i n theta}}, n in {-N..-1, 1..N}.  Three assemblies are provided:

- ``assemble_exact_A``: entries -(1/(8 pi |n|)) e^{-(|n|+|m|)s} N2[n, m] from
  the signed polarization table of D1 (row m = output, column n = input);
- ``assemble_asymptotic_A``: the first-order expansion A0 + delta A1 with
  A0 = diag(lambda0_n), lambda0_n = -e^{-2|n|s}/(4 lambda_mp), and
  A1[q, p] = -(eps_-|pq| + eps_+ p q) / (4 |p| (eps_- - eps_+) lambda_mp^2)
             * e^{-(|p|+|q|)s} * hhat(q - p);
- ``assemble_direct_A``: column-by-column application through layer-potential
  solves on the perturbed curve (an independent route used as a cross-check).

For small delta each unperturbed doublet {lambda0_n, lambda0_n} splits at
first order into

    lambda1_{+-n} = |n| lambda0_n (2 hhat(0) +- hhat(2n)/lambda_mp)

with even (+) and odd (-) eigenvector parity across the {e^{i n theta},
e^{-i n theta}} pair; ``match_clusters`` recovers these shifts from a computed
spectrum.  The measurable frequency dependence enters through the dispersive
contrast lambda_pc(omega) of the probe material (Drude model).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import DiskPerturbation
from .gpt import CGPTSet, signed_indices, signed_position
from .layers import (
    DiscretizedCurve,
    SecondKindSolver,
    circle_harmonic_slp,
    slp_normal_derivative_matrix,
)

__all__ = [
    "AmbiguousMatchError",
    "TruncatedOperatorA",
    "Eigensystem",
    "SpectralClusters",
    "DrudeMaterial",
    "ScanPeak",
    "ResonanceScan",
    "unperturbed_eigenvalue",
    "first_order_shifts",
    "assemble_exact_A",
    "assemble_asymptotic_A",
    "apply_A_direct",
    "assemble_direct_A",
    "eigendecompose",
    "match_clusters",
    "drude_contrast",
    "default_couplings",
    "resonance_scan",
]


class AmbiguousMatchError(RuntimeError):
    """Eigenvector overlap too weak to attribute a doublet to a Fourier pair."""


@dataclass(frozen=True, eq=False)
class TruncatedOperatorA:
    """Finite section of the coupling operator in the signed Fourier basis."""

    order: int
    basis: np.ndarray
    matrix: np.ndarray
    variant: str
    s: float
    lambda_mp: float
    delta: float = 0.0


def unperturbed_eigenvalue(n, s, lambda_mp):
    """lambda0_n = -e^{-2|n|s} / (4 lambda_mp) (doublet for each |n|)."""
    if n == 0:
        raise ValueError("orders are nonzero")
    return -np.exp(-2.0 * abs(n) * s) / (4.0 * lambda_mp)


def first_order_shifts(n, s, lambda_mp, hhat0, hhat2n):
    """(lambda1_{+n}, lambda1_{-n}) for even real h: |n| lambda0 (2 hhat0 +- hhat2n/lambda)."""
    lam0 = unperturbed_eigenvalue(n, s, lambda_mp)
    base = abs(n) * lam0
    return (base * (2.0 * hhat0 + hhat2n / lambda_mp),
            base * (2.0 * hhat0 - hhat2n / lambda_mp))


def assemble_exact_A(cgpt, s, N_mat, delta=0.0):
    """Coupling matrix from the signed polarization table of the inner domain.

    Entry at output row m, input column n is
    -(1/(8 pi |n|)) e^{-(|n|+|m|)s} N2[n, m].
    """
    if cgpt.order < N_mat:
        raise ValueError(f"polarization order {cgpt.order} < requested N_mat {N_mat}")
    idx = signed_indices(N_mat)
    pos = [signed_position(k, cgpt.order) for k in idx]
    n2 = cgpt.n2_signed.data[np.ix_(pos, pos)]  # [input n, output m]
    absk = np.abs(idx).astype(float)
    decay = np.exp(-(absk[:, None] + absk[None, :]) * s)  # [m, n]
    matrix = -(1.0 / (8.0 * np.pi * absk[None, :])) * decay * n2.T
    return TruncatedOperatorA(order=N_mat, basis=idx, matrix=matrix,
                              variant="exact", s=s,
                              lambda_mp=float(np.real(cgpt.contrast)), delta=delta)


def _coeff_lookup(h_fourier):
    if isinstance(h_fourier, DiskPerturbation):
        return h_fourier.coeff
    if callable(h_fourier):
        return h_fourier
    return lambda k: h_fourier.get(k, 0.0) if isinstance(h_fourier, dict) else h_fourier[k]


def assemble_asymptotic_A(h_fourier, s, lambda_mp, eps_minus, eps_plus, delta, N_mat):
    """First-order block assembly A0 + delta A1 from the Fourier table of h."""
    coeff = _coeff_lookup(h_fourier)
    idx = signed_indices(N_mat)
    n = idx.astype(float)
    lam0 = -np.exp(-2.0 * np.abs(n) * s) / (4.0 * lambda_mp)
    a1 = np.empty((idx.size, idx.size), dtype=complex)
    for jp, p in enumerate(idx):  # input order
        for jq, q in enumerate(idx):  # output order
            w = eps_minus * abs(p * q) + eps_plus * p * q
            a1[jq, jp] = (-w / (4.0 * abs(p) * (eps_minus - eps_plus) * lambda_mp**2)
                          * np.exp(-(abs(p) + abs(q)) * s) * coeff(q - p))
    matrix = np.diag(lam0).astype(complex) + delta * a1
    return TruncatedOperatorA(order=N_mat, basis=idx, matrix=matrix,
                              variant="asymptotic_first_order", s=s,
                              lambda_mp=lambda_mp, delta=delta)


def apply_A_direct(curve1, s, lambda_mp, coeffs, M2=None):
    """Apply the coupling operator to a density on dD2 given in Fourier form.

    ``coeffs`` maps signed orders to coefficients.  The input's S_{D2} trace is
    evaluated analytically on the inner curve, the inner solve runs on the
    Nystrom system of ``curve1``, and the output normal derivative on dD2 is
    projected back onto the Fourier basis (dict over |k| <= M2/2 - 1, k != 0).
    The K*_{D2} term vanishes on the nonzero circular harmonics.
    """
    r2 = float(np.exp(s))
    if np.max(np.abs(curve1.nodes)) >= r2:
        raise ValueError("inner curve must lie strictly inside the radius-e^s circle")
    M2 = M2 or curve1.M
    curve2 = DiscretizedCurve.circle(M2, radius=r2)
    g = np.zeros(curve1.M, dtype=complex)
    for k, c in coeffs.items():
        if c == 0:
            continue
        _, dnu = circle_harmonic_slp(k, r2, curve1.nodes, curve1.normals)
        g += c * dnu
    phi1 = SecondKindSolver(lambda_mp, curve1).solve(g)
    out = slp_normal_derivative_matrix(curve1, curve2.nodes, curve2.normals) @ phi1
    chat = np.fft.fft(out) / M2
    return {k: complex(chat[k % M2]) for k in range(-(M2 // 2 - 1), M2 // 2) if k != 0}


def assemble_direct_A(curve1, s, lambda_mp, N_mat, M2=None, delta=0.0):
    """Coupling matrix by columnwise layer-potential application (cross-check)."""
    r2 = float(np.exp(s))
    if np.max(np.abs(curve1.nodes)) >= r2:
        raise ValueError("inner curve must lie strictly inside the radius-e^s circle")
    M2 = M2 or curve1.M
    if M2 // 2 <= N_mat:
        raise ValueError("M2 too small to resolve the requested orders")
    curve2 = DiscretizedCurve.circle(M2, radius=r2)
    idx = signed_indices(N_mat)
    g = np.column_stack(
        [circle_harmonic_slp(n, r2, curve1.nodes, curve1.normals)[1] for n in idx]
    )
    phi = SecondKindSolver(lambda_mp, curve1).solve(g)
    out = slp_normal_derivative_matrix(curve1, curve2.nodes, curve2.normals) @ phi
    chat = np.fft.fft(out, axis=0) / M2
    rows = [k % M2 for k in idx]
    return TruncatedOperatorA(order=N_mat, basis=idx, matrix=chat[rows, :],
                              variant="direct", s=s, lambda_mp=lambda_mp, delta=delta)


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Real spectrum of a truncated coupling operator, canonically ordered."""

    values: np.ndarray      # real, descending |value| then descending value
    vectors: np.ndarray     # unit columns, deterministic phase
    basis: np.ndarray
    s: float
    lambda_mp: float
    delta: float


def eigendecompose(A, imag_tol=1e-8):
    """Eigen-decomposition of a truncated coupling matrix.

    The operator is self-adjoint in the *-inner product, so the spectrum is
    real up to discretization round-off; imaginary residues above ``imag_tol``
    raise.  Ordering is by descending magnitude (then descending value), and
    each eigenvector's largest component is rotated to the positive real axis.
    """
    vals, vecs = np.linalg.eig(A.matrix)
    if np.max(np.abs(vals.imag)) > imag_tol * max(1.0, np.max(np.abs(vals))):
        raise ArithmeticError(
            f"spectrum has imaginary residue {np.max(np.abs(vals.imag)):.2e} > {imag_tol:.1e}"
        )
    values = vals.real
    order = np.lexsort((-values, -np.abs(values)))
    values = values[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        pivot = v[np.argmax(np.abs(v))]
        vecs[:, j] = v * (np.conj(pivot) / abs(pivot)) / np.linalg.norm(v)
    return Eigensystem(values=values, vectors=vecs, basis=A.basis,
                       s=A.s, lambda_mp=A.lambda_mp, delta=A.delta)


@dataclass(frozen=True, eq=False)
class SpectralClusters:
    """Per-order doublets matched to the Fourier pairs {e^{i n .}, e^{-i n .}}.

    ``lam_plus``/``lam_minus`` carry the even-/odd-parity members;
    ``shift_plus``/``shift_minus`` the first-order estimates
    (lambda - lambda0)/delta; ``valid`` is False where the doublet failed the
    gap guard against neighboring clusters.
    """

    ns: np.ndarray
    lambda0: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    shift_plus: np.ndarray
    shift_minus: np.ndarray
    overlap_quality: np.ndarray
    valid: np.ndarray
    s: float
    lambda_mp: float
    delta: float

    def require(self, n):
        """Shift pair (lambda1_{+n}, lambda1_{-n}); raises on missing/flagged n."""
        where = np.flatnonzero(self.ns == n)
        if where.size == 0 or not self.valid[where[0]]:
            raise LookupError(f"no valid matched cluster for order n={n}")
        i = where[0]
        return float(self.shift_plus[i]), float(self.shift_minus[i])


def match_clusters(eig, delta, N_use=None, overlap_min=0.9):
    """Attribute eigenpairs to Fourier doublets by eigenvector overlap.

    For each order n the two eigenvectors with the largest squared overlap
    against span{e_{+n}, e_{-n}} are selected (overlap, not eigenvalue
    proximity: the unperturbed values crowd toward 0 like e^{-2ns}).  Parity
    is read off the sign of Re(v_{+n} conj(v_{-n})); at delta = 0 the doublets
    are degenerate and the assignment within a pair is arbitrary.

    Raises
    ------
    AmbiguousMatchError
        If the best overlap for some requested order is below ``overlap_min``.
    """
    N_mat = eig.basis.size // 2
    if N_use is None:
        N_use = N_mat
    if N_use > N_mat:
        raise ValueError("N_use exceeds the matrix order")
    ns = np.arange(1, N_use + 1)
    lam0 = np.array([unperturbed_eigenvalue(n, eig.s, eig.lambda_mp) for n in ns])
    out = {k: np.zeros(N_use) for k in
           ("lam_plus", "lam_minus", "shift_plus", "shift_minus", "overlap_quality")}
    valid = np.ones(N_use, dtype=bool)
    claimed = set()
    for i, n in enumerate(ns):
        ip = signed_position(n, N_mat)
        im = signed_position(-n, N_mat)
        score = np.abs(eig.vectors[ip, :]) ** 2 + np.abs(eig.vectors[im, :]) ** 2
        order = [j for j in np.argsort(-score) if j not in claimed]
        pair = order[:2]
        quality = float(np.mean(score[pair]))
        if quality < overlap_min:
            raise AmbiguousMatchError(
                f"order n={n}: best eigenvector overlap {quality:.3f} < {overlap_min}"
            )
        claimed.update(pair)
        lams, parities = [], []
        for j in pair:
            v = eig.vectors[:, j]
            parities.append(np.real(v[ip] * np.conj(v[im])) > 0.0)
            lams.append(eig.values[j])
        if parities[0] == parities[1]:
            # degenerate doublet (delta = 0): parity undetermined, fix by order
            jp, jm = pair
        else:
            jp = pair[0] if parities[0] else pair[1]
            jm = pair[1] if parities[0] else pair[0]
        lp, lm = eig.values[jp], eig.values[jm]
        out["lam_plus"][i] = lp
        out["lam_minus"][i] = lm
        out["overlap_quality"][i] = quality
        if delta > 0.0:
            out["shift_plus"][i] = (lp - lam0[i]) / delta
            out["shift_minus"][i] = (lm - lam0[i]) / delta
        # gap guard: the doublet must stay closer to its own lambda0 than to neighbors
        gap = _neighbor_gap(n, eig.s, eig.lambda_mp)
        if max(abs(lp - lam0[i]), abs(lm - lam0[i])) >= 0.5 * gap:
            valid[i] = False
    return SpectralClusters(ns=ns, lambda0=lam0, valid=valid,
                            s=eig.s, lambda_mp=eig.lambda_mp, delta=delta, **out)


def _neighbor_gap(n, s, lambda_mp):
    lam_n = unperturbed_eigenvalue(n, s, lambda_mp)
    gaps = [abs(lam_n - unperturbed_eigenvalue(n + 1, s, lambda_mp))]
    if n > 1:
        gaps.append(abs(unperturbed_eigenvalue(n - 1, s, lambda_mp) - lam_n))
    return min(gaps)


@dataclass(frozen=True)
class DrudeMaterial:
    """Dispersive probe permittivity eps_c(w) = eps0 (1 - wp^2 / (w (w + i gamma)))."""

    eps0: float
    omega_p: float
    gamma: float
    eps_plus: float

    def __post_init__(self):
        if self.eps0 <= 0 or self.omega_p <= 0 or self.gamma < 0 or self.eps_plus <= 0:
            raise ValueError("need eps0, omega_p, eps_plus > 0 and gamma >= 0")

    def permittivity(self, omega):
        w = np.asarray(omega, dtype=float)
        return self.eps0 * (1.0 - self.omega_p**2 / (w * (w + 1j * self.gamma)))


def drude_contrast(omega, mat):
    """Frequency-dependent contrast lambda_pc = (eps_+ + eps_c)/(2 (eps_+ - eps_c))."""
    eps_c = mat.permittivity(omega)
    return (mat.eps_plus + eps_c) / (2.0 * (mat.eps_plus - eps_c))


def default_couplings(ns, parities, s):
    """Mode weights ~ e^{-|n|s} (even parity) and 0.3 e^{-|n|s} (odd parity).

    The overall sign is negative: with the lossy permittivity model above,
    Im lambda_pc > 0, and the negative sign makes each resonance a positive
    peak of Im p rather than a dip.  These weights are synthetic stand-ins for
    the excitation-dependent coupling products and are recorded in the scan
    metadata.
    """
    return np.array([-(1.0 if even else 0.3) * np.exp(-abs(n) * s)
                     for n, even in zip(ns, parities)])


@dataclass(frozen=True)
class ScanPeak:
    omega: float
    lam: float
    linewidth: float
    confident: bool


@dataclass(frozen=True, eq=False)
class ResonanceScan:
    omegas: np.ndarray
    response: np.ndarray
    peaks: tuple
    low_confidence: bool
    metadata: dict


def resonance_scan(modes, mat, omegas, couplings=None, linewidth_factor=0.25):
    """Sweep the frequency response p(w) = sum_n c_n / (lambda_pc(w) - lambda_n).

    ``modes`` is either a :class:`SpectralClusters` (all valid doublet members
    are scanned, default couplings from their order/parity) or a flat array of
    eigenvalues (then ``couplings`` is required).  Peaks are strict local
    maxima of Im p, refined by a 3-point parabolic fit, and converted back to
    eigenvalue estimates via Re lambda_pc(w_peak).  A peak is confident when
    the local linewidth Im lambda_pc(w_peak) stays below ``linewidth_factor``
    times the recovered |lambda|; high damping trips the low-confidence flag.
    """
    omegas = np.asarray(omegas, dtype=float)
    if isinstance(modes, SpectralClusters):
        lambdas, ns, parities = [], [], []
        for i, n in enumerate(modes.ns):
            if not modes.valid[i]:
                continue
            lambdas += [modes.lam_plus[i], modes.lam_minus[i]]
            ns += [n, n]
            parities += [True, False]
        lambdas = np.asarray(lambdas)
        if couplings is None:
            couplings = default_couplings(ns, parities, modes.s)
    else:
        lambdas = np.asarray(modes, dtype=float)
        if couplings is None:
            raise ValueError("explicit couplings are required for raw eigenvalue input")
        couplings = np.asarray(couplings)
    if lambdas.size == 0:
        raise ValueError("no modes to scan")
    if couplings.shape != lambdas.shape or np.any(couplings == 0.0):
        raise ValueError("need one nonzero coupling per scanned mode")

    lam_pc = drude_contrast(omegas, mat)
    response = (1.0 / (lam_pc[:, None] - lambdas[None, :])) @ couplings
    im = response.imag
    peak_idx = np.flatnonzero((im[1:-1] > im[:-2]) & (im[1:-1] > im[2:])) + 1
    if peak_idx.size >= 2 and np.min(np.diff(peak_idx)) < 3:
        warnings.warn("peaks closer than 3 grid steps; omega grid too coarse",
                      UserWarning)
    dw = omegas[1] - omegas[0]
    peaks = []
    for i in peak_idx:
        denom = im[i - 1] - 2.0 * im[i] + im[i + 1]
        shift = 0.0 if denom == 0.0 else 0.5 * (im[i - 1] - im[i + 1]) / denom
        w_peak = omegas[i] + shift * dw
        lam_here = drude_contrast(w_peak, mat)
        lam_rec = float(np.real(lam_here))
        width = float(np.imag(lam_here))
        confident = width <= linewidth_factor * max(abs(lam_rec), 1e-12)
        peaks.append(ScanPeak(omega=float(w_peak), lam=lam_rec,
                              linewidth=width, confident=confident))
    low_confidence = (not peaks) or any(not p.confident for p in peaks)
    meta = {
        "couplings": np.asarray(couplings).tolist(),
        "coupling_note": "synthetic mode weights, sign chosen so Im p peaks at resonances",
        "linewidth_factor": linewidth_factor,
    }
    return ResonanceScan(omegas=omegas, response=response, peaks=tuple(peaks),
                         low_confidence=low_confidence, metadata=meta)
