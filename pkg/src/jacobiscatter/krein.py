"""Krein determinant, spectral shift function and trace formulas.

Three independent routes to the trace tau_j = tr(H^j - H_q^j):

  * direct: banded truncations large enough that the boundary contributions of
    H and H_q cancel exactly, so the truncated trace difference is exact;
  * recursion: Laurent coefficients alpha_j of A*alpha at infinity (contour
    quadrature) fed through tau_1 = -alpha_1,
    tau_j = -j alpha_j - sum_{k<j} alpha_{j-k} tau_k;
  * moment: tau_j = j * integral lambda^{j-1} xi(lambda) d lambda against the
    spectral shift function.

xi is recovered from the boundary values of arg alpha(lambda + i eps): the
branch is unwrapped continuously in lambda at the largest eps (anchored to 0
below the spectrum, where alpha > 0), carried down the eps ladder by
continuity in eps, then extrapolated to eps = 0.  The extrapolation series in
eps has convergence radius ~ the distance d from lambda to the nearest
eigenvalue or band edge, so each sample only uses the ladder members with
eps < 0.45 d; the default ladder is geometric (ratio 2) and deep enough that
even the Gauss nodes closest to a band edge get a usable subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import band_edges, green_background, wronskian_background, EDGE_EXCLUSION
from .errors import (
    BranchTrackingFailure,
    EigenvalueHit,
    ProfileIncomplete,
    RadiusTooSmall,
)
from .perturbation import (
    Perturbation,
    alpha,
    alpha_asymptotics,
    eigenvalues,
    jost,
    jost_z_derivative,
)
from .background import _base_solution, _base_solution_dz, _eval_floquet, _eval_floquet_dz

DEFAULT_EPSILONS = tuple(1e-2 * 0.5**k for k in range(8))
_PLATEAU_SNAP_TOL = 1e-3
# ladder members are eligible for a sample at distance d from a singularity
# when eps < _EPS_RADIUS_FRACTION * d
_EPS_RADIUS_FRACTION = 0.45


def perturbation_determinant(p: Perturbation, z) -> complex:
    """det(1 + V (H_q - z)^{-1}) via the exact finite section.

    V = H - H_q vanishes outside S x S with S = [n_minus - 1, n_plus + 1], so
    the Fredholm determinant equals the |S| x |S| determinant of I + V_S G_S.
    Equals A * alpha(z).
    """
    if p.is_trivial:
        return 1.0 + 0.0j
    z = complex(z)
    bg = p.background
    w_lo, w_hi = p.window
    sites = list(range(w_lo - 1, w_hi + 2))
    k = len(sites)
    V = np.zeros((k, k))
    for i, n in enumerate(sites):
        V[i, i] = p.b_at(n) - bg.b_at(n)
        if i + 1 < k:
            V[i, i + 1] = V[i + 1, i] = p.a_at(n) - bg.a_at(n)
    lam_p, base_p, _ = _base_solution(bg, z, "+")
    lam_m, base_m, _ = _base_solution(bg, z, "-")
    N = bg.period
    vp = np.array([_eval_floquet(lam_p, base_p, N, n) for n in sites])
    vm = np.array([_eval_floquet(lam_m, base_m, N, n) for n in sites])
    Wq = wronskian_background(bg, z)
    G = np.empty((k, k), dtype=complex)
    for i in range(k):
        G[i, :i + 1] = vm[: i + 1] * vp[i]
        G[i, i:] = vm[i] * vp[i:]
    G /= Wq
    sign, logabs = np.linalg.slogdet(np.eye(k) + V @ G)
    return sign * np.exp(logabs)


def _alpha_with_derivative(p: Perturbation, z):
    z = complex(z)
    bg = p.background
    site = 0 if p.is_trivial else p.window[1] + 1
    win = (site, site + 1)
    jp = jost(p, z, "+", win).values
    jm = jost(p, z, "-", win).values
    djp = jost_z_derivative(p, z, "+", win)
    djm = jost_z_derivative(p, z, "-", win)
    a0 = p.a_at(site)
    W = a0 * (jm[site] * jp[site + 1] - jm[site + 1] * jp[site])
    dW = a0 * (
        djm[site] * jp[site + 1]
        + jm[site] * djp[site + 1]
        - djm[site + 1] * jp[site]
        - jm[site + 1] * djp[site]
    )
    lam_p, dlam_p, bp, dbp = _base_solution_dz(bg, z, "+")
    lam_m, dlam_m, bm, dbm = _base_solution_dz(bg, z, "-")
    N = bg.period
    qp0, dqp0 = _eval_floquet_dz(lam_p, dlam_p, bp, dbp, N, 0)
    qp1, dqp1 = _eval_floquet_dz(lam_p, dlam_p, bp, dbp, N, 1)
    qm0, dqm0 = _eval_floquet_dz(lam_m, dlam_m, bm, dbm, N, 0)
    qm1, dqm1 = _eval_floquet_dz(lam_m, dlam_m, bm, dbm, N, 1)
    aq0 = bg.a_at(0)
    Wq = aq0 * (qm0 * qp1 - qm1 * qp0)
    dWq = aq0 * (dqm0 * qp1 + qm0 * dqp1 - dqm1 * qp0 - qm1 * dqp0)
    al = W / Wq
    dal = (dW * Wq - W * dWq) / (Wq * Wq)
    return al, dal


def alpha_log_derivative_residual(p: Perturbation, z, n_max: int = 60) -> float:
    """Relative residual of d alpha/dz = -alpha * sum_n (G - G_q)(z, n, n).

    The diagonal sum runs over |n| <= n_max; its tail decays per period like
    |w(z)|^2, so the residual does too.
    """
    z = complex(z)
    al, dal = _alpha_with_derivative(p, z)
    if abs(al) < 1e-12:
        raise EigenvalueHit(f"z = {z:.12g} is numerically an eigenvalue of H")
    bg = p.background
    site = 0 if p.is_trivial else p.window[1] + 1
    lo = min(-n_max, site)
    hi = max(n_max + 1, site + 1)
    jp = jost(p, z, "+", (lo, hi)).values
    jm = jost(p, z, "-", (lo, hi)).values
    W = p.a_at(site) * (jm[site] * jp[site + 1] - jm[site + 1] * jp[site])
    lam_p, base_p, _ = _base_solution(bg, z, "+")
    lam_m, base_m, _ = _base_solution(bg, z, "-")
    N = bg.period
    Wq = wronskian_background(bg, z)
    total = 0.0 + 0.0j
    for n in range(-n_max, n_max + 1):
        Gnn = jm[n] * jp[n] / W
        Gqnn = (
            _eval_floquet(lam_m, base_m, N, n) * _eval_floquet(lam_p, base_p, N, n) / Wq
        )
        total += Gnn - Gqnn
    return float(abs(dal + al * total) / abs(dal))


@dataclass(frozen=True)
class ShiftProfile:
    """Extrapolated boundary values xi(lambda) on a structured grid.

    ``bands`` holds (lo, hi, nodes, weights, xi_at_nodes) per spectral band
    (Gauss-Legendre); ``plateaus`` holds (lo, hi, value) per maximal interval
    off the spectrum between consecutive eigenvalues, with the value snapped
    to the nearest integer when within 1e-3.
    """

    grid: np.ndarray
    xi: np.ndarray
    epsilon_used: float
    eigenvalue_steps: tuple
    bands: tuple
    plateaus: tuple
    lambda_min: float
    lambda_max: float

    def to_dict(self):
        return {
            "lambda": [float(x) for x in self.grid],
            "xi": [float(x) for x in self.xi],
            "epsilon_used": float(self.epsilon_used),
            "eigenvalue_steps": [[float(r), int(j)] for r, j in self.eigenvalue_steps],
            "plateaus": [[float(c), float(d), float(v)] for c, d, v in self.plateaus],
        }


def _neville_at_zero(xs, ys):
    """Polynomial extrapolation of (xs, ys) to x = 0."""
    xs = np.asarray(xs, dtype=float)
    tab = np.array(ys, dtype=float)
    m = len(xs)
    for level in range(1, m):
        for i in range(m - level):
            tab[i] = (xs[i + level] * tab[i] - xs[i] * tab[i + 1]) / (
                xs[i + level] - xs[i]
            )
    return tab[0]


def _track_branch(p: Perturbation, lams, eps: float, theta0_tol=1.5):
    """Unwrapped arg alpha(lambda + i eps) along the sorted sample list.

    Adjacent samples whose phase difference exceeds pi/2 are bridged by
    transient bisection; failure to bridge within depth 48 raises."""
    vals = np.array([alpha(p, complex(lam, eps)) for lam in lams])
    theta = np.empty(len(lams))
    theta[0] = np.angle(vals[0])
    if abs(theta[0]) > theta0_tol:
        raise BranchTrackingFailure(
            f"anchor phase {theta[0]:.3f} not near 0 below the spectrum"
        )

    def bridge(lam_a, th_a, lam_b, raw_b, depth=0):
        cand = raw_b + 2.0 * np.pi * np.round((th_a - raw_b) / (2.0 * np.pi))
        if abs(cand - th_a) <= 0.5 * np.pi:
            return cand
        if depth >= 48:
            raise BranchTrackingFailure(
                f"phase jump {cand - th_a:.3f} at lambda in [{lam_a:.9g}, {lam_b:.9g}]"
            )
        mid = 0.5 * (lam_a + lam_b)
        raw_mid = np.angle(alpha(p, complex(mid, eps)))
        th_mid = bridge(lam_a, th_a, mid, raw_mid, depth + 1)
        return bridge(mid, th_mid, lam_b, raw_b, depth + 1)

    for i in range(1, len(lams)):
        theta[i] = bridge(lams[i - 1], theta[i - 1], lams[i], np.angle(vals[i]))
    return theta


def _descend_branch(p: Perturbation, lams, eps: float, theta_prev):
    """Branch at a smaller eps, following each sample down from theta_prev.

    A ratio-2 descent moves the phase by well under pi/2 per step (the
    logarithmic derivative Im(i eps alpha'/alpha) is bounded by ~1), so the
    2 pi multiple is unambiguous."""
    theta = np.empty(len(lams))
    for i, lam in enumerate(lams):
        raw = np.angle(alpha(p, complex(lam, eps)))
        cand = raw + 2.0 * np.pi * np.round((theta_prev[i] - raw) / (2.0 * np.pi))
        if abs(cand - theta_prev[i]) > 2.0:
            raise BranchTrackingFailure(
                f"phase moved {cand - theta_prev[i]:.3f} between eps levels at "
                f"lambda = {lam:.9g}"
            )
        theta[i] = cand
    return theta


def _segment_samples(c, d, count, margin):
    """Interior samples of the off-spectrum segment (c, d)."""
    width = d - c
    m = min(margin, 0.25 * width)
    m = max(m, min(EDGE_EXCLUSION, 0.25 * width))
    return np.linspace(c + m, d - m, count)


def spectral_shift(
    p: Perturbation,
    lambda_grid=None,
    epsilons=DEFAULT_EPSILONS,
    band_nodes: int = 64,
    gap_samples: int = 33,
    pad: float = 1.0,
) -> ShiftProfile:
    """Spectral shift function xi(lambda) = lim arg alpha(lambda + i eps) / pi.

    The grid is Gauss-Legendre nodes per band plus interior samples of every
    off-spectrum segment (split at eigenvalues); pass ``lambda_grid`` to merge
    extra sample points in.  Jump signs at eigenvalues are measured from the
    tracked branch, not assumed.
    """
    epsilons = tuple(sorted((float(e) for e in epsilons), reverse=True))
    if len(epsilons) == 0 or epsilons[-1] <= 0.0:
        raise ValueError("epsilons must be positive")
    sd = band_edges(p.background)
    rhos = eigenvalues(p)
    lam_lo = min(sd.edges[0], min(rhos, default=sd.edges[0])) - pad
    lam_hi = max(sd.edges[-1], max(rhos, default=sd.edges[-1])) + pad
    # off-spectrum samples keep this distance from segment ends so that the
    # ladder subset below stays at least four deep there
    margin = max(0.0125, 20.0 * epsilons[-1])

    segments = []  # ("plateau", c, d) | ("band", lo, hi)
    breaks = [lam_lo]
    for j, (blo, bhi) in enumerate(sd.bands):
        segments += _split_plateau(breaks[-1], blo, rhos)
        segments.append(("band", blo, bhi))
        breaks.append(bhi)
    segments += _split_plateau(sd.edges[-1], lam_hi, rhos)

    samples = []  # (lambda, segment_index)
    band_quads = []
    for si, seg in enumerate(segments):
        kind, c, d = seg
        if kind == "band":
            x, wts = np.polynomial.legendre.leggauss(band_nodes)
            nodes = 0.5 * (d - c) * x + 0.5 * (c + d)
            weights = 0.5 * (d - c) * wts
            band_quads.append((si, c, d, nodes, weights))
            samples += [(lam, si) for lam in nodes]
        else:
            for lam in _segment_samples(c, d, gap_samples, margin):
                samples.append((lam, si))
    if lambda_grid is not None:
        extra_si = {}
        for lam in np.asarray(lambda_grid, dtype=float):
            si = _locate_segment(lam, segments)
            if si is not None:
                samples.append((lam, si))
    samples.sort()
    lams = np.array([s[0] for s in samples])
    seg_of = [s[1] for s in samples]
    if lams[0] > sd.edges[0] - 0.5 or lams[-1] < sd.edges[-1] + 0.5:
        raise ProfileIncomplete("grid does not cover the padded spectral interval")

    thetas = [_track_branch(p, lams, epsilons[0])]
    for eps in epsilons[1:]:
        thetas.append(_descend_branch(p, lams, eps, thetas[-1]))
    singular = np.concatenate([sd.edges, np.array(rhos, dtype=float)])
    theta0 = np.empty(len(lams))
    for i, lam in enumerate(lams):
        dist = np.min(np.abs(singular - lam))
        eligible = [k for k, eps in enumerate(epsilons) if eps < _EPS_RADIUS_FRACTION * dist]
        if len(eligible) < 2:
            eligible = [len(epsilons) - 2, len(epsilons) - 1]
        eligible = eligible[-5:]
        theta0[i] = _neville_at_zero(
            [epsilons[k] for k in eligible], [thetas[k][i] for k in eligible]
        )
    xi = theta0 / np.pi

    plateaus = []
    plateau_value = {}
    for si, seg in enumerate(segments):
        kind, c, d = seg
        if kind != "plateau":
            continue
        vals = xi[[i for i, s in enumerate(seg_of) if s == si]]
        if vals.size == 0:
            continue
        raw = float(np.median(vals))
        snapped = float(np.round(raw)) if abs(raw - np.round(raw)) < _PLATEAU_SNAP_TOL else raw
        plateaus.append((c, d, snapped))
        plateau_value[si] = snapped

    steps = []
    for rho in rhos:
        left = right = None
        for si, seg in enumerate(segments):
            if seg[0] == "plateau" and abs(seg[2] - rho) < 1e-12:
                left = plateau_value.get(si)
            if seg[0] == "plateau" and abs(seg[1] - rho) < 1e-12:
                right = plateau_value.get(si)
        if left is not None and right is not None:
            steps.append((float(rho), int(np.round(right - left))))

    bands_out = []
    for si, c, d, nodes, weights in band_quads:
        idx = [i for i, s in enumerate(seg_of) if s == si]
        node_xi = {lams[i]: xi[i] for i in idx}
        xi_nodes = np.array([node_xi[lam] for lam in nodes])
        bands_out.append((c, d, nodes, weights, xi_nodes))

    return ShiftProfile(
        grid=lams,
        xi=xi,
        epsilon_used=epsilons[-1],
        eigenvalue_steps=tuple(steps),
        bands=tuple(bands_out),
        plateaus=tuple(plateaus),
        lambda_min=float(lams[0]),
        lambda_max=float(lams[-1]),
    )


def _split_plateau(c, d, rhos):
    """Off-spectrum interval (c, d) split at the eigenvalues inside it."""
    if d - c <= 2.0 * EDGE_EXCLUSION:
        return []
    cuts = [c] + [r for r in rhos if c < r < d] + [d]
    return [("plateau", cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def _locate_segment(lam, segments):
    for si, (kind, c, d) in enumerate(segments):
        if c < lam < d:
            return si
    return None


def alpha_from_shift(p: Perturbation, profile: ShiftProfile, z) -> complex:
    """Herglotz reconstruction alpha(z) = (1/A) exp(integral xi/(lam - z)).

    Bands use the stored Gauss rules; integer plateaus contribute closed-form
    logarithms.  For real z inside a plateau the principal value plus the
    (-1)^k phase of the half residue is used.
    """
    z = complex(z)
    sd = band_edges(p.background)
    if profile.lambda_min > sd.edges[0] - 0.5 or profile.lambda_max < sd.edges[-1] + 0.5:
        raise ProfileIncomplete("profile does not cover the padded spectral interval")
    A = alpha_asymptotics(p).A
    total = 0.0 + 0.0j
    for c, d, nodes, weights, xi_nodes in profile.bands:
        total += np.sum(weights * xi_nodes / (nodes - z))
    sign = 1.0
    for c, d, value in profile.plateaus:
        if z.imag == 0.0 and c < z.real < d:
            x = z.real
            total += value * (np.log(abs(d - x)) - np.log(abs(x - c)))
            sign *= (-1.0) ** int(np.round(value))
        else:
            total += value * (np.log(d - z) - np.log(c - z))
    return sign * np.exp(total) / A


def trace_direct(p: Perturbation, j: int) -> float:
    """tau_j = tr(H^j - H_q^j) from truncations wide enough to cancel exactly.

    Sites farther than j from the window contribute identical diagonal
    entries to both truncated powers, so the finite trace difference is exact.
    """
    if p.is_trivial:
        return 0.0
    if j < 1:
        raise ValueError("order must be >= 1")
    w_lo, w_hi = p.window
    lo, hi = w_lo - 2 * j - 2, w_hi + 2 * j + 2
    sites = range(lo, hi + 1)
    k = hi - lo + 1
    H = np.zeros((k, k))
    Hq = np.zeros((k, k))
    for i, n in enumerate(sites):
        H[i, i] = p.b_at(n)
        Hq[i, i] = p.background.b_at(n)
        if i + 1 < k:
            H[i, i + 1] = H[i + 1, i] = p.a_at(n)
            Hq[i, i + 1] = Hq[i + 1, i] = p.background.a_at(n)
    Hj = np.linalg.matrix_power(H, j)
    Hqj = np.linalg.matrix_power(Hq, j)
    return float(np.trace(Hj) - np.trace(Hqj))


def alpha_expansion(p: Perturbation, orders: int, radius: float | None = None):
    """Laurent coefficients alpha_1..alpha_orders of A*alpha(z) = sum alpha_j z^-j.

    Trapezoid rule on |z| = radius (256 angles, spectrally accurate); the
    default radius is twice the Gershgorin bound of the pair (H, H_q).
    """
    lo, hi = p.gershgorin_interval()
    pad = 0.5
    reach = max(abs(lo - pad), abs(hi + pad))
    if radius is None:
        radius = 2.0 * max(abs(lo), abs(hi))
    if radius <= reach:
        raise RadiusTooSmall(
            f"radius {radius:.6g} intersects the padded spectral interval "
            f"[{lo - pad:.6g}, {hi + pad:.6g}]"
        )
    A = alpha_asymptotics(p).A
    M = 256
    theta = 2.0 * np.pi * np.arange(M) / M
    zs = radius * np.exp(1j * theta)
    vals = np.array([A * alpha(p, z) for z in zs])
    coeffs = np.empty(orders)
    for j in range(1, orders + 1):
        cj = np.mean(vals * np.exp(1j * j * theta)) * radius**j
        coeffs[j - 1] = cj.real
    return coeffs


def tau_from_recursion(alphas) -> np.ndarray:
    """tau_j from Laurent coefficients: tau_j = -j alpha_j - sum_{k<j} alpha_{j-k} tau_k."""
    alphas = np.asarray(alphas, dtype=float)
    taus = np.empty(len(alphas))
    for j in range(1, len(alphas) + 1):
        acc = -j * alphas[j - 1]
        for k in range(1, j):
            acc -= alphas[j - k - 1] * taus[k - 1]
        taus[j - 1] = acc
    return taus


def trace_via_shift(profile: ShiftProfile, j: int) -> float:
    """tau_j = j * integral lambda^{j-1} xi(lambda) d lambda."""
    if j < 1:
        raise ValueError("order must be >= 1")
    total = 0.0
    for c, d, nodes, weights, xi_nodes in profile.bands:
        total += float(np.sum(weights * j * nodes ** (j - 1) * xi_nodes))
    for c, d, value in profile.plateaus:
        total += value * (d**j - c**j)
    return total


@dataclass(frozen=True)
class TraceReport:
    taus: np.ndarray
    method: str
    orders: int

    def to_dict(self):
        return {
            "method": self.method,
            "orders": int(self.orders),
            "taus": [float(x) for x in self.taus],
        }


def trace_reports(
    p: Perturbation,
    orders: int = 8,
    moment_orders: int = 4,
    profile: ShiftProfile | None = None,
):
    """The three tau routes side by side (moment route up to moment_orders)."""
    direct = np.array([trace_direct(p, j) for j in range(1, orders + 1)])
    recursion = tau_from_recursion(alpha_expansion(p, orders))
    if profile is None:
        profile = spectral_shift(p)
    moment = np.array([trace_via_shift(profile, j) for j in range(1, moment_orders + 1)])
    return {
        "direct": TraceReport(direct, "direct", orders),
        "recursion": TraceReport(recursion, "recursion", orders),
        "moment": TraceReport(moment, "moment", moment_orders),
    }
