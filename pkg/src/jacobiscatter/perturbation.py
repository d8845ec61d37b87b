"""Compactly supported perturbations: Jost solutions, transmission coefficient alpha.

The perturbed operator H shares the background coefficients outside a finite
window [n_minus, n_plus].  The Jost solutions psi_± are the solutions of
H psi = z psi that agree exactly with the background Floquet solutions
psi_{q,±} beyond the support (for n >= n_plus + 1 on the + side, n <= n_minus - 1
on the - side) and are extended through the window by the three-term
recurrence, which runs in the stable (growing) direction for each side.

alpha(z) = W(psi_-, psi_+) / W_q(psi_{q,-}, psi_{q,+}) is holomorphic off the
spectrum of H_q, real on the real axis off the bands, has exactly the
eigenvalues of H as its (simple) zeros there, and obeys

    A * alpha(z) = 1 + B/z + O(1/z^2),   z -> infinity,

with A and B the finite products/sums over the window computed by
``alpha_asymptotics``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .background import (
    BackgroundOperator,
    _base_solution,
    _base_solution_dz,
    _eval_floquet,
    _eval_floquet_dz,
    band_edges,
    wronskian_background,
    EDGE_EXCLUSION,
)
from .errors import ConvergenceFailure, EigenvalueHit

# how far outside the bands an eigenvalue search / truncation comparison looks
_EIGEN_SCAN_RES = 1e-3


@dataclass(frozen=True)
class Perturbation:
    """Coefficients on a finite window; equal to the background elsewhere.

    a[k], b[k] hold the values at site window[0] + k; a(n) couples sites n and
    n+1.  An empty window (window[1] < window[0]) is the trivial perturbation.
    """

    background: BackgroundOperator
    window: tuple
    a: tuple
    b: tuple

    def __post_init__(self):
        n_lo, n_hi = int(self.window[0]), int(self.window[1])
        object.__setattr__(self, "window", (n_lo, n_hi))
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        size = max(n_hi - n_lo + 1, 0)
        if len(a) != size or len(b) != size:
            raise ValueError(f"window holds {size} sites, got {len(a)}/{len(b)} values")
        if any(x <= 0.0 for x in a):
            raise ValueError("off-diagonal coefficients must stay positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def is_trivial(self) -> bool:
        return self.window[1] < self.window[0]

    def a_at(self, n: int) -> float:
        if self.window[0] <= n <= self.window[1]:
            return self.a[n - self.window[0]]
        return self.background.a_at(n)

    def b_at(self, n: int) -> float:
        if self.window[0] <= n <= self.window[1]:
            return self.b[n - self.window[0]]
        return self.background.b_at(n)

    def gershgorin_interval(self):
        lo_q, hi_q = self.background.gershgorin_interval()
        if self.is_trivial:
            return lo_q, hi_q
        amax = max(max(self.a), max(self.background.a))
        lo = min(min(self.b), min(self.background.b)) - 2.0 * amax
        hi = max(max(self.b), max(self.background.b)) + 2.0 * amax
        return min(lo, lo_q), max(hi, hi_q)


def trivial_perturbation(bg: BackgroundOperator) -> Perturbation:
    return Perturbation(bg, (0, -1), (), ())


@dataclass(frozen=True)
class JostSolution:
    side: str
    z: complex
    values: dict


def jost(p: Perturbation, z, side: str, window) -> JostSolution:
    """Jost solution values on window = (n_lo, n_hi), inclusive.

    Beyond the support the values are the background Floquet values exactly;
    through the window they come from the recurrence, entered from the
    matching side.
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    z = complex(z)
    bg = p.background
    n_lo, n_hi = int(window[0]), int(window[1])
    lam, base, _ = _base_solution(bg, z, side)
    N = bg.period
    values = {}
    if p.is_trivial:
        for n in range(n_lo, n_hi + 1):
            values[n] = _eval_floquet(lam, base, N, n)
        return JostSolution(side, z, values)
    w_lo, w_hi = p.window
    if side == "+":
        start = max(n_lo, w_hi + 1)
        for n in range(start, n_hi + 1):
            values[n] = _eval_floquet(lam, base, N, n)
        # seeds just beyond the support, then walk left through the window
        psi_hi1 = _eval_floquet(lam, base, N, w_hi + 1)
        psi_hi2 = _eval_floquet(lam, base, N, w_hi + 2)
        cur, nxt = psi_hi1, psi_hi2
        for n in range(w_hi + 1, n_lo, -1):
            prev = ((z - p.b_at(n)) * cur - p.a_at(n) * nxt) / p.a_at(n - 1)
            nxt, cur = cur, prev
            if n_lo <= n - 1 <= n_hi:
                values[n - 1] = prev
    else:
        stop = min(n_hi, w_lo - 1)
        for n in range(n_lo, stop + 1):
            values[n] = _eval_floquet(lam, base, N, n)
        psi_lo1 = _eval_floquet(lam, base, N, w_lo - 1)
        psi_lo2 = _eval_floquet(lam, base, N, w_lo - 2)
        cur, prev = psi_lo1, psi_lo2
        for n in range(w_lo - 1, n_hi):
            nxt = ((z - p.b_at(n)) * cur - p.a_at(n - 1) * prev) / p.a_at(n)
            prev, cur = cur, nxt
            if n_lo <= n + 1 <= n_hi:
                values[n + 1] = nxt
    return JostSolution(side, z, values)


def jost_z_derivative(p: Perturbation, z, side: str, window) -> dict:
    """d psi_±/dz on the window, by the differentiated recurrence.

    Seeds are the differentiated background Floquet values (eigenvector and
    multiplier derivatives from the differentiated monodromy).
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    z = complex(z)
    bg = p.background
    n_lo, n_hi = int(window[0]), int(window[1])
    lam, dlam, base, dbase = _base_solution_dz(bg, z, side)
    N = bg.period
    out = {}
    if p.is_trivial:
        for n in range(n_lo, n_hi + 1):
            out[n] = _eval_floquet_dz(lam, dlam, base, dbase, N, n)[1]
        return out
    w_lo, w_hi = p.window
    if side == "+":
        for n in range(max(n_lo, w_hi + 1), n_hi + 1):
            out[n] = _eval_floquet_dz(lam, dlam, base, dbase, N, n)[1]
        cur, dcur = _eval_floquet_dz(lam, dlam, base, dbase, N, w_hi + 1)
        nxt, dnxt = _eval_floquet_dz(lam, dlam, base, dbase, N, w_hi + 2)
        for n in range(w_hi + 1, n_lo, -1):
            am1, an, bn = p.a_at(n - 1), p.a_at(n), p.b_at(n)
            prev = ((z - bn) * cur - an * nxt) / am1
            dprev = (cur + (z - bn) * dcur - an * dnxt) / am1
            nxt, cur, dnxt, dcur = cur, prev, dcur, dprev
            if n_lo <= n - 1 <= n_hi:
                out[n - 1] = dprev
    else:
        for n in range(n_lo, min(n_hi, w_lo - 1) + 1):
            out[n] = _eval_floquet_dz(lam, dlam, base, dbase, N, n)[1]
        cur, dcur = _eval_floquet_dz(lam, dlam, base, dbase, N, w_lo - 1)
        prev, dprev = _eval_floquet_dz(lam, dlam, base, dbase, N, w_lo - 2)
        for n in range(w_lo - 1, n_hi):
            am1, an, bn = p.a_at(n - 1), p.a_at(n), p.b_at(n)
            nxt = ((z - bn) * cur - am1 * prev) / an
            dnxt = (cur + (z - bn) * dcur - am1 * dprev) / an
            prev, cur, dprev, dcur = cur, nxt, dcur, dnxt
            if n_lo <= n + 1 <= n_hi:
                out[n + 1] = dnxt
    return out


def wronskian(p: Perturbation, z, site: int | None = None) -> complex:
    """W(z) = a(n) (psi_-(n) psi_+(n+1) - psi_-(n+1) psi_+(n)); site-independent."""
    if site is None:
        site = 0 if p.is_trivial else p.window[1] + 1
    jp = jost(p, z, "+", (site, site + 1)).values
    jm = jost(p, z, "-", (site, site + 1)).values
    return p.a_at(site) * (jm[site] * jp[site + 1] - jm[site + 1] * jp[site])


def alpha(p: Perturbation, z) -> complex:
    """Transmission coefficient alpha(z) = W(z) / W_q(z)."""
    return wronskian(p, z) / wronskian_background(p.background, z)


@dataclass(frozen=True)
class Asymptotics:
    """Finite products/sums controlling alpha at infinity."""

    A: float
    B: float
    p: Perturbation

    def A_plus(self, n: int) -> float:
        w_lo, w_hi = self.p.window
        out = 1.0
        for j in range(max(n, w_lo), w_hi + 1):
            out *= self.p.a_at(j) / self.p.background.a_at(j)
        return out

    def A_minus(self, n: int) -> float:
        w_lo, w_hi = self.p.window
        out = 1.0
        for j in range(w_lo, min(n - 1, w_hi) + 1):
            out *= self.p.a_at(j) / self.p.background.a_at(j)
        return out

    def B_plus(self, n: int) -> float:
        w_lo, w_hi = self.p.window
        return sum(
            self.p.background.b_at(m) - self.p.b_at(m)
            for m in range(max(n + 1, w_lo), w_hi + 1)
        )

    def B_minus(self, n: int) -> float:
        w_lo, w_hi = self.p.window
        return sum(
            self.p.background.b_at(m) - self.p.b_at(m)
            for m in range(w_lo, min(n - 1, w_hi) + 1)
        )


def alpha_asymptotics(p: Perturbation) -> Asymptotics:
    """A = A_-(0) A_+(0), B = B_-(1) + B_+(0): A alpha(z) = 1 + B/z + O(z^-2)."""
    asym = Asymptotics(1.0, 0.0, p)
    A = asym.A_minus(0) * asym.A_plus(0)
    B = asym.B_minus(1) + asym.B_plus(0)
    return Asymptotics(A, B, p)


def green(p: Perturbation, z, m: int, n: int) -> complex:
    """G(z, m, n) = psi_-(min) psi_+(max) / W(z)."""
    if abs(alpha(p, z)) < 1e-12:
        raise EigenvalueHit(f"z = {z:.12g} is numerically an eigenvalue of H")
    i, j = (m, n) if m <= n else (n, m)
    site = 0 if p.is_trivial else p.window[1] + 1
    lo = min(i, site)
    hi = max(j, site + 1)
    jp = jost(p, z, "+", (lo, hi)).values
    jm = jost(p, z, "-", (lo, hi)).values
    W = p.a_at(site) * (jm[site] * jp[site + 1] - jm[site + 1] * jp[site])
    return jm[i] * jp[j] / W


def _real_alpha(p: Perturbation, x: float) -> float:
    val = alpha(p, complex(x, 0.0))
    return val.real


def _scan_interval(p, lo, hi, base_res):
    """Sample points in (lo, hi) with extra resolution packed near both ends."""
    if hi - lo <= 4.0 * EDGE_EXCLUSION:
        return np.array([])
    n = max(int(np.ceil((hi - lo) / base_res)), 8)
    n = min(n, 4000)
    pts = list(np.linspace(lo, hi, n))
    graded = []
    step = (hi - lo) / n
    d = step / 2.0
    while d > EDGE_EXCLUSION:
        graded += [lo + d, hi - d]
        d /= 2.0
    return np.array(sorted(pts + graded))


@lru_cache(maxsize=128)
def eigenvalues(p: Perturbation) -> tuple:
    """Real eigenvalues of H outside the bands, as the zeros of alpha.

    Scans below, between and above the bands with a sign-change search of
    resolution ~1e-3 refined geometrically toward the band edges (zeros inside
    the edge exclusion zones are not searched for), then brentq.
    """
    if p.is_trivial:
        return ()
    sd = band_edges(p.background)
    g_lo, g_hi = p.gershgorin_interval()
    regions = [(min(g_lo, sd.edges[0]) - 1.0, sd.edges[0] - EDGE_EXCLUSION)]
    for gl, gr in sd.gaps:
        regions.append((gl + EDGE_EXCLUSION, gr - EDGE_EXCLUSION))
    regions.append((sd.edges[-1] + EDGE_EXCLUSION, max(g_hi, sd.edges[-1]) + 1.0))
    roots = []
    for lo, hi in regions:
        pts = _scan_interval(p, lo, hi, _EIGEN_SCAN_RES)
        if pts.size == 0:
            continue
        vals = np.array([_real_alpha(p, x) for x in pts])
        sign = np.sign(vals)
        for k in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            try:
                root = brentq(
                    lambda x: _real_alpha(p, x), pts[k], pts[k + 1], xtol=1e-14, rtol=1e-15
                )
            except Exception as exc:  # pragma: no cover
                raise ConvergenceFailure(f"brentq failed on [{pts[k]}, {pts[k+1]}]") from exc
            roots.append(float(root))
    return tuple(sorted(roots))


@dataclass(frozen=True)
class ScatteringFunction:
    """alpha together with its asymptotic data and the point spectrum."""

    alpha: object
    A: float
    B: float
    A_plus: object
    A_minus: object
    B_plus: object
    B_minus: object
    eigenvalues: tuple


def scattering_function(p: Perturbation) -> ScatteringFunction:
    asym = alpha_asymptotics(p)
    return ScatteringFunction(
        alpha=lambda z: alpha(p, z),
        A=asym.A,
        B=asym.B,
        A_plus=asym.A_plus,
        A_minus=asym.A_minus,
        B_plus=asym.B_plus,
        B_minus=asym.B_minus,
        eigenvalues=eigenvalues(p),
    )
