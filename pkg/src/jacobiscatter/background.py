"""Periodic Jacobi backgrounds: band structure, Floquet solutions, Green's function.

The unperturbed operator acts on two-sided complex sequences as

    (H_q f)(n) = a_q(n) f(n+1) + a_q(n-1) f(n-1) + b_q(n) f(n)

with real N-periodic coefficients, a_q > 0.  Everything here is driven by the
one-period transfer-matrix product M(z) ("monodromy") in the plain
normalization mapping (psi(n), psi(n-1)) to (psi(n+1), psi(n)), so that

    T(n) = [[(z - b_q(n))/a_q(n), -a_q(n-1)/a_q(n)], [1, 0]]

and det M(z) = 1 after one full period.  The discriminant Delta(z) = tr M(z)
is a degree-N polynomial with leading coefficient 1/prod(a_q); the spectrum is
the union of the bands where |Delta| <= 2.

Conventions used throughout:
  * w(z) is the per-period Floquet multiplier, i.e. the root of
    w^2 - Delta(z) w + 1 = 0 with |w| < 1 off the spectrum.  On band
    interiors the branch is the boundary value from the upper half plane.
  * The Floquet (Baker-Akhiezer style) solutions psi_{q,±} are normalized by
    psi_{q,±}(z, 0) = 1 and satisfy psi_{q,±}(z, n + N) = w(z)^{±1} psi_{q,±}(z, n).
  * Dirichlet divisor points mu_j sit in the gap closures and are the real
    zeros of the upper-right monodromy entry (the poles of the background
    Wronskian in the normalization above).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev

from .errors import BandEdge, DegenerateEigenvector, RootFindingFailure

MAX_PERIOD = 16

# z-grids supplied by callers must keep this distance from every band edge.
EDGE_EXCLUSION = 1e-6
# gaps narrower than this are treated as closed and removed
CLOSED_GAP_TOL = 1e-9
# |Delta -+ 2| below this means we are sitting on a band edge
_DEGENERACY_TOL = 1e-11


@dataclass(frozen=True)
class BackgroundOperator:
    """N-periodic Jacobi coefficients.  a and b are one period, index 0 first."""

    period: int
    a: tuple
    b: tuple

    def __post_init__(self):
        if not (1 <= self.period <= MAX_PERIOD):
            raise ValueError(f"period must be in [1, {MAX_PERIOD}], got {self.period}")
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        if len(a) != self.period or len(b) != self.period:
            raise ValueError("coefficient arrays must have length == period")
        if any(x <= 0.0 for x in a):
            raise ValueError("off-diagonal coefficients must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def a_at(self, n: int) -> float:
        return self.a[n % self.period]

    def b_at(self, n: int) -> float:
        return self.b[n % self.period]

    def gershgorin_interval(self):
        amax = max(self.a)
        return min(self.b) - 2.0 * amax, max(self.b) + 2.0 * amax


def constant_background(a: float = 0.5, b: float = 0.0) -> BackgroundOperator:
    return BackgroundOperator(1, (a,), (b,))


@dataclass(frozen=True)
class SpectralData:
    """Band edges (sorted, closed gaps removed), genus and Dirichlet divisor."""

    edges: np.ndarray
    genus: int
    dirichlet: np.ndarray
    bands: tuple

    @property
    def gaps(self):
        e = self.edges
        return tuple((e[2 * j + 1], e[2 * j + 2]) for j in range(self.genus))

    def to_dict(self):
        return {
            "edges": [float(x) for x in self.edges],
            "genus": int(self.genus),
            "dirichlet": [float(x) for x in self.dirichlet],
        }


@dataclass(frozen=True)
class FloquetSolution:
    """Values of psi_{q,side} on a window, with the per-period multiplier w."""

    side: str
    z: complex
    multiplier: complex
    values: dict


def transfer_matrix(bg: BackgroundOperator, z, n: int):
    """One-step transfer matrix at site n, state (psi(n), psi(n-1)).

    det == a_q(n-1)/a_q(n); the product over a full period has det 1.
    """
    an = bg.a_at(n)
    return np.array(
        [[(z - bg.b_at(n)) / an, -bg.a_at(n - 1) / an], [1.0, 0.0]],
        dtype=complex if isinstance(z, complex) else float,
    )


def monodromy(bg: BackgroundOperator, z):
    """Transfer-matrix product over one period starting at site 0."""
    M = np.eye(2, dtype=complex if isinstance(z, complex) else float)
    for n in range(bg.period):
        M = transfer_matrix(bg, z, n) @ M
    return M


def _monodromy_with_derivative(bg: BackgroundOperator, z):
    """(M(z), dM/dz) via the product rule; dT(n)/dz = [[1/a_q(n), 0], [0, 0]]."""
    dtype = complex if isinstance(z, complex) else float
    M = np.eye(2, dtype=dtype)
    dM = np.zeros((2, 2), dtype=dtype)
    for n in range(bg.period):
        T = transfer_matrix(bg, z, n)
        dT = np.zeros((2, 2), dtype=dtype)
        dT[0, 0] = 1.0 / bg.a_at(n)
        dM = T @ dM + dT @ M
        M = T @ M
    return M, dM


def discriminant(bg: BackgroundOperator, z):
    M = monodromy(bg, z)
    return M[0, 0] + M[1, 1]


def discriminant_derivative(bg: BackgroundOperator, z):
    M, dM = _monodromy_with_derivative(bg, z)
    return dM[0, 0] + dM[1, 1]


def _newton_polish(f_and_df, x0, maxit=60, tol=1e-14):
    x = x0
    fx, dfx = f_and_df(x)
    for _ in range(maxit):
        if dfx == 0.0:
            break
        step = fx / dfx
        x_new = x - step
        f_new, df_new = f_and_df(x_new)
        if abs(f_new) > abs(fx) and abs(step) < tol * max(1.0, abs(x)):
            break
        x, fx, dfx = x_new, f_new, df_new
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            break
    return x


def _discriminant_poly_roots(bg: BackgroundOperator, offset: float):
    """Real roots of Delta(x) + offset, via Chebyshev interpolation + polish."""
    lo, hi = bg.gershgorin_interval()
    lo, hi = lo - 0.5, hi + 0.5
    N = bg.period

    def delta_vec(xs):
        return np.array([discriminant(bg, float(x)) for x in np.atleast_1d(xs)])

    cheb = Chebyshev.interpolate(delta_vec, N, domain=[lo, hi]) + offset
    raw = cheb.roots()
    roots = []
    for r in raw:
        if abs(r.imag) > 1e-6:
            continue
        x = float(r.real)

        def f_and_df(x):
            return discriminant(bg, x) + offset, discriminant_derivative(bg, x)

        roots.append(_newton_polish(f_and_df, x))
    return sorted(roots)


def band_edges(bg: BackgroundOperator, with_dirichlet: bool = True) -> SpectralData:
    """Band edges as the real roots of Delta(z) -+ 2, closed gaps removed.

    All 2N roots (with multiplicity) are real for a real periodic Jacobi
    operator; a closed gap shows up as a pair of coincident interior edges
    (separation below CLOSED_GAP_TOL) and is dropped, merging the bands.
    """
    N = bg.period
    roots = _discriminant_poly_roots(bg, -2.0) + _discriminant_poly_roots(bg, 2.0)
    if len(roots) != 2 * N:
        raise RootFindingFailure(
            f"expected {2 * N} real discriminant roots, found {len(roots)}"
        )
    roots = sorted(roots)
    bands = [(roots[2 * k], roots[2 * k + 1]) for k in range(N)]
    merged = [list(bands[0])]
    for lo, hi in bands[1:]:
        if lo - merged[-1][1] < CLOSED_GAP_TOL:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    edges = np.array([x for band in merged for x in band])
    genus = len(merged) - 1
    # sanity: |Delta| <= 2 on band midpoints, > 2 on gap midpoints
    for lo, hi in merged:
        if abs(discriminant(bg, 0.5 * (lo + hi))) > 2.0 + 1e-8:
            raise RootFindingFailure("band midpoint fails |Delta| <= 2")
    for j in range(genus):
        mid = 0.5 * (edges[2 * j + 1] + edges[2 * j + 2])
        if abs(discriminant(bg, mid)) <= 2.0:
            raise RootFindingFailure("gap midpoint fails |Delta| > 2")
    data = SpectralData(edges, genus, np.array([]), tuple(tuple(b) for b in merged))
    if with_dirichlet and genus > 0:
        mu = dirichlet_eigenvalues(bg, data)
        data = SpectralData(edges, genus, mu, data.bands)
    return data


def dirichlet_eigenvalues(bg: BackgroundOperator, spectral: SpectralData | None = None):
    """Dirichlet divisor at base point 0: one real zero of M_{12} per open gap.

    The zeros are extracted from the Chebyshev interpolant of the degree N-1
    polynomial M_{12}(x) and Newton-polished; a zero may sit exactly on a gap
    edge (it does for the symmetric b-modulated period-2 background), which is
    why this does not bisect on the open gap.
    """
    if spectral is None:
        spectral = band_edges(bg, with_dirichlet=False)
    if spectral.genus == 0:
        return np.array([])
    lo, hi = bg.gershgorin_interval()
    lo, hi = lo - 0.5, hi + 0.5
    deg = max(bg.period - 1, 1)

    def m12_vec(xs):
        return np.array([monodromy(bg, float(x))[0, 1] for x in np.atleast_1d(xs)])

    cheb = Chebyshev.interpolate(m12_vec, deg, domain=[lo, hi])
    raw = [r for r in cheb.roots() if abs(r.imag) < 1e-6]

    def f_and_df(x):
        M, dM = _monodromy_with_derivative(bg, x)
        return M[0, 1], dM[0, 1]

    roots = sorted(_newton_polish(f_and_df, float(r.real)) for r in raw)
    mu = []
    pad = 1e-7
    for gl, gr in spectral.gaps:
        inside = [r for r in roots if gl - pad <= r <= gr + pad]
        if len(inside) != 1:
            raise RootFindingFailure(
                f"gap [{gl:.6g}, {gr:.6g}]: expected one Dirichlet point, "
                f"found {len(inside)} (numerically closed gap?)"
            )
        mu.append(min(max(inside[0], gl), gr))
    return np.array(mu)


def floquet_multiplier(bg: BackgroundOperator, z) -> complex:
    """Floquet multiplier w(z): root of w^2 - Delta w + 1 = 0 with |w| < 1.

    On open band interiors (real z, |Delta| < 2) both roots are unimodular and
    the branch is fixed by continuity from Im z > 0, which picks
    w = (Delta - i sign(Delta') sqrt(4 - Delta^2)) / 2.
    """
    z = complex(z)
    Delta = discriminant(bg, z)
    if min(abs(Delta - 2.0), abs(Delta + 2.0)) < _DEGENERACY_TOL:
        raise BandEdge(f"z = {z:.12g} is numerically at a band edge")
    if z.imag == 0.0 and abs(Delta.real) < 2.0 and abs(Delta.imag) < 1e-14:
        d = Delta.real
        dprime = discriminant_derivative(bg, z.real).real
        return complex(d, -np.sign(dprime) * np.sqrt(4.0 - d * d)) / 2.0
    s = np.sqrt(Delta * Delta - 4.0)
    big = (Delta + s) / 2.0
    alt = (Delta - s) / 2.0
    if abs(alt) > abs(big):
        big = alt
    return 1.0 / big


def _base_solution(bg: BackgroundOperator, z, side: str):
    """(lam, psi) with psi the base-period values psi(0..N-1) of psi_{q,side}
    and lam = psi(n+N)/psi(n) (= w for side '+', 1/w for side '-')."""
    z = complex(z)
    w = floquet_multiplier(bg, z)
    lam = w if side == "+" else 1.0 / w
    M = monodromy(bg, z)
    # eigenvector of M for eigenvalue lam; take the better-conditioned formula
    v_a = np.array([M[0, 1], lam - M[0, 0]])
    v_b = np.array([lam - M[1, 1], M[1, 0]])
    v = v_a if np.abs(v_a).sum() >= np.abs(v_b).sum() else v_b
    if np.abs(v).sum() == 0.0:
        raise DegenerateEigenvector(f"monodromy eigenvector vanished at z = {z:.12g}")
    if v[0] == 0.0:
        raise DegenerateEigenvector(
            f"psi(0) = 0 at z = {z:.12g}: Dirichlet divisor point hit exactly"
        )
    psi_m1 = v[1] / v[0]
    N = bg.period
    psi = np.empty(N + 1, dtype=complex)
    psi[0] = 1.0
    psi[1] = ((z - bg.b_at(0)) - bg.a_at(-1) * psi_m1) / bg.a_at(0) if N >= 1 else 0.0
    for n in range(1, N):
        psi[n + 1] = ((z - bg.b_at(n)) * psi[n] - bg.a_at(n - 1) * psi[n - 1]) / bg.a_at(n)
    return lam, psi[:N], w


def _eval_floquet(lam, base, period: int, n: int) -> complex:
    q, r = divmod(n, period)
    return lam**q * base[r]


def baker_akhiezer(bg: BackgroundOperator, z, side: str, window) -> FloquetSolution:
    """psi_{q,±}(z, n) for n in window = (n_lo, n_hi), inclusive.

    Values on the base period come from the monodromy eigenvector pushed by
    transfer matrices; everything else is exact Floquet scaling by powers of
    the multiplier, so no long unstable recurrences occur.
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    n_lo, n_hi = int(window[0]), int(window[1])
    lam, base, w = _base_solution(bg, z, side)
    values = {n: _eval_floquet(lam, base, bg.period, n) for n in range(n_lo, n_hi + 1)}
    return FloquetSolution(side, complex(z), w, values)


def _base_solution_dz(bg: BackgroundOperator, z, side: str):
    """Base solution together with its z-derivative.

    Returns (lam, dlam, psi, dpsi) with psi/dpsi over the base period.  The
    eigenvector derivative differentiates the normalized component
    psi(-1) = (lam - M11)/M12 = M21/(lam - M22) on whichever branch is better
    conditioned; both agree since lam is an eigenvalue.
    """
    z = complex(z)
    w = floquet_multiplier(bg, z)
    M, dM = _monodromy_with_derivative(bg, z)
    Delta = M[0, 0] + M[1, 1]
    dDelta = dM[0, 0] + dM[1, 1]
    dw = dDelta * w / (2.0 * w - Delta)
    if side == "+":
        lam, dlam = w, dw
    else:
        lam, dlam = 1.0 / w, -dw / (w * w)
    den_a, den_b = M[0, 1], lam - M[1, 1]
    if abs(den_a) >= abs(den_b):
        psi_m1 = (lam - M[0, 0]) / den_a
        dpsi_m1 = ((dlam - dM[0, 0]) * den_a - (lam - M[0, 0]) * dM[0, 1]) / den_a**2
    else:
        psi_m1 = M[1, 0] / den_b
        dpsi_m1 = (dM[1, 0] * den_b - M[1, 0] * (dlam - dM[1, 1])) / den_b**2
    N = bg.period
    psi = np.empty(N + 1, dtype=complex)
    dpsi = np.empty(N + 1, dtype=complex)
    psi[0], dpsi[0] = 1.0, 0.0
    psi[1] = ((z - bg.b_at(0)) - bg.a_at(-1) * psi_m1) / bg.a_at(0)
    dpsi[1] = (1.0 - bg.a_at(-1) * dpsi_m1) / bg.a_at(0)
    for n in range(1, N):
        an, am1, bn = bg.a_at(n), bg.a_at(n - 1), bg.b_at(n)
        psi[n + 1] = ((z - bn) * psi[n] - am1 * psi[n - 1]) / an
        dpsi[n + 1] = (psi[n] + (z - bn) * dpsi[n] - am1 * dpsi[n - 1]) / an
    return lam, dlam, psi[:N], dpsi[:N]


def _eval_floquet_dz(lam, dlam, base, dbase, period: int, n: int):
    q, r = divmod(n, period)
    val = lam**q * base[r]
    dval = lam**q * dbase[r]
    if q != 0:
        dval += q * lam ** (q - 1) * dlam * base[r]
    return val, dval


def wronskian_background(bg: BackgroundOperator, z, site: int = 0) -> complex:
    """W_q(z) = a_q(n) (psi_- (n) psi_+(n+1) - psi_-(n+1) psi_+(n)), site-free."""
    lam_p, base_p, _ = _base_solution(bg, z, "+")
    lam_m, base_m, _ = _base_solution(bg, z, "-")
    N = bg.period
    pp = _eval_floquet(lam_p, base_p, N, site)
    pp1 = _eval_floquet(lam_p, base_p, N, site + 1)
    mm = _eval_floquet(lam_m, base_m, N, site)
    mm1 = _eval_floquet(lam_m, base_m, N, site + 1)
    return bg.a_at(site) * (mm * pp1 - mm1 * pp)


def green_background(bg: BackgroundOperator, z, m: int, n: int) -> complex:
    """G_q(z, m, n) = psi_{q,-}(min) psi_{q,+}(max) / W_q."""
    i, j = (m, n) if m <= n else (n, m)
    lam_p, base_p, _ = _base_solution(bg, z, "+")
    lam_m, base_m, _ = _base_solution(bg, z, "-")
    N = bg.period
    W = bg.a_at(0) * (
        _eval_floquet(lam_m, base_m, N, 0) * _eval_floquet(lam_p, base_p, N, 1)
        - _eval_floquet(lam_m, base_m, N, 1) * _eval_floquet(lam_p, base_p, N, 0)
    )
    return _eval_floquet(lam_m, base_m, N, i) * _eval_floquet(lam_p, base_p, N, j) / W
