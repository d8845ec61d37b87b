"""Lowest Toda flow and its conserved scattering quantities.

Flaschka form of the lowest flow:

    a'(n) = a(n) (b(n+1) - b(n)),      b'(n) = 2 (a(n)^2 - a(n-1)^2).

The background evolves by the same equations with periodic closure; the
perturbed coefficients evolve on an adaptively padded window whose boundary
values are closed with the current background.  Time stepping is classical
fixed-step RK4 on the coupled system -- deliberately not a symplectic or
conservative scheme, so that the observed invariance of A, tau_j and alpha is
a statement about the flow, not about the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundOperator
from .errors import PositivityLoss, WindowOverflow
from .perturbation import Perturbation, alpha_asymptotics
from .krein import trace_direct

_BOUNDARY_TOL = 1e-14


@dataclass(frozen=True)
class TodaState:
    time: float
    perturbation: Perturbation
    background: BackgroundOperator


def toda_vector_field(state: TodaState):
    """(da, db, da_q, db_q) for the current window and one background period."""
    p = state.perturbation
    bg = state.background
    aq = np.array(bg.a)
    bq = np.array(bg.b)
    w_lo, w_hi = p.window
    a = np.array([p.a_at(n) for n in range(w_lo, w_hi + 1)])
    b = np.array([p.b_at(n) for n in range(w_lo, w_hi + 1)])
    da, db, daq, dbq = _rhs(a, b, aq, bq, w_lo)
    return da, db, daq, dbq


def _rhs(a, b, aq, bq, w_lo):
    N = len(aq)
    daq = aq * (np.roll(bq, -1) - bq)
    dbq = 2.0 * (aq**2 - np.roll(aq, 1) ** 2)
    L = len(a)
    if L == 0:
        return a, b, daq, dbq
    w_hi = w_lo + L - 1
    b_next = np.empty(L)
    b_next[:-1] = b[1:]
    b_next[-1] = bq[(w_hi + 1) % N]
    a_prev = np.empty(L)
    a_prev[1:] = a[:-1]
    a_prev[0] = aq[(w_lo - 1) % N]
    da = a * (b_next - b)
    db = 2.0 * (a**2 - a_prev**2)
    return da, db, daq, dbq


def _rk4_step(a, b, aq, bq, w_lo, dt):
    k1 = _rhs(a, b, aq, bq, w_lo)
    k2 = _rhs(a + 0.5 * dt * k1[0], b + 0.5 * dt * k1[1],
              aq + 0.5 * dt * k1[2], bq + 0.5 * dt * k1[3], w_lo)
    k3 = _rhs(a + 0.5 * dt * k2[0], b + 0.5 * dt * k2[1],
              aq + 0.5 * dt * k2[2], bq + 0.5 * dt * k2[3], w_lo)
    k4 = _rhs(a + dt * k3[0], b + dt * k3[1], aq + dt * k3[2], bq + dt * k3[3], w_lo)
    sixth = dt / 6.0
    return (
        a + sixth * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        b + sixth * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        aq + sixth * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        bq + sixth * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
    )


def evolve(
    state: TodaState,
    t_final: float,
    dt: float = 1e-3,
    pad: int = 80,
    grow: int = 16,
    max_sites: int = 20000,
) -> TodaState:
    """Integrate the coupled flow from state.time to t_final with fixed-step RK4.

    The computational window starts at the perturbation support padded by
    ``pad`` sites and grows by ``grow`` whenever the boundary deviation from
    the background exceeds 1e-14 (the support spreads at finite speed).
    """
    if t_final < state.time:
        raise ValueError("backward evolution not supported")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    p = state.perturbation
    bg = state.background
    N = bg.period
    aq = np.array(bg.a)
    bq = np.array(bg.b)
    if p.is_trivial:
        w_lo, w_hi = -pad, pad
    else:
        w_lo, w_hi = p.window[0] - pad, p.window[1] + pad
    a = np.array([p.a_at(n) for n in range(w_lo, w_hi + 1)])
    b = np.array([p.b_at(n) for n in range(w_lo, w_hi + 1)])

    span = t_final - state.time
    n_steps = int(round(span / dt))
    if abs(n_steps * dt - span) > 1e-12 * max(1.0, abs(span)):
        n_steps = int(np.floor(span / dt))
    remainder = span - n_steps * dt

    for k in range(n_steps + 1):
        h = dt if k < n_steps else remainder
        if h > 0.0:
            a, b, aq, bq = _rk4_step(a, b, aq, bq, w_lo, h)
        if np.min(a) <= 0.0 or np.min(aq) <= 0.0:
            raise PositivityLoss(
                f"off-diagonal coefficient hit {min(np.min(a), np.min(aq)):.3e} "
                f"at t = {state.time + min(k + 1, n_steps) * dt:.6g}"
            )
        dev_lo = abs(a[0] - aq[w_lo % N]) + abs(b[0] - bq[w_lo % N])
        dev_hi = abs(a[-1] - aq[w_hi % N]) + abs(b[-1] - bq[w_hi % N])
        if dev_lo > _BOUNDARY_TOL:
            ext = [aq[(w_lo - j) % N] for j in range(grow, 0, -1)]
            a = np.concatenate([ext, a])
            b = np.concatenate([[bq[(w_lo - j) % N] for j in range(grow, 0, -1)], b])
            w_lo -= grow
        if dev_hi > _BOUNDARY_TOL:
            a = np.concatenate([a, [aq[(w_hi + j) % N] for j in range(1, grow + 1)]])
            b = np.concatenate([b, [bq[(w_hi + j) % N] for j in range(1, grow + 1)]])
            w_hi += grow
        if w_hi - w_lo + 1 > max_sites:
            raise WindowOverflow(f"window grew past {max_sites} sites")

    new_bg = BackgroundOperator(N, tuple(aq), tuple(bq))
    new_p = Perturbation(new_bg, (w_lo, w_hi), tuple(a), tuple(b))
    return TodaState(float(t_final), new_p, new_bg)


def conserved_quantity_A(p: Perturbation) -> float:
    """A(t) = prod_window a(j) / a_q(j); conserved under the flow."""
    out = 1.0
    for n in range(p.window[0], p.window[1] + 1):
        out *= p.a_at(n) / p.background.a_at(n)
    return out


@dataclass(frozen=True)
class ConservedReport:
    times: np.ndarray
    A: np.ndarray
    taus: np.ndarray  # shape (len(times), orders)
    orders: int

    @property
    def drifts(self):
        out = {"A": float(np.max(np.abs(self.A - self.A[0])))}
        for j in range(self.orders):
            out[f"tau_{j + 1}"] = float(np.max(np.abs(self.taus[:, j] - self.taus[0, j])))
        return out

    def to_dict(self):
        return {
            "times": [float(t) for t in self.times],
            "A": [float(x) for x in self.A],
            "taus": [[float(x) for x in row] for row in self.taus],
            "drifts": self.drifts,
        }


def conserved_report(
    state0: TodaState, times, orders: int = 3, dt: float = 1e-3, pad: int = 80
) -> ConservedReport:
    """Evolve once through sorted times, reporting A and tau_1..tau_orders."""
    times = sorted(float(t) for t in times)
    if times and times[0] < state0.time:
        raise ValueError("report times must not precede the initial time")
    rows_A = []
    rows_tau = []
    state = state0
    for t in times:
        if t > state.time:
            state = evolve(state, t, dt=dt, pad=pad)
        rows_A.append(conserved_quantity_A(state.perturbation))
        rows_tau.append([trace_direct(state.perturbation, j) for j in range(1, orders + 1)])
    return ConservedReport(
        times=np.array(times),
        A=np.array(rows_A),
        taus=np.array(rows_tau),
        orders=orders,
    )
