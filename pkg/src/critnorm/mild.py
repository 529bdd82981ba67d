"""Duhamel integrals and small-data mild solutions.

The in-time heat convolution L(f)(t) = int_0^t e^{(t-s) Lap} f(s) ds is
discretized by sampling the integrand slice at the left endpoint while
integrating the heat multiplier exactly on every sub-interval, so the
(t - s)^{-1/2}-strength endpoint of the divergence-form kernel costs
nothing. Per mode the rule collapses to one pass over the slices,

    S_i = f_{i-1} + e^{-k^2 dt} S_{i-1},  L(f)(t_i) = (1 - e^{-k^2 dt}) S_i / k^2,

and is exact for integrands constant in time (geometric sum), which the
oracle tests lean on.

The drift perturbation operator

    L_a(u) = L(div(u x a + a x u))
             + int_0^t grad e^{(t-s) Lap} R_i R_j (u_i a_j + u_j a_i) ds

collapses mode by mode to L applied to the Leray-projected tensor
divergence: (delta_km - xi_k xi_m / |xi|^2) i xi_j S_mj reproduces both
pieces for symmetric S. Inversion of I - L_a runs plain Picard iteration
in a configurable space-time Lebesgue norm and reports the measured
contraction. Smallness budgets for the drift and the data are
configuration values, never derived constants.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _fft
from .fields import SpaceTimeField, VectorField
from .norms import BallRegion, InequalityReport, lorentz_quasinorm, parabolic_holder_seminorm
from .spectral import divergence, heat_semigroup

__all__ = [
    "DuhamelConfig",
    "MildSolution",
    "InversionResult",
    "PicardDivergence",
    "spacetime_lebesgue",
    "duhamel",
    "duhamel_div",
    "apply_La",
    "drift_smallness",
    "check_duhamel_estimates",
    "invert_I_minus_La",
    "solve_mild",
    "write_decay_csv",
]


@dataclass(frozen=True)
class DuhamelConfig:
    """Time discretization and fixed-point knobs shared by the solvers."""

    dt: float
    T: float
    quadrature: str = "left-endpoint with singularity-split"
    picard_tol: float = 1e-10
    picard_max: int = 60

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("horizon shorter than one step")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        m = round(self.T / self.dt)
        if abs(m * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError("T must be an integer number of steps")

    def times(self):
        m = round(self.T / self.dt)
        return self.dt * np.arange(m + 1)


class PicardDivergence(RuntimeError):
    """Fixed-point iteration failed to contract; carries the update norms."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = tuple(float(h) for h in history)


def _slice_lp(grid, frame, p):
    # frame is one time slice, (n,n,n) or (3,n,n,n); vectors by magnitude
    if frame.ndim == 4:
        mag = np.sqrt(np.sum(frame**2, axis=0))
    elif frame.ndim == 5:
        mag = np.sqrt(np.sum(frame**2, axis=(0, 1)))
    else:
        mag = np.abs(frame)
    if p == math.inf:
        return float(np.max(mag))
    return float((np.sum(mag**p) * grid.cell_volume) ** (1.0 / p))


def _st_norm(grid, times, frames, r, p):
    vals = np.array([_slice_lp(grid, frames[i], p) for i in range(len(times))])
    if r == math.inf:
        return float(np.max(vals))
    if len(times) < 2:
        raise ValueError("finite time exponent needs at least two slices")
    dt = float(times[1] - times[0])
    return float((np.sum(vals**r) * dt) ** (1.0 / r))


def spacetime_lebesgue(u, r, p):
    """Mixed norm ||u||_{L^r_t L^p_x} by slice quadrature, weight dt."""
    if not (r >= 1 and p >= 1):
        raise ValueError("exponents must be >= 1")
    return _st_norm(u.grid, u.times, u.frames, r, p)


def _duhamel_gate(f):
    if len(f) < 2:
        raise ValueError("need at least two slices")
    if abs(float(f.times[0])) > 1e-12:
        raise ValueError("Duhamel integral starts at t = 0")


def _march(grid, times, hat_of_slice, comp_shape):
    """Shared recurrence: exact per-mode sub-interval heat integrals."""
    dt = float(times[1] - times[0])
    E = np.exp(-grid.k2 * dt)
    ctilde = np.where(grid.k2 > 0, (1.0 - E) / grid.k2_safe, dt)
    m = len(times)
    out = np.zeros((m,) + comp_shape + grid.shape)
    S = None
    for i in range(1, m):
        h = hat_of_slice(i - 1)
        S = h if S is None else h + E * S
        out[i] = _fft.irfftn(ctilde * S, grid.shape, axes=(-3, -2, -1))
    return SpaceTimeField(grid, times, out)


def duhamel(f):
    """L(f)(t) = int_0^t e^{(t-s) Lap} f(s) ds on the stored time lattice."""
    _duhamel_gate(f)
    g = f.grid
    comp = f.frames.shape[1:-3]

    def hat(j):
        return _fft.rfftn(f.frames[j], axes=(-3, -2, -1))

    return _march(g, f.times, hat, comp)


def _tensor_div_hat(grid, Th):
    kxd, kyd, kzd = grid.deriv_wavenumbers()
    return 1j * (kxd * Th[:, 0] + kyd * Th[:, 1] + kzd * Th[:, 2])


def _leray_hat(grid, vh):
    kxd, kyd, kzd = grid.deriv_wavenumbers()
    dot = kxd * vh[0] + kyd * vh[1] + kzd * vh[2]
    fac = dot / grid.k2_d_safe
    vh[0] -= kxd * fac
    vh[1] -= kyd * fac
    vh[2] -= kzd * fac
    return vh


def duhamel_div(F):
    """L(div F)(t) with the derivative taken inside the exact multiplier."""
    _duhamel_gate(F)
    if F.frames.ndim != 6:
        raise ValueError("duhamel_div needs tensor slices")
    g = F.grid

    def hat(j):
        Th = _fft.rfftn(F.frames[j], axes=(-3, -2, -1))
        return _tensor_div_hat(g, Th)

    return _march(g, F.times, hat, (3,))


def _sym_duhamel(grid, times, pair_of_slice):
    """L(P div S) for S(j) = u_j x a_j + a_j x u_j, slices built on the fly."""

    def hat(j):
        u, a = pair_of_slice(j)
        S = u[:, None] * a[None, :]
        S = S + np.swapaxes(S, 0, 1)
        Th = _fft.rfftn(S, axes=(-3, -2, -1))
        return _leray_hat(grid, _tensor_div_hat(grid, Th))

    return _march(grid, times, hat, (3,))


def apply_La(u, a):
    """Drift perturbation L_a(u); both arguments on the same time lattice."""
    _duhamel_gate(u)
    if u.frames.ndim != 5 or a.frames.ndim != 5:
        raise ValueError("apply_La needs vector space-time fields")
    if u.grid != a.grid or len(u) != len(a) or not np.allclose(u.times, a.times):
        raise ValueError("u and a live on different lattices")

    def pair(j):
        return u.frames[j], a.frames[j]

    return _sym_duhamel(u.grid, u.times, pair)


def drift_smallness(a):
    """||a||_{L^5_{t,x}} plus sup over stored s > 0 of s^{1/5} ||a(s)||_{L^5}."""
    total = spacetime_lebesgue(a, 5, 5)
    sup = 0.0
    for i, t in enumerate(a.times):
        if t > 0:
            sup = max(sup, float(t) ** 0.2 * _slice_lp(a.grid, a.frames[i], 5))
    return total + sup


# ---------------------------------------------------------------------------
# empirical estimate checks


def _ineq(name, lhs, rhs, passed, method):
    ratio = lhs / rhs if rhs > 0 else 0.0
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        passed = False
    return InequalityReport(name, lhs, rhs, ratio, passed, method)


def check_duhamel_estimates(f=None, F=None, a=None, b=None, nu=0.45):
    """Empirical constants for the smoothing estimates of L and L(div .).

    Only the time-triangle path has constant exactly 1 and is asserted;
    every other entry records the measured ratio with passed = None.
    Pass any subset of f (source), F (tensor flux), a/b (product pair).
    """
    reps = {}
    if f is not None:
        g = f.grid
        Lf = duhamel(f)
        dt = f.dt
        lp = [_slice_lp(g, f.frames[j], 2) for j in range(len(f))]
        worst = (0.0, 0.0, 0.0)
        for i in range(1, len(f)):
            lhs = _slice_lp(g, Lf.frames[i], 2)
            rhs = dt * sum(lp[:i])
            if rhs > 0 and lhs / rhs > worst[0]:
                worst = (lhs / rhs, lhs, rhs)
        reps["time_triangle"] = _ineq(
            "time_triangle", worst[1], worst[2],
            worst[0] <= 1 + 1e-10,
            "per-slice L2 of L(f) against the running time integral",
        )
        reps["mixed_smoothing"] = _ineq(
            "mixed_smoothing",
            spacetime_lebesgue(Lf, 10, 6),
            spacetime_lebesgue(f, 2, 2),
            None,
            "L^10_t L^6_x of L(f) against L^2_t L^2_x of f",
        )
        reps["sup_from_l1_linf"] = _ineq(
            "sup_from_l1_linf",
            spacetime_lebesgue(Lf, math.inf, math.inf),
            spacetime_lebesgue(f, 1, math.inf),
            None,
            "sup of L(f) against L^1_t L^inf_x of f",
        )
        ball = BallRegion((0.0, 0.0, 0.0), g.L / 4)
        reps["holder_gain"] = _ineq(
            "holder_gain",
            parabolic_holder_seminorm(Lf, nu, ball).value,
            spacetime_lebesgue(f, math.inf, math.inf),
            None,
            "parabolic Holder seminorm of L(f), nu = %g" % nu,
        )
    if F is not None:
        g = F.grid
        LF = duhamel_div(F)
        reps["div_integrability_gain"] = _ineq(
            "div_integrability_gain",
            spacetime_lebesgue(LF, 5, 5),
            _st_norm(g, F.times, F.frames, 2.5, 2.5),
            None,
            "L^5_{t,x} of L(div F) against L^{5/2}_{t,x} of F",
        )
        reps["div_sup"] = _ineq(
            "div_sup",
            spacetime_lebesgue(LF, math.inf, math.inf),
            _st_norm(g, F.times, F.frames, 10, 10),
            None,
            "sup of L(div F) against L^10_{t,x} of F",
        )
        ball = BallRegion((0.0, 0.0, 0.0), g.L / 4)
        reps["div_holder_gain"] = _ineq(
            "div_holder_gain",
            parabolic_holder_seminorm(LF, nu, ball).value,
            _st_norm(g, F.times, F.frames, math.inf, math.inf),
            None,
            "parabolic Holder seminorm of L(div F), nu = %g" % nu,
        )
    if a is not None and b is not None:
        g = a.grid
        S = a.frames[:, :, None] * b.frames[:, None, :]
        Lab = duhamel_div(SpaceTimeField(g, a.times, S))
        q = 10.0 / 3.0
        reps["tensor_product_lq"] = _ineq(
            "tensor_product_lq",
            spacetime_lebesgue(Lab, q, q),
            spacetime_lebesgue(a, 5, 5) * spacetime_lebesgue(b, q, q),
            None,
            "L^{10/3}_{t,x} of L(div(a x b)) against ||a||_5 ||b||_{10/3}",
        )
        sup_a = 0.0
        for i, t in enumerate(a.times):
            if t > 0:
                sup_a = max(sup_a, float(t) ** 0.2 * _slice_lp(g, a.frames[i], 5))
        reps["tensor_product_sup"] = _ineq(
            "tensor_product_sup",
            spacetime_lebesgue(Lab, math.inf, math.inf),
            sup_a * spacetime_lebesgue(b, math.inf, math.inf),
            None,
            "sup of L(div(a x b)) against sup s^{1/5}||a||_5 times sup|b|",
        )
    return reps


# ---------------------------------------------------------------------------
# Picard machinery


@dataclass(frozen=True)
class InversionResult:
    u: SpaceTimeField
    iterations: int
    contraction: float
    smallness: float
    smallness_ok: bool
    history: tuple


def _picard_loop(grid, times, start, step, anchor, tol, cap, norm_q):
    cur = start
    history = []
    for k in range(1, cap + 1):
        new = step(cur)
        delta = _st_norm(grid, times, new - cur, norm_q, norm_q)
        history.append(delta)
        if not math.isfinite(delta) or delta > 1e6 * max(anchor, 1.0):
            raise PicardDivergence("Picard iterates blew up", history)
        cur = new
        if delta <= tol * anchor:
            ratios = [
                history[i] / history[i - 1]
                for i in range(1, len(history))
                if history[i - 1] > 0
            ]
            contraction = max(ratios) if ratios else 0.0
            return cur, k, contraction, tuple(history)
    raise PicardDivergence("no contraction within picard_max", history)


def invert_I_minus_La(f, a, cfg=None, working_q=2.0, eps_q=0.05):
    """Solve (I - L_a) u = f by Picard iteration in L^q space-time.

    The drift budget eps_q is a configured threshold; exceeding it is
    reported, not fatal, since the true smallness constant is unknown.
    """
    if cfg is None:
        cfg = DuhamelConfig(dt=f.dt, T=float(f.times[-1]) - float(f.times[0]))
    _duhamel_gate(f)
    if not (working_q >= 1.25):
        raise ValueError("working exponent below 5/4")
    small = drift_smallness(a)
    anchor = spacetime_lebesgue(f, working_q, working_q)

    def step(frames):
        la = apply_La(SpaceTimeField(f.grid, f.times, frames), a)
        return f.frames + la.frames

    u, k, contraction, hist = _picard_loop(
        f.grid, f.times, f.frames, step, anchor,
        cfg.picard_tol, cfg.picard_max, working_q,
    )
    return InversionResult(
        u=SpaceTimeField(f.grid, f.times, u),
        iterations=k,
        contraction=contraction,
        smallness=small,
        smallness_ok=small <= eps_q,
        history=hist,
    )


# ---------------------------------------------------------------------------
# mild solutions


@dataclass(frozen=True)
class MildSolution:
    """Converged Kato iteration with its decay ledger.

    decay_table rows carry t, the plain L^3 norm, the weighted norms
    t^{1/8} L^4, t^{1/5} L^5, t^{1/2} L^inf, t^{1/2} L^3 of the gradient,
    the configured t^{(1-3/p)/2} L^p column, and the per-slice residual
    of the integral equation. k0_empirical is the sup over t > 0 of the
    variant's weighted-norm sum divided by the data norm.
    """

    a: SpaceTimeField
    data_norm_kind: str
    data_norm: float
    decay_table: tuple
    k0_empirical: float
    l5_spacetime: float
    residual: float
    residual_rel: float
    iterations: int
    contraction: float
    history: tuple


def _grad_l3(grid, frame):
    hat = _fft.rfftn(frame, axes=(-3, -2, -1))
    kxd, kyd, kzd = grid.deriv_wavenumbers()
    gh = np.stack([1j * kxd * hat, 1j * kyd * hat, 1j * kzd * hat])
    grad = _fft.irfftn(gh, grid.shape, axes=(-3, -2, -1))
    return _slice_lp(grid, grad, 3)


def solve_mild(u0a, cfg, data_norm="l3", besov_p=6.0, data_gate=None):
    """Small-data mild solution a = e^{t Lap} u0a - L(P div(a x a)).

    data_norm selects the critical norm of the data used for the
    empirical constant: "l3", "weak_l3" (Lorentz L^{3,inf}), or "besov"
    (heat-characterized sup_t t^{(1-3/p)/2} ||e^{t Lap} u0a||_p). When
    data_gate is given the data norm is thresholded before iterating.
    """
    if not isinstance(u0a, VectorField):
        raise ValueError("initial data must be a vector field")
    if data_norm not in ("l3", "weak_l3", "besov"):
        raise ValueError("unknown data norm kind %r" % data_norm)
    g = u0a.grid
    kmax = math.sqrt(float(np.max(g.k2)))
    unorm = u0a.l2()
    if unorm > 0 and divergence(u0a).l2() > 1e-8 * kmax * unorm:
        raise ValueError("initial data is not divergence-free")

    times = cfg.times()
    m = len(times)
    H = np.empty((m, 3) + g.shape)
    for i, t in enumerate(times):
        H[i] = heat_semigroup(u0a, float(t)).data

    p = float(besov_p)
    if data_norm == "l3":
        value = _slice_lp(g, u0a.data, 3)
    elif data_norm == "weak_l3":
        value = lorentz_quasinorm(u0a, 3, math.inf).value
    else:
        value = max(
            float(t) ** (0.5 * (1 - 3 / p)) * _slice_lp(g, H[i], p)
            for i, t in enumerate(times)
            if t > 0
        )
    if data_gate is not None and value > data_gate:
        raise ValueError(
            "data norm %.3g above configured gate %.3g" % (value, data_gate)
        )

    anchor = _st_norm(g, times, H, 2, 2)

    def nonlinearity(frames):
        def pair(j):
            return frames[j], 0.5 * frames[j]  # symmetrization doubles

        return _sym_duhamel(g, times, pair).frames

    def step(frames):
        return H - nonlinearity(frames)

    frames, k, contraction, hist = _picard_loop(
        g, times, H.copy(), step, anchor, cfg.picard_tol, cfg.picard_max, 2.0
    )
    a = SpaceTimeField(g, times, frames)

    resid_frames = frames - H + nonlinearity(frames)
    residual = _st_norm(g, times, resid_frames, 2, 2)

    rows = []
    k0 = 0.0
    for i, t in enumerate(times):
        t = float(t)
        row = {
            "t": t,
            "l3": _slice_lp(g, frames[i], 3),
            "t18_l4": t**0.125 * _slice_lp(g, frames[i], 4),
            "t15_l5": t**0.2 * _slice_lp(g, frames[i], 5),
            "t12_linf": t**0.5 * _slice_lp(g, frames[i], math.inf),
            "tp_lp": t ** (0.5 * (1 - 3 / p)) * _slice_lp(g, frames[i], p),
            "residual": _slice_lp(g, resid_frames[i], 2),
        }
        if data_norm == "l3":
            row["t12_grad_l3"] = t**0.5 * _grad_l3(g, frames[i])
        if data_norm == "weak_l3":
            row["weak3"] = lorentz_quasinorm(a[i], 3, math.inf).value
        rows.append(row)
        if t > 0 and value > 0:
            if data_norm == "l3":
                s = row["l3"] + row["t18_l4"] + row["t15_l5"] + row["t12_linf"]
                s += row["t12_grad_l3"]
            elif data_norm == "weak_l3":
                s = row["weak3"] + row["t18_l4"] + row["t15_l5"] + row["t12_linf"]
            else:
                s = row["tp_lp"] + row["t12_linf"]
            k0 = max(k0, s / value)

    return MildSolution(
        a=a,
        data_norm_kind=data_norm,
        data_norm=value,
        decay_table=tuple(rows),
        k0_empirical=k0,
        l5_spacetime=_st_norm(g, times, frames, 5, 5),
        residual=residual,
        residual_rel=residual / unorm if unorm > 0 else 0.0,
        iterations=k,
        contraction=contraction,
        history=hist,
    )


def write_decay_csv(path, sol):
    """Decay ledger CSV: t, t^{1/5} L5, t^{1/8} L4, t^{1/2} Linf, residual."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "t15_l5", "t18_l4", "t12_linf", "residual"])
        for row in sol.decay_table:
            w.writerow(
                ["%.17g" % row[k] for k in ("t", "t15_l5", "t18_l4", "t12_linf", "residual")]
            )
