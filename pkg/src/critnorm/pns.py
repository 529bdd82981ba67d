"""Pseudo-spectral Navier-Stokes around a prescribed drift.

Evolves dv/dt - Lap v + grad q = -div(v x v + a x v + v x a), div v = 0,
with an integrating-factor Heun step: the heat multiplier is applied
exactly between stages, so only the advective step limit
dt <= 0.5 dx / max|v + a| remains. Products are formed pointwise and the
result is 2/3-dealiased; every accepted state is Leray-projected by
construction (the right-hand side is projected mode by mode).

The local energy ledger checks the identity obtained by multiplying the
system by 2 v phi and integrating by parts with a static spatial cutoff:

    int |v(t)|^2 phi + 2 int int |grad v|^2 phi
      = int |v(t0)|^2 phi + int int |v|^2 Lap phi
        + int int (|v|^2 + 2 q) v . grad phi + int int |v|^2 a . grad phi
        + 2 int int (a . v)(v . grad phi) + 2 int int (v . grad v) . a phi.

On smooth resolved runs the slack is pure quadrature error (time
integrals are cumulative Simpson over the stored slices); a negative
slack beyond the configured tolerance flags an energy-inequality
violation, which is the sign convention suitable solutions care about.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from . import _fft
from .fields import ScalarField, SpaceTimeField, VectorField
from .spectral import leray_project

__all__ = [
    "PNSConfig",
    "SolverState",
    "PNSRun",
    "EnergyLedgerEntry",
    "GlobalEnergyReport",
    "step",
    "run_pns",
    "recover_pressure",
    "drift_from_spacetime",
    "verify_local_energy",
    "global_energy_check",
    "write_energy_csv",
    "write_manifest",
]


@dataclass(frozen=True)
class PNSConfig:
    """Step size, horizon, storage stride, and energy-check knobs."""

    dt: float
    T: float
    stride: int = 8
    dealias: bool = True
    tol_energy_c: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("horizon shorter than one step")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError("T must be an integer number of steps")
        if n % self.stride != 0:
            raise ValueError("step count must be a multiple of the stride")

    @property
    def n_steps(self):
        return round(self.T / self.dt)


@dataclass
class SolverState:
    """Mutable integration state; a_provider maps t to a drift slice."""

    v: VectorField
    t: float
    a_provider: object = None

    def drift(self, t):
        if self.a_provider is None:
            return None
        return self.a_provider(t)


def _rhs_hat(grid, v_data, a_data, use_dealias):
    # -P div(v x v + a x v + v x a), projected and dealiased in spectrum
    T = v_data[:, None] * v_data[None, :]
    if a_data is not None:
        cross = a_data[:, None] * v_data[None, :]
        T = T + cross + np.swapaxes(cross, 0, 1)
    Th = _fft.rfftn(T, axes=(-3, -2, -1))
    kxd, kyd, kzd = grid.deriv_wavenumbers()
    Gh = -1j * (kxd * Th[:, 0] + kyd * Th[:, 1] + kzd * Th[:, 2])
    dot = kxd * Gh[0] + kyd * Gh[1] + kzd * Gh[2]
    fac = dot / grid.k2_d_safe
    Gh[0] -= kxd * fac
    Gh[1] -= kyd * fac
    Gh[2] -= kzd * fac
    if use_dealias:
        Gh *= grid.dealias_mask
    return Gh


def step(state, dt, use_dealias=True):
    """One integrating-factor Heun step; rejects advective CFL violations."""
    g = state.v.grid
    a_now = state.drift(state.t)
    a_data = None if a_now is None else a_now.data
    speed = state.v.data if a_data is None else state.v.data + a_data
    amax = float(np.max(np.sqrt(np.sum(speed**2, axis=0))))
    if amax > 0 and dt > 0.5 * g.dx / amax:
        raise ValueError(
            "advective CFL violation: dt <= %.6g required" % (0.5 * g.dx / amax)
        )
    E = np.exp(-g.k2 * dt)
    vh = state.v.hat
    k1 = _rhs_hat(g, state.v.data, a_data, use_dealias)
    vstar = _fft.irfftn(E * (vh + dt * k1), g.shape, axes=(-3, -2, -1))
    a_next = state.drift(state.t + dt)
    k2 = _rhs_hat(
        g, vstar, None if a_next is None else a_next.data, use_dealias
    )
    vnew = _fft.irfftn(E * vh + 0.5 * dt * (E * k1 + k2), g.shape, axes=(-3, -2, -1))
    state.v = VectorField(g, vnew)
    state.t = state.t + dt
    return state


def recover_pressure(v, a=None):
    """Mean-zero q with Lap q = -d_i d_j (v_i v_j + a_i v_j + v_i a_j)."""
    g = v.grid
    if a is not None and a.grid != g:
        raise ValueError("grids differ")
    T = v.data[:, None] * v.data[None, :]
    if a is not None:
        cross = a.data[:, None] * v.data[None, :]
        T = T + cross + np.swapaxes(cross, 0, 1)
    Th = _fft.rfftn(T, axes=(-3, -2, -1))
    kd = g.deriv_wavenumbers()
    num = np.zeros(Th.shape[2:], dtype=complex)
    for i in range(3):
        for j in range(3):
            num = num + kd[i] * kd[j] * Th[i, j]
    qh = -num / g.k2_d_safe
    qh[0, 0, 0] = 0.0
    return ScalarField(g, _fft.irfftn(qh, g.shape, axes=(-3, -2, -1)))


def drift_from_spacetime(stf):
    """Linear-in-time interpolator over a stored drift orbit."""
    times = stf.times
    dt = stf.dt

    def provider(t):
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9 * max(1.0, times[-1]):
            raise ValueError("drift requested outside stored window")
        s = (t - float(times[0])) / dt
        i = min(int(math.floor(s)), len(times) - 2)
        w = s - i
        data = (1.0 - w) * stf.frames[i] + w * stf.frames[i + 1]
        return VectorField(stf.grid, data)

    return provider


@dataclass(frozen=True)
class PNSRun:
    """Stored slices of one integration: v, recovered q, and the drift."""

    grid: object
    cfg: PNSConfig
    v: SpaceTimeField
    q: SpaceTimeField
    a: object  # SpaceTimeField or None


def run_pns(v0, cfg, a_provider=None):
    """Integrate from v0, storing every cfg.stride-th slice with pressure.

    Initial data is dealiased and projected once; thereafter both
    properties are preserved by the stepper itself.
    """
    g = v0.grid
    vh = v0.hat * (g.dealias_mask if cfg.dealias else 1.0)
    state = SolverState(
        v=leray_project(
            VectorField(g, _fft.irfftn(vh, g.shape, axes=(-3, -2, -1)))
        ),
        t=0.0,
        a_provider=a_provider,
    )
    n = cfg.n_steps
    kept = n // cfg.stride + 1
    times = np.empty(kept)
    vs = np.empty((kept,) + (3,) + g.shape)
    qs = np.empty((kept,) + g.shape)
    sa = None if a_provider is None else np.empty((kept,) + (3,) + g.shape)

    def store(idx):
        times[idx] = state.t
        a_slice = state.drift(state.t)
        vs[idx] = state.v.data
        qs[idx] = recover_pressure(state.v, a_slice).data
        if sa is not None:
            sa[idx] = a_slice.data

    store(0)
    for i in range(1, n + 1):
        step(state, cfg.dt, use_dealias=cfg.dealias)
        if i % cfg.stride == 0:
            store(i // cfg.stride)
    return PNSRun(
        grid=g,
        cfg=cfg,
        v=SpaceTimeField(g, times, vs),
        q=SpaceTimeField(g, times, qs),
        a=None if sa is None else SpaceTimeField(g, times, sa),
    )


# ---------------------------------------------------------------------------
# energy bookkeeping


@dataclass(frozen=True)
class EnergyLedgerEntry:
    t: float
    lhs: float
    rhs: float
    slack: float
    tol: float
    passed: bool
    terms: dict


@dataclass(frozen=True)
class GlobalEnergyReport:
    rows: tuple
    max_violation: float
    passed: bool


def _grad_data(grid, data):
    hat = _fft.rfftn(data, axes=(-3, -2, -1))
    kd = grid.deriv_wavenumbers()
    out = np.empty((3,) + data.shape)
    for j in range(3):
        out[j] = _fft.irfftn(1j * kd[j] * hat, grid.shape, axes=(-3, -2, -1))
    return out  # out[j, i] = d_j v_i for vector data


def verify_local_energy(run, phi, window=None, tol_c=None):
    """Ledger of the localized energy identity on the stored slices.

    phi is a static nonnegative spatial cutoff. Each entry integrates
    from the first stored slice in the window up to its own time; passed
    means slack >= -tol with tol = C (dt + dx^2) scale(terms).
    """
    if float(np.min(phi.values)) < 0:
        raise ValueError("cutoff must be nonnegative")
    g = run.grid
    if phi.grid != g:
        raise ValueError("grids differ")
    if tol_c is None:
        tol_c = run.cfg.tol_energy_c
    times = run.v.times
    if window is None:
        sel = np.arange(len(times))
    else:
        lo, hi = window
        sel = np.nonzero((times >= lo - 1e-12) & (times <= hi + 1e-12))[0]
    if len(sel) < 2:
        raise ValueError("window needs at least two stored slices")

    cell = g.cell_volume
    phiv = phi.values
    gphi = _grad_data(g, phiv)
    hat = _fft.rfftn(phiv, axes=(-3, -2, -1))
    lap_phi = _fft.irfftn(-g.k2 * hat, g.shape, axes=(-3, -2, -1))

    m = len(sel)
    e = np.empty(m)
    diss = np.empty(m)
    t1 = np.empty(m)
    t2 = np.empty(m)
    t3 = np.empty(m)
    t4 = np.empty(m)
    t5 = np.empty(m)
    for row, i in enumerate(sel):
        v = run.v.frames[i]
        q = run.q.frames[i]
        a = None if run.a is None else run.a.frames[i]
        v2 = np.sum(v**2, axis=0)
        grads = np.stack([_grad_data(g, v[c]) for c in range(3)])  # (i, j, ...)
        e[row] = np.sum(v2 * phiv) * cell
        diss[row] = np.sum(np.sum(grads**2, axis=(0, 1)) * phiv) * cell
        t1[row] = np.sum(v2 * lap_phi) * cell
        v_gphi = np.sum(v * gphi, axis=0)
        t2[row] = np.sum((v2 + 2.0 * q) * v_gphi) * cell
        if a is None:
            t3[row] = t4[row] = t5[row] = 0.0
        else:
            t3[row] = np.sum(v2 * np.sum(a * gphi, axis=0)) * cell
            t4[row] = 2.0 * np.sum(np.sum(a * v, axis=0) * v_gphi) * cell
            conv = np.einsum("j...,ij...->i...", v, grads)  # (v . grad) v
            t5[row] = 2.0 * np.sum(np.sum(conv * a, axis=0) * phiv) * cell

    ts = times[sel]
    cum = {
        name: cumulative_simpson(arr, x=ts, initial=0.0)
        for name, arr in (
            ("dissipation", diss),
            ("heat", t1),
            ("flux", t2),
            ("drift_gradphi", t3),
            ("drift_cross", t4),
            ("drift_convection", t5),
        )
    }
    entries = []
    for row in range(1, m):
        lhs = e[row] + 2.0 * cum["dissipation"][row]
        terms = {
            "initial_energy": e[0],
            "heat": cum["heat"][row],
            "flux": cum["flux"][row],
            "drift_gradphi": cum["drift_gradphi"][row],
            "drift_cross": cum["drift_cross"][row],
            "drift_convection": cum["drift_convection"][row],
            "energy": e[row],
            "dissipation": 2.0 * cum["dissipation"][row],
        }
        rhs = e[0] + sum(
            terms[k]
            for k in ("heat", "flux", "drift_gradphi", "drift_cross", "drift_convection")
        )
        scale = max(abs(lhs), abs(rhs), max(abs(val) for val in terms.values()))
        tol = tol_c * (run.cfg.dt + g.dx**2) * scale
        slack = rhs - lhs
        entries.append(
            EnergyLedgerEntry(
                t=float(ts[row]),
                lhs=lhs,
                rhs=rhs,
                slack=slack,
                tol=tol,
                passed=bool(slack >= -tol),
                terms=terms,
            )
        )
    return entries


def global_energy_check(run, tol=None):
    """Whole-box energy inequality for undriven runs.

    Checks ||v(t)||^2 + 2 int_0^t ||grad v||^2 <= ||v(0)||^2 at every
    stored slice; default tolerance 1e-6 ||v(0)||^2 on either side.
    """
    if run.a is not None:
        raise ValueError("global energy check applies to undriven runs")
    g = run.grid
    cell = g.cell_volume
    times = run.v.times
    m = len(times)
    en = np.empty(m)
    diss = np.empty(m)
    for i in range(m):
        v = run.v.frames[i]
        en[i] = np.sum(v**2) * cell
        grads = np.stack([_grad_data(g, v[c]) for c in range(3)])
        diss[i] = np.sum(grads**2) * cell
    cum = cumulative_simpson(diss, x=times, initial=0.0)
    if tol is None:
        tol = 1e-6 * en[0]
    rows = []
    worst = 0.0
    ok = True
    for i in range(m):
        lhs = en[i] + 2.0 * cum[i]
        slack = en[0] - lhs
        rows.append((float(times[i]), lhs, en[0], slack))
        worst = max(worst, abs(slack))
        if lhs - en[0] > tol:
            ok = False
    return GlobalEnergyReport(rows=tuple(rows), max_violation=worst, passed=ok)


def write_energy_csv(path, entries):
    import csv

    names = (
        "initial_energy",
        "heat",
        "flux",
        "drift_gradphi",
        "drift_cross",
        "drift_convection",
        "energy",
        "dissipation",
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lhs", "rhs", "slack", "passed"] + list(names))
        for en in entries:
            w.writerow(
                ["%.17g" % en.t, "%.17g" % en.lhs, "%.17g" % en.rhs,
                 "%.17g" % en.slack, en.passed]
                + ["%.17g" % en.terms[k] for k in names]
            )


def write_manifest(path, run, data_spec="", drift_spec=""):
    g = run.grid
    lines = [
        "grid: n=%d L=%.17g" % (g.n, g.L),
        "dt: %.17g" % run.cfg.dt,
        "T: %.17g" % run.cfg.T,
        "stride: %d" % run.cfg.stride,
        "dealias: %s" % run.cfg.dealias,
        "data: %s" % data_spec,
        "drift: %s" % (drift_spec if run.a is not None else "none"),
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
