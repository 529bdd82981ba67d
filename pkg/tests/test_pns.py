import numpy as np
import pytest

from critnorm import corpus, pns
from critnorm._fft import rfftn
from critnorm.fields import (
    ScalarField,
    VectorField,
    smooth_radial_cutoff,
    taylor_green,
    taylor_green_3d,
)
from critnorm.spectral import derivative, divergence, laplacian

K0 = 1.0 / np.sqrt(2.0)


def heat_drift(field):
    from critnorm.spectral import heat_semigroup

    def provider(t):
        return heat_semigroup(field, max(t, 0.0))

    return provider


class TestConfig:
    def test_gates(self):
        with pytest.raises(ValueError):
            pns.PNSConfig(dt=0.0, T=1.0)
        with pytest.raises(ValueError):
            pns.PNSConfig(dt=0.1, T=0.05)
        with pytest.raises(ValueError):
            pns.PNSConfig(dt=0.1, T=1.0, stride=0)
        with pytest.raises(ValueError):
            pns.PNSConfig(dt=0.3, T=1.0)  # not an integer number of steps
        with pytest.raises(ValueError):
            pns.PNSConfig(dt=0.1, T=1.0, stride=3)  # 10 steps, stride 3

    def test_step_count(self):
        cfg = pns.PNSConfig(dt=0.01, T=0.4, stride=4)
        assert cfg.n_steps == 40


class TestStep:
    def test_cfl_rejection(self, grid32):
        state = pns.SolverState(v=taylor_green(grid32, amplitude=1.0), t=0.0)
        with pytest.raises(ValueError, match="CFL"):
            pns.step(state, 0.2)
        # suggested limit is the advective gate for unit speed
        try:
            pns.step(state, 0.2)
        except ValueError as err:
            quoted = float(str(err).split("<=")[1].split("required")[0])
            assert np.isclose(quoted, 0.5 * grid32.dx, rtol=1e-4)

    def test_drift_enters_cfl(self, grid32):
        # v alone passes at dt=0.05, v plus a fast drift does not
        v = taylor_green(grid32, amplitude=1.0)
        state = pns.SolverState(v=v, t=0.0)
        pns.step(state, 0.05)
        fast = VectorField(grid32, 10.0 * taylor_green(grid32, 1.0).data)
        state = pns.SolverState(v=v, t=0.0, a_provider=lambda t: fast)
        with pytest.raises(ValueError, match="CFL"):
            pns.step(state, 0.05)

    def test_zero_fixed_point(self, grid16):
        z = VectorField(grid16, np.zeros((3,) + grid16.shape))
        state = pns.SolverState(v=z, t=0.0)
        pns.step(state, 0.1)
        assert np.all(state.v.data == 0.0)
        assert state.t == pytest.approx(0.1)


class TestRun:
    def test_zero_data(self, grid16):
        run = pns.run_pns(
            VectorField(grid16, np.zeros((3,) + grid16.shape)),
            pns.PNSConfig(dt=0.1, T=0.4, stride=2),
        )
        assert np.all(run.v.frames == 0.0)
        assert np.all(run.q.frames == 0.0)
        assert run.a is None

    def test_stored_grid_of_times(self, grid16):
        run = pns.run_pns(
            taylor_green(grid16, amplitude=0.1),
            pns.PNSConfig(dt=0.05, T=0.4, stride=4),
        )
        assert np.allclose(run.v.times, [0.0, 0.2, 0.4])
        assert run.q.frames.shape == (3,) + grid16.shape

    def test_planar_vortex_is_exact_heat_orbit(self, grid32):
        # the projected nonlinearity vanishes identically on the planar pair,
        # and the integrating factor makes the heat part exact per step
        v0 = taylor_green(grid32, amplitude=1.0)
        run = pns.run_pns(v0, pns.PNSConfig(dt=0.02, T=0.4, stride=4))
        for i, t in enumerate(run.v.times):
            exact = np.exp(-t) * v0.data
            assert np.max(np.abs(run.v.frames[i] - exact)) <= 1e-13

    def test_planar_vortex_energy_decay(self, grid32):
        v0 = taylor_green(grid32, amplitude=1.0)
        run = pns.run_pns(v0, pns.PNSConfig(dt=0.02, T=0.4, stride=4))
        E0 = np.sum(v0.data**2) * grid32.cell_volume
        for i, t in enumerate(run.v.times):
            E = np.sum(run.v.frames[i] ** 2) * grid32.cell_volume
            assert np.isclose(E, E0 * np.exp(-2.0 * t), rtol=1e-12)

    def test_shear_mode_is_pure_heat(self, grid32):
        X, Y, Z = grid32.coords()
        data = np.zeros((3,) + grid32.shape)
        data[0] = 0.7 * np.sin(K0 * Y)
        run = pns.run_pns(
            VectorField(grid32, data), pns.PNSConfig(dt=0.02, T=0.4, stride=4)
        )
        exact = 0.7 * np.sin(K0 * Y) * np.exp(-K0**2 * 0.4)
        assert np.max(np.abs(run.v.frames[-1][0] - exact)) <= 1e-10
        assert np.max(np.abs(run.v.frames[-1][1:])) <= 1e-12

    def test_divergence_every_stored_slice(self, grid32):
        run = pns.run_pns(
            taylor_green_3d(grid32, amplitude=2.0),
            pns.PNSConfig(dt=0.01, T=0.2, stride=4),
        )
        for frame in run.v.frames:
            div = divergence(VectorField(grid32, frame))
            assert np.max(np.abs(div.values)) <= 1e-10

    def test_momentum_mean_conserved(self, grid32):
        run = pns.run_pns(
            taylor_green_3d(grid32, amplitude=1.0),
            pns.PNSConfig(dt=0.01, T=0.2, stride=4),
        )
        m0 = run.v.frames[0].mean(axis=(1, 2, 3))
        mT = run.v.frames[-1].mean(axis=(1, 2, 3))
        assert np.max(np.abs(mT - m0)) <= 1e-12

    def test_dealias_support_preserved(self, grid16, rng):
        raw = corpus.inverse_radius_field(grid16, 2 * grid16.dx, 3.0, amplitude=0.05)
        run = pns.run_pns(raw, pns.PNSConfig(dt=0.02, T=0.04, stride=2))
        hat = rfftn(run.v.frames[-1], axes=(-3, -2, -1))
        # stored frames round-trip through physical space, so "zero" means
        # round-off relative to the retained spectrum
        outside = np.max(np.abs(hat * (~grid16.dealias_mask)))
        assert outside <= 1e-13 * np.max(np.abs(hat))


class TestRecoverPressure:
    def test_planar_vortex_oracle(self, grid32):
        # classical closed form for the vortex pair at |xi|^2 = 1
        A = 0.8
        X, Y, Z = grid32.coords()
        q = pns.recover_pressure(taylor_green(grid32, amplitude=A))
        cand = -(A**2 / 4.0) * (np.cos(2 * K0 * X) + np.cos(2 * K0 * Y))
        assert np.max(np.abs(q.values - cand)) <= 1e-12

    def test_two_mode_oracle(self, grid32):
        # v = A(cos k0 y, cos k0 x, 0): the double divergence keeps the
        # single interaction mode, so q = A^2 sin(k0 x) sin(k0 y) exactly
        A = 0.8
        X, Y, Z = grid32.coords()
        data = np.zeros((3,) + grid32.shape)
        data[0] = A * np.cos(K0 * Y)
        data[1] = A * np.cos(K0 * X)
        q = pns.recover_pressure(VectorField(grid32, data))
        assert np.max(np.abs(q.values - A**2 * np.sin(K0 * X) * np.sin(K0 * Y))) <= 1e-12

    def test_mean_zero_and_gauge_invariance(self, grid32):
        v = taylor_green_3d(grid32, amplitude=1.3)
        q = pns.recover_pressure(v)
        assert abs(q.values.mean()) <= 1e-13
        shifted = VectorField(
            grid32, v.data + np.array([0.3, -0.2, 0.5])[:, None, None, None]
        )
        assert np.max(np.abs(pns.recover_pressure(shifted).values - q.values)) <= 1e-12

    def test_spectral_residual_with_drift(self, grid32, rng):
        v = taylor_green_3d(grid32, amplitude=1.0)
        a = corpus.random_divfree(grid32, rng, kmax=4, amplitude=0.8)
        q = pns.recover_pressure(v, a)
        T = v.data[:, None] * v.data[None, :]
        cross = a.data[:, None] * v.data[None, :]
        T = T + cross + np.swapaxes(cross, 0, 1)
        dd = np.zeros(grid32.shape)
        for i in range(3):
            for j in range(3):
                dd += derivative(derivative(ScalarField(grid32, T[i, j]), i), j).values
        resid = -laplacian(q).values - dd
        assert np.max(np.abs(resid)) <= 1e-8 * np.max(np.abs(dd))

    def test_grid_mismatch(self, grid16, grid32):
        with pytest.raises(ValueError):
            pns.recover_pressure(
                taylor_green(grid32, 1.0), taylor_green(grid16, 1.0)
            )


class TestDriftProvider:
    def test_nodes_and_midpoints(self, grid16):
        times = np.array([0.0, 0.1, 0.2])
        frames = np.stack(
            [k * np.ones((3,) + grid16.shape) for k in (1.0, 2.0, 4.0)]
        )
        from critnorm.fields import SpaceTimeField

        prov = pns.drift_from_spacetime(SpaceTimeField(grid16, times, frames))
        assert np.allclose(prov(0.1).data, 2.0)
        assert np.allclose(prov(0.15).data, 3.0)
        with pytest.raises(ValueError):
            prov(0.25)


class TestLocalEnergy:
    def test_gates(self, grid16):
        run = pns.run_pns(
            taylor_green(grid16, 0.1), pns.PNSConfig(dt=0.05, T=0.2, stride=2)
        )
        bad = ScalarField(grid16, -np.ones(grid16.shape))
        with pytest.raises(ValueError):
            pns.verify_local_energy(run, bad)
        phi = smooth_radial_cutoff(grid16, 1.0, 3.0)
        with pytest.raises(ValueError):
            pns.verify_local_energy(run, phi, window=(0.0, 0.01))

    def test_planar_vortex_ledger(self, grid32):
        run = pns.run_pns(
            taylor_green(grid32, amplitude=1.0),
            pns.PNSConfig(dt=0.01, T=0.4, stride=2),
        )
        phi = smooth_radial_cutoff(grid32, 1.0, 3.0)
        entries = pns.verify_local_energy(run, phi)
        assert len(entries) == 20
        assert all(e.passed for e in entries)
        # smooth resolved run: slack is pure storage-quadrature error
        assert min(e.slack for e in entries) >= -1e-5
        assert all(e.terms["drift_cross"] == 0.0 for e in entries)

    def test_driven_ledger_closes(self, grid32):
        # drift terms are order 1e-3 here; a mis-weighted identity would
        # leave slack at that scale instead of the 1e-5 quadrature floor
        a0 = taylor_green_3d(grid32, amplitude=0.4)
        run = pns.run_pns(
            taylor_green(grid32, amplitude=0.3),
            pns.PNSConfig(dt=0.01, T=0.4, stride=4),
            a_provider=heat_drift(a0),
        )
        phi = smooth_radial_cutoff(grid32, 1.0, 3.0)
        entries = pns.verify_local_energy(run, phi)
        assert max(abs(e.slack) for e in entries) <= 1e-5
        assert abs(entries[-1].terms["drift_cross"]) > 1e-4
        assert abs(entries[-1].terms["drift_convection"]) > 1e-4

    def test_missing_dealias_is_flagged(self, grid16, rng):
        # near-truncation content at high amplitude: without dealiasing the
        # quadratic term pumps energy and the identity fails on the negative
        # side; the honest twin stays within tolerance
        v0 = corpus.random_divfree(grid16, rng, kmax=5, amplitude=50.0)
        phi = smooth_radial_cutoff(grid16, 1.0, 3.0)
        outcomes = {}
        for deal in (True, False):
            run = pns.run_pns(
                v0, pns.PNSConfig(dt=0.001, T=0.06, stride=2, dealias=deal)
            )
            entries = pns.verify_local_energy(run, phi, tol_c=0.3)
            outcomes[deal] = entries
        assert all(e.passed for e in outcomes[True])
        flagged = [e for e in outcomes[False] if not e.passed]
        assert flagged
        assert min(e.slack for e in flagged) < 0.0


class TestGlobalEnergy:
    def test_planar_vortex_equality(self, grid32):
        run = pns.run_pns(
            taylor_green(grid32, amplitude=1.0),
            pns.PNSConfig(dt=0.01, T=0.4, stride=2),
        )
        rep = pns.global_energy_check(run)
        E0 = rep.rows[0][2]
        assert rep.passed
        assert rep.max_violation <= 1e-6 * E0
        energies = [np.sum(f**2) * grid32.cell_volume for f in run.v.frames]
        assert all(b < a for a, b in zip(energies, energies[1:]))

    def test_under_resolved_violation(self, grid16):
        run = pns.run_pns(
            taylor_green_3d(grid16, amplitude=2.0),
            pns.PNSConfig(dt=0.02, T=0.8, stride=2),
        )
        rep = pns.global_energy_check(run)
        assert not rep.passed
        E0 = rep.rows[0][2]
        assert min(r[3] for r in rep.rows) < -1e-6 * E0

    def test_aliasing_violation_dwarfs_time_error(self, grid16, rng):
        v0 = corpus.random_divfree(grid16, rng, kmax=5, amplitude=30.0)
        worst = {}
        for deal in (True, False):
            run = pns.run_pns(
                v0, pns.PNSConfig(dt=0.002, T=0.04, stride=2, dealias=deal)
            )
            rep = pns.global_energy_check(run)
            worst[deal] = min(r[3] for r in rep.rows) / rep.rows[0][2]
        assert worst[False] < 100.0 * worst[True]
        assert worst[False] < -1e-3

    def test_driven_run_rejected(self, grid16):
        a0 = taylor_green(grid16, amplitude=0.1)
        run = pns.run_pns(
            taylor_green(grid16, amplitude=0.1),
            pns.PNSConfig(dt=0.05, T=0.2, stride=2),
            a_provider=heat_drift(a0),
        )
        with pytest.raises(ValueError):
            pns.global_energy_check(run)


class TestPerturbationConsistency:
    def test_recomposition_order(self, grid32):
        # u = a + v stepped as drift plus perturbation must converge to the
        # plain run at u0 = a0 + v0 with second-order step error
        u0 = taylor_green_3d(grid32, amplitude=0.5)
        a0 = taylor_green_3d(grid32, amplitude=0.35)
        v0 = VectorField(grid32, u0.data - a0.data)
        errs = []
        for dt in (0.02, 0.01):
            cfg = pns.PNSConfig(dt=dt, T=0.2, stride=1)
            plain = pns.run_pns(u0, cfg)
            arun = pns.run_pns(a0, cfg)
            vrun = pns.run_pns(
                v0, cfg, a_provider=pns.drift_from_spacetime(arun.v)
            )
            rec = arun.v.frames[-1] + vrun.v.frames[-1]
            errs.append(
                np.sqrt(np.sum((rec - plain.v.frames[-1]) ** 2) * grid32.cell_volume)
            )
        order = np.log2(errs[0] / errs[1])
        assert order >= 1.8
        assert errs[1] <= 1e-7


class TestArtifacts:
    def test_energy_csv(self, grid16, tmp_path):
        run = pns.run_pns(
            taylor_green(grid16, 0.5), pns.PNSConfig(dt=0.05, T=0.2, stride=2)
        )
        phi = smooth_radial_cutoff(grid16, 1.0, 3.0)
        entries = pns.verify_local_energy(run, phi)
        path = tmp_path / "ledger.csv"
        pns.write_energy_csv(path, entries)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("t,lhs,rhs,slack,passed")
        assert len(lines) == 1 + len(entries)

    def test_manifest(self, grid16, tmp_path):
        run = pns.run_pns(
            taylor_green(grid16, 0.5), pns.PNSConfig(dt=0.05, T=0.2, stride=2)
        )
        path = tmp_path / "manifest.txt"
        pns.write_manifest(path, run, data_spec="planar vortex amp=0.5")
        text = path.read_text()
        assert "grid: n=16" in text
        assert "dt: 0.05" in text
        assert "stride: 2" in text
        assert "drift: none" in text
