import math

import numpy as np
import pytest

from strainflow import initial_data, solver, spectral
from strainflow.exceptions import InstabilityError, InvalidInputError


class TestNonlinearTerm:
    def test_zero_velocity(self, grid8):
        u_hat = np.zeros((3,) + (grid8.n,) * 3, dtype=complex)
        assert np.max(np.abs(solver.nonlinear_term(grid8, u_hat))) == 0.0

    def test_shear_mode_self_advection_vanishes(self, grid16):
        # u = sin(y) e1 advects itself along x where nothing varies
        n_hat = solver.nonlinear_term(grid16, initial_data.shear(grid16))
        assert np.max(np.abs(n_hat)) < 1e-12

    def test_output_projected(self, grid16):
        u_hat = initial_data.taylor_green(grid16)
        n_hat = solver.nonlinear_term(grid16, u_hat)
        assert spectral.divergence_residual(grid16, n_hat) < 1e-12
        # orthogonal to an arbitrary gradient field
        rng = np.random.default_rng(0)
        f_hat = grid16.fft(rng.standard_normal((grid16.n,) * 3))
        grad = np.stack([1j * grid16.kdx * f_hat, 1j * grid16.kdy * f_hat,
                         1j * grid16.kdz * f_hat])
        inner = np.sum(np.real(np.conj(n_hat) * grad)) * grid16.spectral_weight
        scale = np.sqrt(spectral.sobolev_norm_sq(grid16, n_hat)
                        * spectral.sobolev_norm_sq(grid16, grad))
        assert abs(inner) < 1e-12 * scale

    def test_mean_and_nyquist_free(self, grid8):
        u_hat = initial_data.random_div_free(grid8, seed=1, max_wavenumber=3)
        n_hat = solver.nonlinear_term(grid8, u_hat, dealias=False)
        assert np.max(np.abs(n_hat[:, 0, 0, 0])) == 0.0
        half = grid8.n // 2
        assert np.max(np.abs(n_hat[:, half, :, :])) == 0.0
        assert np.max(np.abs(n_hat[:, :, :, half])) == 0.0


class TestStep:
    def test_shear_exact_decay_100_steps(self, grid16):
        config = solver.SolverConfig(n=16, viscosity=1.0, dt=1e-3, t_end=0.1)
        stepper = solver.Stepper(grid16, config)
        state = solver.SolverState(initial_data.shear(grid16))
        for _ in range(100):
            state = stepper.step(state)
        u_phys = grid16.ifft(state.u_hat)
        _, y, _ = grid16.coords()
        expected = math.exp(-0.1) * np.broadcast_to(np.sin(y), (16,) * 3)
        assert np.max(np.abs(u_phys[0] - expected)) / math.exp(-0.1) < 1e-9

    def test_zero_stays_zero(self, grid8):
        config = solver.SolverConfig(n=8, dt=1e-2, t_end=0.1)
        stepper = solver.Stepper(grid8, config)
        state = solver.SolverState(np.zeros((3, 8, 8, 8), dtype=complex))
        state = stepper.step(state)
        assert np.max(np.abs(state.u_hat)) == 0.0

    def test_energy_never_increases_unforced(self, tg16):
        kinetic = tg16.kinetic
        assert all(b <= a * (1 + 1e-13) for a, b in zip(kinetic, kinetic[1:]))

    def test_divergence_preserved(self, tg16):
        worst = max(solver.divergence_invariant(tg16.grid, s) for s in tg16.states)
        assert worst < 1e-12

    def test_one_step_vs_two_half_steps_order(self, grid16):
        # the defect of one dt step against two dt/2 steps shrinks ~2^5
        # (mild viscosity keeps the heat factor out of the asymptotics)
        u0 = initial_data.random_div_free(grid16, seed=2, amplitude=5.0)

        def defect(dt):
            cfg = solver.SolverConfig(n=16, viscosity=0.1, dt=dt, t_end=1.0)
            stepper = solver.Stepper(grid16, cfg)
            one = stepper.step(solver.SolverState(u0.copy()), dt)
            two = stepper.step(stepper.step(solver.SolverState(u0.copy()), dt / 2), dt / 2)
            return np.sqrt(spectral.sobolev_norm_sq(grid16, one.u_hat - two.u_hat))

        d1, d2 = defect(2e-2), defect(1e-2)
        assert 24.0 < d1 / d2 < 40.0

    def test_instability_reported_with_last_state(self, grid8):
        config = solver.SolverConfig(n=8, viscosity=1e-6, dt=5.0, t_end=50.0)
        u0 = initial_data.random_div_free(grid8, seed=3, amplitude=1e4)
        with pytest.raises(InstabilityError) as excinfo:
            solver.run(config, u0, grid=grid8)
        last = excinfo.value.last_state
        assert last is not None and np.all(np.isfinite(last.u_hat))


class TestRun:
    def test_record_cadence(self, grid8):
        config = solver.SolverConfig(n=8, dt=1e-3, t_end=0.02, record_every=5)
        result = solver.run(config, initial_data.taylor_green(grid8), grid=grid8,
                            keep_states=True)
        assert len(result.times) == 5  # t = 0, 5dt, 10dt, 15dt, 20dt
        assert np.allclose(np.diff(result.times), 5e-3, rtol=0, atol=1e-15)
        assert result.final_state.step_count == 20

    def test_adaptive_cfl(self, grid8):
        config = solver.SolverConfig(n=8, dt=1e-2, t_end=0.05, adaptive_cfl=True,
                                     record_every=1)
        result = solver.run(config, initial_data.taylor_green(grid8), grid=grid8)
        assert result.final_state.t == pytest.approx(0.05, abs=1e-10)
        dx = 2 * np.pi / 8
        u_max = np.sqrt(np.sum(grid8.ifft(initial_data.taylor_green(grid8)) ** 2,
                               axis=0)).max()
        assert result.final_state.step_count >= 0.05 / (0.5 * dx / u_max) - 1

    def test_bad_initial_shape(self, grid8):
        config = solver.SolverConfig(n=8, dt=1e-3, t_end=0.01)
        with pytest.raises(InvalidInputError):
            solver.run(config, np.zeros((3, 4, 4, 4), dtype=complex), grid=grid8)

    def test_dealias_changes_wideband_budget(self, grid16):
        # with spectral content beyond the 2/3 band, aliasing shifts the
        # budget; the dealiased run keeps the energy identity tighter
        u0 = initial_data.random_div_free(grid16, seed=4, max_wavenumber=7,
                                          amplitude=20.0)
        residuals = {}
        for dealias in (True, False):
            config = solver.SolverConfig(n=16, viscosity=0.05, dt=1e-3, t_end=0.1,
                                         record_every=10, dealias=dealias)
            result = solver.run(config, u0, grid=grid16, keep_states=True)
            residuals[dealias] = np.max(np.abs(
                solver.energy_budget(grid16, result.states, viscosity=0.05)))
        assert residuals[True] != residuals[False]
        assert residuals[True] < residuals[False]


class TestEnergyBudget:
    def test_exact_solution_residual(self, grid16):
        config = solver.SolverConfig(n=16, viscosity=1.0, dt=1e-3, t_end=1.0,
                                     record_every=10)
        result = solver.run(config, initial_data.shear(grid16), grid=grid16,
                            keep_states=True)
        resid = solver.energy_budget(grid16, result.states)
        assert np.max(np.abs(resid)) < 1e-8

    def test_zero_flow(self, grid8):
        states = [solver.SolverState(np.zeros((3, 8, 8, 8), dtype=complex), t, i)
                  for i, t in enumerate(np.linspace(0, 1, 6))]
        assert np.max(np.abs(solver.energy_budget(grid8, states))) == 0.0

    def test_needs_five_snapshots(self, grid8):
        states = [solver.SolverState(np.zeros((3, 8, 8, 8), dtype=complex), t, i)
                  for i, t in enumerate(np.linspace(0, 1, 4))]
        with pytest.raises(InvalidInputError):
            solver.energy_budget(grid8, states)

    def test_fourth_order_refinement(self, grid16):
        # residual falls ~16x per dt halving across a decade of dt
        u0 = initial_data.taylor_green(grid16)
        residuals = []
        for dt in (4e-3, 2e-3, 1e-3, 5e-4):
            config = solver.SolverConfig(n=16, viscosity=1.0, dt=dt, t_end=0.4,
                                         record_every=10)
            result = solver.run(config, u0, grid=grid16, keep_states=True)
            residuals.append(np.max(np.abs(solver.energy_budget(grid16, result.states))))
        for coarse, fine in zip(residuals, residuals[1:]):
            assert 8.0 < coarse / fine < 32.0


class TestForcing:
    def test_expression_force_projected(self, grid16):
        force = solver.make_force(grid16, "expr:sin(y);0.0;cos(x)*sin(z)")
        f_hat = force(0.0)
        assert spectral.divergence_residual(grid16, f_hat) < 1e-12
        assert np.max(np.abs(f_hat[:, 0, 0, 0])) == 0.0

    def test_time_dependent_expression(self, grid16):
        force = solver.make_force(grid16, "expr:sin(y)*t;0.0;0.0")
        assert force.time_dependent
        assert np.max(np.abs(force(0.0))) == 0.0
        assert np.max(np.abs(force(1.0))) > 0.0

    def test_forced_energy_bound(self, grid16):
        # from rest, |u(t)| <= max|f| / nu (smallest active wavenumber is 1)
        config = solver.SolverConfig(n=16, viscosity=1.0, dt=1e-3, t_end=0.5,
                                     record_every=25, force="expr:0.1*sin(y);0;0")
        u0 = np.zeros((3, 16, 16, 16), dtype=complex)
        kinetic = []
        result = solver.run(config, u0, grid=grid16,
                            on_record=lambda s: kinetic.append(
                                solver.kinetic_energy(grid16, s.u_hat)))
        assert kinetic[-1] > 0.0
        force = solver.make_force(grid16, config.force)
        f_norm = np.sqrt(spectral.sobolev_norm_sq(grid16, force(0.0)))
        bound = 0.5 * (f_norm / config.viscosity) ** 2
        assert all(k <= bound * (1 + 1e-9) for k in kinetic)

    def test_file_force(self, tmp_path, grid8):
        from strainflow import snapshots
        u_phys = grid8.ifft(initial_data.shear(grid8))
        path = tmp_path / "f.snap"
        snapshots.save_snapshot(path, "velocity", 0.0, 1.0, u_phys)
        force = solver.make_force(grid8, f"file:{path}")
        f_hat = force(3.7)
        assert spectral.divergence_residual(grid8, f_hat) < 1e-12
        assert np.max(np.abs(f_hat)) > 0.0

    def test_file_sequence_force_switches_at_knots(self, tmp_path, grid8):
        from strainflow import snapshots
        early = tmp_path / "f0.snap"
        late = tmp_path / "f1.snap"
        snapshots.save_snapshot(early, "velocity", 0.0, 1.0,
                                grid8.ifft(initial_data.shear(grid8)))
        snapshots.save_snapshot(late, "velocity", 0.5, 1.0,
                                grid8.ifft(initial_data.taylor_green(grid8)))
        force = solver.make_force(grid8, f"files:{late},{early}")  # any order
        assert force.time_dependent
        assert not np.array_equal(force(0.1), force(0.9))
        assert np.array_equal(force(0.5), force(2.0))

    def test_bad_force_spec(self, grid8):
        with pytest.raises(InvalidInputError):
            solver.make_force(grid8, "gibberish:1")
        with pytest.raises(InvalidInputError):
            solver.make_force(grid8, "expr:sin(y)")  # needs three components
        with pytest.raises(InvalidInputError):
            solver.make_force(grid8, "files:")


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(InvalidInputError):
            solver.SolverConfig(viscosity=0.0)
        with pytest.raises(InvalidInputError):
            solver.SolverConfig(dt=-1e-3)
        with pytest.raises(InvalidInputError):
            solver.SolverConfig(record_every=0)
