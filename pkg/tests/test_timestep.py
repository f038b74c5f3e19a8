import dataclasses
import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from piezoheat.assembly import assemble_generator, dissipation_rate, h_inner
from piezoheat.config import initial_state, preset
from piezoheat.domain import Grid, StateVector, energy, random_state
from piezoheat.fracdiff import XiQuadrature
from piezoheat.timestep import (
    TRACE_HEADER,
    Scheme,
    SimConfig,
    SimulationError,
    Stepper,
    simulate,
    step,
)

from conftest import make_system


class TestSimConfig:
    def test_scheme_from_string(self):
        assert SimConfig(0.1, 1.0, "backward_euler").scheme is Scheme.BACKWARD_EULER

    @pytest.mark.parametrize(
        "kw",
        [dict(dt=0.0, t_end=1.0), dict(dt=1.0, t_end=0.5), dict(dt=0.1, t_end=1.0, trace_stride=0)],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_bad_scheme(self):
        with pytest.raises(ValueError):
            SimConfig(0.1, 1.0, "leapfrog")

    def test_step_count(self):
        assert SimConfig(0.1, 1.0).n_steps == 10


class TestStep:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_zero_fixed_point(self, small_system, scheme):
        _, _, g, A = small_system
        assert not step(StateVector.zeros(g), A, scheme, 0.1).to_array().any()

    def test_backward_euler_equation(self, small_system, rng):
        _, _, g, A = small_system
        U = random_state(g, rng)
        dt = 0.05
        y = step(U, A, "backward_euler", dt).to_array()
        np.testing.assert_allclose(y - dt * (A.matrix @ y), U.to_array(), atol=1e-12)

    def test_crank_nicolson_equation(self, small_system, rng):
        _, _, g, A = small_system
        U = random_state(g, rng)
        dt = 0.05
        x = U.to_array()
        y = step(U, A, "crank_nicolson", dt).to_array()
        np.testing.assert_allclose(y - 0.5 * dt * (A.matrix @ y), x + 0.5 * dt * (A.matrix @ x), atol=1e-12)

    def test_crank_nicolson_midpoint_identity(self, small_system, rng):
        # exact for CN: E+ - E = dt * D(midpoint)
        mp, fp, g, A = small_system
        U = random_state(g, rng)
        dt = 0.1
        V = step(U, A, "crank_nicolson", dt)
        mid = StateVector.from_array(g, 0.5 * (U.to_array() + V.to_array()))
        dE = energy(V, mp, g, fp).total - energy(U, mp, g, fp).total
        assert dE == pytest.approx(dt * dissipation_rate(mid, mp, fp, g), rel=1e-9, abs=1e-13)

    def test_rejects_nonpositive_dt(self, small_system):
        _, _, _, A = small_system
        with pytest.raises(ValueError):
            Stepper(A, "backward_euler", 0.0)

    def test_non_finite_input_aborts(self, small_system):
        _, _, g, A = small_system
        x = np.zeros(g.size)
        x[0] = np.nan
        with pytest.raises(SimulationError, match="non-finite"):
            Stepper(A, "backward_euler", 0.1)(x)


class TestMonotonicity:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from([1e-1, 1e-2, 1e-3]))
    def test_backward_euler_random(self, seed, dt):
        mp, fp, g, A = make_system(n_heat=8, n_beam=8, K=6)
        U0 = initial_state("random", g, seed, mp)
        trace = simulate(SimConfig(dt, 20 * dt, "backward_euler"), mp, fp, g, U0, A)
        E = trace.totals
        assert np.all(np.diff(E) <= 1e-12 * E[:-1])


class TestSimulate:
    def test_zero_run(self, small_system):
        mp, fp, g, A = small_system
        trace = simulate(SimConfig(0.1, 1.0), mp, fp, g, StateVector.zeros(g), A)
        assert len(trace) == 11
        assert not trace.totals.any()
        assert not any(trace.dissipation_residuals)

    def test_stride_records_last_step(self, small_system):
        mp, fp, g, A = small_system
        U0 = initial_state("standard", g, 0, mp)
        trace = simulate(SimConfig(0.1, 1.0, trace_stride=3), mp, fp, g, U0, A)
        np.testing.assert_allclose(trace.times, [0.0, 0.3, 0.6, 0.9, 1.0])
        assert len(trace.breakdowns) == len(trace.dissipation_residuals) == len(trace.transmission)

    def test_rejects_memory_initial_data(self, small_system):
        mp, fp, g, A = small_system
        U0 = StateVector.zeros(g)
        U0.phi[0, 0] = 1.0
        with pytest.raises(ValueError, match="phi"):
            simulate(SimConfig(0.1, 1.0), mp, fp, g, U0, A)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_partial_trace_on_failure(self, small_system):
        mp, fp, g, A = small_system
        # shifted generator: backward Euler amplifies by about 20 per step
        bad = dataclasses.replace(A, matrix=(A.matrix + 9.5 * sp.identity(g.size)).tocsr())
        U0 = initial_state("standard", g, 0, mp)
        with pytest.raises(SimulationError) as info:
            simulate(SimConfig(0.1, 100.0, "backward_euler"), mp, fp, g, U0, bad)
        assert info.value.trace is not None and 1 <= len(info.value.trace) < 1001

    def test_heat_only_decay(self):
        cfg = preset("heat-only")
        mp = cfg.material
        errs = []
        for n in (20, 40):
            g = Grid.build(mp, n, n, XiQuadrature.empty())
            U0 = initial_state("heat", g, 0, mp)
            trace = simulate(SimConfig(1e-3, 0.2), mp, cfg.fractional, g, U0)
            t = np.asarray(trace.times)
            exact = trace.totals[0] * np.exp(-2 * mp.kappa * (np.pi / mp.ell1) ** 2 * t)
            errs.append(np.abs(trace.totals - exact).max() / trace.totals[0])
        assert errs[1] < 1e-2
        assert errs[1] < errs[0]

    def test_conservative_part_conserves(self, small_system, rng):
        mp, fp, g, A = small_system
        G = A.gram.tocsr()
        Ginv = sp.diags(1.0 / G.diagonal())
        # G is diagonal on the rows carrying R, so G^{-1} R restores the skew part
        skew = dataclasses.replace(A, matrix=(A.matrix + Ginv @ A.damping).tocsr())
        stepper = Stepper(skew, "crank_nicolson", 0.05)
        x = random_state(g, rng).to_array()
        e0 = h_inner(A, x, x)
        for _ in range(200):
            x = stepper(x)
        assert h_inner(A, x, x) == pytest.approx(e0, rel=1e-10)

    def test_residual_second_order(self):
        cfg = preset("standard-a05")
        g = cfg.build_grid()
        A = assemble_generator(cfg.material, cfg.fractional, g)
        U0 = initial_state("standard", g, 0, cfg.material)
        peaks = []
        for dt in (2e-2, 1e-2):
            tr = simulate(SimConfig(dt, 1.0), cfg.material, cfg.fractional, g, U0, A, track_transmission=False)
            peaks.append(max(tr.dissipation_residuals))
        assert 3.0 <= peaks[0] / peaks[1] <= 5.0


class TestTraceCsv:
    def test_format(self, small_system):
        mp, fp, g, A = small_system
        trace = simulate(SimConfig(0.1, 0.3), mp, fp, g, initial_state("standard", g, 0, mp), A)
        buf = io.StringIO()
        trace.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert len(lines) == 1 + len(trace)
        field = lines[1].split(",")[1]
        mantissa = field.split("e")[0].lstrip("-").replace(".", "")
        assert len(mantissa) == 12
        parsed = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        np.testing.assert_allclose(parsed[:, 1], trace.totals, rtol=1e-11)
