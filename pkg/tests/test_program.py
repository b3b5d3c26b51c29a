import json
import unittest
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sps

from data_acquisition.route_data import GRAVITY, discretize, parse_route
from model.conic_program import (AffineExpr, ConicProgram, NonnegativeOrthant, ProgramBuildError,
                                 RotatedSecondOrderCone, SecondOrderCone, hyperbolic_cone_rows,
                                 rotated_cone_rows)
from model.eetc_program import (TRAJECTORY_COLUMNS, InfeasibleTimeError, SolutionError, TimeMode,
                                build_program, extract_trajectory, min_running_time)
from solver.cones import cone_violation
from utils.sample_data import sample_route, sample_stock


def sloped_route():
    return parse_route(json.dumps({
        'total_distance_m': 500.0,
        'gradients': [{'from_m': 0, 'to_m': 250, 'permille': 5},
                      {'from_m': 250, 'to_m': 500, 'permille': -5}],
        'speed_limits': [{'from_m': 0, 'to_m': 500, 'kmh': 60}],
    }))


def physical_point(stock, disc, vmap, speeds, mode):
    """Variable vector with alpha, beta tight and F, E from the energy balance."""
    dd = disc.segment_length_m
    v_all = np.concatenate([[disc.start_speed_m_per_s], speeds])
    if TimeMode(mode) is TimeMode.ENDPOINT:
        alphas = 1.0 / speeds
    else:
        alphas = 2.0 / (v_all[:-1] + v_all[1:])
    betas = speeds ** 2
    b_all = v_all ** 2
    M = stock.mass_kg
    work = (0.5 * M * (b_all[1:] - b_all[:-1])
            + (stock.davis_a_N + stock.davis_b_N_per_mps * speeds + stock.davis_c_N_per_mps2 * betas) * dd
            + M * GRAVITY * disc.altitude_change_m)
    forces = work / dd
    energies = np.maximum(work / stock.traction_efficiency, work * stock.braking_efficiency)
    x = np.zeros(vmap.total)
    x[vmap.speed], x[vmap.alpha], x[vmap.beta] = speeds, alphas, betas
    x[vmap.force], x[vmap.energy] = forces, energies
    return x, float(dd * np.sum(alphas))


class TestAffineExpr(unittest.TestCase):
    def test_arithmetic(self):
        x = np.array([1.0, 2.0, 3.0])
        expr = 2.0 * AffineExpr.var(0) + 3.0 - AffineExpr.var(1)
        self.assertAlmostEqual(expr.evaluate(x), 3.0)
        expr = 1.0 - (AffineExpr.var(2) + AffineExpr.var(2))
        self.assertEqual(expr.terms, {2: -2.0})
        self.assertAlmostEqual(expr.evaluate(x), -5.0)
        self.assertTrue(AffineExpr.const(4.0).is_constant)
        self.assertFalse((-AffineExpr.var(0)).is_constant)

    def test_hyperbolic_rows(self):
        """Slacks (u + w, 2c, u - w) lie in the SOC exactly when u*w >= c^2."""
        block = hyperbolic_cone_rows(AffineExpr.var(0), AffineExpr.var(1), 1.0)
        self.assertEqual(block.cone, SecondOrderCone(3))
        inside = np.array([e.evaluate(np.array([2.0, 0.5])) for e in block.slacks])
        outside = np.array([e.evaluate(np.array([2.0, 0.4])) for e in block.slacks])
        self.assertLessEqual(cone_violation([block.cone], inside), 1e-12)
        self.assertGreater(cone_violation([block.cone], outside), 0.0)

    def test_rotated_rows(self):
        block = rotated_cone_rows(AffineExpr.var(0), AffineExpr.var(1), AffineExpr.var(2))
        self.assertEqual(block.cone, RotatedSecondOrderCone(3))
        self.assertLessEqual(cone_violation([block.cone], np.array([2.0, 2.0, 2.0])), 1e-12)
        self.assertGreater(cone_violation([block.cone], np.array([1.0, 2.0, 2.0])), 0.0)

    def test_nonpositive_constant(self):
        for rows in (hyperbolic_cone_rows, rotated_cone_rows):
            with self.assertRaises(ProgramBuildError):
                rows(AffineExpr.var(0), AffineExpr.var(1), 0.0)
            with self.assertRaises(ProgramBuildError):
                rows(AffineExpr.var(0), AffineExpr.var(1), -1.0)

    def test_program_shapes(self):
        with self.assertRaises(ValueError):
            ConicProgram(c=np.zeros(2), A=sps.csc_matrix((1, 3)), b=np.zeros(1),
                         G=sps.csc_matrix((1, 2)), h=np.zeros(1), cones=(NonnegativeOrthant(1),))
        with self.assertRaises(ValueError):
            ConicProgram(c=np.zeros(2), A=sps.csc_matrix((0, 2)), b=np.zeros(0),
                         G=sps.csc_matrix((2, 2)), h=np.zeros(2), cones=(NonnegativeOrthant(1),))


class TestBuildProgram(unittest.TestCase):
    def setUp(self):
        self.stock = sample_stock()

    def test_endpoint_sizes(self):
        disc = discretize(sample_route(), 5, (0.0, None))
        program, vmap = build_program(self.stock, disc, 140.0, 'endpoint')
        self.assertEqual(program.n_variables, 25)
        self.assertEqual(program.n_equalities, 6)
        self.assertEqual(program.cones[0], NonnegativeOrthant(45))
        self.assertEqual(program.cones[1:], (SecondOrderCone(3),) * 10)
        self.assertEqual(program.n_cone_rows, 75)
        np.testing.assert_allclose(program.c[vmap.energy], 1.0)
        np.testing.assert_allclose(program.c[:vmap.energy.start], 0.0)

    def test_fixed_end_speed_adds_equality(self):
        disc = discretize(sample_route(), 5, (0.0, 0.0))
        program, vmap = build_program(self.stock, disc, 250.0, TimeMode.TRAPEZOIDAL)
        self.assertEqual(program.n_equalities, 7)
        self.assertEqual(program.cones[0], NonnegativeOrthant(44))
        last = program.A.toarray()[-1]
        self.assertEqual(last[vmap.v(5)], 1.0)
        self.assertEqual(program.b[-1], 0.0)

    def test_time_row(self):
        disc = discretize(sample_route(), 8, (0.0, None))
        program, vmap = build_program(self.stock, disc, 140.0)
        row = program.A.toarray()[0]
        np.testing.assert_allclose(row[vmap.alpha], disc.segment_length_m)
        self.assertEqual(np.count_nonzero(row), 8)
        self.assertEqual(program.b[0], 140.0)

    def test_energy_rows_hold_at_physical_point(self):
        """A trajectory obeying the dynamics satisfies every equality row."""
        rng = np.random.default_rng(7)
        disc = discretize(sloped_route(), 6, (3.0, None))
        for mode in TimeMode:
            speeds = rng.uniform(2.0, 15.0, 6)
            _, vmap = build_program(self.stock, disc, 400.0, mode)
            x, journey = physical_point(self.stock, disc, vmap, speeds, mode)
            program, _ = build_program(self.stock, disc, journey, mode)
            residual = program.A @ x - program.b
            np.testing.assert_allclose(residual, 0.0, atol=1e-6 * np.max(np.abs(program.b)))

    def test_rotated_flag(self):
        disc = discretize(sample_route(), 5, (0.0, None))
        program, _ = build_program(self.stock, disc, 140.0, rotated_cones=True)
        self.assertEqual(program.cones[1:], (RotatedSecondOrderCone(3),) * 10)

    def test_relaxation_contains_physical_points(self):
        """Dynamically consistent points inside the effort and power limits satisfy every row."""
        st = self.stock
        rng = np.random.default_rng(2024)
        disc = discretize(sample_route(), 5, (0.0, None))
        limit = disc.point_speed_limit_m_per_s[1:]
        _, vmap = build_program(st, disc, 200.0)
        kept = 0
        for mode in TimeMode:
            for rotated in (False, True):
                for _ in range(100):
                    speeds = rng.uniform(0.5, 1.0, 5) * limit
                    x, journey = physical_point(st, disc, vmap, speeds, mode)
                    F, alpha = x[vmap.force], x[vmap.alpha]
                    feasible = ((F <= st.max_tractive_effort_N) & (F >= -st.max_braking_effort_N)
                                & (F <= st.max_traction_power_W * alpha) & (-F <= st.max_braking_power_W * alpha))
                    if not np.all(feasible):
                        continue
                    kept += 1
                    program, _ = build_program(st, disc, journey, mode, rotated_cones=rotated)
                    self.assertLessEqual(cone_violation(program.cones, program.h - program.G @ x), 1e-9)
                    np.testing.assert_allclose(program.A @ x, program.b, atol=1e-6 * np.max(np.abs(program.b)))
        self.assertGreater(kept, 0)

    def test_relaxation_excludes_short_alpha(self):
        disc = discretize(sample_route(), 5, (0.0, None))
        program, vmap = build_program(self.stock, disc, 200.0)
        speeds = np.full(5, 10.0)
        x = np.zeros(vmap.total)
        x[vmap.speed] = speeds
        x[vmap.alpha] = 0.5 / speeds
        x[vmap.beta] = speeds ** 2
        self.assertGreater(cone_violation(program.cones, program.h - program.G @ x), 1e-3)

    def test_min_running_time(self):
        route = sample_route()
        v_max = 80.0 / 3.6
        free = discretize(route, 10, (0.0, None))
        self.assertAlmostEqual(min_running_time(free, 'endpoint'), 2707.0 / v_max, places=6)
        fixed = discretize(route, 10, (0.0, 0.0))
        self.assertAlmostEqual(min_running_time(fixed, 'trapezoidal'), 270.7 * 12.0 / v_max, places=6)
        self.assertEqual(min_running_time(fixed, 'endpoint'), np.inf)

    def test_infeasible_time(self):
        """Journey times at or below the running time at the limits are rejected."""
        with self.assertRaises(InfeasibleTimeError):
            build_program(self.stock, discretize(sample_route(), 238, (0.0, None)), 100.0)
        # the same T is fine for a fine grid but not for a coarse trapezoidal one
        build_program(self.stock, discretize(sample_route(), 238, (0.0, 0.0)), 140.0, 'trapezoidal')
        with self.assertRaises(InfeasibleTimeError):
            build_program(self.stock, discretize(sample_route(), 10, (0.0, 0.0)), 140.0, 'trapezoidal')

    def test_invalid_requests(self):
        with self.assertRaises(ProgramBuildError):
            build_program(self.stock, discretize(sample_route(), 10, (0.0, 0.0)), 200.0, 'endpoint')
        with self.assertRaises(ProgramBuildError):
            build_program(self.stock, discretize(sample_route(), 10, (0.0, None)), 200.0, 'midpoint')


class TestExtractTrajectory(unittest.TestCase):
    def setUp(self):
        self.stock = sample_stock()
        self.disc = discretize(sample_route(), 4, (0.0, 0.0))
        self.program, self.vmap = build_program(self.stock, self.disc, 400.0, 'trapezoidal')
        x = np.arange(self.vmap.total, dtype=float) + 1.0
        self.solution = SimpleNamespace(status='Optimal', x=x, iterations=12, gap=1e-9, wall_time_s=0.01)

    def test_layout(self):
        traj = extract_trajectory(self.solution, self.vmap, self.disc)
        np.testing.assert_allclose(traj.speeds, [0.0, 1.0, 2.0, 3.0, 0.0])
        np.testing.assert_allclose(traj.alphas, [5.0, 6.0, 7.0, 8.0])
        np.testing.assert_allclose(traj.betas, [0.0, 9.0, 10.0, 11.0, 12.0])
        self.assertAlmostEqual(traj.objective_kWh, (17 + 18 + 19 + 20) / 3.6e6)
        self.assertEqual(traj.n_segments, 4)
        self.assertTrue(traj.end_speed_fixed)

    def test_frame(self):
        frame = extract_trajectory(self.solution, self.vmap, self.disc).to_frame()
        self.assertEqual(list(frame.columns), TRAJECTORY_COLUMNS)
        self.assertEqual(len(frame), 5)
        self.assertTrue(np.isnan(frame.loc[0, 'force_N']))
        self.assertTrue(np.isnan(frame.loc[0, 'alpha_s_per_m']))
        self.assertEqual(frame.loc[4, 'distance_m'], 2707.0)

    def test_non_optimal(self):
        failed = SimpleNamespace(**{**self.solution.__dict__, 'status': 'NumericalError'})
        with self.assertRaises(SolutionError):
            extract_trajectory(failed, self.vmap, self.disc)


if __name__ == '__main__':
    unittest.main()
