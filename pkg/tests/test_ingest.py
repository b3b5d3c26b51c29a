import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from data_acquisition.rolling_stock import (InputDataError, davis_resistance, dump_rolling_stock,
                                            load_rolling_stock, parse_rolling_stock)
from data_acquisition.route_data import DiscretizationError, discretize, load_route, parse_route
from utils.sample_data import SUBURBAN_STOCK, flat_route_document, sample_route, sample_stock


def route_text(total, gradients, limits):
    return json.dumps({
        'total_distance_m': total,
        'gradients': [{'from_m': a, 'to_m': b, 'permille': g} for a, b, g in gradients],
        'speed_limits': [{'from_m': a, 'to_m': b, 'kmh': v} for a, b, v in limits],
    })


class TestRollingStock(unittest.TestCase):
    def setUp(self):
        self.doc = dict(SUBURBAN_STOCK)
        self.stock = parse_rolling_stock(json.dumps(self.doc))

    def test_unit_conversion(self):
        """Engineering units are converted to SI."""
        self.assertAlmostEqual(self.stock.mass_kg, 144000.0)
        self.assertAlmostEqual(self.stock.max_tractive_effort_N, 230810.0)
        self.assertAlmostEqual(self.stock.max_traction_power_W, 2.52e6)
        self.assertAlmostEqual(self.stock.davis_a_N, 3001.6)
        self.assertAlmostEqual(self.stock.davis_b_N_per_mps, 72.576, places=6)
        self.assertAlmostEqual(self.stock.davis_c_N_per_mps2, 9.0321, places=3)

    def test_round_trip(self):
        """Converting back gives the engineering-unit document."""
        back = self.stock.to_engineering_units()
        for key, value in self.doc.items():
            self.assertAlmostEqual(back[key], value, places=9, msg=key)
        again = parse_rolling_stock(dump_rolling_stock(self.stock))
        for key, value in self.stock.__dict__.items():
            self.assertAlmostEqual(getattr(again, key) / value, 1.0, places=12, msg=key)

    def test_davis_resistance(self):
        self.assertAlmostEqual(davis_resistance(self.stock, 0.0), 3001.6)
        self.assertAlmostEqual(davis_resistance(self.stock, 10.0), 4630.568, places=2)
        self.assertAlmostEqual(davis_resistance(self.stock, 20.0), 8065.95, places=1)
        forces = davis_resistance(self.stock, np.array([0.0, 10.0]))
        np.testing.assert_allclose(forces, [3001.6, 4630.568], rtol=1e-6)
        with self.assertRaises(ValueError):
            davis_resistance(self.stock, -1.0)

    def test_davis_resistance_increasing(self):
        rng = np.random.default_rng(11)
        speeds = np.unique(rng.uniform(0.0, 40.0, 200))
        forces = davis_resistance(self.stock, speeds)
        self.assertTrue(np.all(np.diff(forces) > 0))

    def test_invalid_documents(self):
        """Missing, non-positive and out-of-range fields are rejected."""
        missing = dict(self.doc)
        del missing['mass_t']
        negative = dict(self.doc, davis_A_kN=-1.0)
        eta = dict(self.doc, eta_traction=1.2)
        lossless = dict(self.doc, eta_traction=1.0, eta_braking=1.0)
        for doc in (missing, negative, eta, lossless):
            with self.assertRaises(InputDataError):
                parse_rolling_stock(json.dumps(doc))
        with self.assertRaises(InputDataError):
            parse_rolling_stock("not json")

    def test_sample_stock_matches_file(self):
        stock_file = Path(__file__).parent.parent / 'data' / 'suburban_stock.json'
        self.assertEqual(load_rolling_stock(stock_file), sample_stock())


class TestRoute(unittest.TestCase):
    def test_flat_route(self):
        route = parse_route(json.dumps(flat_route_document(2707.0, 80.0)))
        self.assertEqual(route.total_distance_m, 2707.0)
        self.assertEqual(len(route.limit_intervals), 1)
        self.assertAlmostEqual(route.limit_intervals[0][2], 22.222, places=3)

    def test_limit_conversion(self):
        route = parse_route(route_text(1000, [(0, 1000, 0)], [(0, 1000, 72)]))
        self.assertAlmostEqual(route.limit_intervals[0][2], 20.0)

    def test_coverage_errors(self):
        """Overlaps, gaps, wrong ends and bad values are rejected."""
        bad = [
            route_text(2707, [(0, 1000, 0), (900, 2707, 0)], [(0, 2707, 80)]),
            route_text(2707, [(0, 1000, 0), (1100, 2707, 0)], [(0, 2707, 80)]),
            route_text(2707, [(0, 2707, 0)], [(0, 2000, 80)]),
            route_text(2707, [(10, 2707, 0)], [(0, 2707, 80)]),
            route_text(2707, [(0, 2707, 0)], [(0, 2707, -80)]),
            route_text(2707, [(0, 2707, 120)], [(0, 2707, 80)]),
            route_text(0, [(0, 0, 0)], [(0, 0, 80)]),
        ]
        for text in bad:
            with self.assertRaises(InputDataError):
                parse_route(text)

    def test_elevation_profile(self):
        route = parse_route(route_text(200, [(0, 150, 10), (150, 200, -20)], [(0, 200, 80)]))
        self.assertAlmostEqual(route.elevation_at(150.0), 1.5)
        self.assertAlmostEqual(route.elevation_at(200.0), 0.5)
        self.assertAlmostEqual(route.elevation_change(100.0, 200.0), -0.5)

    def test_sample_route_matches_file(self):
        route_file = Path(__file__).parent.parent / 'data' / 'synthetic_route.json'
        self.assertEqual(load_route(route_file), sample_route())


class TestDiscretize(unittest.TestCase):
    def test_segment_length(self):
        disc = discretize(sample_route(), 238)
        self.assertAlmostEqual(disc.segment_length_m, 11.374, places=3)
        self.assertEqual(disc.distances[-1], 2707.0)
        self.assertAlmostEqual(disc.n_segments * disc.segment_length_m, 2707.0, places=9)
        self.assertEqual(len(disc.altitude_change_m), 238)
        self.assertEqual(len(disc.point_speed_limit_m_per_s), 239)

    def test_straddling_gradient(self):
        """A segment spanning a gradient change gets the length-weighted altitude change."""
        route = parse_route(route_text(200, [(0, 150, 10), (150, 200, -20)], [(0, 200, 80)]))
        disc = discretize(route, 2)
        np.testing.assert_allclose(disc.altitude_change_m, [1.0, -0.5], atol=1e-12)
        np.testing.assert_allclose(disc.segment_gradient_permille, [10.0, -5.0], atol=1e-9)
        self.assertAlmostEqual(np.sum(disc.altitude_change_m), route.elevation_at(200.0))

    def test_point_limits(self):
        """Interior points take the lower limit of their two segments."""
        route = parse_route(route_text(200, [(0, 200, 0)], [(0, 100, 72), (100, 200, 36)]))
        disc = discretize(route, 4, (0.0, 0.0))
        np.testing.assert_allclose(disc.point_speed_limit_m_per_s, [20.0, 20.0, 10.0, 10.0, 10.0])

    def test_free_end_speed(self):
        disc = discretize(sample_route(), 10, (0.0, None))
        self.assertFalse(disc.end_speed_fixed)
        self.assertTrue(discretize(sample_route(), 10).end_speed_fixed)

    def test_invalid_requests(self):
        route = sample_route()
        for n in (1, 0, -3, 2.5, True):
            with self.assertRaises(DiscretizationError):
                discretize(route, n)
        with self.assertRaises(DiscretizationError):
            discretize(route, 10, (30.0, 0.0))
        with self.assertRaises(DiscretizationError):
            discretize(route, 10, (0.0, -1.0))

    def test_read_only_arrays(self):
        disc = discretize(sample_route(), 10)
        with self.assertRaises(ValueError):
            disc.altitude_change_m[0] = 1.0

    def test_load_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'route.json'
            path.write_text(route_text(500, [(0, 500, 2)], [(0, 500, 60)]))
            route = load_route(path)
        self.assertAlmostEqual(route.elevation_at(500.0), 1.0)


if __name__ == '__main__':
    unittest.main()
