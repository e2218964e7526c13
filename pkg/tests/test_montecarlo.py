"""
Unit tests for the Monte Carlo layer: UE placement, per-trial streams,
PMD estimation, sweeps, worker-count independence and the t_sig solver.
"""

import json
import math
import unittest
from unittest import mock

import numpy as np

from engine import montecarlo
from engine.channel import detect
from engine.models import (
    ChannelParams,
    ProcedureKind,
    ProcedureSpec,
    RunParams,
    ScenarioConfig,
)
from engine.montecarlo import (
    TrialSet,
    bisect_min_tsig,
    estimate_pmd,
    estimate_pmd_paired,
    min_tsig_for_pmd,
    place_ue,
    simulate_trials,
    sweep_distance,
    sweep_tsig,
    trial_rng,
)
from engine.procedures import build_procedure


def _scenario(channel: ChannelParams | None = None, **run) -> ScenarioConfig:
    run.setdefault("trials", 400)
    return ScenarioConfig(channel=channel or ChannelParams(), run=RunParams(**run))


def _procedure(kind: ProcedureKind, ue_beams: int):
    return build_procedure(ProcedureSpec(kind=kind, ue_beams=ue_beams))


class TestPlaceUe(unittest.TestCase):
    def test_degenerate_ring(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(20):
            d, bearing = place_ue(50.0, 50.0, rng)
            self.assertEqual(d, 50.0)
            self.assertTrue(0.0 <= bearing < 2 * math.pi)

    def test_annulus_mean_distance(self) -> None:
        rng = np.random.default_rng(1)
        r1, r2 = 10.0, 100.0
        distances = np.array([place_ue(r1, r2, rng)[0] for _ in range(20_000)])
        # uniform by area: E[d] = 2/3 (R2^3 - R1^3) / (R2^2 - R1^2)
        expected = 2.0 / 3.0 * (r2**3 - r1**3) / (r2**2 - r1**2)
        self.assertAlmostEqual(distances.mean(), expected, delta=1.0)

    def test_annulus_distribution(self) -> None:
        rng = np.random.default_rng(2)
        r1, r2, n = 20.0, 95.0, 5_000
        samples = np.sort([place_ue(r1, r2, rng)[0] for _ in range(n)])
        cdf = (samples**2 - r1**2) / (r2**2 - r1**2)
        empirical = np.arange(1, n + 1) / n
        ks = np.max(np.abs(empirical - cdf))
        self.assertLess(ks, 2.0 / math.sqrt(n))
        self.assertTrue(np.all((samples >= r1) & (samples <= r2)))

    def test_invalid_annulus(self) -> None:
        rng = np.random.default_rng(0)
        with self.assertRaises(ValueError):
            place_ue(100.0, 50.0, rng)
        with self.assertRaises(ValueError):
            place_ue(-1.0, 50.0, rng)
        with self.assertRaises(ValueError):
            place_ue(0.0, 50.0, rng)


class TestTrialRng(unittest.TestCase):
    def test_same_seed_and_index_repeat(self) -> None:
        a = trial_rng(7, 123).random(5)
        b = trial_rng(7, 123).random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ_by_index_and_seed(self) -> None:
        base = trial_rng(7, 0).random(5)
        self.assertFalse(np.array_equal(base, trial_rng(7, 1).random(5)))
        self.assertFalse(np.array_equal(base, trial_rng(8, 0).random(5)))


class TestEstimatePmd(unittest.TestCase):
    def test_forced_outage_always_misses(self) -> None:
        scn = _scenario(ChannelParams(b_out=-100.0), trials=200)
        est = estimate_pmd(scn, 10e-6)
        self.assertEqual(est.pmd, 1.0)
        self.assertEqual(est.misses, 200)
        self.assertEqual(est.ci95_halfwidth, 0.0)

    def test_strong_los_never_misses(self) -> None:
        scn = _scenario(
            ChannelParams(a_los=0.0, shadowing=False), trials=300, r_inner=10.0, r_outer=10.0
        )
        est = estimate_pmd(scn, 10e-6)
        self.assertEqual(est.pmd, 0.0)

    def test_delay_and_confidence_fields(self) -> None:
        scn = _scenario(trials=500)
        est = estimate_pmd(scn, 100e-6)
        self.assertEqual(est.trials, 500)
        self.assertEqual(est.n_slots, 144)
        self.assertAlmostEqual(est.mean_delay_s, 144 * 100e-6 / 0.05)
        expected_ci = 1.96 * math.sqrt(est.pmd * (1 - est.pmd) / 500)
        self.assertAlmostEqual(est.ci95_halfwidth, expected_ci)

    def test_below_minimum_duration_rejected(self) -> None:
        with self.assertRaises(ValueError):
            estimate_pmd(_scenario(trials=10), 5e-6)

    def test_same_seed_same_estimate(self) -> None:
        scn = _scenario(trials=300, seed=42)
        self.assertEqual(estimate_pmd(scn, 10e-6), estimate_pmd(scn, 10e-6))

    def test_paired_estimates_share_realizations(self) -> None:
        scn = _scenario(trials=300)
        procedures = [
            _procedure(ProcedureKind.EXHAUSTIVE, 8),
            _procedure(ProcedureKind.EXHAUSTIVE, 4),
        ]
        paired = estimate_pmd_paired(scn, procedures, 10e-6)
        alone = estimate_pmd(scn, 10e-6, procedures[1])
        self.assertEqual(paired[1], alone)

    def test_telemetry_logged(self) -> None:
        with self.assertLogs("engine.montecarlo", level="INFO") as logs:
            simulate_trials(_scenario(trials=50))
        line = next(m for m in logs.output if "simulation_telemetry" in m)
        payload = json.loads(line.split("simulation_telemetry ", 1)[1])
        self.assertEqual(payload["trials"], 50)
        self.assertEqual(payload["procedures"], ["exhaustive 64x16"])


class TestOutageLowerBound(unittest.TestCase):
    def test_pmd_never_below_outage_fraction(self) -> None:
        scn = _scenario(trials=1_000, r_inner=170.0, r_outer=170.0)
        procedures = [
            _procedure(ProcedureKind.EXHAUSTIVE, 8),
            _procedure(ProcedureKind.ITERATIVE, 4),
            _procedure(ProcedureKind.PURE_CI, 8),
            _procedure(ProcedureKind.ENHANCED_CI, 8),
        ]
        trial_set = simulate_trials(scn, procedures)
        outage = float(trial_set.outage.mean())
        self.assertGreater(outage, 0.2)
        for t_sig in (10e-6, 100e-6, 3.16e-3):
            for index in range(len(procedures)):
                self.assertGreaterEqual(trial_set.estimate(index, t_sig, scn).pmd, outage)


class TestEstimatorCoverage(unittest.TestCase):
    def test_interval_covers_known_miss_probability(self) -> None:
        scn = _scenario(trials=1_000)
        procedures = [_procedure(ProcedureKind.EXHAUSTIVE, 8)]
        rng = np.random.default_rng(55)
        runs, trials = 2_000, 1_000
        for p in (0.5, 0.2):
            covered = 0
            for _ in range(runs):
                missed = rng.random(trials) < p
                trial_set = TrialSet(
                    procedures=procedures,
                    decision_snr_db=np.where(missed, -np.inf, np.inf)[np.newaxis, :],
                    outage=np.zeros(trials, dtype=bool),
                    seed=0,
                )
                est = trial_set.estimate(0, 10e-6, scn)
                covered += abs(est.pmd - p) <= est.ci95_halfwidth
            self.assertGreaterEqual(covered / runs, 0.93, msg=f"p={p}")


class TestTrialSet(unittest.TestCase):
    def setUp(self) -> None:
        self.scn = _scenario(trials=500)
        self.trial_set = simulate_trials(self.scn)

    def test_shapes(self) -> None:
        self.assertEqual(self.trial_set.decision_snr_db.shape, (1, 500))
        self.assertEqual(self.trial_set.trials, 500)

    def test_outage_trials_are_misses(self) -> None:
        decisions = self.trial_set.decision_snr_db[0]
        self.assertTrue(np.all(np.isneginf(decisions[self.trial_set.outage])))

    def test_misses_below_t_ref_rejected(self) -> None:
        with self.assertRaises(ValueError):
            self.trial_set.misses(1e-6, self.scn.budget)

    def test_misses_follow_single_trial_detection(self) -> None:
        budget = self.scn.budget
        for t_sig in (10e-6, 237.782e-6, 3e-3):
            expected = sum(
                not detect(float(snr), t_sig, budget)
                for snr in self.trial_set.decision_snr_db[0]
            )
            self.assertEqual(int(self.trial_set.misses(t_sig, budget)[0]), expected)


class TestWorkers(unittest.TestCase):
    def test_worker_count_does_not_change_results(self) -> None:
        procedures = [
            _procedure(ProcedureKind.EXHAUSTIVE, 8),
            _procedure(ProcedureKind.ITERATIVE, 4),
            _procedure(ProcedureKind.ENHANCED_CI, 8),
        ]
        with mock.patch.object(montecarlo, "CHUNK_SIZE", 64):
            serial = simulate_trials(_scenario(trials=500, workers=1), procedures)
            parallel = simulate_trials(_scenario(trials=500, workers=2), procedures)
        np.testing.assert_array_equal(serial.decision_snr_db, parallel.decision_snr_db)
        np.testing.assert_array_equal(serial.outage, parallel.outage)

    def test_chunking_does_not_change_results(self) -> None:
        scn = _scenario(trials=300)
        whole = simulate_trials(scn)
        with mock.patch.object(montecarlo, "CHUNK_SIZE", 7):
            split = simulate_trials(scn)
        np.testing.assert_array_equal(whole.decision_snr_db, split.decision_snr_db)


class TestSweeps(unittest.TestCase):
    def test_tsig_sweep_non_increasing(self) -> None:
        scn = _scenario(trials=1_000)
        grid = [float(t) for t in np.geomspace(10e-6, 3e-3, 10)]
        rows = sweep_tsig(scn, grid)
        self.assertEqual(len(rows), 10)
        pmds = [est.pmd for _, _, est in rows]
        self.assertEqual(pmds, sorted(pmds, reverse=True))
        for t_sig, _, est in rows:
            self.assertAlmostEqual(est.mean_delay_s, 144 * t_sig / 0.05)

    def test_distance_sweep_rows(self) -> None:
        scn = _scenario(trials=200)
        procedures = [
            _procedure(ProcedureKind.EXHAUSTIVE, 8),
            _procedure(ProcedureKind.PURE_CI, 4),
        ]
        rows = sweep_distance(scn, [35.0, 95.0], 10e-6, procedures)
        self.assertEqual([(d, c.kind) for d, c, _ in rows], [
            (35.0, ProcedureKind.EXHAUSTIVE),
            (35.0, ProcedureKind.PURE_CI),
            (95.0, ProcedureKind.EXHAUSTIVE),
            (95.0, ProcedureKind.PURE_CI),
        ])

    def test_empty_inputs_rejected(self) -> None:
        scn = _scenario(trials=10)
        with self.assertRaises(ValueError):
            sweep_distance(scn, [], 10e-6)
        with self.assertRaises(ValueError):
            sweep_tsig(scn, [])
        with self.assertRaises(ValueError):
            sweep_tsig(scn, [5e-6])


class TestBisectMinTsig(unittest.TestCase):
    def test_closed_form_target(self) -> None:
        scale = 1e-4
        pmd_fn = mock.Mock(side_effect=lambda t: math.exp(-t / scale))
        t_sig = bisect_min_tsig(pmd_fn, 0.01, 10e-6, 3.16e-3)
        exact = scale * math.log(100.0)
        self.assertGreaterEqual(t_sig, exact)
        self.assertLessEqual(t_sig, exact * 1.05)
        self.assertLess(pmd_fn.call_count, 20)

    def test_already_met_at_t_min(self) -> None:
        self.assertEqual(bisect_min_tsig(lambda t: 0.0, 0.01, 10e-6, 1e-3), 10e-6)

    def test_unreachable(self) -> None:
        self.assertIsNone(bisect_min_tsig(lambda t: 0.5, 0.01, 10e-6, 1e-3))

    def test_invalid_arguments(self) -> None:
        with self.assertRaises(ValueError):
            bisect_min_tsig(lambda t: 0.0, 1.5, 10e-6, 1e-3)
        with self.assertRaises(ValueError):
            bisect_min_tsig(lambda t: 0.0, 0.01, 1e-3, 10e-6)


class TestMinTsigForPmd(unittest.TestCase):
    def test_exhaustive_near_cell_meets_target_at_t_ref(self) -> None:
        scn = _scenario(trials=2_000, r_inner=35.0, r_outer=35.0)
        result = min_tsig_for_pmd(scn, 0.01, 10e-6, 3.16e-3)
        self.assertTrue(result.reachable)
        self.assertEqual(result.t_sig_s, 10e-6)
        self.assertLess(result.estimate.pmd, 0.01)

    def test_unreachable_at_cell_edge(self) -> None:
        scn = _scenario(trials=400, r_inner=200.0, r_outer=200.0)
        with self.assertLogs("engine.montecarlo", level="WARNING"):
            result = min_tsig_for_pmd(
                scn, 0.01, 10e-6, 3.16e-3, procedure=_procedure(ProcedureKind.ITERATIVE, 4)
            )
        self.assertFalse(result.reachable)
        self.assertEqual(result.t_sig_s, 3.16e-3)
        self.assertGreater(result.estimate.pmd, 0.5)

    def test_result_meets_target(self) -> None:
        scn = _scenario(trials=1_000)
        result = min_tsig_for_pmd(
            scn, 0.05, 10e-6, 3.16e-3, procedure=_procedure(ProcedureKind.PURE_CI, 4)
        )
        if result.reachable:
            self.assertLess(result.estimate.pmd, 0.05)

    def test_inverted_bracket_rejected(self) -> None:
        with self.assertRaises(ValueError):
            min_tsig_for_pmd(_scenario(trials=10), 0.01, 1e-3, 20e-6)


if __name__ == "__main__":
    unittest.main()
