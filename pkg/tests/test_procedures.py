"""
Unit tests for the cell-search procedures: slot accounting, discovery
delay and the beam decisions of exhaustive, iterative and CI search.
"""

import math
import unittest

import numpy as np

from engine.beams import mainlobe_index, wrap_angle
from engine.channel import ChannelModel, pair_gain, snr_db
from engine.models import (
    ChannelRealization,
    LinkBudget,
    LinkState,
    OverheadPolicy,
    PathCluster,
    ProcedureConfig,
    ProcedureKind,
    ProcedureSpec,
)
from engine.procedures import (
    build_procedure,
    discovery_delay,
    procedure_label,
    run_ci,
    run_exhaustive,
    run_iterative,
    run_procedure,
    slot_count,
)

T_REF = 10e-6
# Inside BS narrow beam 4 / wide sector 1; the UE sees the BS inside beam 6 of 8
BEARING = math.pi / 2 + 0.01


def _build(kind: str, ue_beams: int, **kwargs) -> ProcedureConfig:
    return build_procedure(ProcedureSpec(kind=kind, ue_beams=ue_beams, **kwargs))


def _single_path(
    pathloss: float,
    aoa_offset: float = 0.0,
    state: LinkState = LinkState.LOS,
    bearing: float = BEARING,
) -> ChannelRealization:
    """One path leaving the BS towards the UE and arriving ``aoa_offset`` off the BS direction."""
    return ChannelRealization(
        state=state,
        pathloss_db=pathloss,
        clusters=(PathCluster(1.0, bearing, wrap_angle(bearing + math.pi + aoa_offset)),),
        distance_m=95.0,
        bearing=bearing,
    )


class TestSlotCount(unittest.TestCase):
    def test_reference_configurations(self) -> None:
        cases = [
            (ProcedureKind.EXHAUSTIVE, 4, 80),
            (ProcedureKind.EXHAUSTIVE, 8, 144),
            (ProcedureKind.ITERATIVE, 4, 28),
            (ProcedureKind.ITERATIVE, 8, 44),
            (ProcedureKind.PURE_CI, 4, 32),
            (ProcedureKind.ENHANCED_CI, 8, 64),
        ]
        for kind, ue_beams, expected in cases:
            with self.subTest(kind=kind.value, ue_beams=ue_beams):
                self.assertEqual(slot_count(_build(kind, ue_beams)), expected)

    def test_wider_ci_window(self) -> None:
        config = _build(ProcedureKind.ENHANCED_CI, 8, ci_half_window=2)
        self.assertEqual(slot_count(config), 16 * 5 + 16)

    def test_antenna_counts(self) -> None:
        config = _build(ProcedureKind.EXHAUSTIVE, 8)
        self.assertEqual((config.bs_antennas, config.ue_antennas), (64, 16))
        self.assertEqual(procedure_label(config), "exhaustive 64x16")
        self.assertEqual(procedure_label(_build(ProcedureKind.PURE_CI, 4)), "pure-ci 64x4")


class TestDiscoveryDelay(unittest.TestCase):
    def test_delay_arithmetic(self) -> None:
        cases = [(80, 400e-6, 0.640), (144, 10e-6, 0.0288), (64, 150e-6, 0.192), (32, 15e-6, 0.0096)]
        for n_slots, t_sig, expected in cases:
            delay = discovery_delay(n_slots, OverheadPolicy(t_sig=t_sig, phi_ov=0.05))
            self.assertAlmostEqual(delay, expected, places=12)

    def test_full_overhead(self) -> None:
        self.assertAlmostEqual(discovery_delay(10, OverheadPolicy(t_sig=1e-3, phi_ov=1.0)), 1e-2)

    def test_invalid_overhead(self) -> None:
        with self.assertRaises(ValueError):
            OverheadPolicy(t_sig=10e-6, phi_ov=0.0)
        with self.assertRaises(ValueError):
            OverheadPolicy(t_sig=10e-6, phi_ov=1.5)


class TestProcedureConfig(unittest.TestCase):
    def test_pure_ci_rejects_window(self) -> None:
        base = _build(ProcedureKind.PURE_CI, 4)
        with self.assertRaises(ValueError):
            ProcedureConfig(
                kind=ProcedureKind.PURE_CI,
                bs_narrow=base.bs_narrow,
                ue_codebook=base.ue_codebook,
                ci_half_window=1,
            )

    def test_iterative_needs_wide_codebook(self) -> None:
        base = _build(ProcedureKind.EXHAUSTIVE, 4)
        with self.assertRaises(ValueError):
            ProcedureConfig(
                kind=ProcedureKind.ITERATIVE,
                bs_narrow=base.bs_narrow,
                ue_codebook=base.ue_codebook,
            )

    def test_unsupported_ue_beams(self) -> None:
        with self.assertRaises(ValueError):
            ProcedureSpec(ue_beams=6)


class TestExhaustive(unittest.TestCase):
    def setUp(self) -> None:
        self.budget = LinkBudget()
        self.config = _build(ProcedureKind.EXHAUSTIVE, 8)

    def test_aligned_pair_found(self) -> None:
        outcome = run_exhaustive(_single_path(100.0), self.config, self.budget, T_REF)
        self.assertTrue(outcome.detected)
        self.assertEqual((outcome.best_bs_beam, outcome.best_ue_beam), (4, 6))
        expected = 30.0 + 10 * math.log10(1024) - 100.0 + 79.0
        self.assertAlmostEqual(outcome.best_snr_db, expected, places=9)
        self.assertEqual(outcome.n_slots, 144)

    def test_weak_link_missed(self) -> None:
        outcome = run_exhaustive(_single_path(150.0), self.config, self.budget, T_REF)
        self.assertFalse(outcome.detected)
        self.assertIsNone(outcome.best_bs_beam)
        self.assertIsNone(outcome.best_snr_db)

    def test_outage_missed(self) -> None:
        ch = ChannelRealization(LinkState.OUTAGE, math.inf, (), 200.0)
        outcome = run_exhaustive(ch, self.config, self.budget, T_REF)
        self.assertFalse(outcome.detected)
        self.assertEqual(outcome.n_slots, 144)

    def test_longer_signal_recovers_weak_link(self) -> None:
        # 30 + 30.1 - 150 + 79 = -10.9 dB; 100x longer PSS adds 20 dB
        outcome = run_exhaustive(_single_path(150.0), self.config, self.budget, 100 * T_REF)
        self.assertTrue(outcome.detected)

    def test_matches_brute_force(self) -> None:
        model = ChannelModel()
        rng = np.random.default_rng(21)
        for _ in range(1_000):
            ch = model.sample_realization(60.0, rng.uniform(0, 2 * math.pi), rng)
            outcome = run_exhaustive(ch, self.config, self.budget, T_REF)
            best, best_pair = -math.inf, None
            # BS-major scan with strict improvement: lowest BS, then lowest UE index
            for i, tx in enumerate(self.config.bs_narrow.codewords):
                for j, rx in enumerate(self.config.ue_codebook.codewords):
                    snr = float(snr_db(self.budget, ch, pair_gain(ch, tx, rx)))
                    if snr > best:
                        best, best_pair = snr, (i, j)
            self.assertAlmostEqual(outcome.decision_snr_db, best, places=9)
            self.assertEqual(outcome.detected, best >= self.budget.tau_db)
            if outcome.detected:
                self.assertEqual((outcome.best_bs_beam, outcome.best_ue_beam), best_pair)
            else:
                self.assertIsNone(outcome.best_bs_beam)

    def test_uplink_requirement(self) -> None:
        # Downlink clears tau by ~5 dB, uplink (7 dB less power) does not
        ch = _single_path(142.0)
        plain = run_exhaustive(ch, self.config, self.budget, T_REF)
        strict = run_exhaustive(
            ch, _build(ProcedureKind.EXHAUSTIVE, 8, require_uplink=True), self.budget, T_REF
        )
        self.assertTrue(plain.detected)
        self.assertFalse(strict.detected)


class TestIterative(unittest.TestCase):
    def setUp(self) -> None:
        self.budget = LinkBudget()
        self.config = _build(ProcedureKind.ITERATIVE, 8)

    def test_refines_inside_best_sector(self) -> None:
        outcome = run_iterative(_single_path(100.0), self.config, self.budget, T_REF)
        self.assertTrue(outcome.detected)
        self.assertEqual((outcome.best_bs_beam, outcome.best_ue_beam), (4, 6))
        self.assertEqual(outcome.n_slots, 44)

    def test_refines_at_wide_sector_edge(self) -> None:
        # Narrow beam 2 starts at 3π/16, inside the second wide sector
        ch = _single_path(90.0, bearing=3 * math.pi / 16 + 0.02)
        outcome = run_iterative(ch, self.config, self.budget, T_REF)
        self.assertTrue(outcome.detected)
        self.assertEqual(outcome.best_bs_beam, 2)

    def test_wide_stage_costs_twelve_db(self) -> None:
        # Narrow pair: 30 + 30.1 - 137 + 79 = 2.1 dB, wide pair 12 dB lower
        ch = _single_path(137.0)
        exhaustive = run_exhaustive(ch, _build(ProcedureKind.EXHAUSTIVE, 8), self.budget, T_REF)
        iterative = run_iterative(ch, self.config, self.budget, T_REF)
        self.assertTrue(exhaustive.detected)
        self.assertFalse(iterative.detected)
        gap = exhaustive.decision_snr_db - iterative.decision_snr_db
        self.assertAlmostEqual(gap, 10 * math.log10(64 / 4), places=9)

    def test_rejects_config_without_wide_codebook(self) -> None:
        with self.assertRaises(ValueError):
            run_iterative(
                _single_path(100.0), _build(ProcedureKind.EXHAUSTIVE, 8), self.budget, T_REF
            )


class TestContextInformation(unittest.TestCase):
    def setUp(self) -> None:
        self.budget = LinkBudget()
        self.pure = _build(ProcedureKind.PURE_CI, 8)
        self.enhanced = _build(ProcedureKind.ENHANCED_CI, 8)

    def test_direct_path_detected(self) -> None:
        ch = _single_path(100.0)
        outcome = run_ci(ch, self.pure, self.budget, T_REF, ch.bs_direction)
        self.assertTrue(outcome.detected)
        self.assertEqual((outcome.best_bs_beam, outcome.best_ue_beam), (4, 6))

    def test_neighbouring_arrival_needs_enhancement(self) -> None:
        # Path arrives one UE beam (45 deg) away from the BS direction
        ch = _single_path(130.0, aoa_offset=math.pi / 4, state=LinkState.NLOS)
        pure = run_ci(ch, self.pure, self.budget, T_REF, ch.bs_direction)
        enhanced = run_ci(ch, self.enhanced, self.budget, T_REF, ch.bs_direction)
        self.assertFalse(pure.detected)
        self.assertTrue(enhanced.detected)
        self.assertEqual(enhanced.best_ue_beam, 7)

    def test_run_procedure_uses_bs_direction(self) -> None:
        ch = _single_path(100.0)
        via_dispatch = run_procedure(ch, self.pure, self.budget, T_REF)
        direct = run_ci(ch, self.pure, self.budget, T_REF, ch.bs_direction)
        self.assertEqual(via_dispatch, direct)

    def test_rejects_non_ci_config(self) -> None:
        with self.assertRaises(ValueError):
            run_ci(_single_path(100.0), _build(ProcedureKind.EXHAUSTIVE, 8), self.budget, T_REF, 0.0)

    def test_dominance_on_shared_realizations(self) -> None:
        exhaustive = _build(ProcedureKind.EXHAUSTIVE, 8)
        model = ChannelModel()
        rng = np.random.default_rng(33)
        for _ in range(300):
            ch = model.sample_realization(95.0, rng.uniform(0, 2 * math.pi), rng)
            if ch.state == LinkState.OUTAGE:
                continue
            pure = run_procedure(ch, self.pure, self.budget, T_REF)
            enhanced = run_procedure(ch, self.enhanced, self.budget, T_REF)
            full = run_procedure(ch, exhaustive, self.budget, T_REF)
            # window of 1 ⊂ window of 3 ⊂ all UE beams
            self.assertGreaterEqual(enhanced.decision_snr_db, pure.decision_snr_db)
            self.assertGreaterEqual(full.decision_snr_db, enhanced.decision_snr_db)



class TestSingleClusterAgreement(unittest.TestCase):
    def test_detecting_procedures_pick_the_same_bs_beam(self) -> None:
        budget = LinkBudget()
        configs = [
            _build(ProcedureKind.EXHAUSTIVE, 8),
            _build(ProcedureKind.EXHAUSTIVE, 4),
            _build(ProcedureKind.ITERATIVE, 8),
            _build(ProcedureKind.ITERATIVE, 4),
            _build(ProcedureKind.PURE_CI, 8),
            _build(ProcedureKind.ENHANCED_CI, 8),
        ]
        narrow = configs[0].bs_narrow
        rng = np.random.default_rng(44)
        for _ in range(1_000):
            bearing = rng.uniform(0, 2 * math.pi)
            ch = _single_path(
                rng.uniform(80.0, 140.0),
                aoa_offset=rng.uniform(-math.pi / 4, math.pi / 4),
                bearing=bearing,
            )
            beams = {
                outcome.best_bs_beam
                for outcome in (run_procedure(ch, c, budget, T_REF) for c in configs)
                if outcome.detected
            }
            self.assertLessEqual(beams, {mainlobe_index(narrow, bearing)})


if __name__ == "__main__":
    unittest.main()
