"""Weighted multi-criteria scoring, grading, and sensitivity analysis."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthoscreen.cases import FdiLabel, MovementPlan, ToothMovement
from orthoscreen.casegen import generate_case, generate_plan
from orthoscreen.constraints import (
    ToothRecord,
    default_knowledge_base,
    evaluate_plan,
    records_from_case,
)
from orthoscreen.scoring import (
    CRITERIA,
    SubScores,
    WavfConfig,
    WeightSumError,
    attachment_indicated,
    build_assessment,
    compute_subscores,
    crowded_contacts,
    estimate_duration_months,
    grade_for,
    minimal_stage_count,
    sensitivity,
    wavf_score,
)

UNIFORM = SubScores(0.8, 0.7, 0.9, 0.6, 1.0, 0.5)


class TestWavfScore:
    def test_worked_example(self):
        score, grade = wavf_score(UNIFORM, WavfConfig())
        # 0.3*0.8 + 0.2*0.7 + 0.15*0.9 + 0.15*0.6 + 0.1*1.0 + 0.1*0.5
        assert score == pytest.approx(75.5, abs=1e-9)
        assert grade == "B"

    def test_endpoints(self):
        cfg = WavfConfig()
        top, grade = wavf_score(SubScores(1, 1, 1, 1, 1, 1), cfg)
        assert top == pytest.approx(100.0)
        assert grade == "A"
        bottom, grade = wavf_score(SubScores(0, 0, 0, 0, 0, 0), cfg)
        assert bottom == 0.0
        assert grade == "F"

    def test_custom_value_function(self):
        cfg = WavfConfig(value_functions={"biomechanics": lambda s: s * s})
        score, _ = wavf_score(UNIFORM, cfg)
        base, _ = wavf_score(UNIFORM, WavfConfig())
        assert score == pytest.approx(base - 100 * 0.30 * (0.8 - 0.64), abs=1e-9)

    def test_value_function_range_enforced(self):
        cfg = WavfConfig(value_functions={"ipr": lambda s: s + 0.5})
        with pytest.raises(ValueError):
            wavf_score(UNIFORM, cfg)

    def test_weight_validation(self):
        with pytest.raises(WeightSumError):
            WavfConfig(weights=(0.5, 0.5, 0.0, 0.0, 0.0))
        with pytest.raises(WeightSumError):
            WavfConfig(weights=(0.5, 0.5, 0.1, 0.0, 0.0, 0.0))
        with pytest.raises(WeightSumError):
            WavfConfig(weights=(1.3, -0.3, 0.0, 0.0, 0.0, 0.0))

    @settings(max_examples=300, deadline=None)
    @given(st.tuples(*[st.floats(0, 1) for _ in CRITERIA]))
    def test_score_bounded(self, subs):
        score, grade = wavf_score(SubScores(*subs), WavfConfig())
        assert 0.0 <= score <= 100.0
        assert grade in "ABCDF"


class TestGrades:
    @pytest.mark.parametrize(
        "score,letter",
        [
            (100.0, "A"), (90.0, "A"), (89.999, "B"), (79.0, "B"), (75.0, "B"),
            (74.999, "C"), (60.0, "C"), (59.999, "D"), (40.0, "D"),
            (39.999, "F"), (0.0, "F"),
        ],
    )
    def test_thresholds(self, score, letter):
        assert grade_for(score, WavfConfig()) == letter

    def test_custom_thresholds(self):
        cfg = WavfConfig(grade_thresholds=((50.0, "pass"),))
        assert grade_for(50.0, cfg) == "pass"
        assert grade_for(49.9, cfg) == "F"


class TestParetoConsistency:
    """Strictly dominating sub-scores never score lower (10k random pairs)."""

    def test_dominance(self):
        rng = np.random.default_rng(77)
        cfg = WavfConfig()
        for _ in range(10_000):
            low = rng.uniform(0.0, 1.0, size=6)
            high = np.minimum(1.0, low + rng.uniform(0.0, 0.5, size=6))
            s_low, _ = wavf_score(SubScores(*low), cfg)
            s_high, _ = wavf_score(SubScores(*high), cfg)
            assert s_high >= s_low - 1e-12

    def test_strict_dominance_strictly_better(self):
        rng = np.random.default_rng(78)
        cfg = WavfConfig()
        for _ in range(1_000):
            low = rng.uniform(0.0, 0.9, size=6)
            high = np.minimum(1.0, low + rng.uniform(0.01, 0.1, size=6))
            s_low, _ = wavf_score(SubScores(*low), cfg)
            s_high, _ = wavf_score(SubScores(*high), cfg)
            assert s_high > s_low


class TestSensitivity:
    def test_equal_subscores_swing_exactly_zero(self):
        cfg = WavfConfig()
        for value in (0.7, 1.0 / 3.0, 0.919, 1.0, 0.0):
            subs = SubScores(*([value] * 6))
            base, _ = wavf_score(subs, cfg)
            table = sensitivity(subs, cfg)
            for name in CRITERIA:
                assert table[name]["raised"] == base
                assert table[name]["lowered"] == base
                assert table[name]["max_abs_delta"] == 0.0

    def test_matches_direct_recompute(self):
        cfg = WavfConfig()
        rng = np.random.default_rng(5)
        for _ in range(50):
            subs = SubScores(*rng.uniform(0, 1, size=6))
            table = sensitivity(subs, cfg)
            for i, name in enumerate(CRITERIA):
                for key, direction in (("raised", 1.0), ("lowered", -1.0)):
                    w = list(cfg.weights)
                    wi = w[i] * (1.0 + direction * cfg.sensitivity_fraction)
                    scale = (1.0 - wi) / (1.0 - w[i])
                    perturbed = tuple(
                        wi if j == i else w[j] * scale for j in range(6)
                    )
                    direct, _ = wavf_score(subs, WavfConfig(weights=perturbed))
                    assert table[name][key] == pytest.approx(direct, abs=1e-9)

    def test_raising_weight_of_weak_criterion_lowers_score(self):
        cfg = WavfConfig()
        subs = SubScores(1.0, 1.0, 1.0, 1.0, 1.0, 0.2)
        table = sensitivity(subs, cfg)
        base, _ = wavf_score(subs, cfg)
        assert table["symmetry"]["raised"] < base
        assert table["symmetry"]["lowered"] > base

    def test_perturbed_weights_stay_normalized(self):
        cfg = WavfConfig()
        for i in range(6):
            for direction in (1.0, -1.0):
                w = list(cfg.weights)
                wi = w[i] * (1.0 + direction * cfg.sensitivity_fraction)
                scale = (1.0 - wi) / (1.0 - w[i])
                perturbed = [wi if j == i else w[j] * scale for j in range(6)]
                assert sum(perturbed) == pytest.approx(1.0, abs=1e-12)
                assert all(p >= 0 for p in perturbed)


class TestStagingAndDuration:
    def test_minimal_stage_count_zero_plan(self):
        kb = default_knowledge_base()
        rec = ToothRecord(FdiLabel(11), np.zeros(3), 4.0, 8.0)
        plan = MovementPlan(
            case_id="c", stage_count=10,
            movements={11: ToothMovement([0, 0, 0], [0, 0, 0])},
        )
        evaluation = evaluate_plan([rec], plan, kb)
        assert minimal_stage_count(evaluation, 10) == 0
        subs = compute_subscores([rec], plan, evaluation)
        assert subs.staging == 1.0

    def test_minimal_stage_count_hand_case(self):
        kb = default_knowledge_base()
        rec = ToothRecord(FdiLabel(11), np.zeros(3), 4.0, 8.0)
        # 0.2 mm/stage of t_x over 20 stages: 4.0 mm total, limit 0.25/stage
        plan = MovementPlan(
            case_id="c", stage_count=20,
            movements={11: ToothMovement([0.2, 0, 0], [0, 0, 0])},
        )
        evaluation = evaluate_plan([rec], plan, kb)
        assert minimal_stage_count(evaluation, 20) == 16
        subs = compute_subscores([rec], plan, evaluation)
        assert subs.staging == pytest.approx(16 / 20)

    def test_duration_months(self):
        assert estimate_duration_months(0) == 0
        # 16 stages * 14 days = 224 days = 7.37 months
        assert estimate_duration_months(16) == math.ceil(16 * 14.0 / 30.4)

    def test_overplanned_stages_capped_at_one(self):
        kb = default_knowledge_base()
        rec = ToothRecord(FdiLabel(11), np.zeros(3), 4.0, 8.0)
        plan = MovementPlan(
            case_id="c", stage_count=30,
            movements={11: ToothMovement([0.25, 0, 0], [0, 0, 0])},
        )
        evaluation = evaluate_plan([rec], plan, kb)
        assert minimal_stage_count(evaluation, 30) == 30
        subs = compute_subscores([rec], plan, evaluation)
        assert subs.staging == 1.0


class TestAttachmentCriterion:
    def test_indication_rule(self):
        assert attachment_indicated(ToothMovement([0, 0, 0], [0, 0, 1.6]))
        assert attachment_indicated(ToothMovement([0, 0, 0.01], [0, 0, 0]))
        assert not attachment_indicated(ToothMovement([0.2, 0, -0.1], [0, 0, 1.5]))

    def test_coverage_fraction(self):
        kb = default_knowledge_base()
        recs = [
            ToothRecord(FdiLabel(11), np.array([0.0, 0.0, 0.0]), 4.0, 8.0),
            ToothRecord(FdiLabel(12), np.array([20.0, 0.0, 0.0]), 4.0, 8.0),
        ]
        plan = MovementPlan(
            case_id="c", stage_count=20,
            movements={
                11: ToothMovement([0, 0, 0], [0, 0, 1.8]),
                12: ToothMovement([0, 0, 0.1], [0, 0, 0]),
            },
            attachments=frozenset([11]),
        )
        evaluation = evaluate_plan(recs, plan, kb)
        subs = compute_subscores(recs, plan, evaluation)
        assert subs.attachments == 0.5


class TestIprCriterion:
    def _records(self, gap):
        # crowded when gap < 4.0 + 4.0
        return [
            ToothRecord(FdiLabel(11), np.array([0.0, 0.0, 0.0]), 4.0, 8.0),
            ToothRecord(FdiLabel(12), np.array([gap, 0.0, 0.0]), 4.0, 8.0),
        ]

    def test_crowded_detection(self):
        assert crowded_contacts(self._records(7.0)) == [frozenset((11, 12))]
        assert crowded_contacts(self._records(9.0)) == []

    def test_perfect_ipr(self):
        kb = default_knowledge_base()
        recs = self._records(7.0)
        plan = MovementPlan(
            case_id="c", stage_count=10, movements={},
            ipr_mm={frozenset((11, 12)): 0.25},
        )
        evaluation = evaluate_plan(recs, plan, kb)
        assert compute_subscores(recs, plan, evaluation).ipr == 1.0

    def test_missing_ipr_on_crowded_contact(self):
        kb = default_knowledge_base()
        recs = self._records(7.0)
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        evaluation = evaluate_plan(recs, plan, kb)
        # error |0 - 0.25| = 0.25 over a 0.5 scale
        assert compute_subscores(recs, plan, evaluation).ipr == pytest.approx(0.5)

    def test_no_crowding_is_vacuous(self):
        kb = default_knowledge_base()
        recs = self._records(9.0)
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        evaluation = evaluate_plan(recs, plan, kb)
        assert compute_subscores(recs, plan, evaluation).ipr == 1.0


class TestSymmetryCriterion:
    def _mirror_records(self, skew):
        # two mirrored incisor pairs; skew displaces one tooth radially
        pts = {
            11: np.array([5.0, 10.0, 0.0]),
            21: np.array([-5.0, 10.0, 0.0]),
            12: np.array([9.0, 8.0, 0.0]),
            22: np.array([-9.0 - skew, 8.0, 0.0]),
        }
        return [ToothRecord(FdiLabel(c), p, 4.0, 8.0) for c, p in pts.items()]

    def test_perfect_mirror(self):
        kb = default_knowledge_base()
        recs = self._mirror_records(0.0)
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        evaluation = evaluate_plan(recs, plan, kb)
        assert compute_subscores(recs, plan, evaluation).symmetry == pytest.approx(1.0)

    def test_skew_lowers_symmetry(self):
        kb = default_knowledge_base()
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        values = []
        for skew in (0.0, 1.0, 3.0):
            recs = self._mirror_records(skew)
            evaluation = evaluate_plan(recs, plan, kb)
            values.append(compute_subscores(recs, plan, evaluation).symmetry)
        assert values[0] > values[1] > values[2] >= 0.0

    def test_unpaired_teeth_are_vacuous(self):
        kb = default_knowledge_base()
        recs = [
            ToothRecord(FdiLabel(11), np.array([5.0, 10.0, 0.0]), 4.0, 8.0),
            ToothRecord(FdiLabel(13), np.array([11.0, 6.0, 0.0]), 4.0, 8.0),
        ]
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        evaluation = evaluate_plan(recs, plan, kb)
        assert compute_subscores(recs, plan, evaluation).symmetry == 1.0


class TestArchRecordsRouting:
    def test_crowding_and_symmetry_read_arch_records(self):
        kb = default_knowledge_base()
        planned = self._arch(0.0)
        estimated = self._arch(1.5)
        plan = MovementPlan(case_id="c", stage_count=10, movements={})
        evaluation = evaluate_plan(estimated, plan, kb)
        routed = compute_subscores(estimated, plan, evaluation, arch_records=planned)
        direct = compute_subscores(planned, plan, evaluation)
        assert routed.symmetry == direct.symmetry
        assert routed.ipr == direct.ipr

    @staticmethod
    def _arch(skew):
        pts = {
            11: np.array([5.0, 10.0, 0.0]),
            21: np.array([-5.0, 10.0, 0.0]),
            12: np.array([9.0, 8.0, 0.0]),
            22: np.array([-9.0 - skew, 8.0, 0.0]),
        }
        return [ToothRecord(FdiLabel(c), p, 4.0, 8.0) for c, p in pts.items()]


class TestBuildAssessment:
    def test_report_shape_and_consistency(self, corpus8):
        kb = default_knowledge_base()
        case, plan, _ = corpus8[0]
        records = records_from_case(case)
        report, evaluation = build_assessment(case.case_id, records, plan, kb)
        assert report["case_id"] == case.case_id
        assert set(report["subscores"]) == set(CRITERIA)
        assert report["weights"] == dict(zip(CRITERIA, WavfConfig().weights))
        score, grade = wavf_score(SubScores(**report["subscores"]), WavfConfig())
        assert report["score"] == pytest.approx(score)
        assert report["grade"] == grade
        assert set(report["sensitivity"]) == set(CRITERIA)
        assert isinstance(report["duration_months"], int)
        for alert in report["alerts"]:
            assert alert["severity"] in ("warning", "critical")

    def test_compliant_plan_scores_high(self):
        kb = default_knowledge_base()
        case = generate_case(21)
        plan = generate_plan(case, 21, severity="compliant")
        records = records_from_case(case)
        report, evaluation = build_assessment(case.case_id, records, plan, kb)
        assert report["subscores"]["biomechanics"] == 1.0
        assert report["alerts"] == []

    def test_violating_plan_scores_lower(self):
        kb = default_knowledge_base()
        case = generate_case(22)
        compliant = generate_plan(case, 22, severity="compliant")
        violating = generate_plan(case, 22, severity="violating")
        records = records_from_case(case)
        r_ok, _ = build_assessment(case.case_id, records, compliant, kb)
        r_bad, _ = build_assessment(case.case_id, records, violating, kb)
        assert r_bad["subscores"]["biomechanics"] < r_ok["subscores"]["biomechanics"]
        assert any(a["severity"] == "critical" for a in r_bad["alerts"])
