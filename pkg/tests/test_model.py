import pytest
from hypothesis import given
from hypothesis import strategies as st

from cardiotel.errors import PairingError, ValidationError
from cardiotel.model import (
    SUMMARY_METRICS,
    AgreementClass,
    DifferenceRow,
    EcgFeatures,
    Metric,
    MetricCounts,
    ThresholdConfig,
    VitalSample,
    VitalStatus,
    classify_difference,
    classify_sample,
    classify_spo2,
    compare_reading,
    round_half_up,
    summarize_agreement,
)
from .conftest import sample_from_row

# Difference table transcribed from the reference publication, one row per
# patient: (SpO2, Temp, S_BP, D_BP, HR, ECG, P, Q, R, S, T).
EXPECTED_DIFFERENCES = {
    "1": (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "2": (1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "3": (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "4": (0, 0, 0, 5, 0, 0, 0, 0, 0, 0, 0),
    "5": (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "6": (0, 1, 3, 5, 2, 0, 0, 0, 0, 0, 0),
    "7": (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "8": (0, 0, 0, 5, 3, 0, 0, 0, 0, 0, 0),
    "9": (0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0),
    "10": (0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0),
    "11": (1, 1, 3, 0, 0, 0, 0, 0, 0, 0, 0),
    "12": (0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "13": (0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0),
    "14": (0, 1, 0, 5, 3, 0, 0, 0, 0, 0, 0),
    "15": (1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "16": (0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0),
    "17": (0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0),
    "18": (0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0),
    "19": (0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0),
    "20": (0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
}

# Results-analysis counts: label -> (total, exact, incorrect, near)
EXPECTED_SUMMARY = {
    "Oxygen Saturation": (20, 17, 0, 3),
    "Body Temperature": (20, 15, 0, 5),
    "Systolic BP": (20, 15, 0, 5),
    "Diastolic BP": (20, 14, 0, 6),
    "Heart Rate": (20, 16, 0, 4),
    "ECG": (20, 20, 0, 0),
}


def make_sample(**overrides) -> VitalSample:
    base = dict(
        patient_id="p1", ts=0, spo2=97, temp=98.6, sbp=120, dbp=80, hr=72,
        ecg=EcgFeatures(ecg_base=254, p=450, q=119, r=701, s=88, t=76),
    )
    base.update(overrides)
    return VitalSample(**base)


class TestClassifySpo2:
    def test_paper_branch_values(self):
        assert classify_spo2(95) is VitalStatus.NORMAL
        assert classify_spo2(94) is VitalStatus.ABNORMAL

    def test_boundaries(self):
        assert classify_spo2(100) is VitalStatus.NORMAL
        assert classify_spo2(0) is VitalStatus.FAULT
        assert classify_spo2(1) is VitalStatus.ABNORMAL
        assert classify_spo2(99) is VitalStatus.NORMAL

    def test_branch_equivalence_over_full_domain(self):
        # the firmware's two conditions, evaluated directly
        for x in range(1, 100):
            if x > 94 and x < 100:
                expected = VitalStatus.NORMAL
            elif x > 0 and x < 95:
                expected = VitalStatus.ABNORMAL
            else:  # x == 99..; unreachable inside 1..99
                raise AssertionError
            assert classify_spo2(x) is expected, x

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            classify_spo2(-1)
        with pytest.raises(ValidationError):
            classify_spo2(101)

    def test_custom_band(self):
        cfg = ThresholdConfig(spo2_normal_min=90, spo2_normal_max=99)
        assert classify_spo2(90, cfg) is VitalStatus.NORMAL
        assert classify_spo2(100, cfg) is VitalStatus.ABNORMAL


class TestClassifySample:
    def test_table3_patient_1_kit(self):
        sample = make_sample(spo2=95, temp=100.0, sbp=120, dbp=90, hr=70)
        statuses = classify_sample(sample)
        assert statuses[Metric.SPO2] is VitalStatus.NORMAL
        assert statuses[Metric.TEMP] is VitalStatus.NORMAL
        assert statuses[Metric.SBP] is VitalStatus.NORMAL
        assert statuses[Metric.DBP] is VitalStatus.NORMAL
        assert statuses[Metric.HR] is VitalStatus.NORMAL

    def test_table3_patient_20_kit_spo2_abnormal(self):
        sample = make_sample(spo2=94, temp=99.0, sbp=110, dbp=80, hr=79)
        assert classify_sample(sample)[Metric.SPO2] is VitalStatus.ABNORMAL

    def test_all_bounds_inclusive(self):
        cfg = ThresholdConfig()
        sample = make_sample(
            spo2=cfg.spo2_normal_min, temp=cfg.temp_max_f, sbp=cfg.sbp_max,
            dbp=cfg.dbp_max, hr=cfg.hr_min,
        )
        assert set(classify_sample(sample, cfg).values()) == {VitalStatus.NORMAL}

    def test_each_metric_can_go_abnormal(self):
        assert classify_sample(make_sample(temp=100.5))[Metric.TEMP] is VitalStatus.ABNORMAL
        assert classify_sample(make_sample(sbp=141))[Metric.SBP] is VitalStatus.ABNORMAL
        assert classify_sample(make_sample(dbp=91, sbp=141))[Metric.DBP] is VitalStatus.ABNORMAL
        assert classify_sample(make_sample(hr=59))[Metric.HR] is VitalStatus.ABNORMAL
        assert classify_sample(make_sample(hr=101))[Metric.HR] is VitalStatus.ABNORMAL


class TestCompareReading:
    def test_golden_rows(self, table3_pairs):
        for pid, kit, clinic in table3_pairs:
            row = compare_reading(kit, clinic)
            assert row.metric_values() == EXPECTED_DIFFERENCES[pid], f"patient {pid}"

    def test_identity_is_all_zero(self):
        s = make_sample()
        assert set(compare_reading(s, s).metric_values()) == {0}

    def test_symmetry(self, table3_pairs):
        for _, kit, clinic in table3_pairs:
            assert compare_reading(kit, clinic) == compare_reading(clinic, kit)

    def test_patient_mismatch(self):
        with pytest.raises(PairingError):
            compare_reading(make_sample(), make_sample(patient_id="p2"))

    def test_temp_rounds_half_up_before_differencing(self):
        kit = make_sample(temp=100.5)
        clinic = make_sample(temp=100.0)
        assert compare_reading(kit, clinic).d_temp == 1  # 101 vs 100
        kit2 = make_sample(temp=100.4)
        assert compare_reading(kit2, clinic).d_temp == 0  # 100 vs 100


class TestClassifyDifference:
    def test_examples(self):
        assert classify_difference(0) is AgreementClass.EXACT
        assert classify_difference(5) is AgreementClass.NEAR
        assert classify_difference(6) is AgreementClass.NEAR
        assert classify_difference(7) is AgreementClass.INCORRECT

    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=100))
    def test_partition(self, d, tol):
        cls = classify_difference(d, tol)
        matches = [
            cls is AgreementClass.EXACT and d == 0,
            cls is AgreementClass.NEAR and 0 < d <= tol,
            cls is AgreementClass.INCORRECT and d > tol,
        ]
        assert matches.count(True) == 1


class TestSummarizeAgreement:
    def test_golden_summary(self, table3_pairs):
        rows = [compare_reading(kit, clinic) for _, kit, clinic in table3_pairs]
        summary = summarize_agreement(rows)
        for label, (total, exact, incorrect, near) in EXPECTED_SUMMARY.items():
            got = summary.row(label)
            assert (got.total, got.exact, got.incorrect, got.near) == (total, exact, incorrect, near), label

    def test_empty_input(self):
        summary = summarize_agreement([])
        for label in SUMMARY_METRICS:
            assert summary.row(label) == MetricCounts(0, 0, 0, 0)

    def test_ecg_is_worst_of_six_features(self):
        row = DifferenceRow("x", 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2)
        assert summarize_agreement([row]).row("ECG").near == 1
        row2 = DifferenceRow("x", 0, 0, 0, 0, 0, 0, 0, 0, 9, 0, 2)
        assert summarize_agreement([row2]).row("ECG").incorrect == 1

    @given(
        st.lists(
            st.builds(
                DifferenceRow,
                st.just("p"),
                *[st.integers(min_value=0, max_value=20) for _ in range(11)],
            ),
            max_size=30,
        ),
        st.integers(min_value=0, max_value=10),
    )
    def test_conservation(self, rows, tol):
        summary = summarize_agreement(rows, tol)
        for label in SUMMARY_METRICS:
            c = summary.row(label)
            assert c.exact + c.incorrect + c.near == c.total == len(rows)


class TestDomainInvariants:
    def test_spo2_domain(self):
        with pytest.raises(ValidationError):
            make_sample(spo2=101)
        with pytest.raises(ValidationError):
            make_sample(spo2=-1)

    def test_bp_ordering(self):
        with pytest.raises(ValidationError):
            make_sample(sbp=100, dbp=100)

    def test_temp_range(self):
        with pytest.raises(ValidationError):
            make_sample(temp=257.1)
        with pytest.raises(ValidationError):
            make_sample(temp=-67.5)
        make_sample(temp=257.0)
        make_sample(temp=-67.0)

    def test_hr_positive(self):
        with pytest.raises(ValidationError):
            make_sample(hr=0)

    def test_ecg_r_dominance(self):
        with pytest.raises(ValidationError):
            EcgFeatures(ecg_base=254, p=702, q=119, r=701, s=88, t=76)
        EcgFeatures(ecg_base=254, p=701, q=119, r=701, s=88, t=76)  # tie allowed

    def test_ecg_non_negative(self):
        with pytest.raises(ValidationError):
            EcgFeatures(ecg_base=-1, p=0, q=0, r=0, s=0, t=0)

    def test_threshold_bounds_validated(self):
        with pytest.raises(ValidationError):
            ThresholdConfig(spo2_normal_min=99, spo2_normal_max=95)
        with pytest.raises(ValidationError):
            ThresholdConfig(hr_min=120, hr_max=60)

    def test_wire_round_trip(self):
        s = make_sample(temp=100.4)
        assert VitalSample.from_wire(s.to_wire()) == s


def test_round_half_up():
    assert round_half_up(100.5) == 101
    assert round_half_up(100.4) == 100
    assert round_half_up(99.0) == 99
    assert round_half_up(0.5) == 1
