import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardiotel.errors import AuthError, ConfigError, ValidationError
from cardiotel.model import VitalSample
from cardiotel.simulator import (
    METRIC_KEYS,
    DeviceRunner,
    ScenarioEvent,
    ScenarioScript,
    generate_sample,
)
from cardiotel.wire import encode_message

BASELINE = {
    "spo2": 97, "temp": 100.0, "sbp": 135, "dbp": 100, "hr": 80,
    "ecg_base": 254, "p": 450, "q": 119, "r": 701, "s": 88, "t": 76,
}


def script(seed=1, jitter=None, events=(), patient_id="p1"):
    return ScenarioScript(
        patient_id=patient_id, seed=seed, baseline=dict(BASELINE),
        jitter=jitter or {}, events=events,
    )


DESAT = (ScenarioEvent(onset_ms=3000, duration_ms=60_000, metric="spo2", target=88, ramp_ms=2000),)


class TestGenerateSample:
    def test_zero_jitter_passthrough(self):
        s = script()
        for t in (0, 150, 999, 10_000, 10**7):
            sample = generate_sample(s, t)
            assert (sample.spo2, sample.temp, sample.sbp, sample.dbp, sample.hr) == (97, 100.0, 135, 100, 80)
            assert sample.ecg.as_tuple() == (254, 450, 119, 701, 88, 76)
            assert sample.ts == t

    def test_desaturation_reaches_target_after_ramp(self):
        s = script(events=DESAT)
        assert generate_sample(s, 5000).spo2 == 88
        assert generate_sample(s, 30_000).spo2 == 88

    def test_mid_ramp_linear_interpolation(self):
        s = script(events=DESAT)
        # halfway through the 2000 ms ramp: 97 + (88 - 97) * 0.5 = 92.5 -> 93
        assert generate_sample(s, 4000).spo2 == 93
        assert generate_sample(s, 3000).spo2 == 97
        assert generate_sample(s, 63_000).spo2 == 97  # event released

    def test_deterministic(self):
        s = script(seed=9, jitter={"hr": 3, "temp": 0.4})
        assert generate_sample(s, 4500) == generate_sample(s, 4500)

    def test_jitter_bounds(self):
        s = script(seed=5, jitter={"hr": 3})
        values = {generate_sample(s, t).hr for t in range(0, 3000, 150)}
        assert values <= set(range(77, 84)) and len(values) > 1

    def test_temp_jitter_in_tenths(self):
        s = script(seed=5, jitter={"temp": 0.3})
        for t in range(0, 1500, 150):
            assert abs(generate_sample(s, t).temp - 100.0) <= 0.3 + 1e-9

    def test_negative_t_rejected(self):
        with pytest.raises(ValidationError):
            generate_sample(script(), -1)


class TestScriptValidation:
    def test_baseline_must_satisfy_invariants(self):
        bad = dict(BASELINE, dbp=140)
        with pytest.raises(ConfigError):
            ScenarioScript(patient_id="p", seed=0, baseline=bad)

    def test_baseline_must_be_complete(self):
        partial = {k: BASELINE[k] for k in list(BASELINE)[:4]}
        with pytest.raises(ConfigError):
            ScenarioScript(patient_id="p", seed=0, baseline=partial)

    def test_negative_jitter_rejected(self):
        with pytest.raises(ConfigError):
            script(jitter={"hr": -1})

    def test_events_must_be_ordered(self):
        events = (
            ScenarioEvent(onset_ms=5000, duration_ms=100, metric="hr", target=90),
            ScenarioEvent(onset_ms=100, duration_ms=100, metric="hr", target=90),
        )
        with pytest.raises(ConfigError):
            script(events=events)

    def test_per_metric_overlap_rejected(self):
        events = (
            ScenarioEvent(onset_ms=0, duration_ms=10_000, metric="hr", target=90),
            ScenarioEvent(onset_ms=5000, duration_ms=100, metric="hr", target=120),
        )
        with pytest.raises(ConfigError):
            script(events=events)

    def test_round_trip_through_dict(self):
        s = script(jitter={"hr": 2}, events=DESAT)
        d = {
            "patient_id": "p1", "seed": 1, "baseline": dict(BASELINE),
            "jitter": {"hr": 2},
            "events": [{"onset_ms": 3000, "duration_ms": 60_000, "metric": "spo2", "target": 88, "ramp_ms": 2000}],
        }
        assert ScenarioScript.from_dict(d) == s


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32),
    t=st.integers(min_value=0, max_value=10**7),
    targets=st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=6),
    metrics=st.lists(st.sampled_from(METRIC_KEYS), min_size=1, max_size=6),
    jitters=st.dictionaries(st.sampled_from(METRIC_KEYS), st.floats(min_value=0, max_value=50)),
)
def test_domain_safety_under_extreme_scripts(seed, t, targets, metrics, jitters):
    # events in disjoint windows so the script validates; targets are wild
    events = tuple(
        ScenarioEvent(onset_ms=i * 20_000, duration_ms=15_000, metric=m, target=v, ramp_ms=1000)
        for i, (m, v) in enumerate(zip(metrics, targets))
    )
    s = script(seed=seed, jitter=jitters, events=events)
    sample = generate_sample(s, t)
    assert isinstance(sample, VitalSample)  # constructor re-checks all invariants


class StubEndpoint:
    """Records delivered lines; can simulate an outage or reject auth."""

    def __init__(self, reply=None):
        self.accepted: list[bytes] = []
        self.fail_remaining = 0
        self.reply = reply or {"ok": True}
        self.connects = 0

    def factory(self):
        self.connects += 1
        return _StubSession(self)


class _StubSession:
    def __init__(self, endpoint):
        self.endpoint = endpoint

    def send_line(self, line: bytes) -> dict:
        if self.endpoint.fail_remaining > 0:
            self.endpoint.fail_remaining -= 1
            raise ConnectionError("endpoint down")
        self.endpoint.accepted.append(line)
        return dict(self.endpoint.reply)

    def close(self):
        pass


def expected_transcript(s: ScenarioScript, ticks: int, tick_ms: int, token: str) -> list[bytes]:
    return [
        encode_message({"op": "ingest", "sample": generate_sample(s, k * tick_ms).to_wire(), "token": token})
        for k in range(ticks)
    ]


class TestDeviceRunner:
    def run_fast(self, endpoint, s, ticks, **kwargs):
        runner = DeviceRunner(
            s, endpoint.factory, token="tok", tick_ms=150, realtime=False,
            backoff_initial_ms=1, backoff_max_ms=2, **kwargs,
        )
        return runner.run(ticks)

    def test_ten_ticks_ten_batches(self):
        endpoint = StubEndpoint()
        s = script()
        stats = self.run_fast(endpoint, s, 10)
        assert stats.ticks_sent == 10
        assert endpoint.accepted == expected_transcript(s, 10, 150, "tok")
        timestamps = [k * 150 for k in range(10)]
        assert timestamps[-1] == 1350

    def test_outage_retransmits_in_order(self):
        endpoint = StubEndpoint()
        s = script()
        # let three batches through, then drop the link for four attempts
        class FlakySession(_StubSession):
            def send_line(self, line):
                if len(self.endpoint.accepted) == 3 and self.endpoint.fail_remaining == 0 and not getattr(self.endpoint, "outage_done", False):
                    self.endpoint.fail_remaining = 4
                    self.endpoint.outage_done = True
                return super().send_line(line)

        endpoint.factory_orig = endpoint.factory
        def factory():
            endpoint.connects += 1
            return FlakySession(endpoint)

        runner = DeviceRunner(s, factory, token="tok", tick_ms=150, realtime=False,
                              backoff_initial_ms=1, backoff_max_ms=2)
        stats = runner.run(10)
        assert stats.ticks_sent == 10
        assert stats.retries == 4
        assert endpoint.accepted == expected_transcript(s, 10, 150, "tok")
        assert endpoint.connects > 1  # reconnected after the outage

    def test_auth_rejection_is_terminal(self):
        endpoint = StubEndpoint(reply={"ok": False, "error": "auth"})
        with pytest.raises(AuthError):
            self.run_fast(endpoint, script(), 5)
        assert len(endpoint.accepted) == 1  # first batch reached the stub but was refused

    def test_transcripts_byte_identical_across_runs(self):
        s = script(seed=77, jitter={"hr": 2, "spo2": 1}, events=DESAT)
        a, b = StubEndpoint(), StubEndpoint()
        stats_a = self.run_fast(a, s, 40)
        stats_b = self.run_fast(b, s, 40)
        assert stats_a.transcript == stats_b.transcript
        assert a.accepted == b.accepted
        assert b"".join(a.accepted) == b"".join(b.accepted)
