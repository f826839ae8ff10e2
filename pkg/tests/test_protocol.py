import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qkdlab import mbp
from qkdlab.attacks import EveLog, Passive
from qkdlab.config import SessionConfig, load_config
from qkdlab.detector import ClickKind, DetectorParams, EfficiencyCurve
from qkdlab.protocol import (AliceRecords, BobRecords, SiftedKey, abort_decision, estimate_qber,
                             eve_info_accounting, run_session, sift)

IDEAL = (DetectorParams(curve=EfficiencyCurve(peak=1.0), dark_count_prob=0.0),) * 2


def records(alice_bits, alice_bases, bob_bases, outcomes):
    n = len(alice_bits)
    slots = np.arange(n)
    a = AliceRecords(slots, np.array(alice_bits, np.int8), np.array(alice_bases, np.int8), slots * 1.0)
    ts = np.where(np.array(outcomes) > 0, 0.0, np.nan)
    b = BobRecords(slots, np.array(bob_bases, np.int8), np.array(outcomes, np.int8), ts, ts)
    return a, b


# --- sifting ---------------------------------------------------------------

def test_sift_rules():
    a, b = records([0, 1, 1, 0, 1], [0, 1, 0, 1, 0], [0, 1, 1, 1, 0], [1, 2, 1, 3, 0])
    key = sift(a, b)
    assert key.slot.tolist() == [0, 1]
    assert key.bob_bit.tolist() == [0, 1]


def test_sift_all_mismatched_is_empty():
    a, b = records([0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 2, 1])
    assert len(sift(a, b)) == 0


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), st.integers(0, 3)),
                min_size=1, max_size=200))
def test_sift_audit(rows):
    bits, ab, bb, out = (list(c) for c in zip(*rows))
    a, b = records(bits, ab, bb, out)
    key = sift(a, b)
    for s, bob_bit in zip(key.slot.tolist(), key.bob_bit.tolist()):
        assert ab[s] == bb[s]
        assert out[s] in (ClickKind.D0, ClickKind.D1)
        assert bob_bit == (1 if out[s] == ClickKind.D1 else 0)
    expected = [i for i in range(len(rows)) if ab[i] == bb[i] and out[i] in (1, 2)]
    assert key.slot.tolist() == expected


def test_sift_requires_common_slots():
    a, b = records([0], [0], [0], [1])
    b.slot = b.slot + 1
    with pytest.raises(ValueError):
        sift(a, b)


# --- QBER and abort -----------------------------------------------------------

def test_qber_full_sample_is_exact_and_consumes_key():
    key = SiftedKey(np.arange(8), np.array([1, 1, 0, 1, 0, 0, 1, 0], np.int8),
                    np.array([1, 1, 0, 0, 0, 1, 0, 0], np.int8))
    q, rest, sampled, errors = estimate_qber(key, 1.0, np.random.default_rng(0))
    assert q == 3 / 8 and sampled == 8 and errors == 3 and len(rest) == 0


def test_qber_identical_keys_zero():
    key = SiftedKey(np.arange(100), np.zeros(100, np.int8), np.zeros(100, np.int8))
    q, rest, sampled, _ = estimate_qber(key, 0.3, np.random.default_rng(0))
    assert q == 0.0 and sampled == 30 and len(rest) == 70


def test_qber_empty_key_is_undefined():
    q, rest, sampled, errors = estimate_qber(SiftedKey.empty(), 0.5, np.random.default_rng(0))
    assert math.isnan(q) and sampled == 0
    assert abort_decision(q)


def test_qber_rejects_bad_fraction():
    with pytest.raises(ValueError):
        estimate_qber(SiftedKey.empty(), 0.0, np.random.default_rng(0))


@pytest.mark.parametrize("q,expected", [(0.25, True), (0.0, False), (0.109, False), (0.11, False),
                                        (0.1101, True)])
def test_abort_decision(q, expected):
    assert abort_decision(q, 0.11) is expected


def test_eve_accounting_blind_guess_without_log():
    n = 10_000
    rng = np.random.default_rng(1)
    key = SiftedKey(np.arange(n), rng.integers(0, 2, n).astype(np.int8), np.zeros(n, np.int8))
    frac = eve_info_accounting(key, EveLog.empty(), np.random.default_rng(2))
    assert abs(frac - 0.5) <= 0.01


def test_eve_accounting_uses_log():
    key = SiftedKey(np.array([2, 5, 7]), np.array([1, 0, 1], np.int8), np.array([1, 0, 1], np.int8))
    log = EveLog.build(np.array([2, 5, 7]), 0, np.array([1, 0, 0]), "resend")
    assert eve_info_accounting(key, log, np.random.default_rng(0)) == pytest.approx(2 / 3)


# --- sessions ---------------------------------------------------------------

def test_ideal_session_no_eve():
    res = run_session(SessionConfig(num_pulses=100_000, seed=11, detectors=IDEAL))
    assert res.stats.qber == 0.0
    assert abs(res.stats.sift_fraction - 0.5) <= 0.01
    assert np.array_equal(res.sifted.alice_bit, res.sifted.bob_bit)
    assert res.stats.pulses_detected <= res.stats.pulses_sent


def test_intercept_resend_session_matches_enumeration():
    q_or, e_or = oracles.enumerate_intercept_resend()
    res = run_session(load_config("intercept_resend"))
    n = res.stats.sampled_bits
    assert abs(res.stats.qber - q_or) <= 0.01
    assert abs(res.stats.qber - q_or) <= 4 * math.sqrt(q_or * (1 - q_or) / n)
    assert abs(res.stats.eve_known_fraction - e_or) <= 0.01
    assert res.stats.abort


def test_intercept_resend_half_sample_binomial():
    res = run_session(replace(load_config("intercept_resend"), seed=99, sample_fraction=0.5))
    assert abs(res.stats.qber - 0.25) <= 0.015


def test_zero_pulses_flags_undefined_and_aborts():
    res = run_session(SessionConfig(num_pulses=0, seed=1, detectors=IDEAL))
    assert len(res.alice) == 0 and len(res.bob) == 0
    assert not res.stats.qber_defined and res.stats.abort


def test_channel_loss_and_delay():
    cfg = SessionConfig(num_pulses=50_000, seed=3, detectors=IDEAL)
    cfg = replace(cfg, channel=replace(cfg.channel, loss=0.3, delay=123.0))
    res = run_session(cfg)
    assert abs(res.stats.detection_rate - 0.7) <= 4 * math.sqrt(0.21 / 50_000)
    stamps = res.bob.timestamp[res.bob.outcome > 0]
    assert np.all(stamps == 0.0)  # relative to nominal arrival, delay included


def test_passive_matches_no_eve():
    cfg = load_config("no_eve_realistic")
    cfg = replace(cfg, num_pulses=30_000)
    a = run_session(cfg)
    b = run_session(cfg, strategy=Passive())
    assert a.stats == b.stats


def test_same_seed_same_stats():
    cfg = replace(load_config("after_gate"), num_pulses=20_000)
    assert run_session(cfg).stats == run_session(cfg).stats
    assert run_session(cfg, trial=1).stats != run_session(cfg).stats


def test_truncated_revealed_timestamps():
    cfg = replace(load_config("sidechannel_0p5ns"), num_pulses=5000, timestamp_resolution=0.25)
    res = run_session(cfg)
    rev = res.bob.revealed_timestamp[res.bob.outcome > 0]
    assert np.allclose(rev / 0.25, np.round(rev / 0.25))
    assert not np.allclose(res.bob.timestamp[res.bob.outcome > 0], rev)


# --- magical-ball protocol -------------------------------------------------------

def test_mbp_single_slots():
    r = mbp.run_script([mbp.ScriptSlot("OD", 3, "nOD"), mbp.ScriptSlot("EV", 4, "nL3")])
    assert (r[0].bob_answer, r[0].alice_bit) == (1, 1)
    assert (r[1].bob_answer, r[1].alice_bit) == (0, 0)


def test_mbp_rejects_inconsistent_value():
    with pytest.raises(mbp.ScriptError):
        mbp.check_encoding("L3", 4)
    with pytest.raises(mbp.ScriptError):
        mbp.run_script([mbp.ScriptSlot("L3", 4, "nOD")])


def test_mbp_table2():
    kept, _, key = mbp.sifted(mbp.run_script(mbp.table2_script()))
    assert kept == [1, 3, 4, 5, 6, 8, 11, 12]
    assert key == [1, 1, 0, 1, 0, 0, 1, 0]


def test_mbp_table3():
    res = mbp.run_script(mbp.table3_script())
    kept, alice, bob = mbp.sifted(res)
    assert kept == [1, 3, 4, 5, 6, 8, 11, 12]
    assert bob == [1, 1, 0, 0, 0, 1, 0, 0]
    assert [r.slot for r in res if r.error] == [5, 8, 11]
    key = SiftedKey(np.array(kept), np.array(alice, np.int8), np.array(bob, np.int8))
    q, rest, _, _ = estimate_qber(key, 1.0, np.random.default_rng(0))
    assert q == 3 / 8 and len(rest) == 0
    assert mbp.qber(res) == 3 / 8


def test_mbp_table1_encoding_consistent():
    for k, n in zip(mbp.TABLE1_KEYWORDS, mbp.TABLE1_VALUES):
        mbp.check_encoding(k, n)
