import struct
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oamqkd import privacy
from oamqkd.channel import Outcome, default_channel
from oamqkd.protocol import keys, wire
from oamqkd.protocol.session import (Phase, PartyState, PhaseError, PulseRecords, SessionAborted, SessionParams,
                                     alice_emit_pulse, run_postprocess_pair, run_session, sample_positions, sift,
                                     transcript_digest)
from oamqkd.protocol.transport import InProcTransport, TransportError, tcp_pair
from oamqkd.protocol.wire import Message, MessageType, WireError


# -- wire format -------------------------------------------------------------------


def _roundtrip(msg):
    return wire.decode_frame(msg.encode())


def test_frame_layout():
    frame = wire.reconcile_done(513).encode()
    assert frame[:5] == struct.pack(">IB", 4, 9)
    assert wire.parse(wire.decode_frame(frame)) == 513


def test_all_messages_round_trip():
    rng = np.random.default_rng(0)
    bases = rng.integers(0, 2, 37)
    clicked = rng.integers(0, 2, 37)
    b, c = wire.parse(_roundtrip(wire.bases_announce(bases, clicked)))
    np.testing.assert_array_equal(b, bases)
    np.testing.assert_array_equal(c, clicked)
    np.testing.assert_array_equal(wire.parse(_roundtrip(wire.sift_ack(clicked))), clicked)
    assert wire.parse(_roundtrip(wire.parity_request(2, [(0, 7), (7, 14)]))) == (2, [(0, 7), (7, 14)])
    p, par = wire.parse(_roundtrip(wire.parity_response(3, [1, 0, 1])))
    assert p == 3 and par.tolist() == [1, 0, 1]
    assert wire.parse(_roundtrip(wire.shuffle_seed(2**63, 5))) == (2**63, 5)
    seed = rng.integers(0, 2, 10)
    n_in, n_out, bits = wire.parse(_roundtrip(wire.pa_seed(8, 3, seed)))
    assert (n_in, n_out) == (8, 3) and bits.tolist() == seed.tolist()
    assert wire.parse(_roundtrip(wire.abort(1, "qber too high"))) == (1, "qber too high")
    s, syms = wire.parse(_roundtrip(wire.qber_sample(9, [0, 6, 3])))
    assert s == 9 and syms.tolist() == [0, 6, 3]
    assert wire.parse(_roundtrip(wire.key_confirm(bytes(range(32))))) == bytes(range(32))


@given(st.lists(st.integers(0, 1), max_size=300))
def test_bit_packing_round_trip(bits):
    assert wire.unpack_bits(wire.pack_bits(bits), len(bits)).tolist() == bits


def test_malformed_frames_rejected():
    with pytest.raises(WireError):
        wire.decode_frame(b"\x00\x00")
    with pytest.raises(WireError):
        wire.decode_frame(struct.pack(">IB", 0, 99))
    with pytest.raises(WireError):
        wire.decode_frame(struct.pack(">IB", 5, 9) + b"\x00")
    with pytest.raises(WireError):
        wire.parse(Message(MessageType.RECONCILE_DONE, b"\x00\x00\x00\x01\x02"))
    with pytest.raises(WireError):
        wire.key_confirm(b"short")


# -- transports -------------------------------------------------------------------


@pytest.mark.parametrize("make", [InProcTransport.pair, tcp_pair])
def test_transport_delivers_in_order(make):
    a, b = make()
    try:
        for i in range(20):
            a.send(wire.reconcile_done(i))
        assert [wire.parse(b.recv(5)) for _ in range(20)] == list(range(20))
        b.send(wire.abort(0, "x"))
        assert b.transcript[-1].direction == "sent"
        assert a.expect(MessageType.SIFT_ACK, 5).type is MessageType.ABORT
        b.send(wire.reconcile_done(1))
        with pytest.raises(TransportError):
            a.expect(MessageType.SIFT_ACK, 5)
    finally:
        a.close()
        b.close()


@pytest.mark.parametrize("make", [InProcTransport.pair, tcp_pair])
def test_recv_after_peer_close_fails(make):
    a, b = make()
    a.close()
    with pytest.raises(TransportError):
        b.recv(5)
    b.close()


def test_recv_timeout():
    a, b = InProcTransport.pair()
    with pytest.raises(TransportError):
        b.recv(0.05)


# -- keys and sifting ----------------------------------------------------------------


def test_symbol_bit_mapping():
    assert keys.symbols_to_bits([5], 7).tolist() == [1, 0, 1]
    assert keys.symbols_to_bits([0, 6], 7).tolist() == [0, 0, 0, 1, 1, 0]
    assert keys.bits_per_symbol(7) == 3 and keys.bits_per_symbol(2) == 1 and keys.bits_per_symbol(9) == 4
    with pytest.raises(ValueError):
        keys.symbols_to_bits([7], 7)
    with pytest.raises(ValueError):
        keys.bits_to_symbols([1, 1, 1], 7)


@given(st.lists(st.integers(0, 6), max_size=100))
def test_symbol_bits_round_trip(symbols):
    assert keys.bits_to_symbols(keys.symbols_to_bits(symbols, 7), 7).tolist() == symbols


def test_shared_shuffle_positions_uniform():
    counts = np.zeros((8, 8))
    for seed in range(16_000):
        perm = keys.shuffle_permutation(8, seed)
        counts[np.arange(8), perm] += 1
    assert stats.chisquare(counts.ravel()).pvalue > 1e-3


def test_shuffle_round_trip():
    bits = np.random.default_rng(0).integers(0, 2, 500)
    np.testing.assert_array_equal(keys.shared_unshuffle(keys.shared_shuffle(bits, 4), 4), bits)


def test_sift_keeps_matched_single_clicks():
    idx = np.arange(6)
    alice = PulseRecords(idx, np.array([0, 1, 2, 3, 4, 5]), np.array([0, 0, 1, 1, 0, 1]))
    bob = PulseRecords(idx, np.array([0, 1, -1, 3, 2, -1]), np.array([0, 1, 1, 1, 0, 1]),
                       np.array([1, 1, 0, 1, 1, 2]))
    ka, kb = sift(alice, bob)
    assert ka.pulse_index.tolist() == [0, 3, 4]
    assert kb.symbols.tolist() == [0, 3, 2]
    with pytest.raises(ValueError):
        sift(alice, PulseRecords(idx[:5], idx[:5], idx[:5], idx[:5]))


def test_sample_positions_deterministic_and_sized():
    a = sample_positions(1000, 0.1, 3)
    assert len(a) == 100 and np.array_equal(a, sample_positions(1000, 0.1, 3))
    assert len(np.unique(a)) == 100


def test_otp_round_trip_and_reuse_warning():
    data = bytes(range(256)) * 3
    key = np.random.default_rng(1).integers(0, 2, 8 * len(data))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        enc = keys.otp_encrypt(data, key)
    assert enc != data
    assert keys.otp_decrypt(enc, key) == data
    with pytest.warns(keys.KeyReuseWarning):
        keys.otp_encrypt(data, key[:64])
    with pytest.raises(ValueError):
        keys.otp_encrypt(data, [])


def test_phase_is_monotone():
    st_ = PartyState("alice", 1)
    alice_emit_pulse(st_, np.random.default_rng(0))
    st_.advance(Phase.RECONCILING)
    with pytest.raises(PhaseError):
        st_.advance(Phase.SIFTING)
    with pytest.raises(PhaseError):
        alice_emit_pulse(st_, np.random.default_rng(0))


# -- sessions -----------------------------------------------------------------------


def test_session_aborts_on_high_qber():
    params = SessionParams(pulses=60_000)
    with pytest.raises(SessionAborted) as info:
        run_session(params, default_channel(delta=0.6, epsilon=0.0, mu=2.0))
    assert info.value.phase is Phase.SIFTING
    summary = info.value.result.summary()
    assert summary["status"] == "aborted"
    assert summary["qber_sample"] > params.threshold


def test_session_transcript_audit():
    params = SessionParams(pulses=150_000)
    res = run_session(params, default_channel(mu=1.0))
    assert res.keys_match
    sent = [e.message for e in res.classical]
    bob_parities = sum(len(wire.parse(m)[1]) for m in sent if m.type is MessageType.PARITY_RESPONSE)
    assert bob_parities == res.bob.post.leaked_bits == res.alice.post.leaked_bits
    # Alice never sends her raw key symbols except the disclosed QBER sample
    sample_msgs = [m for m in sent if m.type is MessageType.QBER_SAMPLE]
    assert len(sample_msgs) == 2
    assert len(wire.parse(sample_msgs[0])[1]) == len(res.alice.sample)


def test_session_tcp_matches_inproc():
    params = SessionParams(pulses=150_000)
    ch = default_channel(mu=1.0)
    a = run_session(params, ch, "inproc")
    b = run_session(params, ch, "tcp")
    assert a.keys_match and b.keys_match
    np.testing.assert_array_equal(a.alice_key, b.alice_key)
    assert transcript_digest(a.classical) == transcript_digest(b.classical)


def test_postprocess_pair_detects_mismatch_abort():
    rng = np.random.default_rng(2)
    alice = rng.integers(0, 2, 2000).astype(np.uint8)
    bob = alice ^ (rng.random(2000) < 0.05)
    a, b, transcript = run_postprocess_pair(alice, bob, "inproc", 4, 0.05, lambda leaked: 2000 - leaked)
    assert a.digest == b.digest
    assert a.n_out == 2000 - a.leaked_bits
    assert privacy.key_digest(a.final_key) == a.digest


def test_write_transcript_and_summary(tmp_path):
    res = run_session(SessionParams(pulses=80_000), default_channel(mu=1.0))
    res.write_transcript(tmp_path / "t.csv")
    res.write_summary(tmp_path / "s.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 80_001
    assert lines[0].startswith("pulse_index,alice_basis")
    assert "final_key_sha256" in (tmp_path / "s.csv").read_text()
    outcome_counts = np.bincount(res.events.outcome, minlength=3)
    assert outcome_counts[Outcome.CLICK] == res.summary()["single_clicks"]
