"""Alice and Bob endpoints for the prepare-and-measure protocol.

The quantum channel is a :class:`QuantumLink` shared by the harness; only
basis tags, click flags, sample symbols, seeds, parities, digests and aborts
travel over the classical :class:`~.transport.Transport`.

Flow: transmit -> bases announcement / sift ack -> disclosed QBER sample ->
shuffle seed -> Cascade (parity requests) -> PA seed -> key confirmation.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

import numpy as np

from .. import privacy
from ..channel import ChannelModel, EventLog, Outcome, simulate_pulses
from ..hilbert import Basis
from ..reconcile import CascadeConfig, ParityOracle, ReconciliationError, cascade_bob, parities_for, pass_permutations
from ..security import coherent_bound, eve_info, mutual_info_uniform
from . import wire
from .keys import bits_to_words, shared_shuffle, shared_unshuffle, symbols_to_bits
from .transport import InProcTransport, Transport, TransportError, tcp_pair
from .wire import MessageType

log = logging.getLogger(__name__)


class Phase(IntEnum):
    TRANSMITTING = 0
    SIFTING = 1
    RECONCILING = 2
    AMPLIFYING = 3
    DONE = 4


class PhaseError(RuntimeError):
    pass


class SessionAborted(RuntimeError):
    def __init__(self, phase: Phase, reason: str):
        super().__init__(f"session aborted during {phase.name.lower()}: {reason}")
        self.phase = phase
        self.reason = reason
        self.result: SessionResult | None = None
        self.partial = None  # the raising endpoint's outcome so far, if any


@dataclass(frozen=True)
class Seeds:
    source: int = 1
    alice_basis: int = 2
    bob_basis: int = 3
    channel: int = 4
    shuffle: int = 5
    cascade: int = 6
    pa: int = 7
    sample: int = 8


@dataclass(frozen=True)
class SessionParams:
    d: int = 7
    pulses: int = 4_000_000
    sample_fraction: float = 0.1
    abort_threshold: float | None = None
    safety_margin: int = 0
    cascade_passes: int = 4
    initial_block_size: int | None = None
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if self.pulses < 1:
            raise ValueError("need at least one pulse")
        if not 0 < self.sample_fraction < 1:
            raise ValueError("sample fraction must lie in (0, 1)")

    @property
    def threshold(self) -> float:
        return coherent_bound(self.d) if self.abort_threshold is None else self.abort_threshold


@dataclass
class PartyState:
    role: str
    seed: int
    phase: Phase = Phase.TRANSMITTING
    symbols: list[int] = field(default_factory=list)
    bases: list[int] = field(default_factory=list)
    outcomes: list[int] = field(default_factory=list)

    def advance(self, phase: Phase) -> None:
        if phase < self.phase:
            raise PhaseError(f"{self.role} cannot go back from {self.phase.name} to {phase.name}")
        self.phase = phase

    def require(self, phase: Phase) -> None:
        if self.phase is not phase:
            raise PhaseError(f"{self.role} is {self.phase.name}, expected {phase.name}")


def alice_emit_pulse(state: PartyState, rng: np.random.Generator, d: int = 7,
                     basis_rng: np.random.Generator | None = None) -> tuple[int, Basis]:
    state.require(Phase.TRANSMITTING)
    symbol = int(rng.integers(0, d))
    basis = Basis(int((basis_rng or rng).integers(0, 2)))
    state.symbols.append(symbol)
    state.bases.append(int(basis))
    return symbol, basis


def alice_emit_batch(n: int, d: int, symbol_rng: np.random.Generator,
                     basis_rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    return symbol_rng.integers(0, d, n), basis_rng.integers(0, 2, n).astype(np.int8)


@dataclass(frozen=True)
class PulseRecords:
    """Per-pulse records of one party.  ``outcome`` is None for Alice."""

    pulse_index: np.ndarray
    symbol: np.ndarray
    basis: np.ndarray
    outcome: np.ndarray | None = None


@dataclass(frozen=True)
class SiftedKey:
    symbols: np.ndarray
    basis_record: np.ndarray
    pulse_index: np.ndarray

    def __len__(self):
        return len(self.symbols)


def sift_mask(alice_bases, bob_bases, bob_outcome) -> np.ndarray:
    return (np.asarray(bob_outcome) == Outcome.CLICK) & (np.asarray(alice_bases) == np.asarray(bob_bases))


def sift(alice: PulseRecords, bob: PulseRecords) -> tuple[SiftedKey, SiftedKey]:
    """Keep single-click pulses measured in the basis they were prepared in."""
    if len(alice.pulse_index) != len(bob.pulse_index) or np.any(alice.pulse_index != bob.pulse_index):
        raise ValueError("pulse records are not index-aligned")
    if bob.outcome is None:
        raise ValueError("Bob's records need outcomes")
    keep = sift_mask(alice.basis, bob.basis, bob.outcome)
    idx = alice.pulse_index[keep]
    return (SiftedKey(alice.symbol[keep], alice.basis[keep], idx),
            SiftedKey(bob.symbol[keep], bob.basis[keep], idx))


def sample_positions(n: int, fraction: float, seed: int) -> np.ndarray:
    k = int(round(n * fraction))
    return np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False))


# -- quantum channel ---------------------------------------------------------------


class QuantumLink:
    """Carries Alice's prepared batch to Bob's detectors.

    Bob only sees click outcomes and detector indices.  The full event log
    stays on the link for the harness transcript.
    """

    def __init__(self, model: ChannelModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self._sent: tuple[np.ndarray, np.ndarray] | None = None
        self._ready = threading.Event()
        self.events: EventLog | None = None

    def send(self, symbols, bases) -> None:
        self._sent = (np.asarray(symbols), np.asarray(bases))
        self._ready.set()

    def measure(self, recv_bases, timeout: float = 60.0) -> tuple[np.ndarray, np.ndarray]:
        if not self._ready.wait(timeout):
            raise TransportError("no pulses arrived on the quantum channel")
        symbols, bases = self._sent
        self.events = simulate_pulses(symbols, bases, recv_bases, self.model, self.rng)
        return self.events.outcome.copy(), self.events.detector.copy()


# -- classical post-processing -----------------------------------------------------


def _check_abort(msg: wire.Message, phase: Phase) -> wire.Message:
    if msg.type is MessageType.ABORT:
        _, reason = wire.parse(msg)
        raise SessionAborted(phase, f"peer aborted: {reason}")
    return msg


class TransportParityOracle(ParityOracle):
    """Bob's view of Alice: parity queries over the classical channel."""

    def __init__(self, transport: Transport):
        super().__init__()
        self.transport = transport

    def _ask(self, pass_index, ranges):
        self.transport.send(wire.parity_request(pass_index, ranges))
        msg = _check_abort(self.transport.expect(MessageType.PARITY_RESPONSE), Phase.RECONCILING)
        p, bits = wire.parse(msg)
        if p != pass_index:
            raise ReconciliationError(f"response for pass {p}, asked pass {pass_index}")
        return bits.tolist()

    def finish(self):
        self.transport.send(wire.reconcile_done(self.leaked_bits))


def serve_parities(alice_bits: np.ndarray, transport: Transport, passes: int, cascade_seed: int) -> int:
    """Answer Bob's parity requests until he reports completion.

    Returns the number of parity bits disclosed, which must equal Bob's count.
    """
    perms = pass_permutations(len(alice_bits), passes, cascade_seed)
    disclosed = 0
    while True:
        msg = _check_abort(transport.recv(), Phase.RECONCILING)
        if msg.type is MessageType.RECONCILE_DONE:
            claimed = wire.parse(msg)
            if claimed != disclosed:
                raise SessionAborted(Phase.RECONCILING, f"leakage mismatch: sent {disclosed}, peer counted {claimed}")
            return disclosed
        if msg.type is not MessageType.PARITY_REQUEST:
            raise TransportError(f"unexpected {msg.type.name} during reconciliation")
        p, ranges = wire.parse(msg)
        if p >= passes:
            raise SessionAborted(Phase.RECONCILING, f"parity request for pass {p} beyond {passes}")
        answer = parities_for(alice_bits, perms[p], ranges)
        disclosed += len(answer)
        transport.send(wire.parity_response(p, answer))


@dataclass
class EndpointResult:
    role: str
    final_key: np.ndarray
    digest: str
    leaked_bits: int
    parity_exchanges: int = 0
    corrections: int = 0
    reconciled_bits: np.ndarray | None = None
    n_out: int = 0


LengthRule = Callable[[int], int]


def alice_postprocess(bits: np.ndarray, transport: Transport, passes: int, length_rule: LengthRule,
                      shuffle_seed: int, cascade_seed: int, pa_seed: int, state: PartyState | None = None
                      ) -> EndpointResult:
    """Shuffle, serve Cascade, hash and confirm.  ``length_rule(leaked)`` gives the output length."""
    state = state or PartyState("alice", 0, Phase.RECONCILING)
    state.advance(Phase.RECONCILING)
    transport.send(wire.shuffle_seed(shuffle_seed, cascade_seed))
    shuffled = shared_shuffle(np.asarray(bits, dtype=np.uint8), shuffle_seed)
    leaked = serve_parities(shuffled, transport, passes, cascade_seed)

    state.advance(Phase.AMPLIFYING)
    n_out = int(length_rule(leaked))
    seed = privacy.ToeplitzSeed.random(len(shuffled), n_out, np.random.default_rng(pa_seed))
    transport.send(wire.pa_seed(seed.n_in, seed.n_out, seed.bits))
    final = privacy.toeplitz_hash(shuffled, seed)
    digest = privacy.key_digest(final)
    transport.send(wire.key_confirm(bytes.fromhex(digest)))
    reply = _check_abort(transport.expect(MessageType.KEY_CONFIRM), Phase.AMPLIFYING)
    if wire.parse(reply).hex() != digest:
        raise SessionAborted(Phase.AMPLIFYING, "final key digests differ")
    state.advance(Phase.DONE)
    return EndpointResult("alice", final, digest, leaked, n_out=n_out, reconciled_bits=shuffled)


def bob_postprocess(bits: np.ndarray, transport: Transport, passes: int, bit_qber: float | None,
                    initial_block_size: int | None = None, state: PartyState | None = None) -> EndpointResult:
    state = state or PartyState("bob", 0, Phase.RECONCILING)
    state.advance(Phase.RECONCILING)
    msg = _check_abort(transport.expect(MessageType.SHUFFLE_SEED), Phase.RECONCILING)
    shuffle_seed, cascade_seed = wire.parse(msg)
    shuffled = shared_shuffle(np.asarray(bits, dtype=np.uint8), shuffle_seed)
    cfg = CascadeConfig(passes=passes, initial_block_size=initial_block_size, seed=cascade_seed)
    result = cascade_bob(shuffled, cfg, TransportParityOracle(transport), qber=bit_qber)

    state.advance(Phase.AMPLIFYING)
    msg = _check_abort(transport.expect(MessageType.PA_SEED), Phase.AMPLIFYING)
    n_in, n_out, seed_bits = wire.parse(msg)
    if n_in != len(shuffled):
        raise SessionAborted(Phase.AMPLIFYING, f"hash input length {n_in} != key length {len(shuffled)}")
    final = privacy.toeplitz_hash(result.corrected, privacy.ToeplitzSeed(seed_bits, n_in, n_out))
    digest = privacy.key_digest(final)
    theirs = wire.parse(_check_abort(transport.expect(MessageType.KEY_CONFIRM), Phase.AMPLIFYING))
    transport.send(wire.key_confirm(bytes.fromhex(digest)))
    if theirs.hex() != digest:
        raise SessionAborted(Phase.AMPLIFYING, "final key digests differ")
    state.advance(Phase.DONE)
    corrected = shared_unshuffle(result.corrected, shuffle_seed)
    return EndpointResult("bob", final, digest, result.leaked_bits, result.parity_exchanges,
                          result.corrections, corrected, n_out)


def _send_abort(transport: Transport, exc: SessionAborted) -> None:
    if exc.reason.startswith("peer aborted"):
        return
    try:
        transport.send(wire.abort(int(exc.phase), exc.reason))
    except TransportError:
        pass


@dataclass
class SampleStats:
    size: int
    symbol_errors: int
    bit_errors: int
    bits: int

    @property
    def qber(self) -> float:
        return self.symbol_errors / self.size if self.size else 0.0

    @property
    def bit_qber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


def _sample_stats(a_syms, b_syms, d) -> SampleStats:
    a = np.asarray(a_syms, dtype=np.int64)
    b = np.asarray(b_syms, dtype=np.int64)
    ab = symbols_to_bits(a, d)
    bb = symbols_to_bits(b, d)
    return SampleStats(len(a), int(np.count_nonzero(a != b)), int(np.count_nonzero(ab != bb)), len(ab))


def secure_length_rule(params: SessionParams, n_symbols: int, qber: float) -> LengthRule:
    F = 1 - qber
    i_ab = mutual_info_uniform(params.d, F)
    i_ae = eve_info(params.d, F)

    def rule(leaked: int) -> int:
        return privacy.secure_length(privacy.SecureLengthBudget(n_symbols, i_ab, i_ae, leaked, params.safety_margin))
    return rule


@dataclass
class AliceOutcome:
    symbols: np.ndarray
    bases: np.ndarray
    keep: np.ndarray
    sample: np.ndarray
    stats: SampleStats
    post: EndpointResult | None = None


@dataclass
class BobOutcome:
    bases: np.ndarray
    outcome: np.ndarray
    detector: np.ndarray
    keep: np.ndarray
    sample: np.ndarray
    stats: SampleStats
    post: EndpointResult | None = None
    raw_symbols: np.ndarray | None = None
    corrected_symbols: np.ndarray | None = None


def _sifting_check(n_sifted: int, n_sample: int, phase: Phase):
    if n_sifted - n_sample < 1 or n_sample < 1:
        raise SessionAborted(phase, f"only {n_sifted} sifted symbols; too few for sampling and a key")


def run_alice(params: SessionParams, transport: Transport, qlink: QuantumLink) -> AliceOutcome:
    s = params.seeds
    state = PartyState("alice", s.source)
    try:
        symbols, bases = alice_emit_batch(params.pulses, params.d, np.random.default_rng(s.source),
                                          np.random.default_rng(s.alice_basis))
        qlink.send(symbols, bases)

        state.advance(Phase.SIFTING)
        msg = _check_abort(transport.expect(MessageType.BASES_ANNOUNCE), Phase.SIFTING)
        bob_bases, clicked = wire.parse(msg)
        if len(bob_bases) != params.pulses:
            raise SessionAborted(Phase.SIFTING, f"bases for {len(bob_bases)} pulses, sent {params.pulses}")
        keep = clicked.astype(bool) & (bob_bases == bases)
        transport.send(wire.sift_ack(keep))
        key = symbols[keep]
        sample = sample_positions(len(key), params.sample_fraction, s.sample)
        _sifting_check(len(key), len(sample), Phase.SIFTING)
        transport.send(wire.qber_sample(s.sample, key[sample]))
        reply = _check_abort(transport.expect(MessageType.QBER_SAMPLE), Phase.SIFTING)
        _, bob_sample = wire.parse(reply)
        stats = _sample_stats(key[sample], bob_sample, params.d)
        out = AliceOutcome(symbols, bases, keep, sample, stats)
        if stats.qber > params.threshold:
            exc = SessionAborted(Phase.SIFTING, f"sample QBER {stats.qber:.4f} above threshold {params.threshold:.4f}")
            exc.partial = out
            raise exc

        key = np.delete(key, sample)
        rule = secure_length_rule(params, len(key), stats.qber)
        out.post = alice_postprocess(symbols_to_bits(key, params.d), transport, params.cascade_passes, rule,
                                     s.shuffle, s.cascade, s.pa, state)
        return out
    except SessionAborted as exc:
        _send_abort(transport, exc)
        raise
    except TransportError as exc:
        raise SessionAborted(state.phase, f"transport failure: {exc}") from exc


def run_bob(params: SessionParams, transport: Transport, qlink: QuantumLink) -> BobOutcome:
    s = params.seeds
    state = PartyState("bob", s.bob_basis)
    try:
        bases = np.random.default_rng(s.bob_basis).integers(0, 2, params.pulses).astype(np.int8)
        outcome, detector = qlink.measure(bases)

        state.advance(Phase.SIFTING)
        clicked = outcome == Outcome.CLICK
        transport.send(wire.bases_announce(bases, clicked))
        keep = _check_abort(transport.expect(MessageType.SIFT_ACK), Phase.SIFTING)
        keep = wire.parse(keep).astype(bool)
        if len(keep) != params.pulses or np.any(keep & ~clicked):
            raise SessionAborted(Phase.SIFTING, "sift acknowledgement inconsistent with announced clicks")
        key = detector[keep]
        msg = _check_abort(transport.expect(MessageType.QBER_SAMPLE), Phase.SIFTING)
        seed, alice_sample = wire.parse(msg)
        sample = sample_positions(len(key), params.sample_fraction, seed)
        if len(sample) != len(alice_sample):
            raise SessionAborted(Phase.SIFTING, "sample sizes disagree")
        transport.send(wire.qber_sample(seed, key[sample]))
        stats = _sample_stats(alice_sample, key[sample], params.d)
        out = BobOutcome(bases, outcome, detector, keep, sample, stats)
        if stats.qber > params.threshold:
            # Alice reaches the same verdict and sends the abort
            try:
                _check_abort(transport.expect(MessageType.ABORT), Phase.SIFTING)
            except SessionAborted as exc:
                exc.partial = out
                raise
            raise SessionAborted(Phase.SIFTING, "peer continued past a sample QBER above threshold")

        key = np.delete(key, sample)
        out.raw_symbols = key
        bit_qber = stats.bit_qber if stats.bit_errors else 1.0 / max(stats.bits, 1)
        out.post = bob_postprocess(symbols_to_bits(key, params.d), transport, params.cascade_passes, bit_qber,
                                   params.initial_block_size, state)
        out.corrected_symbols = bits_to_words(out.post.reconciled_bits, params.d)
        return out
    except SessionAborted as exc:
        _send_abort(transport, exc)
        raise
    except TransportError as exc:
        raise SessionAborted(state.phase, f"transport failure: {exc}") from exc


# -- orchestration ---------------------------------------------------------------


@dataclass
class SessionResult:
    params: SessionParams
    alice: AliceOutcome | None
    bob: BobOutcome | None
    events: EventLog | None
    classical: list
    aborted: SessionAborted | None = None

    @property
    def alice_key(self) -> np.ndarray:
        return self.alice.post.final_key

    @property
    def bob_key(self) -> np.ndarray:
        return self.bob.post.final_key

    @property
    def keys_match(self) -> bool:
        return self.alice_key.size == self.bob_key.size and bool(np.all(self.alice_key == self.bob_key))

    def summary(self) -> dict:
        a, b = self.alice, self.bob
        out = {"pulses": self.params.pulses, "d": self.params.d,
               "status": "aborted" if self.aborted else "ok",
               "phase": (self.aborted.phase.name.lower() if self.aborted else "done")}
        if b is not None:
            out["single_clicks"] = int(np.count_nonzero(b.outcome == Outcome.CLICK))
            out["sifted_symbols"] = int(np.count_nonzero(b.keep))
            out["sample_size"] = b.stats.size
            out["qber_sample"] = b.stats.qber
            out["bit_qber_sample"] = b.stats.bit_qber
        if b is not None and b.post is not None:
            n = len(b.raw_symbols)
            errors = int(np.count_nonzero(b.raw_symbols != b.corrected_symbols))
            qber = errors / n if n else 0.0
            out.update({
                "key_symbols": n,
                "qber_corrected": qber,
                "leaked_bits": b.post.leaked_bits,
                "parity_exchanges": b.post.parity_exchanges,
                "final_key_bits": b.post.n_out,
                "I_AB_measured": mutual_info_uniform(self.params.d, 1 - qber),
                "I_AE_measured": eve_info(self.params.d, 1 - qber),
                "secure_bits_per_photon_measured": mutual_info_uniform(self.params.d, 1 - qber) - eve_info(self.params.d, 1 - qber),
                "final_bits_per_sifted_symbol": b.post.n_out / n if n else 0.0,
                "final_key_sha256": b.post.digest,
                "keys_match": self.keys_match if self.alice and self.alice.post else False,
            })
        if self.aborted:
            out["abort_reason"] = self.aborted.reason
        return out

    def write_transcript(self, path) -> None:
        """Per-pulse CSV.  Symbols are the harness's view, never sent classically."""
        ev, a, b = self.events, self.alice, self.bob
        if ev is None or a is None or b is None:
            raise ValueError("no pulse records to write")
        sifted = np.flatnonzero(b.keep)
        sampled = np.zeros(len(ev), dtype=bool)
        sampled[sifted[b.sample]] = True
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pulse_index", "alice_basis", "alice_symbol", "bob_basis", "outcome", "detector",
                        "sifted", "sampled"])
            for i in range(len(ev)):
                e = ev.event(i)
                det = "|".join(map(str, e.detectors))
                w.writerow([i, e.sent_basis.name, e.sent_symbol, e.recv_basis.name, e.outcome.name.lower(),
                            det, int(b.keep[i]), int(sampled[i])])

    def write_summary(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value"])
            for k, v in self.summary().items():
                w.writerow([k, v])


def make_transports(link: str) -> tuple[Transport, Transport]:
    if link == "inproc":
        return InProcTransport.pair()
    if link.startswith("tcp"):
        host, port = "127.0.0.1", 0
        if ":" in link:
            _, rest = link.split(":", 1)
            host, _, p = rest.rpartition(":")
            host, port = host or "127.0.0.1", int(p or 0)
        return tcp_pair(host, port)
    raise ValueError(f"unknown transport {link!r}; use 'inproc' or 'tcp[:host:port]'")


def run_session(params: SessionParams, channel: ChannelModel, link: str = "inproc") -> SessionResult:
    """Run both endpoints concurrently; raises SessionAborted (with ``.result``) on abort."""
    if channel.d != params.d:
        raise ValueError(f"channel dimension {channel.d} != session dimension {params.d}")
    qlink = QuantumLink(channel, np.random.default_rng(params.seeds.channel))
    t_alice, t_bob = make_transports(link)
    results: dict = {}

    def _run(name, fn, transport):
        try:
            results[name] = fn(params, transport, qlink)
        except BaseException as exc:  # noqa: BLE001 - re-raised below
            results[name + "_error"] = exc
            results[name] = getattr(exc, "partial", None)
            transport.close()

    threads = [threading.Thread(target=_run, args=("alice", run_alice, t_alice), daemon=True),
               threading.Thread(target=_run, args=("bob", run_bob, t_bob), daemon=True)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    t_alice.close()
    t_bob.close()

    errors = [results.get("alice_error"), results.get("bob_error")]
    for err in errors:
        if err is not None and not isinstance(err, SessionAborted):
            raise err
    aborted = next((e for e in errors if e is not None), None)
    result = SessionResult(params, results.get("alice"), results.get("bob"), qlink.events,
                           list(t_alice.transcript), aborted)
    if aborted is not None:
        aborted.result = result
        raise aborted
    return result


def run_postprocess_pair(alice_bits, bob_bits, link: str, passes: int, bit_qber: float | None,
                         length_rule: LengthRule, seeds: Seeds = Seeds(),
                         initial_block_size: int | None = None) -> tuple[EndpointResult, EndpointResult, list]:
    """Reconcile and amplify externally supplied keys over a real transport."""
    t_alice, t_bob = make_transports(link)
    results: dict = {}

    def _alice():
        try:
            results["alice"] = alice_postprocess(alice_bits, t_alice, passes, length_rule,
                                                 seeds.shuffle, seeds.cascade, seeds.pa)
        except BaseException as exc:  # noqa: BLE001
            if isinstance(exc, SessionAborted):
                _send_abort(t_alice, exc)
            results["alice_error"] = exc
            t_alice.close()

    def _bob():
        try:
            results["bob"] = bob_postprocess(bob_bits, t_bob, passes, bit_qber, initial_block_size)
        except BaseException as exc:  # noqa: BLE001
            if isinstance(exc, SessionAborted):
                _send_abort(t_bob, exc)
            results["bob_error"] = exc
            t_bob.close()

    threads = [threading.Thread(target=_alice, daemon=True), threading.Thread(target=_bob, daemon=True)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    t_alice.close()
    t_bob.close()
    for key in ("alice_error", "bob_error"):
        if key in results:
            raise results[key]
    return results["alice"], results["bob"], list(t_alice.transcript)


def transcript_digest(entries) -> str:
    h = hashlib.sha256()
    for e in entries:
        h.update(e.direction.encode() + e.message.encode())
    return h.hexdigest()
