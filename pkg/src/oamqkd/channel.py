"""Weak-coherent-pulse source, link budget, detectors and crosstalk.

The Monte-Carlo model per pulse: a Poisson photon number, each photon
surviving the link and detector with probability ``T_link * eta``, sorted
into a detector by the crosstalk row (same basis) or uniformly (other
basis).  Background clicks are added per detector with a probability
calibrated so that, among clicks, the fraction of background-induced
errors equals the configured ``epsilon``.  After-pulsing re-fires the
detector(s) of the previous clicking pulse.
"""
from __future__ import annotations

import csv
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import gammainc

from .hilbert import Basis

log = logging.getLogger(__name__)

ROW_TOL = 1e-9


@dataclass(frozen=True)
class LinkBudget:
    component_efficiencies: tuple[tuple[str, float], ...]

    def __post_init__(self):
        comps = tuple((str(label), float(eff)) for label, eff in self.component_efficiencies)
        if not comps:
            raise ValueError("link budget needs at least one component")
        for label, eff in comps:
            if not 0 < eff <= 1:
                raise ValueError(f"efficiency of {label!r} must lie in (0, 1], got {eff}")
        object.__setattr__(self, "component_efficiencies", comps)

    @classmethod
    def experiment(cls) -> "LinkBudget":
        return cls((("sorter", 0.85), ("slm_fanout", 0.45), ("slm_phase", 0.45), ("fiber_coupling", 0.18)))


@dataclass(frozen=True)
class DetectorModel:
    quantum_efficiency: float = 0.65
    dark_rate: float = 50.0
    gate_width: float = 125e-9
    after_pulse_prob: float = 0.003
    num_detectors: int = 7
    effective_epsilon: float = 0.04

    def __post_init__(self):
        if not 0 < self.quantum_efficiency <= 1:
            raise ValueError(f"quantum efficiency must lie in (0, 1], got {self.quantum_efficiency}")
        if not 0 <= self.effective_epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.effective_epsilon}")
        if not 0 <= self.after_pulse_prob < 1:
            raise ValueError(f"after-pulse probability must lie in [0, 1), got {self.after_pulse_prob}")
        if self.dark_rate < 0 or self.gate_width < 0:
            raise ValueError("dark rate and gate width must be non-negative")
        if self.num_detectors < 1:
            raise ValueError("need at least one detector")

    @property
    def dark_click_prob(self) -> float:
        """Thermal dark-click probability per gate, summed over detectors."""
        return self.dark_rate * self.gate_width * self.num_detectors


@dataclass(frozen=True)
class PulseConfig:
    mu: float = 0.1
    f_rep: float = 4000.0
    pulse_width: float = 125e-9

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.f_rep <= 0:
            raise ValueError(f"f_rep must be positive, got {self.f_rep}")


@dataclass(frozen=True)
class CrosstalkMatrix:
    """Row-stochastic ``P(detect j | sent i)`` for one basis."""

    matrix: np.ndarray = field(repr=False)
    basis: Basis = Basis.OAM

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"crosstalk matrix must be square, got shape {m.shape}")
        if np.any(m < -ROW_TOL) or np.any(m > 1 + ROW_TOL):
            raise ValueError("crosstalk entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1) > ROW_TOL):
            raise ValueError("crosstalk rows must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis", Basis.parse(self.basis))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def symbol_error(self) -> float:
        """Mean off-diagonal mass under uniform priors."""
        return float(1 - np.trace(self.matrix) / self.d)


class Outcome(IntEnum):
    NO_CLICK = 0
    CLICK = 1
    MULTI_CLICK = 2


@dataclass(frozen=True)
class DetectionEvent:
    pulse_index: int
    outcome: Outcome
    detectors: tuple[int, ...]
    recv_basis: Basis
    sent_symbol: int
    sent_basis: Basis

    @property
    def detector(self) -> int | None:
        return self.detectors[0] if self.outcome is Outcome.CLICK else None


@dataclass(frozen=True)
class ChannelModel:
    pulse: PulseConfig
    link: LinkBudget
    detector: DetectorModel
    crosstalk: dict
    d: int = 7

    def __post_init__(self):
        xt = self.crosstalk
        if isinstance(xt, CrosstalkMatrix):
            xt = {Basis.OAM: xt, Basis.ANG: CrosstalkMatrix(xt.matrix, Basis.ANG)}
        xt = {Basis.parse(k): v for k, v in dict(xt).items()}
        for b in Basis:
            if b not in xt:
                raise ValueError(f"missing crosstalk matrix for basis {b.name}")
            if xt[b].d != self.d:
                raise ValueError(f"crosstalk for {b.name} has dimension {xt[b].d}, expected {self.d}")
        object.__setattr__(self, "crosstalk", xt)

    @property
    def survival(self) -> float:
        return t_link(self.link) * self.detector.quantum_efficiency

    @property
    def signal_click_prob(self) -> float:
        return 1 - math.exp(-self.pulse.mu * self.survival)

    def background_click_prob(self) -> float:
        """Total per-gate background click probability over all detectors.

        Chosen so the expected fraction of clicks that are background errors
        (including after-pulses) equals ``detector.effective_epsilon``.  Never
        below the physical dark-count floor.
        """
        det = self.detector
        s = self.signal_click_prob
        delta = float(np.mean([xt.symbol_error for xt in self.crosstalk.values()]))
        wrong = (self.d - 1) / self.d
        a = det.after_pulse_prob
        denom = wrong - delta - det.effective_epsilon
        if denom <= 0:
            raise ValueError("delta + epsilon too large to calibrate background clicks")
        target = s * (det.effective_epsilon + a * (delta - wrong)) / denom
        floor = det.dark_click_prob
        if target < floor:
            log.warning("dark counts alone (%.3g/gate) exceed the epsilon calibration (%.3g/gate)",
                        floor, target)
        return max(target, floor)


# -- closed forms ----------------------------------------------------------------


def t_link(budget: LinkBudget) -> float:
    return float(math.prod(eff for _, eff in budget.component_efficiencies))


def p_multi(mu: float) -> float:
    """Probability that a Poisson pulse of mean ``mu`` carries two or more photons."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    # P(n >= 2) = regularised lower incomplete gamma P(2, mu); no cancellation at small mu
    return float(gammainc(2, mu))


def sample_photon_number(mu: float, rng: np.random.Generator, size=None):
    return rng.poisson(mu, size=size)


def synthetic_crosstalk_matrix(d: int, delta: float, model: str = "uniform",
                               decay: float = 0.5, basis=Basis.OAM) -> CrosstalkMatrix:
    """Crosstalk with diagonal ``1 - delta`` and error mass spread per ``model``.

    ``uniform`` spreads ``delta`` evenly; ``neighbor`` weights the off-diagonal
    entry at distance ``k`` (cyclically) by ``decay ** (k - 1)``.
    """
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if d < 2:
        raise ValueError("crosstalk needs d >= 2")
    if model == "uniform":
        off = np.full((d, d), delta / (d - 1))
    elif model == "neighbor":
        if not 0 < decay <= 1:
            raise ValueError(f"decay must lie in (0, 1], got {decay}")
        i, j = np.indices((d, d))
        dist = np.minimum((i - j) % d, (j - i) % d)
        off = np.where(dist > 0, decay ** (dist - 1.0), 0.0)
        off = delta * off / off.sum(axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown crosstalk model {model!r}")
    m = off.copy()
    np.fill_diagonal(m, 1 - delta)
    return CrosstalkMatrix(m, basis)


def default_channel(d: int = 7, delta: float = 0.065, epsilon: float = 0.04, mu: float = 0.1,
                  model: str = "uniform") -> ChannelModel:
    xt = {b: synthetic_crosstalk_matrix(d, delta, model, basis=b) for b in Basis}
    return ChannelModel(PulseConfig(mu=mu), LinkBudget.experiment(),
                        DetectorModel(num_detectors=d, effective_epsilon=epsilon), xt, d)


# -- Monte-Carlo -------------------------------------------------------------------


def _fire(sent_symbol: int, sent_basis: Basis, recv_basis: Basis, model: ChannelModel,
          rng: np.random.Generator, bg_per_detector: float) -> set[int]:
    d = model.d
    n = rng.poisson(model.pulse.mu)
    k = rng.binomial(n, model.survival) if n else 0
    fired: set[int] = set()
    if k:
        if sent_basis == recv_basis:
            row = model.crosstalk[recv_basis].matrix[sent_symbol]
            fired.update(rng.choice(d, size=k, p=row).tolist())
        else:
            fired.update(rng.integers(0, d, size=k).tolist())
    bg = rng.random(d) < bg_per_detector
    fired.update(np.flatnonzero(bg).tolist())
    return fired


def _event(index, fired, recv_basis, sent_symbol, sent_basis) -> DetectionEvent:
    if not fired:
        outcome = Outcome.NO_CLICK
    elif len(fired) == 1:
        outcome = Outcome.CLICK
    else:
        outcome = Outcome.MULTI_CLICK
    return DetectionEvent(index, outcome, tuple(sorted(fired)), Basis.parse(recv_basis),
                          int(sent_symbol), Basis.parse(sent_basis))


def simulate_pulse(sent: tuple[int, Basis], receiver_basis, model: ChannelModel,
                   rng: np.random.Generator, pulse_index: int = 0,
                   previous: DetectionEvent | None = None) -> DetectionEvent:
    """Simulate one pulse.  Pass the previous event to model after-pulsing."""
    symbol, basis = int(sent[0]), Basis.parse(sent[1])
    receiver_basis = Basis.parse(receiver_basis)
    bg = _per_detector(model.background_click_prob(), model.d)
    fired = _fire(symbol, basis, receiver_basis, model, rng, bg)
    if previous is not None and previous.detectors:
        for j in previous.detectors:
            if rng.random() < model.detector.after_pulse_prob:
                fired.add(j)
    return _event(pulse_index, fired, receiver_basis, symbol, basis)


def _per_detector(total: float, d: int) -> float:
    # total = 1 - (1 - q)^d
    return -math.expm1(math.log1p(-min(total, 1 - 1e-15)) / d)


@dataclass
class EventLog:
    """Column-oriented record of a pulse stream.

    ``detector`` is -1 for no-click and multi-click pulses; the detector sets
    of multi-click pulses are kept in ``multi``.
    """

    sent_symbol: np.ndarray
    sent_basis: np.ndarray
    recv_basis: np.ndarray
    outcome: np.ndarray
    detector: np.ndarray
    multi: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.outcome)

    def __iter__(self) -> Iterator[DetectionEvent]:
        for i in range(len(self)):
            yield self.event(i)

    def event(self, i: int) -> DetectionEvent:
        oc = Outcome(int(self.outcome[i]))
        if oc is Outcome.CLICK:
            dets = (int(self.detector[i]),)
        else:
            dets = self.multi.get(i, ())
        return DetectionEvent(i, oc, dets, Basis(int(self.recv_basis[i])),
                              int(self.sent_symbol[i]), Basis(int(self.sent_basis[i])))

    @classmethod
    def from_events(cls, events: Iterable[DetectionEvent]) -> "EventLog":
        events = list(events)
        log_ = cls(
            sent_symbol=np.array([e.sent_symbol for e in events], dtype=np.int64),
            sent_basis=np.array([int(e.sent_basis) for e in events], dtype=np.int8),
            recv_basis=np.array([int(e.recv_basis) for e in events], dtype=np.int8),
            outcome=np.array([int(e.outcome) for e in events], dtype=np.int8),
            detector=np.array([e.detector if e.detector is not None else -1 for e in events],
                              dtype=np.int64),
        )
        log_.multi = {i: e.detectors for i, e in enumerate(events) if e.outcome is Outcome.MULTI_CLICK}
        return log_

    @property
    def single_click(self) -> np.ndarray:
        return self.outcome == Outcome.CLICK

    @property
    def matched(self) -> np.ndarray:
        return self.sent_basis == self.recv_basis

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pulse_index", "sent_basis", "sent_symbol", "recv_basis", "outcome", "detector"])
            for i in range(len(self)):
                oc = Outcome(int(self.outcome[i]))
                if oc is Outcome.CLICK:
                    det = str(int(self.detector[i]))
                elif oc is Outcome.MULTI_CLICK:
                    det = "|".join(str(j) for j in self.multi.get(i, ()))
                else:
                    det = ""
                w.writerow([i, Basis(int(self.sent_basis[i])).name, int(self.sent_symbol[i]),
                            Basis(int(self.recv_basis[i])).name, oc.name.lower(), det])

    @classmethod
    def read_csv(cls, path) -> "EventLog":
        events = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                oc = Outcome[row["outcome"].upper()]
                dets = tuple(int(x) for x in row["detector"].split("|")) if row["detector"] else ()
                events.append(DetectionEvent(int(row["pulse_index"]), oc, dets,
                                             Basis.parse(row["recv_basis"]), int(row["sent_symbol"]),
                                             Basis.parse(row["sent_basis"])))
        events.sort(key=lambda e: e.pulse_index)
        if any(e.pulse_index != i for i, e in enumerate(events)):
            raise ValueError(f"{path}: pulse indices are not contiguous from 0")
        return cls.from_events(events)


def simulate_pulses(sent_symbols: Sequence[int], sent_bases: Sequence[int], recv_bases: Sequence[int],
                    model: ChannelModel, rng: np.random.Generator) -> EventLog:
    """Vectorised equivalent of calling :func:`simulate_pulse` on a stream.

    Draws are organised differently from the per-pulse path, so the two give
    different (but individually reproducible) streams for the same seed.
    """
    sent_symbols = np.asarray(sent_symbols, dtype=np.int64)
    sent_bases = np.asarray(sent_bases, dtype=np.int8)
    recv_bases = np.asarray(recv_bases, dtype=np.int8)
    n_pulses = len(sent_symbols)
    if not len(sent_bases) == len(recv_bases) == n_pulses:
        raise ValueError("symbol and basis streams must have equal length")
    d = model.d

    photons = rng.poisson(model.pulse.mu, n_pulses)
    survivors = rng.binomial(photons, model.survival)
    q = _per_detector(model.background_click_prob(), d)
    n_bg = rng.binomial(d, q, n_pulses)

    fired: dict[int, set[int]] = {}
    signal_idx = np.flatnonzero(survivors)
    if signal_idx.size:
        counts = survivors[signal_idx]
        owner = np.repeat(signal_idx, counts)
        u = rng.random(owner.size)
        det = np.empty(owner.size, dtype=np.int64)
        same = sent_bases[owner] == recv_bases[owner]
        # inverse-CDF draw from the crosstalk row of each photon
        for b in Basis:
            sel = same & (recv_bases[owner] == b)
            if np.any(sel):
                cdf = np.cumsum(model.crosstalk[b].matrix, axis=1)
                rows = cdf[sent_symbols[owner[sel]]]
                det[sel] = np.minimum((u[sel, None] >= rows).sum(axis=1), d - 1)
        det[~same] = np.minimum((u[~same] * d).astype(np.int64), d - 1)
        for p, j in zip(owner.tolist(), det.tolist()):
            fired.setdefault(p, set()).add(j)
    for p in np.flatnonzero(n_bg).tolist():
        picks = rng.choice(d, size=int(n_bg[p]), replace=False)
        fired.setdefault(p, set()).update(picks.tolist())

    a = model.detector.after_pulse_prob
    if a > 0 and fired:
        # in pulse order, since an after-pulse can itself be followed by one
        pending = sorted(fired)
        heapq.heapify(pending)
        seen = set(pending)
        while pending:
            p = heapq.heappop(pending)
            if p + 1 >= n_pulses:
                continue
            extra = {j for j in sorted(fired[p]) if rng.random() < a}
            if extra:
                fired.setdefault(p + 1, set()).update(extra)
                if p + 1 not in seen:
                    seen.add(p + 1)
                    heapq.heappush(pending, p + 1)

    outcome = np.zeros(n_pulses, dtype=np.int8)
    detector = np.full(n_pulses, -1, dtype=np.int64)
    multi: dict[int, tuple[int, ...]] = {}
    for p, dets in fired.items():
        if len(dets) == 1:
            outcome[p] = Outcome.CLICK
            detector[p] = next(iter(dets))
        else:
            outcome[p] = Outcome.MULTI_CLICK
            multi[p] = tuple(sorted(dets))
    return EventLog(sent_symbols, sent_bases, recv_bases, outcome, detector, multi)


class EmptyRowError(ValueError):
    pass


def estimate_matrix(events, bases=tuple(Basis), d: int | None = None) -> dict[Basis, CrosstalkMatrix]:
    """Empirical crosstalk per basis from matched-basis single-click events."""
    log_ = events if isinstance(events, EventLog) else EventLog.from_events(events)
    if d is None:
        d = int(max(log_.sent_symbol.max(initial=0), log_.detector.max(initial=0))) + 1
    use = log_.single_click & log_.matched
    out = {}
    for b in bases:
        b = Basis.parse(b)
        sel = use & (log_.recv_basis == b)
        counts = np.zeros((d, d))
        np.add.at(counts, (log_.sent_symbol[sel], log_.detector[sel]), 1)
        totals = counts.sum(axis=1)
        empty = np.flatnonzero(totals == 0)
        if empty.size:
            raise EmptyRowError(f"no single-click {b.name} events for sent symbol(s) {empty.tolist()}")
        out[b] = CrosstalkMatrix(counts / totals[:, None], b)
    return out
