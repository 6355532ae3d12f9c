"""Closed-form security analytics for d-level prepare-and-measure QKD.

Mutual information, the optimal cloner's fidelity and information gain,
asymptotic key rates, the photon-number-splitting condition and the QBER
bounds plotted against dimension.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .channel import DetectorModel, LinkBudget, PulseConfig, p_multi, t_link


def _xlog2(x: float) -> float:
    return 0.0 if x == 0 else x * math.log2(x)


def _check_fraction(d: int, F: float, lower: float = 0.0) -> None:
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if not lower - 1e-15 <= F <= 1 or F <= 0:
        raise ValueError(f"fidelity {F} outside ({lower}, 1]")


@dataclass(frozen=True)
class ErrorBudget:
    delta: float = 0.065
    epsilon: float = 0.04

    def __post_init__(self):
        if self.delta < 0 or self.epsilon < 0:
            raise ValueError("error rates must be non-negative")
        if not 0 < self.fidelity <= 1:
            raise ValueError(f"delta + epsilon = {self.delta + self.epsilon} leaves no correct detections")

    @property
    def fidelity(self) -> float:
        return 1 - self.delta - self.epsilon

    @property
    def qber(self) -> float:
        return self.delta + self.epsilon


def mutual_info_general(joint) -> float:
    """I(X;Y) in bits from a joint table indexed [sent, detected]."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ValueError("joint table must be two-dimensional")
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("joint table must be non-negative and sum to 1")
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    mask = p > 0
    ratio = p[mask] / (px @ py)[mask]
    return float(np.sum(p[mask] * np.log2(ratio)))


def uniform_error_joint(d: int, F: float) -> np.ndarray:
    """Joint table for uniform priors and errors spread evenly off the diagonal."""
    cond = np.full((d, d), (1 - F) / (d - 1))
    np.fill_diagonal(cond, F)
    return cond / d


def mutual_info_uniform(d: int, F: float) -> float:
    _check_fraction(d, F)
    return math.log2(d) + _xlog2(F) + (1 - F) * (math.log2((1 - F) / (d - 1)) if F < 1 else 0.0)


def eve_fidelity(d: int, F: float) -> float:
    """Fidelity of the optimal cloner for a receiver fidelity ``F``."""
    _check_fraction(d, F, 1 / d)
    return F / d + (d - 1) * (1 - F) / d + (2 / d) * math.sqrt(max((d - 1) * F * (1 - F), 0.0))


def eve_info(d: int, F: float) -> float:
    """Eve's information per symbol under the optimal cloning attack.

    Same functional form as :func:`mutual_info_uniform`, evaluated at Eve's
    fidelity for both the diagonal and off-diagonal terms.
    """
    fe = min(eve_fidelity(d, F), 1.0)
    return mutual_info_uniform(d, fe)


def sifted_rate(f_rep: float, mu: float, T_link: float, eta: float) -> float:
    return 0.5 * f_rep * mu * T_link * eta


def net_rate(R_sift: float, I_AB: float, I_AE: float) -> float:
    if R_sift < 0:
        raise ValueError("sifted rate must be non-negative")
    return R_sift * max(I_AB - I_AE, 0.0)


def detected_rate(f_rep: float, mu: float, T_link: float, eta: float) -> float:
    """Detected photons per second before sifting."""
    return f_rep * mu * T_link * eta


@dataclass(frozen=True)
class PnsVerdict:
    p_multi: float
    p_signal: float
    p_dark: float
    p_detection: float
    secure: bool


def pns_check(mu: float, T_link: float, eta: float, p_dark: float) -> PnsVerdict:
    """Necessary condition against photon-number splitting: detection beats the multi-photon tail."""
    for name, v in (("T_link", T_link), ("eta", eta), ("p_dark", p_dark)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name} must be a probability, got {v}")
    pm = p_multi(mu)
    p_signal = mu * T_link * eta
    p_det = p_signal + p_dark
    return PnsVerdict(pm, p_signal, p_dark, p_det, p_det > pm)


def _bisect(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    flo = fn(lo)
    if flo * fn(hi) > 0:
        raise ValueError("no sign change on bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossover_fidelity(d: int, tol: float = 1e-10) -> float:
    """Receiver fidelity at which Bob's and Eve's information are equal."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    gap = lambda F: mutual_info_uniform(d, F) - eve_info(d, F)
    return _bisect(gap, 1 / d + 1e-12, 1.0, tol)


def coherent_bound(d: int) -> float:
    """Largest tolerable QBER against the cloning attack (the I_AB = I_AE crossover)."""
    return 1 - crossover_fidelity(d)


def intercept_resend_bound(d: int, M: int = 2) -> float:
    """QBER induced by full intercept-resend in a random one of ``M`` bases."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if M != 2:
        raise ValueError(f"only M = 2 bases are supported, got {M}")
    return (M - 1) / M * (d - 1) / d


def bounds_table(d_values) -> list[dict]:
    return [{"d": int(d), "bound_ir": intercept_resend_bound(int(d), 2), "bound_coherent": coherent_bound(int(d))}
            for d in d_values]


@dataclass(frozen=True)
class SecurityReport:
    d: int
    F: float
    qber: float
    T_link: float
    I_AB: float
    F_E: float
    I_AE: float
    secure_bits_per_photon: float
    R_sift: float
    R_net: float
    R_detected: float
    p_multi: float
    p_signal: float
    p_dark: float
    p_detection: float
    pns_secure: bool
    bound_ir: float
    bound_coherent: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SecurityReport":
        kw = {}
        for f in fields(cls):
            v = data[f.name]
            if f.type in ("int", int):
                v = int(v)
            elif f.type in ("bool", bool):
                v = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
            else:
                v = float(v)
            kw[f.name] = v
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in self.to_dict().items():
            w.writerow([k, repr(v) if isinstance(v, float) else v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SecurityReport":
        rows = list(csv.reader(io.StringIO(text)))
        return cls.from_dict({k: v for k, v in rows[1:]})


def build_report(d: int, errors: ErrorBudget, pulse: PulseConfig, link: LinkBudget,
                 detector: DetectorModel) -> SecurityReport:
    F = errors.fidelity
    T = t_link(link)
    eta = detector.quantum_efficiency
    i_ab = mutual_info_uniform(d, F)
    if F >= 1 / d:
        f_e = eve_fidelity(d, F)
        i_ae = eve_info(d, F)
    else:
        f_e, i_ae = 1.0, math.log2(d)
    r_sift = sifted_rate(pulse.f_rep, pulse.mu, T, eta)
    pns = pns_check(pulse.mu, T, eta, detector.dark_click_prob)
    return SecurityReport(
        d=d, F=F, qber=1 - F, T_link=T, I_AB=i_ab, F_E=f_e, I_AE=i_ae,
        secure_bits_per_photon=max(i_ab - i_ae, 0.0),
        R_sift=r_sift, R_net=net_rate(r_sift, i_ab, i_ae),
        R_detected=detected_rate(pulse.f_rep, pulse.mu, T, eta),
        p_multi=pns.p_multi, p_signal=pns.p_signal, p_dark=pns.p_dark,
        p_detection=pns.p_detection, pns_secure=pns.secure,
        bound_ir=intercept_resend_bound(d, 2), bound_coherent=coherent_bound(d),
    )
