"""Command-line front end.

Stages compose through files::

    oamqkd simulate --out events.csv
    oamqkd sift --events events.csv --out sifted.csv
    oamqkd reconcile --sifted sifted.csv --out reconciled.csv
    oamqkd amplify --reconciled reconciled.csv --alice-key a.bin --bob-key b.bin
    oamqkd run --link tcp --summary summary.csv

Exit codes: 0 success, 1 validation error, 2 session abort, 3 internal error.
Log verbosity comes from ``-v`` or the ``OAMQKD_LOG_LEVEL`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import hilbert, privacy, security
from .channel import EmptyRowError, EventLog, estimate_matrix, simulate_pulses
from .config import ConfigError, RunConfig
from .hilbert import Basis
from .protocol.keys import KeyReuseWarning, otp_encrypt, shared_shuffle, symbols_to_bits
from .protocol.session import (PulseRecords, SessionAborted, alice_emit_batch, run_session, sample_positions,
                               secure_length_rule, sift)
from .reconcile import binary_entropy, cascade

log = logging.getLogger("oamqkd")

EXIT_OK, EXIT_INVALID, EXIT_ABORT, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(ValueError):
    pass


# -- small file helpers --------------------------------------------------------------


def _write_kv(path, rows: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value"])
        for k, v in rows.items():
            w.writerow([k, v])


def _read_meta_csv(path) -> tuple[dict, list[dict]]:
    """CSV with leading ``# key=value`` lines."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            else:
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def _print_kv(rows: dict) -> None:
    width = max(len(k) for k in rows)
    for k, v in rows.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k:<{width}}  {v}")


# -- commands -------------------------------------------------------------------------


def cmd_mub_check(args, cfg: RunConfig) -> int:
    d = args.d if args.d is not None else cfg.d
    try:
        dim = hilbert.Dimension(d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dev = hilbert.verify_mub(dim)
    gram = hilbert.basis_matrix(Basis.ANG, dim)
    unitary = float(np.max(np.abs(gram @ gram.conj().T - np.eye(d))))
    ok = dev <= 1e-9 and unitary <= 1e-9
    print(f"d={d} max |<ANG|OAM>|^2 - 1/d| = {dev:.3e}  unitarity error = {unitary:.3e}  "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_INVALID


def _simulate(cfg: RunConfig, pulses: int) -> EventLog:
    s = cfg.seeds
    symbols, bases = alice_emit_batch(pulses, cfg.d, np.random.default_rng(s.source),
                                      np.random.default_rng(s.alice_basis))
    recv = np.random.default_rng(s.bob_basis).integers(0, 2, pulses).astype(np.int8)
    return simulate_pulses(symbols, bases, recv, cfg.channel_model(), np.random.default_rng(s.channel))


def cmd_simulate(args, cfg: RunConfig) -> int:
    pulses = args.pulses or cfg.pulses
    events = _simulate(cfg, pulses)
    events.write_csv(args.out)
    single = events.single_click
    matched = single & events.matched
    err = float(np.mean(events.detector[matched] != events.sent_symbol[matched])) if matched.any() else float("nan")
    _print_kv({"pulses": pulses, "single_clicks": int(single.sum()), "multi_clicks": len(events.multi),
               "sifted": int(matched.sum()), "sift_yield": matched.sum() / pulses,
               "symbol_error": err, "events_csv": args.out})
    return EXIT_OK


def cmd_sift(args, cfg: RunConfig) -> int:
    events = EventLog.read_csv(args.events)
    idx = np.arange(len(events))
    alice = PulseRecords(idx, events.sent_symbol, events.sent_basis)
    bob = PulseRecords(idx, events.detector, events.recv_basis, events.outcome)
    ka, kb = sift(alice, bob)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pulse_index", "basis", "alice_symbol", "bob_symbol"])
        for p, b, sa, sb in zip(ka.pulse_index, ka.basis_record, ka.symbols, kb.symbols):
            w.writerow([int(p), Basis(int(b)).name, int(sa), int(sb)])
    errors = int(np.count_nonzero(ka.symbols != kb.symbols))
    _print_kv({"sifted_symbols": len(ka), "symbol_errors": errors,
               "qber": errors / len(ka) if len(ka) else 0.0, "sifted_csv": args.out})
    return EXIT_OK


def cmd_reconcile(args, cfg: RunConfig) -> int:
    with open(args.sifted, newline="") as fh:
        rows = list(csv.DictReader(fh))
    a = np.array([int(r["alice_symbol"]) for r in rows], dtype=np.int64)
    b = np.array([int(r["bob_symbol"]) for r in rows], dtype=np.int64)
    sample = sample_positions(len(a), cfg.sample_fraction, cfg.seeds.sample)
    if len(sample) == 0 or len(a) - len(sample) < 1:
        raise UsageError(f"only {len(a)} sifted symbols; too few to sample and reconcile")
    qber = float(np.mean(a[sample] != b[sample]))
    a_bits_s, b_bits_s = symbols_to_bits(a[sample], cfg.d), symbols_to_bits(b[sample], cfg.d)
    bit_qber = float(np.mean(a_bits_s != b_bits_s))
    if qber > cfg.session_params().threshold:
        print(f"sample QBER {qber:.4f} above abort threshold {cfg.session_params().threshold:.4f}", file=sys.stderr)
        return EXIT_ABORT
    a, b = np.delete(a, sample), np.delete(b, sample)
    ab = shared_shuffle(symbols_to_bits(a, cfg.d), cfg.seeds.shuffle)
    bb = shared_shuffle(symbols_to_bits(b, cfg.d), cfg.seeds.shuffle)
    res = cascade(ab, bb, cfg.cascade_config(), qber=max(bit_qber, 1.0 / max(len(a_bits_s), 1)))
    meta = {"d": cfg.d, "key_symbols": len(a), "qber_sample": qber, "bit_qber_sample": bit_qber,
            "leaked_bits": res.leaked_bits, "parity_exchanges": res.parity_exchanges,
            "corrections": res.corrections, "residual_errors": res.residual_errors}
    with open(args.out, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(["position", "alice_bit", "bob_bit"])
        for i, (x, y) in enumerate(zip(ab, res.corrected)):
            w.writerow([i, int(x), int(y)])
    meta["leakage_over_shannon"] = res.leaked_bits / max(len(ab) * binary_entropy(bit_qber), 1e-12)
    meta["reconciled_csv"] = args.out
    _print_kv(meta)
    if res.residual_errors:
        print(f"cascade left {res.residual_errors} residual errors", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_amplify(args, cfg: RunConfig) -> int:
    meta, rows = _read_meta_csv(args.reconciled)
    a = np.array([int(r["alice_bit"]) for r in rows], dtype=np.uint8)
    b = np.array([int(r["bob_bit"]) for r in rows], dtype=np.uint8)
    d = int(meta.get("d", cfg.d))
    params = replace(cfg.session_params(), d=d)
    rule = secure_length_rule(params, int(meta["key_symbols"]), float(meta["qber_sample"]))
    n_out = rule(int(meta["leaked_bits"]))
    seed = privacy.ToeplitzSeed.random(len(a), n_out, np.random.default_rng(cfg.seeds.pa))
    ka, kb = privacy.toeplitz_hash(a, seed), privacy.toeplitz_hash(b, seed)
    Path(args.alice_key).write_bytes(privacy.key_bytes(ka))
    Path(args.bob_key).write_bytes(privacy.key_bytes(kb))
    da, db = privacy.key_digest(ka), privacy.key_digest(kb)
    _print_kv({"input_bits": len(a), "final_bits": n_out, "alice_sha256": da, "bob_sha256": db,
               "match": da == db})
    return EXIT_OK if da == db else EXIT_ABORT


def cmd_analyze(args, cfg: RunConfig) -> int:
    report = security.build_report(cfg.d, cfg.error_budget(), cfg.pulse_config(), cfg.link_budget(),
                                   cfg.detector_model())
    rows = report.to_dict()
    if args.events:
        events = EventLog.read_csv(args.events)
        try:
            mats = estimate_matrix(events, d=cfg.d)
        except EmptyRowError as exc:
            raise UsageError(str(exc)) from None
        for b, m in mats.items():
            joint = m.matrix / cfg.d
            rows[f"I_AB_estimated_{b.name}"] = security.mutual_info_general(joint)
            rows[f"symbol_error_estimated_{b.name}"] = m.symbol_error
        if args.matrix_out:
            with open(args.matrix_out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["basis", "sent", "detected", "probability"])
                for b, m in mats.items():
                    for i in range(cfg.d):
                        for j in range(cfg.d):
                            w.writerow([b.name, i, j, repr(float(m.matrix[i, j]))])
        if args.figure:
            from .plotting import plot_crosstalk
            plot_crosstalk({b: m.matrix for b, m in mats.items()}, args.figure)
    if args.out:
        _write_kv(args.out, rows)
    _print_kv(rows)
    return EXIT_OK


def cmd_bounds(args, cfg: RunConfig) -> int:
    if args.d_max < 2:
        raise UsageError("--d-max must be at least 2")
    table = security.bounds_table(range(2, args.d_max + 1))
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["d", "bound_ir", "bound_coherent"], lineterminator="\n")
        w.writeheader()
        for row in table:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    if args.figure:
        from .plotting import plot_bounds
        plot_bounds(table, args.figure, qber=cfg.error_budget().qber)
    print(f"wrote {len(table)} rows to {args.out}")
    return EXIT_OK


def cmd_run(args, cfg: RunConfig) -> int:
    link = args.link or cfg.transport
    try:
        result = run_session(cfg.session_params(), cfg.channel_model(), link)
    except SessionAborted as exc:
        print(str(exc), file=sys.stderr)
        if exc.result is not None and args.summary:
            exc.result.write_summary(args.summary)
        return EXIT_ABORT
    if args.transcript:
        result.write_transcript(args.transcript)
    if args.summary:
        result.write_summary(args.summary)
    if args.key_out:
        Path(args.key_out).write_bytes(privacy.key_bytes(result.alice_key))
    report = security.build_report(cfg.d, cfg.error_budget(), cfg.pulse_config(), cfg.link_budget(),
                                   cfg.detector_model())
    rows = dict(result.summary())
    rows.update({f"model_{k}": v for k, v in report.to_dict().items()})
    if args.report:
        _write_kv(args.report, rows)
    _print_kv(rows)
    return EXIT_OK if result.keys_match else EXIT_ABORT


def cmd_otp(args, cfg: RunConfig) -> int:
    src = args.encrypt or args.decrypt
    data = Path(src).read_bytes()
    key = np.unpackbits(np.frombuffer(Path(args.key).read_bytes(), dtype=np.uint8))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", KeyReuseWarning)
        out = otp_encrypt(data, key)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    Path(args.out).write_bytes(out)
    print(f"{'encrypted' if args.encrypt else 'decrypted'} {len(data)} bytes -> {args.out}")
    return EXIT_OK


def cmd_annulus_check(args, cfg: RunConfig) -> int:
    d = args.d if args.d is not None else cfg.d
    dev = hilbert.annulus_identity_deviation(d, args.instances, args.seed)
    ok = dev < 1e-9
    print(f"d={d} instances={args.instances} max |P_ANG - P_OAM| = {dev:.3e}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_dump_config(args, cfg: RunConfig) -> int:
    text = cfg.to_ini()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oamqkd", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration value (repeatable)")
    p.add_argument("--entropy", action="store_true", help="replace every configured seed with fresh randomness")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mub-check", help="verify OAM/ANG mutual unbiasedness")
    s.add_argument("--d", type=int)
    s.set_defaults(func=cmd_mub_check)

    s = sub.add_parser("simulate", help="Monte-Carlo pulse stream to an events CSV")
    s.add_argument("--pulses", type=int)
    s.add_argument("--out", default="events.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sift", help="basis reconciliation of an events CSV")
    s.add_argument("--events", required=True)
    s.add_argument("--out", default="sifted.csv")
    s.set_defaults(func=cmd_sift)

    s = sub.add_parser("reconcile", help="sample QBER and run Cascade on a sifted CSV")
    s.add_argument("--sifted", required=True)
    s.add_argument("--out", default="reconciled.csv")
    s.set_defaults(func=cmd_reconcile)

    s = sub.add_parser("amplify", help="Toeplitz privacy amplification of a reconciled CSV")
    s.add_argument("--reconciled", required=True)
    s.add_argument("--alice-key", default="alice_key.bin")
    s.add_argument("--bob-key", default="bob_key.bin")
    s.set_defaults(func=cmd_amplify)

    s = sub.add_parser("analyze", help="security report from the configuration (and optionally events)")
    s.add_argument("--events")
    s.add_argument("--out", help="report CSV")
    s.add_argument("--matrix-out", help="estimated crosstalk CSV (needs --events)")
    s.add_argument("--figure", help="crosstalk heatmap PNG (needs --events)")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("bounds", help="QBER bounds against dimension")
    s.add_argument("--d-max", type=int, default=25)
    s.add_argument("--out", default="bounds.csv")
    s.add_argument("--figure", help="bounds plot PNG")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("run", help="end-to-end session between two endpoints")
    s.add_argument("--link", help="inproc or tcp[:host:port]; defaults to the config's transport")
    s.add_argument("--transcript", help="per-pulse CSV")
    s.add_argument("--summary", help="session summary CSV")
    s.add_argument("--report", help="summary plus model security report CSV")
    s.add_argument("--key-out", help="write the final key as raw bytes")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("otp", help="one-time-pad a file with a key file")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--encrypt", metavar="FILE")
    g.add_argument("--decrypt", metavar="FILE")
    s.add_argument("--key", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_otp)

    s = sub.add_parser("annulus-check", help="equal OAM/ANG detection probability in any annulus")
    s.add_argument("--d", type=int)
    s.add_argument("--instances", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_annulus_check)

    s = sub.add_parser("dump-config", help="print the effective configuration")
    s.add_argument("--out")
    s.set_defaults(func=cmd_dump_config)
    return p


def _setup_logging(verbose: int) -> None:
    level = os.environ.get("OAMQKD_LOG_LEVEL", "WARNING").upper()
    if verbose:
        level = "DEBUG" if verbose > 1 else "INFO"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = RunConfig.load(args.config, args.set)
        if args.entropy:
            cfg = cfg.with_fresh_seeds()
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
