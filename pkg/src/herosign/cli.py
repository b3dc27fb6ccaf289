"""Command-line interface: keygen | sign | verify | tune | banksim | bench.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 internal
error. Keys and signatures are raw binary files; config and reports are JSON.
The HERO_SIGN_CONFIG environment variable overrides the tuning-config path.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from pathlib import Path

from . import banksim as bs
from . import sigcore
from .backends import BackendSelection
from .batchgraph import BufferPool, GraphSigner, build_graphs, execute_graphs, replay_check
from .config import ENV_CONFIG_PATH, TuningConfig, resolve_config
from .errors import HeroSignError, UsageError
from .params import PARAMETER_SETS, derive
from .tuner import (
    DEFAULT_ALPHA,
    DEFAULT_SEME,
    DEFAULT_T_MAX,
    TuneInput,
    padding_solve,
    profile_kernels,
    select_backends,
    tree_tune,
)
from .vexec import RelaxConfig

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _read_message(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _read_exact(path: str, expected: int, what: str) -> bytes:
    data = Path(path).read_bytes()
    if len(data) != expected:
        raise UsageError(f"{what} {path}: expected {expected} bytes, got {len(data)}")
    return data


def _parse_seed(hex_str: str | None, nbytes: int, what: str) -> bytes | None:
    if hex_str is None:
        return None
    try:
        raw = bytes.fromhex(hex_str)
    except ValueError as exc:
        raise UsageError(f"{what} must be hex: {exc}") from exc
    if len(raw) != nbytes:
        raise UsageError(f"{what} must be {nbytes} bytes, got {len(raw)}")
    return raw


def cmd_keygen(args) -> int:
    p = derive(args.set)
    seed = _parse_seed(args.seed, 3 * p.n, "--seed")
    sk = sigcore.keygen(p, seed)
    Path(args.sk).write_bytes(sk.to_bytes())
    Path(args.pk).write_bytes(sk.public().to_bytes())
    print(f"wrote {args.sk} ({p.sk_bytes} bytes) and {args.pk} ({p.pk_bytes} bytes)")
    return EXIT_OK


def cmd_sign(args) -> int:
    p = derive(args.set)
    sk = sigcore.SecretKey.from_bytes(_read_exact(args.key, p.sk_bytes, "secret key"), p)
    msg = _read_message(args.message)
    opt_rand = _parse_seed(args.opt_rand, p.n, "--opt-rand")
    cfg = resolve_config(args.config)
    set_cfg = cfg.sets[p.id]
    sig = sigcore.sign(
        msg, sk, p,
        opt_rand=opt_rand,
        oracle=args.oracle,
        fusion=None if args.oracle else cfg.layout_for(p.id),
        relax=None if args.oracle else RelaxConfig(enabled=set_cfg.relax),
        workers=args.workers or cfg.worker_width,
        selection=cfg.selection(),
    )
    Path(args.out).write_bytes(sig)
    if args.hex:
        print(sig.hex())
    print(f"wrote {args.out} ({len(sig)} bytes)", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    p = derive(args.set)
    pk = sigcore.PublicKey.from_bytes(_read_exact(args.pk, p.pk_bytes, "public key"), p)
    msg = _read_message(args.message)
    sig = Path(args.sig).read_bytes()
    if len(sig) != p.sig_bytes:
        print(
            f"verification failed: signature is {len(sig)} bytes, "
            f"expected {p.sig_bytes}",
            file=sys.stderr,
        )
        return EXIT_VERIFY_FAIL
    if sigcore.verify(msg, sig, pk, p):
        print("signature valid")
        return EXIT_OK
    print("verification failed: root mismatch", file=sys.stderr)
    return EXIT_VERIFY_FAIL


def cmd_tune(args) -> int:
    sets = list(PARAMETER_SETS) if args.set == "all" else [args.set]
    cfg = resolve_config(None) if args.update else TuningConfig.default(
        seme=args.seme, alpha=args.alpha
    )
    cfg.seme_per_block = args.seme
    selection = None
    if args.profile_reps:
        runs = profile_kernels(reps=args.profile_reps)
        selection = select_backends(runs, reps=args.profile_reps)
    report = {}
    for set_id in sets:
        p = derive(set_id)
        result = tree_tune(
            TuneInput(p, seme_per_block=args.seme, t_max=args.t_max, alpha=args.alpha)
        )
        entry = cfg.sets[set_id]
        entry.fusion = result.best
        entry.padding = padding_solve(p.n)
        if selection is not None:
            entry.backends = selection.row(set_id)
        report[set_id] = {
            "best": cfg.to_dict()["sets"][set_id]["fusion"],
            "candidates": len(result.candidates),
        }
    cfg.validate()
    cfg.save(args.out)
    print(json.dumps(report, indent=2))
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_banksim(args) -> int:
    pad = padding_solve(args.width) if args.rows is None else bs.PaddingScheme.for_width(
        args.width, args.rows
    )
    height = args.height
    trace = bs.reduction_trace(height, args.width, relax=args.relax)
    baseline = bs.count_conflicts(trace, None)
    padded = bs.count_conflicts(trace, pad)
    chosen = padded if args.padded else baseline
    report = {
        "width": args.width,
        "height": height,
        "relax": args.relax,
        "padding": {
            "banks_per_access": pad.banks_per_access,
            "lane_interval": pad.lane_interval,
            "rows_per_region": pad.rows_per_region,
        },
        "baseline": {
            "load": baseline.load_conflicts,
            "store": baseline.store_conflicts,
            "max_way": baseline.max_way,
        },
        "with_padding": {
            "load": padded.load_conflicts,
            "store": padded.store_conflicts,
            "max_way": padded.max_way,
        },
        "max_way": chosen.max_way,
        "per_level": {
            label: {
                "load": rep.load_conflicts,
                "store": rep.store_conflicts,
                "max_way": rep.max_way,
            }
            for label, rep in bs.conflicts_by_label(
                trace, pad if args.padded else None
            ).items()
        },
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    p = derive(args.set)
    cfg = resolve_config(args.config)
    rng = random.Random(args.rng_seed)
    sk = sigcore.keygen(p, seed=rng.randbytes(3 * p.n))
    messages = [rng.randbytes(args.message_bytes) for _ in range(args.messages)]
    graphs = build_graphs(messages, m=args.batch_m, T=args.graphs_T)
    signer = GraphSigner(
        sk, p,
        fusion=cfg.layout_for(p.id),
        relax=RelaxConfig(enabled=cfg.sets[p.id].relax),
    )
    pool = BufferPool()
    t0 = time.perf_counter()
    sigs, log = execute_graphs(graphs, args.workers, signer, pool=pool)
    elapsed = time.perf_counter() - t0

    ok = replay_check(log, graphs)
    pk = sk.public()
    verified = all(sigcore.verify(m, s, pk, p) for m, s in zip(messages, sigs))
    per_stage: dict[str, list[float]] = {}
    for event in log.events:
        per_stage.setdefault(event.stage, []).append(event.duration_s)
    report = {
        "set": p.id,
        "messages": args.messages,
        "batch_m": args.batch_m,
        "graphs_T": args.graphs_T,
        "workers": args.workers,
        "seconds": round(elapsed, 6),
        "kops": round(args.messages / elapsed / 1000.0, 6),
        "per_node_ms": {
            stage: round(1000.0 * sum(ts) / len(ts), 3)
            for stage, ts in sorted(per_stage.items())
        },
        "allocations": {"instantiate": pool.allocations, "execute": 0},
        "replay_check": ok,
        "verified": verified,
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK if (ok and verified) else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="herosign",
        description="SPHINCS+ (SHA-256, f-variants) batch signing engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sets = sorted(PARAMETER_SETS)

    kg = sub.add_parser("keygen", help="generate a keypair")
    kg.add_argument("set", choices=sets)
    kg.add_argument("--sk", required=True, help="secret-key output path")
    kg.add_argument("--pk", required=True, help="public-key output path")
    kg.add_argument("--seed", help="hex seed, 3n bytes (deterministic keygen)")
    kg.set_defaults(fn=cmd_keygen)

    sg = sub.add_parser("sign", help="sign a message")
    sg.add_argument("set", choices=sets)
    sg.add_argument("--key", required=True, help="secret-key file")
    sg.add_argument("--message", required=True, help="message file, or - for stdin")
    sg.add_argument("--out", required=True, help="signature output path")
    sg.add_argument("--oracle", action="store_true", help="use the naive sequential signer")
    sg.add_argument("--config", help=f"tuning config (default: ${ENV_CONFIG_PATH} or built-in)")
    sg.add_argument("--opt-rand", help="hex randomizer seed, n bytes (default: deterministic)")
    sg.add_argument("--workers", type=int, help="worker-pool width override")
    sg.add_argument("--hex", action="store_true", help="also print the signature as hex")
    sg.set_defaults(fn=cmd_sign)

    vf = sub.add_parser("verify", help="verify a signature")
    vf.add_argument("set", choices=sets)
    vf.add_argument("--pk", required=True, help="public-key file")
    vf.add_argument("--message", required=True, help="message file, or - for stdin")
    vf.add_argument("--sig", required=True, help="signature file")
    vf.set_defaults(fn=cmd_verify)

    tn = sub.add_parser("tune", help="run the tuning search and write a config")
    tn.add_argument("set", choices=sets + ["all"])
    tn.add_argument("--seme", type=int, default=DEFAULT_SEME, help="scratch bytes per block")
    tn.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="lane-utilization floor")
    tn.add_argument("--t-max", type=int, default=DEFAULT_T_MAX, help="max lanes per block")
    tn.add_argument("--profile-reps", type=int, default=0,
                    help="profile hash backends with this many repetitions per cell")
    tn.add_argument("--update", action="store_true",
                    help="start from the current config instead of defaults")
    tn.add_argument("--out", default="herosign-tuning.json", help="config output path")
    tn.set_defaults(fn=cmd_tune)

    bk = sub.add_parser("banksim", help="bank-conflict report for the reduction trace")
    bk.add_argument("--width", type=int, default=16, help="per-lane access bytes")
    bk.add_argument("--height", type=int, default=6, help="tree height")
    bk.add_argument("--relax", action="store_true", help="relax the bottom layer")
    bk.add_argument("--padded", action="store_true", help="report the padded trace")
    bk.add_argument("--rows", type=int, help="force a region size (rows of 128 bytes)")
    bk.set_defaults(fn=cmd_banksim)

    bn = sub.add_parser("bench", help="batch-signing throughput benchmark")
    bn.add_argument("set", choices=sets)
    bn.add_argument("--messages", type=int, default=16)
    bn.add_argument("--message-bytes", type=int, default=32)
    bn.add_argument("--batch-m", type=int, default=8)
    bn.add_argument("--graphs-T", type=int, default=2)
    bn.add_argument("--workers", type=int, default=4)
    bn.add_argument("--config", help="tuning config path")
    bn.add_argument("--rng-seed", type=int, default=0)
    bn.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, matching the contract.
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeroSignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
