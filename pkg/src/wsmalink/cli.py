"""Command-line front end: signature-set generation and verification, BLER
sweeps, HARQ experiments, pairing workflow runs, and result-file comparison.

Exit codes: 0 success, 1 runtime failure (including interrupted runs, which
flush partial results with a truncation marker), 2 validation error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import typing

from . import __version__, pairing, seqdesign, sim
from .coding import CodingError
from .harq import HarqError
from .pairing import PairingError
from .phy import PhyError
from .rx import RxError
from .seqdesign import PiKind, SeqDesignError
from .sim import ExperimentConfig, SimError

VALIDATION_ERRORS = (
    SimError, SeqDesignError, PhyError, RxError, CodingError, HarqError,
    PairingError, ValueError,
)


def _config_keys(cls=ExperimentConfig, prefix=""):
    keys = []
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        tp = hints[f.name]
        name = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(tp):
            keys.extend(_config_keys(tp, prefix=f"{name}."))
        else:
            keys.append(name)
    return keys


def _config_epilog(scenarios):
    lines = ["config keys (override with --overrides KEY=VALUE):"]
    lines += [f"  {k}" for k in _config_keys()]
    lines.append(f"accepted scenarios for this command: {', '.join(scenarios)}")
    return "\n".join(lines)


def _print_table(rows, columns, out=None, markdown=False):
    out = out if out is not None else sys.stdout
    cells = [[("" if r.get(c) is None else str(r.get(c))) for c in columns] for r in rows]
    widths = [
        max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
        for i, c in enumerate(columns)
    ]
    if markdown:
        out.write("| " + " | ".join(c.ljust(w) for c, w in zip(columns, widths)) + " |\n")
        out.write("|" + "|".join("-" * (w + 2) for w in widths) + "|\n")
        for row in cells:
            out.write("| " + " | ".join(v.ljust(w) for v, w in zip(row, widths)) + " |\n")
    else:
        out.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)) + "\n")
        for row in cells:
            out.write("  ".join(v.ljust(w) for v, w in zip(row, widths)) + "\n")


# ---------------------------------------------------------------------------
# seq

def cmd_seq(args) -> int:
    for name, value in (("k", args.k), ("l", args.l)):
        if value < 1:
            print(f"error: --{name} must be a positive integer, got {value}",
                  file=sys.stderr)
            return 2
    S = seqdesign.generate(
        args.k, args.l, PiKind(args.pi), seed=args.seed, iters=args.iters,
        tol=args.tol,
    )
    report = seqdesign.verify(S)
    print(f"signature set K={args.k} L={args.l} pi={args.pi} seed={args.seed}")
    print(f"overloading_factor={S.overloading_factor:.4f} converged={S.converged}")
    print(f"tsc={report.tsc:.9f}")
    print(f"welch_bound={report.welch_bound:.9f}")
    print(f"wbe_gap={report.wbe_gap:.3e}")
    print(f"mu={report.mu:.9f}")
    if args.k > args.l:
        print(f"mu_lower_bound={seqdesign.coherence_lower_bound(args.k, args.l):.9f}")
    print(f"min_chordal={report.min_chordal:.9f}")
    if PiKind(args.pi) is PiKind.CHORDAL and args.k > args.l:
        groups = seqdesign.chordal_partition(args.k, min(2, args.l))
        d = seqdesign.min_chordal_distance(S, groups)
        print(f"min_group_chordal={d:.9f} (consecutive pairs)")
    if args.out:
        seqdesign.save(S, args.out)
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# experiment runners

_SCENARIOS_FOR = {
    "bler": ("bler_noma", "bler_mumimo"),
    "harq": ("harq",),
    "pair": ("pairing",),
}

_SUMMARY_COLUMNS = {
    "bler": sim.BLER_COLUMNS,
    "harq": sim.HARQ_COLUMNS,
    "pairing": sim.PAIRING_COLUMNS,
}


def _merged_bler_table(labeled):
    grids = [sorted({r["snr_db"] for r in rs.rows}) for _, rs in labeled]
    if any(g != grids[0] for g in grids):
        raise SimError(
            f"result SNR grids differ: {grids}; refusing to interpolate"
        )
    merged = {}
    for label, rs in labeled:
        for r in rs.rows:
            key = (r["snr_db"], r["ue"])
            merged.setdefault(key, {"snr_db": r["snr_db"], "ue": r["ue"]})
            merged[key][f"bler_{label}"] = r["bler"]
    columns = ["snr_db", "ue"] + [f"bler_{label}" for label, _ in labeled]
    rows = [merged[k] for k in sorted(merged)]
    return rows, columns


def cmd_run(args, command: str) -> int:
    allowed = _SCENARIOS_FOR[command]
    configs = []
    for path in args.config:
        for cfg in sim.load_config_file(path):
            cfg = sim.apply_overrides(cfg, args.overrides or [])
            if args.seed is not None:
                cfg = sim.apply_overrides(cfg, [f"seed={args.seed}"])
            if cfg.scenario not in allowed:
                raise SimError(
                    f"{path}: scenario {cfg.scenario!r} not runnable by "
                    f"'{command}' (expected one of {allowed})"
                )
            configs.append(cfg)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise SimError(f"duplicate run labels {labels}; set distinct 'label' fields")
    results = []
    code = 0
    for cfg in configs:
        rs = sim.run_experiment(cfg, workers=args.workers)
        results.append((cfg.label, rs))
        if rs.truncated:
            print(f"run {cfg.label}: interrupted, partial results flushed",
                  file=sys.stderr)
            code = 1
        if args.out:
            base = args.out if len(configs) == 1 else f"{args.out}_{cfg.label}"
            for written in sim.persist(rs, base):
                print(f"wrote {written}")
    for label, rs in results:
        print(f"\n== {label} ({rs.kind}{', TRUNCATED' if rs.truncated else ''}) ==")
        _print_table(rs.rows, _SUMMARY_COLUMNS[rs.kind])
    blers = [(label, rs) for label, rs in results if rs.kind == "bler"]
    if len(blers) > 1:
        rows, columns = _merged_bler_table(blers)
        print("\n== comparison ==")
        _print_table(rows, columns)
        if args.out:
            path = f"{args.out}_compare.csv"
            import csv as _csv

            with open(path, "w", newline="") as fh:
                w = _csv.DictWriter(fh, fieldnames=columns)
                w.writeheader()
                w.writerows(rows)
            print(f"wrote {path}")
        if code == 0 and any(rs.truncated for _, rs in results):
            code = 1
    return code


# ---------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    loaded = []
    for path in args.results:
        rs = sim.load(path)
        label = rs.config.get("label") or path
        loaded.append((label, rs))
    kinds = {rs.kind for _, rs in loaded}
    if len(kinds) > 1:
        raise SimError(f"cannot merge result kinds {sorted(kinds)}")
    kind = kinds.pop()
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        if kind == "bler" and len(loaded) > 1:
            rows, columns = _merged_bler_table(loaded)
        else:
            rows, columns = [], ["label"] + _SUMMARY_COLUMNS[kind]
            for label, rs in loaded:
                for r in rs.rows:
                    rows.append({"label": label, **r})
        if args.format == "csv":
            import csv as _csv

            w = _csv.DictWriter(out, fieldnames=columns)
            w.writeheader()
            for r in rows:
                w.writerow({k: r.get(k) for k in columns})
        else:
            _print_table(rows, columns, out=out, markdown=args.format == "markdown")
    finally:
        if args.out:
            out.close()
            print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsmalink",
        description="Link-level WSMA NOMA simulator and sequence designer.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_seq = sub.add_parser("seq", help="generate and verify a signature set")
    p_seq.add_argument("--k", type=int, required=True, help="number of users K")
    p_seq.add_argument("--l", type=int, required=True, help="spread length L")
    p_seq.add_argument(
        "--pi", choices=[p.value for p in PiKind], default="tsc",
        help="performance indicator to optimize",
    )
    p_seq.add_argument("--seed", type=int, default=0)
    p_seq.add_argument("--iters", type=int, default=5000)
    p_seq.add_argument("--tol", type=float, default=1e-6)
    p_seq.add_argument("--out", help="write the set as signature JSON")

    for name, help_text in (
        ("bler", "run BLER sweep configs (scenarios bler_noma / bler_mumimo)"),
        ("harq", "run HARQ protocol experiment configs"),
        ("pair", "run UE pairing workflow configs"),
    ):
        p = sub.add_parser(
            name, help=help_text, epilog=_config_epilog(_SCENARIOS_FOR[name]),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("config", nargs="+", help="JSON config file(s)")
        p.add_argument("--out", help="output base path (writes .json and .csv)")
        p.add_argument(
            "--overrides", nargs="*", default=[], metavar="KEY=VALUE",
            help="dotted-key config overrides, type-checked against the schema",
        )
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument(
            "--workers", type=int, default=None,
            help=f"worker processes (default ${sim.WORKERS_ENV} or 1)",
        )

    p_rep = sub.add_parser("report", help="merge result files into one table")
    p_rep.add_argument("results", nargs="+", help="result JSON file(s)")
    p_rep.add_argument("--format", choices=("table", "csv", "markdown"),
                       default="table")
    p_rep.add_argument("--out", help="write the table to a file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "seq":
            return cmd_seq(args)
        if args.command in ("bler", "harq", "pair"):
            return cmd_run(args, args.command)
        return cmd_report(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
