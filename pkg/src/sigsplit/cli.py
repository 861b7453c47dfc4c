"""Command-line front end.

Three subcommands:

* ``generate``  - write a synthetic signature corpus to disk
* ``run``       - run matcher configurations over a corpus and write
                  report/score/DET artifacts
* ``report``    - consolidate report JSON files into one CSV and a
                  markdown table

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
A ``--config`` file with ``key=value`` lines can pre-set any flag of
the chosen subcommand; explicit flags win on conflict.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys
import traceback

from .data_io import load_dataset
from .fusion import CostConfig
from .dtw import DtwConfig
from .pipeline import RunConfig, run_experiment, write_run_artifacts
from .synthetic import SynthConfig, generate, write_corpus
from .vq import LbgConfig

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Flag combinations the parser alone cannot reject."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; this project reserves 2
    # for data errors.
    def error(self, message):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config_pairs(path: str) -> dict[str, str]:
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path} line {n}: expected key=value, got {raw!r}")
            pairs[key.strip().replace("-", "_")] = value.strip()
    return pairs


_BOOL_KEYS = {"path_normalize"}


def _expand_config(argv: list[str]) -> list[str]:
    """Splice config-file values in right after the subcommand so that
    explicit flags, coming later, win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    pairs = _load_config_pairs(argv[i + 1])
    file_args: list[str] = []
    for k, v in pairs.items():
        flag = "--" + k.replace("_", "-")
        if k in _BOOL_KEYS:
            truthy = v.lower() in ("1", "true", "yes", "on")
            file_args.append(flag if truthy else "--no-" + k.replace("_", "-"))
        else:
            file_args.extend([flag, v])
    return [argv[0]] + file_args + argv[1:]


def _parse_bits(text: str) -> list[int]:
    """Accept '6', '4,6,8' or '4-8'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo_s, _, hi_s = part.partition("-")
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise ValueError(f"bad bits range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError(f"no bits in {text!r}")
    return sorted(set(out))


def _parse_splits(text: str) -> list[str]:
    if text.strip().lower() == "all":
        return ["TEST1", "TEST2", "TEST3", "TEST4", "WHOLE"]
    return [p.strip() for p in text.split(",") if p.strip()]


def _build_parser() -> _Parser:
    parser = _Parser(prog="sigsplit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[], help="write a synthetic corpus")
    g.add_argument("--config", help="key=value file pre-setting flags")
    g.add_argument("--out", required=True, help="corpus output directory")
    g.add_argument("--users", type=int, default=20)
    g.add_argument("--genuine", type=int, default=10, help="genuine signatures per user")
    g.add_argument("--skilled", type=int, default=5, help="skilled forgeries per user")
    g.add_argument("--min-len", type=int, default=150)
    g.add_argument("--max-len", type=int, default=250)
    g.add_argument("--noise", type=float, default=1.0, help="within-user noise level")
    g.add_argument("--forgery-noise", type=float, default=2.5,
                   help="forger noise level, must exceed --noise")
    g.add_argument("--seed", type=int, default=7)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run matcher configurations over a corpus")
    r.add_argument("--config", help="key=value file pre-setting flags")
    r.add_argument("--data", required=True, help="corpus root directory")
    r.add_argument("--manifest", default=None,
                   help="manifest path (default: <data>/manifest.txt)")
    r.add_argument("--engine", required=True, choices=["vq", "dtw"])
    r.add_argument("--bits", default=None,
                   help="vq codebook bits: '6', '4,6' or '4-8' (vq only)")
    r.add_argument("--split", default="TEST1",
                   help="comma-separated split names or 'all'")
    r.add_argument("--n-train", type=int, choices=[1, 5], default=5,
                   help="genuine signatures enrolled per user")
    r.add_argument("--delta-halfwidth", type=int, default=2)
    r.add_argument("--alpha-step", type=float, default=0.01)
    r.add_argument("--alpha-mode", choices=["oracle", "heldout"], default="oracle")
    r.add_argument("--p-true", type=float, default=0.5)
    r.add_argument("--c-miss", type=float, default=1.0)
    r.add_argument("--c-fa", type=float, default=1.0)
    r.add_argument("--dtw-local", choices=["squared_euclidean", "euclidean"],
                   default="squared_euclidean")
    r.add_argument("--path-normalize", action=argparse.BooleanOptionalAction,
                   default=True)
    r.add_argument("--lbg-perturbation", type=float, default=0.01)
    r.add_argument("--lbg-max-iters", type=int, default=100)
    r.add_argument("--lbg-threshold", type=float, default=1e-5)
    r.add_argument("--out", default="runs", help="artifact output directory")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="consolidate run reports into tables")
    p.add_argument("--config", help="key=value file pre-setting flags")
    p.add_argument("--dir", required=True, help="directory holding report_*.json")
    p.add_argument("--out-csv", default=None,
                   help="summary CSV path (default: <dir>/summary.csv)")
    p.add_argument("--out-md", default=None,
                   help="summary markdown path (default: <dir>/summary.md)")
    p.set_defaults(func=cmd_report)
    return parser


def cmd_generate(args) -> int:
    cfg = SynthConfig(
        n_users=args.users,
        genuine_per_user=args.genuine,
        skilled_per_user=args.skilled,
        length_range=(args.min_len, args.max_len),
        intra_user_noise=args.noise,
        forgery_distortion=args.forgery_noise,
        rng_seed=args.seed,
    )
    corpus = generate(cfg)
    write_corpus(corpus, args.out)
    check = corpus.provenance["separability"]
    print(
        f"wrote {len(corpus.manifest)} signatures for {args.users} users to "
        f"{args.out} (seed {corpus.provenance['seed_used']}, separability "
        f"genuine={check['genuine_mean']} skilled={check['skilled_mean']})"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        if args.engine == "vq":
            if args.bits is None:
                raise UsageError("--engine vq requires --bits")
            bits_list: list[int | None] = list(_parse_bits(args.bits))
        else:
            if args.bits is not None:
                raise UsageError("--bits only applies to --engine vq")
            bits_list = [None]
        splits = _parse_splits(args.split)
        cost = CostConfig(c_miss=args.c_miss, c_fa=args.c_fa, p_true=args.p_true)
        dtw_cfg = DtwConfig(local_distance=args.dtw_local,
                            path_normalize=args.path_normalize)
        lbg_cfg = LbgConfig(
            perturbation=args.lbg_perturbation,
            max_kmeans_iters=args.lbg_max_iters,
            rel_improvement_threshold=args.lbg_threshold,
            rng_seed=args.seed,
        )
        configs = [
            RunConfig(
                engine=args.engine,
                split=split,
                n_train=args.n_train,
                bits=bits,
                delta_halfwidth=args.delta_halfwidth,
                alpha_step=args.alpha_step,
                alpha_mode=args.alpha_mode,
                cost=cost,
                dtw_cfg=dtw_cfg,
                lbg_cfg=lbg_cfg,
                seed=args.seed,
                workers=args.workers,
            )
            for split in splits
            for bits in bits_list
        ]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    min_len = 2 * args.delta_halfwidth + 1
    ds = load_dataset(args.data, args.manifest, min_length=min_len)
    for cfg in configs:
        result = run_experiment(ds, cfg)
        paths = write_run_artifacts(result, args.out)
        rep = result.report
        bits_s = f" bits={rep['bits']}" if "bits" in rep else ""
        dcf_r = rep["dcf_random"]
        dcf_s = rep["dcf_skilled"]
        print(
            f"{rep['test_name']} {rep['engine']}{rep['n_train']}{bits_s}: "
            f"idr={rep['idr']:.4f}"
            f" dcf_random={'n/a' if dcf_r is None else format(dcf_r, '.6f')}"
            f" dcf_skilled={'n/a' if dcf_s is None else format(dcf_s, '.6f')}"
            f" -> {paths['report']}"
        )
    return EXIT_OK


_SUMMARY_COLUMNS = [
    "engine", "n_train", "split", "bits",
    "alpha_opt_idr", "alpha_opt_random", "alpha_opt_skilled",
    "idr_opt", "dcf_random_opt", "dcf_skilled_opt",
    "idr_a0", "dcf_random_a0", "dcf_skilled_a0",
    "idr_a1", "dcf_random_a1", "dcf_skilled_a1",
]

# Columns reported as percentages; rates and costs scale by 100 for the
# tables, matching the usual presentation.
_PCT_COLUMNS = {c for c in _SUMMARY_COLUMNS if c.startswith(("idr", "dcf"))}
# Larger is better only for identification-rate columns.
_MAX_BEST = {c for c in _SUMMARY_COLUMNS if c.startswith("idr")}


def _summary_row(rep: dict) -> dict:
    cells = rep["cells"]

    def get(cell_name: str, key: str):
        cell = cells.get(cell_name)
        return None if cell is None else cell.get(key)

    return {
        "engine": rep["engine"],
        "n_train": rep["n_train"],
        "split": rep["test_name"],
        "bits": rep.get("bits", ""),
        "alpha_opt_idr": rep["alpha_opt"]["idr"],
        "alpha_opt_random": rep["alpha_opt"]["random"],
        "alpha_opt_skilled": rep["alpha_opt"]["skilled"],
        "idr_opt": get("alpha_opt", "idr"),
        "dcf_random_opt": get("alpha_opt", "dcf_random"),
        "dcf_skilled_opt": get("alpha_opt", "dcf_skilled"),
        "idr_a0": get("alpha_0", "idr"),
        "dcf_random_a0": get("alpha_0", "dcf_random"),
        "dcf_skilled_a0": get("alpha_0", "dcf_skilled"),
        "idr_a1": get("alpha_1", "idr"),
        "dcf_random_a1": get("alpha_1", "dcf_random"),
        "dcf_skilled_a1": get("alpha_1", "dcf_skilled"),
    }


def _format_value(col: str, value) -> str:
    if value is None or value == "":
        return ""
    if col in _PCT_COLUMNS:
        return f"{100.0 * value:.3f}"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def cmd_report(args) -> int:
    pattern = os.path.join(args.dir, "report_*.json")
    paths = sorted(glob.glob(pattern))
    rows = []
    corrupt = []
    for path in paths:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                rep = json.load(fh)
            if rep.get("schema") != "sigsplit-report-v1":
                raise ValueError(f"unknown schema {rep.get('schema')!r}")
            rows.append(_summary_row(rep))
        except (ValueError, KeyError, OSError) as exc:
            corrupt.append(f"{path}: {exc}")
    for line in corrupt:
        print(f"skipping corrupt report: {line}", file=sys.stderr)
    if not rows:
        print(f"no valid reports under {pattern}", file=sys.stderr)
        return EXIT_DATA
    rows.sort(key=lambda r: (r["engine"], r["n_train"], r["split"],
                             r["bits"] if r["bits"] != "" else -1))

    out_csv = args.out_csv or os.path.join(args.dir, "summary.csv")
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_format_value(c, r[c]) for c in _SUMMARY_COLUMNS])

    # Markdown table with the best entry of each metric column in bold
    # (max for identification rate, min for costs).
    best: dict[str, str] = {}
    for col in _PCT_COLUMNS:
        vals = [(i, r[col]) for i, r in enumerate(rows) if r[col] is not None]
        if not vals:
            continue
        pick = max(vals, key=lambda p: p[1]) if col in _MAX_BEST else \
            min(vals, key=lambda p: p[1])
        best[col] = pick[0]
    lines = [
        "| " + " | ".join(_SUMMARY_COLUMNS) + " |",
        "| " + " | ".join("---" for _ in _SUMMARY_COLUMNS) + " |",
    ]
    for i, r in enumerate(rows):
        cells = []
        for c in _SUMMARY_COLUMNS:
            s = _format_value(c, r[c])
            if s and best.get(c) == i:
                s = f"**{s}**"
            cells.append(s)
        lines.append("| " + " | ".join(cells) + " |")
    out_md = args.out_md or os.path.join(args.dir, "summary.md")
    with open(out_md, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{len(rows)} report(s) -> {out_csv}, {out_md}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse --help or usage error
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
