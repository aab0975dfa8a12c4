"""``drh`` command line: dist, encode, build, query and simulate.

Results go to standard output, logs to standard error. Settings are resolved
as built-in defaults < ``--config`` file (``key=value`` lines, keys named
like the long flags) < command-line flags.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import alignment, codebook, encoder, index, simulate
from .alignment import AlignmentParams, nw_distance
from .codebook import Backend, CodebookConfig, kmer_model
from .encoder import EncoderConfig
from .index import DrhIndex, IndexConfig, build_index
from .sequence import SequenceParseError, read_sequence

log = logging.getLogger("drh")

EXIT_OK = 0
EXIT_NO_HITS = 1
EXIT_USAGE = 2

DEFAULT_RD_POINTS = 50
DEFAULT_TOY_LENGTH = 16
DEFAULT_TOY_RATE = 0.5
DEFAULT_REF_LEN = 10_000
EXPERIMENTS = ("rate-distortion", "hamming-toy", "drh-histogram", "collision-recall")


def _int(text: str) -> int:
    """Integer in any Python literal base (``0x5EED`` works)."""
    return int(text, 0)


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _env_seed() -> int:
    raw = os.environ.get("DRH_SEED")
    if raw is None:
        return codebook.DEFAULT_SEED
    try:
        return _int(raw)
    except ValueError:
        raise SystemExit(f"drh: DRH_SEED={raw!r} is not an integer") from None


# Flag groups ----------------------------------------------------------------------------------------------------------
def _add_alignment(p: argparse.ArgumentParser, band: bool = True, default=None) -> None:
    g = p.add_argument_group("alignment")
    pick = (lambda v: v) if default is None else (lambda v: default)
    g.add_argument("--cg", type=_int, default=pick(alignment.DEFAULT_GAP_COST), help="gap cost")
    g.add_argument("--cs", type=_int, default=pick(alignment.DEFAULT_SUB_COST), help="substitution cost")
    if band:
        g.add_argument("--band", type=_int, default=pick(alignment.DEFAULT_BAND),
                       help="band half-width around the row minimum, 0 disables banding")


def _add_encoder(p: argparse.ArgumentParser, seed_flag: str = "--seed", default=None) -> None:
    """Encoder flags; ``default`` overrides every default (query reads them from the index)."""
    _add_alignment(p, default=default)
    pick = (lambda v: v) if default is None else (lambda v: default)
    g = p.add_argument_group("codebook and search")
    g.add_argument("--backend", choices=[b.name.lower() for b in Backend],
                   default=pick(Backend.XORSHIFT.name.lower()), help="codebook backend")
    g.add_argument("--n", type=_int, default=pick(codebook.DEFAULT_N), help="enlarged block size in bits (xorshift)")
    g.add_argument("--rate-block-size", type=_int, default=pick(codebook.DEFAULT_BLOCK_SIZE),
                   help="hash bits per block (xorshift); rate = block size / n")
    g.add_argument(seed_flag, type=_int, default=pick(_env_seed()), dest="cb_seed",
                   help="codebook seed (environment DRH_SEED overrides the built-in default)")
    g.add_argument("--model", default=pick(""), help="reference whose 4-mer counts shape the tans codebook "
                                                     "(empty: uniform model)")
    g.add_argument("--max-active", type=_int, default=pick(encoder.DEFAULT_MAX_ACTIVE),
                   help="beam width per depth")
    g.add_argument("--candidates", type=_int, default=pick(encoder.DEFAULT_CANDIDATES),
                   help="DRH candidates kept per sequence")
    g.add_argument("--slack", type=_int, default=pick(encoder.DEFAULT_SLACK),
                   help="candidates may exceed the best distance by at most this much")
    g.add_argument("--widening", type=_int, choices=(0, 1), default=pick(int(encoder.DEFAULT_WIDENING)),
                   help="1: also search every power-of-ten beam width below --max-active and merge")


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=_int, default=1, help="worker threads (output does not depend on it)")


def encoder_config(args: argparse.Namespace) -> EncoderConfig:
    backend = Backend[args.backend.upper()]
    counts = kmer_model(read_sequence(args.model)) if args.model else None
    if backend is Backend.XORSHIFT:
        cb = CodebookConfig(backend, args.n, args.rate_block_size, args.cb_seed)
    else:
        cb = CodebookConfig(backend, seed=args.cb_seed, model_counts=counts)
    al = AlignmentParams(args.cg, args.cs, args.band or None)
    return EncoderConfig(args.max_active, args.candidates, args.slack, cb, al, bool(args.widening))


# Subcommands ----------------------------------------------------------------------------------------------------------
def cmd_dist(args, out) -> int:
    a, b = read_sequence(args.a), read_sequence(args.b)
    out.write(f"{nw_distance(a, b, AlignmentParams(args.cg, args.cs, None))}\n")
    return EXIT_OK


def cmd_encode(args, out) -> int:
    seq = read_sequence(args.sequence)
    for cand in encoder.encode(seq, encoder_config(args)):
        out.write(f"{cand.fingerprint(len(seq)).hex()}\t{len(cand.bits)}\t{cand.final_distance}\n")
    return EXIT_OK


def cmd_build(args, out) -> int:
    reference = read_sequence(args.reference)
    cfg = IndexConfig(tuple(args.window_lens), args.stride, encoder_config(args))
    progress = None
    if args.verbose:
        done = [0]

        def progress(k):
            done[0] += k
            print(f"encoded {done[0]} windows", file=sys.stderr)
    idx = build_index(reference, cfg, threads=args.threads, shards=args.shards or None, progress=progress)
    idx.save(args.index)
    out.write(f"{len(idx)}\n")
    return EXIT_OK


def _query_encoder(args, idx: DrhIndex) -> EncoderConfig:
    """The index's encoder, unless flags given on the command line say otherwise."""
    enc = idx.config.encoder
    cb, al = enc.codebook, enc.alignment
    given = {k: v for k, v in vars(args).items() if v is not None}
    if not {"cg", "cs", "band", "backend", "n", "rate_block_size", "cb_seed", "model", "max_active",
            "candidates", "slack", "widening"} & given.keys():
        return enc
    merged = argparse.Namespace(
        cg=given.get("cg", al.c_g), cs=given.get("cs", al.c_s), band=given.get("band", al.band_width),
        backend=given.get("backend", cb.backend.name.lower()), n=given.get("n", cb.n),
        rate_block_size=given.get("rate_block_size", cb.block_size), cb_seed=given.get("cb_seed", cb.seed),
        model=given.get("model", ""), max_active=given.get("max_active", enc.max_active),
        candidates=given.get("candidates", enc.n_candidates), slack=given.get("slack", enc.candidate_slack),
        widening=given.get("widening", int(enc.widening)))
    cfg = encoder_config(merged)
    if "model" not in given and cfg.codebook.backend is Backend.TANS:
        cfg = EncoderConfig(cfg.max_active, cfg.n_candidates, cfg.candidate_slack,
                            CodebookConfig(Backend.TANS, seed=cfg.codebook.seed, model_counts=cb.model_counts),
                            cfg.alignment, cfg.widening)
    return cfg


def cmd_query(args, out) -> int:
    idx = DrhIndex.open(args.index)
    read = read_sequence(args.read)
    hits = idx.query(read, limit=args.limit, encoder=_query_encoder(args, idx))
    for h in hits:
        out.write(f"{h.position}\t{h.window_len}\t{h.rank}\n")
    return EXIT_OK if hits else EXIT_NO_HITS


def cmd_simulate(args, out) -> int:
    exp = args.experiment
    if exp == "rate-distortion":
        n = args.points
        if n < 1:
            raise ValueError("--points must be >= 1")
        rows = [(0.0, 1.0)] + simulate.rate_distortion_curve([k / (2 * n) for k in range(1, n + 1)])
        simulate.write_csv(out, ("D", "R"), [(f"{d:.6g}", f"{r:.9f}") for d, r in rows],
                           {"experiment": exp, "points": n, "note": "D=0 row is the limit R(D->0)=1"})
        return EXIT_OK
    if exp == "hamming-toy":
        hist = simulate.hamming_toy_experiment(args.length, args.rate, args.trials, args.seed)
        params = {"experiment": exp, "length": args.length, "rate": args.rate, "trials": args.trials,
                  "seed": args.seed, "mean": f"{hist.mean:.6f}", "iqr": f"{hist.iqr():.6f}"}
        simulate.write_csv(out, ("distance", "count"), simulate.histogram_rows(hist), params)
        return EXIT_OK

    enc = encoder_config(args)
    params = {"experiment": exp, "trials": args.trials, "seed": args.seed, "codebook_seed": enc.codebook.seed,
              "backend": enc.codebook.backend.name.lower(), "n": enc.codebook.n,
              "rate_block_size": enc.codebook.block_size, "cg": enc.alignment.c_g, "cs": enc.alignment.c_s,
              "band": enc.alignment.band_width, "max_active": enc.max_active, "candidates": enc.n_candidates,
              "slack": enc.candidate_slack, "widening": int(enc.widening)}
    if exp == "drh-histogram":
        hists = simulate.drh_distortion_histogram(args.window_lens, enc, args.trials, args.seed, args.threads)
        params["window_lens"] = ",".join(map(str, args.window_lens))
        for wl, h in hists.items():
            params[f"d_max_{wl}"] = int(h.d_max)
            params[f"mean_{wl}"] = f"{h.mean:.4f}"
        rows = [(wl, d, c) for wl, h in hists.items() for d, c in simulate.histogram_rows(h)]
        simulate.write_csv(out, ("window_len", "distance", "count"), rows, params)
        return EXIT_OK
    # collision-recall
    mut = simulate.MutationModel(args.psub, args.pins, args.pdel)
    wl = args.window_lens[0]
    res = simulate.collision_recall(args.ref_len, wl, mut, enc, args.trials, args.seed, args.threads)
    params.update(ref_len=args.ref_len, window_len=wl, psub=args.psub, pins=args.pins, pdel=args.pdel,
                  recall=f"{res.recall:.6f}")
    simulate.write_csv(out, ("position", "read_window_distance", "collided", "rank", "read_code_distance",
                             "window_code_distance"), simulate.recall_rows(res), params)
    return EXIT_OK


# Parser ---------------------------------------------------------------------------------------------------------------
class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drh", description="Distortion-resistant hashing of nucleotide sequences.",
                                     formatter_class=_Formatter)
    parser.add_argument("--config", default=None, help="key=value file of flag defaults (flags still win)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="exact alignment distance of two sequence files", formatter_class=_Formatter)
    p.add_argument("a")
    p.add_argument("b")
    _add_alignment(p, band=False)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("encode", help="DRH candidates of a sequence file", formatter_class=_Formatter)
    p.add_argument("sequence")
    _add_encoder(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("build", help="index every window of a reference", formatter_class=_Formatter)
    p.add_argument("reference")
    p.add_argument("index", help="output index file")
    _add_encoder(p)
    p.add_argument("--window-lens", type=_int_list, default=list(index.DEFAULT_WINDOW_LENS),
                   help="comma-separated window lengths")
    p.add_argument("--stride", type=_int, default=index.DEFAULT_STRIDE, help="distance between window starts")
    p.add_argument("--shards", type=_int, default=0, help="independent work chunks, 0 = one per thread")
    _add_threads(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="positions whose windows collide with a read", formatter_class=_Formatter)
    p.add_argument("index")
    p.add_argument("read")
    p.add_argument("--limit", type=_int, default=index.DEFAULT_LIMIT, help="maximum hits printed")
    _add_encoder(p, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("simulate", help="experiments as CSV", formatter_class=_Formatter)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--seed", type=_int, default=_env_seed(), help="experiment seed")
    p.add_argument("--trials", type=_int, default=simulate.DEFAULT_TRIALS, help="trials")
    p.add_argument("--points", type=_int, default=DEFAULT_RD_POINTS, help="rate-distortion grid points")
    p.add_argument("--length", type=_int, default=DEFAULT_TOY_LENGTH, help="hamming-toy length in bits")
    p.add_argument("--rate", type=float, default=DEFAULT_TOY_RATE, help="hamming-toy rate")
    p.add_argument("--window-lens", type=_int_list, default=list(index.DEFAULT_WINDOW_LENS),
                   help="window lengths (collision-recall uses the first)")
    p.add_argument("--ref-len", type=_int, default=DEFAULT_REF_LEN, help="collision-recall reference length")
    p.add_argument("--psub", type=float, default=0.0, help="substitution probability per symbol")
    p.add_argument("--pins", type=float, default=0.0, help="insertion probability per symbol")
    p.add_argument("--pdel", type=float, default=0.0, help="deletion probability per symbol")
    _add_encoder(p, seed_flag="--codebook-seed")
    _add_threads(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path: str) -> Dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{num}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.lstrip("-").replace("_", "-")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, values: Dict[str, str]) -> None:
    by_flag = {opt.lstrip("-"): a for a in sub._actions for opt in a.option_strings if opt.startswith("--")}
    defaults = {}
    for key, raw in values.items():
        action = by_flag.get(key)
        if action is None or action.dest in ("help", "config"):
            raise ValueError(f"unknown config key {key!r} for this command")
        conv = action.type or str
        if action.choices is not None and raw not in action.choices:
            raise ValueError(f"config key {key!r}: {raw!r} not in {sorted(action.choices)}")
        defaults[action.dest] = conv(raw)
    sub.set_defaults(**defaults)


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        if args.config:
            _apply_config(_subparser(parser, args.command), read_config(args.config))
            args = parser.parse_args(argv)
        return args.func(args, out)
    except SequenceParseError as exc:
        print(f"drh: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OverflowError, OSError, encoder.BeamExtinctError) as exc:
        print(f"drh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
