"""Command-line front end: audits, MC estimates, oracle runs, sweeps.

Exit codes: 0 ok, 2 config error, 3 provider error, 4 oracle guard refusal.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import corpus as corpus_io
from . import remote
from .corpus import ByteTokenizer, SequenceRecord, WhitespaceTokenizer, chunk_text
from .distance import DistanceKind, distance
from .estimators import (
    McConfig,
    OracleGuardError,
    mc_detection_sample_size,
    mc_estimate,
    mc_relse_sample_size,
    oracle_exact_mass,
)
from .metrics import (
    SequenceResult,
    ccdf,
    extraction_rate,
    heatmap_coverage,
    mass_gain,
    shells,
    success_probabilistic,
    token_eval_cost,
)
from .model import (
    LOG_ZERO,
    DecodingPolicy,
    InvalidInputError,
    greedy_continuation,
    load_model_file,
    teacher_force_verbatim,
)
from .search import (
    ProviderFailure,
    SearchConfig,
    kcbs,
    postprocess_filter,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_GUARD = 4

ENDPOINT_ENV = "EXTRACTION_AUDIT_ENDPOINT"

_DIST = {"ham": DistanceKind.HAMMING, "lev": DistanceKind.LEVENSHTEIN}


class ConfigError(ValueError):
    pass


def _add_provider_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", default=None, help="synthetic model JSON file, or 'remote'")
    p.add_argument(
        "--endpoint",
        default=None,
        help=f"bridge endpoint (defaults to ${ENDPOINT_ENV} when --provider remote)",
    )


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", default=None, help="records JSONL file")
    p.add_argument("--text", default=None, help="raw UTF-8 text file (chunked on the fly)")
    p.add_argument("--tokenizer", choices=["byte", "whitespace"], default="byte")
    p.add_argument("--stride", type=int, default=20, help="chunking stride in characters")
    p.add_argument("--prefix-len", type=int, default=50)
    p.add_argument("--suffix-len", type=int, default=50)


def _add_search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam-width", type=int, default=20)
    p.add_argument("--top-k", type=int, default=40)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--variant", choices=["baseline", "ham", "lev"], default="baseline")
    p.add_argument("--dist", choices=["ham", "lev"], default="lev",
                   help="distance for baseline post-filtering and greedy checks")
    p.add_argument("--epsilon", type=int, default=5)
    p.add_argument("--epsilon-max", type=int, default=5,
                   help="largest epsilon in reported mass vectors (baseline runs)")
    p.add_argument("--tau-min", type=float, default=0.001)
    p.add_argument("--no-tau-min", action="store_true", help="disable early termination")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extraction-audit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="audit a corpus with constrained beam search")
    _add_provider_args(run)
    _add_corpus_args(run)
    _add_search_args(run)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)

    mc = sub.add_parser("mc", help="Monte Carlo near-verbatim mass estimates")
    _add_provider_args(mc)
    _add_corpus_args(mc)
    mc.add_argument("--dist", choices=["ham", "lev"], default="lev")
    mc.add_argument("--epsilon", type=int, default=5)
    mc.add_argument("--samples", type=int, default=2000)
    mc.add_argument("--confidence", type=float, default=0.95)
    mc.add_argument("--top-k", type=int, default=40)
    mc.add_argument("--temperature", type=float, default=1.0)
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--out", required=True)

    oracle = sub.add_parser("oracle", help="exact enumeration of near-verbatim mass")
    _add_provider_args(oracle)
    _add_corpus_args(oracle)
    oracle.add_argument("--dist", choices=["ham", "lev"], default="lev")
    oracle.add_argument("--epsilon", type=int, default=5)
    oracle.add_argument("--top-k", type=int, default=40)
    oracle.add_argument("--temperature", type=float, default=1.0)
    oracle.add_argument("--max-leaves", type=int, default=10**7)
    oracle.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="re-run the audit over beam widths or epsilons")
    _add_provider_args(sweep)
    _add_corpus_args(sweep)
    _add_search_args(sweep)
    sweep.add_argument("--param", choices=["beam-width", "epsilon"], required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values, e.g. 20,30,40")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", required=True)

    size = sub.add_parser("samplesize", help="MC sample-size calculators")
    size.add_argument("p", type=float, help="target mass")
    size.add_argument("delta", type=float, nargs="?", default=None, help="miss probability")
    size.add_argument("--eta", type=float, default=None, help="relative standard error")

    return parser


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _resolve_provider(args):
    spec = args.provider
    if spec is None:
        raise ConfigError("--provider is required (model file or 'remote')")
    if spec == "remote":
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ConfigError(f"--provider remote needs --endpoint or ${ENDPOINT_ENV}")
        return remote.connect(endpoint), {"provider": "remote", "endpoint": endpoint}
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"model file {path} does not exist")
    return load_model_file(path), {"provider": str(path), "sha256": _file_hash(path)}


def _check_vocabulary(records: Sequence[SequenceRecord], provider) -> None:
    top = max(max(r.prefix + r.suffix) for r in records)
    if top >= provider.vocabulary.size:
        raise ConfigError(
            f"corpus token {top} outside provider vocabulary of size "
            f"{provider.vocabulary.size}"
        )


def _resolve_records(args) -> List[SequenceRecord]:
    if (args.corpus is None) == (args.text is None):
        raise ConfigError("pass exactly one of --corpus or --text")
    if args.corpus is not None:
        records = corpus_io.load_records(args.corpus)
    else:
        text = Path(args.text).read_text(encoding="utf-8")
        tok = ByteTokenizer() if args.tokenizer == "byte" else WhitespaceTokenizer()
        records = chunk_text(
            text, tok, args.prefix_len, args.suffix_len, args.stride,
            source=Path(args.text).name,
        )
    if not records:
        raise ConfigError("corpus is empty")
    lengths = {(len(r.prefix), len(r.suffix)) for r in records}
    if len(lengths) != 1:
        raise ConfigError(f"records disagree on (n_pre, T): {sorted(lengths)}")
    return sorted(records, key=lambda r: r.id)


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _input_hashes(args) -> Dict[str, str]:
    hashes = {}
    if args.corpus:
        hashes["corpus"] = _file_hash(args.corpus)
    if args.text:
        hashes["text"] = _file_hash(args.text)
    if args.provider and args.provider != "remote":
        hashes["model"] = _file_hash(args.provider)
    return hashes


def _config_dict(args, keys: Sequence[str]) -> Dict[str, object]:
    return {k: getattr(args, k.replace("-", "_")) for k in keys}


def _config_hash(config: Dict[str, object], hashes: Dict[str, str]) -> str:
    blob = json.dumps({"config": config, "inputs": hashes}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _json_dump(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

_RUN_CONFIG_KEYS = (
    "provider", "endpoint", "corpus", "text", "tokenizer", "stride", "prefix-len",
    "suffix-len", "beam-width", "top-k", "temperature", "variant", "dist", "epsilon",
    "epsilon-max", "tau-min", "no-tau-min", "workers", "seed",
)


def _audit_one(provider, record: SequenceRecord, args, policy, eps_max: int) -> dict:
    T = len(record.suffix)
    dist_kind = _DIST[args.dist if args.variant == "baseline" else args.variant]
    tau_min = None if args.no_tau_min else args.tau_min

    logp = teacher_force_verbatim(provider, record.prefix, record.suffix, policy)
    verbatim = math.exp(logp) if logp != LOG_ZERO else 0.0

    greedy = greedy_continuation(provider, record.prefix, T)
    greedy_dist: Optional[int] = None
    if len(greedy) == T or dist_kind is DistanceKind.LEVENSHTEIN:
        greedy_dist = distance(dist_kind, greedy, record.suffix)

    if args.variant == "baseline":
        config = SearchConfig(
            beam_width=args.beam_width,
            policy=policy,
            suffix_len=T,
            tau_min=tau_min,
        )
        outcome = kcbs(provider, record.prefix, record.suffix, config)
        masses = [
            postprocess_filter(outcome.finals, record.suffix, dist_kind, eps).lower_bound
            for eps in range(eps_max + 1)
        ]
        lb = masses[-1]
        ub = min(lb + (1.0 - outcome.covered_mass), 1.0)
    else:
        config = SearchConfig(
            beam_width=args.beam_width,
            policy=policy,
            suffix_len=T,
            dist=dist_kind,
            epsilon=eps_max,
            tau_min=tau_min,
        )
        outcome = kcbs(provider, record.prefix, record.suffix, config)
        masses = []
        for eps in range(eps_max + 1):
            masses.append(
                sum(
                    math.exp(f.logp)
                    for f in outcome.finals
                    if f.final_distance is not None and f.final_distance <= eps
                )
            )
        lb, ub = outcome.lower_bound, outcome.upper_bound

    return {
        "id": record.id,
        "verbatim_mass": verbatim,
        "nearverbatim_mass": masses,
        "greedy_distance": greedy_dist,
        "token_evals": outcome.token_evals,
        "lower_bound": lb,
        "upper_bound": ub,
        "bank": outcome.bank,
        "covered_mass": outcome.covered_mass,
        "eos_mass": outcome.eos_mass,
        "termination": outcome.termination,
        "termination_depth": outcome.termination_depth,
        "ub_uninformative": outcome.ub_uninformative,
        "char_span": list(record.char_span) if record.char_span else None,
    }


def _row_to_result(row: dict) -> SequenceResult:
    return SequenceResult(
        id=row["id"],
        verbatim_mass=row["verbatim_mass"],
        nearverbatim_mass=tuple(row["nearverbatim_mass"]),
        greedy_distance=row["greedy_distance"],
        token_evals=row["token_evals"],
        char_span=tuple(row["char_span"]) if row.get("char_span") else None,
    )


def _summarize(rows: List[dict], args, config, hashes, eps_max: int) -> dict:
    results = [_row_to_result(r) for r in rows]
    tau = args.tau_min
    rates_prob = [
        extraction_rate(
            results, lambda r, e=eps: success_probabilistic(r.nearverbatim_mass[e], tau)
        )
        for eps in range(eps_max + 1)
    ]
    rates_greedy = [
        extraction_rate(
            results, lambda r, e=eps: r.greedy_distance is not None and r.greedy_distance <= e
        )
        for eps in range(eps_max + 1)
    ]
    gains = [mass_gain(r) for r in results]
    thresholds = [0.0] + [10.0**e for e in range(-6, 1)]
    ccdf_points = ccdf(gains, thresholds)
    # Share distributions cover extracted sequences only; zero-mass rows
    # would pin every share at 0 and say nothing.
    extracted = [r for r in results if r.nearverbatim_mass[-1] >= tau]
    decomps = [shells(r) for r in extracted]
    if decomps:
        shell_means = [
            sum(d.shell_share[i] for d in decomps) / len(decomps)
            for i in range(eps_max + 1)
        ]
    else:
        shell_means = [0.0] * (eps_max + 1)
    summary = {
        "config": config,
        "input_hashes": hashes,
        "config_hash": _config_hash(config, hashes),
        "n_sequences": len(rows),
        "tau_min": tau,
        "rates_probabilistic": rates_prob,
        "rates_greedy": rates_greedy,
        "ccdf_gain": ccdf_points,
        "n_extracted": len(extracted),
        "shell_share_means": shell_means,
        "verbatim_shares": [d.verbatim_share for d in decomps],
        "cost": {
            "total_token_evals": sum(r.token_evals for r in results),
            "per_pair_reference": {
                "greedy": token_eval_cost("greedy", config["prefix-len"], config["suffix-len"]),
                "teacher_forcing": token_eval_cost(
                    "teacher_forcing", config["prefix-len"], config["suffix-len"]
                ),
                "kcbs": token_eval_cost(
                    "kcbs", config["prefix-len"], config["suffix-len"], B=config["beam-width"]
                ),
            },
        },
    }
    spans = [r for r in results if r.char_span is not None]
    if spans:
        text_length = max(r.char_span[1] for r in spans)
        coverage, flags = heatmap_coverage(spans, text_length, epsilon=eps_max, tau_min=tau)
        summary["heatmap"] = {"length": text_length, "max_mass": coverage, "extractable": flags}
    return summary


def _open_csv(path, config_hash: str):
    fh = open(path, "w", newline="", encoding="utf-8")
    fh.write(f"# config_hash={config_hash}\n")
    return fh


def _write_run_outputs(outdir: Path, rows: List[dict], summary: dict, eps_max: int) -> None:
    _json_dump(outdir / "summary.json", summary)
    chash = summary["config_hash"]
    with _open_csv(outdir / "rates.csv", chash) as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "rate_probabilistic", "rate_greedy"])
        for eps in range(eps_max + 1):
            w.writerow(
                [eps, summary["rates_probabilistic"][eps], summary["rates_greedy"][eps]]
            )
    with _open_csv(outdir / "ccdf.csv", chash) as fh:
        w = csv.writer(fh)
        w.writerow(["gain_threshold", "fraction"])
        w.writerows(summary["ccdf_gain"])
    with _open_csv(outdir / "shell_shares.csv", chash) as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"shell_{e}" for e in range(eps_max + 1)])
        for row in rows:
            d = shells(_row_to_result(row))
            w.writerow([row["id"]] + list(d.shell_share))
    if "heatmap" in summary:
        with _open_csv(outdir / "heatmap.csv", chash) as fh:
            w = csv.writer(fh)
            w.writerow(["position", "max_mass", "extractable"])
            hm = summary["heatmap"]
            for pos in range(hm["length"]):
                w.writerow([pos, hm["max_mass"][pos], int(hm["extractable"][pos])])


def cmd_run(args) -> int:
    provider, provider_info = _resolve_provider(args)
    records = _resolve_records(args)
    _check_vocabulary(records, provider)
    policy = DecodingPolicy(k=args.top_k, beta=args.temperature)
    eps_max = args.epsilon if args.variant != "baseline" else args.epsilon_max

    config = _config_dict(args, _RUN_CONFIG_KEYS)
    config["prefix-len"] = len(records[0].prefix)
    config["suffix-len"] = len(records[0].suffix)
    hashes = _input_hashes(args)
    run_hash = _config_hash(config, hashes)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    results_path = outdir / "results.jsonl"

    done: Dict[str, dict] = {}
    if results_path.exists():
        header, rows = corpus_io.load_results(results_path)
        if header.get("config_hash") != run_hash:
            raise ConfigError(
                f"checkpoint {results_path} was produced by a different config "
                f"({header.get('config_hash')} != {run_hash})"
            )
        done = {r["id"]: r for r in rows}
    else:
        with open(results_path, "w", encoding="utf-8") as fh:
            header = {
                "schema": corpus_io.RESULT_SCHEMA,
                "version": corpus_io.SCHEMA_VERSION,
                "config": config,
                "config_hash": run_hash,
                "input_hashes": hashes,
            }
            fh.write(json.dumps(header, sort_keys=True) + "\n")

    pending = [r for r in records if r.id not in done]
    rows_by_id = dict(done)
    if pending:
        with open(results_path, "a", encoding="utf-8") as fh, ThreadPoolExecutor(
            max_workers=max(1, args.workers)
        ) as pool:
            futures = [
                pool.submit(_audit_one, provider, rec, args, policy, eps_max) for rec in pending
            ]
            # Collect in submission order: the checkpoint stays sorted by id
            # no matter which worker finishes first.
            for rec, fut in zip(pending, futures):
                row = fut.result()
                fh.write(json.dumps(row, sort_keys=True) + "\n")
                fh.flush()
                rows_by_id[rec.id] = row

    rows = [rows_by_id[r.id] for r in records]
    summary = _summarize(rows, args, config, hashes, eps_max)
    _write_run_outputs(outdir, rows, summary, eps_max)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mc / oracle / sweep / samplesize
# ---------------------------------------------------------------------------


def cmd_mc(args) -> int:
    provider, _ = _resolve_provider(args)
    records = _resolve_records(args)
    _check_vocabulary(records, provider)
    policy = DecodingPolicy(k=args.top_k, beta=args.temperature)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, rec in enumerate(records):
        cfg = McConfig(
            samples=args.samples,
            seed=args.seed + i,
            dist=_DIST[args.dist],
            epsilon=args.epsilon,
            confidence_level=args.confidence,
        )
        est = mc_estimate(provider, rec.prefix, rec.suffix, policy, cfg)
        rows.append(
            {
                "id": rec.id,
                "p_hat": est.p_hat,
                "hits": est.hits,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "samples": est.samples,
                "seed": cfg.seed,
            }
        )
    corpus_io.save_results(outdir / "mc.jsonl", rows, {"kind": "mc"})
    _json_dump(
        outdir / "mc_summary.json",
        {
            "n_sequences": len(rows),
            "mean_p_hat": sum(r["p_hat"] for r in rows) / len(rows),
            "dist": args.dist,
            "epsilon": args.epsilon,
            "samples": args.samples,
        },
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    provider, _ = _resolve_provider(args)
    records = _resolve_records(args)
    _check_vocabulary(records, provider)
    policy = DecodingPolicy(k=args.top_k, beta=args.temperature)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in records:
        mass = oracle_exact_mass(
            provider, rec.prefix, rec.suffix, policy, _DIST[args.dist], args.epsilon,
            max_leaves=args.max_leaves,
        )
        rows.append({"id": rec.id, "oracle_mass": mass})
    corpus_io.save_results(outdir / "oracle.jsonl", rows, {"kind": "oracle"})
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    table = []
    for value in values:
        sub_args = argparse.Namespace(**vars(args))
        if args.param == "beam-width":
            sub_args.beam_width = value
        else:
            sub_args.epsilon = value
        sub_args.out = str(outdir / f"{args.param}_{value}")
        started = time.perf_counter()
        code = cmd_run(sub_args)
        elapsed = time.perf_counter() - started
        if code != EXIT_OK:
            return code
        summary = json.loads((Path(sub_args.out) / "summary.json").read_text())
        eps_top = len(summary["rates_probabilistic"]) - 1
        results = [
            _row_to_result(r) for r in corpus_io.load_results(Path(sub_args.out) / "results.jsonl")[1]
        ]
        table.append(
            {
                "value": value,
                "rate_at_epsilon_max": summary["rates_probabilistic"][eps_top],
                "mean_mass": sum(r.nearverbatim_mass[-1] for r in results) / len(results),
                "total_token_evals": summary["cost"]["total_token_evals"],
                "runtime_seconds": elapsed,
            }
        )
    _json_dump(outdir / "sweep.json", {"param": args.param, "rows": table})
    with open(outdir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# sweep {args.param}={args.values}\n")
        w = csv.writer(fh)
        w.writerow(["value", "rate_at_epsilon_max", "mean_mass", "total_token_evals",
                    "runtime_seconds"])
        for row in table:
            w.writerow([row["value"], row["rate_at_epsilon_max"], row["mean_mass"],
                        row["total_token_evals"], row["runtime_seconds"]])
    return EXIT_OK


def cmd_samplesize(args) -> int:
    if (args.delta is None) == (args.eta is None):
        raise ConfigError("pass exactly one of DELTA or --eta")
    if args.delta is not None:
        m = mc_detection_sample_size(args.p, args.delta)
        doc = {"kind": "detection", "p": args.p, "delta": args.delta, "samples": m}
    else:
        m = mc_relse_sample_size(args.p, args.eta)
        doc = {"kind": "relative_se", "p": args.p, "eta": args.eta, "samples": m}
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "mc": cmd_mc,
    "oracle": cmd_oracle,
    "sweep": cmd_sweep,
    "samplesize": cmd_samplesize,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError, corpus_io.SchemaVersionError,
            corpus_io.MalformedLineError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleGuardError as exc:
        print(f"guard refusal: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ProviderFailure, remote.RemoteProviderError) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
