import json
import math
import random

import pytest

from extraction_audit.cli import EXIT_CONFIG, EXIT_GUARD, EXIT_OK, main
from extraction_audit.corpus import SequenceRecord, load_results, save_records
from extraction_audit.metrics import SequenceResult, extraction_rate, success_probabilistic


@pytest.fixture
def workspace(tmp_path):
    """Synthetic model file + 10-record corpus with a planted sequence."""
    rng = random.Random(99)
    corpus = [[rng.randrange(6) for _ in range(10)] for _ in range(20)]
    planted_records = []
    records = []
    for i in range(10):
        prefix = tuple(rng.randrange(6) for _ in range(3))
        suffix = tuple(rng.randrange(6) for _ in range(4))
        if i < 3:
            planted_records.append({"tokens": list(prefix + suffix), "weight": 60.0})
        records.append(
            SequenceRecord(id=f"s{i:02d}", prefix=prefix, suffix=suffix, source="synthetic")
        )
    model_doc = {
        "type": "ngram",
        "vocab_size": 6,
        "eos_id": None,
        "order": 2,
        "corpus": corpus,
        "planted": planted_records,
    }
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(model_doc))
    records_path = tmp_path / "records.jsonl"
    save_records(records_path, records)
    return tmp_path, model_path, records_path


def run_args(model_path, records_path, out, **extra):
    args = [
        "run",
        "--provider", str(model_path),
        "--corpus", str(records_path),
        "--top-k", "3",
        "--beam-width", "4",
        "--epsilon", "2",
        "--epsilon-max", "2",
        "--no-tau-min",
        "--out", str(out),
    ]
    for key, value in extra.items():
        args.extend([f"--{key}", str(value)])
    return args


class TestRun:
    def test_produces_results_and_summary(self, workspace):
        tmp, model, records = workspace
        out = tmp / "out"
        assert main(run_args(model, records, out)) == EXIT_OK
        header, rows = load_results(out / "results.jsonl")
        assert len(rows) == 10
        assert header["config_hash"]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_sequences"] == 10
        assert (out / "rates.csv").exists()
        assert (out / "ccdf.csv").exists()
        assert (out / "shell_shares.csv").exists()

    def test_rerun_is_bit_identical(self, workspace):
        tmp, model, records = workspace
        out1, out2 = tmp / "a", tmp / "b"
        assert main(run_args(model, records, out1)) == EXIT_OK
        assert main(run_args(model, records, out2)) == EXIT_OK
        for name in ("results.jsonl", "summary.json", "rates.csv", "ccdf.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_summary_rates_match_offline_recomputation(self, workspace):
        tmp, model, records = workspace
        out = tmp / "out"
        main(run_args(model, records, out))
        _, rows = load_results(out / "results.jsonl")
        results = [
            SequenceResult(
                id=r["id"],
                verbatim_mass=r["verbatim_mass"],
                nearverbatim_mass=tuple(r["nearverbatim_mass"]),
                greedy_distance=r["greedy_distance"],
                token_evals=r["token_evals"],
            )
            for r in rows
        ]
        summary = json.loads((out / "summary.json").read_text())
        tau = summary["tau_min"]
        for eps in range(3):
            want = extraction_rate(
                results, lambda r, e=eps: success_probabilistic(r.nearverbatim_mass[e], tau)
            )
            assert math.isclose(summary["rates_probabilistic"][eps], want, abs_tol=1e-12)

    def test_resume_from_partial_checkpoint(self, workspace):
        tmp, model, records = workspace
        out = tmp / "out"
        main(run_args(model, records, out))
        full = (out / "results.jsonl").read_bytes()
        lines = full.splitlines(keepends=True)
        (out / "results.jsonl").write_bytes(b"".join(lines[:4]))  # header + 3 rows
        assert main(run_args(model, records, out)) == EXIT_OK
        assert (out / "results.jsonl").read_bytes() == full

    def test_checkpoint_config_mismatch_is_config_error(self, workspace):
        tmp, model, records = workspace
        out = tmp / "out"
        main(run_args(model, records, out))
        code = main(run_args(model, records, out, **{"beam-width": 5}))
        assert code == EXIT_CONFIG

    def test_pruned_variants(self, workspace):
        tmp, model, records = workspace
        for variant in ("ham", "lev"):
            out = tmp / f"out_{variant}"
            assert main(run_args(model, records, out, variant=variant)) == EXIT_OK
            _, rows = load_results(out / "results.jsonl")
            for r in rows:
                masses = r["nearverbatim_mass"]
                assert len(masses) == 3
                assert masses == sorted(masses)

    def test_workers_do_not_change_output(self, workspace):
        tmp, model, records = workspace
        out1, out2 = tmp / "w1", tmp / "w4"
        main(run_args(model, records, out1))
        main(run_args(model, records, out2, workers=4))
        a = (out1 / "results.jsonl").read_text().splitlines()[1:]
        b = (out2 / "results.jsonl").read_text().splitlines()[1:]
        assert a == b

    def test_missing_provider_is_config_error(self, workspace):
        tmp, _, records = workspace
        code = main(["run", "--corpus", str(records), "--out", str(tmp / "x")])
        assert code == EXIT_CONFIG

    def test_remote_without_endpoint_is_config_error(self, workspace, monkeypatch):
        tmp, _, records = workspace
        monkeypatch.delenv("EXTRACTION_AUDIT_ENDPOINT", raising=False)
        code = main(
            ["run", "--provider", "remote", "--corpus", str(records),
             "--out", str(tmp / "x")]
        )
        assert code == EXIT_CONFIG

    def test_endpoint_env_var_is_consumed(self, workspace, monkeypatch):
        from extraction_audit.cli import EXIT_PROVIDER

        tmp, _, records = workspace
        # An unreachable endpoint from the env var must surface as a
        # provider error, proving the variable was read.
        monkeypatch.setenv("EXTRACTION_AUDIT_ENDPOINT", "http://127.0.0.1:9")
        code = main(
            ["run", "--provider", "remote", "--corpus", str(records),
             "--out", str(tmp / "x")]
        )
        assert code == EXIT_PROVIDER

    def test_out_of_vocab_corpus_is_config_error(self, workspace, tmp_path):
        tmp, model, _ = workspace
        text_path = tmp_path / "book.txt"
        text_path.write_text("abcab " * 60)
        code = main(
            [
                "run",
                "--provider", str(model),
                "--text", str(text_path),
                "--tokenizer", "byte",
                "--stride", "30",
                "--prefix-len", "4",
                "--suffix-len", "3",
                "--top-k", "3",
                "--beam-width", "3",
                "--epsilon-max", "1",
                "--no-tau-min",
                "--out", str(tmp_path / "out"),
            ]
        )
        # Byte tokens exceed the 6-token model vocabulary.
        assert code == EXIT_CONFIG

    def test_text_mode_chunks_on_the_fly(self, tmp_path):
        rng = random.Random(4)
        model_doc = {
            "type": "ngram",
            "vocab_size": 256,
            "eos_id": None,
            "order": 2,
            "corpus": [[rng.randrange(97, 102) for _ in range(12)] for _ in range(8)],
        }
        model_path = tmp_path / "byte_model.json"
        model_path.write_text(json.dumps(model_doc))
        text_path = tmp_path / "book.txt"
        text_path.write_text("abcab " * 60)
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--provider", str(model_path),
                "--text", str(text_path),
                "--tokenizer", "byte",
                "--stride", "30",
                "--prefix-len", "4",
                "--suffix-len", "3",
                "--top-k", "3",
                "--beam-width", "3",
                "--epsilon-max", "1",
                "--no-tau-min",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        _, rows = load_results(out / "results.jsonl")
        assert rows
        # Text-mode records carry character spans, so the heatmap is emitted.
        summary = json.loads((out / "summary.json").read_text())
        assert "heatmap" in summary
        assert (out / "heatmap.csv").exists()


class TestDefaults:
    def test_parser_defaults_match_validated_setting(self):
        # B=20, k=40, eps=5, tau_min=0.001, 50/50 split, stride 20.
        from extraction_audit.cli import build_parser

        args = build_parser().parse_args(["run", "--out", "x"])
        assert args.beam_width == 20
        assert args.top_k == 40
        assert args.epsilon == 5
        assert args.tau_min == 0.001
        assert args.prefix_len == 50
        assert args.suffix_len == 50
        assert args.stride == 20
        assert args.temperature == 1.0

    def test_csvs_embed_config_hash(self, workspace):
        tmp, model, records = workspace
        out = tmp / "out"
        main(run_args(model, records, out))
        summary = json.loads((out / "summary.json").read_text())
        for name in ("rates.csv", "ccdf.csv", "shell_shares.csv"):
            first = (out / name).read_text().splitlines()[0]
            assert first == f"# config_hash={summary['config_hash']}"


class TestOtherCommands:
    def test_samplesize_detection(self, capsys):
        assert main(["samplesize", "1e-3", "0.05"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["samples"] == 2995

    def test_samplesize_relse(self, capsys):
        assert main(["samplesize", "1e-3", "--eta", "0.1"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["samples"] == 99900

    def test_samplesize_needs_exactly_one_mode(self):
        assert main(["samplesize", "1e-3"]) == EXIT_CONFIG
        assert main(["samplesize", "1e-3", "0.05", "--eta", "0.1"]) == EXIT_CONFIG

    def test_mc_command(self, workspace):
        tmp, model, records = workspace
        out = tmp / "mc"
        code = main(
            [
                "mc",
                "--provider", str(model),
                "--corpus", str(records),
                "--top-k", "3",
                "--samples", "200",
                "--epsilon", "1",
                "--seed", "5",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        _, rows = load_results(out / "mc.jsonl")
        assert len(rows) == 10
        for r in rows:
            assert 0 <= r["ci_low"] <= r["p_hat"] <= r["ci_high"] <= 1

    def test_oracle_matches_run_lower_bound(self, workspace):
        tmp, model, records = workspace
        run_out, oracle_out = tmp / "run", tmp / "oracle"
        main(run_args(model, records, run_out, variant="lev"))
        code = main(
            [
                "oracle",
                "--provider", str(model),
                "--corpus", str(records),
                "--top-k", "3",
                "--dist", "lev",
                "--epsilon", "2",
                "--out", str(oracle_out),
            ]
        )
        assert code == EXIT_OK
        _, oracle_rows = load_results(oracle_out / "oracle.jsonl")
        _, run_rows = load_results(run_out / "results.jsonl")
        oracle_by_id = {r["id"]: r["oracle_mass"] for r in oracle_rows}
        for r in run_rows:
            assert r["lower_bound"] <= oracle_by_id[r["id"]] + 1e-9

    @pytest.mark.filterwarnings("ignore:beam width")
    def test_oracle_equals_run_lb_when_no_pruning(self, workspace):
        # Beam wide enough that the across-beam prune never fires: the run's
        # lower bound is the exact mass.
        tmp, model, records = workspace
        run_out, oracle_out = tmp / "runwide", tmp / "oraclewide"
        main(run_args(model, records, run_out, variant="lev", **{"beam-width": 81}))
        main(
            [
                "oracle",
                "--provider", str(model),
                "--corpus", str(records),
                "--top-k", "3",
                "--dist", "lev",
                "--epsilon", "2",
                "--out", str(oracle_out),
            ]
        )
        _, oracle_rows = load_results(oracle_out / "oracle.jsonl")
        _, run_rows = load_results(run_out / "results.jsonl")
        oracle_by_id = {r["id"]: r["oracle_mass"] for r in oracle_rows}
        for r in run_rows:
            assert math.isclose(r["lower_bound"], oracle_by_id[r["id"]], abs_tol=1e-9)

    def test_oracle_guard_refusal(self, workspace, tmp_path):
        tmp, model, records = workspace
        code = main(
            [
                "oracle",
                "--provider", str(model),
                "--corpus", str(records),
                "--top-k", "3",
                "--max-leaves", "2",
                "--out", str(tmp_path / "o"),
            ]
        )
        assert code == EXIT_GUARD

    def test_sweep_emits_tables(self, workspace):
        tmp, model, records = workspace
        out = tmp / "sweep"
        code = main(
            [
                "sweep",
                "--provider", str(model),
                "--corpus", str(records),
                "--top-k", "3",
                "--beam-width", "4",
                "--epsilon", "2",
                "--epsilon-max", "2",
                "--no-tau-min",
                "--param", "beam-width",
                "--values", "2,4",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        sweep = json.loads((out / "sweep.json").read_text())
        assert [row["value"] for row in sweep["rows"]] == [2, 4]
        assert (out / "sweep.csv").exists()
        for row in sweep["rows"]:
            assert row["total_token_evals"] > 0
            assert row["runtime_seconds"] >= 0
