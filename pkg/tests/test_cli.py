"""End-to-end command flows against the bundled fixture corpus."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from layoutqa.cli import run
from layoutqa.evaluation import read_qa_dataset
from layoutqa.store import STORE_FILES, load_store

QUESTION = "What reduced withholding rate applies to qualifying noteholders?"


@pytest.fixture()
def config_path(fixtures_dir) -> str:
    return str(fixtures_dir / "mock_config.json")


@pytest.fixture()
def store_dir(tmp_path, fixtures_dir, config_path) -> Path:
    store = tmp_path / "store"
    code = run(
        [
            "ingest",
            "--layout",
            str(fixtures_dir / "layout.jsonl"),
            "--store",
            str(store),
            "--parent-size",
            "120",
            "--child-size",
            "48",
            "--config",
            config_path,
        ]
    )
    assert code == 0
    return store


class TestIngest:
    def test_store_contains_all_files(self, store_dir):
        assert sorted(p.name for p in store_dir.iterdir()) == sorted(STORE_FILES)
        bundle = load_store(store_dir)
        assert bundle.manifest.parameters["chunking"] == "layout"
        assert bundle.manifest.n_children == len(bundle.children)

    def test_naive_mode_recorded_in_manifest(self, tmp_path, fixtures_dir, config_path):
        store = tmp_path / "naive"
        code = run(
            [
                "ingest",
                "--layout",
                str(fixtures_dir / "layout.jsonl"),
                "--store",
                str(store),
                "--chunking",
                "naive",
                "--config",
                config_path,
            ]
        )
        assert code == 0
        assert load_store(store).manifest.parameters["chunking"] == "naive"

    def test_missing_layout_file_is_operational_error(self, tmp_path, config_path, capsys):
        code = run(
            ["ingest", "--layout", "no_such.jsonl", "--store", str(tmp_path / "s"), "--config", config_path]
        )
        assert code == 1
        assert "no_such.jsonl" in capsys.readouterr().err


class TestQuery:
    def test_prints_stripped_answer(self, store_dir, config_path, capsys):
        code = run(["query", "--store", str(store_dir), "--config", config_path, QUESTION])
        assert code == 0
        out = capsys.readouterr().out
        assert "4.2 percent" in out
        assert "<answer>" not in out

    def test_json_output_is_machine_readable(self, store_dir, config_path, capsys):
        code = run(["query", "--store", str(store_dir), "--config", config_path, "--json", QUESTION])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["question"] == QUESTION
        assert "4.2 percent" in record["answer"]
        assert record["child_ids"]

    def test_rewrites_flag_zero_disables_rewriter(self, store_dir, config_path, capsys):
        code = run(
            ["query", "--store", str(store_dir), "--config", config_path, "--rewrites", "0", "--json", QUESTION]
        )
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["rewrites"] == []
        assert len(record["rankings"]) == 2

    def test_missing_store_is_operational_error(self, tmp_path, config_path):
        assert run(["query", "--store", str(tmp_path / "nope"), "--config", config_path, QUESTION]) == 1


class TestEval:
    def test_report_written_and_deterministic(self, store_dir, fixtures_dir, config_path, tmp_path, capsys):
        args = [
            "eval",
            "--store",
            str(store_dir),
            "--qa",
            str(fixtures_dir / "qa.jsonl"),
            "--config",
            config_path,
        ]
        assert run(args + ["--out", str(tmp_path / "r1.json")]) == 0
        assert run(args + ["--out", str(tmp_path / "r2.json")]) == 0
        first = (tmp_path / "r1.json").read_bytes()
        second = (tmp_path / "r2.json").read_bytes()
        assert hashlib.sha256(first).hexdigest() == hashlib.sha256(second).hexdigest()
        report = json.loads(first)
        assert report["counts"]["total"] == 2
        assert report["failures"] == []

    def test_missing_qa_file_names_path(self, store_dir, config_path, tmp_path, capsys):
        code = run(
            [
                "eval",
                "--store",
                str(store_dir),
                "--qa",
                "missing.jsonl",
                "--out",
                str(tmp_path / "r.json"),
                "--config",
                config_path,
            ]
        )
        assert code == 1
        assert "missing.jsonl" in capsys.readouterr().err


class TestSynthCommand:
    def test_writes_budgeted_pairs_compatible_with_eval_reader(
        self, fixtures_dir, config_path, tmp_path
    ):
        out = tmp_path / "synth.jsonl"
        code = run(
            [
                "synth",
                "--layout",
                str(fixtures_dir / "layout.jsonl"),
                "--budget",
                "6",
                "--out",
                str(out),
                "--k",
                "2",
                "--n",
                "2",
                "--seed",
                "0",
                "--config",
                config_path,
            ]
        )
        assert code == 0
        rows = read_qa_dataset(out)  # evaluator schema round-trip
        assert len(rows) == 6
        assert all(row["doc_id"] == "d1" for row in rows)

    def test_seeded_determinism(self, fixtures_dir, config_path, tmp_path):
        outputs = []
        for name in ("a.jsonl", "b.jsonl"):
            run(
                [
                    "synth",
                    "--layout",
                    str(fixtures_dir / "layout.jsonl"),
                    "--budget",
                    "4",
                    "--out",
                    str(tmp_path / name),
                    "--k",
                    "2",
                    "--n",
                    "2",
                    "--seed",
                    "7",
                    "--config",
                    config_path,
                ]
            )
            outputs.append((tmp_path / name).read_bytes())
        assert outputs[0] == outputs[1]


class TestFilterRewritesCommand:
    def test_retention_counts_match_output_file(
        self, store_dir, fixtures_dir, config_path, tmp_path, capsys
    ):
        out = tmp_path / "retained.jsonl"
        code = run(
            [
                "filter-rewrites",
                "--pairs",
                str(fixtures_dir / "rewrite_pairs.jsonl"),
                "--store",
                str(store_dir),
                "--out",
                str(out),
                "--config",
                config_path,
            ]
        )
        assert code == 0
        printed = capsys.readouterr().out
        written = [l for l in out.read_text().splitlines() if l.strip()]
        assert f"retained {len(written)} of 4 pairs" in printed
        assert len(written) == 2  # the two genuinely improving pairs


class TestUsageErrors:
    def test_unknown_subcommand_exits_two(self, capsys):
        assert run(["bogus"]) == 2

    def test_unknown_flag_exits_two(self, capsys):
        assert run(["ingest", "--nope"]) == 2

    def test_no_arguments_exits_two(self, capsys):
        assert run([]) == 2
