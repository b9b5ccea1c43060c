from __future__ import annotations

import json

import pytest

from apitrail.cli import main, make_parser

from conftest import FIXTURES


def fixture_args(out, extra=()):
    return [
        "--doc-pool", str(FIXTURES / "doc_pool.jsonl"),
        "--benchmark-dir", str(FIXTURES / "benchmark"),
        "--library-overview", str(FIXTURES / "library_overview.md"),
        "--planner-examples", str(FIXTURES / "planner_examples.json"),
        "--backend", "mock",
        "--mock-script", str(FIXTURES / "mock_script.json"),
        "--samples", "2",
        "--seed", "7",
        "--k", "1,2",
        "-o", str(out),
        *extra,
    ]


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory, capsys_factory=None):
    out = tmp_path_factory.mktemp("cli_out")
    code = main(["run", *fixture_args(out)])
    assert code == 0
    return out


class TestParser:
    def test_all_subcommands_exist(self):
        parser = make_parser()
        for command in ["ingest", "plan", "recommend", "explore", "solve",
                        "eval", "bench", "run", "inspect"]:
            args = parser.parse_args(
                [command] + (["--problem", "x"] if command in
                             ("plan", "recommend", "explore", "solve") else [])
                + (["load"] if command == "bench" else [])
                + (["config"] if command == "inspect" else [])
            )
            assert args.command == command

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            make_parser().parse_args(["--version"])
        assert exc.value.code == 0


class TestStageCommands:
    def test_run_then_inspect_trace(self, cli_run, capsys):
        code = main(["inspect", "trace", "--problem", "fx-001", "-o", str(cli_run)])
        captured = capsys.readouterr()
        assert code == 0
        assert "fx-001" in captured.out
        assert "step 1" in captured.out

    def test_inspect_missing_trace_not_found(self, tmp_path, capsys):
        code = main(["inspect", "trace", "--problem", "ghost", "-o", str(tmp_path)])
        captured = capsys.readouterr()
        assert code == 2
        assert "error" in captured.err

    def test_inspect_config_dumps_defaults(self, capsys):
        code = main(["inspect", "config"])
        captured = capsys.readouterr()
        assert code == 0
        effective = json.loads(captured.out)
        assert effective["explore"]["candidates_per_subtask"] == 5
        assert effective["retrieval"]["k"] == 20
        assert effective["backend_cfg"]["temperature"] == 0.8
        assert effective["backend_cfg"]["top_p"] == 0.95
        assert "config_hash" in effective

    def test_plan_emits_numbered_lines(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["plan", "--problem", "fx-001", *fixture_args(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.startswith("1. ")

    def test_recommend_dumps_sets(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["recommend", "--problem", "fx-002", *fixture_args(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert "initial:" in captured.out
        assert "refined:" in captured.out
        assert "global:" in captured.out

    def test_eval_reads_solutions_dir(self, cli_run, capsys):
        code = main([
            "eval", "--solutions", str(cli_run / "solutions"), *fixture_args(cli_run)
        ])
        captured = capsys.readouterr()
        assert code == 0
        assert "pass" in captured.out and "k=1" in captured.out


class TestBenchCommands:
    def test_bench_load(self, tmp_path, capsys):
        code = main(["bench", "load", *fixture_args(tmp_path / "o")])
        captured = capsys.readouterr()
        assert code == 0
        assert "6 problems" in captured.out

    def test_bench_stats(self, tmp_path, capsys):
        code = main(["bench", "stats", *fixture_args(tmp_path / "o")])
        captured = capsys.readouterr()
        assert code == 0
        assert "APIs per problem" in captured.out

    def test_bench_verify_all_pass(self, tmp_path, capsys):
        code = main(["bench", "verify", *fixture_args(tmp_path / "o")])
        captured = capsys.readouterr()
        assert code == 0
        assert "6/6 canonical solutions pass" in captured.out


class TestToggles:
    def test_no_coae_produces_empty_trace(self, tmp_path, capsys):
        out = tmp_path / "nc"
        code = main(["run", *fixture_args(out, extra=["--no-coae"])])
        assert code == 0
        trace = json.loads((out / "traces" / "fx-001.json").read_text())
        assert trace["entries"] == []

    def test_bad_config_is_clean_error(self, tmp_path, capsys):
        code = main(["run", "--doc-pool", "/nonexistent.jsonl", "-o", str(tmp_path)])
        captured = capsys.readouterr()
        assert code == 2 or code == 1
