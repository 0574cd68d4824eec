"""Command-line dispatch, exit codes, config files and report output."""

import json

import pytest

from hamtest.cli import run_cli
from hamtest.harness import SUMMARY_FIELDS, read_jsonl


class TestDispatch:
    def test_verify(self, capsys):
        assert run_cli(["verify", "--n", "2"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5

    def test_verify_fixture(self, fixtures_dir):
        assert run_cli(["verify", "--fixture", str(fixtures_dir / "mub_n2.txt")]) == 0

    def test_verify_needs_source(self, capsys):
        assert run_cli(["verify"]) == 2

    def test_build_mub_matches_fixture(self, fixtures_dir, tmp_path):
        out = tmp_path / "mub.txt"
        assert run_cli(["build-mub", "--n", "2", "--out", str(out)]) == 0
        assert out.read_text() == (fixtures_dir / "mub_n2.txt").read_text()

    def test_test_subcommand(self, capsys, tmp_path):
        csv_path = tmp_path / "s.csv"
        code = run_cli(["test", "--n", "3", "--k", "2", "--eps", "0.6", "--hypothesis", "null",
                        "--trials", "4", "--seed", "7", "--csv", str(csv_path)])
        assert code == 0
        assert "accept(H0)=1.0000" in capsys.readouterr().out
        assert csv_path.read_text().splitlines()[0].split(",") == list(SUMMARY_FIELDS)

    def test_tolerant_and_ancilla(self, capsys):
        assert run_cli(["tolerant", "--n", "2", "--k", "1", "--eps1", "0.05", "--eps2", "0.9",
                        "--hypothesis", "far", "--trials", "2"]) == 0
        assert run_cli(["ancilla-test", "--n", "2", "--k", "1", "--eps", "0.5", "--trials", "1"]) == 2
        assert "dense cap" in capsys.readouterr().err

    def test_multi_test(self, capsys, tmp_path):
        out = tmp_path / "m.jsonl"
        assert run_cli(["multi-test", "--n", "3", "--k-list", "1,2", "--eps", "0.9", "--trials", "2",
                        "--jsonl", str(out)]) == 0
        assert [r["trial"] for r in read_jsonl(out)] == [0, 1]

    def test_sweep(self, tmp_path, capsys):
        grid = tmp_path / "grid.jsonl"
        grid.write_text(json.dumps({"n": 2, "k": 1, "eps": 0.6, "hypothesis": "far", "trials": 2}) + "\n")
        out = tmp_path / "t.jsonl"
        assert run_cli(["sweep", "--grid", str(grid), "--jsonl", str(out)]) == 0
        assert len(read_jsonl(out)) == 2

    def test_gadget_and_norm_probe(self, capsys):
        assert run_cli(["gadget-stats", "--n", "2", "--samples", "2000", "--seed", "1"]) == 0
        assert run_cli(["norm-probe", "--pairs", "1", "--seed", "2"]) == 0

    def test_haar_moments(self, capsys):
        assert run_cli(["haar-moments", "--d", "4", "--samples", "4000", "--seed", "3"]) == 0
        assert capsys.readouterr().out.count("PASS") == 11


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv",
        [["bogus"], ["test", "--n", "3"], ["test", "--n", "3", "--eps", "2.0", "--k", "1"], ["verify", "--n", "x"], []],
    )
    def test_usage_errors(self, argv, capsys):
        assert run_cli(argv) == 2

    def test_help_is_success(self, capsys):
        assert run_cli(["--help"]) == 0

    def test_failed_check_exits_one(self, tmp_path, capsys):
        # Two Hamiltonians whose difference has an asymmetric spectrum, probed at coarse times
        # where the two-point extrapolation cannot reach 5% accuracy.
        h = tmp_path / "h.txt"
        h.write_text("n 1\nZ 1.0\n")
        g = tmp_path / "g.txt"
        g.write_text("n 1\nX 1.0\n")
        assert run_cli(["norm-probe", "--h", str(h), "--h2", str(g), "--times", "2.0,1.5"]) == 1


class TestConfig:
    def test_config_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# defaults\nn = 3\neps = 0.6\nk = 2\ntrials = 5\n")
        assert run_cli(["--config", str(cfg), "test", "--trials", "2"]) == 0
        assert "trials=2" in capsys.readouterr().out

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        assert run_cli(["--config", str(cfg), "verify", "--n", "1"]) == 2

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n")
        assert run_cli(["--config", str(cfg), "verify", "--n", "1"]) == 2

    def test_seed_from_environment(self, monkeypatch, tmp_path, capsys):
        monkeypatch.setenv("HAMTEST_SEED", "11")
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_cli(["test", "--n", "2", "--k", "1", "--eps", "0.6", "--hypothesis", "far", "--trials", "2", "--jsonl", str(a)])
        run_cli(["test", "--n", "2", "--k", "1", "--eps", "0.6", "--hypothesis", "far", "--trials", "2",
                 "--seed", "11", "--jsonl", str(b)])
        assert a.read_bytes() == b.read_bytes()
