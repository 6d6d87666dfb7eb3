"""End-to-end tests of the command line front end via subprocess.

Each invocation runs ``python -m forrlab.cli`` in a clean process so exit
codes, stdout bytes, and environment handling are tested exactly as a user
sees them.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

import forrlab.diffusion as diff
import forrlab.forrelation as forr


def run_cli(*argv, env=None):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "forrlab.cli", *argv],
        capture_output=True,
        text=True,
        env=full_env,
    )


def report_of(proc):
    assert proc.stdout, proc.stderr
    return json.loads(proc.stdout)


class TestPhiAndAccept:
    def test_phi_trivial_instance(self):
        proc = run_cli("phi", "--n", "1", "--x", "1", "--y", "1")
        assert proc.returncode == 0
        assert proc.stdout == '{"phi": 1.0}\n'

    def test_phi_matches_library(self):
        proc = run_cli("phi", "--x=1,1,-1,1", "--y=1,1,1,-1")
        assert proc.returncode == 0
        expected = forr.phi([1, 1, -1, 1], [1, 1, 1, -1])
        assert report_of(proc)["phi"] == expected

    def test_phi_length_mismatch_is_usage_error(self):
        proc = run_cli("phi", "--n", "2", "--x", "1", "--y", "1,1")
        assert proc.returncode == 64
        assert proc.stdout == ""
        assert "error" in proc.stderr

    def test_phi_non_power_of_two_is_usage_error(self):
        proc = run_cli("phi", "--x=1,1,1", "--y=1,1,1")
        assert proc.returncode == 64

    def test_accept_reports_law_and_shots(self):
        proc = run_cli("accept", "--x=1,-1", "--y=1,1", "--shots", "200", "--seed", "4")
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["accept_probability"] == (1.0 + doc["phi"]) / 2.0
        assert 0.0 <= doc["sampled_acceptance"] <= 1.0

    def test_accept_rejects_non_sign_input(self):
        proc = run_cli("accept", "--x=0.5,1", "--y=1,1")
        assert proc.returncode == 64


class TestUsageErrors:
    def test_unknown_subcommand(self):
        proc = run_cli("frobnicate")
        assert proc.returncode == 64
        assert proc.stdout == ""

    def test_unknown_flag(self):
        proc = run_cli("phi", "--x", "1", "--y", "1", "--frobnicate")
        assert proc.returncode == 64

    def test_missing_model_is_usage_error(self):
        proc = run_cli("sample")
        assert proc.returncode == 64
        assert proc.stdout == ""

    def test_dim_requires_gamma(self):
        proc = run_cli("sample", "--dim", "4", "--samples", "10")
        assert proc.returncode == 64

    def test_invalid_n(self):
        proc = run_cli("verify-prop", "--n", "3", "--samples", "10")
        assert proc.returncode == 64
        assert proc.stdout == ""

    def test_unreadable_function_file(self, tmp_path):
        proc = run_cli(
            "verify-main",
            "--function",
            str(tmp_path / "missing.json"),
            "--samples",
            "10",
        )
        assert proc.returncode == 64
        assert proc.stdout == ""

    def test_bad_seed_env(self):
        proc = run_cli(
            "verify-lemma", "--vars", "2", "--functions", "1", "--anchors", "1",
            env={"FORRLAB_SEED": "not-a-number"},
        )
        assert proc.returncode == 64


class TestVerifySubcommands:
    def test_verify_lemma_passes(self):
        proc = run_cli(
            "verify-lemma", "--vars", "3", "--functions", "4", "--anchors", "3",
            "--seed", "2", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["verdict"] == "pass"
        assert doc["max_residual"] < 1e-9
        assert doc["samples"] == 12

    def test_verify_dynkin_bare_defaults(self):
        proc = run_cli(
            "verify-dynkin", "--samples", "1500", "--dt-div", "64",
            "--seed", "6", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["dim"] == 2
        assert doc["epsilon"] == 0.05
        assert doc["verdict"] == "pass"

    def test_verify_dynkin_triples_dump(self, tmp_path):
        out = tmp_path / "triples.csv"
        proc = run_cli(
            "verify-dynkin", "--samples", "200", "--dt-div", "32",
            "--seed", "6", "--dump-triples", str(out),
        )
        assert proc.returncode == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "tau,f_x_tau,accumulator"
        assert len(lines) == 201

    def test_verify_main_bare_defaults(self):
        proc = run_cli(
            "verify-main", "--samples", "1500", "--dt-div", "64",
            "--seed", "8", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["dim"] == 4
        assert doc["gamma"] == 0.2
        assert doc["verdict"] == "pass"

    def test_verify_main_inline_truth_table(self):
        proc = run_cli(
            "verify-main", "--dim", "2", "--gamma", "0.5",
            "--truth-table=1,-1,-1,1", "--samples", "1500",
            "--dt-div", "64", "--seed", "8", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["t_level2"] == 1.0

    def test_verify_main_function_file(self, tmp_path):
        path = tmp_path / "f.json"
        path.write_text(json.dumps({"n": 2, "coeffs": [0.0, 0.0, 0.0, 1.0]}))
        proc = run_cli(
            "verify-main", "--dim", "2", "--gamma", "0.5", "--function", str(path),
            "--samples", "1500", "--dt-div", "64", "--seed", "8", "--no-timestamp",
        )
        assert proc.returncode == 0
        assert report_of(proc)["t_level2"] == 1.0

    def test_verify_prop_small_instance(self):
        proc = run_cli(
            "verify-prop", "--n", "4", "--samples", "4000", "--dt-div", "128",
            "--seed", "3", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["verdict"] == "pass"
        assert doc["mean_phi"] >= doc["bound_eps_over_4"]

    def test_advantage_with_rounding(self):
        proc = run_cli(
            "advantage", "--n", "4", "--samples", "4000", "--dt-div", "128",
            "--rounded", "--seed", "3", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["verdict"] == "pass"
        assert "mean_phi_rounded" in doc


class TestSampleSubcommand:
    def test_csv_dump_round_trips(self, tmp_path):
        out = tmp_path / "paths.csv"
        proc = run_cli(
            "sample", "--n", "2", "--samples", "60", "--dt-div", "32",
            "--seed", "12", "--dump-paths", str(out), "--bits", "--no-timestamp",
        )
        assert proc.returncode == 0
        header, batch, bits = diff.load_paths_csv(str(out))
        assert header["dim"] == 4
        assert header["seed"] == 12
        assert len(batch) == 60
        assert bits.shape == (60, 4)
        assert np.isin(bits, [-1, 1]).all()

    def test_report_written_to_file(self, tmp_path):
        out = tmp_path / "report.json"
        proc = run_cli(
            "sample", "--dim", "2", "--gamma", "0.3", "--samples", "40",
            "--dt-div", "32", "--seed", "1", "--out", str(out), "--no-timestamp",
        )
        assert proc.returncode == 0
        assert proc.stdout == ""
        doc = json.loads(out.read_text())
        assert doc["name"] == "sample"
        assert doc["dim"] == 2


class TestReproducibility:
    def test_rerun_is_byte_identical(self):
        argv = (
            "verify-prop", "--n", "2", "--samples", "2000", "--dt-div", "64",
            "--seed", "42", "--no-timestamp",
        )
        a = run_cli(*argv)
        b = run_cli(*argv)
        assert a.returncode == 0
        assert a.stdout == b.stdout
        assert a.stdout

    def test_timestamp_breaks_byte_identity_but_not_values(self):
        argv = ("verify-lemma", "--vars", "2", "--functions", "2", "--anchors", "2", "--seed", "5")
        a = report_of(run_cli(*argv))
        b = report_of(run_cli(*argv))
        assert "timestamp" in a
        a.pop("timestamp"), b.pop("timestamp")
        a.pop("wall_time_s"), b.pop("wall_time_s")
        assert a == b

    def test_env_seed_matches_flag_seed(self):
        argv = ("sample", "--n", "2", "--samples", "30", "--dt-div", "32", "--no-timestamp")
        via_env = run_cli(*argv, env={"FORRLAB_SEED": "123"})
        via_flag = run_cli(*argv, "--seed", "123")
        assert via_env.returncode == 0
        assert via_env.stdout == via_flag.stdout

    def test_worker_count_does_not_change_estimates(self):
        argv = (
            "verify-prop", "--n", "2", "--samples", "2000", "--dt-div", "64",
            "--seed", "9", "--no-timestamp",
        )
        one = run_cli(*argv, "--workers", "1", env={"NUMBA_NUM_THREADS": "2"})
        two = run_cli(*argv, "--workers", "2", env={"NUMBA_NUM_THREADS": "2"})
        assert one.returncode == 0
        assert one.stdout == two.stdout


class TestSweep:
    def test_arithmetic_only_profile(self):
        proc = run_cli("sweep", "--n", "4..16", "--samples", "0", "--no-timestamp")
        assert proc.returncode == 0
        doc = report_of(proc)
        rows = doc["rows"]
        assert [r["n"] for r in rows] == [4, 8, 16]
        for r in rows:
            assert r["bound"] == pytest.approx(0.25 / np.sqrt(r["n"]), rel=1e-12)
            assert "mean_phi" not in r

    def test_sampled_sweep_reports_phi(self):
        proc = run_cli(
            "sweep", "--n", "4..8", "--samples", "3000", "--dt-div", "128",
            "--seed", "2", "--no-timestamp",
        )
        assert proc.returncode == 0
        doc = report_of(proc)
        assert doc["verdict"] == "pass"
        for r in doc["rows"]:
            assert r["mean_phi"] >= r["bound_eps_over_4"]
            assert r["se_phi"] > 0.0

    def test_bad_range_is_usage_error(self):
        proc = run_cli("sweep", "--n", "12..48", "--samples", "0")
        assert proc.returncode == 64
        proc = run_cli("sweep", "--n", "16..4", "--samples", "0")
        assert proc.returncode == 64
