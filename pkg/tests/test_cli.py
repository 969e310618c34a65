"""Tests for the command-line pipeline.

Exit-code contract under test: 0 when every check passes, 1 when a check
fails, 2 on usage errors (bad flags, excluded alpha, missing stage inputs).
The expensive end-to-end run executes once per module; the cheap unit tests
cover config plumbing and error paths.
"""

import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

from pmeconcavity import cli
from pmeconcavity.assembly import read_bundle_manifest
from pmeconcavity.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    UsageError,
    parse_fraction,
    parse_resolutions,
    read_kv,
)
from pmeconcavity.solver import read_probe_csv

STAGES = ("construct", "verify", "assemble", "evolve", "report")


def run_stage(name, out, *extra):
    return cli.main([name, "--out", str(out)] + list(extra))


def flags(alpha, m, n, *extra):
    return ["--alpha", str(alpha), "--m", str(m), "--n", str(n)] + list(extra)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


class TestConfigParsing:
    def test_fractions_parse_exactly(self):
        assert parse_fraction("0.75") == Fraction(3, 4)
        assert parse_fraction("3/4") == Fraction(3, 4)
        assert parse_fraction("1") == Fraction(1)
        with pytest.raises(UsageError):
            parse_fraction("three quarters")

    def test_resolution_lists(self):
        assert parse_resolutions("49,65") == (49, 65)
        assert parse_resolutions("65") == (65,)
        with pytest.raises(UsageError):
            parse_resolutions("")
        with pytest.raises(UsageError):
            parse_resolutions("49,big")

    def test_run_config_invariants(self, tmp_path):
        def cfg(**kw):
            base = dict(alpha=Fraction(1), m=Fraction(2), n=2,
                        steepness=None, rho=None, resolutions=(65,),
                        horizon=1.0, seed=0, out=tmp_path, threads=1)
            base.update(kw)
            return RunConfig(**base)

        cfg()  # valid baseline
        with pytest.raises(UsageError):
            cfg(alpha=Fraction(1, 2))
        with pytest.raises(UsageError):
            cfg(alpha=Fraction(3, 2))
        with pytest.raises(UsageError):
            cfg(m=Fraction(1))
        with pytest.raises(UsageError):
            cfg(n=1)
        with pytest.raises(UsageError):
            cfg(resolutions=(64,))
        with pytest.raises(UsageError):
            cfg(horizon=0.0)

    def test_excluded_alpha_message_cites_the_value(self, tmp_path, capsys):
        code = run_stage("construct", tmp_path, "--alpha", "0.5",
                         "--m", "2", "--n", "2")
        assert code == EXIT_USAGE
        assert "1/2" in capsys.readouterr().err

    def test_alpha_m_n_required(self, tmp_path):
        assert run_stage("construct", tmp_path) == EXIT_USAGE

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "alpha = 1\nm = 2\nn = 2\nresolutions = 65  # only the fine grid\n",
            encoding="utf-8")
        out = tmp_path / "out"
        code = cli.main(["construct", "--config", str(cfg), "--out", str(out),
                         "--n", "3", "--steepness", "10"])
        assert code == EXIT_OK
        stored = read_kv(out / "construction.txt")
        assert stored["n"] == "3"  # flag beat the file
        assert stored["steepness"] == "10"
        assert stored["steepness_source"] == "override"

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("alpha = 1\nm = 2\nn = 2\nturbo = yes\n", encoding="utf-8")
        assert cli.main(["construct", "--config", str(cfg),
                         "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["construct", "--config", str(tmp_path / "nope.cfg"),
                         "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_subcommand_is_usage_error(self):
        assert cli.main(["frobnicate"]) == EXIT_USAGE

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "pmeconcavity"],
                              capture_output=True, text=True)
        assert proc.returncode == EXIT_USAGE


# ---------------------------------------------------------------------------
# individual stages
# ---------------------------------------------------------------------------


class TestConstructStage:
    def test_family_selection_by_alpha(self, tmp_path):
        out1 = tmp_path / "unit"
        assert run_stage("construct", out1,
                         *flags(1, 2, 3, "--steepness", "10")) == EXIT_OK
        assert read_kv(out1 / "construction.txt")["family"] == "unit"

        out2 = tmp_path / "scaled"
        assert run_stage("construct", out2,
                         *flags("0.75", 2, 3, "--steepness", "10")) == EXIT_OK
        assert read_kv(out2 / "construction.txt")["family"] == "scaled"

    def test_reports_are_byte_deterministic(self, tmp_path):
        args = flags(1, 2, 2)
        assert run_stage("construct", tmp_path, *args) == EXIT_OK
        first = (tmp_path / "construction.txt").read_bytes()
        assert run_stage("construct", tmp_path, *args) == EXIT_OK
        assert (tmp_path / "construction.txt").read_bytes() == first
        # the timestamp lives in the sidecar, not the report
        assert (tmp_path / "construction.txt.meta").is_file()
        assert b"written_utc" not in first

    def test_solved_steepness_is_recorded_exactly(self, tmp_path):
        assert run_stage("construct", tmp_path, *flags(1, 2, 2)) == EXIT_OK
        stored = read_kv(tmp_path / "construction.txt")
        assert stored["steepness_source"] == "solved"
        assert Fraction(stored["steepness"]) > 8  # past the closed-form root


class TestVerifyStage:
    def test_requires_construction(self, tmp_path):
        assert run_stage("verify", tmp_path, *flags(1, 2, 2)) == EXIT_USAGE

    def test_corrupted_polynomial_fails_condition_one(self, tmp_path):
        assert run_stage("construct", tmp_path, *flags(1, 2, 2)) == EXIT_OK
        path = tmp_path / "construction.txt"
        text = path.read_text(encoding="utf-8")
        assert "0 2 : -1\n" in text
        path.write_text(text.replace("0 2 : -1\n", "0 2 : 1\n", 1),
                        encoding="utf-8")
        assert run_stage("verify", tmp_path, *flags(1, 2, 2)) == EXIT_FAIL
        stored = read_kv(tmp_path / "verify.txt")
        assert stored["condition1"] == "fail"
        assert stored["verified"] == "fail"

    def test_evolve_refuses_failing_verification(self, tmp_path):
        assert run_stage("construct", tmp_path, *flags(1, 2, 2)) == EXIT_OK
        path = tmp_path / "construction.txt"
        path.write_text(path.read_text(encoding="utf-8")
                        .replace("0 2 : -1\n", "0 2 : 1\n", 1), encoding="utf-8")
        assert run_stage("verify", tmp_path, *flags(1, 2, 2)) == EXIT_FAIL
        assert run_stage("evolve", tmp_path, *flags(1, 2, 2)) == EXIT_FAIL

    def test_evolve_requires_bundle_even_when_verified(self, tmp_path):
        assert run_stage("construct", tmp_path, *flags(1, 2, 2)) == EXIT_OK
        assert run_stage("verify", tmp_path, *flags(1, 2, 2)) == EXIT_OK
        assert run_stage("evolve", tmp_path, *flags(1, 2, 2)) == EXIT_USAGE


class TestAssembleStage:
    def test_requires_prior_stages(self, tmp_path):
        assert run_stage("assemble", tmp_path, *flags(1, 2, 2)) == EXIT_USAGE

    def test_scaled_family_transfer_fails_honestly(self, tmp_path):
        args = flags("0.75", 2, 3)
        assert run_stage("construct", tmp_path, *args) == EXIT_OK
        assert run_stage("verify", tmp_path, *args) == EXIT_OK
        assert run_stage("assemble", tmp_path, *args) == EXIT_FAIL
        stored = read_kv(tmp_path / "assemble.txt")
        assert stored["transfer"] == "fail"
        assert stored["assembled"] == "fail"
        assert int(stored["transfer_rounds"]) >= 1
        # the failure propagates to the aggregate report
        assert run_stage("report", tmp_path, *args) == EXIT_FAIL
        assert read_kv(tmp_path / "report.txt")["overall"] == "fail"


class TestReportStage:
    def test_no_runs_is_a_usage_error(self, tmp_path):
        assert run_stage("report", tmp_path, *flags(1, 2, 2)) == EXIT_USAGE


# ---------------------------------------------------------------------------
# full pipeline, unit family in three dimensions
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline3(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline3")
    shared = flags(1, 2, 3)
    codes = {stage: run_stage(stage, out, *shared) for stage in STAGES}
    return out, codes


class TestFullPipeline:
    def test_every_stage_exits_zero(self, pipeline3):
        _, codes = pipeline3
        assert codes == {stage: EXIT_OK for stage in STAGES}

    def test_stage_files_and_sidecars_exist(self, pipeline3):
        out, _ = pipeline3
        for name in ("construction.txt", "verify.txt", "bundle.txt",
                     "assemble.txt", "evolve.txt", "report.txt"):
            assert (out / name).is_file()
            if name != "bundle.txt":
                assert (out / (name + ".meta")).is_file()
        for res in (49, 65):
            assert (out / ("probe_res%d.csv" % res)).is_file()

    def test_report_shows_conditions_and_crossing(self, pipeline3):
        out, _ = pipeline3
        report = read_kv(out / "report.txt")
        assert report["verify.condition1"] == "pass"
        assert report["verify.condition2"] == "pass"
        assert report["verify.condition3"] == "pass"
        assert report["evolve.crossing_res49"] == "pass"
        assert report["evolve.crossing_res65"] == "pass"
        assert report["evolve.t_star_monotone"] == "pass"
        assert report["overall"] == "pass"

    def test_detection_time_shrinks_under_refinement(self, pipeline3):
        out, _ = pipeline3
        stored = read_kv(out / "evolve.txt")
        coarse = float(stored["t_star_res49"])
        fine = float(stored["t_star_res65"])
        assert 0 < fine <= coarse

    def test_measured_rates_inside_tolerance(self, pipeline3):
        out, _ = pipeline3
        stored = read_kv(out / "evolve.txt")
        for res in (49, 65):
            assert float(stored["rate_rel_gap_res%d" % res]) <= 0.25

    def test_probe_csvs_parse_with_canonical_columns(self, pipeline3):
        out, _ = pipeline3
        cols = read_probe_csv(out / "probe_res65.csv")
        assert tuple(cols) == ("t", "w11", "lambda1", "max_v",
                               "mass_proxy", "clamp_norm")
        assert len(cols["t"]) >= 2
        assert cols["lambda1"][-1] > 0  # the crossing is in the record

    def test_bundle_manifest_reloads(self, pipeline3):
        out, _ = pipeline3
        bundle = read_bundle_manifest(out / "bundle.txt")
        assert bundle.params.n == 3
        assert bundle.rate_transfer_positive
        assert float(bundle.origin_rate_shifted) > 0
