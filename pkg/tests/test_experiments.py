import json

import pytest

from composite_spectra.experiments import (
    EXIT_INVALID_CONFIG,
    EXIT_OK,
    EXIT_VERIFY_FAILED,
    ExperimentRunner,
)
from composite_spectra.main import main
from composite_spectra.operators.base import OperatorSpec
from composite_spectra.settings import ExperimentConfig
from composite_spectra.spectral import section_spectrum
from composite_spectra.verification import QUICK_SIZES, AcceptanceSuite, Criterion


def _lines(path):
    return path.read_text().splitlines()


class TestCommands:
    def test_spectrum(self, tmp_path, capsys):
        status = main(
            ["spectrum", "--family", "integration", "--cols", "6", "--bits", "128",
             "--output-dir", str(tmp_path), "--export-matrix"]
        )
        assert status == EXIT_OK
        lines = _lines(tmp_path / "spectrum.csv")
        assert lines[0] == "index,sigma"
        assert len(lines) == 7
        assert lines[1].startswith("1,0.6366")
        report = json.loads((tmp_path / "spectrum.json").read_text())
        assert report["report"]["reliable"] is True
        assert report["power_fit"] is None
        assert len(_lines(tmp_path / "matrix.csv")) == 37
        assert str(tmp_path / "spectrum.csv") in capsys.readouterr().out

    def test_spectrum_fractional_theta(self, tmp_path):
        status = main(
            ["spectrum", "--family", "mult-j", "--theta", "0.5", "--cols", "8", "--bits", "128",
             "--output-dir", str(tmp_path)]
        )
        assert status == EXIT_OK
        report = json.loads((tmp_path / "spectrum.json").read_text())
        assert report["report"]["reliable"] is True

    def test_hilbert(self, tmp_path):
        status = main(["hilbert", "--n", "4", "--bits", "128", "--output-dir", str(tmp_path)])
        assert status == EXIT_OK
        lines = _lines(tmp_path / "hilbert.csv")
        assert lines[0] == "n,inv_norm,log_rate"
        assert lines[1].startswith("1,1.0")
        artifact = json.loads((tmp_path / "hilbert.json").read_text())
        assert [row["n"] for row in artifact["rows"]] == [1, 2, 3, 4]
        assert artifact["limit"] == pytest.approx(3.5255, abs=1e-4)

    def test_kernel(self, tmp_path):
        status = main(["kernel", "--grid", "5", "--bits", "128", "--output-dir", str(tmp_path)])
        assert status == EXIT_OK
        lines = _lines(tmp_path / "kernel-hausdorff-j.csv")
        assert lines[0] == "s,t,value"
        assert len(lines) == 26
        assert lines[1].startswith("0.0,0.0,1.6449")

    def test_derivative_kernel_pole(self, tmp_path):
        status = main(
            ["kernel", "--tag", "hausdorff-j-dss", "--grid", "3", "--bits", "128",
             "--output-dir", str(tmp_path)]
        )
        assert status == EXIT_OK
        lines = _lines(tmp_path / "kernel-hausdorff-j-dss.csv")
        assert lines[-2].endswith(",-inf")
        assert lines[-1].split(",")[2] in ("0.0", "0")

    def test_modulus(self, tmp_path):
        status = main(
            ["modulus", "--n", "3", "--delta-points", "4", "--bits", "128",
             "--output-dir", str(tmp_path)]
        )
        assert status == EXIT_OK
        assert len(_lines(tmp_path / "modulus.csv")) == 5
        artifact = json.loads((tmp_path / "modulus.json").read_text())
        assert artifact["fit"]["k"] == 1
        assert artifact["curve"]["reliable"] is True

    def test_rates(self, tmp_path):
        status = main(["rates", "--cols", "8", "--bits", "128", "--output-dir", str(tmp_path)])
        assert status == EXIT_OK
        artifact = json.loads((tmp_path / "rates.json").read_text())
        assert artifact["report"]["rows"] == 24
        assert [tail["n"] for tail in artifact["tails"]] == [2, 3, 4]
        assert artifact["pointwise"]["exponent"] == 1.5

    def test_verify_failure_exit(self, tmp_path, monkeypatch):
        failed = Criterion(criterion="integration-oracle", measured="1", expected="0", passed=False)
        monkeypatch.setattr(AcceptanceSuite, "run", lambda self: [failed])
        status = main(["verify", "--quick", "--output-dir", str(tmp_path)])
        assert status == EXIT_VERIFY_FAILED
        lines = _lines(tmp_path / "verify.csv")
        assert lines[1] == "integration-oracle,1,0,False"
        assert json.loads((tmp_path / "verify.json").read_text())["quick"] is True


class TestConfiguration:
    def test_file_values(self, tmp_path):
        config_file = tmp_path / "run.json"
        config_file.write_text(json.dumps({"family": "integration", "cols": 5, "bits": 128}))
        status = main(["spectrum", "--config", str(config_file), "--output-dir", str(tmp_path)])
        assert status == EXIT_OK
        assert len(_lines(tmp_path / "spectrum.csv")) == 6

    def test_flags_override_file(self, tmp_path):
        config_file = tmp_path / "run.json"
        config_file.write_text(json.dumps({"family": "integration", "cols": 5, "bits": 128}))
        main(["spectrum", "--config", str(config_file), "--cols", "3", "--output-dir", str(tmp_path)])
        assert len(_lines(tmp_path / "spectrum.csv")) == 4

    def test_malformed_json(self, tmp_path, capsys):
        config_file = tmp_path / "run.json"
        config_file.write_text('{"cols": 5,\n "bits": }')
        status = main(["spectrum", "--config", str(config_file), "--output-dir", str(tmp_path)])
        assert status == EXIT_INVALID_CONFIG
        assert f"{config_file}:2:" in capsys.readouterr().err

    def test_not_an_object(self, tmp_path):
        config_file = tmp_path / "run.json"
        config_file.write_text("[1, 2]")
        status = main(["spectrum", "--config", str(config_file), "--output-dir", str(tmp_path)])
        assert status == EXIT_INVALID_CONFIG

    def test_missing_file(self, tmp_path):
        status = main(["spectrum", "--config", str(tmp_path / "absent.json")])
        assert status == EXIT_INVALID_CONFIG

    def test_validation_error(self, tmp_path, capsys):
        status = main(["spectrum", "--bits", "32", "--output-dir", str(tmp_path)])
        assert status == EXIT_INVALID_CONFIG
        assert "bits:" in capsys.readouterr().err
        assert not (tmp_path / "spectrum.csv").exists()

    def test_environment_defaults(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPECTRA_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("SPECTRA_BITS", "96")
        assert main(["hilbert", "--n", "2"]) == EXIT_OK
        artifact = json.loads((tmp_path / "hilbert.json").read_text())
        assert len(artifact["rows"]) == 2


class TestCache:
    def _config(self, tmp_path, **values):
        values = {"family": "integration", "cols": 4, "bits": 128, **values}
        return ExperimentConfig(command="spectrum", output_dir=tmp_path, **values)

    def test_second_run_hits(self, tmp_path):
        first = ExperimentRunner(self._config(tmp_path)).run()
        contents = (tmp_path / "spectrum.csv").read_bytes()
        second = ExperimentRunner(self._config(tmp_path)).run()
        assert not first.cached
        assert second.cached
        assert second.artifacts == first.artifacts
        assert second.exit_status == first.exit_status
        assert (tmp_path / "spectrum.csv").read_bytes() == contents

    def test_rerun_is_byte_identical(self, tmp_path):
        ExperimentRunner(self._config(tmp_path, cache=False)).run()
        contents = (tmp_path / "spectrum.csv").read_bytes()
        (tmp_path / "spectrum.csv").unlink()
        outcome = ExperimentRunner(self._config(tmp_path, cache=False)).run()
        assert not outcome.cached
        assert (tmp_path / "spectrum.csv").read_bytes() == contents

    def test_other_config_in_between(self, tmp_path):
        ExperimentRunner(self._config(tmp_path)).run()
        contents = (tmp_path / "spectrum.csv").read_bytes()
        ExperimentRunner(self._config(tmp_path, cols=6)).run()
        assert len(_lines(tmp_path / "spectrum.csv")) == 7
        outcome = ExperimentRunner(self._config(tmp_path)).run()
        assert not outcome.cached
        assert len(_lines(tmp_path / "spectrum.csv")) == 5
        assert (tmp_path / "spectrum.csv").read_bytes() == contents

    def test_missing_artifact_recomputes(self, tmp_path):
        ExperimentRunner(self._config(tmp_path)).run()
        (tmp_path / "spectrum.json").unlink()
        outcome = ExperimentRunner(self._config(tmp_path)).run()
        assert not outcome.cached
        assert (tmp_path / "spectrum.json").exists()


class TestAcceptanceSuite:
    """Desk-scale runs of every criterion."""

    @pytest.fixture
    def suite(self, fast_precision):
        return AcceptanceSuite(fast_precision, quick=True)

    def test_registered_criteria(self, suite):
        assert len(suite.criteria) == 10
        assert suite.sizes == QUICK_SIZES

    def test_integration_oracle(self, suite):
        assert suite.integration_oracle().passed

    def test_two_path_assembly(self, suite):
        assert suite.two_path_assembly().passed

    def test_hausdorff_norm(self, suite):
        assert suite.hausdorff_norm().passed

    def test_hilbert_law(self, suite):
        assert suite.hilbert_law().passed

    def test_multiplication_rate(self, suite):
        assert suite.multiplication_rate().passed

    def test_improved_rate(self, suite):
        result = suite.improved_rate()
        assert "reliable True" in result.measured
        assert result.passed

    def test_hs_tail_chain(self, suite):
        result = suite.hs_tail_chain()
        assert "broken at none" in result.measured
        assert result.passed

    def test_kernel_cross_validation(self, suite):
        assert suite.kernel_cross_validation().passed

    def test_modulus_envelope(self, suite):
        assert suite.modulus_envelope().passed

    def test_legendre_approximation(self, suite):
        assert suite.legendre_approximation().passed

    def test_modulus_section_resolves_smallest_delta(self, fast_precision):
        """The last singular value of the quick section lies below the smallest delta of the grid."""
        n = QUICK_SIZES.modulus_n
        report = section_spectrum(OperatorSpec.hausdorff_j(3 * n, n), fast_precision)
        assert report.sigmas[-1] < 1e-6
