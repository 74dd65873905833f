from pathlib import Path

import pytest
from pydantic import ValidationError

from composite_spectra.common.cache import ResultCache, cache_key
from composite_spectra.kernels import KernelTag
from composite_spectra.operators.types import OperatorFamily
from composite_spectra.precision import DEFAULT_BITS
from composite_spectra.settings import (
    DEFAULT_OUTPUT_DIR,
    ExperimentConfig,
    OutputSettings,
    PrecisionSettings,
)


class TestPrecisionSettings:
    def test_default_values(self):
        assert PrecisionSettings().bits == DEFAULT_BITS

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SPECTRA_BITS", "512")
        assert PrecisionSettings().bits == 512

    def test_minimum_bits(self, monkeypatch):
        """Precision below 64 bits is rejected."""
        monkeypatch.setenv("SPECTRA_BITS", "32")
        with pytest.raises(ValidationError):
            PrecisionSettings()


class TestOutputSettings:
    def test_default_values(self):
        settings = OutputSettings()
        assert settings.output_dir == Path(DEFAULT_OUTPUT_DIR)
        assert settings.cache is True
        assert settings.log_level == "INFO"

    def test_full_config(self, monkeypatch, tmp_path):
        monkeypatch.setenv("SPECTRA_OUTPUT_DIR", str(tmp_path))
        monkeypatch.setenv("SPECTRA_CACHE", "0")
        monkeypatch.setenv("SPECTRA_LOG_LEVEL", "DEBUG")

        settings = OutputSettings()
        assert settings.output_dir == tmp_path
        assert settings.cache is False
        assert settings.log_level == "DEBUG"

    def test_unknown_log_level(self, monkeypatch):
        monkeypatch.setenv("SPECTRA_LOG_LEVEL", "LOUD")
        with pytest.raises(ValidationError):
            OutputSettings()


class TestExperimentConfig:
    def test_defaults(self, tmp_path):
        config = ExperimentConfig(command="spectrum", output_dir=tmp_path)
        assert config.family == "bh-j"
        assert config.bits == DEFAULT_BITS
        assert config.tag == KernelTag.HAUSDORFF_J
        assert config.pair == "j"

    def test_unknown_field(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(command="spectrum", output_dir=tmp_path, colums=4)

    def test_unknown_command(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(command="plot", output_dir=tmp_path)

    def test_delta_order(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(command="modulus", output_dir=tmp_path, delta_min=0.1, delta_max=0.01)

    def test_square_families(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(command="spectrum", output_dir=tmp_path, family="integration", rows=5, cols=4)
        ExperimentConfig(command="spectrum", output_dir=tmp_path, family="bh-j", rows=5, cols=4)

    def test_output_dir_below_a_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(ValidationError):
            ExperimentConfig(command="spectrum", output_dir=blocker / "results")

    def test_output_dir_may_not_exist_yet(self, tmp_path):
        config = ExperimentConfig(command="spectrum", output_dir=tmp_path / "a" / "b")
        assert not config.output_dir.exists()

    def test_tag_from_value(self, tmp_path):
        config = ExperimentConfig.model_validate(
            {"command": "kernel", "output_dir": str(tmp_path), "tag": "mult-j", "theta": 2.0}
        )
        assert config.tag == KernelTag.MULT_J


class TestOperatorSpec:
    @pytest.mark.parametrize(
        "family, rows, cols",
        [
            ("integration", 7, 7),
            ("hausdorff", 7, 7),
            ("bh-j", 21, 7),
            ("mult-j", 7, 7),
            ("embedding", 7, 7),
            ("hausdorff-e", 21, 7),
        ],
    )
    def test_default_shapes(self, tmp_path, family, rows, cols):
        config = ExperimentConfig(command="spectrum", output_dir=tmp_path, family=family, n=7)
        spec = config.operator_spec(40)
        assert (spec.rows, spec.cols) == (rows, cols)

    def test_fallback_size(self, tmp_path):
        config = ExperimentConfig(command="spectrum", output_dir=tmp_path, family="integration")
        assert config.operator_spec(12).cols == 12

    def test_composite_parameters(self, tmp_path):
        config = ExperimentConfig(
            command="spectrum", output_dir=tmp_path, family="hausdorff-e", k=2, cols=5, rows=9
        )
        spec = config.operator_spec(40)
        assert spec.family == OperatorFamily.COMPOSITE
        assert spec.inner.k == 2
        assert spec.rows == 9


class TestDeltaGrid:
    def test_log_spaced(self, tmp_path):
        config = ExperimentConfig(
            command="modulus", output_dir=tmp_path, delta_max=1e-1, delta_min=1e-4, delta_points=4
        )
        assert config.delta_grid() == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4])

    def test_explicit_grid_sorted(self, tmp_path):
        config = ExperimentConfig(command="modulus", output_dir=tmp_path, deltas=[1e-3, 1e-1, 1e-2])
        assert config.delta_grid() == [1e-1, 1e-2, 1e-3]

    def test_explicit_grid_positive(self, tmp_path):
        with pytest.raises(ValidationError):
            ExperimentConfig(command="modulus", output_dir=tmp_path, deltas=[1e-1, 0.0])


class TestCacheKey:
    def test_ignores_output_location(self, tmp_path):
        a = ExperimentConfig(command="hilbert", output_dir=tmp_path / "a", n=4)
        b = ExperimentConfig(command="hilbert", output_dir=tmp_path / "b", n=4, cache=False)
        assert cache_key(a) == cache_key(b)

    def test_depends_on_parameters(self, tmp_path):
        a = ExperimentConfig(command="hilbert", output_dir=tmp_path, n=4)
        b = ExperimentConfig(command="hilbert", output_dir=tmp_path, n=5)
        assert cache_key(a) != cache_key(b)

    def test_stale_entry(self, tmp_path):
        config = ExperimentConfig(command="hilbert", output_dir=tmp_path, n=4)
        cache = ResultCache(tmp_path)
        artifact = tmp_path / "hilbert.csv"
        artifact.write_text("n,inv_norm,log_rate\n")
        manifest = cache.store(config, [artifact], 0)
        assert manifest.artifacts == ["hilbert.csv"]
        assert cache.lookup(config) == manifest
        artifact.unlink()
        assert cache.lookup(config) is None

    def test_overwritten_artifact(self, tmp_path):
        config = ExperimentConfig(command="hilbert", output_dir=tmp_path, n=4)
        cache = ResultCache(tmp_path)
        artifact = tmp_path / "hilbert.csv"
        artifact.write_text("n,inv_norm,log_rate\n")
        manifest = cache.store(config, [artifact], 0)
        assert set(manifest.digests) == {"hilbert.csv"}
        artifact.write_text("n,inv_norm,log_rate\n1,1,0\n")
        assert cache.lookup(config) is None
