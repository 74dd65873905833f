import logging
from pathlib import Path
from typing import Callable

from pydantic import BaseModel

from composite_spectra.common.cache import ResultCache
from composite_spectra.common.export import (
    HILBERT_HEADER,
    KERNEL_HEADER,
    MODULUS_HEADER,
    SPECTRUM_HEADER,
    VERIFY_HEADER,
    write_csv,
    write_json,
    write_matrix_csv,
)
from composite_spectra.kernels import KernelGrid, KernelTag, kernel_grid, uniform_nodes
from composite_spectra.operators.base import OperatorSpec
from composite_spectra.operators.factory import create_operator
from composite_spectra.precision import PrecisionContext
from composite_spectra.settings import ExperimentConfig
from composite_spectra.spectral import (
    DecayFit,
    HsTail,
    PointwiseBound,
    RatioBound,
    SpectrumReport,
    fit_decay,
    hausdorff_section_identity,
    hilbert_inverse_norm,
    hs_tail,
    ratio_to_integration,
    scaled_maximum,
    section_spectrum,
    tail_to_pointwise,
)
from composite_spectra.stability import ModulusCurve, StabilityFit, fit_log_envelope, modulus_curve
from composite_spectra.verification import HILBERT_LIMIT, AcceptanceSuite, Criterion

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID_CONFIG = 2
EXIT_UNRELIABLE = 3

DEFAULT_SPECTRUM_COLS = 40
DEFAULT_HILBERT_N = 20
DEFAULT_MODULUS_N = 40
DEFAULT_RATES_COLS = 60
HS_TERMS = 1000

CommandResult = tuple[list[Path], int]


class SpectrumArtifact(BaseModel):
    report: SpectrumReport
    power_fit: DecayFit | None = None
    exponential_fit: DecayFit | None = None


class HilbertRow(BaseModel):
    n: int
    inv_norm: str
    log_rate: float
    section_identity: str


class HilbertArtifact(BaseModel):
    limit: float
    rows: list[HilbertRow]


class ModulusArtifact(BaseModel):
    curve: ModulusCurve
    fit: StabilityFit | None = None


class RatesArtifact(BaseModel):
    report: SpectrumReport
    power_fit: DecayFit | None
    exponential_fit: DecayFit | None
    scaled_maximum: float
    scaled_maximum_index: int
    ratio: RatioBound
    tails: list[HsTail]
    tail_constant: float
    n0: int | None
    pointwise: PointwiseBound


class VerifyArtifact(BaseModel):
    quick: bool
    bits: int
    criteria: list[Criterion]


class RunOutcome(BaseModel):
    command: str
    exit_status: int
    artifacts: list[str]
    cached: bool = False


def _optional_fit(report: SpectrumReport, model: str) -> DecayFit | None:
    try:
        return fit_decay(report.sigmas, model=model)  # type: ignore[arg-type]
    except ValueError as e:
        logger.info(f"No {model} fit: {e}")
        return None


class ExperimentRunner:
    """
    Runs one command of the laboratory and writes its artifacts.
    :param config: The validated run configuration.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.precision = PrecisionContext.for_bits(config.bits)
        self.output_dir = config.output_dir
        self.cache = ResultCache(config.output_dir) if config.cache else None
        self.commands: dict[str, Callable[[], CommandResult]] = {}
        self.setup_commands()

    def setup_commands(self):
        """
        Register the commands.
        """
        config = self.config
        precision = self.precision
        output_dir = self.output_dir

        def spectrum() -> CommandResult:
            spec = config.operator_spec(DEFAULT_SPECTRUM_COLS)
            report = section_spectrum(spec, precision)
            artifact = SpectrumArtifact(
                report=report,
                power_fit=_optional_fit(report, "power"),
                exponential_fit=_optional_fit(report, "exponential"),
            )
            paths = [
                write_csv(
                    output_dir / "spectrum.csv",
                    SPECTRUM_HEADER,
                    enumerate(report.sigmas, start=1),
                    precision,
                ),
                write_json(output_dir / "spectrum.json", artifact),
            ]
            if config.export_matrix:
                matrix = create_operator(spec, precision)
                paths.append(write_matrix_csv(output_dir / "matrix.csv", matrix))
            return paths, EXIT_OK if report.reliable else EXIT_UNRELIABLE

        def hilbert() -> CommandResult:
            mp = precision.mp
            rows = []
            for n in range(1, (config.n or DEFAULT_HILBERT_N) + 1):
                norm = hilbert_inverse_norm(n, precision)
                rows.append(
                    (n, norm, mp.log(norm) / n, hausdorff_section_identity(n, precision))
                )
            artifact = HilbertArtifact(
                limit=HILBERT_LIMIT,
                rows=[
                    HilbertRow(
                        n=n,
                        inv_norm=precision.to_decimal(norm),
                        log_rate=float(rate),
                        section_identity=precision.to_decimal(identity),
                    )
                    for n, norm, rate, identity in rows
                ],
            )
            logger.info(
                f"ln||H_n^-1||/n reaches {float(rows[-1][2]):.4f}; the limit is {HILBERT_LIMIT:.4f}"
            )
            paths = [
                write_csv(
                    output_dir / "hilbert.csv",
                    HILBERT_HEADER,
                    (row[:3] for row in rows),
                    precision,
                ),
                write_json(output_dir / "hilbert.json", artifact),
            ]
            return paths, EXIT_OK

        def kernel() -> CommandResult:
            nodes = uniform_nodes(config.grid, precision)
            theta = config.theta if config.tag == KernelTag.MULT_J else None
            grid: KernelGrid = kernel_grid(config.tag, nodes, nodes, precision, theta)
            path = write_csv(
                output_dir / f"kernel-{config.tag.value}.csv",
                KERNEL_HEADER,
                grid.rows(),
                precision,
            )
            return [path], EXIT_OK

        def modulus() -> CommandResult:
            n = config.n or config.cols or DEFAULT_MODULUS_N
            if config.pair == "j":
                d_spec = OperatorSpec.integration(n)
                a_spec = OperatorSpec.hausdorff_j(3 * n, n)
                k = 1
            else:
                d_spec = OperatorSpec.embedding(config.k, n)
                a_spec = OperatorSpec.hausdorff_e(3 * n, n, config.k)
                k = config.k
            curve = modulus_curve(d_spec, a_spec, n, config.delta_grid(), precision)
            fit = None
            if len(curve.deltas) >= 3 and curve.deltas[0] < 1:
                fit = fit_log_envelope(curve, k)
                logger.info(f"omega(delta) ln(1/delta)^{k} <= {fit.upper_constant:.6g}")
            paths = [
                write_csv(
                    output_dir / "modulus.csv",
                    MODULUS_HEADER,
                    zip(curve.deltas, curve.omegas),
                    precision,
                ),
                write_json(output_dir / "modulus.json", ModulusArtifact(curve=curve, fit=fit)),
            ]
            return paths, EXIT_OK if curve.reliable else EXIT_UNRELIABLE

        def rates() -> CommandResult:
            cols = config.section_cols(DEFAULT_RATES_COLS)
            rows = config.rows or 3 * cols
            spec = OperatorSpec.hausdorff_j(rows, cols)
            report = section_spectrum(spec, precision)
            upto = max(2, cols // 2)
            value, index = scaled_maximum(report.sigmas, 1.5, upto)
            tails = [hs_tail(spec, n, HS_TERMS, precision) for n in range(2, upto + 1)]
            scaled = [float(t.n**2 * t.upper) for t in tails]
            n0 = None
            for tail, s in zip(tails, scaled):
                if s <= 1 / 3.999:
                    n0 = tail.n if n0 is None else n0
                else:
                    n0 = None
            constant = max(scaled)
            artifact = RatesArtifact(
                report=report,
                power_fit=_optional_fit(report, "power"),
                exponential_fit=_optional_fit(report, "exponential"),
                scaled_maximum=value,
                scaled_maximum_index=index,
                ratio=ratio_to_integration(report),
                tails=tails,
                tail_constant=constant,
                n0=n0,
                pointwise=tail_to_pointwise(constant, 1.0),
            )
            paths = [
                write_csv(
                    output_dir / "rates.csv",
                    SPECTRUM_HEADER,
                    enumerate(report.sigmas, start=1),
                    precision,
                ),
                write_json(output_dir / "rates.json", artifact),
            ]
            return paths, EXIT_OK if report.reliable else EXIT_UNRELIABLE

        def verify() -> CommandResult:
            criteria = AcceptanceSuite(precision, quick=config.quick).run()
            paths = [
                write_csv(
                    output_dir / "verify.csv",
                    VERIFY_HEADER,
                    ((c.criterion, c.measured, c.expected, c.passed) for c in criteria),
                    precision,
                ),
                write_json(
                    output_dir / "verify.json",
                    VerifyArtifact(quick=config.quick, bits=precision.bits, criteria=criteria),
                ),
            ]
            passed = all(c.passed for c in criteria)
            return paths, EXIT_OK if passed else EXIT_VERIFY_FAILED

        self.commands = {
            "spectrum": spectrum,
            "hilbert": hilbert,
            "kernel": kernel,
            "modulus": modulus,
            "rates": rates,
            "verify": verify,
        }

    def run(self) -> RunOutcome:
        command = self.config.command
        if self.cache is not None:
            manifest = self.cache.lookup(self.config)
            if manifest is not None:
                return RunOutcome(
                    command=command,
                    exit_status=manifest.exit_status,
                    artifacts=manifest.artifacts,
                    cached=True,
                )
        paths, status = self.commands[command]()
        if self.cache is not None:
            self.cache.store(self.config, paths, status)
        if status == EXIT_UNRELIABLE:
            logger.warning(f"'{command}' finished with a numerically unreliable result")
        return RunOutcome(
            command=command,
            exit_status=status,
            artifacts=[str(p.relative_to(self.output_dir)) for p in paths],
        )
