"""メインエントリーポイント.

CLIコマンドを提供し、スペクトル計算・曲線追跡・解析接続・
分岐点探索・検証スイートを実行する。
"""

import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn

import click
from loguru import logger

from . import __version__
from .config import settings
from .continuation import MIN_SAMPLE_RADIUS, BetaContinuation, sampling_radius
from .exceptions import (
    NonConvergenceError,
    RadiusExhaustedError,
    RamificationError,
    ScatteringPoleError,
    SpectralError,
    StepCollapseError,
)
from .maass_selberg import lambda_prime_of_gamma, ramification_scan
from .models import (
    INFINITY,
    PathSpec,
    RunConfig,
    SpectralPoint,
    TruncationConfig,
    is_infinite,
)
from .modular_surface import ScatteringData, modular_surface, scaled_surface
from .reporting import (
    BRANCH_HEADER,
    CONTINUE_HEADER,
    SPECTRUM_HEADER,
    TRACE_HEADER,
    VERIFY_HEADER,
    CsvReport,
    branch_row,
    continue_row,
    spectrum_row,
    trace_row,
)
from .robin import robin_residual, solve_robin_roots
from .tracing import CurveTracer, lambda_prime_fd
from .verification import check_names, run_verification

# 追跡で分岐点・ステップ崩壊を示すフラグ
RAMIFICATION_FLAG = "ramification"

NAN = complex(float("nan"), float("nan"))


def setup_logging(quiet: bool = False) -> None:
    """ログ設定をセットアップ.

    Args:
        quiet: 標準エラーへの出力を WARNING 以上に絞る

    """
    # 既存のハンドラーを削除
    logger.remove()

    # コンソール出力
    logger.add(
        sys.stderr,
        level="WARNING" if quiet else settings.log_level,
        format=(
            "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
            "<level>{level: <8}</level> | "
            "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
            "<level>{message}</level>"
        ),
    )

    # ファイル出力
    log_file = settings.log_file
    log_file.parent.mkdir(parents=True, exist_ok=True)

    logger.add(
        log_file,
        level=settings.log_level,
        format=(
            "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | "
            "{name}:{function}:{line} - {message}"
        ),
        rotation=settings.log_rotation,
        retention=settings.log_retention,
        compression="zip",
    )


def common_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """全コマンド共通のオプション."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="key=value 形式の設定ファイル（フラグが優先）",
        ),
        click.option("--eta", type=float, help="切断高さη（η > 1）"),
        click.option("--window", help="s平面の窓 re_min,re_max,im_min,im_max"),
        click.option("--tol", type=float, help="許容誤差の上書き"),
        click.option(
            "--out",
            "output_path",
            type=click.Path(dir_okay=False, path_type=Path),
            help="出力ファイル（省略時は標準出力）",
        ),
        click.option("--phi-scale", help="φに掛ける係数（故障注入用）"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def path_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """経路を取るコマンドのオプション."""
    command = click.option("--max-step", type=float, help="最大ステップ幅")(command)
    return click.option("--path", help="経路（例: 2;3+3i;0.5+3i）")(command)


def load_config(config_file: Path | None, **flags: object) -> RunConfig:
    """設定ファイルとフラグから実行設定を読み込む.

    Raises:
        click.UsageError: 設定が不正な場合

    """
    try:
        return RunConfig.from_sources(config_file, **flags)
    except ValueError as e:
        raise click.UsageError(f"Invalid configuration: {e}") from e


def truncation_for(config: RunConfig, newton: bool = False) -> TruncationConfig:
    """実行設定のηを反映した切断設定.

    Args:
        config: 実行設定
        newton: True なら --tol を Newton法の許容誤差として使う

    Raises:
        click.BadParameter: η または許容誤差が不正な場合

    """
    try:
        cfg = TruncationConfig.from_settings(settings).with_eta(config.eta)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--eta") from e
    if not newton or config.tol is None:
        return cfg
    try:
        return TruncationConfig(
            eta=cfg.eta,
            eta_floor=cfg.eta_floor,
            newton_tol=config.tol,
            max_iter=cfg.max_iter,
        )
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--tol") from e


def surface_for(config: RunConfig) -> ScatteringData:
    """実行設定の散乱データ（φの係数が1でなければ故障注入）."""
    surface = modular_surface()
    if config.phi_scale != 1:
        surface = scaled_surface(surface, config.phi_scale)
    return surface


def path_for(config: RunConfig) -> PathSpec:
    """実行設定の経路."""
    try:
        return config.path_spec
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--path") from e


def fail(report: CsvReport, error: SpectralError) -> NoReturn:
    """エラー行を書いて終了コード1で終了."""
    logger.error(f"{type(error).__name__}: {error}")
    report.write_error(error)
    sys.exit(1)


@click.group()
@click.version_option(version=__version__, prog_name="robin-spectra")
@click.option(
    "--quiet",
    "-q",
    is_flag=True,
    help="エラーと警告以外のログ出力を抑制する",
)
def cli(quiet: bool) -> None:
    """モジュラー曲面上のRobin擬ラプラシアンのスペクトル計算ツールキット."""
    setup_logging(quiet)


@cli.command()
@common_options
@click.option(
    "--gamma",
    "gamma_values",
    multiple=True,
    help="Robinパラメータγ（複数指定可、inf でDirichlet条件）",
)
def spectrum(config_file: Path | None, **flags: Any) -> None:
    """窓の中の Robin 固有値を γ ごとに求める."""
    config = load_config(config_file, **flags)
    cfg = truncation_for(config, newton=True)
    surface = surface_for(config)
    logger.info(f"Spectrum scan: gamma={config.gamma_values}, eta={cfg.eta}")

    with CsvReport(SPECTRUM_HEADER, config.output_path) as report:
        try:
            for gamma in config.gamma_values:
                for point in solve_robin_roots(gamma, config.window, cfg, surface):
                    residual = robin_residual(point, surface)
                    report.write_row(spectrum_row(point, residual))
        except SpectralError as e:
            fail(report, e)


def _slopes(
    point: SpectralPoint, cfg: TruncationConfig, surface: ScatteringData
) -> tuple[complex, complex, str]:
    flag = RAMIFICATION_FLAG if point.ramified else ""
    try:
        formula = lambda_prime_of_gamma(point, cfg, surface)
    except RamificationError:
        formula, flag = NAN, RAMIFICATION_FLAG
    try:
        fd = lambda_prime_fd(point, cfg, surface)
    except NonConvergenceError:
        fd, flag = NAN, RAMIFICATION_FLAG
    return formula, fd, flag


@cli.command()
@common_options
@path_options
def trace(config_file: Path | None, **flags: Any) -> None:
    """γ平面の経路に沿って固有値曲線を追跡する.

    seed は経路の始点のγについて窓の中で最初に見つかった根。
    """
    config = load_config(config_file, **flags)
    cfg = truncation_for(config, newton=True)
    surface = surface_for(config)
    path = path_for(config)

    with CsvReport(TRACE_HEADER, config.output_path) as report:
        start = complex(path.waypoints[0])
        try:
            seeds = solve_robin_roots(start, config.window, cfg, surface)
        except SpectralError as e:
            fail(report, e)
        if not seeds:
            fail(report, SpectralError(f"No seed for gamma={start} in the window"))
        tracer = CurveTracer(path, cfg, surface)
        error: SpectralError | None = None
        try:
            tracer.trace(seeds[0])
        except SpectralError as e:
            error = e

        t = 0.0
        previous = start
        for point in tracer.points:
            t += abs(complex(point.gamma) - previous)
            previous = complex(point.gamma)
            report.write_row(trace_row(t, point, *_slopes(point, cfg, surface)))

        if isinstance(error, StepCollapseError):
            stalled = SpectralPoint(s=error.s, gamma=error.gamma, eta=cfg.eta)
            report.write_row(trace_row(t, stalled, NAN, NAN, RAMIFICATION_FLAG))
        if error is not None:
            fail(report, error)


@cli.command(name="continue")
@common_options
@path_options
def continue_(config_file: Path | None, **flags: Any) -> None:
    """収束域から経路に沿って β を解析接続し、閉じた式の φ と比べる.

    Re s < 1/2 の経由点は 1−s で接続し、β(s) = 1/β(1−s) を使う。
    """
    config = load_config(config_file, **flags)
    surface = surface_for(config)
    path = path_for(config)
    tol = 1e-4 if config.tol is None else config.tol
    start = complex(path.waypoints[0])
    if sampling_radius(start) < MIN_SAMPLE_RADIUS:
        raise click.BadParameter(
            f"continuation must start in Re s > 1.1, got {start}", param_hint="--path"
        )

    targets = [complex(path.waypoints[0])]
    for waypoint in path.waypoints[1:]:
        if complex(waypoint) != targets[-1]:
            targets.append(complex(waypoint))
    reflected = [s if s.real >= 0.5 else 1 - s for s in targets]

    with CsvReport(CONTINUE_HEADER, config.output_path) as report:
        continuation = BetaContinuation()
        try:
            continuation.extend(
                PathSpec(
                    waypoints=[*reflected, reflected[-1]],
                    max_step=path.max_step,
                    min_step=path.min_step,
                )
            )
        except SpectralError as e:
            fail(report, e)

        failures = 0
        for s, point in zip(targets, reflected, strict=True):
            try:
                value, error = continuation.estimate(point)
                if error > tol * max(1.0, abs(value)):
                    raise RadiusExhaustedError(
                        f"Continuation to s={s} has error estimate {error:.2e}"
                    )
            except SpectralError as e:
                logger.error(f"{type(e).__name__}: {e}")
                value, failures = NAN, failures + 1
            if point != s:
                value = 0j if is_infinite(value) else 1 / value
            try:
                oracle = surface.phi(s)
            except ScatteringPoleError:
                oracle = INFINITY
            pole = any(
                abs(point - flag.location) <= 1e-6 * (1 + abs(flag.location))
                for flag in continuation.chain.pole_flags
            )
            report.write_row(continue_row(s, value, oracle, pole))

        if failures:
            fail(report, RadiusExhaustedError(f"{failures} targets failed to continue"))


@cli.command()
@common_options
def branch(config_file: Path | None, **flags: Any) -> None:
    """窓の中の分岐点（自己対の消える点）を探す."""
    config = load_config(config_file, **flags)
    cfg = truncation_for(config, newton=True)
    surface = surface_for(config)

    with CsvReport(BRANCH_HEADER, config.output_path) as report:
        try:
            for point in ramification_scan(config.window, cfg, surface):
                report.write_row(branch_row(point))
        except SpectralError as e:
            fail(report, e)


@cli.command()
@common_options
@click.option(
    "--check",
    "checks",
    multiple=True,
    type=click.Choice(check_names()),
    help="実行する検証項目（複数指定可、省略時はすべて）",
)
def verify(config_file: Path | None, **flags: Any) -> None:
    """検証スイートを実行する（すべて通れば終了コード0）."""
    config = load_config(config_file, **flags)
    cfg = truncation_for(config)
    surface = surface_for(config)
    try:
        results = run_verification(
            surface, cfg, tol_override=config.tol, only=config.checks or None
        )
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--check") from e

    for result in results:
        status = "PASS" if result.passed else "FAIL"
        bound = ">=" if result.minimum else "<="
        click.echo(
            f"{status}  {result.name:<32} observed={result.observed:.3e}  "
            f"{bound} {result.tolerance:.1e}"
        )
        if result.message:
            click.echo(f"      {result.message}")

    if config.output_path is not None:
        with CsvReport(VERIFY_HEADER, config.output_path) as report:
            for result in results:
                report.write_row(
                    [result.name, result.tolerance, result.observed, result.passed]
                )

    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error(f"Failed checks: {', '.join(failed)}")
        sys.exit(1)
    logger.info(f"All {len(results)} checks passed")


@cli.command()
def config() -> None:
    """現在の設定を表示."""
    logger.info("Current configuration:")

    click.echo("\n[Truncation Settings]")
    click.echo(f"Eta: {settings.eta} (floor {settings.eta_floor})")
    click.echo(f"Eta candidates: {', '.join(map(str, settings.eta_candidates))}")
    click.echo(f"Newton tolerance: {settings.newton_tol}")
    click.echo(f"Max iterations: {settings.max_iter}")

    click.echo("\n[Root Search Settings]")
    click.echo(f"Max subdivision depth: {settings.max_subdivision_depth}")
    click.echo(f"Infinity threshold: {settings.infinity_threshold}")
    click.echo(f"Ramification threshold: {settings.ramification_threshold}")

    click.echo("\n[Continuation Settings]")
    click.echo(f"Order: {settings.continuation_order}")
    click.echo(f"Sampling floor: Re s >= {settings.sampling_floor}")
    click.echo(f"Sample heights: {', '.join(map(str, settings.sample_heights))}")
    click.echo(f"Max disc radius: {settings.max_disc_radius}")

    click.echo("\n[Log Settings]")
    click.echo(f"Log level: {settings.log_level}")
    click.echo(f"Log file: {settings.log_file}")
    click.echo(f"Rotation: {settings.log_rotation}")
    click.echo(f"Retention: {settings.log_retention}")


@cli.command()
@click.option(
    "--output",
    "-o",
    type=click.Path(path_type=Path),
    default=Path(".env.example"),
    help="出力ファイルパス",
)
def generate_env(output: Path) -> None:
    """環境変数のサンプルファイルを生成."""
    env_content = """# robin-spectra Configuration

# Truncation Settings
ETA=2.0
ETA_FLOOR=1.0
ETA_CANDIDATES="1.5,2,3,5"
NEWTON_TOL=1e-13
MAX_ITER=50

# Kernel Settings
CONTOUR_NODES=64
DERIVATIVE_RADIUS=0.01
BESSEL_EXPONENT_CLAMP=700

# Surface Settings
CONVERGENCE_MARGIN=0.1
LATTICE_ROW_BUDGET=400
ORACLE_TOL=1e-13
FOURIER_TERMS=12

# Root Search Settings
MAX_SUBDIVISION_DEPTH=12
INFINITY_THRESHOLD=1e-10
RAMIFICATION_THRESHOLD=1e-6
HALF_POINT_RADIUS=1e-6

# Continuation Settings
CONTINUATION_ORDER=24
DISC_RADIUS_FACTOR=0.6
SAMPLING_FLOOR=1.1
SAMPLE_HEIGHTS="1.05,1.5"
MAX_DISC_RADIUS=2.5

# Log Settings
LOG_LEVEL="INFO"
LOG_FILE="logs/robin_spectra.log"
LOG_ROTATION="1 day"
LOG_RETENTION="30 days"
"""

    output.write_text(env_content)
    click.echo(f"Generated environment file: {output}")
    click.echo("Please edit this file and rename it to .env")


def main() -> None:
    """メイン関数."""
    cli()


if __name__ == "__main__":
    main()
