"""CSV出力モジュール.

スペクトル・曲線追跡・解析接続・分岐点探索の結果を CSV として書き出す。
浮動小数点は17桁の有効数字で書き、同じ入力からは同じバイト列を出力する。
"""

import csv
import math
import sys
from pathlib import Path
from types import TracebackType
from typing import Any, TextIO

from loguru import logger

from .models import RamificationPoint, SpectralPoint

SPECTRUM_HEADER = (
    "gamma_re",
    "gamma_im",
    "s_re",
    "s_im",
    "lambda_re",
    "lambda_im",
    "robin_residual",
)

TRACE_HEADER = (
    "t",
    "gamma_re",
    "gamma_im",
    "s_re",
    "s_im",
    "lambda_re",
    "lambda_im",
    "lambda_prime_formula_re",
    "lambda_prime_formula_im",
    "lambda_prime_fd_re",
    "lambda_prime_fd_im",
    "flag",
)

CONTINUE_HEADER = (
    "s_re",
    "s_im",
    "beta_cont_re",
    "beta_cont_im",
    "beta_oracle_re",
    "beta_oracle_im",
    "abs_diff",
    "pole_flag",
)

BRANCH_HEADER = ("s_re", "s_im", "order", "pairing_ratio", "verified")

VERIFY_HEADER = ("name", "tolerance", "observed", "passed")

# エラー行の先頭セル
ERROR_MARKER = "error"

Cell = str | int | float | bool


def format_float(value: float) -> str:
    """17桁の有効数字で書く（inf / -inf / nan はそのまま）."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def format_cell(value: Cell) -> str:
    """1セル分の文字列."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return value


def complex_cells(value: complex) -> list[float]:
    """実部と虚部の2セル."""
    value = complex(value)
    return [value.real, value.imag]


def spectrum_row(point: SpectralPoint, residual: float) -> list[Cell]:
    """spectrum コマンドの1行."""
    return [
        *complex_cells(point.gamma),
        *complex_cells(point.s),
        *complex_cells(point.lam),
        residual,
    ]


def trace_row(
    t: float,
    point: SpectralPoint,
    formula: complex,
    fd: complex,
    flag: str = "",
) -> list[Cell]:
    """trace コマンドの1行."""
    return [
        t,
        *complex_cells(point.gamma),
        *complex_cells(point.s),
        *complex_cells(point.lam),
        *complex_cells(formula),
        *complex_cells(fd),
        flag,
    ]


def continue_row(
    s: complex, continued: complex, oracle: complex, pole_flag: bool
) -> list[Cell]:
    """continue コマンドの1行."""
    return [
        *complex_cells(s),
        *complex_cells(continued),
        *complex_cells(oracle),
        abs(continued - oracle),
        pole_flag,
    ]


def branch_row(point: RamificationPoint) -> list[Cell]:
    """branch コマンドの1行."""
    return [*complex_cells(point.s), point.order, point.pairing_ratio, point.verified]


class CsvReport:
    """ヘッダー付きの CSV 出力.

    出力先を省略すると標準出力に書く。with 文の中で例外が起きた場合も
    それまでの行は書き出される。
    """

    def __init__(self, header: tuple[str, ...], output_path: Path | None = None) -> None:
        """初期化.

        Args:
            header: ヘッダー行
            output_path: 出力先（省略時は標準出力）

        """
        self.header = header
        self.output_path = output_path
        self.rows = 0
        self._stream: TextIO | None = None
        self._writer: Any = None

    def __enter__(self) -> "CsvReport":
        """出力先を開いてヘッダーを書く."""
        if self.output_path is None:
            self._stream = sys.stdout
        else:
            self.output_path.parent.mkdir(parents=True, exist_ok=True)
            self._stream = self.output_path.open("w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._stream, lineterminator="\n")
        self._writer.writerow(self.header)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        """出力先を閉じる."""
        if self._stream is not None:
            self._stream.flush()
            if self._stream is not sys.stdout:
                self._stream.close()
                logger.info(f"Wrote {self.rows} rows to {self.output_path}")
        self._stream = None
        self._writer = None

    def write_row(self, cells: list[Cell]) -> None:
        """1行書く."""
        if self._writer is None:
            raise RuntimeError("CsvReport is not open")
        self._writer.writerow([format_cell(cell) for cell in cells])
        self.rows += 1

    def write_error(self, error: BaseException) -> None:
        """エラー行（末尾の行）を書く."""
        if self._writer is None:
            raise RuntimeError("CsvReport is not open")
        self._writer.writerow([ERROR_MARKER, f"{type(error).__name__}: {error}"])
