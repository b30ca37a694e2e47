"""根探索モジュール.

偏角原理による矩形の再帰分割で正則関数の零点を数え上げ、Newton法で研磨する。
"""

import cmath
import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from loguru import logger

from .exceptions import NonConvergenceError
from .models import Window
from .special_functions import circle_nodes

ComplexFunction = Callable[[complex], complex]

# 分割線が零点を通ったときに順に試す分割位置
SPLIT_FRACTIONS = (0.5173, 0.4619, 0.5411)

# 1区間あたりの許容偏角変化
_MAX_ARG_STEP = math.pi / 4

_EDGE_NODES = 16
_EDGE_REFINE_DEPTH = 10


class Root(NamedTuple):
    """研磨済みの零点."""

    location: complex
    multiplicity: int
    ramified: bool


class _BoundaryRootError(Exception):
    """積分路上（またはごく近く）に零点がある."""


Rect = tuple[float, float, float, float]


def _finite(value: complex) -> bool:
    return math.isfinite(value.real) and math.isfinite(value.imag)


def _arg_change(
    f: ComplexFunction,
    z0: complex,
    z1: complex,
    f0: complex,
    f1: complex,
    depth: int,
) -> float:
    if f0 == 0 or f1 == 0:
        raise _BoundaryRootError
    delta = cmath.phase(f1 / f0)
    if abs(delta) <= _MAX_ARG_STEP:
        return delta
    if depth == 0:
        if abs(delta) < math.pi / 2:
            return delta
        raise _BoundaryRootError
    zm = 0.5 * (z0 + z1)
    fm = complex(f(zm))
    if not _finite(fm):
        raise NonConvergenceError(f"Non-finite function value at {zm}")
    if abs(fm) <= 1e-14 * (abs(f0) + abs(f1)):
        raise _BoundaryRootError
    return _arg_change(f, z0, zm, f0, fm, depth - 1) + _arg_change(
        f, zm, z1, fm, f1, depth - 1
    )


def winding_number(f: ComplexFunction, rect: Rect) -> int:
    """矩形の境界に沿った偏角変化から内部の零点数を数える.

    Args:
        f: 矩形の閉包で正則な関数
        rect: (re_min, re_max, im_min, im_max)

    Returns:
        重複度込みの零点数

    Raises:
        _BoundaryRootError: 境界上に零点がある場合

    """
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    total = 0.0
    for start, end in zip(corners, corners[1:] + corners[:1], strict=True):
        points = [start + (end - start) * k / _EDGE_NODES for k in range(_EDGE_NODES + 1)]
        values = [complex(f(z)) for z in points]
        if not all(_finite(v) for v in values):
            raise NonConvergenceError(f"Non-finite function value on edge {start}->{end}")
        for k in range(_EDGE_NODES):
            total += _arg_change(
                f, points[k], points[k + 1], values[k], values[k + 1], _EDGE_REFINE_DEPTH
            )
    count = total / (2 * math.pi)
    if abs(count - round(count)) > 0.1:
        raise _BoundaryRootError
    return int(round(count))


def circle_winding(
    f: ComplexFunction, center: complex, radius: float, nodes: int = 64
) -> int:
    """円周に沿った偏角変化（零点数 − 極数）.

    Args:
        f: 円周上で有限かつ0でない関数
        center: 中心
        radius: 半径
        nodes: 初期ノード数

    Returns:
        回転数

    Raises:
        NonConvergenceError: 1024ノードでも偏角変化を分解できない場合

    """
    while nodes <= 1024:
        points = circle_nodes(center, radius, nodes)
        values = np.array([complex(f(complex(z))) for z in points])
        if not np.all(np.isfinite(values)) or np.any(values == 0):
            raise NonConvergenceError(
                f"Contour around {center} passes through a singularity"
            )
        increments = np.angle(np.roll(values, -1) / values)
        if np.max(np.abs(increments)) <= math.pi / 2:
            return int(round(float(np.sum(increments)) / (2 * math.pi)))
        nodes *= 2
    raise NonConvergenceError(f"Argument change around {center} is not resolved")


def _central_difference(f: ComplexFunction, z: complex) -> complex:
    h = 1e-6 * max(1.0, abs(z))
    return (complex(f(z + h)) - complex(f(z - h))) / (2 * h)


def newton_polish(
    f: ComplexFunction,
    z0: complex,
    tol: float,
    max_iter: int,
    multiplicity: int = 1,
) -> complex:
    """中心差分の導関数を使うNewton法.

    Args:
        f: 関数
        z0: 初期値
        tol: ステップ幅の相対許容誤差
        max_iter: 最大反復回数
        multiplicity: 重複度（修正Newton法の係数）

    Returns:
        零点

    Raises:
        NonConvergenceError: 収束しなかった場合

    """
    z = complex(z0)
    for iteration in range(max_iter):
        fz = complex(f(z))
        if fz == 0:
            return z
        derivative = _central_difference(f, z)
        if derivative == 0 or not _finite(derivative) or not _finite(fz):
            raise NonConvergenceError(f"Newton derivative degenerate at {z}")
        step = multiplicity * fz / derivative
        z -= step
        logger.debug(f"Newton iteration {iteration}: z={z}, |step|={abs(step):.3e}")
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
    raise NonConvergenceError(f"Newton did not converge from {z0} in {max_iter} steps")


def _is_ramified(f: ComplexFunction, z: complex, threshold: float) -> bool:
    rho = 1e-3 * max(1.0, abs(z))
    scale = float(np.mean([abs(complex(f(p))) for p in circle_nodes(z, rho, 4)]))
    return abs(_central_difference(f, z)) * rho < threshold * scale


def _inside(rect: Rect, z: complex, slack: float) -> bool:
    re0, re1, im0, im1 = rect
    return re0 - slack <= z.real <= re1 + slack and im0 - slack <= z.imag <= im1 + slack


class ZeroFinder:
    """矩形内の零点をすべて求める.

    偏角原理で零点数を数え、零点が1つになるまで矩形を分割してNewton法で研磨する。
    分割線が零点に当たった場合は分割位置をずらして数え直す。
    """

    def __init__(
        self,
        f: ComplexFunction,
        tol: float,
        max_iter: int,
        max_depth: int,
        ramification_threshold: float,
    ) -> None:
        """初期化.

        Args:
            f: 正則関数
            tol: Newton法の許容誤差
            max_iter: Newton法の最大反復回数
            max_depth: 分割の最大深さ
            ramification_threshold: 分岐点判定の相対閾値

        """
        self.f = f
        self.tol = tol
        self.max_iter = max_iter
        self.max_depth = max_depth
        self.ramification_threshold = ramification_threshold

    def find(self, window: Window) -> list[Root]:
        """領域内の零点を求める.

        Args:
            window: 矩形領域

        Returns:
            零点のリスト（虚部、実部の順に整列）

        Raises:
            NonConvergenceError: 分割の最大深さでもNewton法が収束しない場合

        """
        if window.is_empty:
            return []
        size = max(window.re_max - window.re_min, window.im_max - window.im_min)
        pad = 1e-3 * size
        for _ in range(5):
            rect = (
                window.re_min - pad,
                window.re_max + pad,
                window.im_min - pad,
                window.im_max + pad,
            )
            try:
                count = winding_number(self.f, rect)
                break
            except _BoundaryRootError:
                pad *= 1.7
        else:
            raise NonConvergenceError(f"Zeros on the boundary of {window}")

        logger.debug(f"Window {rect} contains {count} zeros")
        roots = self._search(rect, count, 0)
        slack = 1e-9 * max(1.0, size)
        kept = [r for r in roots if window.contains(r.location, slack)]
        return sorted(
            self._deduplicate(kept, slack),
            key=lambda r: (r.location.imag, r.location.real),
        )

    def _deduplicate(self, roots: list[Root], slack: float) -> list[Root]:
        unique: list[Root] = []
        for root in roots:
            if any(abs(root.location - u.location) <= slack for u in unique):
                continue
            unique.append(root)
        return unique

    def _make_root(self, z: complex, multiplicity: int) -> Root:
        ramified = multiplicity > 1 or _is_ramified(self.f, z, self.ramification_threshold)
        if ramified:
            logger.warning(f"Possible ramification at s={z} (multiplicity {multiplicity})")
        return Root(location=z, multiplicity=multiplicity, ramified=ramified)

    def _search(self, rect: Rect, count: int, depth: int) -> list[Root]:
        if count <= 0:
            return []
        re0, re1, im0, im1 = rect
        center = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
        size = max(re1 - re0, im1 - im0)

        if count == 1:
            try:
                z = newton_polish(self.f, center, self.tol, self.max_iter)
            except NonConvergenceError:
                z = None
            # 偏角原理の零点はセルの内側にある：外に出た根は隣のセルのもの
            if z is not None and _inside(rect, z, 1e-9 * max(1.0, size)):
                return [self._make_root(z, 1)]

        if depth >= self.max_depth:
            if count == 1:
                raise NonConvergenceError(f"Newton failed in cell {rect}")
            # 重根の到達精度は tol^(1/重複度) 程度
            tol = self.tol ** (1 / count)
            z = newton_polish(self.f, center, tol, self.max_iter, multiplicity=count)
            return [self._make_root(z, count)]

        roots: list[Root] = []
        for child, child_count in self._split(rect, count):
            roots.extend(self._search(child, child_count, depth + 1))
        return roots

    def _children(self, rect: Rect, fraction: float) -> list[Rect]:
        re0, re1, im0, im1 = rect
        width, height = re1 - re0, im1 - im0
        re_mid = re0 + fraction * width
        im_mid = im0 + fraction * height
        if width > 1.5 * height:
            return [(re0, re_mid, im0, im1), (re_mid, re1, im0, im1)]
        if height > 1.5 * width:
            return [(re0, re1, im0, im_mid), (re0, re1, im_mid, im1)]
        return [
            (re0, re_mid, im0, im_mid),
            (re_mid, re1, im0, im_mid),
            (re0, re_mid, im_mid, im1),
            (re_mid, re1, im_mid, im1),
        ]

    def _split(self, rect: Rect, count: int) -> list[tuple[Rect, int]]:
        last: list[tuple[Rect, int]] | None = None
        for fraction in SPLIT_FRACTIONS:
            children = self._children(rect, fraction)
            try:
                counts = [winding_number(self.f, child) for child in children]
            except _BoundaryRootError:
                logger.debug(f"Split at fraction {fraction} hits a zero in {rect}")
                continue
            last = list(zip(children, counts, strict=True))
            if sum(counts) == count:
                return last
            logger.debug(f"Zero count mismatch in {rect}: {sum(counts)} != {count}")
        if last is None:
            raise NonConvergenceError(f"Every split line of {rect} hits a zero")
        logger.warning(f"Inconsistent zero counts in {rect}; using the last split")
        return last


def find_zeros(
    f: ComplexFunction,
    window: Window,
    tol: float,
    max_iter: int,
    max_depth: int = 12,
    ramification_threshold: float = 1e-6,
) -> list[Root]:
    """矩形内の零点をすべて求める（ZeroFinderの簡易呼び出し）."""
    finder = ZeroFinder(f, tol, max_iter, max_depth, ramification_threshold)
    return finder.find(window)
