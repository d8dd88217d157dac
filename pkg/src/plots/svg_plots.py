"""
SVG line charts
Draws p-value paths, p-value comparisons, type-I error curves and simulation
summaries with QPainter into an SVG file, headless through the offscreen Qt
platform.
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from src.core.modes import LASSO_MODES, SimulationMethod, VarianceMode
from src.models.results import ErrorCurvePoint, ScoreTestResult
from src.models.study import SimulationSummary

os.environ.setdefault("QT_QPA_PLATFORM", "offscreen")

from PyQt6.QtCore import QPointF, QRect, QRectF, QSize, Qt  # noqa: E402
from PyQt6.QtGui import QBrush, QColor, QFont, QGuiApplication, QPainter, QPen, QPolygonF  # noqa: E402
from PyQt6.QtSvg import QSvgGenerator  # noqa: E402

logger = logging.getLogger(__name__)

PALETTE = ["#0e639c", "#4CAF50", "#FF9800", "#FF5555", "#2196F3",
           "#9C27B0", "#795548", "#00BCD4", "#F57C00", "#607D8B"]
BOUNDARY_COLOR = "#000000"

WIDTH, PANEL_HEIGHT = 1200, 800
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 110, 260, 70, 90
TICKS = 6
MARKER_RADIUS = 5


@dataclass
class Series:
    """One polyline (or set of points) with its legend entry"""

    label: str
    xs: np.ndarray
    ys: np.ndarray
    color: str
    dashed: bool = False
    width: float = 2.5
    markers: bool = False
    in_legend: bool = True

    def pen(self) -> QPen:
        pen = QPen(QColor(self.color), self.width)
        if self.dashed:
            pen.setStyle(Qt.PenStyle.DashLine)
        return pen


def _application() -> QGuiApplication:
    app = QGuiApplication.instance()
    if app is None:
        app = QGuiApplication(["penscore"])
    return app


def _draw_label(painter: QPainter, x: float, y: float, text: str, alignment: str):
    """Text anchored at (x, y): 'left', 'center' or 'right'"""
    text_width = painter.fontMetrics().horizontalAdvance(text)
    if alignment == "center":
        x -= text_width / 2
    elif alignment == "right":
        x -= text_width
    painter.drawText(QPointF(x, y), text)


class LineChart:
    """Axes, series and legend painted into one panel"""

    def __init__(self, title: str, x_label: str, y_label: str):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.series: List[Series] = []
        self.vertical_lines: List[float] = []
        self.notes: List[str] = []

    def add(self, series: Series):
        self.series.append(series)

    def _ranges(self) -> Tuple[float, float, float, float]:
        xs = np.concatenate([s.xs for s in self.series] + [np.array(self.vertical_lines)])
        ys = np.concatenate([s.ys for s in self.series])
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
        y_lo, y_hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        if x_hi <= x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        if y_hi <= y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad = 0.05 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def render(self, path: Path):
        """Write the chart alone to an SVG file"""
        render_panels([self], path)

    def paint(self, painter: QPainter, frame: QRectF):
        """Draw the chart inside frame"""
        x_lo, x_hi, y_lo, y_hi = self._ranges()
        left, top = frame.left() + MARGIN_LEFT, frame.top() + MARGIN_TOP
        plot_w = frame.width() - MARGIN_LEFT - MARGIN_RIGHT
        plot_h = frame.height() - MARGIN_TOP - MARGIN_BOTTOM
        bottom = frame.top() + frame.height()

        def to_px(x, y):
            return QPointF(left + (x - x_lo) / (x_hi - x_lo) * plot_w,
                           top + (y_hi - y) / (y_hi - y_lo) * plot_h)

        painter.setFont(QFont("Arial", 18, QFont.Weight.Bold))
        painter.setPen(QPen(QColor(0, 0, 0)))
        _draw_label(painter, frame.left() + frame.width() / 2, frame.top() + 40, self.title, "center")

        # axes and ticks
        painter.setFont(QFont("Arial", 12))
        painter.setPen(QPen(QColor(0, 0, 0), 2))
        painter.drawRect(QRectF(left, top, plot_w, plot_h))
        grid_pen = QPen(QColor("#dddddd"), 1)
        for value in np.linspace(x_lo, x_hi, TICKS):
            point = to_px(value, y_lo)
            painter.setPen(grid_pen)
            painter.drawLine(QPointF(point.x(), top), QPointF(point.x(), top + plot_h))
            painter.setPen(QPen(QColor(0, 0, 0)))
            _draw_label(painter, point.x(), top + plot_h + 25, f"{value:.3g}", "center")
        for value in np.linspace(y_lo, y_hi, TICKS):
            point = to_px(x_lo, value)
            painter.setPen(grid_pen)
            painter.drawLine(QPointF(left, point.y()), QPointF(left + plot_w, point.y()))
            painter.setPen(QPen(QColor(0, 0, 0)))
            _draw_label(painter, left - 10, point.y() + 5, f"{value:.3g}", "right")

        painter.setFont(QFont("Arial", 14))
        _draw_label(painter, left + plot_w / 2, bottom - 30, self.x_label, "center")
        painter.save()
        painter.translate(frame.left() + 35, top + plot_h / 2)
        painter.rotate(-90)
        _draw_label(painter, 0, 0, self.y_label, "center")
        painter.restore()

        painter.setPen(QPen(QColor(BOUNDARY_COLOR), 1.5, Qt.PenStyle.DotLine))
        for x in self.vertical_lines:
            painter.drawLine(to_px(x, y_lo), to_px(x, y_hi))

        # series, broken at non-finite values
        for series in self.series:
            painter.setPen(series.pen())
            if series.markers:
                painter.setBrush(QBrush(QColor(series.color)))
                for x, y in zip(series.xs, series.ys):
                    if np.isfinite(x) and np.isfinite(y):
                        painter.drawEllipse(to_px(x, y), MARKER_RADIUS, MARKER_RADIUS)
                painter.setBrush(Qt.BrushStyle.NoBrush)
                continue
            segment = []
            for x, y in zip(series.xs, series.ys):
                if np.isfinite(x) and np.isfinite(y):
                    segment.append(to_px(x, y))
                    continue
                if len(segment) > 1:
                    painter.drawPolyline(QPolygonF(segment))
                segment = []
            if len(segment) > 1:
                painter.drawPolyline(QPolygonF(segment))
            elif len(segment) == 1:
                painter.drawEllipse(segment[0], 4, 4)

        # legend
        painter.setFont(QFont("Arial", 11))
        legend_x = left + plot_w + 20
        entries = [s for s in self.series if s.in_legend]
        for k, series in enumerate(entries):
            y = top + 20 + 24 * k
            painter.setPen(series.pen())
            if series.markers:
                painter.setBrush(QBrush(QColor(series.color)))
                painter.drawEllipse(QPointF(legend_x + 17, y - 5), MARKER_RADIUS, MARKER_RADIUS)
                painter.setBrush(Qt.BrushStyle.NoBrush)
            else:
                painter.drawLine(QPointF(legend_x, y - 5), QPointF(legend_x + 35, y - 5))
            painter.setPen(QPen(QColor(0, 0, 0)))
            _draw_label(painter, legend_x + 45, y, series.label[:28], "left")
        painter.setFont(QFont("Arial", 10))
        for k, note in enumerate(self.notes):
            _draw_label(painter, left, bottom - 8 - 14 * (len(self.notes) - 1 - k), note, "left")


def render_panels(charts: Sequence[LineChart], path: Path):
    """Write charts stacked top to bottom into one SVG file"""
    if not charts:
        raise ValueError("Nothing to plot")
    _application()
    height = PANEL_HEIGHT * len(charts)
    generator = QSvgGenerator()
    generator.setFileName(str(path))
    generator.setSize(QSize(WIDTH, height))
    generator.setViewBox(QRect(0, 0, WIDTH, height))
    generator.setTitle(charts[0].title)

    painter = QPainter(generator)
    painter.setRenderHint(QPainter.RenderHint.Antialiasing)
    painter.fillRect(QRectF(0, 0, WIDTH, height), QColor(255, 255, 255))
    try:
        for k, chart in enumerate(charts):
            chart.paint(painter, QRectF(0, k * PANEL_HEIGHT, WIDTH, PANEL_HEIGHT))
    finally:
        painter.end()
    logger.info(f"Wrote plot {path} ({len(charts)} panel(s))")


def _neg_log10(p_values: Sequence[float]) -> np.ndarray:
    p = np.asarray(p_values, dtype=float)
    return -np.log10(np.clip(p, 1e-300, 1.0))


def plot_path(results: Sequence[ScoreTestResult], path: Path,
              n: Optional[int] = None, sigma2: Optional[float] = None,
              slr_p: Optional[Sequence[float]] = None, mlr_p: Optional[Sequence[float]] = None,
              mark_lambda: Optional[float] = None):
    """
    -log10 p-value against lambda, one curve per feature

    Conservative-mode paths also get the lasso decision boundary
    2 Phi(-sqrt(n) lambda / sigma) when n and sigma2 are given. Per-feature
    multiple-regression p-values (mlr_p) are marked at the left end of the
    grid and simple-regression p-values (slr_p) at the right end.
    """
    by_feature: Dict[int, List[ScoreTestResult]] = {}
    for result in results:
        by_feature.setdefault(result.feature, []).append(result)
    if not by_feature:
        raise ValueError("Nothing to plot")

    modes = {r.variance_mode for r in results}
    lambdas = np.unique([r.lam for r in results])
    chart = LineChart("Penalized score test p-values", "lambda", "-log10 p-value")
    for k, (feature, rows) in enumerate(sorted(by_feature.items())):
        rows = sorted(rows, key=lambda r: r.lam)
        color = PALETTE[k % len(PALETTE)]
        chart.add(Series(rows[0].name or str(feature), np.array([r.lam for r in rows]),
                         _neg_log10([r.p_value for r in rows]), color,
                         dashed=rows[0].variance_mode is VarianceMode.CONSERVATIVE))
        ends = []
        if mlr_p is not None:
            ends.append((lambdas[0], mlr_p[feature]))
        if slr_p is not None:
            ends.append((lambdas[-1], slr_p[feature]))
        if ends:
            chart.add(Series("", np.array([x for x, _ in ends]), _neg_log10([p for _, p in ends]),
                             color, markers=True, in_legend=False))

    if modes == {VarianceMode.CONSERVATIVE} and n is not None and sigma2 is not None:
        boundary = 2.0 * norm.sf(np.sqrt(n) * lambdas / np.sqrt(sigma2))
        chart.add(Series("lasso boundary", lambdas, _neg_log10(boundary), BOUNDARY_COLOR, width=3.0))
    if mlr_p is not None or slr_p is not None:
        chart.notes.append("dots: multiple regression (left), simple regression (right)")
    if mark_lambda is not None:
        chart.vertical_lines.append(float(mark_lambda))
    chart.render(path)


def _scatter_panel(title: str, x_label: str, y_label: str,
                   xs: Sequence[float], ys: Sequence[float], color: str) -> LineChart:
    chart = LineChart(title, x_label, y_label)
    x, y = _neg_log10(xs), _neg_log10(ys)
    top = float(np.max(np.concatenate([x, y]), initial=1.0))
    chart.add(Series("y = x", np.array([0.0, top]), np.array([0.0, top]), BOUNDARY_COLOR, width=1.5))
    chart.add(Series("features", x, y, color, markers=True))
    return chart


def plot_comparison(penalized_p: Sequence[float], slr_p: Sequence[float], path: Path,
                    mlr_p: Optional[Sequence[float]] = None, lam: Optional[float] = None):
    """
    Scatter of -log10 p-values: penalized test against simple and multiple
    regression, and multiple against simple regression
    """
    if len(penalized_p) == 0:
        raise ValueError("Nothing to plot")
    label = "penalized score test" + (f" (lambda={lam:g})" if lam is not None else "")
    panels = [_scatter_panel("Penalized vs simple regression", "-log10 p, simple regression",
                             f"-log10 p, {label}", slr_p, penalized_p, PALETTE[0])]
    if mlr_p is not None:
        panels.append(_scatter_panel("Penalized vs multiple regression", "-log10 p, multiple regression",
                                     f"-log10 p, {label}", mlr_p, penalized_p, PALETTE[1]))
        panels.append(_scatter_panel("Multiple vs simple regression", "-log10 p, simple regression",
                                     "-log10 p, multiple regression", slr_p, mlr_p, PALETTE[2]))
    render_panels(panels, path)


def plot_error_curves(points: Sequence[ErrorCurvePoint], path: Path):
    """Relative type-I error against gamma; solid asymptotic, dashed conservative"""
    groups: Dict[Tuple[float, float, VarianceMode], List[ErrorCurvePoint]] = {}
    for point in points:
        groups.setdefault((point.rho, point.nominal_level, point.variance_mode), []).append(point)
    if not groups:
        raise ValueError("Nothing to plot")

    colors: Dict[Tuple[float, float], str] = {}
    chart = LineChart("Relative type-I error", "gamma", "observed / nominal")
    for (rho, level, mode), rows in sorted(groups.items(), key=lambda item: (item[0][0], item[0][1],
                                                                             LASSO_MODES.index(item[0][2]))):
        rows = sorted(rows, key=lambda p: p.gamma)
        color = colors.setdefault((rho, level), PALETTE[len(colors) % len(PALETTE)])
        chart.add(Series(f"rho={rho:g} level={level:g} {mode.value}",
                         np.array([p.gamma for p in rows]),
                         np.array([p.relative_error for p in rows]),
                         color, dashed=mode is VarianceMode.CONSERVATIVE))
    chart.render(path)


def plot_simulation(summary: SimulationSummary, path: Path):
    """
    EFP and power of each method against lambda with the nominal EFP line,
    and below it the mean lasso support size against lambda
    """
    lambdas = np.array(summary.config.lambdas)
    rates = LineChart("Simulation: EFP (solid) and power (dashed)", "lambda", "EFP / power")
    nominal = summary.config.n_null * summary.config.cutoff
    rates.add(Series("nominal EFP", lambdas, np.full(lambdas.shape, nominal), BOUNDARY_COLOR, width=1.5))

    support = LineChart("Mean lasso support size", "lambda", "non-zero coefficients")
    support.add(Series("true signals", lambdas, np.full(lambdas.shape, float(summary.config.n_signals)),
                       BOUNDARY_COLOR, width=1.5))

    for k, method in enumerate(SimulationMethod):
        rows = [m for m in summary.methods if m.method is method]
        if not rows:
            continue
        color = PALETTE[k % len(PALETTE)]
        if method is SimulationMethod.PENALIZED_SCORE:
            rows = sorted(rows, key=lambda m: m.lam)
            xs = np.array([m.lam for m in rows])
            efp = np.array([m.efp for m in rows])
            power = np.array([m.power for m in rows])
            support.add(Series("lasso", xs, np.array([m.mean_support for m in rows]), color))
        else:
            xs = lambdas
            efp = np.full(lambdas.shape, rows[0].efp)
            power = np.full(lambdas.shape, rows[0].power)
        rates.add(Series(f"{method.value} EFP", xs, efp, color))
        rates.add(Series(f"{method.value} power", xs, power, color, dashed=True))

    panels = [rates]
    if len(support.series) > 1:
        panels.append(support)
    render_panels(panels, path)
