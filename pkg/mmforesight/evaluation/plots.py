import logging
import math
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..exceptions import ContractError, DataError

WIDTH, HEIGHT = 640, 400
MARGIN = (60, 30, 20, 50)  # left, top, right, bottom
BACKGROUND = (255, 255, 255)
AXIS = (0, 0, 0)
GRID = (225, 225, 225)
SERIES = (
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
)


class Canvas:
    """
    A plotting area in data coordinates on a Pillow image
    """

    def __init__(
        self,
        x_range: Tuple[float, float],
        y_range: Tuple[float, float],
        title: str = "",
        size: Tuple[int, int] = (WIDTH, HEIGHT),
    ) -> None:
        self.image = Image.new("RGB", size, BACKGROUND)
        self.draw = ImageDraw.Draw(self.image)
        self.font = ImageFont.load_default()
        self.x_range = x_range
        self.y_range = _padded(y_range)
        left, top, right, bottom = MARGIN
        self.box = (left, top, size[0] - right, size[1] - bottom)
        if title:
            self.draw.text((left, 8), title, fill=AXIS, font=self.font)

    def to_pixel(self, x: float, y: float) -> Tuple[float, float]:
        left, top, right, bottom = self.box
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        px = left + (x - x0) / ((x1 - x0) or 1.0) * (right - left)
        py = bottom - (y - y0) / ((y1 - y0) or 1.0) * (bottom - top)
        return px, py

    def axes(self, y_ticks: int = 5) -> None:
        left, top, right, bottom = self.box
        y0, y1 = self.y_range
        for i in range(y_ticks + 1):
            value = y0 + (y1 - y0) * i / y_ticks
            _, py = self.to_pixel(self.x_range[0], value)
            self.draw.line([(left, py), (right, py)], fill=GRID)
            self.draw.text((4, py - 6), f"{value:.3f}", fill=AXIS, font=self.font)
        self.draw.line([(left, top), (left, bottom), (right, bottom)], fill=AXIS, width=1)

    def x_label(self, x: float, text: str) -> None:
        px, _ = self.to_pixel(x, self.y_range[0])
        width = self.draw.textlength(text, font=self.font)
        self.draw.text((px - width / 2, self.box[3] + 6), text, fill=AXIS, font=self.font)

    def legend(self, labels: Sequence[str]) -> None:
        x = self.box[0] + 8
        y = self.box[3] + 24
        for index, label in enumerate(labels):
            color = SERIES[index % len(SERIES)]
            self.draw.rectangle([x, y + 2, x + 8, y + 10], fill=color)
            self.draw.text((x + 12, y), label, fill=AXIS, font=self.font)
            x += 24 + self.draw.textlength(label, font=self.font)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.image.save(path)
        except OSError as error:
            raise DataError(f"Cannot write plot {path}: {error}") from error
        logging.getLogger("mmforesight.py").info(f"Wrote {path}")
        return path


def _padded(y_range: Tuple[float, float]) -> Tuple[float, float]:
    low, high = y_range
    if not (math.isfinite(low) and math.isfinite(high)):
        return 0.0, 1.0
    if high - low < 1e-6:
        return low - 0.05, high + 0.05
    pad = 0.05 * (high - low)
    return low - pad, high + pad


def _finite_range(values: Sequence[float]) -> Tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    return min(finite), max(finite)


def plot_curves(
    curves: Dict[str, Tuple[Sequence[int], Sequence[float]]],
    path: Union[str, Path],
    title: str = "SSIM per timestep",
) -> Path:
    """
    Line chart of one SSIM-versus-timestep curve per label
    """
    if not curves:
        raise ContractError("Nothing to plot")
    xs = [x for steps, _ in curves.values() for x in steps]
    ys = [float(y) for _, values in curves.values() for y in values]
    canvas = Canvas((min(xs), max(xs)), _finite_range(ys), title)
    canvas.axes()
    for x in sorted(set(xs)):
        canvas.x_label(x, str(x))

    for index, (label, (steps, values)) in enumerate(curves.items()):
        color = SERIES[index % len(SERIES)]
        points = [
            canvas.to_pixel(x, float(y)) for x, y in zip(steps, values) if math.isfinite(float(y))
        ]
        if len(points) > 1:
            canvas.draw.line(points, fill=color, width=2)
        for px, py in points:
            canvas.draw.ellipse([px - 2, py - 2, px + 2, py + 2], fill=color)
    canvas.legend(list(curves))
    return canvas.save(path)


def plot_bars(
    groups: Dict[str, Dict[str, float]],
    path: Union[str, Path],
    title: str = "SSIM per behavior",
) -> Path:
    """
    Grouped bar chart: one group per key of `groups` (behaviors, then the
    averaged column), one bar per series inside each group.
    """
    if not groups:
        raise ContractError("Nothing to plot")
    series = []
    for values in groups.values():
        series += [label for label in values if label not in series]
    values = [v for group in groups.values() for v in group.values()]
    low, high = _finite_range(values)

    canvas = Canvas((0.0, float(len(groups))), (min(0.0, low), high), title)
    canvas.axes()
    width = 0.8 / max(len(series), 1)
    for group_index, (group, bars) in enumerate(groups.items()):
        canvas.x_label(group_index + 0.5, group)
        for series_index, label in enumerate(series):
            value = bars.get(label, float("nan"))
            if not math.isfinite(value):
                continue
            x = group_index + 0.1 + series_index * width
            x0, y0 = canvas.to_pixel(x, value)
            x1, y1 = canvas.to_pixel(x + width, canvas.y_range[0])
            box = [x0, min(y0, y1), max(x0, x1 - 1), max(y0, y1)]
            canvas.draw.rectangle(box, fill=SERIES[series_index % len(SERIES)])
    canvas.legend(series)
    return canvas.save(path)


def plot_frames(
    truth: np.ndarray,
    predicted: np.ndarray,
    path: Union[str, Path],
    scale: int = 4,
    gap: int = 2,
) -> Path:
    """
    Frame strips of one trial: ground truth on top, predictions below,
    aligned so each prediction sits under the frame it predicts.

    :param truth: T×3×H×W in [0, 1]
    :param predicted: (T-K)×3×H×W in [0, 1]
    """
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.ndim != 4 or predicted.ndim != 4 or truth.shape[1:] != predicted.shape[1:]:
        raise ContractError(
            f"Frame strips need T×3×H×W arrays, got {truth.shape} and {predicted.shape}"
        )
    length, _, height, width = truth.shape
    context = length - len(predicted)
    if context < 0:
        raise ContractError("More predictions than ground-truth frames")

    cell_w, cell_h = width * scale + gap, height * scale + gap
    strip = Image.new("RGB", (length * cell_w, 2 * cell_h), BACKGROUND)

    def tile(frame: np.ndarray) -> Image.Image:
        pixels = np.clip(np.transpose(frame, (1, 2, 0)) * 255.0 + 0.5, 0, 255).astype(np.uint8)
        return Image.fromarray(pixels, "RGB").resize(
            (width * scale, height * scale), Image.NEAREST
        )

    for t in range(length):
        strip.paste(tile(truth[t]), (t * cell_w, 0))
    for s, frame in enumerate(predicted):
        strip.paste(tile(frame), ((context + s) * cell_w, cell_h))

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        strip.save(path)
    except OSError as error:
        raise DataError(f"Cannot write frame strip {path}: {error}") from error
    return path
