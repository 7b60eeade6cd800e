"""Deterministic chart rendering for samples, plus spectral transforms.

Time mode draws one line per channel with a legend and x-axis tick labels;
Frequency mode draws an STFT magnitude spectrogram in decibels with a
colorbar legend.  Rendering is a pure function of (sample, spec, config):
identical inputs produce byte-identical PNGs (figures are built through the
object-oriented matplotlib API on the Agg backend, so parallel rendering is
safe and no global state is touched).
"""
from __future__ import annotations

import enum
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from matplotlib.figure import Figure

from .core import TaskSpec, TimeSeriesSample


class VizError(Exception):
    """Base class for rendering failures."""


class SignalTooShort(VizError):
    pass


class ConfigMismatch(VizError):
    pass


class RenderMode(enum.Enum):
    TIME = "time"
    FREQUENCY = "frequency"


class Detail(enum.Enum):
    LOW = "low"
    AUTO = "auto"


#: Added to |X| before taking log10 so silent frames map to a finite floor
#: (20*log10(1e-10) = -200 dB) instead of -inf.
DB_FLOOR_EPS = 1e-10

DEFAULT_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

# Fixed axes geometry (fractions of the canvas). The legend and colorbar live
# strictly in the right margin and tick labels strictly below the axes, so
# toggling them never moves or redraws the plot interior.
_AXES_RECT = (0.10, 0.12, 0.62, 0.80)
_CBAR_RECT = (0.76, 0.12, 0.03, 0.80)
_DPI = 100


@dataclass(frozen=True)
class StftConfig:
    """Short-time Fourier transform parameters (periodic Hann window)."""

    window_len: int = 256
    hop: int = 128

    def __post_init__(self) -> None:
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if not (1 <= self.hop <= self.window_len):
            raise ValueError("hop must satisfy 1 <= hop <= window_len")


@dataclass(frozen=True)
class RenderConfig:
    """Controls for chart rendering.

    ``show_timestamps`` toggles the x-axis tick labels and ``show_legend`` the
    channel legend (Time mode) or dB colorbar (Frequency mode); both exist so
    their contribution can be measured by diffing renders.
    """

    mode: RenderMode = RenderMode.TIME
    width_px: int = 640
    height_px: int = 480
    show_timestamps: bool = True
    show_legend: bool = True
    palette: tuple[str, ...] = DEFAULT_PALETTE
    stft: StftConfig = field(default_factory=StftConfig)
    colormap: str = "viridis"
    detail: Detail = Detail.LOW
    frequency_channel: int | None = None

    def __post_init__(self) -> None:
        if self.width_px < 64 or self.height_px < 64:
            raise ValueError("width_px and height_px must be >= 64")
        if not self.palette:
            raise ValueError("palette must not be empty")


def default_render_config(task_name: str) -> RenderConfig:
    """Per-task defaults: frequency-domain at auto detail for RCW, time-domain
    at low detail for everything else."""
    if task_name == "RCW":
        return RenderConfig(mode=RenderMode.FREQUENCY, detail=Detail.AUTO)
    return RenderConfig()


@dataclass(frozen=True)
class RenderedImage:
    """A PNG render plus the detail level it should be billed at."""

    png_bytes: bytes
    width_px: int
    height_px: int
    detail: Detail = Detail.LOW

    def __post_init__(self) -> None:
        width, height = png_dimensions(self.png_bytes)
        if (width, height) != (self.width_px, self.height_px):
            raise ValueError(
                f"PNG is {width}x{height}, declared {self.width_px}x{self.height_px}"
            )


def png_dimensions(data: bytes) -> tuple[int, int]:
    """Parse (width, height) from a PNG header; raises ValueError otherwise."""
    if len(data) < 24 or data[:8] != b"\x89PNG\r\n\x1a\n" or data[12:16] != b"IHDR":
        raise ValueError("not a PNG byte stream")
    width, height = struct.unpack(">II", data[16:24])
    return width, height


@dataclass(frozen=True)
class Spectrogram:
    """STFT magnitudes in dB, laid out [frequency bin, frame]."""

    magnitudes_db: np.ndarray
    freq_resolution_hz: float
    frame_times: tuple[int, ...]

    def __post_init__(self) -> None:
        self.magnitudes_db.setflags(write=False)

    @property
    def num_bins(self) -> int:
        return self.magnitudes_db.shape[0]

    @property
    def num_frames(self) -> int:
        return self.magnitudes_db.shape[1]


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def dft(signal) -> np.ndarray:
    """Forward unnormalized DFT: X[k] = sum_t x[t] * exp(-2*pi*i*k*t/n)."""
    x = np.asarray(signal)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("signal must be a non-empty 1-D sequence")
    return np.fft.fft(x)


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window: w[k] = 0.5 * (1 - cos(2*pi*k/length))."""
    k = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / length))


def stft_spectrogram(signal, config: RenderConfig) -> Spectrogram:
    """Hann-windowed STFT magnitude spectrogram in decibels.

    Frames start at multiples of ``hop``; the frame count is
    floor((n - window_len) / hop) + 1 and only full frames are taken.
    """
    x = np.asarray(signal, dtype=float)
    window_len, hop = config.stft.window_len, config.stft.hop
    if x.size < window_len:
        raise SignalTooShort(
            f"signal length {x.size} < window_len {window_len}"
        )
    window = hann_window(window_len)
    num_frames = (x.size - window_len) // hop + 1
    num_bins = window_len // 2 + 1
    mags = np.empty((num_bins, num_frames), dtype=float)
    frame_times = []
    for frame in range(num_frames):
        start = frame * hop
        spectrum = dft(x[start:start + window_len] * window)[:num_bins]
        mags[:, frame] = 20.0 * np.log10(np.abs(spectrum) + DB_FLOOR_EPS)
        frame_times.append(start)
    return Spectrogram(
        magnitudes_db=mags,
        freq_resolution_hz=1.0 / window_len,
        frame_times=tuple(frame_times),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _x_axis(spec: TaskSpec, indices: np.ndarray) -> tuple[np.ndarray, str]:
    if spec.sampling_rate_hz is not None:
        return indices / spec.sampling_rate_hz, "time (s)"
    return indices, "time (samples)"


def build_figure(sample: TimeSeriesSample, spec: TaskSpec, config: RenderConfig) -> Figure:
    """Assemble the matplotlib Figure for a sample without rasterizing it."""
    fig = Figure(figsize=(config.width_px / _DPI, config.height_px / _DPI), dpi=_DPI)
    ax = fig.add_axes(_AXES_RECT)

    if config.mode is RenderMode.TIME:
        indices = np.arange(sample.series_length)
        xs, xlabel = _x_axis(spec, indices)
        for ch_index, channel in enumerate(sample.values):
            color = config.palette[ch_index % len(config.palette)]
            ax.plot(xs, channel, color=color, linewidth=1.0,
                    label=spec.variable_labels[ch_index])
        ax.set_xlabel(xlabel)
        ax.set_ylabel(spec.variable_labels[0] if spec.num_variables == 1 else "value")
        ax.set_xlim(float(xs[0]), float(xs[-1]) if len(xs) > 1 else float(xs[0]) + 1.0)
        if config.show_legend:
            ax.legend(loc="center left", bbox_to_anchor=(1.03, 0.5), frameon=True)
    else:
        if sample.num_variables > 1 and config.frequency_channel is None:
            raise ConfigMismatch(
                "frequency mode needs a univariate sample or a designated frequency_channel"
            )
        channel_index = config.frequency_channel or 0
        if not (0 <= channel_index < sample.num_variables):
            raise ConfigMismatch(f"frequency_channel {channel_index} out of range")
        spec_gram = stft_spectrogram(sample.values[channel_index], config)
        frame_starts = np.asarray(spec_gram.frame_times, dtype=float)
        xs, xlabel = _x_axis(spec, frame_starts)
        if spec.sampling_rate_hz is not None:
            freq_top = (spec_gram.num_bins - 1) * spec.sampling_rate_hz / config.stft.window_len
            ylabel = "frequency (Hz)"
        else:
            freq_top = float(spec_gram.num_bins - 1)
            ylabel = "frequency (bin)"
        image = ax.imshow(
            spec_gram.magnitudes_db,
            origin="lower",
            aspect="auto",
            cmap=config.colormap,
            extent=(float(xs[0]), float(xs[-1]) if len(xs) > 1 else float(xs[0]) + 1.0,
                    0.0, freq_top),
        )
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if config.show_legend:
            cax = fig.add_axes(_CBAR_RECT)
            fig.colorbar(image, cax=cax)
            cax.set_ylabel("dB")

    if not config.show_timestamps:
        ax.set_xticks([])
    return fig


def render(sample: TimeSeriesSample, spec: TaskSpec, config: RenderConfig) -> RenderedImage:
    """Render a sample as an annotated PNG chart.

    Frequency mode works on a single channel: for multivariate samples a
    ``frequency_channel`` must be designated in the config.
    """
    fig = build_figure(sample, spec, config)
    buf = io.BytesIO()
    fig.savefig(buf, format="png")
    return RenderedImage(
        png_bytes=buf.getvalue(),
        width_px=config.width_px,
        height_px=config.height_px,
        detail=config.detail,
    )


# ---------------------------------------------------------------------------
# Image token estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImageTokenRule:
    """Provider billing rule for image inputs.

    Low detail costs a flat constant. Auto detail costs
    ``auto_base_tokens + tiles * auto_tokens_per_tile`` where tiles is the
    number of ``tile_px`` squares covering the declared pixel dimensions.
    The default per-tile increment is calibrated so the default 640x480
    auto-detail spectrogram is billed at 262 tokens; override per provider.
    """

    name: str = "gpt-4o"
    low_detail_tokens: int = 85
    auto_base_tokens: int = 85
    auto_tokens_per_tile: int = 177
    tile_px: int = 1024

    def __post_init__(self) -> None:
        if self.tile_px < 1:
            raise ValueError("tile_px must be >= 1")


GPT4O_TOKEN_RULE = ImageTokenRule()


def estimate_image_tokens(image: RenderedImage, rule: ImageTokenRule = GPT4O_TOKEN_RULE) -> int:
    """Estimate the provider token charge for one image."""
    if image.detail is Detail.LOW:
        return rule.low_detail_tokens
    tiles = math.ceil(image.width_px / rule.tile_px) * math.ceil(image.height_px / rule.tile_px)
    return rule.auto_base_tokens + tiles * rule.auto_tokens_per_tile


def render_bar_chart(title: str, labels: Sequence[str], values: Sequence[float],
                     width_px: int = 800, height_px: int = 480) -> bytes:
    """Horizontal bar chart of normalized scores, as deterministic PNG bytes."""
    fig = Figure(figsize=(width_px / _DPI, height_px / _DPI), dpi=_DPI)
    ax = fig.add_axes((0.32, 0.10, 0.64, 0.82))
    positions = np.arange(len(labels))
    ax.barh(positions, values, color=DEFAULT_PALETTE[0])
    ax.set_yticks(positions)
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("accuracy / random guessing")
    ax.set_title(title)
    ax.axvline(1.0, color=DEFAULT_PALETTE[1], linewidth=1.0, linestyle="--")
    buf = io.BytesIO()
    fig.savefig(buf, format="png")
    return buf.getvalue()
