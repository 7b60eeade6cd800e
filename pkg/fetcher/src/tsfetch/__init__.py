"""Downloader/converter producing canonical time-series task datasets."""

from .convert import (
    ChecksumMismatch,
    ConversionError,
    ConvertError,
    DownloadFailed,
    fetch_convert,
)
from .sources import SOURCES, SourceSpec
from .verify import DatasetStats, MismatchReport, verify

__version__ = "0.1.0"
