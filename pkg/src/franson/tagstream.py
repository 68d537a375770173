"""Time-tag streams: file format, coincidence histograms, JSI reconstruction.

A tag file is plain text. Header lines read ``#key=value`` and must include
``#format=tags-v1``. Each following line is one event,
``channel,time_ps[,pair_id]``, with integer picosecond times in
non-decreasing order.
"""

import io
import os
from typing import NamedTuple

import numpy as np

from . import kernels
from ._io import atomic_write
from .errors import ContractError, DomainError, FormatError, ParseError, RangeError, ValidationError
from .spectra import JointSpectrum
from .spectrometer import arrival_to_omega

FORMAT_VERSION = "tags-v1"
DEFAULT_WINDOW_PS = 1000
MAX_OVERFLOW = 0.5


class TagStream:
    """Header dict plus parallel event arrays sorted by time."""

    def __init__(self, header, channel, time, pair_id=None):
        self.header = {str(k): str(v) for k, v in dict(header).items()}
        self.channel = np.asarray(channel, dtype=np.int8).ravel()
        self.time = np.asarray(time, dtype=np.int64).ravel()
        self.pair_id = None if pair_id is None else np.asarray(pair_id, dtype=np.int64).ravel()
        if "format" not in self.header:
            raise ValidationError("tag stream header needs a format entry")
        n = len(self.time)
        if len(self.channel) != n or (self.pair_id is not None and len(self.pair_id) != n):
            raise ValidationError("event arrays must have equal length")
        if n and not np.all((self.channel == 1) | (self.channel == 2)):
            raise ValidationError("channel must be 1 or 2")
        if n and self.time.min() < 0:
            raise ValidationError("event times must be >= 0")
        if n > 1 and np.any(np.diff(self.time) < 0):
            raise ValidationError("event times must be non-decreasing")

    def __len__(self):
        return len(self.time)

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        if self.header != other.header or (self.pair_id is None) != (other.pair_id is None):
            return False
        same = np.array_equal(self.channel, other.channel) and np.array_equal(self.time, other.time)
        return same and (self.pair_id is None or np.array_equal(self.pair_id, other.pair_id))

    def __repr__(self):
        return f"TagStream({len(self)} events, format={self.header.get('format')!r})"

    def split(self):
        """Times (and pair ids) of channel 1 and channel 2, each time-ordered."""
        m1 = self.channel == 1
        m2 = ~m1
        p1 = None if self.pair_id is None else self.pair_id[m1]
        p2 = None if self.pair_id is None else self.pair_id[m2]
        return self.time[m1], self.time[m2], p1, p2


# file format ------------------------------------------------------------------

def format_tags(stream):
    out = io.StringIO()
    for k, v in stream.header.items():
        if "\n" in k or "=" in k or "\n" in v:
            raise ValidationError(f"header entry {k!r} cannot be written")
        out.write(f"#{k}={v}\n")
    if len(stream):
        c = stream.channel.tolist()
        t = stream.time.tolist()
        if stream.pair_id is None:
            out.write("\n".join(f"{a},{b}" for a, b in zip(c, t)))
        else:
            out.write("\n".join(f"{a},{b},{p}" for a, b, p in zip(c, t, stream.pair_id.tolist())))
        out.write("\n")
    return out.getvalue()


def write_tags(stream, destination):
    """Write to a path (atomically) or a text file object. Returns the byte count."""
    text = format_tags(stream)
    data = text.encode("utf-8")
    if isinstance(destination, (str, os.PathLike)):
        atomic_write(destination, data)
    else:
        destination.write(text)
    return len(data)


def _slow_records(lines, first):
    width = None
    rows = []
    for k, line in enumerate(lines):
        lineno = first + k
        fields = line.split(",")
        if width is None:
            width = len(fields)
        if len(fields) not in (2, 3):
            raise ParseError(f"expected channel,time_ps[,pair_id], got {line!r}", lineno)
        if len(fields) != width:
            raise ParseError("pair_id must be present on every record or on none", lineno)
        try:
            rows.append([int(f) for f in fields])
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
    return np.array(rows, dtype=np.int64).reshape(len(rows), width or 2)


def _records(lines, first):
    arr = None
    try:
        arr = np.loadtxt(lines, delimiter=",", dtype=np.int64, comments=None, ndmin=2)
        if arr.shape[0] != len(lines) or arr.shape[1] not in (2, 3):
            arr = None
    except ValueError:
        arr = None
    if arr is None:
        arr = _slow_records(lines, first)
    bad = np.flatnonzero((arr[:, 0] != 1) & (arr[:, 0] != 2))
    if len(bad):
        raise ParseError(f"channel must be 1 or 2, got {arr[bad[0], 0]}", first + int(bad[0]))
    bad = np.flatnonzero(arr[:, 1] < 0)
    if len(bad):
        raise ParseError(f"time must be >= 0, got {arr[bad[0], 1]}", first + int(bad[0]))
    bad = np.flatnonzero(np.diff(arr[:, 1]) < 0)
    if len(bad):
        raise ValidationError(f"line {first + int(bad[0]) + 1}: event time goes backwards")
    return arr


def parse_tags_text(text):
    lines = text.splitlines()
    header = {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, sep, val = lines[k][1:].partition("=")
        if not sep or not key:
            raise ParseError("header line must be #key=value", k + 1)
        header[key] = val
        k += 1
    if "format" not in header:
        raise FormatError("missing #format header")
    if header["format"] != FORMAT_VERSION:
        raise FormatError(f"unsupported tag format {header['format']!r}, expected {FORMAT_VERSION!r}")
    body = lines[k:]
    if not body:
        return TagStream(header, [], [])
    arr = _records(body, k + 1)
    pid = arr[:, 2] if arr.shape[1] == 3 else None
    return TagStream(header, arr[:, 0], arr[:, 1], pid)


def parse_tags(source):
    """Read a tag stream from a path or a text file object."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return parse_tags_text(fh.read())
    return parse_tags_text(source.read())


# coincidences -------------------------------------------------------------------

class Histogram(NamedTuple):
    centers_ps: np.ndarray
    counts: np.ndarray


def coincidence_histogram(stream, window, bin):
    """Histogram of t2 - t1 over every channel-1 / channel-2 pair within +-window ps.

    Bins are ``bin`` ps wide and centered on multiples of ``bin``.
    """
    window, width = int(window), int(bin)
    if window <= 0 or width <= 0:
        raise DomainError("window and bin must be positive")
    if width > window:
        raise ContractError("bin must not exceed the window")
    t1, t2, _, _ = stream.split()
    counts = kernels.window_histogram(t1, t2, window, width)
    kmax = window // width
    return Histogram(np.arange(-kmax, kmax + 1, dtype=np.int64) * width, counts)


def pair_by_window(stream, window=DEFAULT_WINDOW_PS):
    """Indices into (channel-1 times, channel-2 times) of nearest-neighbour pairs."""
    if int(window) <= 0:
        raise DomainError("window must be positive")
    t1, t2, _, _ = stream.split()
    return kernels.pair_nearest(t1, t2, int(window))


def pair_by_id(stream):
    t1, t2, p1, p2 = stream.split()
    if p1 is None:
        raise ContractError("stream has no pair ids; use window pairing")
    if len(np.unique(p1)) != len(p1) or len(np.unique(p2)) != len(p2):
        raise ValidationError("pair id repeats within a channel")
    _, i1, i2 = np.intersect1d(p1, p2, assume_unique=True, return_indices=True)
    return i1.astype(np.int64), i2.astype(np.int64)


class Reconstruction(NamedTuple):
    jsi: JointSpectrum
    overflow: float
    n_pairs: int
    n_outside: int


def _epochs(stream, t1, p1, i1, pairing):
    period = stream.header.get("pair_period_ps")
    if period is None:
        return np.zeros(len(i1), dtype=np.int64)
    period = int(period)
    offset = int(stream.header.get("pair_offset_ps", period // 2))
    if pairing == "by_pair_id":
        return p1[i1] * period + offset
    return (t1[i1] - offset + period // 2) // period * period + offset


def reconstruct_jsi(stream, model_s, model_i, grid, pairing="by_pair_id", window=DEFAULT_WINDOW_PS):
    """Invert paired arrival times to frequencies and bin them on ``grid``.

    Values are a density over all pairs, so the in-grid mass plus the
    overflow fraction is 1.
    """
    if len(stream) == 0:
        raise ContractError("cannot reconstruct from an empty stream")
    if pairing == "by_pair_id":
        i1, i2 = pair_by_id(stream)
    elif pairing == "by_window":
        i1, i2 = pair_by_window(stream, window)
    else:
        raise DomainError(f"pairing must be 'by_pair_id' or 'by_window', got {pairing!r}")
    n = len(i1)
    if n == 0:
        raise RangeError("no channel-1 / channel-2 pairs found")
    t1, t2, p1, _ = stream.split()
    epoch = _epochs(stream, t1, p1, i1, pairing)
    ws = arrival_to_omega(model_s, t1[i1] - epoch)
    wi = arrival_to_omega(model_i, t2[i2] - epoch)
    counts, out = kernels.bin2d(ws, wi, grid.omega_s[0] - grid.d_s / 2, grid.d_s, grid.n_s,
                                grid.omega_i[0] - grid.d_i / 2, grid.d_i, grid.n_i)
    overflow = out / n
    if overflow > MAX_OVERFLOW:
        raise RangeError(f"{overflow:.1%} of pairs fall outside the grid")
    values = counts / (n * grid.d_s * grid.d_i)
    return Reconstruction(JointSpectrum(grid, values, kind="intensity", normalized=True), overflow, n, out)
