"""WAV loading and the clip preprocessing used before analysis:
mono mixdown, peak normalization to 0 dB, then a fixed-length excerpt.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mfdfa import Signal

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
DEFAULT_SEGMENT_SECONDS = 30.0


class WavFormatError(ValueError):
    pass


@dataclass
class AudioClip:
    channels: np.ndarray  # shape (n_channels, n_frames)
    sample_rate: int
    source_path: str = ""

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        if ch.shape[1] == 0:
            raise ValueError("clip has no samples")
        self.channels = ch

    @property
    def n_frames(self) -> int:
        return self.channels.shape[1]

    @property
    def duration(self) -> float:
        return self.n_frames / self.sample_rate


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"malformed container: chunk {cid!r} truncated")
        yield cid, body
        pos += 8 + size + (size & 1)


def _decode_pcm(raw: bytes, bits: int) -> np.ndarray:
    if bits == 8:
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2") / 32768.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v & 0x800000, v - 0x1000000, v)
        return v / 8388608.0
    if bits == 32:
        return np.frombuffer(raw, dtype="<i4") / 2147483648.0
    raise WavFormatError(f"unsupported encoding: {bits}-bit PCM")


def load_wav(path) -> AudioClip:
    """Read an integer-PCM RIFF/WAVE file into floats in [-1, 1).

    16-bit samples are divided by 32768 (8-bit: offset 128 then /128;
    24-bit: /2**23; 32-bit: /2**31).

    Raises:
        WavFormatError: "unsupported encoding" for float or compressed data,
            "malformed container" for broken or truncated files.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("malformed container: not a RIFF/WAVE file")
    fmt = body = None
    for cid, chunk in _chunks(data):
        if cid == b"fmt ":
            fmt = chunk
        elif cid == b"data":
            body = chunk
    if fmt is None or body is None or len(fmt) < 16:
        raise WavFormatError("malformed container: missing fmt or data chunk")

    tag, n_channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if tag != WAVE_FORMAT_PCM:
        raise WavFormatError(f"unsupported encoding: format tag {tag:#06x}")
    if n_channels < 1 or bits not in (8, 16, 24, 32) or block_align != n_channels * bits // 8:
        raise WavFormatError("unsupported encoding: bad sample layout")
    n_frames = len(body) // block_align
    if n_frames == 0:
        raise WavFormatError("malformed container: empty data chunk")
    samples = _decode_pcm(body[: n_frames * block_align], bits)
    return AudioClip(samples.reshape(n_frames, n_channels).T.copy(), int(rate), str(path))


def write_wav(path, clip: AudioClip, bits: int = 16) -> None:
    """Encode ``clip`` as integer PCM, the inverse of :func:`load_wav`."""
    full = {8: 128, 16: 32768, 24: 8388608, 32: 2147483648}
    if bits not in full:
        raise ValueError(f"unsupported bit depth {bits}")
    scale = full[bits]
    ints = np.clip(np.round(clip.channels.T * scale), -scale, scale - 1).astype(np.int64)
    if bits == 8:
        raw = (ints + 128).astype(np.uint8).tobytes()
    elif bits == 24:
        u = (ints & 0xFFFFFF).astype(np.uint32).ravel()
        raw = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    else:
        raw = ints.astype(f"<i{bits // 8}").tobytes()
    n_channels = clip.channels.shape[0]
    block_align = n_channels * bits // 8
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, n_channels, clip.sample_rate,
                      clip.sample_rate * block_align, block_align, bits)
    pad = b"\x00" if len(raw) & 1 else b""
    riff = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(raw)) + raw + pad
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(riff)) + riff)


def mixdown_mono(clip: AudioClip) -> AudioClip:
    return AudioClip(clip.channels.mean(axis=0, keepdims=True), clip.sample_rate, clip.source_path)


def normalize_peak(clip: AudioClip) -> AudioClip:
    """Scale so the largest absolute sample is exactly 1.0."""
    peak = np.abs(clip.channels).max()
    if peak == 0:
        raise ValueError("silent clip: cannot normalize an all-zero clip")
    return AudioClip(clip.channels / peak, clip.sample_rate, clip.source_path)


def extract_segment(clip: AudioClip, start_s: float = 0.0, dur_s: float = DEFAULT_SEGMENT_SECONDS) -> Signal:
    """Cut ``dur_s`` seconds starting at ``start_s`` from the first channel."""
    if start_s < 0:
        raise ValueError("segment exceeds clip: negative start")
    lo = int(round(start_s * clip.sample_rate))
    n = int(round(dur_s * clip.sample_rate))
    if n <= 0:
        raise ValueError("segment exceeds clip: empty segment")
    if lo + n > clip.n_frames:
        raise ValueError(
            f"segment exceeds clip: [{start_s}s, {start_s + dur_s}s) beyond {clip.duration:.3f}s"
        )
    return Signal(clip.channels[0, lo : lo + n].copy(), clip.sample_rate)


def prepare_signal(clip: AudioClip, start_s: float = 0.0, dur_s: float | None = DEFAULT_SEGMENT_SECONDS) -> Signal:
    """Mixdown, normalize, excerpt. ``dur_s=None`` keeps everything after ``start_s``."""
    clip = normalize_peak(mixdown_mono(clip))
    if dur_s is None:
        dur_s = clip.n_frames / clip.sample_rate - start_s
    return extract_segment(clip, start_s, dur_s)
