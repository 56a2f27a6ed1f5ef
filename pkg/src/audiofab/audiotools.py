"""Built-in audio operations over an in-memory buffer type.

WAV support is limited by design: RIFF/WAVE, PCM 16-bit or IEEE float
32-bit, mono or stereo, little-endian. The writer emits the canonical
minimal layout (fmt + data chunks only), so write(parse(f)) is byte-exact
for files already in that form.

dBFS here means 20*log10(rms) with full scale 1.0.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

MIN_SAMPLE_RATE = 8000
MAX_SAMPLE_RATE = 192000


class AudioError(Exception):
    pass


class CorruptHeader(AudioError):
    pass


class TruncatedData(AudioError):
    pass


class UnsupportedFormat(AudioError):
    pass


class GainOutOfRange(AudioError):
    pass


class RangeInvalid(AudioError):
    pass


class RateMismatch(AudioError):
    pass


class ChannelMismatch(AudioError):
    pass


@dataclass
class AudioBuffer:
    """Per-channel float samples in [-1, 1]; 1 or 2 channels, equal length."""

    sample_rate_hz: int
    samples: list[list[float]]

    def __post_init__(self) -> None:
        if not (MIN_SAMPLE_RATE <= self.sample_rate_hz <= MAX_SAMPLE_RATE):
            raise AudioError(
                f"sample_rate_hz {self.sample_rate_hz} outside "
                f"[{MIN_SAMPLE_RATE}, {MAX_SAMPLE_RATE}]"
            )
        if len(self.samples) not in (1, 2):
            raise AudioError("channels must be 1 or 2")
        lengths = {len(ch) for ch in self.samples}
        if len(lengths) > 1:
            raise AudioError("channel lengths differ")

    @property
    def channels(self) -> int:
        return len(self.samples)

    @property
    def length_frames(self) -> int:
        return len(self.samples[0])

    @property
    def duration_s(self) -> float:
        return self.length_frames / self.sample_rate_hz


@dataclass(frozen=True)
class VadSegment:
    start_s: float
    end_s: float


@dataclass(frozen=True)
class VadConfig:
    window_ms: float = 20.0
    hop_ms: float = 10.0
    threshold_dbfs: float = -40.0
    min_segment_ms: float = 50.0
    merge_gap_ms: float = 100.0


def _clamp(x: float) -> float:
    return -1.0 if x < -1.0 else (1.0 if x > 1.0 else x)


# --- WAV codec -------------------------------------------------------------

_FMT_PCM = 1
_FMT_FLOAT = 3


def parse_wav(data: bytes) -> AudioBuffer:
    """Parse RIFF/WAVE bytes. Unknown chunks are skipped; only PCM16 and
    float32 sample formats are accepted. 16-bit sample s maps to s/32768."""
    if len(data) < 12:
        raise CorruptHeader("shorter than a RIFF header")
    if data[0:4] != b"RIFF":
        raise CorruptHeader("missing RIFF magic")
    if data[8:12] != b"WAVE":
        raise CorruptHeader("missing WAVE form type")
    pos = 12
    fmt: tuple[int, int, int, int] | None = None  # format, channels, rate, bits
    payload: bytes | None = None
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + size > len(data):
            if cid in (b"fmt ", b"data"):
                raise TruncatedData(f"{cid.decode('ascii', 'replace')} chunk truncated")
            break
        body = data[body_start : body_start + size]
        if cid == b"fmt ":
            if size < 16:
                raise CorruptHeader("fmt chunk too small")
            audio_format, channels, rate, _byte_rate, _align, bits = struct.unpack_from(
                "<HHIIHH", body, 0
            )
            fmt = (audio_format, channels, rate, bits)
        elif cid == b"data":
            payload = body
        pos = body_start + size + (size & 1)  # chunks are word-aligned
    if fmt is None:
        raise CorruptHeader("no fmt chunk")
    if payload is None:
        raise TruncatedData("no data chunk")
    audio_format, channels, rate, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{channels} channels (only mono/stereo)")
    if not (MIN_SAMPLE_RATE <= rate <= MAX_SAMPLE_RATE):
        raise UnsupportedFormat(f"sample rate {rate}")
    if (audio_format, bits) == (_FMT_PCM, 16):
        sample_size, unpack_char, scale = 2, "h", 1 / 32768.0
    elif (audio_format, bits) == (_FMT_FLOAT, 32):
        sample_size, unpack_char, scale = 4, "f", 1.0
    else:
        raise UnsupportedFormat(f"format {audio_format} with {bits}-bit samples")
    frame_size = sample_size * channels
    if len(payload) % frame_size:
        raise TruncatedData("data chunk not a whole number of frames")
    n_frames = len(payload) // frame_size
    raw = struct.unpack(f"<{n_frames * channels}{unpack_char}", payload)
    chans: list[list[float]] = [[] for _ in range(channels)]
    for i, value in enumerate(raw):
        chans[i % channels].append(_clamp(value * scale))
    return AudioBuffer(sample_rate_hz=rate, samples=chans)


def wav_format(data: bytes) -> str:
    """Sniff a parseable file's sample format: "pcm16" or "float32"."""
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader("not a RIFF/WAVE file")
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        if cid == b"fmt " and pos + 8 + size <= len(data) and size >= 16:
            audio_format, _, _, _, _, bits = struct.unpack_from("<HHIIHH", data, pos + 8)
            if (audio_format, bits) == (_FMT_PCM, 16):
                return "pcm16"
            if (audio_format, bits) == (_FMT_FLOAT, 32):
                return "float32"
            raise UnsupportedFormat(f"format {audio_format} with {bits}-bit samples")
        pos += 8 + size + (size & 1)
    raise CorruptHeader("no fmt chunk")


def _round_half_away(x: float) -> int:
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def write_wav(buf: AudioBuffer, format: str = "pcm16") -> bytes:
    """Serialize to canonical minimal RIFF (fmt + data only).

    pcm16 quantizes with round-half-away-from-zero, saturating at
    +32767 / -32768; float32 is lossless.
    """
    if format == "pcm16":
        audio_format, bits, sample_size = _FMT_PCM, 16, 2
    elif format == "float32":
        audio_format, bits, sample_size = _FMT_FLOAT, 32, 4
    else:
        raise UnsupportedFormat(f"unknown write format {format!r}")
    channels = buf.channels
    rate = buf.sample_rate_hz
    n = buf.length_frames
    interleaved: list[float] = []
    for i in range(n):
        for ch in buf.samples:
            interleaved.append(ch[i])
    if format == "pcm16":
        ints = [
            min(32767, max(-32768, _round_half_away(s * 32768.0)))
            for s in interleaved
        ]
        payload = struct.pack(f"<{len(ints)}h", *ints)
    else:
        payload = struct.pack(f"<{len(interleaved)}f", *interleaved)
    block_align = sample_size * channels
    byte_rate = rate * block_align
    fmt_chunk = struct.pack(
        "<HHIIHH", audio_format, channels, rate, byte_rate, block_align, bits
    )
    out = bytearray()
    out += b"RIFF"
    out += struct.pack("<I", 4 + 8 + len(fmt_chunk) + 8 + len(payload))
    out += b"WAVE"
    out += b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    out += b"data" + struct.pack("<I", len(payload)) + payload
    return bytes(out)


# --- DSP operations --------------------------------------------------------

MIN_GAIN_DB = -60.0
MAX_GAIN_DB = 24.0


def apply_gain(buf: AudioBuffer, gain_db: float) -> AudioBuffer:
    """Scale every sample by 10^(gain_db/20), clamped back into [-1, 1]."""
    if not (MIN_GAIN_DB <= gain_db <= MAX_GAIN_DB):
        raise GainOutOfRange(
            f"gain_db must be in [{MIN_GAIN_DB:g}, {MAX_GAIN_DB:g}], got {gain_db}"
        )
    factor = 10.0 ** (gain_db / 20.0)
    return AudioBuffer(
        sample_rate_hz=buf.sample_rate_hz,
        samples=[[_clamp(s * factor) for s in ch] for ch in buf.samples],
    )


def trim(buf: AudioBuffer, start_s: float, end_s: float) -> AudioBuffer:
    """Keep frames [round(start_s*sr), round(end_s*sr))."""
    if not (0 <= start_s < end_s):
        raise RangeInvalid(f"need 0 <= start < end, got [{start_s}, {end_s}]")
    if end_s > buf.duration_s + 1e-9:
        raise RangeInvalid(
            f"end {end_s}s beyond buffer duration {buf.duration_s:.6f}s"
        )
    a = round(start_s * buf.sample_rate_hz)
    b = round(end_s * buf.sample_rate_hz)
    b = min(b, buf.length_frames)
    return AudioBuffer(
        sample_rate_hz=buf.sample_rate_hz,
        samples=[ch[a:b] for ch in buf.samples],
    )


def mix(a: AudioBuffer, b: AudioBuffer) -> AudioBuffer:
    """Sample-wise sum; the shorter input is zero-padded; result clamped."""
    if a.sample_rate_hz != b.sample_rate_hz:
        raise RateMismatch(f"{a.sample_rate_hz} vs {b.sample_rate_hz}")
    if a.channels != b.channels:
        raise ChannelMismatch(f"{a.channels} vs {b.channels}")
    n = max(a.length_frames, b.length_frames)
    out: list[list[float]] = []
    for ca, cb in zip(a.samples, b.samples):
        ch = []
        for i in range(n):
            va = ca[i] if i < len(ca) else 0.0
            vb = cb[i] if i < len(cb) else 0.0
            ch.append(_clamp(va + vb))
        out.append(ch)
    return AudioBuffer(sample_rate_hz=a.sample_rate_hz, samples=out)


def _to_mono(buf: AudioBuffer) -> list[float]:
    if buf.channels == 1:
        return buf.samples[0]
    left, right = buf.samples
    return [(l + r) / 2.0 for l, r in zip(left, right)]


def detect_voice_activity(
    buf: AudioBuffer, cfg: VadConfig = VadConfig()
) -> list[VadSegment]:
    """Energy VAD: windows whose RMS exceeds the dBFS threshold are active;
    active runs closer than merge_gap_ms merge, runs shorter than
    min_segment_ms are dropped. Boundaries land on the hop grid."""
    mono = _to_mono(buf)
    sr = buf.sample_rate_hz
    win = max(1, round(cfg.window_ms * sr / 1000.0))
    hop = max(1, round(cfg.hop_ms * sr / 1000.0))
    active: list[tuple[int, int]] = []  # frame ranges [start, end)
    pos = 0
    while pos + win <= len(mono):
        acc = 0.0
        for s in mono[pos : pos + win]:
            acc += s * s
        rms = math.sqrt(acc / win)
        if rms > 0.0 and 20.0 * math.log10(rms) > cfg.threshold_dbfs:
            if active and pos <= active[-1][1]:
                active[-1] = (active[-1][0], pos + win)
            else:
                active.append((pos, pos + win))
        pos += hop
    merge_gap = cfg.merge_gap_ms * sr / 1000.0
    merged: list[tuple[int, int]] = []
    for seg in active:
        if merged and seg[0] - merged[-1][1] < merge_gap:
            merged[-1] = (merged[-1][0], seg[1])
        else:
            merged.append(seg)
    min_len = cfg.min_segment_ms * sr / 1000.0
    return [
        VadSegment(start_s=a / sr, end_s=b / sr)
        for a, b in merged
        if (b - a) >= min_len
    ]
