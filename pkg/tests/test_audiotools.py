import math
import random

import pytest
from hypothesis import given, strategies as st

from audiofab.audiotools import (
    AudioBuffer,
    ChannelMismatch,
    CorruptHeader,
    GainOutOfRange,
    RangeInvalid,
    RateMismatch,
    TruncatedData,
    UnsupportedFormat,
    VadConfig,
    apply_gain,
    detect_voice_activity,
    mix,
    parse_wav,
    trim,
    wav_format,
    write_wav,
)

from oracle_wav import reference_pcm16_wav, reference_read_pcm16


def sine(freq=440.0, amp=0.5, seconds=1.0, rate=16000):
    n = int(seconds * rate)
    return [amp * math.sin(2 * math.pi * freq * i / rate) for i in range(n)]


# --- parse_wav ----------------------------------------------------------------

def test_parse_zero_pcm16_mono():
    data = reference_pcm16_wav(16000, 1, [[0] * 16000])
    buf = parse_wav(data)
    assert buf.sample_rate_hz == 16000
    assert buf.channels == 1
    assert buf.length_frames == 16000
    assert all(s == 0.0 for s in buf.samples[0])


def test_parse_truncated_header_is_corrupt():
    with pytest.raises(CorruptHeader):
        parse_wav(b"RIFFxxxx")


def test_parse_not_riff():
    with pytest.raises(CorruptHeader):
        parse_wav(b"OGGS" + b"\x00" * 40)


def test_parse_pcm16_value_scaling():
    data = reference_pcm16_wav(16000, 1, [[-32768, 0, 16384, 32767]])
    buf = parse_wav(data)
    assert buf.samples[0][0] == pytest.approx(-1.0)
    assert buf.samples[0][1] == 0.0
    assert buf.samples[0][2] == pytest.approx(0.5)
    assert buf.samples[0][3] == pytest.approx(32767 / 32768)


def test_parse_rejects_other_formats():
    # fmt chunk declaring 8-bit PCM
    import struct
    fmt = struct.pack("<HHIIHH", 1, 1, 16000, 16000, 1, 8)
    body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt \
        + b"data" + struct.pack("<I", 0)
    data = b"RIFF" + struct.pack("<I", len(body)) + body
    with pytest.raises(UnsupportedFormat):
        parse_wav(data)


def test_parse_truncated_data_chunk():
    good = reference_pcm16_wav(16000, 1, [[100] * 50])
    with pytest.raises(TruncatedData):
        parse_wav(good[:-10])


def test_parse_skips_unknown_chunks():
    import struct
    base = reference_pcm16_wav(16000, 1, [[7, -7]])
    # splice a LIST chunk between fmt and data
    head, data_part = base[:36], base[36:]
    extra = b"LIST" + struct.pack("<I", 4) + b"INFO"
    patched = bytearray(head + extra + data_part)
    (riff_size,) = struct.unpack_from("<I", patched, 4)
    struct.pack_into("<I", patched, 4, riff_size + len(extra))
    buf = parse_wav(bytes(patched))
    assert buf.length_frames == 2


# --- write_wav ----------------------------------------------------------------

def test_write_empty_buffer_is_44_byte_header():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[]])
    data = write_wav(buf, "pcm16")
    assert len(data) == 44
    assert data[:4] == b"RIFF" and data[8:12] == b"WAVE"
    assert parse_wav(data).length_frames == 0


def test_pcm16_round_trip_byte_exact_against_reference():
    rng = random.Random(7)
    for channels in (1, 2):
        frames = [
            [rng.randint(-32768, 32767) for _ in range(300)]
            for _ in range(channels)
        ]
        ref = reference_pcm16_wav(22050, channels, frames)
        ours = write_wav(parse_wav(ref), "pcm16")
        assert ours == ref


def test_our_writer_matches_reference_reader():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[sine(amp=0.25, seconds=0.05)])
    rate, channels = reference_read_pcm16(write_wav(buf, "pcm16"))
    assert rate == 16000
    assert len(channels) == 1
    for sample, ref_int in zip(buf.samples[0], channels[0]):
        assert abs(sample - ref_int / 32768) <= 1 / 32768


def test_float32_round_trip_exact():
    buf = AudioBuffer(
        sample_rate_hz=48000,
        samples=[[0.0, 0.125, -0.5, 1.0, -1.0], [0.25, -0.25, 0.75, 0.0, 0.5]],
    )
    again = parse_wav(write_wav(buf, "float32"))
    assert again.sample_rate_hz == buf.sample_rate_hz
    assert again.samples == buf.samples


def test_pcm16_saturation():
    buf = AudioBuffer(sample_rate_hz=8000, samples=[[1.0, -1.0]])
    data = write_wav(buf, "pcm16")
    again = parse_wav(data)
    assert again.samples[0][0] == pytest.approx(32767 / 32768)
    assert again.samples[0][1] == -1.0


def test_wav_format_sniffer():
    buf = AudioBuffer(sample_rate_hz=8000, samples=[[0.0, 0.5]])
    assert wav_format(write_wav(buf, "pcm16")) == "pcm16"
    assert wav_format(write_wav(buf, "float32")) == "float32"


finite_samples = st.lists(
    st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, width=32),
    min_size=0, max_size=64,
)


@given(finite_samples)
def test_pcm16_round_trip_error_bound(samples):
    buf = AudioBuffer(sample_rate_hz=16000, samples=[samples])
    again = parse_wav(write_wav(buf, "pcm16"))
    for before, after in zip(buf.samples[0], again.samples[0]):
        assert abs(before - after) <= 1 / 32768


# --- apply_gain -----------------------------------------------------------------

def test_gain_zero_is_identity():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[sine(seconds=0.02)])
    out = apply_gain(buf, 0.0)
    assert out.samples == buf.samples


def test_gain_6dB_doubles():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.25]])
    out = apply_gain(buf, 6.0206)
    assert out.samples[0][0] == pytest.approx(0.5, abs=1e-6)


def test_gain_clamps():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.9, -0.9]])
    out = apply_gain(buf, 24.0)
    assert out.samples[0] == [1.0, -1.0]


def test_gain_out_of_range():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.1]])
    with pytest.raises(GainOutOfRange):
        apply_gain(buf, 25.0)
    with pytest.raises(GainOutOfRange):
        apply_gain(buf, -61.0)


@given(
    st.lists(st.floats(min_value=-0.5, max_value=0.5, allow_nan=False, width=32),
             min_size=1, max_size=32),
    st.floats(min_value=-5.9, max_value=5.9, allow_nan=False),
)
def test_gain_inverse_property(samples, gain_db):
    # |s| <= 0.5 and |gain| < 6 dB keeps both passes clear of clamping
    buf = AudioBuffer(sample_rate_hz=16000, samples=[samples])
    back = apply_gain(apply_gain(buf, gain_db), -gain_db)
    for before, after in zip(buf.samples[0], back.samples[0]):
        assert abs(before - after) <= 1e-6


# --- trim -----------------------------------------------------------------------

def test_trim_full_range_is_identity():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[sine(seconds=0.05)])
    out = trim(buf, 0.0, buf.duration_s)
    assert out.samples == buf.samples


def test_trim_frame_math():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.0] * 32000])
    out = trim(buf, 0.5, 1.0)
    assert out.length_frames == 8000


def test_trim_reversed_range():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.0] * 16000])
    with pytest.raises(RangeInvalid):
        trim(buf, 1.0, 0.5)


def test_trim_beyond_duration():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.0] * 16000])
    with pytest.raises(RangeInvalid):
        trim(buf, 0.0, 1.5)


# --- mix ------------------------------------------------------------------------

def test_mix_with_silence_is_identity():
    x = AudioBuffer(sample_rate_hz=16000, samples=[sine(seconds=0.01)])
    silence = AudioBuffer(sample_rate_hz=16000, samples=[[0.0] * x.length_frames])
    assert mix(x, silence).samples == x.samples


def test_mix_commutes_sample_exact():
    a = AudioBuffer(sample_rate_hz=16000, samples=[sine(440, 0.3, 0.01)])
    b = AudioBuffer(sample_rate_hz=16000, samples=[sine(660, 0.4, 0.02)])
    assert mix(a, b).samples == mix(b, a).samples


def test_mix_clamps():
    a = AudioBuffer(sample_rate_hz=16000, samples=[[0.8]])
    b = AudioBuffer(sample_rate_hz=16000, samples=[[0.8]])
    assert mix(a, b).samples[0][0] == 1.0


def test_mix_zero_pads_shorter():
    a = AudioBuffer(sample_rate_hz=16000, samples=[[0.5, 0.5, 0.5]])
    b = AudioBuffer(sample_rate_hz=16000, samples=[[0.25]])
    out = mix(a, b)
    assert out.samples[0] == [0.75, 0.5, 0.5]


def test_mix_rate_mismatch():
    a = AudioBuffer(sample_rate_hz=16000, samples=[[0.0]])
    b = AudioBuffer(sample_rate_hz=22050, samples=[[0.0]])
    with pytest.raises(RateMismatch):
        mix(a, b)


def test_mix_channel_mismatch():
    a = AudioBuffer(sample_rate_hz=16000, samples=[[0.0]])
    b = AudioBuffer(sample_rate_hz=16000, samples=[[0.0], [0.0]])
    with pytest.raises(ChannelMismatch):
        mix(a, b)


@given(
    st.lists(st.floats(min_value=-1, max_value=1, allow_nan=False, width=32),
             min_size=1, max_size=24),
    st.lists(st.floats(min_value=-1, max_value=1, allow_nan=False, width=32),
             min_size=1, max_size=24),
)
def test_mix_commutativity_property(xs, ys):
    a = AudioBuffer(sample_rate_hz=16000, samples=[xs])
    b = AudioBuffer(sample_rate_hz=16000, samples=[ys])
    assert mix(a, b).samples == mix(b, a).samples


# --- voice activity detection -----------------------------------------------------

def test_vad_silence_is_empty():
    buf = AudioBuffer(sample_rate_hz=16000, samples=[[0.0] * 48000])
    assert detect_voice_activity(buf) == []


def test_vad_sine_burst_analytic():
    # 0.5-amplitude sine: rms = 0.5/sqrt(2) = 0.3536 -> -9.03 dBFS > -40
    rate = 16000
    signal = [0.0] * rate + sine(440, 0.5, 1.0, rate) + [0.0] * rate
    buf = AudioBuffer(sample_rate_hz=rate, samples=[signal])
    segments = detect_voice_activity(buf)
    assert len(segments) == 1
    seg = segments[0]
    assert seg.start_s == pytest.approx(1.0, abs=0.011)
    assert seg.end_s == pytest.approx(2.0, abs=0.011)


def test_vad_quiet_sine_below_threshold():
    # amplitude 0.005 -> rms 0.003536 -> -49.0 dBFS < -40
    rate = 16000
    buf = AudioBuffer(sample_rate_hz=rate, samples=[sine(440, 0.005, 1.0, rate)])
    assert detect_voice_activity(buf) == []


def test_vad_merges_nearby_bursts():
    rate = 16000
    gap = [0.0] * int(0.05 * rate)  # 50 ms < merge_gap 100 ms
    signal = sine(440, 0.5, 0.2, rate) + gap + sine(440, 0.5, 0.2, rate)
    buf = AudioBuffer(sample_rate_hz=rate, samples=[signal])
    assert len(detect_voice_activity(buf)) == 1


def test_vad_drops_too_short_bursts():
    rate = 16000
    signal = [0.0] * rate + sine(440, 0.5, 0.02, rate) + [0.0] * rate
    buf = AudioBuffer(sample_rate_hz=rate, samples=[signal])
    # a 20 ms burst is shorter than min_segment 50 ms
    assert detect_voice_activity(buf) == []


def test_vad_segments_sorted_disjoint_within_duration():
    rate = 16000
    rng = random.Random(3)
    signal = []
    for _ in range(6):
        signal += [0.0] * int(rng.uniform(0.1, 0.4) * rate)
        signal += sine(300, 0.4, rng.uniform(0.05, 0.3), rate)
    buf = AudioBuffer(sample_rate_hz=rate, samples=[signal])
    segments = detect_voice_activity(buf)
    previous_end = 0.0
    for seg in segments:
        assert 0.0 <= seg.start_s < seg.end_s <= buf.duration_s + 1e-9
        assert seg.start_s >= previous_end
        previous_end = seg.end_s


def test_vad_averages_stereo():
    rate = 16000
    left = sine(440, 0.5, 1.0, rate)
    right = [-s for s in left]  # cancels to silence when averaged
    buf = AudioBuffer(sample_rate_hz=rate, samples=[left, right])
    assert detect_voice_activity(buf) == []


def test_vad_custom_threshold():
    rate = 16000
    buf = AudioBuffer(sample_rate_hz=rate, samples=[sine(440, 0.005, 1.0, rate)])
    loose = detect_voice_activity(buf, VadConfig(threshold_dbfs=-60.0))
    assert len(loose) == 1


# --- AudioBuffer invariants ---------------------------------------------------

def test_buffer_rejects_bad_rate():
    with pytest.raises(Exception):
        AudioBuffer(sample_rate_hz=100, samples=[[0.0]])


def test_buffer_rejects_unequal_channels():
    with pytest.raises(Exception):
        AudioBuffer(sample_rate_hz=16000, samples=[[0.0, 0.0], [0.0]])


def test_buffer_rejects_three_channels():
    with pytest.raises(Exception):
        AudioBuffer(sample_rate_hz=16000, samples=[[0.0]] * 3)
