"""Canonical fixture registry: 36 audio techniques plus demo extras.

Five techniques are backed by the genuinely implemented built-in tool
process (gain, trim, mix, format conversion, voice activity detection);
the rest run as placeholder stubs that honor the same tool-process
contract. `write_registry` materializes the manifests as one JSON file
per tool so they can be loaded through the normal registry path.
"""

from __future__ import annotations

import json
from pathlib import Path

from .registry import (
    EnvSpec,
    ParamSpec,
    Registry,
    ToolManifest,
    UsageExample,
    manifest_to_obj,
    register_tool,
    validate_manifest,
)

STUB_COMMAND = "audiofab-stub-tool"
BUILTIN_COMMAND = "audiofab-builtin-tool"

_KIND_EXT = {
    "audio_path": "wav",
    "image_path": "png",
    "video_path": "mp4",
    "json": "json",
    "text": "txt",
}


def _p(name, type, required, description, enum_values=()):
    return ParamSpec(
        name=name,
        type=type,
        required=required,
        description=description,
        enum_values=tuple(enum_values),
    )


def _ex(query, arguments, kind):
    return UsageExample(query=query, arguments=arguments, expected_output_kind=kind)


def stub_env(tool_name: str, kind: str, timeout_s: float = 30.0) -> EnvSpec:
    return EnvSpec(
        command=STUB_COMMAND,
        args=("--tool", tool_name, "--kind", kind, "{request_file}"),
        env_vars={},
        working_dir=".",
        timeout_s=timeout_s,
    )


def builtin_env(op: str, timeout_s: float = 30.0) -> EnvSpec:
    return EnvSpec(
        command=BUILTIN_COMMAND,
        args=("--op", op, "{request_file}"),
        env_vars={},
        working_dir=".",
        timeout_s=timeout_s,
    )


def _tool(name, instruction, description, modality, category, params, examples,
          kind, builtin_op=None):
    env = builtin_env(builtin_op) if builtin_op else stub_env(name, kind)
    return ToolManifest(
        name=name,
        instruction=instruction,
        description=description,
        modality=modality,
        category=category,
        parameters=tuple(params),
        examples=tuple(examples),
        env=env,
    )


_AUDIO_IN = _p("audio_path", "path", True, "path to the input audio file, absolute or relative to the session workspace")


def fixture_manifests() -> list[ToolManifest]:
    """The 36 canonical technique manifests."""
    t = []

    # --- speech / editing ---
    t.append(_tool(
        "speech_editing",
        "Cut a speech recording down to a time range, keeping only the audio between a start and an end second.",
        "Trims a clip to [start_s, end_s). Use it to cut leading silence, drop a flubbed take, or pull one quote out of a long recording. Runs on the built-in editor, so the output is real audio.",
        "speech", "editing",
        [_AUDIO_IN,
         _p("start_s", "number", True, "first second to keep, measured from the start of the file"),
         _p("end_s", "number", True, "first second to drop; must be after start_s and inside the file")],
        [_ex("Trim my interview recording so only the answer between second 3 and second 9 is kept, I want just that quote as its own clip",
             {"audio_path": "in/interview.wav", "start_s": 3.0, "end_s": 9.0}, "audio_path"),
         _ex("Cut the first half second of silence off this voice take",
             {"audio_path": "in/take07.wav", "start_s": 0.5, "end_s": 12.0}, "audio_path")],
        "audio_path", builtin_op="trim"))

    t.append(_tool(
        "speech_enhancement",
        "Remove background noise and reverberation from a noisy voice recording so the speaker sounds clean and close.",
        "Denoises and dereverbs speech: air conditioning hum, street rumble, keyboard clatter, room echo. Returns an enhanced copy of the input.",
        "speech", "editing",
        [_AUDIO_IN,
         _p("strength", "number", False, "how aggressively to suppress noise, 0 to 1, default 0.7")],
        [_ex("Clean up the hiss and background noise in this voice memo I recorded in a cafe, the speaker should sound clear and close up",
             {"audio_path": "in/memo.wav", "strength": 0.8}, "audio_path"),
         _ex("There is a lot of room echo on this zoom call recording, remove the reverberation",
             {"audio_path": "in/call.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "voice_activity_detection",
        "Find the time segments where somebody is actually talking, using signal energy against a silence threshold.",
        "Energy-based voice activity detection: windows whose RMS level clears the threshold are marked active, nearby runs merge, and very short blips are dropped. Returns segments with start and end times in seconds.",
        "speech", "editing",
        [_AUDIO_IN,
         _p("threshold_dbfs", "number", False, "energy threshold in dBFS below which a window counts as silence, default -40")],
        [_ex("Detect where there is any voice activity in this recording and give me the list of speech segments with their timestamps",
             {"audio_path": "in/meeting.wav"}, "json"),
         _ex("Mark which parts of this tape are silence and which parts have someone talking",
             {"audio_path": "in/tape.wav", "threshold_dbfs": -35}, "json")],
        "json", builtin_op="detect_voice_activity"))

    t.append(_tool(
        "speech_super_resolution",
        "Upsample narrow-band speech to higher fidelity, reconstructing the missing high frequencies.",
        "Bandwidth extension for speech: takes muffled 8 kHz telephone-grade audio and predicts the upper spectrum for a brighter studio-like result.",
        "speech", "editing",
        [_AUDIO_IN,
         _p("target_rate_hz", "number", False, "desired output sample rate, default 48000")],
        [_ex("Upsample this 8 kHz telephone recording to studio quality and reconstruct the missing high frequencies so it sounds less muffled",
             {"audio_path": "in/phone.wav", "target_rate_hz": 48000}, "audio_path")],
        "audio_path"))

    # --- speech / understanding ---
    t.append(_tool(
        "speech_translation",
        "Translate spoken audio in one language directly into written text in another language.",
        "Speech-to-text translation. Give it a clip and a target language; it returns the translated transcript, useful for subtitles and dubbing prep.",
        "speech", "understanding",
        [_AUDIO_IN,
         _p("target_language", "string", True, "language to translate into, e.g. 'english'")],
        [_ex("Translate this Spanish speech clip into English text so I can use it for subtitles",
             {"audio_path": "in/es.wav", "target_language": "english"}, "text")],
        "text"))

    t.append(_tool(
        "speech_emotion_recognition",
        "Recognize the emotional state expressed by the speaker in a voice clip, such as happy, sad, angry or neutral.",
        "Classifies the emotion carried by the voice rather than the words: prosody, energy and tempo. Returns the top emotion label and a confidence.",
        "speech", "understanding",
        [_AUDIO_IN],
        [_ex("What emotion is the speaker expressing in this clip, does she sound happy or angry or rather sad and flat?",
             {"audio_path": "in/clip.wav"}, "text"),
         _ex("Recognize the emotional tone of this customer support call",
             {"audio_path": "in/call.wav"}, "text")],
        "text"))

    t.append(_tool(
        "speaker_diarization",
        "Work out who spoke when in a multi-speaker conversation and label each speaker turn with times.",
        "Splits a conversation into speaker turns: segments the recording, clusters voices, and labels each span with an anonymous speaker id.",
        "speech", "understanding",
        [_AUDIO_IN,
         _p("max_speakers", "number", False, "upper bound on the number of distinct speakers")],
        [_ex("Figure out who spoke when in this two person meeting recording and label every speaker turn with begin and end times",
             {"audio_path": "in/meeting.wav", "max_speakers": 2}, "json")],
        "json"))

    t.append(_tool(
        "speaking_style_recognition",
        "Classify the delivery style of a voice clip: whispering, shouting, formal reading, casual chat and so on.",
        "Looks at how something is said rather than what: labels the speaking style of the clip from a fixed set of delivery styles.",
        "speech", "understanding",
        [_AUDIO_IN],
        [_ex("Is the narrator whispering, shouting or reading formally in this sample? Classify the speaking style for me",
             {"audio_path": "in/narration.wav"}, "text")],
        "text"))

    # --- speech / generation ---
    t.append(_tool(
        "speech2song",
        "Turn a spoken phrase into a sung melody while keeping the original words.",
        "Speech-to-singing: maps spoken syllables onto a tune so the same sentence comes back sung. Melody can be chosen by name.",
        "speech", "generation",
        [_AUDIO_IN,
         _p("melody", "string", False, "name of the target tune, default a neutral pop melody")],
        [_ex("Turn my spoken happy birthday message into a sung melody following a cheerful tune",
             {"audio_path": "in/message.wav", "melody": "cheerful"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "spoken_dialogue",
        "Generate a natural spoken reply to a spoken prompt, like a voice chat partner.",
        "Conversational speech generation: listens to the user's spoken turn and produces a fitting spoken answer in a consistent voice.",
        "speech", "generation",
        [_AUDIO_IN],
        [_ex("Have the assistant answer my spoken question with a natural spoken dialogue reply in a friendly voice",
             {"audio_path": "in/question.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "voice_conversion",
        "Convert one speaker's voice into a target speaker's timbre while keeping the spoken content unchanged.",
        "Voice identity swap: the words, timing and intonation stay, the vocal timbre becomes that of the reference speaker sample.",
        "speech", "generation",
        [_AUDIO_IN,
         _p("reference_path", "path", True, "clip of the target speaker whose timbre to copy")],
        [_ex("Make my voice sound like the target speaker in this reference sample while keeping exactly what I said",
             {"audio_path": "in/me.wav", "reference_path": "in/target.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "text2speech",
        "Synthesize natural-sounding speech audio from written text, optionally in a chosen voice.",
        "Text-to-speech synthesis: reads any text aloud. A voice name selects the timbre; prosody follows punctuation. Long inputs are chunked automatically.",
        "speech", "generation",
        [_p("text", "string", True, "the text to read aloud"),
         _p("voice", "string", False, "voice preset name, default 'neutral'")],
        [_ex("Read this paragraph aloud for me, convert the text to natural sounding speech with a warm narrator voice",
             {"text": "Welcome back. Today we look at how tides form.", "voice": "warm"}, "audio_path"),
         _ex("Synthesize speech saying the opening line of my podcast",
             {"text": "Hello and welcome to episode twelve."}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "target_speaker_extraction",
        "Extract only the target speaker's voice from a mixture where several people talk over each other.",
        "Given a crowded mixture and a short enrollment sample of the person you care about, isolates that speaker and suppresses everyone else.",
        "speech", "generation",
        [_AUDIO_IN,
         _p("reference_path", "path", True, "short clean sample of the target speaker")],
        [_ex("Isolate just the target speaker from this crowded recording where several people talk over each other, here is a sample of her voice",
             {"audio_path": "in/crowd.wav", "reference_path": "in/her.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "asr",
        "Transcribe speech audio into written text.",
        "Automatic speech recognition: turns a recording of somebody talking into a plain text transcript with punctuation.",
        "speech", "generation",
        [_AUDIO_IN,
         _p("language", "string", False, "spoken language hint, default auto-detect")],
        [_ex("Transcribe this lecture recording into text so I can read everything that was said",
             {"audio_path": "in/lecture.wav"}, "text"),
         _ex("I need a transcript of this interview, speech to text please",
             {"audio_path": "in/interview.wav", "language": "english"}, "text")],
        "text"))

    t.append(_tool(
        "aac",
        "Write a short caption describing the sounds and events heard in an audio clip.",
        "Automated audio captioning: produces one or two sentences describing what is audible, e.g. 'a dog barks while rain falls on a window'.",
        "speech", "generation",
        [_AUDIO_IN],
        [_ex("Write a one sentence caption describing everything you can hear happening in this clip",
             {"audio_path": "in/scene.wav"}, "text")],
        "text"))

    t.append(_tool(
        "speech2talking_head",
        "Animate a still face photo into a talking-head video that lip-syncs the given speech audio.",
        "Audio-driven face animation: takes a portrait image plus narration and renders a video of the face speaking it, head motion included.",
        "speech", "generation",
        [_AUDIO_IN,
         _p("image_path", "path", True, "portrait photo of the face to animate")],
        [_ex("Animate this portrait photo into a talking head video that lip syncs my narration audio",
             {"audio_path": "in/narration.wav", "image_path": "in/portrait.png"}, "video_path")],
        "video_path"))

    # --- sound / editing ---
    t.append(_tool(
        "digital_signal_processing",
        "Apply basic digital signal processing to an audio file: adjust its loudness by a gain given in decibels.",
        "Gain staging on the built-in engine: every sample is scaled by 10^(gain_db/20) and clamped to full scale. Negative values attenuate, positive values boost.",
        "sound", "editing",
        [_AUDIO_IN,
         _p("gain_db", "number", True, "gain to apply in dB, between -60 and +24")],
        [_ex("Apply a gain of six decibels to boost the loudness of this quiet field recording without changing anything else",
             {"audio_path": "in/field.wav", "gain_db": 6.0}, "audio_path"),
         _ex("This export is too hot, attenuate it by 12 dB",
             {"audio_path": "in/export.wav", "gain_db": -12.0}, "audio_path")],
        "audio_path", builtin_op="apply_gain"))

    t.append(_tool(
        "audio_reconstruction",
        "Reconstruct damaged or missing parts of a recording: dropouts, clicks and short gaps are filled in.",
        "Audio inpainting: detects corrupted regions and resynthesizes plausible content from the surrounding material.",
        "sound", "editing",
        [_AUDIO_IN],
        [_ex("Repair the dropouts and clicks in this damaged tape transfer and reconstruct the missing moments so it plays through smoothly",
             {"audio_path": "in/tape.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "audio_separation",
        "Separate a sound mixture into its individual source stems, one file per source.",
        "Universal source separation for general audio: pulls apart overlapping sources such as traffic, voices and birdsong into separate stems.",
        "sound", "editing",
        [_AUDIO_IN,
         _p("max_sources", "number", False, "cap on how many stems to produce")],
        [_ex("Split this street recording into separate stems for the traffic, the people talking and the birdsong",
             {"audio_path": "in/street.wav", "max_sources": 3}, "audio_path")],
        "audio_path"))

    # --- sound / understanding ---
    t.append(_tool(
        "sound_event_detection",
        "Detect sound events like dog barks, sirens or glass breaking, each with a timestamp.",
        "Tags event classes over time: returns a list of detected events with onset, offset and label, suitable for monitoring and indexing.",
        "sound", "understanding",
        [_AUDIO_IN],
        [_ex("Find every dog bark and siren in this surveillance audio and give me timestamps for each event you detect",
             {"audio_path": "in/cctv.wav"}, "json")],
        "json"))

    t.append(_tool(
        "audio_quality_analysis",
        "Estimate the technical quality of a recording: overall score, clipping, noise floor and bandwidth.",
        "Quality assessment without a reference: reports a MOS-like score plus diagnostics such as clipping ratio, SNR estimate and effective bandwidth.",
        "sound", "understanding",
        [_AUDIO_IN],
        [_ex("Rate the technical quality of this podcast episode, tell me if there is clipping or low bitrate artifacts anywhere",
             {"audio_path": "in/episode.wav"}, "json")],
        "json"))

    t.append(_tool(
        "acoustic_scene_classification",
        "Classify the environment a recording was made in, such as airport, park, metro or office.",
        "Acoustic scene classification over a fixed label set; returns the most likely scene with alternatives and confidences.",
        "sound", "understanding",
        [_AUDIO_IN],
        [_ex("Which environment was this recorded in? Classify the acoustic scene, my guess is either a train station or a shopping mall",
             {"audio_path": "in/ambience.wav"}, "text")],
        "text"))

    # --- sound / generation ---
    t.append(_tool(
        "sound_style_transfer",
        "Re-render a sound with the texture and character of another reference sound.",
        "Timbre and texture transfer for general audio: keeps the event structure of the input but borrows the sonic character of the reference.",
        "sound", "generation",
        [_AUDIO_IN,
         _p("reference_path", "path", True, "sound whose texture to borrow")],
        [_ex("Transfer the crackly vinyl texture of this reference recording onto my clean drum loop",
             {"audio_path": "in/loop.wav", "reference_path": "in/vinyl.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "text2audio",
        "Generate environmental sound or sound effects from a plain text description.",
        "Text-to-audio generation for foley and ambience: describe the sound you want and get a rendered clip back.",
        "sound", "generation",
        [_p("text", "string", True, "description of the sound to generate"),
         _p("duration_s", "number", False, "length of the clip in seconds, default 5")],
        [_ex("Generate the sound of heavy rain hitting a tin roof with a low rumble of distant thunder behind it",
             {"text": "heavy rain on a tin roof, distant thunder", "duration_s": 8}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "video2audio",
        "Generate a matching soundtrack for a silent video clip based on what is happening on screen.",
        "Video-to-audio foley: watches the frames and synthesizes synchronized sound effects for the visible actions.",
        "sound", "generation",
        [_p("video_path", "path", True, "the silent video to score")],
        [_ex("Create realistic foley sound effects that match the action in this silent video of someone chopping vegetables",
             {"video_path": "in/chopping.mp4"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "audio2video",
        "Generate an animated video clip whose motion is driven by an input audio track.",
        "Audio-driven animation: renders abstract or scene-based visuals that move in sync with the energy and rhythm of the audio.",
        "sound", "generation",
        [_AUDIO_IN,
         _p("style", "string", False, "visual style hint, e.g. 'abstract neon'")],
        [_ex("Generate an abstract animated music video whose motion follows the rhythm and energy of this track",
             {"audio_path": "in/track.wav", "style": "abstract neon"}, "video_path")],
        "video_path"))

    t.append(_tool(
        "audio2image",
        "Generate a still image that visualizes the mood and content of an audio clip.",
        "Audio-to-image generation: listens to the clip and paints a single picture matching its atmosphere.",
        "sound", "generation",
        [_AUDIO_IN,
         _p("style", "string", False, "visual style hint for the picture")],
        [_ex("Paint a single picture that captures the mood of this calm ocean soundscape with gulls in the distance",
             {"audio_path": "in/ocean.wav"}, "image_path")],
        "image_path"))

    # --- music / editing ---
    t.append(_tool(
        "music_separation",
        "Separate a song into vocals and accompaniment stems.",
        "Music source separation: splits a mixed song into an isolated vocal stem and the instrumental accompaniment. Clean stems for remixing, karaoke or sampling.",
        "music", "editing",
        [_AUDIO_IN,
         _p("stems", "enum", False, "which stems to produce", ["vocals_accompaniment", "four_stem"])],
        [_ex("Separate the vocals from the accompaniment in this pop song, I want a clean vocal stem and the instrumental on its own",
             {"audio_path": "in/song.wav", "stems": "vocals_accompaniment"}, "audio_path"),
         _ex("Give me the isolated instrumental of this track with the singing removed",
             {"audio_path": "in/track.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "music_mix_track",
        "Mix two music tracks together into one by sample-wise addition.",
        "Sums two equally formatted tracks on the built-in engine; the shorter one is padded with silence and the result is clamped to full scale. Inputs must share sample rate and channel count.",
        "music", "editing",
        [_p("audio_path_a", "path", True, "first track to mix"),
         _p("audio_path_b", "path", True, "second track to mix")],
        [_ex("Mix the bass stem and the drum stem together into a single backing track for rehearsal",
             {"audio_path_a": "in/bass.wav", "audio_path_b": "in/drums.wav"}, "audio_path")],
        "audio_path", builtin_op="mix"))

    t.append(_tool(
        "music_format_conversion",
        "Convert a WAV file between sample formats: 16-bit PCM and 32-bit float.",
        "Rewrites the file on the built-in engine in the requested sample format with a canonical minimal header. No resampling is performed.",
        "music", "editing",
        [_AUDIO_IN,
         _p("sample_format", "enum", True, "target sample format", ["pcm16", "float32"])],
        [_ex("Convert this 32 bit float WAV master into a 16 bit PCM file that older players can read",
             {"audio_path": "in/master.wav", "sample_format": "pcm16"}, "audio_path")],
        "audio_path", builtin_op="convert_format"))

    # --- music / understanding ---
    t.append(_tool(
        "music_emotion_recognition",
        "Recognize the emotional character of a piece of music, like melancholic, uplifting or tense.",
        "Music emotion recognition over valence and arousal plus mood tags; judges the feel of the music itself, not any lyrics.",
        "music", "understanding",
        [_AUDIO_IN],
        [_ex("Does this piano piece feel melancholic or uplifting to you? Recognize the musical emotion it carries",
             {"audio_path": "in/piano.wav"}, "text")],
        "text"))

    t.append(_tool(
        "music_style_description",
        "Describe a song's musical style: genre, tempo, instrumentation and production character.",
        "Writes a short style analysis of a track covering genre, approximate BPM, key instruments and production feel. Useful as a prompt for generating more music in the same style.",
        "music", "understanding",
        [_AUDIO_IN],
        [_ex("Analyze the style of this pop song and describe its genre, tempo and instrumentation in a couple of sentences",
             {"audio_path": "in/song.wav"}, "text"),
         _ex("What does this track sound like? Give me a style description I could hand to a composer",
             {"audio_path": "in/demo.wav"}, "text")],
        "text"))

    # --- music / generation ---
    t.append(_tool(
        "music2song",
        "Generate a full song with vocals from an instrumental music piece.",
        "Instrumental-to-song: writes and sings a top-line over the given backing so the instrumental becomes a complete sung track.",
        "music", "generation",
        [_AUDIO_IN,
         _p("theme", "string", False, "what the added vocals should be about")],
        [_ex("Turn this instrumental demo into a full song by adding sung vocals about midnight driving",
             {"audio_path": "in/demo.wav", "theme": "midnight driving"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "text2music",
        "Generate a piece of music from a text prompt, optionally matching the feel of a reference track.",
        "Text-to-music generation: renders an original track from the written brief; when a reference audio is supplied the result follows its groove and instrumentation.",
        "music", "generation",
        [_p("text", "string", True, "the musical brief: style, tempo, mood, instruments"),
         _p("reference_audio", "path", False, "optional track whose feel the new music should match")],
        [_ex("Compose an upbeat synthwave track with punchy drums and a warm analog bassline from my text prompt",
             {"text": "upbeat synthwave, punchy drums, warm analog bass"}, "audio_path"),
         _ex("Generate a new segment of music in the same style as this reference track",
             {"text": "same style as the reference, keep the groove", "reference_audio": "in/ref.wav"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "lyrics2song",
        "Sing the given lyrics as a new song with a generated melody and backing.",
        "Lyrics-to-song: composes a melody for the provided lyrics and renders a sung performance with accompaniment-free backing harmony.",
        "music", "generation",
        [_p("lyrics", "string", True, "the lyrics to sing"),
         _p("genre", "string", False, "genre hint for the melody, default pop")],
        [_ex("Sing these lyrics I wrote as a catchy pop chorus with a bright melody behind them",
             {"lyrics": "city lights are calling and we answer every time", "genre": "pop"}, "audio_path")],
        "audio_path"))

    t.append(_tool(
        "lyrics_recognition",
        "Recognize and transcribe the lyrics being sung in a song recording.",
        "Sung-lyrics transcription: follows the vocal line through the mix and writes out the words, robust to backing instruments.",
        "music", "generation",
        [_AUDIO_IN],
        [_ex("Transcribe the lyrics being sung in this live concert bootleg, the guitars are loud but the singer is intelligible",
             {"audio_path": "in/bootleg.wav"}, "text")],
        "text"))

    assert len(t) == 36, f"expected 36 canonical manifests, built {len(t)}"
    return t


def extra_manifests() -> list[ToolManifest]:
    """Demo tools beyond the canonical 36 used by scripted scenarios."""
    return [
        _tool(
            "text_edit",
            "Edit a piece of text by a named operation, for example replacing emotional terms with their opposites.",
            "Deterministic text manipulation helper used inside chained workflows: supports operations like flip_emotion (swap emotional words for their antonyms) and uppercase.",
            "multimodal", "editing",
            [_p("text", "string", True, "the text to edit"),
             _p("operation", "string", True, "named edit operation, e.g. flip_emotion")],
            [_ex("Replace every emotional term in this sentence with its opposite",
                 {"text": "I am so happy today", "operation": "flip_emotion"}, "text")],
            "text"),
    ]


def special_manifests(timeout_s: float = 30.0) -> list[ToolManifest]:
    """Diagnostic stubs exercising the executor's isolation contract."""
    def _special(name, instruction, env_vars=None, timeout=timeout_s):
        return ToolManifest(
            name=name,
            instruction=instruction,
            description=instruction,
            modality="multimodal",
            category="understanding",
            parameters=(),
            examples=(_ex(f"run the {name} diagnostic", {}, "json"),),
            env=EnvSpec(
                command=STUB_COMMAND,
                args=("--tool", name, "--kind", "json", "{request_file}"),
                env_vars=dict(env_vars or {}),
                working_dir=".",
                timeout_s=timeout,
            ),
        )

    return [
        _special("echo_env", "Report the exact environment variables visible to the tool process."),
        _special("sleep_forever", "Sleep well past any sane timeout; used to exercise timeout handling.", timeout=1.0),
        _special("crash_midway", "Write half a response frame and abort; used to exercise crash containment."),
        _special("conflict_a", "Require LIBVER=1 in the environment, as a stand-in for a pinned dependency.", env_vars={"LIBVER": "1"}),
        _special("conflict_b", "Require LIBVER=2 in the environment, conflicting with conflict_a.", env_vars={"LIBVER": "2"}),
    ]


def fixture_registry(extras: bool = False, specials: bool = False) -> Registry:
    reg = Registry()
    manifests = fixture_manifests()
    if extras:
        manifests = manifests + extra_manifests()
    if specials:
        manifests = manifests + special_manifests()
    for m in manifests:
        bad = validate_manifest(m)
        assert not bad, f"{m.name}: {bad}"
        reg = register_tool(reg, m)
    return reg


def write_registry(dir: str | Path, extras: bool = False, specials: bool = False) -> int:
    """Write one manifest JSON file per tool into `dir`; returns the count."""
    root = Path(dir)
    root.mkdir(parents=True, exist_ok=True)
    manifests = fixture_manifests()
    if extras:
        manifests = manifests + extra_manifests()
    if specials:
        manifests = manifests + special_manifests()
    for m in manifests:
        path = root / f"{m.name}.json"
        path.write_text(
            json.dumps(manifest_to_obj(m), indent=2, sort_keys=False) + "\n",
            encoding="utf-8",
        )
    return len(manifests)


def scenario_rules() -> dict:
    """Scripted planner rules for the three demo workflows plus fallbacks."""
    return {
        "rules": [
            {
                "name": "music_creation",
                "match": {"tokens_all": ["song", "style", "vocals"]},
                "plan": {
                    "plan_id": "music_creation",
                    "subtasks": [
                        {"id": "s1",
                         "description": "analyze the musical style of the input song",
                         "tool": "music_style_description",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/song.wav"}},
                        {"id": "s2",
                         "description": "separate the vocals from the accompaniment",
                         "tool": "music_separation",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/song.wav",
                                       "stems": "vocals_accompaniment"}},
                        {"id": "s3",
                         "description": "generate a new segment in a similar style using the accompaniment as reference",
                         "tool": "text2music",
                         "depends_on": ["s1", "s2"],
                         "arguments": {"text": "{result:s1}",
                                       "reference_audio": "{artifact:s2:0}"}},
                    ],
                },
            },
            {
                "name": "speech_emotion_flip",
                "match": {"tokens_all": ["emotion", "speech"]},
                "plan": {
                    "plan_id": "speech_emotion_flip",
                    "subtasks": [
                        {"id": "s1",
                         "description": "recognize the emotion expressed in the speech clip",
                         "tool": "speech_emotion_recognition",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/speech.wav"}},
                        {"id": "s2",
                         "description": "transcribe the spoken content",
                         "tool": "asr",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/speech.wav"}},
                        {"id": "s3",
                         "description": "replace emotional terms with their opposites",
                         "tool": "text_edit",
                         "depends_on": ["s1", "s2"],
                         "arguments": {"text": "{result:s2}", "operation": "flip_emotion"}},
                        {"id": "s4",
                         "description": "regenerate the speech with the original timbre",
                         "tool": "text2speech",
                         "depends_on": ["s3"],
                         "arguments": {"text": "{result:s3}", "voice": "original"}},
                    ],
                },
            },
            {
                "name": "multimodal_animation",
                "match": {"tokens_all": ["portrait", "audio"]},
                "plan": {
                    "plan_id": "multimodal_animation",
                    "subtasks": [
                        {"id": "s1",
                         "description": "generate audio-driven animation from the portrait",
                         "tool": "speech2talking_head",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/voice.wav",
                                       "image_path": "{workspace}/in/portrait.png"}},
                        {"id": "s2",
                         "description": "synthesize the coherent final video",
                         "tool": "audio2video",
                         "depends_on": ["s1"],
                         "arguments": {"audio_path": "{workspace}/in/voice.wav",
                                       "style": "coherent cinematic"}},
                    ],
                },
            },
            {
                "name": "vocal_separation_only",
                "match": {"tokens_all": ["separate", "vocals"]},
                "plan": {
                    "plan_id": "vocal_separation_only",
                    "subtasks": [
                        {"id": "s1",
                         "description": "separate the vocals from the accompaniment",
                         "tool": "music_separation",
                         "depends_on": [],
                         "arguments": {"audio_path": "{workspace}/in/song.wav",
                                       "stems": "vocals_accompaniment"}},
                    ],
                },
            },
            {
                "name": "no_tool_fallback",
                "match": {"always": True},
                "plan": {
                    "plan_id": "direct_answer",
                    "subtasks": [
                        {"id": "s1",
                         "description": "answer the request directly without invoking any tool",
                         "depends_on": []},
                    ],
                },
            },
        ]
    }


def write_rules(path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scenario_rules(), indent=2) + "\n", encoding="utf-8"
    )


MUSIC_QUERY = "analyze this pop song's style, split vocals, and make a similar new segment"
SPEECH_QUERY = "flip the emotion of this speech but keep the voice"
MULTIMODAL_QUERY = "make this portrait move with this audio"
