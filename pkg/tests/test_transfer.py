from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from helpers import SR

from dysaug import transfer as tr
from dysaug.audio import AudioBuffer
from dysaug.errors import ValidationError
from dysaug.prosody import estimate_f0, extract_profile
from dysaug.synth import harmonic_tone, syllable_train, vibrato_tone


def _targets(n_male, n_female):
    out = [(f"m{i}", "male", AudioBuffer(harmonic_tone(100 + 3 * i, 0.3), SR)) for i in range(n_male)]
    return out + [(f"f{i}", "female", AudioBuffer(harmonic_tone(200 + 5 * i, 0.3), SR)) for i in range(n_female)]


@pytest.mark.parametrize("m,f,size", [(11, 4, 19), (5, 0, 5), (2, 3, 8)])
def test_pool_size(m, f, size):
    assert tr.build_target_pool(_targets(m, f)).effective_size == size


def test_pool_errors():
    with pytest.raises(ValidationError):
        tr.build_target_pool([])
    with pytest.raises(ValidationError):
        tr.build_target_pool([("a", "other", AudioBuffer(harmonic_tone(100, 0.3), SR))])
    with pytest.raises(ValidationError):
        tr.build_target_pool(_targets(1, 0) * 2)
    with pytest.raises(ValidationError):
        tr.build_target_pool([("s", "male", AudioBuffer(np.zeros(SR), SR))])


@pytest.fixture(scope="module")
def pool19():
    return tr.build_target_pool(_targets(11, 4))


def test_pairing_deterministic_and_bijective(pool19):
    ids = [f"u{i}" for i in range(500)]
    a, b = tr.pair_sources(ids, pool19, 3), tr.pair_sources(ids, pool19, 3)
    assert a == b
    assert [j.utt_id for j in a] == ids
    assert tr.pair_sources(ids, pool19, 4) != a


def test_pairing_slot_frequencies(pool19):
    jobs = tr.pair_sources([f"s{i:05d}" for i in range(19_000)], pool19, 11)
    counts = Counter(j.target_id for j in jobs)
    for e in pool19.entries:
        per_slot = counts[e.target_id] / e.multiplicity
        assert 850 <= per_slot <= 1150


def test_pairing_errors(pool19):
    with pytest.raises(ValidationError):
        tr.pair_sources([], pool19, 0)
    with pytest.raises(ValidationError):
        tr.pair_sources(["a"], pool19, 0, mode="karaoke")


def test_speaker_conversion_to_200():
    src = AudioBuffer(harmonic_tone(120, 1.5), SR)
    target = extract_profile(AudioBuffer(harmonic_tone(200, 1.0), SR))
    trace = {}
    y = tr.convert_speaker(src, target, trace)
    assert trace["r"] == pytest.approx(200 / 120, rel=0.01)
    assert abs(np.median(estimate_f0(y).voiced_f0) / 200 - 1) <= 0.05
    assert abs(y.duration / src.duration - 1) <= 0.03
    assert y.rms == pytest.approx(target.rms_global, rel=0.05)


def test_speaker_conversion_self_target_near_identity():
    src = syllable_train([130, 140, 125], [0, -3, -1], 0.2, 0.1)
    p = extract_profile(src)
    y = tr.convert_speaker(src, p)
    q = extract_profile(y)
    assert abs(y.duration / src.duration - 1) <= 0.02
    assert abs(q.f0_median / p.f0_median - 1) <= 0.02


def test_pitch_ratio_is_clamped():
    src = AudioBuffer(harmonic_tone(80, 1.0), SR)
    target = extract_profile(AudioBuffer(harmonic_tone(390, 0.5), SR))
    trace = {}
    tr.convert_speaker(src, target, trace)
    assert trace["r"] == 2.0 and "pitch ratio" in trace["clamped"]


def test_unvoiced_source_is_error():
    target = extract_profile(AudioBuffer(harmonic_tone(150, 0.5), SR))
    noise = AudioBuffer(np.random.default_rng(0).standard_normal(SR) * 0.1, SR)
    with pytest.raises(ValidationError):
        tr.convert_speaker(noise, target)
    with pytest.raises(ValidationError):
        tr.convert_prosody(noise, target)


def test_prosody_f0_spread():
    src = AudioBuffer(vibrato_tone(180, 14, 4, 2.0), SR)
    target = replace(extract_profile(src), f0_std=30.0)
    s0 = extract_profile(src).f0_std
    out = extract_profile(tr.convert_prosody(src, target)).f0_std
    assert 9 <= s0 <= 11
    assert 20 <= out <= 40
    assert abs(out - 30) <= 0.5 * abs(s0 - 30)


def test_prosody_speaking_rate():
    src = syllable_train([150] * 8, [0] * 8, 0.15, 0.1)
    p = extract_profile(src)
    assert p.speaking_rate == pytest.approx(4.0, rel=0.05)
    target = replace(p, speaking_rate=2.0)
    trace = {}
    y = tr.convert_prosody(src, target, trace)
    assert trace["tempo_ratio"] == pytest.approx(2.0 / p.speaking_rate)
    assert abs(extract_profile(y).speaking_rate - 2.0) <= 0.2


def test_prosody_zero_rate_target_skips_rhythm(caplog):
    src = syllable_train([150] * 3, [0] * 3, 0.15, 0.1)
    target = replace(extract_profile(src), speaking_rate=0.0)
    trace = {}
    y = tr.convert_prosody(src, target, trace)
    assert trace["tempo_ratio"] is None and len(y) == len(src)
    assert "rhythm stage skipped" in caplog.text


def test_prosody_self_target_keeps_duration():
    src = syllable_train([140, 150, 160, 150], [0, -2, -4, -1], 0.18, 0.08)
    y = tr.convert_prosody(src, extract_profile(src))
    assert abs(y.duration / src.duration - 1) <= 0.02


@pytest.mark.parametrize("factor", [0.75, 1.6])
def test_energy_spread_moves_toward_target(factor):
    src = syllable_train([150] * 6, [0, -6, -2, -8, -1, -5], 0.15, 0.1)
    p = extract_profile(src)
    # frames straddling syllable edges bound how far the spread can shrink
    target = replace(p, energy_std=p.energy_std * factor)
    out = extract_profile(tr.convert_prosody(src, target)).energy_std
    assert abs(out - target.energy_std) <= 0.55 * abs(p.energy_std - target.energy_std)
    assert (out - p.energy_std) * (factor - 1) > 0


def test_convert_modes_and_trace():
    src = syllable_train([120, 130, 125, 118], [0, -3, -1, -2], 0.18, 0.1)
    target = extract_profile(syllable_train([210, 230, 190], [0, -6, -3], 0.25, 0.15))
    only = tr.convert(src, target, tr.SPEAKER_ONLY)
    assert np.array_equal(only.samples, tr.convert_speaker(src, target).samples)

    trace = []
    y = tr.convert(src, target, tr.SPEAKER_PROSODY, trace)
    assert [t["stage"] for t in trace] == ["speaker", "prosody"]
    assert abs(extract_profile(y).f0_median / target.f0_median - 1) <= 0.08
    with pytest.raises(ValidationError):
        tr.convert(src, target, "bogus")


def test_speaker_prosody_self_target_near_identity():
    src = syllable_train([140, 150, 145], [0, -2, -1], 0.2, 0.1)
    y = tr.convert(src, extract_profile(src), tr.SPEAKER_PROSODY)
    assert abs(y.duration / src.duration - 1) <= 0.03
