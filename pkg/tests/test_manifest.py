import json

import pytest

from dysaug.errors import ValidationError
from dysaug.manifest import COLUMNS, UtteranceRecord, ingest, scan, write_manifest

HEADER = ",".join(COLUMNS)


def _csv(tmp_path, *rows, header=HEADER):
    p = tmp_path / "m.csv"
    p.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return p


def test_three_rows(tmp_path):
    p = _csv(tmp_path, "a,a.wav,s1,male,mild,word,es,casa", "b,b.wav,s1,male,mild,sentence,es,una casa",
             "c,/abs/c.wav,s2,female,healthy,word,es-CO,")
    man = ingest(p)
    assert len(man) == 3 and man[1].level == "sentence" and man[2].text == ""
    assert man.resolve(man[0]) == str(tmp_path / "a.wav") and man.resolve(man[2]) == "/abs/c.wav"
    assert man[0].label == "dysarthric" and man[2].label == "healthy"


def test_duplicate_id_named(tmp_path):
    p = _csv(tmp_path, "dup,a.wav,s1,male,mild,word,es,x", "dup,b.wav,s1,male,mild,word,es,y")
    with pytest.raises(ValidationError, match="dup"):
        ingest(p)


def test_unknown_severity_lists_allowed(tmp_path):
    p = _csv(tmp_path, "a,a.wav,s1,male,profound,word,es,x")
    with pytest.raises(ValidationError, match="healthy, mild, moderate, severe"):
        ingest(p)


@pytest.mark.parametrize("row", ["a,a.wav,s1,robot,mild,word,es,x", "a,a.wav,s1,male,mild,paragraph,es,x",
                                 "a,a.wav,s1,male,mild,word,1x,x", "a,,s1,male,mild,word,es,x"])
def test_bad_values(tmp_path, row):
    with pytest.raises(ValidationError):
        ingest(_csv(tmp_path, row))


def test_missing_column(tmp_path):
    with pytest.raises(ValidationError, match="severity"):
        ingest(_csv(tmp_path, "a,a.wav,s1,male,word,es", header="utt_id,wav_path,speaker_id,gender,level,language"))


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        ingest(tmp_path / "nope.csv")


def test_csv_and_jsonl_round_trip(tmp_path):
    recs = [UtteranceRecord("a", "a.wav", "s1", "male", "mild", "word", "ta", "கொ, ok"),
            UtteranceRecord("b", "b.wav", "s2", "unknown", "healthy", "sentence", "it", 'say "ciao"')]
    for name in ("m.csv", "m.jsonl"):
        write_manifest(recs, tmp_path / name)
        assert list(ingest(tmp_path / name)) == recs


def test_jsonl_bad_line(tmp_path):
    (tmp_path / "m.jsonl").write_text('{"utt_id": "a"\n')
    with pytest.raises(ValidationError, match=":1:"):
        ingest(tmp_path / "m.jsonl")


def _tree(tmp_path, stem):
    for spk, sev in (("F01", "mild"), ("M02", "healthy")):
        d = tmp_path / spk / sev
        d.mkdir(parents=True)
        name = stem.format(spk=spk)
        (d / f"{name}.wav").write_bytes(b"")
        (d / f"{name}.txt").write_text("hola\n", encoding="utf-8")


DEFAULTS = {"gender": "unknown", "level": "word", "language": "es"}


def test_scan_template(tmp_path):
    _tree(tmp_path, "{spk}_w1")
    man = scan(tmp_path, "{speaker_id}/{severity}/{utt_id}.wav", DEFAULTS)
    assert [(r.utt_id, r.speaker_id, r.severity, r.text) for r in man] == [
        ("F01_w1", "F01", "mild", "hola"), ("M02_w1", "M02", "healthy", "hola")]
    assert man.resolve(man[0]) == str(tmp_path / "F01" / "mild" / "F01_w1.wav")


def test_scan_duplicate_stems(tmp_path):
    _tree(tmp_path, "w1")
    with pytest.raises(ValidationError, match="w1"):
        scan(tmp_path, "{speaker_id}/{severity}/{utt_id}.wav", DEFAULTS)


def test_scan_missing_required(tmp_path):
    _tree(tmp_path, "{spk}_w1")
    with pytest.raises(ValidationError, match="level"):
        scan(tmp_path, "{speaker_id}/{severity}/{utt_id}.wav", {"language": "es"})


def test_scan_unknown_field(tmp_path):
    with pytest.raises(ValidationError):
        scan(tmp_path, "{nonsense}.wav", {})


def test_record_json_serializable():
    r = UtteranceRecord("a", "a.wav", "s1", "male", "mild", "word", "es")
    assert json.loads(json.dumps(r.__dict__))["utt_id"] == "a"
