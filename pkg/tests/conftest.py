from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from speechjudge.manifest import ConditionMeta, Manifest, UtteranceRecord, write_manifest
from speechjudge.synthdata import write_tone_wav


@pytest.fixture
def make_wav(tmp_path):
    def _make(name: str = "u001.wav") -> Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_tone_wav(path, name)
        return path
    return _make


@pytest.fixture
def small_manifest(tmp_path):
    """Three records with audio files, labels, and one external column."""
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    records = []
    rows = [
        ("u001", "今天天氣很好", 3.2, 0.85, "babble", 5.0, {"dnsmos": 3.1}),
        ("u002", "請把窗戶關上", 1.4, 0.60, "white", -2.0, {"dnsmos": 2.2}),
        ("u003", "他買了一本書", 4.8, 0.95, "pink", 15.0, {"dnsmos": 4.0}),
    ]
    for uid, text, q, i, noise, snr, ext in rows:
        write_tone_wav(audio_dir / f"{uid}.wav", uid)
        records.append(UtteranceRecord(
            id=uid, audio_path=f"audio/{uid}.wav", reference_text=text,
            quality_mos=q, intelligibility=i,
            condition=ConditionMeta(noise_type=noise, snr_db=snr),
            external_scores=ext))
    manifest = Manifest(records=tuple(records), score_columns=("dnsmos",),
                        source_path=str(tmp_path / "manifest.jsonl"))
    write_manifest(manifest, tmp_path / "manifest.jsonl")
    return tmp_path / "manifest.jsonl"
