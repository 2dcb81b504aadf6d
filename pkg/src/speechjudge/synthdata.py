"""Synthetic evaluation sets: tiny WAV files plus a labeled manifest.

Used for the bundled smoke-test data and by the test suite. The labels are
built so a mock run exercises the full evaluation surface:

* ``intelligibility`` rises with SNR (so an SNR-driven corruption mock
  correlates with it),
* ``quality_mos`` is independent noise (so nothing should correlate with it),
* a ``dnsmos`` external column is a noisy function of intelligibility,
  standing in for an imported baseline prediction.
"""

from __future__ import annotations

import hashlib
import random
import struct
import wave
from pathlib import Path

from speechjudge.manifest import (
    ConditionMeta,
    Manifest,
    UtteranceRecord,
    write_manifest,
)

REFERENCE_POOL = [
    "今天天氣很好我們去公園散步",
    "請把窗戶關上外面風很大",
    "他昨天買了一本新的小說",
    "這家餐廳的牛肉麵非常好吃",
    "老師說明天要考聽力測驗",
    "我的手機電池快要沒電了",
    "火車將在五分鐘後進站",
    "她每天早上跑步三公里",
    "圖書館星期天照常開放",
    "這條路施工請改道行駛",
    "the weather is lovely today so we walked to the park",
    "please close the window because the wind is strong",
    "the train will arrive at the station in five minutes",
    "she runs three kilometers every single morning",
    "the library stays open on sunday as usual",
]

NOISE_TYPES = ("babble", "white", "pink", "street")
SYSTEMS = ("noisy", "mmse", "fcn", "transformer", "cmgan", "demucs", "clean")


def write_tone_wav(path: Path, utterance_id: str, n_samples: int = 64) -> None:
    """A tiny deterministic mono PCM16 file; content is unique per id."""
    digest = hashlib.sha256(utterance_id.encode("utf-8")).digest()
    samples = [
        int.from_bytes(digest[(i * 2) % 30:(i * 2) % 30 + 2], "big",
                       signed=True)
        for i in range(n_samples)
    ]
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(8000)
        wav.writeframes(struct.pack(f"<{n_samples}h", *samples))


def make_synthetic_manifest(root: str | Path, n: int, seed: int,
                            with_dnsmos: bool = True) -> Path:
    """Write ``manifest.jsonl`` plus ``audio/*.wav`` under root."""
    root = Path(root)
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    records = []
    columns = ["dnsmos"] if with_dnsmos else []
    for i in range(1, n + 1):
        uid = f"u{i:04d}"
        snr = round(rng.uniform(-5.0, 20.0), 1)
        intelligibility = min(1.0, max(0.0, 0.55 + snr / 45.0
                                       + rng.gauss(0.0, 0.05)))
        quality = round(rng.uniform(0.0, 5.0), 2)  # independent of SNR
        external = {}
        if with_dnsmos:
            external["dnsmos"] = round(
                min(5.0, max(1.0, 1.0 + 4.0 * intelligibility
                             + rng.gauss(0.0, 0.3))), 3)
        write_tone_wav(audio_dir / f"{uid}.wav", uid)
        records.append(UtteranceRecord(
            id=uid,
            audio_path=f"audio/{uid}.wav",
            reference_text=rng.choice(REFERENCE_POOL),
            quality_mos=quality,
            intelligibility=round(intelligibility, 3),
            condition=ConditionMeta(
                noise_type=rng.choice(NOISE_TYPES),
                snr_db=snr,
                system=rng.choice(SYSTEMS),
            ),
            external_scores=external,
        ))
    manifest = Manifest(records=tuple(records), score_columns=tuple(columns),
                        source_path=str(root / "manifest.jsonl"))
    path = root / "manifest.jsonl"
    write_manifest(manifest, path)
    return path
