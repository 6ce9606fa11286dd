"""WAV ingestion and corpus manifests.

Only mono RIFF WAV files are accepted, PCM 16-bit or IEEE 32-bit float, and
no resampling ever happens: an utterance whose rate differs from the declared
corpus rate is an error, because silently resampling would change what the
dictionary's filters mean.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioIngestError

log = logging.getLogger(__name__)

INT16_SCALE = 32768.0


@dataclass(frozen=True)
class Utterance:
    """A mono signal with amplitudes in [-1, 1]."""

    id: str
    samples: np.ndarray
    sample_rate: int
    label: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise AudioIngestError(f"utterance {self.id!r}: expected non-empty mono samples")
        if self.sample_rate <= 0:
            raise AudioIngestError(f"utterance {self.id!r}: sample rate must be positive")
        peak = float(np.max(np.abs(samples)))
        if not np.isfinite(peak) or peak > 1.0:
            raise AudioIngestError(
                f"utterance {self.id!r}: peak amplitude {peak} outside [-1, 1] "
                "(decode with normalization enabled, or fix the file)"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    id: str
    label: str | None


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple
    sample_rate: int


def load_wav(path, *, utt_id: str | None = None, label: str | None = None,
             normalize: bool = False) -> Utterance:
    """Decode one mono WAV file (PCM 16-bit or 32-bit float) into an Utterance.

    16-bit samples are scaled by 1/32768. With ``normalize`` the waveform is
    divided by its peak magnitude after decoding.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise AudioIngestError(f"{path}: file not found") from None
    except Exception as exc:
        raise AudioIngestError(f"{path}: cannot decode WAV ({exc})") from exc
    if data.ndim != 1:
        raise AudioIngestError(
            f"{path}: {data.shape[1]}-channel audio is not supported, expected mono"
        )
    if data.dtype == np.int16:
        samples = data.astype(float) / INT16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise AudioIngestError(
            f"{path}: unsupported sample encoding {data.dtype}; "
            "use PCM 16-bit or 32-bit float"
        )
    if normalize:
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if peak > 0.0:
            samples = samples / peak
    return Utterance(
        id=utt_id if utt_id is not None else path.stem,
        samples=samples,
        sample_rate=int(rate),
        label=label,
    )


def save_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write a mono signal as a 32-bit float WAV file."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 1:
        raise AudioIngestError(f"expected a mono signal, got shape {samples.shape}")
    wavfile.write(str(path), int(sample_rate), samples)


def parse_manifest(path, sample_rate: int) -> CorpusManifest:
    """Parse a ``path,id,label`` CSV manifest; relative paths resolve against it."""
    path = Path(path)
    if sample_rate <= 0:
        raise AudioIngestError(f"declared sample rate must be positive, got {sample_rate}")
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise AudioIngestError(f"{path}: manifest is missing its header row") from None
            rows = list(reader)
    except OSError as exc:
        raise AudioIngestError(f"{path}: cannot read manifest ({exc})") from exc
    header = [h.strip().lower() for h in header]
    if header[:2] != ["path", "id"]:
        raise AudioIngestError(
            f"{path}: manifest header must start with 'path,id[,label]', got {header}"
        )

    entries = []
    seen_paths = set()
    for lineno, row in enumerate(rows, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        file_path = Path(row[0].strip())
        if not file_path.is_absolute():
            file_path = path.parent / file_path
        if file_path in seen_paths:
            raise AudioIngestError(f"{path}:{lineno}: duplicate path {file_path}")
        seen_paths.add(file_path)
        utt_id = row[1].strip() if len(row) > 1 and row[1].strip() else file_path.stem
        label = row[2].strip() if len(row) > 2 and row[2].strip() else None
        entries.append(ManifestEntry(path=file_path, id=utt_id, label=label))
    if not entries:
        log.warning("manifest %s lists no files; corpus is empty", path)
    return CorpusManifest(entries=tuple(entries), sample_rate=int(sample_rate))


def load_corpus(manifest, sample_rate: int | None = None, *, normalize: bool = False):
    """Load every manifest entry, enforcing the declared sample rate on each file.

    ``manifest`` is a CorpusManifest or a path (then ``sample_rate`` must be
    given). Missing files are reported collectively; utterances come back in
    manifest order.
    """
    if not isinstance(manifest, CorpusManifest):
        if sample_rate is None:
            raise AudioIngestError("a declared sample rate is required to load a manifest")
        manifest = parse_manifest(manifest, sample_rate)

    missing = [str(e.path) for e in manifest.entries if not e.path.exists()]
    if missing:
        raise AudioIngestError("missing corpus files: " + ", ".join(missing))

    utterances = []
    mismatched = []
    for entry in manifest.entries:
        utt = load_wav(entry.path, utt_id=entry.id, label=entry.label, normalize=normalize)
        if utt.sample_rate != manifest.sample_rate:
            mismatched.append(f"{entry.path} ({utt.sample_rate} Hz)")
            continue
        utterances.append(utt)
    if mismatched:
        raise AudioIngestError(
            f"sample rate mismatch against declared {manifest.sample_rate} Hz: "
            + ", ".join(mismatched)
        )
    return utterances
