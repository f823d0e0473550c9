"""
signals.py - segments, SNR-controlled mixing, synthetic generators and dataset files.

The measurement model is y = x + lambda_snr * x', with
SNR = 10 log10(||x||^2 / ||lambda_snr * x'||^2).

Segment file format (one per list of segments):
    <stem>.json  {"version", "n_segments", "length", "sample_rate_hz", "class", ["labels"]}
    <stem>.f32   little-endian float32 samples, segments concatenated
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import json
import math
import pathlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

# Import external packages
import numpy as np
import pandas as pd

# Import functions from local modules
from d4pm.errors import ConfigError, DataFormatError
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

FORMAT_VERSION = 1
MIN_LENGTH = 8
DEFAULT_SAMPLE_RATE_HZ = 64.0
DEFAULT_SNR_RANGE_DB = (-5.0, 5.0)
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)

# Band edges of the synthetic generators
CLEAN_BAND_HZ = (1.0, 30.0)
EOG_CUTOFF_HZ = 4.0
EMG_CUTON_HZ = 20.0
ECG_PERIOD_S = 0.8
ECG_JITTER = 0.05

# (offset from R peak in s, width in s, amplitude) of the P, Q, R, S, T waves
ECG_TEMPLATE_WAVES = (
    (-0.20, 0.025, 0.15),
    (-0.03, 0.010, -0.15),
    (0.00, 0.012, 1.00),
    (0.03, 0.010, -0.25),
    (0.25, 0.040, 0.30),
)

SPLIT_NAMES = ("train", "validation", "test")

#####################################
# Domain Types
#####################################


class ArtifactClass(str, Enum):
    CLEAN = "CLEAN"
    EOG = "EOG"
    EMG = "EMG"
    ECG = "ECG"

    @classmethod
    def parse(cls, value: "str | ArtifactClass") -> "ArtifactClass":
        if isinstance(value, ArtifactClass):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError as e:
            raise ConfigError(f"unknown signal class: {value!r}") from e


ARTIFACT_CLASSES = (ArtifactClass.EOG, ArtifactClass.EMG, ArtifactClass.ECG)


def class_index(label: "str | ArtifactClass") -> int:
    """Index of an artifact class in the label embedding table (EOG=0, EMG=1, ECG=2)."""
    label = ArtifactClass.parse(label)
    if label not in ARTIFACT_CLASSES:
        raise ConfigError(f"{label.value} is not an artifact class")
    return ARTIFACT_CLASSES.index(label)


@dataclass(frozen=True)
class Segment:
    """One single-channel signal segment."""

    samples: np.ndarray
    class_label: ArtifactClass
    sample_rate: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < MIN_LENGTH:
            raise ConfigError(f"segment needs a 1-D array of >= {MIN_LENGTH} samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ConfigError("segment contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "class_label", ArtifactClass.parse(self.class_label))

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class MixedExample:
    """Clean segment x, artifact x', scale lambda_snr and mixture y = x + lambda_snr x'."""

    clean: Segment
    artifact: Segment
    lambda_snr: float
    mixture: Segment
    target_snr_db: float
    clean_index: int = -1
    artifact_index: int = -1

    @property
    def class_label(self) -> ArtifactClass:
        return self.artifact.class_label

    @property
    def scaled_artifact(self) -> np.ndarray:
        """Artifact contribution lambda_snr * x' as it appears in the mixture."""
        return self.lambda_snr * self.artifact.samples


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    validation: list
    test: list
    fractions: tuple = DEFAULT_FRACTIONS

    def __post_init__(self):
        if not math.isclose(sum(self.fractions), 1.0, abs_tol=1e-9):
            raise ConfigError(f"split fractions must sum to 1, got {self.fractions}")

    def part(self, name: str) -> list:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, name)

    def restrict(self, classes: Iterable["str | ArtifactClass"]) -> "DatasetSplit":
        """Keep only examples whose artifact class is in `classes`."""
        keep = {ArtifactClass.parse(c) for c in classes}
        return DatasetSplit(
            train=[e for e in self.train if e.class_label in keep],
            validation=[e for e in self.validation if e.class_label in keep],
            test=[e for e in self.test if e.class_label in keep],
            fractions=self.fractions,
        )


#####################################
# Mixing
#####################################


def _energy(samples: np.ndarray) -> float:
    return float(np.dot(samples, samples))


def snr_db(x: np.ndarray, xp: np.ndarray, lambda_snr: float) -> float:
    """10 log10(||x||^2 / ||lambda_snr x'||^2)."""
    return 10.0 * math.log10(_energy(x) / (lambda_snr * lambda_snr * _energy(xp)))


def lambda_for_snr(x: Segment, xp: Segment, snr: float) -> float:
    """
    Scale that puts the artifact at the requested SNR.

    Returns lambda = (||x|| / ||x'||) * 10^(-snr/20).
    """
    norm_x = math.sqrt(_energy(x.samples))
    norm_xp = math.sqrt(_energy(xp.samples))
    if norm_x == 0.0 or norm_xp == 0.0:
        raise ConfigError("cannot scale zero-energy signals to a target SNR")
    return (norm_x / norm_xp) * 10.0 ** (-snr / 20.0)


def mix(x: Segment, xp: Segment, lambda_snr: float, clean_index: int = -1, artifact_index: int = -1) -> MixedExample:
    """Build y = x + lambda_snr * x' and recompute the SNR it realizes."""
    if len(x) != len(xp):
        raise ConfigError(f"length mismatch: clean has {len(x)} samples, artifact has {len(xp)}")
    if not lambda_snr > 0.0:
        raise ConfigError(f"lambda_snr must be > 0, got {lambda_snr}")
    if _energy(x.samples) == 0.0 or _energy(xp.samples) == 0.0:
        raise ConfigError("cannot mix zero-energy signals")
    y = x.samples + lambda_snr * xp.samples
    mixture = Segment(y, xp.class_label, x.sample_rate)
    return MixedExample(
        clean=x,
        artifact=xp,
        lambda_snr=float(lambda_snr),
        mixture=mixture,
        target_snr_db=snr_db(x.samples, xp.samples, lambda_snr),
        clean_index=clean_index,
        artifact_index=artifact_index,
    )


#####################################
# Synthetic Generators
#####################################


def _unit_rms(samples: np.ndarray) -> np.ndarray:
    rms = math.sqrt(float(np.mean(samples * samples)))
    if rms == 0.0:
        raise ConfigError("generator produced a zero-energy segment; increase the length")
    # Quantize to float32 so saved files reproduce in-memory segments exactly.
    return (samples / rms).astype(np.float32).astype(np.float64)


def _band_mask(n: int, fs: float, low: Optional[float], high: Optional[float]) -> np.ndarray:
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    mask = np.ones_like(freqs, dtype=bool)
    if low is not None:
        mask &= freqs > low
    if high is not None:
        mask &= freqs < high
    mask[0] = False
    if not mask.any():
        # Resolution too coarse for the band; keep the nearest non-DC bin.
        nearest = 1 if low is None else len(freqs) - 1
        mask[nearest] = True
    return mask


def _band_limit(samples: np.ndarray, fs: float, low: Optional[float], high: Optional[float]) -> np.ndarray:
    spectrum = np.fft.rfft(samples)
    spectrum[~_band_mask(samples.size, fs, low, high)] = 0.0
    return np.fft.irfft(spectrum, n=samples.size)


def _pink_noise(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spectrum[0] = 0.0
    spectrum[1:] /= np.sqrt(freqs[1:])
    return np.fft.irfft(spectrum, n=n)


def _synth_clean(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    time = np.arange(n) / fs
    n_tones = int(rng.integers(3, 7))
    f_high = min(CLEAN_BAND_HZ[1], 0.45 * fs)
    freqs = rng.uniform(CLEAN_BAND_HZ[0], f_high, n_tones)
    amps = rng.uniform(0.5, 1.5, n_tones)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_tones)
    tones = (amps[:, None] * np.sin(2.0 * np.pi * freqs[:, None] * time + phases[:, None])).sum(axis=0)
    pink = _pink_noise(n, fs, rng)
    pink_rms = math.sqrt(float(np.mean(pink * pink))) or 1.0
    tones_rms = math.sqrt(float(np.mean(tones * tones)))
    return tones + 0.5 * tones_rms * pink / pink_rms


def _synth_eog(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    time = np.arange(n) / fs
    duration = n / fs
    n_bursts = int(rng.integers(1, 4))
    centers = rng.uniform(0.0, duration, n_bursts)
    widths = rng.uniform(0.1, 0.4, n_bursts)
    amps = rng.choice([-1.0, 1.0], n_bursts) * rng.uniform(0.5, 1.5, n_bursts)
    bursts = (amps[:, None] * np.exp(-0.5 * ((time - centers[:, None]) / widths[:, None]) ** 2)).sum(axis=0)
    drift = rng.uniform(0.2, 0.8) * np.sin(2.0 * np.pi * rng.uniform(0.1, 1.0) * time + rng.uniform(0.0, 2.0 * np.pi))
    return _band_limit(bursts + drift, fs, None, EOG_CUTOFF_HZ)


def _synth_emg(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    noise = _band_limit(rng.standard_normal(n), fs, EMG_CUTON_HZ, None)
    gate = np.zeros(n)
    for _ in range(int(rng.integers(1, 4))):
        length = int(rng.integers(max(1, n // 5), max(2, (3 * n) // 5)))
        start = int(rng.integers(0, n - length + 1))
        gate[start : start + length] = 1.0
    return noise * gate


def _ecg_template(time: np.ndarray) -> np.ndarray:
    wave = np.zeros_like(time)
    for offset, width, amp in ECG_TEMPLATE_WAVES:
        wave += amp * np.exp(-0.5 * ((time - offset) / width) ** 2)
    return wave


def _synth_ecg(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    time = np.arange(n) / fs
    signal = np.zeros(n)
    beat = rng.uniform(-ECG_PERIOD_S, 0.0)
    while beat < time[-1] + ECG_PERIOD_S:
        signal += _ecg_template(time - beat)
        beat += ECG_PERIOD_S * (1.0 + rng.uniform(-ECG_JITTER, ECG_JITTER))
    return signal - signal.mean()


_GENERATORS = {
    ArtifactClass.CLEAN: _synth_clean,
    ArtifactClass.EOG: _synth_eog,
    ArtifactClass.EMG: _synth_emg,
    ArtifactClass.ECG: _synth_ecg,
}


def generate_synthetic(
    signal_class: "str | ArtifactClass",
    count: int,
    n: int,
    seed: int,
    sample_rate: float = DEFAULT_SAMPLE_RATE_HZ,
) -> list[Segment]:
    """
    Generate desk-scale stand-ins for clean EEG and the three artifact classes.

    Every segment has unit RMS and its own child seed, so the output is
    bit-identical for a given (class, count, n, seed, sample_rate).
    """
    label = ArtifactClass.parse(signal_class)
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    if n < MIN_LENGTH:
        raise ConfigError(f"segment length must be >= {MIN_LENGTH}, got {n}")
    if sample_rate <= 0:
        raise ConfigError(f"sample rate must be positive, got {sample_rate}")

    generator = _GENERATORS[label]
    children = np.random.SeedSequence(seed).spawn(count)
    segments = [
        Segment(_unit_rms(generator(n, sample_rate, np.random.default_rng(child))), label, sample_rate)
        for child in children
    ]
    logger.debug(f"Generated {count} {label.value} segments of length {n} (seed={seed})")
    return segments


#####################################
# Dataset Construction
#####################################


def split_sizes(total: int, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> tuple[int, ...]:
    """Largest-remainder apportionment of `total` items over `fractions`."""
    quotas = [total * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    remainders = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in remainders[: total - sum(sizes)]:
        sizes[i] += 1
    return tuple(sizes)


def _pair_indices(label: ArtifactClass, count: int, n_clean: int, rng: np.random.Generator) -> np.ndarray:
    if count <= n_clean:
        return rng.choice(n_clean, size=count, replace=False)
    if label is not ArtifactClass.EMG:
        raise ConfigError(
            f"{count} {label.value} segments need as many clean segments; only {n_clean} available"
        )
    extra = count - n_clean
    logger.warning(f"Reusing {extra} clean segments to pair with EMG")
    return np.concatenate([rng.permutation(n_clean), rng.integers(0, n_clean, size=extra)])


def build_mixed_dataset(
    clean: Sequence[Segment],
    artifacts_by_class: Mapping["str | ArtifactClass", Sequence[Segment]],
    snr_range_db: Sequence[float] = DEFAULT_SNR_RANGE_DB,
    pairing_seed: int = 0,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> DatasetSplit:
    """
    Pair every artifact segment with a clean segment and split 80/10/10.

    Each pair draws its own SNR uniformly from snr_range_db. Clean segments
    are reused only for EMG, and only when EMG outnumbers the clean pool.
    """
    if not clean:
        raise ConfigError("clean pool is empty")
    if not artifacts_by_class or not any(artifacts_by_class.values()):
        raise ConfigError("artifact pools are empty")
    low, high = (float(v) for v in snr_range_db)
    if not (math.isfinite(low) and math.isfinite(high)) or low > high:
        raise ConfigError(f"invalid SNR range {snr_range_db}")

    rng = np.random.default_rng(pairing_seed)
    pools = {ArtifactClass.parse(k): list(v) for k, v in artifacts_by_class.items()}
    examples: list[MixedExample] = []
    for label in ARTIFACT_CLASSES:
        artifacts = pools.get(label, [])
        if not artifacts:
            continue
        clean_ids = _pair_indices(label, len(artifacts), len(clean), rng)
        for artifact_id, (clean_id, artifact) in enumerate(zip(clean_ids, artifacts)):
            x = clean[int(clean_id)]
            target = float(rng.uniform(low, high))
            lam = lambda_for_snr(x, artifact, target)
            examples.append(mix(x, artifact, lam, int(clean_id), artifact_id))

    order = rng.permutation(len(examples))
    n_train, n_val, _ = split_sizes(len(examples), fractions)
    picked = [examples[i] for i in order]
    split = DatasetSplit(
        train=picked[:n_train],
        validation=picked[n_train : n_train + n_val],
        test=picked[n_train + n_val :],
        fractions=tuple(float(f) for f in fractions),
    )
    logger.info(
        f"Built mixed dataset: {len(examples)} pairs -> "
        f"{len(split.train)}/{len(split.validation)}/{len(split.test)}"
    )
    return split


#####################################
# Segment Files
#####################################


def _stem(path: "str | pathlib.Path") -> pathlib.Path:
    path = pathlib.Path(path)
    return path.with_suffix("") if path.suffix in (".json", ".f32") else path


def save_segments(path: "str | pathlib.Path", segments: Sequence[Segment]) -> pathlib.Path:
    """Write segments as a JSON header plus a little-endian float32 blob; returns the header path."""
    stem = _stem(path)
    labels = sorted({s.class_label.value for s in segments})
    length = len(segments[0]) if segments else 0
    if any(len(s) != length for s in segments):
        raise ConfigError("all segments in one file must share a length")
    header = {
        "version": FORMAT_VERSION,
        "n_segments": len(segments),
        "length": length,
        "sample_rate_hz": float(segments[0].sample_rate) if segments else DEFAULT_SAMPLE_RATE_HZ,
        "class": labels[0] if len(labels) == 1 else "MIXED",
    }
    if len(labels) > 1:
        header["labels"] = [s.class_label.value for s in segments]

    payload = np.stack([s.samples for s in segments]).astype("<f4") if segments else np.zeros(0, "<f4")
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".f32").write_bytes(payload.tobytes())
    header_path = stem.with_suffix(".json")
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return header_path


def load_segments(path: "str | pathlib.Path") -> list[Segment]:
    """Read a segment file written by save_segments."""
    stem = _stem(path)
    header_path = stem.with_suffix(".json")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{header_path}: header is not valid JSON ({e})") from e

    missing = [k for k in ("n_segments", "length", "sample_rate_hz", "class") if k not in header]
    if missing:
        raise DataFormatError(f"{header_path}: header is missing {missing}")
    if header.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise DataFormatError(f"{header_path}: unsupported version {header.get('version')}")
    n_segments, length = int(header["n_segments"]), int(header["length"])
    if n_segments < 0 or length < 0:
        raise DataFormatError(f"{header_path}: negative sizes in header")
    if n_segments == 0:
        return []

    if header["class"] == "MIXED":
        labels = header.get("labels")
        if not isinstance(labels, list) or len(labels) != n_segments:
            raise DataFormatError(f"{header_path}: MIXED class needs {n_segments} labels")
    else:
        labels = [header["class"]] * n_segments

    blob_path = stem.with_suffix(".f32")
    raw = blob_path.read_bytes()
    expected = n_segments * length * 4
    if len(raw) != expected:
        raise DataFormatError(
            f"{blob_path}: expected {expected} bytes for {n_segments}x{length} float32, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(n_segments, length).astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{blob_path}: payload contains non-finite values")

    rate = float(header["sample_rate_hz"])
    try:
        return [Segment(row, label, rate) for row, label in zip(data, labels)]
    except ConfigError as e:
        raise DataFormatError(f"{blob_path}: {e}") from e


#####################################
# Mixed Dataset Directories
#####################################


def save_examples(directory: "str | pathlib.Path", examples: Sequence[MixedExample]) -> None:
    """Write one split: clean/artifact/mixture segment files and pairs.csv."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_segments(directory / "clean", [e.clean for e in examples])
    save_segments(directory / "artifact", [e.artifact for e in examples])
    save_segments(directory / "mixture", [e.mixture for e in examples])
    pairs = pd.DataFrame(
        {
            "index": range(len(examples)),
            "class": [e.class_label.value for e in examples],
            "clean_index": [e.clean_index for e in examples],
            "artifact_index": [e.artifact_index for e in examples],
            "lambda_snr": [e.lambda_snr for e in examples],
            "target_snr_db": [e.target_snr_db for e in examples],
        }
    )
    pairs.to_csv(directory / "pairs.csv", index=False)


def load_examples(directory: "str | pathlib.Path") -> list[MixedExample]:
    """Read one split; the mixture is recomputed from clean, artifact and lambda_snr."""
    directory = pathlib.Path(directory)
    clean = load_segments(directory / "clean")
    artifact = load_segments(directory / "artifact")
    pairs = pd.read_csv(directory / "pairs.csv", float_precision="round_trip")
    if not (len(clean) == len(artifact) == len(pairs)):
        raise DataFormatError(
            f"{directory}: {len(clean)} clean, {len(artifact)} artifact and {len(pairs)} pair rows disagree"
        )
    examples = []
    for x, xp, row in zip(clean, artifact, pairs.itertuples(index=False)):
        try:
            examples.append(mix(x, xp, float(row.lambda_snr), int(row.clean_index), int(row.artifact_index)))
        except ConfigError as e:
            raise DataFormatError(f"{directory}: pair {row.index}: {e}") from e
    return examples


def save_dataset(directory: "str | pathlib.Path", split: DatasetSplit, extra_manifest: Optional[dict] = None) -> pathlib.Path:
    """Write all three splits and manifest.json; returns the manifest path."""
    directory = pathlib.Path(directory)
    for name in SPLIT_NAMES:
        save_examples(directory / name, split.part(name))
    manifest = {
        "version": FORMAT_VERSION,
        "fractions": list(split.fractions),
        "sizes": {name: len(split.part(name)) for name in SPLIT_NAMES},
    }
    manifest.update(extra_manifest or {})
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Saved dataset to {directory}")
    return manifest_path


def load_dataset(directory: "str | pathlib.Path") -> DatasetSplit:
    """Read a dataset written by save_dataset."""
    directory = pathlib.Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise DataFormatError(f"{directory}: no manifest.json; run synth-data first")
    manifest = json.loads(manifest_path.read_text())
    parts = {name: load_examples(directory / name) for name in SPLIT_NAMES}
    return DatasetSplit(fractions=tuple(manifest.get("fractions", DEFAULT_FRACTIONS)), **parts)


#####################################
# Desk Dataset Synthesis
#####################################

SOURCE_NAMES = ("clean", "eog", "emg", "ecg")


@dataclass(frozen=True)
class SynthConfig:
    """Sizes and seeds of the desk-scale synthetic corpus."""

    n: int = 64
    sample_rate: float = DEFAULT_SAMPLE_RATE_HZ
    clean_count: int = 250
    eog_count: int = 250
    emg_count: int = 250
    ecg_count: int = 250
    seed: int = 0
    snr_range_db: tuple = DEFAULT_SNR_RANGE_DB
    fractions: tuple = DEFAULT_FRACTIONS

    def __post_init__(self):
        object.__setattr__(self, "snr_range_db", tuple(float(v) for v in self.snr_range_db))
        object.__setattr__(self, "fractions", tuple(float(v) for v in self.fractions))
        if self.n < MIN_LENGTH:
            raise ConfigError(f"segment length must be >= {MIN_LENGTH}, got {self.n}")
        if min(self.clean_count, self.eog_count, self.emg_count, self.ecg_count) < 0 or self.clean_count < 1:
            raise ConfigError("segment counts must be non-negative and the clean pool non-empty")
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ConfigError(f"split fractions must be three non-negative numbers, got {self.fractions}")

    def source_seeds(self) -> dict[str, int]:
        """Independent generator seeds for the clean pool, each artifact pool and the pairing."""
        state = np.random.SeedSequence(self.seed).generate_state(len(SOURCE_NAMES) + 1)
        names = SOURCE_NAMES + ("pairing",)
        return {name: int(value) for name, value in zip(names, state)}


def synthesize(cfg: SynthConfig) -> tuple[dict[str, list[Segment]], DatasetSplit]:
    """Generate all source pools and the mixed 80/10/10 dataset built from them."""
    seeds = cfg.source_seeds()
    counts = {"clean": cfg.clean_count, "eog": cfg.eog_count, "emg": cfg.emg_count, "ecg": cfg.ecg_count}
    sources = {
        name: generate_synthetic(name.upper(), counts[name], cfg.n, seeds[name], cfg.sample_rate) if counts[name] else []
        for name in SOURCE_NAMES
    }
    split = build_mixed_dataset(
        sources["clean"],
        {name.upper(): sources[name] for name in SOURCE_NAMES[1:]},
        snr_range_db=cfg.snr_range_db,
        pairing_seed=seeds["pairing"],
        fractions=cfg.fractions,
    )
    return sources, split


def save_synthetic(directory: "str | pathlib.Path", cfg: SynthConfig, sources: Mapping[str, Sequence[Segment]], split: DatasetSplit) -> pathlib.Path:
    """Write source pools under <directory>/sources and the mixed dataset beside them."""
    directory = pathlib.Path(directory)
    for name, segments in sources.items():
        if segments:
            save_segments(directory / "sources" / name, segments)
    extra = {
        "synth": {
            "n": cfg.n,
            "sample_rate_hz": cfg.sample_rate,
            "counts": {name: len(sources[name]) for name in sources},
            "seed": cfg.seed,
            "seeds": cfg.source_seeds(),
            "snr_range_db": list(cfg.snr_range_db),
        }
    }
    return save_dataset(directory, split, extra)
