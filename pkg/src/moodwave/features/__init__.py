from .cache import read_features, write_features
from .cqt import chroma_cqt, chroma_fold, chroma_vqt, cqt, cqt_frequencies, vqt
from .extract import (
    FEATURE_LAYOUT,
    N_FEATURE_ROWS,
    ROW_MAP,
    ROW_SLICES,
    FeatureMatrix,
    FrameConfig,
    extract_all,
    extract_many,
    thread_count,
)
from .spectrum import (
    Spectrogram,
    chroma_stft,
    mel_filterbank,
    melspectrogram,
    mfcc,
    spectral_contrast,
    spectral_descriptors,
    stft,
)
from .tempo import TempoEstimate, estimate_tempo, onset_strength
from .tonal import tonnetz

__all__ = [
    "FEATURE_LAYOUT",
    "N_FEATURE_ROWS",
    "ROW_MAP",
    "ROW_SLICES",
    "FeatureMatrix",
    "FrameConfig",
    "Spectrogram",
    "TempoEstimate",
    "chroma_cqt",
    "chroma_fold",
    "chroma_stft",
    "chroma_vqt",
    "cqt",
    "cqt_frequencies",
    "estimate_tempo",
    "extract_all",
    "extract_many",
    "mel_filterbank",
    "melspectrogram",
    "mfcc",
    "onset_strength",
    "read_features",
    "spectral_contrast",
    "spectral_descriptors",
    "thread_count",
    "stft",
    "tonnetz",
    "vqt",
    "write_features",
]
