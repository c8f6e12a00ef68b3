"""CHB-MIT style ingestion, preprocessing, windowing and synthetic EEG."""

from .annotations import AnnotationError, FileSummary, file_offsets, parse_annotations
from .edf import EdfError, parse_edf, write_edf
from .io import load_csv, load_patient, scan_dataset
from .recording import CHANNELS, INTERICTAL, PREICTAL, LabeledWindow, Recording, select_channels
from .synth import SynthDataset, SynthProfile, synthesize, synthetic_patient
from .windows import (
    HORIZON,
    INTERICTAL_GAP,
    MERGE_GAP,
    WINDOW_SECONDS,
    classify_span,
    filter_lowpass,
    interictal_seconds,
    label_windows,
    merge_seizures,
    patient_timeline,
    select_patients,
    window_index,
)

__all__ = [
    "AnnotationError", "CHANNELS", "EdfError", "FileSummary", "HORIZON", "INTERICTAL", "INTERICTAL_GAP",
    "LabeledWindow", "MERGE_GAP", "PREICTAL", "Recording", "SynthDataset", "SynthProfile", "WINDOW_SECONDS",
    "classify_span", "file_offsets", "filter_lowpass", "interictal_seconds", "label_windows", "load_csv",
    "load_patient", "merge_seizures", "parse_annotations", "parse_edf", "patient_timeline", "scan_dataset",
    "select_channels", "select_patients", "synthesize", "synthetic_patient", "window_index", "write_edf",
]
