"""Behavioral RRAM computing-in-memory simulator for EEG correlation
extraction and seizure prediction."""

__version__ = "0.1.0"
