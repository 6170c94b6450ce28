"""mindloop: a modular real-time EEG motor-imagery decoding pipeline."""

__version__ = "0.1.0"
