"""Road-accident black-spot classification: data handling, a zoo of textbook
baselines, and an autoencoder + MixUp deep pipeline, with a leakage-safe
cross-validation harness."""

__version__ = "0.1.0"
