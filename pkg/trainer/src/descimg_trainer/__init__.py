"""Fine-tuning and score export for the descriptive-image classification toolkit."""

from .data import DataError, ImageFolderDataset, Manifest, SiteEntry, read_manifest
from .export import ExportSummary, export_scores, load_snapshot
from .train import ARCHITECTURES, TrainerError, TrainSpec, build_model, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "DataError",
    "ExportSummary",
    "ImageFolderDataset",
    "Manifest",
    "SiteEntry",
    "TrainSpec",
    "TrainerError",
    "build_model",
    "export_scores",
    "load_snapshot",
    "read_manifest",
    "train",
]
