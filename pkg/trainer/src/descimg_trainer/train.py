"""Transfer-learning fine-tune with periodic snapshots.

The backbone is frozen except for its final dense layer, which is replaced
to match the dataset's class count.  Snapshots land in ``epoch_NNN``
directories (zero-padded, every ``snapshot_every`` epochs) and accuracy/loss
curves go to ``curves.csv``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Tuple

import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import ImageFolderDataset, read_manifest

ARCHITECTURES = ("tiny", "vgg16", "densenet121", "densenet169", "densenet201")
# unstable at small inputs; selectable but not defaults
EXTRA_ARCHITECTURES = ("resnet50", "inception_resnet_v2")


class TrainerError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSpec:
    architecture: str = "densenet169"
    manifest: Path = Path("manifest.csv")
    images_root: Path = Path("images")
    run_dir: Path = Path("run")
    input_size: int = 224
    learning_rate: float = 1e-5
    epochs: int = 100
    snapshot_every: int = 5
    batch_size: int = 16
    pretrained: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.input_size < 8:
            raise ValueError("input_size too small")
        if self.architecture not in ARCHITECTURES + EXTRA_ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")


class TinyNet(nn.Module):
    """Small fixture-scale CNN; the full architectures need downloads/GPU time."""

    def __init__(self, n_classes: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 8, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )
        self.classifier = nn.Linear(16, n_classes)

    def forward(self, x):
        return self.classifier(self.features(x))


def build_model(architecture: str, n_classes: int, pretrained: bool) -> nn.Module:
    if architecture == "tiny":
        return TinyNet(n_classes)
    import torchvision.models as tvm

    builders = {
        "vgg16": tvm.vgg16,
        "densenet121": tvm.densenet121,
        "densenet169": tvm.densenet169,
        "densenet201": tvm.densenet201,
        "resnet50": tvm.resnet50,
    }
    if architecture == "inception_resnet_v2":
        raise TrainerError("inception_resnet_v2 is not available in torchvision")
    try:
        model = builders[architecture](weights="IMAGENET1K_V1" if pretrained else None)
    except Exception as exc:
        raise TrainerError(f"could not load weights for {architecture}: {exc}") from exc
    # freeze everything, then replace and train only the final dense layer
    for p in model.parameters():
        p.requires_grad = False
    if architecture == "vgg16":
        model.classifier[-1] = nn.Linear(model.classifier[-1].in_features, n_classes)
    elif architecture.startswith("densenet"):
        model.classifier = nn.Linear(model.classifier.in_features, n_classes)
    else:
        model.fc = nn.Linear(model.fc.in_features, n_classes)
    return model


def _epoch_pass(model, loader, loss_fn, optimizer=None):
    training = optimizer is not None
    model.train(training)
    total_loss, correct, count = 0.0, 0, 0
    with torch.set_grad_enabled(training):
        for images, labels in loader:
            logits = model(images)
            loss = loss_fn(logits, labels)
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total_loss += float(loss.detach()) * len(labels)
            correct += int((logits.argmax(dim=1) == labels).sum())
            count += len(labels)
    if count == 0:
        return 0.0, 0.0
    return correct / count, total_loss / count


def save_snapshot(model: nn.Module, spec: TrainSpec, labels: Tuple[str, ...],
                  epoch: int) -> Path:
    snap_dir = Path(spec.run_dir) / f"epoch_{epoch:03d}"
    snap_dir.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "architecture": spec.architecture,
            "labels": list(labels),
            "input_size": spec.input_size,
            "epoch": epoch,
            "state_dict": model.state_dict(),
        },
        snap_dir / "model.pt",
    )
    doc = asdict(spec)
    doc = {k: str(v) if isinstance(v, Path) else v for k, v in doc.items()}
    (snap_dir / "spec.json").write_text(json.dumps(doc, indent=2) + "\n")
    return snap_dir


def train(spec: TrainSpec) -> Path:
    """Fine-tune per spec; returns the run directory."""
    manifest = read_manifest(spec.manifest)
    torch.manual_seed(spec.seed)
    train_set = ImageFolderDataset(manifest, spec.images_root, "train", spec.input_size)
    if len(train_set) == 0:
        raise TrainerError(f"no training images under {spec.images_root}")
    val_set = ImageFolderDataset(manifest, spec.images_root, "validation", spec.input_size)

    model = build_model(spec.architecture, len(manifest.labels), spec.pretrained)
    loss_fn = nn.CrossEntropyLoss()
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=spec.learning_rate)

    generator = torch.Generator().manual_seed(spec.seed)
    train_loader = DataLoader(
        train_set, batch_size=spec.batch_size, shuffle=True, generator=generator
    )
    val_loader = DataLoader(val_set, batch_size=spec.batch_size)

    run_dir = Path(spec.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    curves = []
    for epoch in range(1, spec.epochs + 1):
        acc, loss = _epoch_pass(model, train_loader, loss_fn, optimizer)
        curves.append((epoch, "train", acc, loss))
        if len(val_set):
            vacc, vloss = _epoch_pass(model, val_loader, loss_fn)
            curves.append((epoch, "validation", vacc, vloss))
        if epoch % spec.snapshot_every == 0:
            save_snapshot(model, spec, manifest.labels, epoch)
    if spec.epochs % spec.snapshot_every != 0:
        save_snapshot(model, spec, manifest.labels, spec.epochs)

    with open(run_dir / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "split", "accuracy", "loss"])
        writer.writerows(curves)
    return run_dir
