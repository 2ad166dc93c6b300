"""Task classifier: trained on source-initiated transitions with source
labels, evaluated on aligned target-initiated transitions.
"""
from __future__ import annotations

import torch
import torch.nn.functional as F

from .alignment import AlignedTransitions
from .errors import ContractError
from .networks import ClassifierHead


def task_loss(
    classifier: ClassifierHead,
    x_s_st: torch.Tensor,
    x_s_ts: torch.Tensor,
    labels_s: torch.Tensor,
) -> torch.Tensor:
    """Soft-max cross-entropy over both source-initiated channels:

        mean_batch[ CE(T(x_s_st), y) + CE(T(x_s_ts), y) ]
    """
    n_classes = classifier.head.out_features
    if labels_s.min() < 0 or labels_s.max() >= n_classes:
        raise ContractError(f"labels outside [0, {n_classes}): min={int(labels_s.min())} max={int(labels_s.max())}")
    return F.cross_entropy(classifier(x_s_st), labels_s) + F.cross_entropy(classifier(x_s_ts), labels_s)


@torch.no_grad()
def accuracy(classifier: ClassifierHead, x: torch.Tensor, labels: torch.Tensor) -> float:
    pred = classifier(x).argmax(dim=1)
    return float((pred == labels).to(torch.float64).mean())


@torch.no_grad()
def evaluate(
    classifier: ClassifierHead,
    channel: str,
    aligned: AlignedTransitions,
    labels_t: torch.Tensor,
) -> float:
    """Fraction of correct predictions on one aligned channel. The only place
    target labels are consumed."""
    if channel not in ("st", "ts"):
        raise ContractError(f"channel must be 'st' or 'ts', got {channel!r}")
    x = aligned.x_t_st_aligned if channel == "st" else aligned.x_t_ts_aligned
    return accuracy(classifier, x, labels_t)
