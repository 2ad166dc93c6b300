"""Process-level torch tuning.

This workload is many small conv ops; on constrained sandboxes intra-op
threading costs more than it buys, so runs default to one torch thread
(override with CROSSGRAFT_TORCH_THREADS). Single-thread execution also
makes run-to-run determinism unconditional.
"""
from __future__ import annotations

import os

import torch

THREADS_ENV = "CROSSGRAFT_TORCH_THREADS"


def configure_torch(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    torch.set_num_threads(threads)
    try:
        torch.set_num_interop_threads(1)
    except RuntimeError:
        pass  # already initialized; interop setting is one-shot
    return threads
