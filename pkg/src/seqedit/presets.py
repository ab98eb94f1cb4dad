"""Desk-scale settings for the synthetic tasks (single CPU core, minutes not days).

Library defaults elsewhere are the full-scale settings; these
shrink the models and raise the learning rates so the synthetic tasks
train in a few minutes.
"""

from __future__ import annotations

from .align import AlignConfig
from .editor import STOP_SLACK, EditorConfig, EditorTrainConfig
from .encoders import EncoderConfig

PROTEIN_MAX_LEN = 48  # longest synthetic sequence is 45 residues
TEXT_MAX_LEN = 16


def desk_align_config(epochs: int = 10) -> AlignConfig:
    return AlignConfig(
        protein=EncoderConfig(layers=1, model_dim=128, heads=4, max_len=PROTEIN_MAX_LEN, projection_dim=128),
        text=EncoderConfig(layers=1, model_dim=128, heads=4, max_len=TEXT_MAX_LEN, projection_dim=128),
        lr=1e-3,
        warmup_steps=30,
        epochs=epochs,
    )


def desk_editor_config(fusion: str = "film") -> EditorConfig:
    return EditorConfig(
        layers=1,
        heads=4,
        fusion=fusion,
        max_len=PROTEIN_MAX_LEN + STOP_SLACK,
        hinge_margin=0.1,
        sim_weight=5.0,
    )


def desk_editor_train_config(epochs: int = 30) -> EditorTrainConfig:
    return EditorTrainConfig(batch_size=32, epochs=epochs, lr=3e-3, warmup_steps=30)
