"""Model bundle: both encoders, optional editor, vocab and configs in one checkpoint."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .encoders import EncoderConfig, TransformerEncoder
from .numerics import checkpoint
from .tokenize import Vocabulary

PROTEIN = "protein_encoder."
TEXT = "text_encoder."
EDITOR = "editor."


@dataclass
class ModelBundle:
    protein_cfg: EncoderConfig
    text_cfg: EncoderConfig
    text_vocab: Vocabulary
    protein_encoder: TransformerEncoder
    text_encoder: TransformerEncoder
    editor: object | None = None
    editor_cfg: object | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return self.protein_encoder.tok.weight.dtype

    def tensors(self) -> dict[str, np.ndarray]:
        out = {PROTEIN + k: v for k, v in self.protein_encoder.state_dict().items()}
        out.update({TEXT + k: v for k, v in self.text_encoder.state_dict().items()})
        if self.editor is not None:
            out.update({EDITOR + k: v for k, v in self.editor.state_dict().items()})
        config = {
            "protein": self.protein_cfg.to_dict(),
            "text": self.text_cfg.to_dict(),
            "editor": None if self.editor_cfg is None else self.editor_cfg.to_dict(),
            "dtype": str(self.dtype),
            "meta": self.meta,
        }
        out["meta.config"] = checkpoint.pack_json(config)
        out["meta.text_vocab"] = checkpoint.pack_json(list(self.text_vocab.tokens))
        return out

    def save(self, path) -> None:
        checkpoint.save(path, self.tensors())

    def to_bytes(self) -> bytes:
        return checkpoint.dumps(self.tensors())

    def encoder_checksum(self) -> str:
        h = hashlib.sha256()
        for enc in (self.protein_encoder, self.text_encoder):
            for name, arr in enc.state_dict().items():
                h.update(name.encode())
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def freeze_encoders(self) -> None:
        self.protein_encoder.requires_grad_(False)
        self.text_encoder.requires_grad_(False)

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "ModelBundle":
        from .editor import Editor, EditorConfig

        config = checkpoint.unpack_json(tensors["meta.config"])
        vocab = Vocabulary(tuple(checkpoint.unpack_json(tensors["meta.text_vocab"])))
        dtype = np.dtype(config["dtype"])
        rng = np.random.default_rng(0)
        pcfg = EncoderConfig(**config["protein"])
        tcfg = EncoderConfig(**config["text"])
        bundle = cls(
            protein_cfg=pcfg,
            text_cfg=tcfg,
            text_vocab=vocab,
            protein_encoder=TransformerEncoder(pcfg, rng, dtype),
            text_encoder=TransformerEncoder(tcfg, rng, dtype),
            meta=config.get("meta", {}),
        )
        bundle.protein_encoder.load_state_dict(tensors, PROTEIN)
        bundle.text_encoder.load_state_dict(tensors, TEXT)
        if config.get("editor") is not None:
            ecfg = EditorConfig(**config["editor"])
            bundle.editor_cfg = ecfg
            bundle.editor = Editor(ecfg, pcfg, rng, dtype)
            bundle.editor.load_state_dict(tensors, EDITOR)
        return bundle

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.from_tensors(checkpoint.load(path))
