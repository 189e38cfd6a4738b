"""Jointly trained contrastive image-text embedder (frozen after pretraining)."""

from .tokenizer import Tokenizer, UNK_ID
from .model import ImageTower, JointEmbedder, TextTower, contrastive_loss, l2_normalize
from .train import contrastive_train, retrieval_accuracy

__all__ = [
    "Tokenizer", "UNK_ID", "ImageTower", "JointEmbedder", "TextTower",
    "contrastive_loss", "l2_normalize", "contrastive_train", "retrieval_accuracy",
]
