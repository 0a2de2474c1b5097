"""Desk-scale multi-task contrastive sentence-embedding training.

A shared Transformer encoder is trained jointly on a text contrastive loss
and an independent image or audio contrastive loss over unpaired data, with
the evaluation and ablation machinery to study what the auxiliary task buys.
"""

__version__ = "0.1.0"
