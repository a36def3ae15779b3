"""Cross-attention, the pose-controllable adapter and mode dispatch.

Main Components:
- CrossAttentionWeights / AdapterWeights: per-site base and residual projections
- cross_attention / adapted_cross_attention: base and adapter evaluations
- mode_dispatch: text-editing vs face-generation routing
- SelfAttention / attend: shared multi-head attention kernel
"""

from .cross_attention import (
    AdapterWeights,
    AttentionActivations,
    CrossAttentionWeights,
    adapted_cross_attention,
    attention_activations,
    cross_attention,
    mode_dispatch,
)
from .kernel import AttentionOutput, attend, merge_heads, split_heads
from .self_attention import SelfAttention

__all__ = [
    "AdapterWeights",
    "AttentionActivations",
    "AttentionOutput",
    "CrossAttentionWeights",
    "SelfAttention",
    "adapted_cross_attention",
    "attend",
    "attention_activations",
    "cross_attention",
    "merge_heads",
    "mode_dispatch",
    "split_heads",
]
