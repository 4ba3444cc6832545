"""Multi-expert coreference resolution at desk scale.

Mention pairs are routed deterministically to one of six linguistic
categories, each with its own antecedent scorer on top of a shared
scorer and a shared mention scorer. Gradients are computed manually
and verified by finite differences.
"""

__version__ = "0.1.0"
