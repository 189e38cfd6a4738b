"""Binary coordinate masks for coupling layers.

Mask value 1 marks the "masked-in" coordinates a coupling block passes
through unchanged (and feeds to its scale/translation nets); value 0 marks
the transformed coordinates. Consecutive blocks use complementary masks.
"""

import numpy as np

MASK_KINDS = ("checkerboard", "dimension_wise")


def build_mask(kind, dim, invert=False):
    """Boolean mask of length `dim`; True = masked-in (identity) coordinate.

    checkerboard: 1 at odd indices (index parity stands in for the spatial
    coordinate-sum parity on a flat latent). dimension_wise: 1 on the first
    ceil(dim/2) entries.
    """
    if kind == "checkerboard":
        mask = (np.arange(dim) % 2) == 1
    elif kind == "dimension_wise":
        mask = np.arange(dim) < (dim + 1) // 2
    else:
        raise ValueError(f"unknown mask kind {kind!r}")
    return ~mask if invert else mask


def mask_stack(kind, dim, n_blocks):
    """Alternating masks for a block stack (inverted after every layer)."""
    return [build_mask(kind, dim, invert=bool(i % 2)) for i in range(n_blocks)]
