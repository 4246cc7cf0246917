"""Feature-geometry distances between teacher and student representations."""

from .core import factor_gram, gram, normalize_rows, nuclear_norm, svd
from .metrics import (
    cka,
    d_cka,
    d_fg,
    d_linproj_value,
    d_procrustes,
    d_procrustes_direct,
    linproj_closed_form,
)

__version__ = "0.1.0"
