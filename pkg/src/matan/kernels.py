"""Selects the compiled kernels when available, else the NumPy fallback.

Set ``MATAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("MATAN_PURE_PYTHON", "") not in ("", "0"):
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:  # extension not built
        backend = _pykernels

NAME = backend.NAME
glove_epoch = backend.glove_epoch
attend_pairs = backend.attend_pairs
attend_pairs_backward = backend.attend_pairs_backward
attention_offsets = _pykernels.attention_offsets
