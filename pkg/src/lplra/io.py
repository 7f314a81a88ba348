"""Matrix Market (array format) and header-less CSV readers/writers."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io

from .core import InvalidInputError, as_matrix


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".mtx":
        M = scipy.io.mmread(str(path))
        if hasattr(M, "toarray"):
            M = M.toarray()
        return as_matrix(M, str(path))
    if suffix in (".csv", ".txt"):
        M = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        return as_matrix(M, str(path))
    raise InvalidInputError(f"unsupported matrix file type: {path.name}")


def write_matrix(path, A) -> None:
    path = Path(path)
    A = as_matrix(A)
    suffix = path.suffix.lower()
    if suffix == ".mtx":
        # 17 significant digits make the text round-trip exact for float64
        scipy.io.mmwrite(str(path), A, field="real", precision=17)
    elif suffix in (".csv", ".txt"):
        np.savetxt(path, A, delimiter=",", fmt="%.17g")
    else:
        raise InvalidInputError(f"unsupported matrix file type: {path.name}")
