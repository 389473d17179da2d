"""Input coercion and checks used at every public entry point."""
import numpy as np

DEFAULT_RANK_RTOL = 1e-10
DIRECT_SUM_TOL = 1e-10
ANGLE_TOL = 1e-8
NEIGHBORHOOD_MARGIN = 1e-6


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array (copy only if needed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_vector(x, name="point", dim=None):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must have length {dim}, got {arr.shape[0]}")
    return arr


def check_same_shape(a, b, names=("A", "T")):
    if a.shape != b.shape:
        raise ValueError(f"{names[0]} has shape {a.shape} but {names[1]} has shape {b.shape}")


def spectral_norm(a):
    """Largest singular value; 0 for empty matrices."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))
