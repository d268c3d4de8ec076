"""Named numerical tolerances shared across the package.

Functions read these at call time, so :func:`override` affects everything
evaluated inside its ``with`` block.
"""

from contextlib import contextmanager

DEFAULTS = {
    # Hermiticity, idempotence, orthogonality, completeness, trace checks.
    "structural": 1e-10,
    # Round-trip identities such as polar UA = L or sqrt(A)^2 = A.
    "roundtrip": 1e-8,
    # Minimum eigenvalue accepted as PSD.
    "psd": 1e-10,
    # Eigenvalues below -psd_hard are an error, not rounding noise.
    "psd_hard": 1e-6,
    # Diagonal D entries below this are pruned from ratio checks.
    "diagonal_floor": 1e-12,
    # Lower bound on tr(rho_f rho_i) for time-symmetric functionals.
    "endpoint_floor": 1e-12,
    # Default approximate-decoherence threshold.
    "epsilon": 1e-6,
}

_active = dict(DEFAULTS)


def get(name):
    return _active[name]


def snapshot():
    """Current tolerance table (a copy)."""
    return dict(_active)


@contextmanager
def override(**values):
    unknown = set(values) - set(DEFAULTS)
    if unknown:
        raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
    saved = dict(_active)
    _active.update({k: float(v) for k, v in values.items()})
    try:
        yield snapshot()
    finally:
        _active.clear()
        _active.update(saved)
