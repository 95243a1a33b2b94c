"""Deterministic 64-bit seed derivation for reproducible model collections."""

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """One splitmix64 finalizer round: any 64-bit value to a well-mixed one."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(master: int, index: int) -> int:
    """Seed for stream `index` under `master`; distinct indexes decorrelate."""
    return splitmix64((master + (index + 1) * _GAMMA) & MASK64)
