"""Numeric conventions shared across the package.

All comparisons in the library go through these three constants so that
every module classifies mass, support, and equality the same way.
"""

# |total mass - 1| above this rejects a distribution (or a kernel row,
# or a coupling) at construction time. Never renormalize silently.
TAU_MASS = 1e-9

# Entries at or below this are treated as zero for support classification.
TAU_ZERO = 1e-12

# Tolerance for numeric equality checks and audit verdicts.
TAU_NUM = 1e-9

# Seed used by the CLI when none is given; every report echoes the value.
DEFAULT_SEED = 12345
