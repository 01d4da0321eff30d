"""Physical constants in SI units (CODATA 2018)."""

import math

C0 = 299792458.0
MU0 = 1.25663706212e-6
EPS0 = 1.0 / (MU0 * C0 * C0)
ETA0 = MU0 * C0

FOUR_PI_EPS0 = 4.0 * math.pi * EPS0
