"""Physical constants shared across the simulator."""

import math

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0

# Delays are carried in nanoseconds throughout; distances in meters.
SPEED_OF_LIGHT_M_PER_NS = SPEED_OF_LIGHT_M_PER_S * 1e-9

FOUR_PI_CUBED = (4.0 * math.pi) ** 3
