"""Physical constants (SI). Not configurable."""

SPEED_OF_LIGHT = 299792458.0
VACUUM_PERMITTIVITY = 8.8541878128e-12
FREE_SPACE_IMPEDANCE = 376.730313668
BOLTZMANN = 1.380649e-23
