"""Physical and signal constants shared across the package."""

C = 299792458.0                 # speed of light, m/s (exact)
F_L1 = 1575.42e6                # L1 carrier, Hz
LAMBDA_L1 = C / F_L1
F_CA = 1.023e6                  # C/A chip rate, chip/s
CA_LEN = 1023
CA_PERIOD = CA_LEN / F_CA       # 1 ms
BIT_RATE = 50.0
CODES_PER_BIT = 20
SUBFRAME_SECONDS = 6.0

# WGS-84 / IS-GPS-200 values
GM = 3.986005e14
OMEGA_E = 7.2921151467e-5
REL_F = -4.442807633e-10        # relativistic clock constant, s/sqrt(m)
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)
WGS84_B = WGS84_A * (1.0 - WGS84_F)

G0 = 9.80665
SECONDS_PER_WEEK = 604800.0
HALF_WEEK = 302400.0
