"""
Constants for the polyvem solver: material table, benchmark geometry and loads.

Units throughout: mm, N, tonne, s (stress in MPa, density in tonne/mm^3).
"""

# Material table used by every benchmark
STEEL_E = 210000.0          # MPa
STEEL_NU = 0.3
STEEL_RHO = 2.7e-9          # tonne/mm^3

# Incompressibility guard on the Poisson ratio
NU_LIMIT_MARGIN = 1e-9

# Factor applied to the analytic bar frequencies
BAR_OMEGA_FACTOR = 1.0 / 0.95

# First root of the cantilever frequency equation, squared
CANTILEVER_ROOT_SQ = 3.5156

# First root of the clamped-clamped beam frequency equation, squared
CLAMPED_ROOT_SQ = 22.373

# Analytic series truncation (relative to bar length)
SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 2_000_000

# 2D bar
BAR2D_LENGTH = 30.0
BAR2D_HEIGHT = 0.3
BAR2D_DIVISIONS = (100, 4)
BAR_V0 = 2.0e4              # mm/s

# 2D transversal beam
BEAM2D_LENGTH = 30.0
BEAM2D_HEIGHT = 5.0
BEAM2D_DIVISIONS = (24, 4)
BEAM2D_PMAX = 1.0e5         # N, total end force

# Cook's membrane
COOK_CORNERS = ((0.0, 0.0), (48.0, 44.0), (48.0, 60.0), (0.0, 44.0))
COOK_LENGTH = 48.0
COOK_HEIGHT = 44.0
COOK_PMAX = 1.0e7           # N/mm line load
COOK_LEVEL = 3              # divisions 2^N per side

# 3D bar
BAR3D_LENGTH = 30.0
BAR3D_HEIGHT = 5.0
BAR3D_WIDTH = 5.0
BAR3D_DIVISIONS = (12, 2, 2)

# 3D beam
BEAM3D_LENGTH = 30.0
BEAM3D_HEIGHT = 5.0
BEAM3D_WIDTH = 5.0
BEAM3D_DIVISIONS = (12, 2, 2)
BEAM3D_PMAX = 6000.0        # N/mm line load

# 3D plate
PLATE3D_LENGTH = 30.0
PLATE3D_WIDTH = 30.0
PLATE3D_HEIGHT = 5.0
PLATE3D_DIVISIONS = (4, 4, 1)
PLATE3D_V0 = 2.0e5          # mm/s

# Time steps per resolved period
STEPS_PER_PERIOD = 100
BAR_STEPS_PER_TRANSIT = 200

# VTK cell types
VTK_TRIANGLE = 5
VTK_POLYGON = 7
