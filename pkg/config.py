"""
Configuration module for the polyvem solver.
Handles environment variables and process-wide solver defaults.
"""
import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Application configuration class."""

    # Application Settings
    APP_TITLE: str = "polyvem"
    LOG_LEVEL: str = os.getenv("POLYVEM_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR: str = os.getenv("POLYVEM_OUTPUT_DIR", "results")

    # Element loops run on this many threads (results do not depend on it)
    WORKERS: int = int(os.getenv("POLYVEM_WORKERS", "1"))
    CHUNK_SIZE: int = 256

    # Newton defaults
    NEWTON_TOL_ABS: float = float(os.getenv("POLYVEM_NEWTON_TOL_ABS", "1e-8"))
    NEWTON_TOL_REL: float = float(os.getenv("POLYVEM_NEWTON_TOL_REL", "1e-10"))
    NEWTON_MAX_ITER: int = int(os.getenv("POLYVEM_NEWTON_MAX_ITER", "25"))
    MAX_STEP_CUTS: int = int(os.getenv("POLYVEM_MAX_STEP_CUTS", "8"))

    # Newmark defaults (average acceleration)
    NEWMARK_GAMMA: float = 0.5
    NEWMARK_ZETA: float = 0.25

    # Stabilization and mass defaults
    BETA_STAT: float = float(os.getenv("POLYVEM_BETA_STAT", "0.4"))
    BETA_DYN: float = float(os.getenv("POLYVEM_BETA_DYN", "0.0"))
    BETA_STAT_RECOMMENDED: tuple = (0.2, 0.6)
    MASS_SCHEME: str = os.getenv("POLYVEM_MASS_SCHEME", "centroid")

    # Geometry tolerances (relative)
    DEGENERATE_TOL: float = 1e-14
    DUPLICATE_NODE_TOL: float = 1e-12
    CONVEXITY_TOL: float = 1e-12

    # Linear solver
    PIVOT_RATIO_TOL: float = 1e-11
    SOLVE_RESIDUAL_TOL: float = 1e-10
    NULL_EIGEN_TOL: float = 1e-8
    NULLSPACE_DENSE_LIMIT: int = int(os.getenv("POLYVEM_NULLSPACE_DENSE_LIMIT", "3000"))

    # Output formatting
    CSV_FORMAT: str = "%.12e"
    MESH_FLOAT_DIGITS: int = 17

    @classmethod
    def recommended_beta(cls, beta_stat: float) -> bool:
        """Whether beta_stat lies in the range known to balance locking and hourglassing."""
        low, high = cls.BETA_STAT_RECOMMENDED
        return low <= beta_stat <= high

    @classmethod
    def validate(cls) -> None:
        """
        Validate environment overrides.
        Raises ValueError if a value is outside its admissible range.
        """
        if cls.LOG_LEVEL not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"POLYVEM_LOG_LEVEL '{cls.LOG_LEVEL}' is not a logging level")

        if cls.WORKERS < 1:
            raise ValueError(f"POLYVEM_WORKERS must be >= 1, got {cls.WORKERS}")

        for name in ("BETA_STAT", "BETA_DYN"):
            value = getattr(cls, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"POLYVEM_{name} must lie in [0, 1], got {value}")

        if cls.NEWTON_TOL_ABS <= 0 or cls.NEWTON_TOL_REL <= 0:
            raise ValueError("Newton tolerances must be positive")

        if cls.NEWTON_MAX_ITER < 1:
            raise ValueError(f"POLYVEM_NEWTON_MAX_ITER must be >= 1, got {cls.NEWTON_MAX_ITER}")

        if cls.MASS_SCHEME not in {"centroid", "subtriangulation", "exact"}:
            raise ValueError(
                f"POLYVEM_MASS_SCHEME '{cls.MASS_SCHEME}' is not one of centroid, subtriangulation, exact"
            )

        if not cls.recommended_beta(cls.BETA_STAT):
            print(f"   WARNING: POLYVEM_BETA_STAT={cls.BETA_STAT} lies outside the recommended range "
                  f"{cls.BETA_STAT_RECOMMENDED}")


Config.validate()
