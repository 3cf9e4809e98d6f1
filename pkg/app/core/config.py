from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "Spherical Test Sensing Toolkit"
    APP_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Monte-Carlo engine
    DEFAULT_TRIALS: int = 100_000
    DEFAULT_SEED: int = 20120601
    # Trials per RNG block; changing it changes every simulated draw
    BLOCK_SIZE: int = 1024
    N_JOBS: int = 1
    ROC_THRESHOLDS: int = 1000

    # Analytic machinery
    ROUND_BETA_PARAMS: bool = False
    NEAR_SPHERICAL_GAP: float = 1e-6
    K2_SERIES_REL_TOL: float = 1e-13
    K2_SERIES_MAX_TERMS: int = 100_000
    K3_SERIES_REL_TOL: float = 1e-14
    K3_SERIES_MAX_TERMS: int = 20_000

    # Output
    CSV_FLOAT_FORMAT: str = "%.10g"

    # Monitoring
    ENABLE_METRICS: bool = True
    METRICS_FILE: Optional[str] = None

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
