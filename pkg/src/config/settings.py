from pathlib import Path
from typing import Literal
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Logging settings
    log_level: str = "INFO"
    log_file: str = "pc_corrector.log"

    # Run outputs
    output_dir: str = "runs"
    metrics_file: str = "metrics.prom"

    # Reproducibility
    default_seed: int = 0
    dtype: Literal["float64"] = "float64"

    # Parallelism: per-trajectory work (data generation, forecast extraction,
    # corrector batch members). 1 keeps everything on the calling thread.
    workers: int = 1
    torch_threads: int = 0

    class Config:
        env_file = ".env"
        env_prefix = "PC_"
        case_sensitive = False

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def is_parallel(self) -> bool:
        """Check if per-trajectory work runs on a thread pool"""
        return self.workers > 1

settings = Settings()
