from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="IFSRES_")

    # Parallelism
    WORKERS: Optional[int] = None
    WORKER_SCALE_THRESHOLD: int = 2  # Min number of scales per worker in parallel
    WORKER_ANGLE_THRESHOLD: int = 256  # Min number of angles per worker in parallel

    # Budgets
    MAX_CELLS: int = 10**8
    MAX_PAIRS: Optional[int] = None  # None streams without bound
    MAX_TREE_NODES: int = 10**7
    TREE_MATERIALIZE_NODES: int = 20_000
    PAIR_BLOCK_SIZE: int = 1 << 20
    ENUMERATION_BUDGET: int = 100_000

    # Numerics
    HULL_MAX_ITER: int = 1000
    HULL_TOL: float = 1e-14
    FLOAT_TOL: float = 1e-12
    SIMDIM_TOL: float = 1e-13
    LATTICE_SNAP_TOL: float = 1e-9  # k·r^γ this close to an integer is taken as that integer
    DEFAULT_Q_MAX: int = 10**6
    RESONANCE_TOL: float = 1e-12
    MP_DPS: int = 60
    THETA_STEPS: int = 4096
    MAX_THETA_STEPS: int = 65536
    SEED: int = 0

    # Logging
    LOG_LEVEL: str = "WARNING"

    # Benchmark
    RESULTS_FOLDER: str = "results"


settings = Settings()
