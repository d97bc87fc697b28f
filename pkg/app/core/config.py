import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env(name: str, default: str) -> str:
    return os.getenv(f"EXCOGNET_{name}", default)


class Config:
    # Profiles; the bundled INI is always loaded first
    PROFILES_PATH = os.getenv("EXCOGNET_PROFILES_PATH")

    LOG_LEVEL = _env("LOG_LEVEL", "INFO").upper()

    # Local repository
    REPOSITORY_BACKEND = _env("REPOSITORY_BACKEND", "file")
    REPOSITORY_PATH = _env("REPOSITORY_PATH", "repository.csv")

    # Redis Configuration
    REDIS_HOST = _env("REDIS_HOST", "localhost")
    REDIS_PORT = int(_env("REDIS_PORT", "6379"))
    REDIS_DB = int(_env("REDIS_DB", "0"))
    REDIS_KEY = _env("REDIS_KEY", "excognet:repository")

    # Test bench
    JAMMING_ALPHA = float(_env("JAMMING_ALPHA", "0.2"))
    JAMMER_TONE_CYCLES = float(_env("JAMMER_TONE_CYCLES", "0.01"))
    CALIBRATION_TOLERANCE = float(_env("CALIBRATION_TOLERANCE", "0.01"))
    CALIBRATION_MAX_ITERATIONS = int(_env("CALIBRATION_MAX_ITERATIONS", "40"))
    ROUND_DIGITS = int(_env("ROUND_DIGITS", "4"))

    # Controller
    GRACE_CYCLES = int(_env("GRACE_CYCLES", "3"))
    DEFAULT_SEED = int(_env("DEFAULT_SEED", "10"))
    DEFAULT_SNR_DB = float(_env("DEFAULT_SNR_DB", "12"))

    SWEEP_WORKERS = int(_env("SWEEP_WORKERS", "1"))
