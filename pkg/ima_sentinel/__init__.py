__version__ = "Unknown version"


"""
The __init__ for ima-sentinel, a desk-scale simulator of an IMA data path
(partitioned applications feeding an End System over virtual links) with a
switch-resident monitor that re-simulates the expected traffic.
"""


from importlib.metadata import version, PackageNotFoundError

# Overwriting version (if possible) from the package metadata
# if this has been installed as a package.
# Note that we rely on git tags (via setuptools_scm) to define that version.
try:
    __version__ = version("ima_sentinel")
except PackageNotFoundError:
    # package is not installed
    pass


LOG_PREFIX = "[IMA-SENTINEL]"
LOG_LEVEL_ENV_VAR = "IMA_SENTINEL_LOG"
DEFAULT_LOG_LEVEL = "warn"

DEFAULT_WINDOW_N = 8
DEFAULT_EPSILON = 1e-9
DEFAULT_QUEUING_CAPACITY = 8
DEFAULT_DELTA_CYCLE_BOUND = 1000
DEFAULT_PROP_DELAY_US = 100
DEFAULT_RUN_MAFS = 100
MAX_FRAME_SIZE = 1518
MIN_FRAME_SIZE = 64
ALLOWED_BAGS_MS = (1, 2, 4, 8, 16, 32, 64, 128)

__settings__ = {
    LOG_LEVEL_ENV_VAR: dict(
        description=f"Diagnostics level on standard error, one of error, warn, info or debug. Defaults to '{DEFAULT_LOG_LEVEL}'.",
        level="debug",
    ),
}
