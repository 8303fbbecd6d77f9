import logging
import os

import numpy as np
from dotenv import load_dotenv

from consts import ENV_LOG_LEVEL, ENV_WORKERS
from errors import DataError


def configure_logging(level=None):
    # Configure logging at startup
    load_dotenv()
    if level is None:
        level = os.getenv(ENV_LOG_LEVEL, "INFO").upper()
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    # Namespaces that are too chatty at INFO
    quiet_namespaces = ['matplotlib', 'numexpr']

    for namespace in quiet_namespaces:
        logger = logging.getLogger(namespace)
        logger.setLevel(logging.WARNING)


def worker_count(default=1):
    """Thread count for replication and bootstrap pools, from the environment"""
    load_dotenv()
    try:
        workers = int(os.getenv(ENV_WORKERS, default))
    except ValueError:
        workers = default
    return max(1, workers)


def stream_rng(seed, *keys):
    """Counter-based generator: the stream depends only on (seed, *keys), never on call order"""
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


def as_matrix(values, name, columns=None):
    """Coerce to a finite 2-D float array, rejecting NaN/Inf"""
    array = np.asarray(values, dtype=float)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        array = array.reshape(-1, 1) if columns in (None, 1) else array.reshape(1, -1)
    if array.ndim != 2:
        raise DataError(f"{name} must be a matrix, got shape {array.shape}")
    if columns is not None and array.shape[1] != columns:
        raise DataError(f"{name} has {array.shape[1]} columns, expected {columns}")
    if not np.all(np.isfinite(array)):
        bad = np.unique(np.nonzero(~np.isfinite(array))[0])
        raise DataError(f"{name} contains non-finite values in rows {bad[:10].tolist()}")
    return array
