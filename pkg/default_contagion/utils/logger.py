"""
Logging utility for the default contagion engine
"""
import logging
import os
from default_contagion.config import LOGGING_SETTINGS, LOGS_DIR


def setup_logger(name="default_contagion"):
    """
    Set up and configure the logger

    Args:
        name: Logger name

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Set logging level based on configuration
    level = getattr(logging, LOGGING_SETTINGS.get("level", "INFO").upper(), logging.INFO)
    logger.setLevel(level)

    # Handlers are attached once per process
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if LOGGING_SETTINGS.get("log_to_file", False):
        os.makedirs(LOGS_DIR, exist_ok=True)
        log_file = LOGGING_SETTINGS.get("log_file", "default_contagion.log")
        file_handler = logging.FileHandler(LOGS_DIR / log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger


# Create a default logger instance
logger = setup_logger()


def log_run(command, label, trials, runtime, mean_loss=None):
    """
    Log the outcome of a finished run

    Args:
        command: Subcommand name (meanfield, particles, ...)
        label: Scenario label
        trials: Number of Monte Carlo trials
        runtime: Wall-clock seconds
        mean_loss: Mean terminal loss rate D_T (optional)
    """
    if not LOGGING_SETTINGS.get("enabled", True):
        return

    loss_info = f", mean D_T: {mean_loss:.6f}" if mean_loss is not None else ""
    logger.info(f"RUN: {command} {label} - trials: {trials}, runtime: {runtime:.2f}s{loss_info}")


def log_incident(kind, detail):
    """
    Log a numerical incident that was handled without stopping the run

    Args:
        kind: Short incident tag (clamp, feller, relaxed, ...)
        detail: Human readable detail
    """
    if not LOGGING_SETTINGS.get("enabled", True):
        return

    logger.warning(f"INCIDENT: {kind} - {detail}")


def log_error(message, exception=None):
    """
    Log error information

    Args:
        message: Error message
        exception: Exception object (optional)
    """
    if not LOGGING_SETTINGS.get("enabled", True):
        return

    if exception:
        logger.error(f"ERROR: {message} - {str(exception)}")
    else:
        logger.error(f"ERROR: {message}")
