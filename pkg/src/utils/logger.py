"""Logging configuration for the reduction pipeline"""
import logging
import os
from datetime import datetime
from pathlib import Path


def setup_logger(name: str = "fastqm", log_level: str = None) -> logging.Logger:
    """
    Configure and return a logger with both file and console handlers.
    
    Args:
        name: Logger name
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL);
                   defaults to the LOG_LEVEL environment setting
    
    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    level = log_level or os.getenv('LOG_LEVEL', 'INFO')
    logger.setLevel(getattr(logging, level.upper()))
    
    # Avoid duplicate handlers
    if logger.handlers:
        return logger
    
    formatter = logging.Formatter(
        '%(asctime)s | %(name)s | %(levelname)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    
    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)
    
    if os.getenv('FASTQM_LOG_TO_FILE', 'true').lower() == 'true':
        log_dir = Path(os.getenv('LOG_DIR', 'logs'))
        log_dir.mkdir(parents=True, exist_ok=True)
        
        # File handler with daily rotation naming
        log_file = log_dir / f"fastqm_{datetime.now().strftime('%Y%m%d')}.log"
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    
    return logger


def set_level(log_level: str, name: str = "fastqm") -> None:
    """Change the level of an already configured logger (used by --log-level)"""
    logging.getLogger(name).setLevel(getattr(logging, log_level.upper()))
