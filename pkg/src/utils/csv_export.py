"""CSV export utilities for reports, sweeps and figure tables"""
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd

from src.utils.config import Config
from src.utils.errors import StorageError
from src.utils.logger import setup_logger
from src.utils.time_utils import get_timestamp_string

logger = setup_logger()

METADATA_PREFIX = '# '


def save_table(
    table: pd.DataFrame,
    path: Union[str, Path],
    metadata: Optional[Dict[str, str]] = None
) -> Path:
    """
    Save a table to CSV with a '# key=value' metadata header
    
    Args:
        table: Table to save
        path: Destination CSV path
        metadata: Parameters of the producing command
    
    Returns:
        Path to saved CSV file
    """
    csv_path = Path(path)
    header = {
        'format_version': str(Config.FORMAT_VERSION),
        'created_utc': get_timestamp_string(),
    }
    header.update({k: str(v) for k, v in (metadata or {}).items()})
    
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, 'w', newline='', encoding='utf-8') as f:
            for key, value in header.items():
                f.write(f"{METADATA_PREFIX}{key}={value}\n")
            table.to_csv(f, index=False)
        
        logger.info(f"Saved {len(table)} rows to {csv_path}")
        return csv_path
    
    except OSError as e:
        logger.error(f"Failed to save CSV table: {e}")
        raise StorageError(f"Cannot write {csv_path}: {e}")


def load_table(path: Union[str, Path]) -> pd.DataFrame:
    """Load a CSV table written by save_table (metadata lines are skipped)"""
    try:
        return pd.read_csv(path, comment='#', float_precision='round_trip')
    except (OSError, pd.errors.ParserError) as e:
        raise StorageError(f"Cannot read {path}: {e}")


def load_metadata(path: Union[str, Path]) -> Dict[str, str]:
    """Read the '# key=value' header of a CSV table"""
    metadata = {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            for line in f:
                if not line.startswith(METADATA_PREFIX):
                    break
                key, _, value = line[len(METADATA_PREFIX):].rstrip('\n').partition('=')
                metadata[key] = value
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")
    return metadata
