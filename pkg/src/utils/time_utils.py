"""Time utilities"""
from datetime import datetime, timezone


def get_utc_now() -> datetime:
    """Get current UTC datetime"""
    return datetime.now(timezone.utc)


def get_timestamp_string(dt: datetime = None) -> str:
    """
    Get an ISO-8601 timestamp string (seconds precision, UTC)
    
    Args:
        dt: Datetime object (defaults to current UTC time)
    
    Returns:
        Timestamp string such as 2026-01-31T12:00:00Z
    """
    if dt is None:
        dt = get_utc_now()
    return dt.strftime('%Y-%m-%dT%H:%M:%SZ')
