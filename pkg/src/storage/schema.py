"""Block layout of the FQM1 containers written by the pipeline"""
from typing import Dict, Iterable, List

from src.utils.config import Config
from src.utils.errors import StorageError
from src.utils.logger import setup_logger

logger = setup_logger()


class ContainerSchema:
    """Required and optional blocks of every container kind"""

    FORMAT_VERSION = Config.FORMAT_VERSION

    # Blocks every container of a kind must carry
    REQUIRED: Dict[str, List[str]] = {
        'basis': ['V_tilde', 'sigma', 'S_tilde', 'total_energy', 'reference'],
        'model': ['reference', 'V_r', 'V_q', 'Xi', 'gamma'],
        'snapshots': ['snapshots'],
    }

    # Blocks that may be absent
    OPTIONAL: Dict[str, List[str]] = {
        'basis': [],
        'model': ['Q_r', 'Q_q'],
        'snapshots': ['reference'],
    }

    @classmethod
    def verify(cls, kind: str, metadata: Dict[str, str], blocks: Iterable[str]) -> bool:
        """
        Check that a container matches the layout of its kind

        Args:
            kind: Expected container kind
            metadata: Header of the container
            blocks: Names of the blocks found

        Returns:
            True when the container is usable

        Raises:
            StorageError: On a kind mismatch, unsupported version or missing block
        """
        if kind not in cls.REQUIRED:
            raise StorageError(f"unknown container kind {kind!r}")
        found_kind = metadata.get('kind')
        if found_kind is not None and found_kind != kind:
            raise StorageError(f"expected a {kind} container, found {found_kind}")

        version = metadata.get('format_version')
        if version is not None and int(version) > cls.FORMAT_VERSION:
            raise StorageError(
                f"container format version {version} is newer than supported ({cls.FORMAT_VERSION})"
            )

        names = set(blocks)
        missing = [name for name in cls.REQUIRED[kind] if name not in names]
        if missing:
            raise StorageError(f"{kind} container lacks blocks {missing}")

        unknown = names - set(cls.REQUIRED[kind]) - set(cls.OPTIONAL[kind])
        if unknown:
            logger.debug(f"Ignoring unknown blocks {sorted(unknown)} in {kind} container")
        return True
