"""
FQM1 binary container

Layout (all integers unsigned 64-bit little-endian):

    b"FQM1"
    header length, header bytes (UTF-8 "key=value" lines)
    repeated until end of file:
        name length, name bytes (UTF-8), rows, cols,
        rows*cols IEEE-754 float64 little-endian values in column-major order

Values are written and read without conversion, so round trips are bit-exact.
"""
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Mapping, Tuple, Union

import numpy as np

from src.utils.errors import StorageError
from src.utils.logger import setup_logger

logger = setup_logger()

MAGIC = b"FQM1"
_U64 = struct.Struct('<Q')
_DTYPE = np.dtype('<f8')


def _as_block(value) -> np.ndarray:
    array = np.asarray(value, dtype=_DTYPE)
    if array.ndim == 0:
        return array.reshape(1, 1)
    if array.ndim == 1:
        return array.reshape(-1, 1)
    if array.ndim != 2:
        raise StorageError(f"blocks must be at most 2-D, got shape {array.shape}")
    return array


def _encode_header(metadata: Mapping[str, str]) -> bytes:
    lines = []
    for key, value in metadata.items():
        key, value = str(key), str(value)
        if '=' in key or '\n' in key or '\n' in value:
            raise StorageError(f"metadata entry {key!r} cannot be encoded as a key=value line")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode('utf-8')


def _decode_header(raw: bytes) -> Dict[str, str]:
    metadata = {}
    for line in raw.decode('utf-8').splitlines():
        if not line:
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise StorageError(f"malformed header line {line!r}")
        metadata[key] = value
    return metadata


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise StorageError(f"truncated container while reading {what}")
    return data


def _read_u64(f: BinaryIO, what: str) -> int:
    return _U64.unpack(_read_exact(f, _U64.size, what))[0]


def write_container(
    path: Union[str, Path],
    metadata: Mapping[str, str],
    blocks: Mapping[str, np.ndarray]
) -> Path:
    """
    Write named matrices to an FQM1 file

    Args:
        path: Destination file
        metadata: Header entries
        blocks: Name -> array (scalars become 1×1, vectors n×1)

    Returns:
        Path written
    """
    path = Path(path)
    header = _encode_header(metadata)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(MAGIC)
            f.write(_U64.pack(len(header)))
            f.write(header)
            for name, value in blocks.items():
                array = _as_block(value)
                encoded = name.encode('utf-8')
                f.write(_U64.pack(len(encoded)))
                f.write(encoded)
                f.write(_U64.pack(array.shape[0]))
                f.write(_U64.pack(array.shape[1]))
                f.write(array.tobytes(order='F'))
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}")

    logger.debug(f"Wrote FQM1 container {path} with blocks {list(blocks)}")
    return path


def read_container(path: Union[str, Path]) -> Tuple[Dict[str, str], Dict[str, np.ndarray]]:
    """
    Read an FQM1 file

    Returns:
        (metadata, blocks) with every block as a 2-D float64 array

    Raises:
        StorageError: If the file is missing, not FQM1 or truncated
    """
    path = Path(path)
    blocks: Dict[str, np.ndarray] = {}
    try:
        with open(path, 'rb') as f:
            if f.read(len(MAGIC)) != MAGIC:
                raise StorageError(f"{path} is not an FQM1 container")
            metadata = _decode_header(_read_exact(f, _read_u64(f, 'header length'), 'header'))

            while True:
                prefix = f.read(_U64.size)
                if not prefix:
                    break
                if len(prefix) != _U64.size:
                    raise StorageError("truncated container while reading a block name")
                name = _read_exact(f, _U64.unpack(prefix)[0], 'block name').decode('utf-8')
                rows = _read_u64(f, f"rows of {name}")
                cols = _read_u64(f, f"cols of {name}")
                payload = _read_exact(f, rows * cols * _DTYPE.itemsize, f"values of {name}")
                blocks[name] = np.frombuffer(payload, dtype=_DTYPE).reshape(
                    (rows, cols), order='F'
                ).copy()
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}")
    except UnicodeDecodeError as e:
        raise StorageError(f"{path} has a corrupt header or block name: {e}")

    return metadata, blocks


def is_container(path: Union[str, Path]) -> bool:
    """True if the file starts with the FQM1 magic bytes"""
    try:
        with open(path, 'rb') as f:
            return f.read(len(MAGIC)) == MAGIC
    except OSError:
        return False
