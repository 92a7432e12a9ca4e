"""Reading and writing snapshot matrices, candidate bases and models"""
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.snapshots import CandidateBasis, CenteringMode
from src.models.manifold import ModelFactor, QuadraticManifoldModel, resolve_method
from src.storage.fqm1 import is_container, read_container, write_container
from src.storage.schema import ContainerSchema
from src.utils.config import Config
from src.utils.csv_export import METADATA_PREFIX
from src.utils.errors import InputError, StorageError
from src.utils.logger import setup_logger
from src.utils.time_utils import get_timestamp_string

logger = setup_logger()

PathLike = Union[str, Path]


class ArtifactStore:
    """Reads and writes pipeline artifacts as FQM1 containers or CSV matrices"""

    def __init__(self, csv_max_entries: Optional[int] = None):
        """
        Args:
            csv_max_entries: Largest matrix accepted as CSV (default from Config)
        """
        self.csv_max_entries = csv_max_entries or Config.CSV_MAX_ENTRIES
        self.schema = ContainerSchema()

    def _header(self, kind: str, metadata: Optional[Dict[str, str]]) -> Dict[str, str]:
        header = {
            'kind': kind,
            'format_version': str(self.schema.FORMAT_VERSION),
            'created_utc': get_timestamp_string(),
        }
        header.update({k: str(v) for k, v in (metadata or {}).items()})
        return header

    def _read(self, path: PathLike, kind: str) -> Tuple[Dict[str, str], Dict[str, np.ndarray]]:
        if not Path(path).exists():
            raise StorageError(f"File not found: {path}")
        metadata, blocks = read_container(path)
        self.schema.verify(kind, metadata, blocks)
        return metadata, blocks

    # Snapshot matrices

    @staticmethod
    def _is_csv(path: PathLike) -> bool:
        return Path(path).suffix.lower() == '.csv'

    def read_matrix(self, path: PathLike) -> np.ndarray:
        """
        Read an N×K snapshot matrix from CSV (no header row) or FQM1

        Raises:
            StorageError: Missing or unparsable file
            InputError: CSV larger than the CSV limit or with non-numeric entries
        """
        path = Path(path)
        if not path.exists():
            raise StorageError(f"File not found: {path}")

        if is_container(path):
            metadata, blocks = read_container(path)
            if 'snapshots' in blocks:
                return blocks['snapshots']
            if len(blocks) == 1:
                return next(iter(blocks.values()))
            raise StorageError(f"{path} holds no 'snapshots' block")

        try:
            frame = pd.read_csv(path, header=None, comment='#', float_precision='round_trip')
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise StorageError(f"Cannot read {path}: {e}")
        if frame.size > self.csv_max_entries:
            raise InputError(
                f"{path} has {frame.size} entries; CSV input is limited to "
                f"{self.csv_max_entries}, convert it to FQM1"
            )
        try:
            matrix = frame.to_numpy(dtype=float)
        except ValueError as e:
            raise InputError(f"{path} contains non-numeric entries: {e}")
        if not np.all(np.isfinite(matrix)):
            raise InputError(f"{path} contains missing or non-finite entries")
        logger.info(f"Read {matrix.shape[0]}×{matrix.shape[1]} matrix from {path}")
        return matrix

    def write_matrix(
        self,
        matrix: np.ndarray,
        path: PathLike,
        metadata: Optional[Dict[str, str]] = None,
        reference: Optional[np.ndarray] = None
    ) -> Path:
        """Write a snapshot matrix as CSV (by extension) or as an FQM1 snapshots container"""
        path = Path(path)
        header = self._header('snapshots', metadata)
        matrix = np.asarray(matrix, dtype=float)

        if not self._is_csv(path):
            blocks = {'snapshots': matrix}
            if reference is not None:
                blocks['reference'] = reference
            return write_container(path, header, blocks)

        if matrix.size > self.csv_max_entries:
            raise InputError(f"matrix has {matrix.size} entries; write it as FQM1 instead of CSV")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', newline='', encoding='utf-8') as f:
                for key, value in header.items():
                    f.write(f"{METADATA_PREFIX}{key}={value}\n")
                pd.DataFrame(matrix).to_csv(f, header=False, index=False, float_format='%.17g')
        except OSError as e:
            raise StorageError(f"Cannot write {path}: {e}")
        return path

    # Candidate bases

    def save_basis(
        self,
        basis: CandidateBasis,
        path: PathLike,
        metadata: Optional[Dict[str, str]] = None
    ) -> Path:
        header = self._header('basis', metadata)
        header.update({
            'n_dofs': basis.n_dofs,
            'm': basis.m,
            'n_snapshots': basis.n_snapshots,
            'centering_mode': basis.centering_mode.value,
        })
        path = write_container(path, header, {
            'V_tilde': basis.V_tilde,
            'sigma': basis.sigma,
            'S_tilde': basis.S_tilde,
            'total_energy': np.array(basis.total_energy),
            'reference': basis.reference,
        })
        logger.info(f"Saved candidate basis (N={basis.n_dofs}, m={basis.m}) to {path}")
        return path

    def load_basis(self, path: PathLike) -> CandidateBasis:
        metadata, blocks = self._read(path, 'basis')
        try:
            return CandidateBasis(
                V_tilde=blocks['V_tilde'],
                sigma=blocks['sigma'].ravel(),
                S_tilde=blocks['S_tilde'],
                total_energy=float(blocks['total_energy'][0, 0]),
                reference=blocks['reference'].ravel(),
                centering_mode=CenteringMode(metadata.get('centering_mode', 'zero')),
            )
        except (InputError, ValueError, IndexError) as e:
            raise StorageError(f"{path} holds an inconsistent basis: {e}")

    # Models

    def save_model(
        self,
        model: QuadraticManifoldModel,
        path: PathLike,
        metadata: Optional[Dict[str, str]] = None
    ) -> Path:
        header = self._header('model', metadata)
        header.update({
            'method': model.method.value,
            'r': model.r,
            'q': model.q,
            'n_dofs': model.n_dofs,
        })
        blocks = {
            'reference': model.reference,
            'V_r': model.V_r,
            'V_q': model.V_q,
            'Xi': model.Xi,
            'gamma': np.array(model.gamma),
        }
        if model.factor is not None:
            header['m'] = model.factor.m
            blocks['Q_r'] = model.factor.Q_r
            blocks['Q_q'] = model.factor.Q_q
        path = write_container(path, header, blocks)
        logger.info(f"Saved {model.method.value} model (r={model.r}, q={model.q}) to {path}")
        return path

    def load_model(self, path: PathLike) -> QuadraticManifoldModel:
        metadata, blocks = self._read(path, 'model')
        factor = None
        if 'Q_r' in blocks and 'Q_q' in blocks:
            factor = ModelFactor(Q_r=blocks['Q_r'], Q_q=blocks['Q_q'])
        try:
            return QuadraticManifoldModel(
                reference=blocks['reference'].ravel(),
                V_r=blocks['V_r'],
                V_q=blocks['V_q'],
                Xi=blocks['Xi'],
                gamma=float(blocks['gamma'][0, 0]),
                method=resolve_method(metadata.get('method', '')),
                factor=factor,
            )
        except (InputError, ValueError, IndexError) as e:
            raise StorageError(f"{path} holds an inconsistent model: {e}")
