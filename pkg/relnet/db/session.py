"""Single writer for experiment reports.

All CSV output of a run funnels through one `ReportWriter`; the manifest is
committed atomically when the run finishes without error.
"""
import csv
import io
import logging
import os
import tempfile
import threading
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np

from relnet.schemas.manifest import ArtifactRecord, RunManifest
from relnet.settings import FLOAT_FORMAT, MANIFEST_NAME

logger = logging.getLogger(__name__)


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    handle, temp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", newline="") as stream:
            stream.write(text)
        os.replace(temp, path)
    except BaseException:
        Path(temp).unlink(missing_ok=True)
        raise


class ReportWriter:
    def __init__(
        self,
        out_dir: Path,
        experiment: str,
        config_hash: str,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
        threads: Optional[int] = None,
    ):
        self.out_dir = Path(out_dir)
        self.experiment = experiment
        self.config_hash = config_hash
        self.seed = seed
        self.samples = samples
        self.threads = threads
        self.artifacts: List[ArtifactRecord] = []
        self._lock = threading.Lock()
        self._started = time.perf_counter()
        self._started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """One header line, fixed column order, floats with FLOAT_FORMAT."""
        buffer = io.StringIO()
        table = csv.writer(buffer, lineterminator="\n")
        table.writerow(header)
        count = 0
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{name}: row has {len(row)} cells, header has {len(header)}")
            table.writerow([format_cell(v) for v in row])
            count += 1
        path = self.out_dir / name
        with self._lock:
            _atomic_write(path, buffer.getvalue())
            self.artifacts.append(ArtifactRecord(path=name, rows=count))
        logger.info("wrote %s (%d rows)", path, count)
        return path

    def commit(self) -> RunManifest:
        manifest = RunManifest(
            experiment=self.experiment,
            config_hash=self.config_hash,
            seed=self.seed,
            samples=self.samples,
            threads=self.threads,
            started_at=self._started_at,
            wall_clock_seconds=round(time.perf_counter() - self._started, 3),
            artifacts=list(self.artifacts),
        )
        _atomic_write(self.out_dir / MANIFEST_NAME, manifest.model_dump_json(indent=2) + "\n")
        logger.info("manifest lists %d artifacts", len(self.artifacts))
        return manifest


@contextmanager
def get_writer(out_dir: Path, experiment: str, config_hash: str, **run_info) -> Iterator[ReportWriter]:
    writer = ReportWriter(out_dir, experiment, config_hash, **run_info)
    try:
        yield writer
    except BaseException:
        logger.error("run aborted; manifest not written (%d files already on disk)", len(writer.artifacts))
        raise
    else:
        writer.commit()
