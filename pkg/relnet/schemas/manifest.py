from typing import List, Optional

from relnet.schemas.base import BaseSchema


class ArtifactRecord(BaseSchema):
    path: str
    rows: int


class RunManifest(BaseSchema):
    experiment: str
    config_hash: str
    seed: Optional[int] = None
    samples: Optional[int] = None
    threads: Optional[int] = None
    started_at: str
    wall_clock_seconds: float
    artifacts: List[ArtifactRecord]
