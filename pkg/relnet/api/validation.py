"""Config loading with line-level diagnostics."""
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import yaml
from pydantic import ValidationError

from relnet.exceptions import ConfigError, Diagnostic, DomainError
from relnet.schemas.experiment import ExperimentConfig, experiment_adapter
from relnet.schemas.topology import Topology
from relnet.topology import discover_paths, resolve_topology

logger = logging.getLogger(__name__)


def _line_of(node: Optional[yaml.Node], loc: Tuple) -> Optional[int]:
    """Line of the deepest YAML node the pydantic location reaches."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            child = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            child = node.value[key]
        else:
            child = None
        # union tags and missing fields leave the node unchanged
        if child is not None:
            node = child
            line = node.start_mark.line + 1
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source} is not valid YAML", [Diagnostic(source, str(exc).splitlines()[0], line)])
    if not isinstance(data, dict):
        raise ConfigError(f"{source} must contain a mapping", [Diagnostic(source, "expected a mapping at top level", 1)])
    try:
        return experiment_adapter.validate_python(data)
    except ValidationError as exc:
        diagnostics = [
            Diagnostic(".".join(str(part) for part in error["loc"]) or "<root>", error["msg"], _line_of(root, error["loc"]))
            for error in exc.errors()
        ]
        raise ConfigError(f"{source}: {len(diagnostics)} validation error(s)", diagnostics)


def load_config(path: Path) -> Tuple[ExperimentConfig, str]:
    """Validated config and a hash of its canonical JSON form."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}", [Diagnostic(str(path), exc.strerror or str(exc))])
    config = parse_config(text, str(path))
    digest = hashlib.sha256(config.model_dump_json().encode()).hexdigest()
    logger.info("loaded %s config from %s (sha256 %s)", config.experiment, path, digest[:12])
    return config, digest


def resolve_topologies(config: ExperimentConfig) -> Dict[str, Topology]:
    return {name: resolve_topology(layout, name) for name, layout in config.topologies.items()}


def path_notes(topologies: Dict[str, Topology]) -> List[Diagnostic]:
    """Differences between declared paths and paths found from edge endpoints."""
    notes = []
    for name, topology in topologies.items():
        if topology.terminals is None:
            continue
        try:
            found = {frozenset(p) for p in discover_paths(topology)}
        except DomainError as exc:
            notes.append(Diagnostic(f"topologies.{name}", exc.detail))
            continue
        declared = {frozenset(p) for p in topology.paths}
        for path in sorted(found - declared, key=sorted):
            notes.append(Diagnostic(f"topologies.{name}.paths", f"undeclared path through {sorted(path)}"))
        for path in sorted(declared - found, key=sorted):
            notes.append(Diagnostic(f"topologies.{name}.paths", f"declared path {sorted(path)} not found from endpoints"))
    return notes


def validate_config(path: Path) -> List[Diagnostic]:
    """Raise ConfigError on schema or invariant violations; return advisory notes."""
    config, _ = load_config(path)
    notes = path_notes(resolve_topologies(config))
    for note in notes:
        logger.warning("%s", note)
    return notes
