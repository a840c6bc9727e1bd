# datasets.py - JSON-lines dataset store with a digest manifest
import hashlib
import json
import logging
import os
from typing import Sequence

from pydantic import ValidationError

from scamfqi.core.errors import DatasetParseError
from scamfqi.schemas.dataset import AgentDataset, DatasetHeader, Manifest, TransitionRecord
from scamfqi.schemas.graph import SharingGraph

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def agent_file(owner: int) -> str:
    return f"agent_{owner}.jsonl"


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_datasets(datasets: Sequence[AgentDataset], path: str, graph: SharingGraph | None = None) -> Manifest:
    """agent_<i>.jsonl (header line, then one record per line) plus manifest.json."""
    os.makedirs(path, exist_ok=True)
    digests, counts = {}, {}
    for ds in datasets:
        name = agent_file(ds.owner)
        file_path = os.path.join(path, name)
        with open(file_path, "w", newline="\n") as f:
            f.write(ds.header.model_dump_json() + "\n")
            for record in ds.records:
                f.write(record.model_dump_json() + "\n")
        digests[name] = _sha256(file_path)
        counts[name] = len(ds.records)

    first = datasets[0] if datasets else None
    manifest = Manifest(
        env_id=first.meta.env_id if first else "none",
        graph=graph,
        mode=first.mode if first else None,
        seed=first.meta.seed if first else None,
        episodes=first.meta.episode_count if first else 0,
        horizon=first.meta.horizon if first else 0,
        reward_shift=first.meta.reward_shift if first else 0.0,
        behavior_policy_id=first.meta.behavior_policy_id if first else "uniform",
        digests=digests,
        record_counts=counts,
    )
    with open(os.path.join(path, MANIFEST_NAME), "w") as f:
        f.write(manifest.model_dump_json(indent=2) + "\n")
    logger.info("saved %d agent datasets to %s", len(datasets), path)
    return manifest


def load_manifest(path: str) -> Manifest:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_path) as f:
            return Manifest.model_validate_json(f.read())
    except ValidationError as e:
        raise DatasetParseError(manifest_path, 1, str(e)) from e


def load_agent_file(file_path: str) -> AgentDataset:
    header, records = None, []
    with open(file_path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                if header is None:
                    header = DatasetHeader.model_validate_json(line)
                else:
                    records.append(TransitionRecord.model_validate_json(line))
            except ValidationError as e:
                raise DatasetParseError(file_path, lineno, str(e)) from e
    if header is None:
        raise DatasetParseError(file_path, 1, "missing dataset header")
    try:
        return AgentDataset(**header.model_dump(), records=records)
    except ValidationError as e:
        raise DatasetParseError(file_path, 1, str(e)) from e


def load_datasets(path: str, verify: bool = True) -> list[AgentDataset]:
    manifest = load_manifest(path)
    datasets = []
    for name in sorted(manifest.digests, key=lambda n: int(n.split("_")[1].split(".")[0])):
        file_path = os.path.join(path, name)
        if verify and _sha256(file_path) != manifest.digests[name]:
            raise DatasetParseError(file_path, 0, "content digest does not match the manifest")
        datasets.append(load_agent_file(file_path))
    return datasets
