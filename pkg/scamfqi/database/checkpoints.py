# checkpoints.py - per-iteration model dumps and the training log
import json
import logging
import os
from typing import Sequence

import pandas as pd

from scamfqi.core.errors import ArgumentError
from scamfqi.learning.features import FeatureSchema
from scamfqi.learning.policies import QApprox
from scamfqi.learning.regression import load_model
from scamfqi.models.game import MarkovGame
from scamfqi.schemas.graph import ObservationMode
from scamfqi.schemas.training import IterationLog

logger = logging.getLogger(__name__)

TRAINING_LOG = "training_log.csv"


def iteration_dir(run_dir: str, k: int) -> str:
    return os.path.join(run_dir, f"iter_{k}")


def save_checkpoint(run_dir: str, k: int, qs: Sequence[QApprox]) -> str:
    path = iteration_dir(run_dir, k)
    os.makedirs(path, exist_ok=True)
    for q in qs:
        s = q.schema
        payload = {
            "owner": s.owner,
            "members": list(s.members),
            "mode": s.mode.value,
            "member_widths": list(s.member_widths),
            "action_count": s.action_count,
            "v_max": q.v_max,
            "clip": q.clip,
            "train_mse": q.train_mse,
            "model": q.regressor.to_dump() if q.regressor is not None else None,
        }
        with open(os.path.join(path, f"agent_{s.owner}.json"), "w") as f:
            json.dump(payload, f)
    return path


def load_checkpoint(run_dir: str, k: int, env: MarkovGame) -> list[QApprox]:
    path = iteration_dir(run_dir, k)
    if not os.path.isdir(path):
        raise ArgumentError(f"no checkpoint for iteration {k} under {run_dir}")
    qs = []
    for i in range(env.agent_count):
        with open(os.path.join(path, f"agent_{i}.json")) as f:
            payload = json.load(f)
        schema = FeatureSchema(
            owner=payload["owner"],
            members=tuple(payload["members"]),
            mode=ObservationMode(payload["mode"]),
            member_widths=tuple(payload["member_widths"]),
            action_count=payload["action_count"],
        )
        model = load_model(payload["model"]) if payload["model"] is not None else None
        q = QApprox(schema.owner, schema, env, payload["v_max"], model, clip=payload["clip"])
        q.train_mse = payload.get("train_mse")
        qs.append(q)
    return qs


def write_training_log(path: str, log: Sequence[IterationLog]) -> None:
    columns = list(IterationLog.model_fields)
    frame = pd.DataFrame([entry.model_dump() for entry in log], columns=columns)
    frame.to_csv(path, index=False)
