"""Typed load/save helpers over the workspace document store, shared by the
CLI and the HTTP API, plus backend construction from config sections."""

from __future__ import annotations

from . import gateway, models, questions, shots
from .errors import ConfigurationError, NotFoundError, PreconditionError
from .workspace import (
    KIND_ASSIGNMENT,
    KIND_FEEDBACK,
    KIND_ITEMS,
    KIND_LABELS,
    KIND_RESPONSES,
    Workspace,
)


def label_set_doc(labels: models.LabelSet) -> dict:
    return {
        "grader_id": labels.grader_id,
        "role": labels.role,
        "cells": [
            {"response_id": rid, "item_id": iid, "label": value}
            for (rid, iid), value in sorted(labels.cells.items())
        ],
    }


def label_set_from_doc(doc: dict) -> models.LabelSet:
    return models.LabelSet(
        grader_id=str(doc["grader_id"]),
        role=str(doc["role"]),
        cells={
            (str(c["response_id"]), str(c["item_id"])): int(c["label"]) for c in doc["cells"]
        },
    )


def load_ws_assignment(ws: Workspace, assignment_id: str) -> models.Assignment:
    doc, _ = ws.load(KIND_ASSIGNMENT, assignment_id)
    return models.load_assignment(doc)


def load_ws_responses(ws: Workspace, assignment_id: str) -> list[models.StudentResponse]:
    doc, _ = ws.load(KIND_RESPONSES, assignment_id)
    return [models.StudentResponse(id=str(r["id"]), text=str(r["text"])) for r in doc["responses"]]


def load_ws_items(ws: Workspace, assignment_id: str) -> tuple[list[questions.EvaluationItem], int]:
    doc, version = ws.load(KIND_ITEMS, assignment_id)
    _, items = questions.items_from_document(doc)
    return items, version


def load_ws_feedback(ws: Workspace, assignment_id: str):
    try:
        doc, _ = ws.load(KIND_FEEDBACK, assignment_id)
    except NotFoundError:
        return {}
    return shots.feedback_map_from_document(doc)


def load_ground_truth(ws: Workspace, against: str) -> models.LabelSet:
    """Resolve 'ground_truth' to the single ground-truth-role label set, or
    load a grader's set by id."""
    if against != "ground_truth":
        doc, _ = ws.load(KIND_LABELS, against)
        return label_set_from_doc(doc)
    candidates = []
    for grader_id in ws.list(KIND_LABELS):
        doc, _ = ws.load(KIND_LABELS, grader_id)
        if doc.get("role") == models.ROLE_GROUND_TRUTH:
            candidates.append(label_set_from_doc(doc))
    if not candidates:
        raise NotFoundError("no ground-truth label set ingested yet")
    if len(candidates) > 1:
        names = sorted(c.grader_id for c in candidates)
        raise PreconditionError(f"multiple ground-truth label sets: {names}; pass one by id")
    return candidates[0]


def make_completion_backend(name: str, config: dict, *, replay_store: str | None = None):
    """'oracle', 'replay', or a named section under config['backends']."""
    if name == "oracle":
        return gateway.OracleBackend()
    if name == "replay":
        store = replay_store or config.get("backends", {}).get("replay", {}).get("replay_store")
        if not store:
            raise ConfigurationError("replay backend needs --replay-store or a config entry")
        return gateway.ReplayBackend(store)
    section = config.get("backends", {}).get(name)
    if section is None:
        raise ConfigurationError(f"no backend section named {name!r} in the config")
    return gateway.make_backend(gateway.BackendConfig.from_dict(section))


def make_embedding_backend(name: str, config: dict, *, dim: int = 64):
    """'test' (deterministic hash encoder) or a named config section."""
    if name == "test":
        return gateway.TestEmbeddingBackend(dim)
    section = config.get("backends", {}).get(name)
    if section is None:
        raise ConfigurationError(f"no embedding backend section named {name!r} in the config")
    return gateway.make_embedding_backend(gateway.BackendConfig.from_dict(section))
