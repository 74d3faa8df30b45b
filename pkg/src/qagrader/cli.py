"""Command-line surface tying the pipeline together.

Commands:
    qagrader ingest        --assignment a.json [--responses r.jsonl] [--labels l.jsonl ...] [--feedback f.json]
    qagrader gen-questions --assignment ID --backend scripted --script q.json [--candidates 3]
    qagrader review        list|approve|instruct ...
    qagrader select-shots  --assignment ID --method clustering|random --k 4 --seed 0 [--name NAME]
    qagrader grade         --assignment ID [--shot-set NAME] --backend oracle [--run-id ID] [--resume]
    qagrader score         --run ID [--jsonl out.jsonl] [--markdown DIR]
    qagrader agree         (--run ID | --grader GID) --against ground_truth|GRADER_ID
    qagrader ablate        --assignment ID --shots 1,2,4 --methods clustering,random --backend oracle
    qagrader annotate      --run ID --response RID --item IID --flag relevant --annotator AID
    qagrader reconcile     --a GID --b GID | --resolve RID:IID --label 0|1 --resolver NAME | --list | --export
    qagrader serve         --port 8000
    qagrader plot          --csv ablation.csv --out ablation.svg

Global flags: --workspace PATH (or QAGRADER_WORKSPACE), --config PATH,
--format text|json. Pipeline precondition failures exit 1 with an actionable
message; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import agreement as agreement_mod
from . import grading, models, questions, scoring, shots
from .errors import (
    ConfigurationError,
    NotFoundError,
    PreconditionError,
    QAGraderError,
    ValidationError,
)
from .store import (
    label_set_doc,
    label_set_from_doc,
    load_ground_truth,
    load_ws_assignment,
    load_ws_feedback,
    load_ws_items,
    load_ws_responses,
    make_completion_backend,
    make_embedding_backend,
)
from .workspace import (
    KIND_ASSIGNMENT,
    KIND_FEEDBACK,
    KIND_ITEMS,
    KIND_LABELS,
    KIND_RECONCILIATION,
    KIND_REPORTS,
    KIND_RESPONSES,
    KIND_RUN,
    KIND_SHOTSET,
    Workspace,
    new_run_id,
)


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path}: invalid JSON: {exc}") from exc


def resolve_workspace(args, config: dict) -> Workspace:
    root = args.workspace or os.environ.get("QAGRADER_WORKSPACE") or config.get("workspace")
    if not root:
        raise ConfigurationError(
            "no workspace given: pass --workspace, set QAGRADER_WORKSPACE, or add it to the config"
        )
    return Workspace(root)


def emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        print(text)


# -- subcommand handlers -------------------------------------------------------


def cmd_ingest(args, ws: Workspace, config: dict) -> None:
    summary: dict = {}
    assignment_id = args.assignment_id
    if args.assignment:
        assignment = models.load_assignment(args.assignment)
        ws.save(KIND_ASSIGNMENT, assignment.id, assignment.to_dict())
        assignment_id = assignment.id
        summary["assignment"] = assignment.id
        summary["max_score"] = models.weight_to_json(assignment.max_score)
    if not assignment_id:
        raise ValidationError("pass --assignment or --assignment-id")
    assignment = load_ws_assignment(ws, assignment_id)

    if args.responses:
        responses, dropped = models.load_responses(args.responses)
        ws.save(
            KIND_RESPONSES,
            assignment_id,
            {
                "assignment_id": assignment_id,
                "responses": [{"id": r.id, "text": r.text} for r in responses],
                "dropped": dropped,
            },
        )
        summary["responses"] = len(responses)
        summary["dropped"] = dropped

    if args.labels:
        responses = load_ws_responses(ws, assignment_id)
        item_ids = [p.id for p in assignment.rubric]
        loaded = []
        for path in args.labels:
            for label_set in models.load_label_sets(path, responses, item_ids):
                ws.save(KIND_LABELS, label_set.grader_id, label_set_doc(label_set))
                loaded.append(f"{label_set.grader_id}({len(label_set.cells)})")
        summary["labels"] = loaded

    if args.feedback:
        doc = json.loads(Path(args.feedback).read_text(encoding="utf-8"))
        shots.feedback_map_from_document(doc)  # validates the shape
        ws.save(KIND_FEEDBACK, assignment_id, doc)
        summary["feedback"] = len(doc)

    parts = [f"{key}={value}" for key, value in summary.items()]
    emit(args, summary, "ingested " + ", ".join(parts))


def cmd_gen_questions(args, ws: Workspace, config: dict) -> None:
    assignment = load_ws_assignment(ws, args.assignment)
    if args.backend == "scripted":
        if not args.script:
            raise ConfigurationError("--backend scripted requires --script")
        backend = questions.ScriptedQuestionBackend.from_file(args.script)
    else:
        completion = make_completion_backend(args.backend, config)
        backend = _LiveQuestionBackend(completion)
    items = questions.build_evaluation_items(assignment, backend, k=args.candidates)
    ws.save(KIND_ITEMS, assignment.id, questions.items_to_document(assignment.id, items))
    payload = {
        "assignment_id": assignment.id,
        "items": [
            {"item_id": i.item_id, "candidates": len(i.candidates), "status": i.status}
            for i in items
        ],
    }
    emit(
        args,
        payload,
        f"generated {sum(len(i.candidates) for i in items)} candidate question(s) "
        f"across {len(items)} item(s), all pending review",
    )


class _LiveQuestionBackend:
    """Adapter: ask a completion backend for k candidate questions."""

    def __init__(self, completion_backend):
        self.completion_backend = completion_backend

    def generate(self, reference_answer, conditioned_answer, k, *, rubric_point_id=None):
        prompt = (
            f"Write {k} distinct exam questions, one per line and nothing else, that are "
            f'answered by "{conditioned_answer}" according to this reference answer:\n'
            f"{reference_answer}"
        )
        record = self.completion_backend.complete(prompt)
        return [line.strip() for line in record.raw_text.splitlines() if line.strip()]


def cmd_review(args, ws: Workspace, config: dict) -> None:
    items, version = load_ws_items(ws, args.assignment)
    if args.action == "list":
        payload = {"assignment_id": args.assignment, "items": [i.to_dict() for i in items]}
        lines = []
        for item in items:
            lines.append(f"{item.item_id} [{item.status}] gold answer: {item.gold_answer}")
            for index, candidate in enumerate(item.candidates):
                marker = "*" if candidate == item.approved_question else " "
                lines.append(f"  {marker} [{index}] {candidate}")
        emit(args, payload, "\n".join(lines))
        return

    if not args.item:
        raise ValidationError("--item is required")
    by_id = {i.item_id: i for i in items}
    if args.item not in by_id:
        raise NotFoundError(f"no item {args.item!r}")
    item = by_id[args.item]

    if args.action == "approve":
        if args.candidate is not None:
            if not 0 <= args.candidate < len(item.candidates):
                raise ValidationError(
                    f"--candidate must be in [0, {len(item.candidates) - 1}]"
                )
            chosen = item.candidates[args.candidate]
        elif args.question:
            chosen = args.question
        else:
            raise ValidationError("pass --candidate N or --question TEXT")
        updated = questions.approve_question(
            item, chosen, args.instruction, revise=args.revise
        )
    elif args.action == "instruct":
        if not args.instruction:
            raise ValidationError("--instruction is required")
        from dataclasses import replace

        updated = replace(
            item, question_specific_instruction=args.instruction, version=item.version + 1
        )
    else:
        raise ValidationError(f"unknown review action {args.action!r}")

    by_id[args.item] = updated
    ordered = [by_id[i.item_id] for i in items]
    ws.save(
        KIND_ITEMS,
        args.assignment,
        questions.items_to_document(args.assignment, ordered),
        expected_version=version,
    )
    emit(
        args,
        updated.to_dict(),
        f"item {updated.item_id} {updated.status} (version {updated.version}): "
        f"{updated.approved_question or '-'}",
    )


def cmd_select_shots(args, ws: Workspace, config: dict) -> None:
    assignment = load_ws_assignment(ws, args.assignment)
    responses = load_ws_responses(ws, args.assignment)
    if args.method == shots.METHOD_CLUSTERING:
        cache = Path(args.embedding_cache) if args.embedding_cache else None
        if cache is not None and cache.exists():
            matrix = shots.embedding_cache_from_jsonl(cache.read_text(encoding="utf-8"))
        else:
            backend = make_embedding_backend(args.embedding_backend, config, dim=args.dim)
            matrix = shots.embed_responses(responses, backend)
            if cache is not None:
                cache.write_text(shots.embedding_cache_to_jsonl(matrix), encoding="utf-8")
        shot_set = shots.select_shots(responses, matrix, args.k, args.seed)
    else:
        shot_set = shots.random_shots(responses, args.k, args.seed)
    feedback = load_ws_feedback(ws, args.assignment)
    shot_set = shot_set.with_feedback(feedback)
    missing = [sid for sid in shot_set.shot_ids if sid not in shot_set.shot_feedback]
    name = args.name or f"{args.method}-{args.k}-s{args.seed}"
    ws.save(KIND_SHOTSET, name, {"assignment_id": assignment.id, **shot_set.to_dict()})
    payload = {
        "name": name,
        "method": shot_set.method,
        "k": shot_set.k,
        "seed": shot_set.seed,
        "shot_ids": list(shot_set.shot_ids),
        "eval_count": len(shot_set.eval_ids),
        "missing_feedback": missing,
    }
    text = (
        f"shot set {name}: shots={list(shot_set.shot_ids)} eval={len(shot_set.eval_ids)}"
    )
    if missing:
        text += f"\nwarning: no exemplar feedback for {missing}; few-shot grading will refuse"
    emit(args, payload, text)


def _zero_shot(responses) -> shots.ShotSet:
    return shots.ShotSet(
        method=shots.METHOD_RANDOM,
        k=0,
        seed=0,
        shot_ids=(),
        eval_ids=tuple(r.id for r in responses),
    )


def cmd_grade(args, ws: Workspace, config: dict) -> None:
    assignment = load_ws_assignment(ws, args.assignment)
    responses = load_ws_responses(ws, args.assignment)
    items, _ = load_ws_items(ws, args.assignment)
    backend = make_completion_backend(args.backend, config, replay_store=args.replay_store)
    template = None
    if args.template:
        template = grading.PromptTemplate.from_file(
            args.template, general_instruction=args.general_instruction
        )
    elif args.general_instruction:
        template = grading.PromptTemplate(general_instruction=args.general_instruction)

    if args.resume:
        if not args.run_id:
            raise ValidationError("--resume requires --run-id")
        doc, _ = ws.load(KIND_RUN, args.run_id)
        run = grading.GradingRun.from_dict(doc)
    else:
        run_id = args.run_id or new_run_id()
        if ws.exists(KIND_RUN, run_id):
            raise PreconditionError(f"run {run_id} already exists; use --resume to continue it")
        if args.shot_set:
            doc, _ = ws.load(KIND_SHOTSET, args.shot_set)
            shot_set = shots.ShotSet.from_dict(doc)
        else:
            shot_set = _zero_shot(responses)
        run = grading.GradingRun(
            run_id=run_id,
            assignment_id=assignment.id,
            shot_set=shot_set,
            backend_id=getattr(backend, "backend_id", args.backend),
            item_ids=tuple(i.item_id for i in items),
        )
        ws.save(KIND_RUN, run_id, run.to_dict())

    resolved_before = len(run.cells)

    def persist(current: grading.GradingRun) -> None:
        ws.save(KIND_RUN, current.run_id, current.to_dict())

    try:
        grading.grade_matrix(
            run,
            backend,
            assignment=assignment,
            items=items,
            corpus=responses,
            template=template,
            on_cell=persist,
            max_workers=args.workers,
        )
    finally:
        ws.save(KIND_RUN, run.run_id, run.to_dict())

    graded = len(run.cells) - resolved_before
    payload = {
        "run_id": run.run_id,
        "status": run.status,
        "graded": graded,
        "skipped": resolved_before,
        "failures": len(run.failures),
        **run.progress(),
    }
    emit(
        args,
        payload,
        f"run {run.run_id}: {run.status} (graded {graded}, skipped {resolved_before}, "
        f"failures {len(run.failures)})",
    )
    if run.status != grading.STATUS_COMPLETE:
        raise PreconditionError(
            f"run {run.run_id} did not complete; re-run with --resume --run-id {run.run_id}"
        )


def cmd_score(args, ws: Workspace, config: dict) -> None:
    doc, _ = ws.load(KIND_RUN, args.run)
    run = grading.GradingRun.from_dict(doc)
    assignment = load_ws_assignment(ws, run.assignment_id)
    reports, histogram = scoring.score_run(run, assignment.rubric)
    ws.save(
        KIND_REPORTS,
        run.run_id,
        {
            "run_id": run.run_id,
            "histogram": histogram,
            "reports": [r.to_dict() for r in reports],
        },
    )
    run_doc = run.to_dict()
    run_doc["histogram"] = histogram
    ws.save(KIND_RUN, run.run_id, run_doc)
    if args.jsonl:
        Path(args.jsonl).write_text(
            "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in reports),
            encoding="utf-8",
        )
    if args.markdown:
        out_dir = Path(args.markdown)
        out_dir.mkdir(parents=True, exist_ok=True)
        for report in reports:
            (out_dir / f"{report.response_id}.md").write_text(
                scoring.report_to_markdown(report), encoding="utf-8"
            )
    payload = {"run_id": run.run_id, "responses": len(reports), "histogram": histogram}
    emit(
        args,
        payload,
        f"scored {len(reports)} response(s); histogram: "
        + ", ".join(f"{score}:{count}" for score, count in histogram.items()),
    )


def cmd_agree(args, ws: Workspace, config: dict) -> None:
    truth = load_ground_truth(ws, args.against)
    if args.run:
        doc, _ = ws.load(KIND_RUN, args.run)
        candidate: grading.GradingRun | models.LabelSet = grading.GradingRun.from_dict(doc)
        assignment_id = candidate.assignment_id
    elif args.grader:
        doc, _ = ws.load(KIND_LABELS, args.grader)
        candidate = label_set_from_doc(doc)
        assignment_ids = ws.list(KIND_ASSIGNMENT)
        if len(assignment_ids) != 1:
            raise PreconditionError("pass --run, or keep a single assignment per workspace")
        assignment_id = assignment_ids[0]
    else:
        raise ValidationError("pass --run RUN_ID or --grader GRADER_ID")
    assignment = load_ws_assignment(ws, assignment_id)
    item_order = [p.id for p in assignment.rubric]
    flattened = agreement_mod.flatten_for_agreement(candidate, truth, item_order)
    result = agreement_mod.cohen_kappa(flattened.pairs)
    raw = agreement_mod.raw_agreement(flattened.pairs)
    final_view = agreement_mod.final_score_agreement(candidate, truth, assignment.rubric)
    payload = {
        "kappa": result.kappa,
        "raw": raw,
        "n_pairs": len(flattened.pairs),
        "excluded": flattened.excluded,
        "degenerate_marginals": result.degenerate_marginals,
        "final_score_view": final_view,
    }
    text = (
        f"kappa {result.kappa:.4f} raw {raw:.4f} over {len(flattened.pairs)} pairs "
        f"({flattened.excluded} excluded)"
    )
    if result.degenerate_marginals:
        text += " [degenerate marginals]"
    if final_view["n_responses"]:
        text += (
            f"\nfinal scores: exact match {final_view['exact_match']:.4f} over "
            f"{final_view['n_responses']} responses "
            f"(mean abs diff {final_view['mean_abs_diff']:.4f})"
        )
    emit(args, payload, text)


def cmd_ablate(args, ws: Workspace, config: dict) -> None:
    assignment = load_ws_assignment(ws, args.assignment)
    responses = load_ws_responses(ws, args.assignment)
    items, _ = load_ws_items(ws, args.assignment)
    truth = load_ground_truth(ws, "ground_truth")
    feedback = load_ws_feedback(ws, args.assignment)
    backend = make_completion_backend(args.backend, config, replay_store=args.replay_store)
    embedding = make_embedding_backend(args.embedding_backend, config, dim=args.dim)
    matrix = shots.embed_responses(responses, embedding)
    shot_counts = [int(s) for s in args.shots.split(",") if s.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]

    points = agreement_mod.ablation_sweep(
        assignment,
        items,
        responses,
        matrix,
        truth,
        shot_counts,
        methods,
        args.seed,
        backend,
        feedback,
        run_prefix=f"ablate-{args.seed}",
        on_run=lambda run: ws.save(KIND_RUN, run.run_id, run.to_dict()),
    )
    csv_text = agreement_mod.ablation_csv(points)
    csv_path = Path(args.out_csv) if args.out_csv else ws.root / "ablation.csv"
    csv_path.write_text(csv_text, encoding="utf-8")
    svg_path = Path(args.out_svg) if args.out_svg else ws.root / "ablation.svg"
    svg_path.write_text(agreement_mod.ablation_svg(points), encoding="utf-8")
    payload = {
        "csv": str(csv_path),
        "svg": str(svg_path),
        "points": [
            {
                "method": p.method,
                "shots": p.shots,
                "kappa": p.kappa,
                "raw": p.raw,
                "n_pairs": p.n_pairs,
                "run_id": p.run_id,
            }
            for p in points
        ],
    }
    emit(args, payload, csv_text.rstrip("\n") + f"\nwrote {csv_path} and {svg_path}")


def cmd_annotate(args, ws: Workspace, config: dict) -> None:
    doc, _ = ws.load(KIND_RUN, args.run)
    run = grading.GradingRun.from_dict(doc)
    if args.report:
        report = grading.relevance_report(run)
        emit(
            args,
            report,
            f"{report['irrelevant']}/{report['annotated']} annotated cell(s) irrelevant "
            f"({report['cells']} cells total)",
        )
        return
    if not (args.response and args.item and args.flag and args.annotator):
        raise ValidationError("pass --response, --item, --flag, and --annotator")
    cell = grading.annotate_relevance(run, args.response, args.item, args.flag, args.annotator)
    ws.save(KIND_RUN, run.run_id, run.to_dict())
    emit(
        args,
        cell.to_dict(),
        f"cell ({cell.response_id}, {cell.item_id}) flagged {cell.relevance_flag}",
    )


def _reconciliation_name(ws: Workspace, name: str | None) -> str:
    if name:
        return name
    names = ws.list(KIND_RECONCILIATION)
    if not names:
        raise NotFoundError("no reconciliation started yet; run reconcile --a A --b B")
    if len(names) > 1:
        raise PreconditionError(f"multiple reconciliations {names}; pass --name")
    return names[0]


def cmd_reconcile(args, ws: Workspace, config: dict) -> None:
    if args.a and args.b:
        doc_a, _ = ws.load(KIND_LABELS, args.a)
        doc_b, _ = ws.load(KIND_LABELS, args.b)
        rec = agreement_mod.reconcile(label_set_from_doc(doc_a), label_set_from_doc(doc_b))
        name = args.name or f"{args.a}+{args.b}"
        ws.save(KIND_RECONCILIATION, name, rec.to_dict())
        payload = {
            "name": name,
            "disagreements": len(rec.disagreements),
            "agreed": len(rec.ground_truth.cells),
            "only_in_a": len(rec.only_in_a),
            "only_in_b": len(rec.only_in_b),
        }
        emit(
            args,
            payload,
            f"reconciliation {name}: {len(rec.disagreements)} disagreement(s), "
            f"{len(rec.ground_truth.cells)} agreed cell(s), "
            f"{len(rec.only_in_a)} only in {args.a}, {len(rec.only_in_b)} only in {args.b}",
        )
        return

    name = _reconciliation_name(ws, args.name)
    doc, version = ws.load(KIND_RECONCILIATION, name)
    rec = agreement_mod.Reconciliation.from_dict(doc)

    if args.resolve:
        if ":" not in args.resolve:
            raise ValidationError("--resolve takes RESPONSE_ID:ITEM_ID")
        if args.label is None or not args.resolver:
            raise ValidationError("--resolve requires --label and --resolver")
        response_id, item_id = args.resolve.split(":", 1)
        resolved = agreement_mod.resolve_disagreement(
            rec, response_id, item_id, args.label, args.resolver
        )
        ws.save(KIND_RECONCILIATION, name, rec.to_dict(), expected_version=version)
        emit(
            args,
            resolved.to_dict(),
            f"resolved ({response_id}, {item_id}) -> {args.label}; "
            f"{'complete' if rec.complete else 'disagreements remain'}",
        )
        return

    if args.export:
        if not rec.complete:
            unresolved = [d.key for d in rec.disagreements if d.resolution is None]
            raise PreconditionError(f"unresolved disagreement(s): {unresolved}")
        ws.save(KIND_LABELS, rec.ground_truth.grader_id, label_set_doc(rec.ground_truth))
        emit(
            args,
            {"grader_id": rec.ground_truth.grader_id, "cells": len(rec.ground_truth.cells)},
            f"exported ground truth {rec.ground_truth.grader_id} "
            f"({len(rec.ground_truth.cells)} cells)",
        )
        return

    payload = rec.to_dict()
    lines = [f"reconciliation {name}: {len(rec.disagreements)} disagreement(s)"]
    for d in rec.disagreements:
        status = f"resolved -> {d.resolution}" if d.resolution is not None else "open"
        lines.append(
            f"  {d.response_id}:{d.item_id} a={d.label_a} b={d.label_b} [{status}]"
        )
    emit(args, payload, "\n".join(lines))


def cmd_serve(args, ws: Workspace, config: dict) -> None:
    import uvicorn

    from .api import create_app

    app = create_app(ws, config, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def cmd_plot(args, ws: Workspace, config: dict) -> None:
    points = agreement_mod.ablation_points_from_csv(
        Path(args.csv).read_text(encoding="utf-8")
    )
    svg = agreement_mod.ablation_svg(points)
    Path(args.out).write_text(svg, encoding="utf-8")
    emit(
        args,
        {"csv": args.csv, "out": args.out, "points": len(points)},
        f"plotted {len(points)} point(s) to {args.out}",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qagrader", description=__doc__.split("\n")[0])
    parser.add_argument("--workspace", help="workspace root directory")
    parser.add_argument("--config", help="JSON config file (workspace, backend sections)")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load assignment / responses / labels / feedback")
    p.add_argument("--assignment", help="assignment JSON document")
    p.add_argument("--assignment-id", help="existing assignment id (when not passing --assignment)")
    p.add_argument("--responses", help="response corpus (JSONL or CSV)")
    p.add_argument("--labels", action="append", default=[], help="label JSONL (repeatable)")
    p.add_argument("--feedback", help="exemplar feedback JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen-questions", help="generate candidate evaluation questions")
    p.add_argument("--assignment", required=True)
    p.add_argument("--candidates", type=int, default=3)
    p.add_argument("--backend", default="scripted", help="'scripted' or a config backend name")
    p.add_argument("--script", help="scripted question file (JSON keyed by rubric point id)")
    p.set_defaults(func=cmd_gen_questions)

    p = sub.add_parser("review", help="list / approve / instruct evaluation items")
    p.add_argument("action", choices=("list", "approve", "instruct"))
    p.add_argument("--assignment", required=True)
    p.add_argument("--item")
    p.add_argument("--candidate", type=int, help="candidate index to approve")
    p.add_argument("--question", help="instructor-edited question text to approve")
    p.add_argument("--instruction", help="question-specific instruction")
    p.add_argument("--revise", action="store_true", help="allow changing an approved item")
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("select-shots", help="build a shots/eval partition")
    p.add_argument("--assignment", required=True)
    p.add_argument("--method", choices=(shots.METHOD_CLUSTERING, shots.METHOD_RANDOM), required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", help="shot-set name (default METHOD-K-sSEED)")
    p.add_argument("--embedding-backend", default="test")
    p.add_argument("--dim", type=int, default=64, help="test embedding dimension")
    p.add_argument("--embedding-cache", help="JSONL vector cache: reused if present, else written")
    p.set_defaults(func=cmd_select_shots)

    p = sub.add_parser("grade", help="grade the evaluation grid with a backend")
    p.add_argument("--assignment", required=True)
    p.add_argument("--shot-set", help="shot-set name (omit for a zero-shot run)")
    p.add_argument("--backend", required=True, help="oracle, replay, or a config backend name")
    p.add_argument("--replay-store", help="replay recording directory")
    p.add_argument("--run-id")
    p.add_argument("--resume", action="store_true", help="continue a failed run")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--template", help="prompt template file with {{placeholders}}")
    p.add_argument("--general-instruction", help="override the general grading instruction")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("score", help="consolidate a complete run into score reports")
    p.add_argument("--run", required=True)
    p.add_argument("--jsonl", help="export reports as JSONL")
    p.add_argument("--markdown", help="export per-response Markdown into a directory")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("agree", help="agreement between a run (or grader) and labels")
    p.add_argument("--run")
    p.add_argument("--grader")
    p.add_argument("--against", required=True, help="'ground_truth' or a grader id")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("ablate", help="sweep shot counts x selection methods")
    p.add_argument("--assignment", required=True)
    p.add_argument("--shots", required=True, help="comma-separated shot counts, e.g. 1,2,4")
    p.add_argument("--methods", default="clustering,random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", required=True)
    p.add_argument("--replay-store")
    p.add_argument("--embedding-backend", default="test")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out-csv")
    p.add_argument("--out-svg")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("annotate", help="flag justification relevance on a graded cell")
    p.add_argument("--run", required=True)
    p.add_argument("--response")
    p.add_argument("--item")
    p.add_argument("--flag", choices=grading.RELEVANCE_FLAGS)
    p.add_argument("--annotator")
    p.add_argument("--report", action="store_true", help="print the irrelevant-rate report")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("reconcile", help="compare two graders and resolve disagreements")
    p.add_argument("--a", help="first grader id")
    p.add_argument("--b", help="second grader id")
    p.add_argument("--name", help="reconciliation name")
    p.add_argument("--resolve", help="RESPONSE_ID:ITEM_ID to resolve")
    p.add_argument("--label", type=int, choices=(0, 1))
    p.add_argument("--resolver", help="resolver id")
    p.add_argument("--export", action="store_true", help="export the agreed ground truth")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=cmd_reconcile)

    p = sub.add_parser("serve", help="serve the HTTP API (and the review UI, if built)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="directory of built review-UI assets, mounted at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("plot", help="render an ablation CSV as an SVG line chart")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        ws = resolve_workspace(args, config)
        args.func(args, ws, config)
    except QAGraderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
