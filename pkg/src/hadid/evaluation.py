"""Hierarchical precision, speaker-independent folds and cross-validation runs."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (FoldError, HadidError, LengthMismatch, PathNotInTree,
                     SingleClassData, TooFewSpeakers)
from .hierarchy import DialectTree, classify_many, train_lcpn

log = logging.getLogger(__name__)


def _augmented(path, tree):
    leaf = path[-1]
    if leaf not in tree or list(path) != tree.path(leaf):
        raise PathNotInTree(f"{path!r}")
    return set(path[1:])


def hierarchical_precision(predicted_paths, true_paths, tree: DialectTree):
    """Sum of |predicted ∩ true| over sum of |predicted|.

    Each set holds the most specific class plus its ancestors, without the
    root. Paths run from the root to a leaf.
    """
    if len(predicted_paths) != len(true_paths):
        raise LengthMismatch(f"{len(predicted_paths)} predictions vs {len(true_paths)} truths")
    num = den = 0
    for pred, true in zip(predicted_paths, true_paths):
        c = _augmented(pred, tree)
        t = _augmented(true, tree)
        num += len(c & t)
        den += len(c)
    return num / den if den else 0.0


def micro_precision(predicted, truth):
    """Fraction of correct single-label predictions."""
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(truth)} truths")
    if not predicted:
        return 0.0
    return sum(p == t for p, t in zip(predicted, truth)) / len(predicted)


def per_class_precision(predicted, truth, classes=None):
    """correct-as-c / predicted-as-c; ``None`` for classes never predicted."""
    if len(predicted) != len(truth):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(truth)} truths")
    classes = classes or sorted(set(predicted) | set(truth))
    out = {}
    for c in classes:
        n_pred = sum(p == c for p in predicted)
        hits = sum(p == c and t == c for p, t in zip(predicted, truth))
        out[c] = hits / n_pred if n_pred else None
    return out


@dataclass
class Fold:
    index: int
    train_speakers: list
    test_speakers: list
    missing_dialects: list = field(default_factory=list)


def speaker_independent_folds(speakers, dialects, k, seed):
    """Partition speakers into ``k`` test folds, round-robin per dialect.

    ``speakers`` and ``dialects`` are parallel per-utterance sequences (a
    manifest or feature table's columns). Speakers of each dialect are
    shuffled with a generator seeded by ``seed`` and dealt to folds in
    turn. Returns ``(folds, warnings)``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    dialect_of = {}
    for s, d in zip(speakers, dialects):
        dialect_of.setdefault(s, d)
    by_dialect = {}
    for s, d in dialect_of.items():
        by_dialect.setdefault(d, []).append(s)
    too_few = sorted(d for d, ss in by_dialect.items() if len(ss) < 2)
    if too_few:
        raise TooFewSpeakers(f"dialect(s) with fewer than 2 speakers: {too_few}")
    rng = np.random.default_rng(seed)
    test = [[] for _ in range(k)]
    for d in sorted(by_dialect):
        ss = sorted(by_dialect[d])
        order = rng.permutation(len(ss))
        for pos, i in enumerate(order):
            test[pos % k].append(ss[i])
    all_speakers = sorted(dialect_of)
    folds, warnings = [], []
    for j in range(k):
        test_set = set(test[j])
        tested = {dialect_of[s] for s in test_set}
        missing = sorted(d for d in by_dialect if d not in tested)
        folds.append(Fold(j + 1, [s for s in all_speakers if s not in test_set],
                          sorted(test_set), missing))
    for d in sorted(by_dialect):
        lacking = [f.index for f in folds if d in f.missing_dialects]
        if lacking:
            msg = f"dialect {d!r} has {len(by_dialect[d])} speakers < k={k}; folds {lacking} have no test speaker of it"
            log.warning(msg)
            warnings.append(msg)
    return folds, warnings


@dataclass
class FoldResult:
    fold: int
    n_test: int
    level1_precision: float
    whole_system_hp: float
    micro_precision: float
    test_speakers: list
    selected_features: dict


@dataclass
class EvalReport:
    mode: str
    folds: list
    average_level1: float
    average_hp: float
    average_micro: float
    per_dialect_precision: dict
    confusion: dict
    dialects: list
    config: dict
    warnings: list = field(default_factory=list)


def _flat_tree(tree):
    return DialectTree.flat(tree.root, tree.leaves)


def run_fold(table, tree, fold: Fold, mode, cfg, seed):
    """Train on the fold's training speakers and score its test speakers."""
    test_set = set(fold.test_speakers)
    overlap = test_set & set(fold.train_speakers)
    if overlap:
        raise HadidError(f"fold {fold.index}: speakers in both train and test: {sorted(overlap)}")
    is_test = np.array([s in test_set for s in table.speaker_ids])
    train_t = table.subset(~is_test)
    test_t = table.subset(is_test)
    log.info("fold %d: %d train / %d test utterances; train and test speakers disjoint",
             fold.index, len(train_t), len(test_t))
    model_tree = tree if mode == "hierarchical" else _flat_tree(tree)
    if mode == "flat":
        if len(set(train_t.dialects)) < 2:
            raise SingleClassData(f"flat training set of fold {fold.index} has a single dialect")
        cfg = cfg.with_overrides(node_k={model_tree.root: cfg.flat_k})
    model = train_lcpn(model_tree, train_t.X, train_t.dialects, cfg, seed=seed)
    results = classify_many(model, test_t.X)
    pred = [r.leaf for r in results]
    truth = list(test_t.dialects)
    # flat predictions are scored on leaf-only paths, i.e. micro-precision
    pred_paths = [model_tree.path(p) for p in pred]
    true_paths = [model_tree.path(t) for t in truth]
    hp = hierarchical_precision(pred_paths, true_paths, model_tree)
    level1 = micro_precision([tree.top_branch(p) for p in pred],
                             [tree.top_branch(t) for t in truth])
    feats = {n: list(m.features) for n, m in model.nodes.items() if m.trained}
    return FoldResult(fold.index, len(truth), level1, hp, micro_precision(pred, truth),
                      list(fold.test_speakers), feats), pred, truth


def run_experiment(table, tree: DialectTree, mode="hierarchical", cfg=None, *, seed=None,
                   jobs=1) -> EvalReport:
    """k-fold speaker-independent cross-validation of one classification mode.

    ``table`` is a :class:`~hadid.prosody.FeatureTable`. Each fold trains
    either the LCPN model on ``tree`` or, for ``mode="flat"``, one network
    over all leaves. Errors are re-raised as :class:`FoldError` carrying
    the fold number.
    """
    from .config import PipelineConfig

    if mode not in ("hierarchical", "flat"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or PipelineConfig()
    seed = cfg.seed if seed is None else seed
    folds, warnings = speaker_independent_folds(table.speaker_ids, table.dialects, cfg.kfold, seed)
    args = [(table, tree, f, mode, cfg, seed) for f in folds]
    if jobs and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_run_fold_wrapped, args))
    else:
        outs = [_run_fold_wrapped(a) for a in args]
    fold_results, preds, truths = [], [], []
    for out in outs:
        if isinstance(out, FoldError):
            raise out
        fr, p, t = out
        fold_results.append(fr)
        preds += p
        truths += t
    dialects = list(dict.fromkeys(l for l in tree.leaves if l in set(table.dialects)))
    confusion = {t: {p: 0 for p in dialects} for t in dialects}
    for p, t in zip(preds, truths):
        confusion.setdefault(t, {}).setdefault(p, 0)
        confusion[t][p] += 1
    return EvalReport(
        mode=mode,
        folds=fold_results,
        average_level1=float(np.mean([f.level1_precision for f in fold_results])),
        average_hp=float(np.mean([f.whole_system_hp for f in fold_results])),
        average_micro=float(np.mean([f.micro_precision for f in fold_results])),
        per_dialect_precision=per_class_precision(preds, truths, dialects),
        confusion=confusion,
        dialects=dialects,
        config={"seed": int(seed), "kfold": cfg.kfold, "mode": mode,
                "node_k": {n: int(cfg.node_k.get(n, tree.node_k.get(n, cfg.default_k)))
                           for n in tree.internal_nodes} if mode == "hierarchical"
                else {tree.root: int(cfg.flat_k)},
                "hidden_layers": list(cfg.hidden_layers), "dropout": cfg.dropout},
        warnings=warnings,
    )


def _run_fold_wrapped(args):
    table, tree, fold, mode, cfg, seed = args
    try:
        return run_fold(table, tree, fold, mode, cfg, seed)
    except HadidError as exc:
        return FoldError(fold.index, exc)


def _fmt(v, digits=4):
    return "NA" if v is None else f"{v:.{digits}f}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def format_report(report: EvalReport):
    """Plain-text fold table (Level-1 and whole-system precision in %)."""
    title = "HADID (hierarchical)" if report.mode == "hierarchical" else "Flat classification"
    lines = [title, f"{'':<10}{'Level-1 (%)':>14}{'Whole System (%)':>20}"]
    for f in report.folds:
        lines.append(f"{'Fold ' + str(f.fold):<10}{100 * f.level1_precision:>14.1f}"
                     f"{100 * f.whole_system_hp:>20.1f}")
    lines.append(f"{'Average':<10}{100 * report.average_level1:>14.1f}{100 * report.average_hp:>20.1f}")
    lines.append("")
    lines.append("Precision by dialect:")
    for d in report.dialects:
        v = report.per_dialect_precision.get(d)
        lines.append(f"  {d:<28}{'N/A' if v is None else f'{100 * v:.1f}'}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir, prefix=None):
    """Write report text, fold CSV, per-dialect CSV and confusion CSV."""
    os.makedirs(out_dir, exist_ok=True)
    prefix = prefix or report.mode
    with open(os.path.join(out_dir, f"{prefix}_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_report(report))
    rows = [[f"Fold {f.fold}", f.n_test, _fmt(f.level1_precision), _fmt(f.whole_system_hp),
             _fmt(f.micro_precision), " ".join(f.test_speakers)] for f in report.folds]
    rows.append(["Average", sum(f.n_test for f in report.folds), _fmt(report.average_level1),
                 _fmt(report.average_hp), _fmt(report.average_micro), ""])
    _write_csv(os.path.join(out_dir, f"{prefix}_folds.csv"),
               ["fold", "n_test", "level1_precision", "whole_system_hp", "micro_precision",
                "test_speakers"], rows)
    _write_csv(os.path.join(out_dir, f"{prefix}_per_dialect.csv"), ["dialect", "precision"],
               [[d, _fmt(report.per_dialect_precision.get(d))] for d in report.dialects])
    cols = list(report.dialects)
    _write_csv(os.path.join(out_dir, f"{prefix}_confusion.csv"), ["true \\ predicted"] + cols,
               [[t] + [report.confusion.get(t, {}).get(p, 0) for p in cols] for t in cols])


def write_comparison(reports, path):
    """Flat-vs-hierarchical table: one row per system with its average precision."""
    rows = []
    for r in reports:
        name = "HADID" if r.mode == "hierarchical" else "Flat"
        rows.append([name, _fmt(r.average_hp), _fmt(r.average_level1)])
    _write_csv(path, ["system", "precision", "level1_precision"], rows)
