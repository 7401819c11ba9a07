import itertools

import numpy as np
import pytest

from conftest import DIALECTS, gaussian_features, small_config
from hadid.errors import FoldError, LengthMismatch, PathNotInTree, TooFewSpeakers
from hadid.evaluation import (hierarchical_precision, micro_precision, per_class_precision,
                              run_experiment, speaker_independent_folds, write_comparison,
                              write_report)
from hadid.hierarchy import DialectTree, default_hierarchy
from hadid.prosody import FeatureTable

TREE = DialectTree("root", {"root": ["A", "B"], "A": ["A1", "A2"]})


def test_hp_hand_cases():
    p = TREE.path
    assert hierarchical_precision([p("A1"), p("B")], [p("A1"), p("B")], TREE) == 1.0
    assert hierarchical_precision([p("A2")], [p("A1")], TREE) == 0.5
    assert hierarchical_precision([p("B")], [p("A1")], TREE) == 0.0


def test_hp_errors():
    with pytest.raises(LengthMismatch):
        hierarchical_precision([TREE.path("B")], [], TREE)
    with pytest.raises(PathNotInTree):
        hierarchical_precision([["root", "B", "A1"]], [TREE.path("A1")], TREE)


def _random_tree(rng):
    labels = iter(f"n{i}" for i in range(1000))
    root = next(labels)
    children, frontier = {}, [(root, 0)]
    while frontier:
        node, depth = frontier.pop()
        if depth >= 3 or (depth > 0 and rng.random() < 0.4):
            continue
        kids = [next(labels) for _ in range(int(rng.integers(2, 4)))]
        children[node] = kids
        frontier += [(k, depth + 1) for k in kids]
    return DialectTree(root, children)


def _brute_hp(pred_leaves, true_leaves, tree):
    # ancestor sets by walking parent links, excluding the root
    parent = {c: n for n, kids in tree.children.items() for c in kids}

    def aug(leaf):
        s = set()
        while leaf != tree.root:
            s.add(leaf)
            leaf = parent[leaf]
        return s

    num = sum(len(aug(p) & aug(t)) for p, t in zip(pred_leaves, true_leaves))
    den = sum(len(aug(p)) for p in pred_leaves)
    return num / den


def test_hp_matches_brute_force(rng):
    for _ in range(500):
        tree = _random_tree(rng)
        leaves = tree.leaves
        n = int(rng.integers(1, 20))
        pred = [leaves[i] for i in rng.integers(0, len(leaves), n)]
        true = [leaves[i] for i in rng.integers(0, len(leaves), n)]
        got = hierarchical_precision([tree.path(l) for l in pred], [tree.path(l) for l in true], tree)
        assert got == _brute_hp(pred, true, tree)


def test_depth_one_hp_equals_micro(rng):
    flat = DialectTree.flat("root", list("abcde"))
    for _ in range(100):
        pred = list(rng.choice(list("abcde"), 30))
        true = list(rng.choice(list("abcde"), 30))
        hp = hierarchical_precision([flat.path(l) for l in pred], [flat.path(l) for l in true], flat)
        assert hp == micro_precision(pred, true)


def test_correct_leaf_gets_full_credit():
    t = default_hierarchy()
    leaf = "Sulaymite"
    assert hierarchical_precision([t.path(leaf)], [t.path(leaf)], t) == 1.0


def test_micro_and_per_class():
    assert micro_precision(list("abca"), list("abca")) == 1.0
    assert micro_precision(list("abcd"), list("abcx")) == 0.75
    pc = per_class_precision(list("aab"), list("abb"), classes=list("abc"))
    assert pc == {"a": 0.5, "b": 1.0, "c": None}
    with pytest.raises(LengthMismatch):
        micro_precision(["a"], [])


def _speakers(spec):
    spk, dia = [], []
    for d, n in spec.items():
        for s in range(n):
            spk.append(f"{d}{s}")
            dia.append(d)
    return spk, dia


def test_folds_one_speaker_per_dialect():
    spk, dia = _speakers({"X": 5, "Y": 5})
    folds, warns = speaker_independent_folds(spk, dia, 5, seed=3)
    assert not warns and len(folds) == 5
    covered = []
    for f in folds:
        assert set(f.test_speakers).isdisjoint(f.train_speakers)
        assert sorted(s[0] for s in f.test_speakers) == ["X", "Y"]
        covered += f.test_speakers
    assert sorted(covered) == sorted(spk)


def test_folds_forced_partition():
    spk, dia = _speakers({"X": 2, "Y": 2})
    folds, _ = speaker_independent_folds(spk, dia, 2, seed=0)
    for f in folds:
        assert len(f.test_speakers) == 2 and len(f.train_speakers) == 2


def test_folds_warn_for_small_dialect():
    spk, dia = _speakers({"X": 5, "P": 3})
    folds, warns = speaker_independent_folds(spk, dia, 5, seed=1)
    assert len(warns) == 1
    missing = [f.index for f in folds if not any(s.startswith("P") for s in f.test_speakers)]
    assert len(missing) == 2
    for i in missing:
        assert str(i) in warns[0]
    with pytest.raises(TooFewSpeakers):
        speaker_independent_folds(*_speakers({"X": 5, "Q": 1}), 5, seed=1)


def _table(rng, speakers=4, per_speaker=10, dialects=DIALECTS):
    X, y = gaussian_features(rng, per_class=speakers * per_speaker, dialects=dialects)
    spk = [f"{d}_{i // per_speaker}" for d in dialects for i in range(speakers * per_speaker)]
    ids = [f"u{i}" for i in range(len(y))]
    return FeatureTable(ids, spk, y, X)


def test_run_experiment_layout(rng, tmp_path):
    tab = _table(rng, speakers=5)
    cfg = small_config(max_epochs=40)
    hier = run_experiment(tab, default_hierarchy(), "hierarchical", cfg)
    flat = run_experiment(tab, default_hierarchy(), "flat", cfg)
    assert len(hier.folds) == 5
    assert hier.average_hp == pytest.approx(np.mean([f.whole_system_hp for f in hier.folds]), abs=1e-12)
    assert flat.average_hp == pytest.approx(flat.average_micro, abs=1e-12)
    assert hier.average_level1 >= 0.9
    write_report(hier, tmp_path)
    write_comparison([hier, flat], tmp_path / "comparison.csv")
    rows = (tmp_path / "hierarchical_folds.csv").read_text().splitlines()
    assert len(rows) == 1 + 5 + 1 and rows[-1].startswith("Average")
    comp = (tmp_path / "comparison.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in comp[1:]] == ["HADID", "Flat"]


def test_flat_single_dialect_fails_with_fold(rng):
    tab = _table(rng, speakers=3, per_speaker=4, dialects=DIALECTS[:1])
    with pytest.raises(FoldError) as e:
        run_experiment(tab, default_hierarchy(), "flat", small_config(kfold=3, max_epochs=5))
    assert e.value.fold >= 1
    assert type(e.value.error).__name__ == "SingleClassData"
