"""Dialect taxonomy and Local Classifier per Parent Node (LCPN) models.

Every internal node of the tree owns a small network that picks one of its
children from an ANOVA-selected subset of the prosodic features.
Classification descends greedily from the root until it reaches a leaf.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import neuralnet
from .errors import (CycleDetected, DataError, DuplicateLabel, EmptyDataset,
                     MissingFile, ModelFormatError, UnaryNode, UnknownLabel,
                     UntrainedModel)
from .prosody import FEATURE_NAMES, FeatureVector
from .stats import rank_features

log = logging.getLogger(__name__)

HIERARCHY_FORMAT = "hadid-hierarchy"
MODEL_FORMAT = "hadid-model"
MODEL_VERSION = 1


class DialectTree:
    """Rooted tree of unique labels.

    ``children`` maps each internal label to its ordered children; leaves
    do not appear as keys. ``node_k`` holds optional per-node feature counts.

    ``rank`` optionally pins the taxonomic rank of a node (root = 0). A node
    without a pinned rank sits one rank below its parent. Ranks let a
    shallow branch stand at the same level as deeper ones: a dialect hanging
    directly off the root can be declared rank 2 so it lines up with the
    dialects of a deeper group. :meth:`truncated` cuts by rank.
    """

    def __init__(self, root, children, node_k=None, rank=None):
        self.root = root
        self.children = {p: list(c) for p, c in children.items() if c}
        self.node_k = dict(node_k or {})
        self._validate()
        self.parent = {c: p for p, cs in self.children.items() for c in cs}
        declared = dict(rank or {})
        unknown = [n for n in declared if n not in self]
        if unknown:
            raise UnknownLabel(f"rank given for unknown node(s) {unknown}")
        self.declared_rank = declared
        self.rank = {}
        for n in self.iter_nodes():
            implied = 0 if n == root else self.rank[self.parent[n]] + 1
            r = int(declared.get(n, implied))
            if n != root and r <= self.rank[self.parent[n]]:
                raise DataError(f"rank of {n!r} must exceed its parent's")
            self.rank[n] = r

    def _validate(self):
        seen = {self.root}
        stack = [self.root]
        while stack:
            node = stack.pop()
            kids = self.children.get(node, [])
            if len(kids) == 1:
                raise UnaryNode(f"{node!r} has a single child")
            if len(set(kids)) != len(kids):
                raise DuplicateLabel(f"{node!r} lists a child twice")
            for c in kids:
                if c in seen:
                    if self._reaches(c, node):
                        raise CycleDetected(f"{node!r} -> {c!r}")
                    raise DuplicateLabel(f"{c!r} appears more than once in the tree")
                seen.add(c)
                stack.append(c)
        unreachable = set(self.children) - seen
        if unreachable:
            raise DataError(f"nodes not reachable from the root: {sorted(unreachable)}")

    def _reaches(self, start, target):
        stack, visited = [start], set()
        while stack:
            n = stack.pop()
            if n == target:
                return True
            if n in visited:
                continue
            visited.add(n)
            stack.extend(self.children.get(n, []))
        return False

    # -- queries ------------------------------------------------------------
    def __contains__(self, label):
        return label == self.root or label in self.parent

    def is_leaf(self, label):
        return label not in self.children

    def iter_nodes(self):
        """All labels, breadth-first in declaration order."""
        out, queue = [], [self.root]
        while queue:
            n = queue.pop(0)
            out.append(n)
            queue.extend(self.children.get(n, []))
        return out

    @property
    def internal_nodes(self):
        return [n for n in self.iter_nodes() if n in self.children]

    @property
    def leaves(self):
        return [n for n in self.iter_nodes() if n not in self.children]

    def path(self, label):
        """Root-to-``label`` list of labels."""
        if label not in self:
            raise UnknownLabel(label)
        out = [label]
        while out[-1] != self.root:
            out.append(self.parent[out[-1]])
        return out[::-1]

    def ancestors(self, label):
        """``label`` and its ancestors, root excluded."""
        return set(self.path(label)[1:])

    def depth(self, label):
        return len(self.path(label)) - 1

    def top_branch(self, label):
        """The child of the root that ``label`` descends from."""
        p = self.path(label)
        return p[1] if len(p) > 1 else p[0]

    def leaves_under(self, label):
        if self.is_leaf(label):
            return [label]
        out = []
        for c in self.children[label]:
            out += self.leaves_under(c)
        return out

    def descends_from(self, label, node):
        return node in self.path(label)

    def k_for(self, label, default=7):
        return int(self.node_k.get(label, default))

    # -- transforms ---------------------------------------------------------
    def truncated(self, depth_limit):
        """Copy in which every node of rank >= ``depth_limit`` becomes a leaf.

        Without declared ranks the rank equals the depth, so this is a plain
        depth cut.
        """
        if depth_limit is None:
            return self
        if depth_limit < 1:
            raise DataError("depth limit must be >= 1")
        keep = set()
        stack = [self.root]
        while stack:
            n = stack.pop()
            keep.add(n)
            if self.rank[n] < depth_limit:
                stack.extend(self.children.get(n, []))
        children = {p: c for p, c in self.children.items()
                    if p in keep and self.rank[p] < depth_limit}
        return DialectTree(self.root, children,
                           {n: k for n, k in self.node_k.items() if n in children},
                           {n: r for n, r in self.declared_rank.items() if n in keep})

    def subtree(self, label):
        if label not in self:
            raise UnknownLabel(label)
        keep = set(self._collect(label))
        return DialectTree(label, {p: c for p, c in self.children.items() if p in keep},
                           {n: k for n, k in self.node_k.items() if n in keep})

    def _collect(self, label):
        out = [label]
        for c in self.children.get(label, []):
            out += self._collect(c)
        return out

    @classmethod
    def flat(cls, root, leaves):
        """Depth-1 tree with every leaf directly under ``root``."""
        return cls(root, {root: list(leaves)})

    # -- I/O ------------------------------------------------------------------
    def to_dict(self):
        nodes = []
        for n in self.iter_nodes():
            if self.is_leaf(n) and n not in self.declared_rank:
                continue
            rec = {"label": n, "children": list(self.children.get(n, []))}
            if n in self.node_k:
                rec["k"] = int(self.node_k[n])
            if n in self.declared_rank:
                rec["rank"] = int(self.declared_rank[n])
            nodes.append(rec)
        return {"format": HIERARCHY_FORMAT, "version": 1, "root": self.root, "nodes": nodes}

    @classmethod
    def from_dict(cls, d):
        if d.get("format", HIERARCHY_FORMAT) != HIERARCHY_FORMAT:
            raise DataError("not a hierarchy document")
        try:
            root = d["root"]
            children, node_k, rank = {}, {}, {}
            for rec in d["nodes"]:
                label = rec["label"]
                if label in children:
                    raise DuplicateLabel(f"{label!r} defined twice")
                children[label] = list(rec.get("children", []))
                if "k" in rec:
                    node_k[label] = int(rec["k"])
                if "rank" in rec:
                    rank[label] = int(rec["rank"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed hierarchy document: {exc}") from exc
        return cls(root, children, node_k, rank)


def load_hierarchy(path=None, depth_limit=None) -> DialectTree:
    """Read a hierarchy file (the bundled Algerian tree when ``path`` is None)."""
    if path is None:
        text = resources.files("hadid").joinpath("data/default_hierarchy.json").read_text("utf-8")
    else:
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise MissingFile(path)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"hierarchy file is not valid JSON: {exc}") from exc
    return DialectTree.from_dict(raw).truncated(depth_limit)


def default_hierarchy(depth_limit=2):
    """The bundled tree cut at the depth used in the experiments."""
    return load_hierarchy(None, depth_limit)


@dataclass
class NodeModel:
    node: str
    children: list
    features: list = field(default_factory=list)
    mlp: neuralnet.Mlp | None = None
    passthrough: str | None = None
    f_values: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def trained(self):
        return self.mlp is not None

    def probabilities(self, X):
        idx = [FEATURE_NAMES.index(f) for f in self.features]
        return self.mlp.predict_proba(np.atleast_2d(X)[:, idx])


@dataclass
class NodeDecision:
    node: str
    children: list
    probabilities: list | None
    chosen: str


@dataclass
class Classification:
    leaf: str
    path: list
    decisions: list


@dataclass
class HadidModel:
    tree: DialectTree
    nodes: dict
    metadata: dict = field(default_factory=dict)

    def classify(self, x):
        return classify(self, x)

    def restrict(self, label):
        """The part of the model rooted at ``label``."""
        sub = self.tree.subtree(label)
        return HadidModel(sub, {n: m for n, m in self.nodes.items() if n in sub.children},
                          dict(self.metadata))


def _node_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), 11, index]).generate_state(1)[0])


def train_lcpn(tree: DialectTree, X, labels, cfg=None, *, seed=None) -> HadidModel:
    """Fit one network per internal node of ``tree``.

    ``X`` holds the 14 features per row in canonical order and ``labels``
    the leaf label of each row. A node sees every row whose leaf descends
    from it, labelled by the child branch it falls under. Nodes whose rows
    cover fewer than two branches get no network and always forward to the
    branch that has data.
    """
    from .config import PipelineConfig

    cfg = cfg or PipelineConfig()
    seed = cfg.seed if seed is None else seed
    X = np.asarray(X, dtype=np.float64)
    labels = list(labels)
    if X.shape[0] == 0 or not labels:
        raise EmptyDataset("no training rows")
    leaves = set(tree.leaves)
    unknown = sorted({l for l in labels if l not in leaves})
    if unknown:
        raise UnknownLabel(f"labels not among the tree leaves: {unknown}")
    branch_of = {l: tree.path(l) for l in set(labels)}

    nodes = {}
    for index, node in enumerate(tree.internal_nodes):
        kids = tree.children[node]
        rows, y = [], []
        for i, l in enumerate(labels):
            p = branch_of[l]
            if node in p[:-1]:
                rows.append(i)
                y.append(kids.index(p[p.index(node) + 1]))
        present = sorted(set(y))
        if len(present) < 2:
            forward_to = kids[present[0]] if present else kids[0]
            log.warning("node %r: training data covers %d branch(es); forwarding to %r",
                        node, len(present), forward_to)
            nodes[node] = NodeModel(node, list(kids), passthrough=forward_to)
            continue
        rows = np.array(rows)
        y = np.array(y)
        k = int(cfg.node_k.get(node, tree.node_k.get(node, cfg.default_k)))
        names, fvals = rank_features(X[rows], [kids[c] for c in y], k)
        log.info("node %r: %d rows, features by ANOVA rank: %s", node, len(rows), ", ".join(names))
        idx = [FEATURE_NAMES.index(f) for f in names]
        mlp = neuralnet.init_mlp([len(idx), *cfg.hidden_layers, len(kids)], cfg.dropout,
                                 _node_seed(seed, index))
        mlp, history = neuralnet.train(mlp, X[rows][:, idx], y, cfg.train)
        nodes[node] = NodeModel(node, list(kids), names, mlp, None, fvals, history)
    return HadidModel(tree, nodes, {"seed": int(seed), "mode": "hierarchical"})


def _as_matrix(x):
    if isinstance(x, FeatureVector):
        return x.as_array()[None, :]
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != len(FEATURE_NAMES):
        raise DataError(f"expected {len(FEATURE_NAMES)} features per row")
    if not np.all(np.isfinite(X)):
        raise DataError("feature values must be finite")
    return X


def classify_many(model: HadidModel, X):
    """Classify each row of ``X``; see :func:`classify`."""
    X = _as_matrix(X)
    tree = model.tree
    if not model.nodes:
        raise UntrainedModel("model has no node classifiers")
    probs = {}
    for node, nm in model.nodes.items():
        if nm.trained:
            probs[node] = nm.probabilities(X)
    out = []
    for i in range(X.shape[0]):
        node = tree.root
        path = [node]
        decisions = []
        while not tree.is_leaf(node):
            nm = model.nodes.get(node)
            if nm is None:
                raise UntrainedModel(f"no classifier for node {node!r}")
            if nm.trained:
                p = probs[node][i]
                chosen = nm.children[int(np.argmax(p))]
                decisions.append(NodeDecision(node, nm.children, p.tolist(), chosen))
            else:
                chosen = nm.passthrough
                decisions.append(NodeDecision(node, nm.children, None, chosen))
            node = chosen
            path.append(node)
        out.append(Classification(node, path, decisions))
    return out


def classify(model: HadidModel, x) -> Classification:
    """Greedy top-down descent; ties go to the first-declared child."""
    return classify_many(model, x)[0]


# -- model bundle -----------------------------------------------------------

def _node_file(i):
    return f"node_{i:02d}.json"


def save_model(model: HadidModel, directory):
    """Write ``hierarchy.json``, one JSON file per trained node, and ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "hierarchy.json"), "w", encoding="utf-8") as fh:
        json.dump(model.tree.to_dict(), fh, indent=2)
        fh.write("\n")
    entries = []
    for i, node in enumerate(model.tree.internal_nodes):
        nm = model.nodes.get(node)
        if nm is None:
            continue
        rec = {"node": node, "children": nm.children}
        if nm.trained:
            fname = _node_file(i)
            with open(os.path.join(directory, fname), "w", encoding="utf-8") as fh:
                fh.write(nm.mlp.dumps())
            rec.update(model_file=fname, features=nm.features,
                       f_values=[float(v) for v in nm.f_values])
        else:
            rec["passthrough"] = nm.passthrough
        entries.append(rec)
    manifest = {"format": MODEL_FORMAT, "version": MODEL_VERSION,
                "metadata": model.metadata, "nodes": entries}
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(directory) -> HadidModel:
    directory = os.fspath(directory)
    mpath = os.path.join(directory, "manifest.json")
    if not os.path.isfile(mpath):
        raise MissingFile(mpath)
    try:
        with open(mpath, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model manifest: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a model manifest")
    if manifest.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"model version {manifest.get('version')} != {MODEL_VERSION}")
    tree = load_hierarchy(os.path.join(directory, "hierarchy.json"))
    nodes = {}
    try:
        for rec in manifest["nodes"]:
            node = rec["node"]
            if node not in tree.children or list(rec["children"]) != tree.children[node]:
                raise ModelFormatError(f"manifest node {node!r} does not match the hierarchy")
            if "model_file" in rec:
                with open(os.path.join(directory, rec["model_file"]), encoding="utf-8") as fh:
                    mlp = neuralnet.Mlp.loads(fh.read())
                feats = list(rec["features"])
                if mlp.n_inputs != len(feats) or mlp.n_outputs != len(rec["children"]):
                    raise ModelFormatError(f"node {node!r}: network shape does not match manifest")
                unknown = [f for f in feats if f not in FEATURE_NAMES]
                if unknown:
                    raise ModelFormatError(f"node {node!r}: unknown features {unknown}")
                nodes[node] = NodeModel(node, list(rec["children"]), feats, mlp,
                                        f_values=rec.get("f_values", []))
            else:
                nodes[node] = NodeModel(node, list(rec["children"]), passthrough=rec["passthrough"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model manifest: {exc}") from exc
    except OSError as exc:
        raise ModelFormatError(f"cannot read node model: {exc}") from exc
    return HadidModel(tree, nodes, manifest.get("metadata", {}))
