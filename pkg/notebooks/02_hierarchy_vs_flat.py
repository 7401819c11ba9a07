"""
Hierarchical vs flat classification
===================================

Build a small synthetic corpus, extract features and compare the
local-classifier-per-parent-node model with a single flat classifier under
speaker-independent cross-validation. A few minutes on one core.
"""

import tempfile

from hadid.config import PipelineConfig
from hadid.corpus import load_profiles, synth_corpus
from hadid.evaluation import format_report, run_experiment
from hadid.hierarchy import default_hierarchy, train_lcpn
from hadid.prosody import extract_manifest

out = tempfile.mkdtemp(prefix="hadid_")
manifest = synth_corpus(load_profiles(), 6, 6, seed=3, out_dir=out)
table, skipped, _ = extract_manifest(manifest)
print(f"{len(table)} utterances, {len(skipped)} skipped")

# the default tree: Pre-Hilali vs Bedouin at the root, four Bedouin groups below
tree = default_hierarchy()
print(tree.children)

cfg = PipelineConfig(seed=3, kfold=3)
for mode in ("hierarchical", "flat"):
    report = run_experiment(table, tree, mode, cfg)
    print(format_report(report))

# each parent node picks its own features. The root ranks Pre-Hilali against
# the pooled Bedouin groups, so pitch_range (high for Ma'qilian, low for
# Hilali and Sulaymite) averages out there and is left to the Bedouin node
model = train_lcpn(tree, table.X, table.dialects, cfg)
for node, nm in model.nodes.items():
    print(node, "->", nm.features if nm.trained else f"pass-through {nm.passthrough}")
