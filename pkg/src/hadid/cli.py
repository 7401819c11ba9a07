"""Command-line entry point: ``hadid <command> ...``.

Exit codes: 0 success, 2 usage or data error, 3 unusable single input.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import __version__
from .config import PipelineConfig, load_config
from .errors import DataError, FoldError, HadidError, UnusableUtterance
from .neuralnet import FORMAT_VERSION

log = logging.getLogger("hadid")

EXIT_OK, EXIT_DATA, EXIT_UNUSABLE = 0, 2, 3


def _jobs(value):
    return os.cpu_count() or 1 if value is None else max(1, value)


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    over = {}
    for name in ("seed", "kfold", "silence_threshold_db", "min_silence_ms", "f0_floor_hz",
                 "f0_ceil_hz", "flat_k", "default_k", "max_epochs", "learning_rate"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    return cfg.with_overrides(**over)


def _tree(args):
    from .hierarchy import default_hierarchy, load_hierarchy

    if args.hierarchy:
        return load_hierarchy(args.hierarchy, args.depth_limit)
    return default_hierarchy(2 if args.depth_limit is None else args.depth_limit)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(v):
    return "NA" if v is None else f"{v:.6f}"


# -- commands -----------------------------------------------------------------

def cmd_synth(args):
    from .corpus import load_profiles, synth_corpus

    profiles = load_profiles(args.profiles)
    m = synth_corpus(profiles, args.speakers, args.utts, args.seed, args.out,
                     jobs=_jobs(args.jobs))
    print(f"wrote {len(m)} utterances to {args.out}")
    return EXIT_OK


def cmd_extract(args):
    from .corpus import load_manifest
    from .prosody import extract_manifest

    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    dump = args.dump_segments or args.dump_pitch
    table, skipped, extras = extract_manifest(manifest, cfg, jobs=_jobs(args.jobs),
                                              keep_tracks=dump, log=log)
    table.write_csv(args.out)
    if dump:
        base = os.path.dirname(os.path.abspath(args.out))
        for uid, ex in extras.items():
            if args.dump_segments:
                d = os.path.join(base, "segments")
                os.makedirs(d, exist_ok=True)
                _write_rows(os.path.join(d, f"{uid}.csv"), ("start_s", "end_s", "kind"),
                            [(_num(s), _num(e), k) for s, e, k in ex.segments.segments])
            if args.dump_pitch:
                d = os.path.join(base, "pitch")
                os.makedirs(d, exist_ok=True)
                _write_rows(os.path.join(d, f"{uid}.csv"), ("time_s", "f0_hz"),
                            [(_num(t), _num(f)) for t, f in ex.pitch.to_rows()])
    if skipped:
        _write_rows(os.path.splitext(args.out)[0] + "_skipped.csv",
                    ("utterance_id", "reason", "message"), skipped)
    print(f"{len(table)} usable utterances, {len(skipped)} skipped")
    return EXIT_OK


def cmd_analyze(args):
    from .prosody import FEATURE_NAMES, FeatureTable
    from .stats import dialect_means, pairwise_anovas

    table = FeatureTable.read_csv(args.features)
    dialects = list(dict.fromkeys(table.dialects))
    if len(dialects) < 2:
        raise DataError("analyze needs at least two dialects")
    os.makedirs(args.out_dir, exist_ok=True)
    dialects, means = dialect_means(table.X, table.dialects, dialects)
    _write_rows(os.path.join(args.out_dir, "means.csv"), ["feature"] + dialects,
                [[f] + [f"{v:.4f}" for v in row] for f, row in zip(FEATURE_NAMES, means)])
    rows = []
    for c in pairwise_anovas(table.X, table.dialects, dialects):
        r = c.result
        rows.append([c.feature, c.comparison, f"{r.f_stat:.4f}", r.df_between, r.df_within,
                     f"{r.p_value:.6g}", int(c.extreme)])
    _write_rows(os.path.join(args.out_dir, "anova.csv"),
                ["feature", "comparison", "F", "df_b", "df_w", "p", "extreme_pair"], rows)
    i_v, i_c = FEATURE_NAMES.index("pct_v"), FEATURE_NAMES.index("delta_c")
    _write_rows(os.path.join(args.out_dir, "scatter_pctv_deltac.csv"),
                ["dialect", "pct_v", "delta_c"],
                [[d, f"{means[i_v, j]:.4f}", f"{means[i_c, j]:.4f}"] for j, d in enumerate(dialects)])
    print(f"analyzed {len(table)} utterances across {len(dialects)} dialects")
    return EXIT_OK


def _load_table(args, cfg):
    from .corpus import load_manifest
    from .prosody import FeatureTable, extract_manifest

    if getattr(args, "features", None):
        return FeatureTable.read_csv(args.features)
    table, skipped, _ = extract_manifest(load_manifest(args.manifest), cfg,
                                         jobs=_jobs(args.jobs), log=log)
    return table


def cmd_train(args):
    from .corpus import load_manifest
    from .hierarchy import DialectTree, save_model, train_lcpn

    cfg = _config(args)
    table = _load_table(args, cfg)
    if args.manifest and args.features:
        # restrict to utterances listed in the manifest
        ids = {r.utterance_id for r in load_manifest(args.manifest)}
        table = table.subset([i for i, u in enumerate(table.utterance_ids) if u in ids])
    tree = _tree(args)
    if args.mode == "flat":
        tree = DialectTree.flat(tree.root, tree.leaves)
        cfg = cfg.with_overrides(node_k={tree.root: cfg.flat_k})
    model = train_lcpn(tree, table.X, table.dialects, cfg)
    model.metadata["mode"] = args.mode
    save_model(model, args.out)
    for node, nm in model.nodes.items():
        if nm.trained:
            print(f"{node}: {', '.join(nm.features)}")
        else:
            print(f"{node}: pass-through -> {nm.passthrough}")
    return EXIT_OK


def cmd_evaluate(args):
    from .evaluation import run_experiment, write_comparison, write_report, format_report

    cfg = _config(args)
    table = _load_table(args, cfg)
    tree = _tree(args)
    modes = ["hierarchical", "flat"] if args.mode == "both" else [args.mode]
    reports = []
    for mode in modes:
        report = run_experiment(table, tree, mode, cfg, jobs=_jobs(args.jobs))
        write_report(report, args.out_dir)
        sys.stdout.write(format_report(report))
        for f in report.folds:
            # run_fold refuses overlapping folds, so reaching here means disjoint
            print(f"fold {f.fold}: {len(f.test_speakers)} test speakers, "
                  "disjoint from training speakers")
        reports.append(report)
    if len(reports) == 2:
        write_comparison(reports, os.path.join(args.out_dir, "comparison.csv"))
    return EXIT_OK


def cmd_classify(args):
    from .audio_io import load_wav
    from .hierarchy import classify, load_model
    from .prosody import extract_features

    cfg = _config(args)
    try:
        model = load_model(args.model)
    except HadidError as exc:
        print(f"error: bad model: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        x = extract_features(load_wav(args.wav), cfg)
    except UnusableUtterance as exc:
        print(f"error: UnusableUtterance({exc.reason})", file=sys.stderr)
        return EXIT_UNUSABLE
    result = classify(model, x)
    print(" -> ".join(result.path))
    for d in result.decisions:
        if d.probabilities is None:
            print(f"{d.node}: pass-through -> {d.chosen}")
        else:
            probs = ", ".join(f"{c}={p:.4f}" for c, p in zip(d.children, d.probabilities))
            print(f"{d.node}: {probs}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hadid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"hadid {__version__} (model format {FORMAT_VERSION})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--config", help="JSON pipeline config; flags override it")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: all cores)")
        sp.add_argument("--seed", type=int, required=seed_required)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--profiles", help="profile file (default: bundled profiles)")
    s.add_argument("--out", required=True)
    s.add_argument("--speakers", type=int, default=8)
    s.add_argument("--utts", type=int, default=10)
    common(s, seed_required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="extract prosodic features for a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dump-segments", action="store_true")
    s.add_argument("--dump-pitch", action="store_true")
    s.add_argument("--silence-threshold-db", dest="silence_threshold_db", type=float)
    s.add_argument("--min-silence-ms", dest="min_silence_ms", type=float)
    s.add_argument("--f0-floor", dest="f0_floor_hz", type=float)
    s.add_argument("--f0-ceil", dest="f0_ceil_hz", type=float)
    common(s)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("analyze", help="means, ANOVA and %%V/deltaC scatter tables")
    s.add_argument("--features", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_analyze)

    def model_opts(sp):
        sp.add_argument("--hierarchy", help="hierarchy file (default: bundled tree)")
        sp.add_argument("--depth-limit", type=int, default=None,
                        help="cut the tree at this rank (bundled tree default: 2)")
        sp.add_argument("--kfold", type=int)
        sp.add_argument("--flat-k", dest="flat_k", type=int)
        sp.add_argument("--max-epochs", dest="max_epochs", type=int)
        sp.add_argument("--learning-rate", dest="learning_rate", type=float)

    s = sub.add_parser("train", help="train a hierarchical or flat model")
    s.add_argument("--features")
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=["hierarchical", "flat"], default="hierarchical")
    model_opts(s)
    common(s, seed_required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="speaker-independent k-fold evaluation")
    s.add_argument("--features")
    s.add_argument("--manifest")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--mode", choices=["hierarchical", "flat", "both"], default="both")
    model_opts(s)
    common(s, seed_required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("classify", help="identify the dialect of one WAV file")
    s.add_argument("--model", required=True)
    s.add_argument("--wav", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_classify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("train", "evaluate") and not (args.features or args.manifest):
        parser.error(f"{args.command} needs --features or --manifest")
    try:
        return args.func(args)
    except FoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HadidError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
