"""``seqedit`` command line: curate, pretrain, train-editor, edit, evaluate, synth.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import corpus, evaluate, synthetic
from .config import ConfigError, RunConfig, derive_seed, load_config
from .corpus import Pair, RecordError
from .tokenize import IllegalResidue, residue_ids

log = logging.getLogger("seqedit")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# fixed run-directory layout
CONFIG_SNAPSHOT = "config.cfg"
LOG_DIR = "logs"
CKPT_DIR = "checkpoints"
REPORT_DIR = "reports"
ALIGN_CKPT = "align.ckpt"
EDITOR_CKPT = "editor.ckpt"


class UsageError(Exception):
    """Bad input or arguments; maps to exit code 2."""


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {raw!r}")


def _region(raw: str) -> tuple[int, int]:
    try:
        start, end = (int(v) for v in raw.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"region must be START:END, got {raw!r}") from None
    return start, end


def _need_file(path: str, what: str) -> Path:
    p = Path(path)
    if not path or not p.is_file():
        raise UsageError(f"{what} not found: {path or '(unset)'}")
    return p


def _open_run_dir(cfg: RunConfig, run_dir: str | None) -> Path:
    root = Path(run_dir or cfg.paths.run_dir)
    for sub in (LOG_DIR, CKPT_DIR, REPORT_DIR):
        (root / sub).mkdir(parents=True, exist_ok=True)
    cfg.paths.run_dir = str(root)
    cfg.write(root / CONFIG_SNAPSHOT)
    return root


def _file_logger(path: Path) -> logging.Handler:
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    logging.getLogger("seqedit").addHandler(handler)
    return handler


def _load_bundle(path: str):
    from .bundle import ModelBundle
    from .numerics.checkpoint import CheckpointError

    p = _need_file(path, "checkpoint")
    try:
        return ModelBundle.load(p)
    except CheckpointError as exc:
        raise UsageError(f"unreadable checkpoint {p}: {exc}") from None


def _read_pair_file(path: str, what: str) -> list[Pair]:
    with open(_need_file(path, what), encoding="utf-8") as fh:
        return corpus.read_pairs(fh)


def _read_sequences(arg: str) -> list[tuple[str, str]]:
    """(id, sequence) from a FASTA / one-per-line / ``id<TAB>seq`` file, or a literal."""
    p = Path(arg)
    if not p.is_file():
        return [("query", arg.strip())]
    out, name, chunks = [], None, []
    for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            if name is not None:
                out.append((name, "".join(chunks)))
            name, chunks = line[1:].split()[0] if len(line) > 1 else f"seq{n}", []
        elif name is not None:
            chunks.append(line)
        else:
            cols = line.split("\t")
            out.append((cols[0], cols[1]) if len(cols) >= 2 else (f"seq{len(out) + 1}", cols[0]))
    if name is not None:
        out.append((name, "".join(chunks)))
    return out


def _validate_residues(items) -> None:
    for name, seq in items:
        try:
            residue_ids(seq)
        except IllegalResidue as exc:
            raise UsageError(f"{name}: illegal residue {exc.char!r} at position {exc.position}") from None


def _check_lengths(items, bundle) -> None:
    limit = bundle.protein_cfg.max_len - 2
    if bundle.editor is not None:
        limit = min(limit, bundle.editor.decoder.max_len - 1)
    for name, seq in items:
        if len(seq) > limit:
            raise UsageError(f"{name}: length {len(seq)} exceeds model limit {limit}")


# -- curate -------------------------------------------------------------------


def _curate(records, min_coverage, max_evidence, use_filter, stats_out=None):
    records = list(records)
    if stats_out is not None:
        stats_out.write("\n".join(corpus.compute_stats(records).to_lines()) + "\n")
    if not use_filter:
        return records, None
    report = corpus.FilterReport()
    kept = list(corpus.filter_corpus(records, min_coverage, max_evidence, report))
    return kept, report


def cmd_curate(args) -> int:
    path = _need_file(args.dump, "annotation dump")
    parse_report = corpus.ParseReport()
    with open(path, encoding="utf-8") as fh:
        records = list(corpus.parse_dump(fh, parse_report))
    stats_fh = open(args.stats, "w", encoding="utf-8") if args.stats else None
    try:
        kept, report = _curate(records, args.min_coverage, args.max_evidence, not args.no_filter, stats_fh)
    finally:
        if stats_fh:
            stats_fh.close()
    with open(args.out, "w", encoding="utf-8") as out:
        n = corpus.write_pairs(kept, out)
    msg = f"records={len(records)} skipped_lines={len(parse_report.errors)} pairs={n}"
    if report is not None:
        msg += f" removed_coverage={report.removed_coverage} removed_evidence={report.removed_evidence}"
    print(msg)
    return EXIT_OK


# -- pretrain -----------------------------------------------------------------


def _align_config(cfg: RunConfig):
    from .align import AlignConfig
    from .encoders import EncoderConfig

    m, t = cfg.model, cfg.train
    return AlignConfig(
        protein=EncoderConfig(layers=m.protein_layers, model_dim=m.model_dim, heads=m.heads,
                              max_len=m.protein_max_len, projection_dim=m.projection_dim),
        text=EncoderConfig(layers=m.text_layers, model_dim=m.model_dim, heads=m.heads,
                           max_len=m.text_max_len, projection_dim=m.projection_dim),
        text_vocab_size=m.text_vocab_size,
        tau=t.tau,
        batch_size=t.batch_size,
        epochs=t.epochs,
        lr=t.lr,
        warmup_steps=t.warmup_steps,
        dtype=m.dtype,
    )


def _pretrain_pairs(cfg: RunConfig) -> list[Pair]:
    if cfg.paths.dump:
        with open(_need_file(cfg.paths.dump, "paths.dump"), encoding="utf-8") as fh:
            records = list(corpus.parse_dump(fh))
        kept, _ = _curate(records, cfg.filter.min_coverage, cfg.filter.max_evidence, cfg.ablation.use_filter)
        pairs = []
        for rec in kept:
            try:
                pairs.append(Pair(rec.accession, rec.sequence, corpus.template_biotext(rec)))
            except corpus.UntemplatableRecord:
                continue
        return pairs
    return _read_pair_file(cfg.paths.pairs, "paths.pairs")


def cmd_pretrain(args) -> int:
    from .align import init_bundle, pretrain
    from .tokenize import build_text_vocab

    cfg = load_config(_need_file(args.config, "config"), dict(args.set or []))
    pairs = _pretrain_pairs(cfg)
    if len(pairs) < 2:
        raise UsageError(f"need at least 2 training pairs, got {len(pairs)}")
    heldout = _read_pair_file(cfg.paths.heldout, "paths.heldout") if cfg.paths.heldout else None
    root = _open_run_dir(cfg, args.run_dir)
    handler = _file_logger(root / LOG_DIR / "pretrain.log")
    try:
        acfg = _align_config(cfg)
        seed = derive_seed(cfg.train.seed, "pretrain")
        vocab = build_text_vocab([p.text for p in pairs], acfg.text_vocab_size)
        if cfg.ablation.use_pretraining:
            bundle, _ = pretrain(acfg, pairs, seed, heldout, vocab)
        else:
            log.info("use_pretraining=false: writing randomly initialized encoders")
            bundle = init_bundle(acfg, vocab, seed)
        ckpt = root / CKPT_DIR / ALIGN_CKPT
        bundle.save(ckpt)
    finally:
        logging.getLogger("seqedit").removeHandler(handler)
        handler.close()
    print(f"checkpoint={ckpt}")
    return EXIT_OK


# -- train-editor -------------------------------------------------------------


def cmd_train_editor(args) -> int:
    from .editor import STOP_SLACK, EditorConfig, EditorTrainConfig, train_editor

    overrides = dict(args.set or [])
    if args.use_film is not None:
        overrides["ablation.use_film"] = "true" if args.use_film else "false"
    cfg = load_config(_need_file(args.config, "config"), overrides)
    upstream = args.from_ckpt or str(Path(cfg.paths.run_dir) / CKPT_DIR / ALIGN_CKPT)
    bundle = _load_bundle(upstream)
    pairs = _read_pair_file(cfg.paths.edit_pairs, "paths.edit_pairs")
    _validate_residues([(p.accession, p.sequence) for p in pairs])
    root = _open_run_dir(cfg, args.run_dir)
    handler = _file_logger(root / LOG_DIR / "train_editor.log")
    t = cfg.train
    try:
        ecfg = EditorConfig(
            layers=cfg.model.editor_layers,
            heads=cfg.model.editor_heads,
            fusion="film" if cfg.ablation.use_film else "concat",
            max_len=bundle.protein_cfg.max_len + STOP_SLACK,
            label_smoothing=t.label_smoothing,
            relaxation=t.relaxation,
            hinge_margin=t.hinge_margin,
            sim_weight=t.sim_weight,
            uncond_prob=t.uncond_prob,
        )
        tcfg = EditorTrainConfig(t.editor_batch_size, t.editor_epochs, t.editor_lr, t.editor_warmup_steps)
        bundle, _ = train_editor(bundle, ecfg, tcfg, pairs, derive_seed(t.seed, "train-editor"))
        ckpt = root / CKPT_DIR / EDITOR_CKPT
        bundle.save(ckpt)
    finally:
        logging.getLogger("seqedit").removeHandler(handler)
        handler.close()
    print(f"checkpoint={ckpt} fusion={ecfg.fusion}")
    return EXIT_OK


# -- edit ---------------------------------------------------------------------


def cmd_edit(args) -> int:
    from .editor import EditRequest, generate, write_results

    items = _read_sequences(args.seq)
    if not items:
        raise UsageError("no input sequences")
    _validate_residues(items)
    bundle = _load_bundle(args.checkpoint)
    if bundle.editor is None:
        raise UsageError(f"checkpoint {args.checkpoint} has no trained editor")
    _check_lengths(items, bundle)
    mode = "greedy" if args.greedy else args.sampling
    results = []
    for i, (name, seq) in enumerate(items):
        req = EditRequest(
            seq, args.instruction, sampling=mode, temperature=args.temperature, top_k=args.top_k,
            num_samples=args.samples, seed=derive_seed(args.seed, f"edit:{i}"), accession=name,
        )
        results.append(generate(req, bundle))
    with open(args.out, "w", encoding="utf-8") as out:
        write_results(results, out)
    cands = [c for r in results for c in r.candidates]
    delta = float(np.mean([c.sim_edited - c.sim_original for c in cands]))
    med = float(np.median([c.edit_distance for c in cands]))
    print(f"rows = {len(cands)}")
    print(f"mean_sim_delta = {delta!r}")
    print(f"median_edit_distance = {med!r}")
    return EXIT_OK


# -- evaluate -----------------------------------------------------------------


def _read_scores(path: str) -> tuple[list[str], np.ndarray]:
    with open(_need_file(path, "scores"), encoding="utf-8") as fh:
        return evaluate.read_matrix(fh)


def _read_truth(path: str, names: list[str], n_labels: int) -> np.ndarray:
    truth = np.zeros((len(names), n_labels), dtype=bool)
    index = {n: i for i, n in enumerate(names)}
    for n, line in enumerate(_need_file(path, "labels").read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if cols[0] not in index:
            raise UsageError(f"labels line {n}: unknown id {cols[0]!r}")
        for tok in (cols[1].split(",") if len(cols) > 1 and cols[1] else []):
            j = int(tok)
            if not 0 <= j < n_labels:
                raise UsageError(f"labels line {n}: label {j} outside 0..{n_labels - 1}")
            truth[index[cols[0]], j] = True
    return truth


def eval_classify(args) -> dict:
    names, scores = _read_scores(args.scores)
    if not np.all(np.isfinite(scores)):
        raise UsageError("scores must be finite")
    truth = _read_truth(args.labels, names, scores.shape[1])
    if not truth.any():
        raise UsageError("no positive labels")
    return {
        "task": "classify",
        "proteins": len(names),
        "labels": scores.shape[1],
        "aupr": evaluate.aupr(scores.ravel(), truth.ravel()),
        "fmax": evaluate.f_max(scores, truth),
    }


def _read_stability(path: str) -> list[tuple[str, float]]:
    data = []
    for n, line in enumerate(_need_file(path, "stability labels").read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        try:
            data.append((cols[-2], float(cols[-1])))
        except (IndexError, ValueError):
            raise UsageError(f"stability labels line {n}: expected sequence<TAB>value") from None
    return data


def eval_stability(args) -> dict:
    bundle = _load_bundle(args.checkpoint)
    originals = [s for _, s in _read_sequences(_need_file(args.original, "originals").as_posix())]
    editeds = [s for _, s in _read_sequences(_need_file(args.edited, "edited").as_posix())]
    if len(originals) != len(editeds):
        raise UsageError(f"count mismatch: {len(originals)} originals vs {len(editeds)} edited")
    _validate_residues(enumerate(originals + editeds))
    report = {"task": "stability", "items": len(originals)}
    sim = evaluate.improvement_rate(originals, editeds, lambda s: evaluate.stability_similarity(s, args.instruction, bundle))
    report.update(_improvement_keys("similarity", sim))
    if args.labels:
        data = _read_stability(args.labels)
        _validate_residues(enumerate(s for s, _ in data))
        try:
            fit = evaluate.train_oracle(data, bundle, seed=derive_seed(args.seed, "oracle"), epochs=args.oracle_epochs)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        ora = evaluate.improvement_rate(originals, editeds, lambda s: evaluate.oracle_score(s, fit.model, bundle))
        report["oracle.train_mse_initial"] = fit.mse_history[0]
        report["oracle.train_mse_final"] = fit.mse_history[-1]
        report.update(_improvement_keys("oracle", ora))
    return report


def _improvement_keys(prefix: str, rep) -> dict:
    return {
        f"{prefix}.improvement_rate": rep.fraction,
        f"{prefix}.mean_original": rep.mean_original,
        f"{prefix}.mean_edited": rep.mean_edited,
        f"{prefix}.mean_original_normalized": rep.mean_original_normalized,
        f"{prefix}.mean_edited_normalized": rep.mean_edited_normalized,
    }


def eval_antibody(args) -> dict:
    from .editor import optimize_antibody

    items = _read_sequences(args.seq)
    _validate_residues(items)
    bundle = _load_bundle(args.checkpoint)
    if bundle.editor is None:
        raise UsageError(f"checkpoint {args.checkpoint} has no trained editor")
    _check_lengths(items, bundle)
    report = {"task": "antibody", "inputs": len(items), "top_k": args.top}
    rows = []
    for i, (name, seq) in enumerate(items):
        start, end = args.region
        if not 0 <= start <= end <= len(seq):
            raise UsageError(f"{name}: region {start}:{end} outside sequence of length {len(seq)}")
        cands = optimize_antibody(seq, args.region, args.instruction, bundle, n_samples=args.samples,
                                  top_k=args.top, rate=args.rate, seed=derive_seed(args.seed, f"antibody:{i}"))
        for rank, c in enumerate(cands, start=1):
            rows.append(f"{name}\t{rank}\t{c.sequence}\t{c.region}\t{c.naturalness!r}\n")
            report[f"{name}.rank{rank}.naturalness"] = c.naturalness
    if args.candidates:
        with open(args.candidates, "w", encoding="utf-8") as out:
            out.write("id\trank\tsequence\tregion\tnaturalness\n")
            out.writelines(rows)
    return report


TASKS = {"classify": eval_classify, "stability": eval_stability, "antibody": eval_antibody}


def cmd_evaluate(args) -> int:
    report = TASKS[args.task](args)
    with open(args.out, "w", encoding="utf-8") as out:
        evaluate.write_report(report, out)
    evaluate.write_report(report, sys.stdout)
    return EXIT_OK


# -- synth --------------------------------------------------------------------


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, held = synthetic.composition_corpus(args.train, args.heldout, seed=args.seed)
    with open(out_dir / "train_pairs.tsv", "w", encoding="utf-8") as fh:
        corpus.write_pair_objects(train, fh)
    with open(out_dir / "heldout_pairs.tsv", "w", encoding="utf-8") as fh:
        corpus.write_pair_objects(held, fh)
    with open(out_dir / "edit_pairs.tsv", "w", encoding="utf-8") as fh:
        corpus.write_pair_objects(synthetic.attribute_task(args.edit, seed=args.seed + 1), fh)
    with open(out_dir / "stability.tsv", "w", encoding="utf-8") as fh:
        for seq, y in synthetic.stability_dataset(seed=args.seed + 2):
            fh.write(f"{seq}\t{y!r}\n")
    with open(out_dir / "fixture_dump.tsv", "w", encoding="utf-8") as fh:
        corpus.write_dump(synthetic.annotation_fixture(), fh)
    print(f"wrote synthetic data to {out_dir}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _kv(raw: str) -> tuple[str, str]:
    key, sep, value = raw.partition("=")
    if not sep or "." not in key:
        raise argparse.ArgumentTypeError(f"expected section.key=value, got {raw!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqedit", description="Text-conditioned protein sequence editing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curate", help="filter an annotation dump into protein-text pairs")
    c.add_argument("dump")
    c.add_argument("--out", required=True)
    c.add_argument("--min-coverage", type=float, default=0.4)
    c.add_argument("--max-evidence", type=int, default=3)
    c.add_argument("--no-filter", action="store_true", help="skip the quality filter (ablation)")
    c.add_argument("--stats", help="write the coverage/evidence report here")
    c.set_defaults(func=cmd_curate)

    for name, func, helptext in (
        ("pretrain", cmd_pretrain, "contrastive alignment of the two encoders"),
        ("train-editor", cmd_train_editor, "fit fusion and decoder on frozen encoders"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--run-dir", help="overrides paths.run_dir")
        s.add_argument("--set", action="append", type=_kv, metavar="SECTION.KEY=VALUE")
        s.set_defaults(func=func)
        if name == "train-editor":
            s.add_argument("--from", dest="from_ckpt", help="aligned checkpoint (default: run dir align.ckpt)")
            s.add_argument("--use-film", type=_bool, default=None, metavar="{true,false}")

    e = sub.add_parser("edit", help="edit sequences toward an instruction")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--seq", required=True, help="sequence file (FASTA, TSV or one per line) or a literal sequence")
    e.add_argument("--instruction", required=True)
    e.add_argument("--samples", type=int, default=1)
    e.add_argument("--greedy", action="store_true")
    e.add_argument("--sampling", choices=("greedy", "temperature", "top_k"), default="temperature")
    e.add_argument("--temperature", type=float, default=1.0)
    e.add_argument("--top-k", type=int, default=0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_edit)

    v = sub.add_parser("evaluate", help="metrics reports")
    v.add_argument("--task", choices=sorted(TASKS), required=True)
    v.add_argument("--out", required=True, help="metrics report path")
    v.add_argument("--checkpoint")
    v.add_argument("--scores", help="classify: TSV id + per-label scores")
    v.add_argument("--labels", help="classify: TSV id + comma label ids; stability: sequence<TAB>value")
    v.add_argument("--original", help="stability: original sequences")
    v.add_argument("--edited", help="stability: edited sequences")
    v.add_argument("--instruction", default="")
    v.add_argument("--oracle-epochs", type=int, default=200)
    v.add_argument("--seq", help="antibody: heavy chain(s)")
    v.add_argument("--region", type=_region, help="antibody: START:END of the loop to redesign")
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--top", type=int, default=5)
    v.add_argument("--rate", type=float, default=0.15)
    v.add_argument("--candidates", help="antibody: write ranked candidates TSV")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_evaluate)

    y = sub.add_parser("synth", help="write the synthetic corpora and fixtures")
    y.add_argument("--out-dir", required=True)
    y.add_argument("--train", type=int, default=512)
    y.add_argument("--heldout", type=int, default=64)
    y.add_argument("--edit", type=int, default=256)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_synth)
    return p


_REQUIRED = {
    "classify": ("scores", "labels"),
    "stability": ("checkpoint", "original", "edited", "instruction"),
    "antibody": ("checkpoint", "seq", "region", "instruction"),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    logging.getLogger("seqedit").setLevel(logging.INFO)
    if args.command == "evaluate":
        missing = [k for k in _REQUIRED[args.task] if not getattr(args, k)]
        if missing:
            print(f"seqedit: error: --task {args.task} requires --{', --'.join(m.replace('_', '-') for m in missing)}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"seqedit: config error: {exc} (key: {exc.key})" if exc.key else f"seqedit: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, RecordError) as exc:
        print(f"seqedit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IllegalResidue as exc:
        print(f"seqedit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"seqedit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level guard
        log.debug("failure", exc_info=True)
        print(f"seqedit: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
