"""Operator command line: harvest, metrics, reconcile, serve, seed,
export.

Exit codes: 0 success, 1 operational failure, 2 usage error. Failures
print one machine-readable JSON line on stderr. Timestamps honor
``--fixed-clock`` so golden-file tests stay byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .corpus import (
    Corpus,
    StorageError,
    load_corpus,
    load_snapshot,
    save_snapshot,
    snapshot_path,
)
from .harvester import HarvestError, PortalEndpoint, harvest_all
from .lexlookup import LexvoClient, StaticLookup
from .metrics import ExpressivenessAborted, corpus_metrics, render_histograms, render_report
from .records import parse_timestamp, utc_now
from .reconcile import (
    StaleSuggestionError,
    append_merge_log,
    apply_merge,
    suggest,
)
from .semsim import DEFAULT_THRESHOLD, LexiconProvider, bundled_lexicon, load_lexicon
from .tagserver.api import MERGE_LOG_FILE, create_app
from .tagserver.rdf import DEFAULT_SERVER_BASE, export_turtle
from .tagserver.seed import SeedingAborted, seed_from_corpus
from .tagserver.store import TagStore
from .transport import ReplayTransport


class CliError(Exception):
    """Operational failure; rendered as the machine-readable error line."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass
class Config:
    """Validated run parameters shared by the subcommands."""

    corpus_dir: Path | None = None
    endpoints_file: Path | None = None
    store_dir: Path | None = None
    lexicon_path: Path | None = None
    cache_dir: Path | None = None
    parallelism: int = 4
    threshold: float = DEFAULT_THRESHOLD
    top_n: int = 200
    create_n: int = 100
    bind: str = "127.0.0.1:8080"

    def validate(self) -> None:
        if self.parallelism < 1:
            raise CliError("config", "parallelism must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise CliError("config", "threshold must be in [0, 1]")
        if self.top_n < 1 or self.create_n < 0:
            raise CliError("config", "seed parameters out of range")
        if self.endpoints_file is not None and not self.endpoints_file.exists():
            raise CliError("config", f"endpoints file not found: {self.endpoints_file}")
        if self.lexicon_path is not None and not self.lexicon_path.exists():
            raise CliError("config", f"lexicon not found: {self.lexicon_path}")


def _clock(args) -> callable:
    if args.fixed_clock:
        try:
            instant = parse_timestamp(args.fixed_clock)
        except ValueError as exc:
            raise CliError("usage", f"bad --fixed-clock value: {exc}") from exc
        return lambda: instant
    return utc_now


def _provider(lexicon_path: str | None) -> LexiconProvider:
    if lexicon_path:
        return LexiconProvider(load_lexicon(lexicon_path))
    return LexiconProvider(bundled_lexicon())


def _lookup(args):
    if getattr(args, "lookup_table", None):
        return StaticLookup.from_tsv(args.lookup_table)
    cache_dir = getattr(args, "cache_dir", None)
    return LexvoClient(cache_dir=cache_dir)


def read_endpoints(path: Path) -> list[PortalEndpoint]:
    """Endpoints file: one ``portal_id<TAB>base_url[<TAB>locale]`` per line."""
    endpoints = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise CliError("endpoints", f"{path}:{line_no}: need portal_id and base_url")
        locale = fields[2] if len(fields) > 2 and fields[2] else None
        try:
            endpoints.append(
                PortalEndpoint(portal_id=fields[0], base_url=fields[1], locale_override=locale)
            )
        except ValueError as exc:
            raise CliError("endpoints", f"{path}:{line_no}: {exc}") from exc
    return endpoints


def cmd_harvest(args) -> int:
    config = Config(
        endpoints_file=Path(args.endpoints),
        corpus_dir=Path(args.out),
        parallelism=args.parallelism,
    )
    config.validate()
    endpoints = read_endpoints(config.endpoints_file)
    transport = None
    if args.replay:
        transport = ReplayTransport.from_file(args.replay)
    if args.record:
        from .transport import HttpTransport, RecordingTransport

        transport = RecordingTransport(transport or HttpTransport(), args.record)
    corpus, failures = harvest_all(
        endpoints, parallelism=config.parallelism, transport=transport, now=_clock(args)
    )
    config.corpus_dir.mkdir(parents=True, exist_ok=True)
    for snapshot in corpus.snapshots:
        save_snapshot(snapshot, snapshot_path(config.corpus_dir, snapshot.portal_id))
        print(
            f"harvested\t{snapshot.portal_id}\t{len(snapshot.datasets)}\t{len(snapshot.tags)}"
        )
    for failure in failures:
        print(
            f"failed\t{failure.portal_id}\t{failure.phase}\t{failure.message}",
            file=sys.stderr,
        )
    if not corpus.snapshots:
        raise CliError("harvest", "no portal could be harvested")
    return 0


def cmd_metrics(args) -> int:
    corpus = load_corpus(args.corpus)
    report = render_report(corpus, fmt=args.format)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(report, end="")
    if args.histograms:
        Path(args.histograms).write_text(render_histograms(corpus), encoding="utf-8")
        print(f"wrote {args.histograms}")
    if args.with_expressiveness:
        try:
            metrics = corpus_metrics(corpus, lookup=_lookup(args))
        except ExpressivenessAborted as exc:
            raise CliError("expressiveness", str(exc)) from exc
        expr = metrics.expressiveness
        print(
            "expressiveness\t"
            f"associated={expr.associated_fraction:.4f}\t"
            f"not_associated={expr.not_associated_fraction:.4f}\t"
            f"not_considered={expr.not_considered_fraction:.4f}"
        )
        print(
            "expressiveness_weighted\t"
            f"associated={expr.associated_weighted:.4f}\t"
            f"not_associated={expr.not_associated_weighted:.4f}\t"
            f"not_considered={expr.not_considered_weighted:.4f}"
        )
        if expr.estimated_locale_portals:
            print(
                "estimated_locales\t" + ",".join(expr.estimated_locale_portals)
            )
    return 0


def _load_portal(corpus_dir: str, portal_id: str):
    path = snapshot_path(corpus_dir, portal_id)
    if not path.exists():
        raise CliError("reconcile", f"no snapshot for portal {portal_id!r} in {corpus_dir}")
    return load_snapshot(path)


def cmd_reconcile_suggest(args) -> int:
    snapshot = _load_portal(args.corpus, args.portal)
    tiers = (1, 2, 3) if args.tier == "all" else (int(args.tier),)
    provider = _provider(args.lexicon) if 3 in tiers else None
    suggestions = suggest(
        snapshot, tiers=tiers, provider=provider, threshold=args.threshold
    )
    for s in suggestions:
        evidence = ",".join(f"{k}={v}" for k, v in sorted(s.evidence.items()))
        members = "|".join(s.members)
        print(
            f"{s.suggestion_id}\ttier={s.tier}\t{s.confidence}\t"
            f"survivor={s.proposed_survivor}\tmembers={members}\t{evidence}"
        )
    print(f"total\t{len(suggestions)}", file=sys.stderr)
    return 0


def cmd_reconcile_apply(args) -> int:
    snapshot = _load_portal(args.corpus, args.portal)
    suggestions = {
        s.suggestion_id: s
        for s in suggest(snapshot, tiers=(1, 2, 3), provider=None)
    }
    suggestion = suggestions.get(args.suggestion)
    if suggestion is None:
        raise CliError(
            "stale-suggestion",
            f"suggestion {args.suggestion} not found; run suggest again",
        )
    survivor = args.survivor or suggestion.proposed_survivor
    try:
        merged, entry = apply_merge(snapshot, suggestion, survivor=survivor, now=_clock(args))
    except (StaleSuggestionError, ValueError) as exc:
        raise CliError("apply", str(exc)) from exc
    if entry is None:
        print(f"noop\t{args.suggestion}")
        return 0
    save_snapshot(merged, snapshot_path(args.corpus, args.portal))
    append_merge_log(Path(args.corpus) / MERGE_LOG_FILE, entry)
    print(
        f"applied\t{args.suggestion}\tsurvivor={survivor}\ttags={len(merged.tags)}"
    )
    return 0


def cmd_reconcile_report(args) -> int:
    corpus = load_corpus(args.corpus)
    from .reconcile import reduction_report

    print(reduction_report(corpus).to_text(), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    config = Config(
        corpus_dir=Path(args.corpus),
        store_dir=Path(args.store),
        threshold=args.threshold,
        bind=args.bind,
    )
    config.validate()
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise CliError("usage", f"--bind must be ADDR:PORT, got {args.bind!r}")
    ui_dir = args.ui
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    store = TagStore(config.store_dir, now=_clock(args))
    app = create_app(
        config.corpus_dir,
        store,
        provider=_provider(args.lexicon),
        threshold=config.threshold,
        server_base=args.server_base,
        ui_dir=ui_dir,
        now=_clock(args),
    )
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return 0


def cmd_seed(args) -> int:
    config = Config(
        corpus_dir=Path(args.corpus),
        store_dir=Path(args.store),
        top_n=args.top,
        create_n=args.create,
        threshold=args.threshold,
    )
    config.validate()
    corpus = load_corpus(config.corpus_dir)
    if not corpus.snapshots:
        raise CliError("seed", f"no snapshots in {config.corpus_dir}")
    with TagStore(config.store_dir, now=_clock(args)) as store:
        try:
            report = seed_from_corpus(
                corpus,
                lookup=_lookup(args),
                provider=_provider(args.lexicon),
                store=store,
                top_n=config.top_n,
                create_n=config.create_n,
                require_meanings=args.require_meanings,
                related_threshold=config.threshold,
                checkpoint_path=config.store_dir / "seed.checkpoint",
            )
        except SeedingAborted as exc:
            raise CliError("seed-aborted", str(exc)) from exc
    print(report.to_text(), end="")
    return 0


def cmd_export(args) -> int:
    store_dir = Path(args.store)
    if not store_dir.exists():
        raise CliError("export", f"store directory not found: {store_dir}")
    with TagStore(store_dir) as store:
        corpus = load_corpus(args.corpus) if args.corpus else Corpus()
        portal_bases = {s.portal_id: s.base_url for s in corpus.snapshots}
        turtle = export_turtle(
            store.all_tags(),
            server_base=args.server_base,
            portal_bases=portal_bases,
            corpus=corpus if corpus.snapshots else None,
        )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(turtle, encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odtags",
        description="Measure, reconcile, and globally link open data portal tags.",
    )
    parser.add_argument("--version", action="version", version=f"odtags {__version__}")
    parser.add_argument(
        "--fixed-clock",
        metavar="ISO",
        help="freeze timestamps (e.g. 2026-01-01T00:00:00Z) for reproducible output",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", help="harvest portals into snapshot files")
    p.add_argument("--endpoints", required=True, help="portal list (TSV)")
    p.add_argument("--out", required=True, help="corpus directory")
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--replay", help="replay transport recording instead of the network")
    p.add_argument("--record", help="record every exchange to this replay file")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("metrics", help="compute quality metrics over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="report file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--histograms", help="also write distribution CSV here")
    p.add_argument("--with-expressiveness", action="store_true")
    p.add_argument("--lookup-table", help="offline lookup fixture (TSV)")
    p.add_argument("--cache-dir", help="lookup cache directory")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("reconcile", help="suggest and apply tag merges")
    rsub = p.add_subparsers(dest="reconcile_command", required=True)
    ps = rsub.add_parser("suggest", help="list merge suggestions")
    ps.add_argument("--corpus", required=True)
    ps.add_argument("--portal", required=True)
    ps.add_argument("--tier", choices=("1", "2", "3", "all"), default="all")
    ps.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    ps.add_argument("--lexicon", help="lexicon file for tier 3")
    ps.set_defaults(func=cmd_reconcile_suggest)
    pa = rsub.add_parser("apply", help="apply one suggestion")
    pa.add_argument("--corpus", required=True)
    pa.add_argument("--portal", required=True)
    pa.add_argument("--suggestion", required=True, metavar="SID")
    pa.add_argument("--survivor", help="surviving tag (default: proposed)")
    pa.set_defaults(func=cmd_reconcile_apply)
    pr = rsub.add_parser("report", help="tier-1/tier-2 reduction potential")
    pr.add_argument("--corpus", required=True)
    pr.set_defaults(func=cmd_reconcile_report)

    p = sub.add_parser("serve", help="run the tag server and curation API")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--bind", default="127.0.0.1:8080", metavar="ADDR:PORT")
    p.add_argument("--lexicon")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--server-base", default=DEFAULT_SERVER_BASE)
    p.add_argument("--ui", help="directory of UI assets to serve")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("seed", help="create global tags from the corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--top", type=int, default=200)
    p.add_argument("--create", type=int, default=100)
    p.add_argument("--require-meanings", action="store_true")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--lexicon")
    p.add_argument("--lookup-table", help="offline lookup fixture (TSV)")
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("export", help="write the full RDF export")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", help="corpus directory for dataset links")
    p.add_argument("--server-base", default=DEFAULT_SERVER_BASE)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        _clock(args)  # fail fast on a malformed --fixed-clock
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return 1
    except (HarvestError, StorageError, OSError) as exc:
        print(
            json.dumps({"error": exc.__class__.__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
