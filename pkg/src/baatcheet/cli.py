"""Command-line entry point.

Subcommands cover the project lifecycle: train, test, shell,
mine-intents, evaluate, serve. Exit codes: 0 success, 1 operational
failure (bad corpus, unloadable model, failing tests), 2 usage errors.
All randomness flows through --seed, default 42. ANSI color is used only
on a terminal and never when NO_COLOR is set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import engine as engine_module
from . import evaluation, kg as kg_module, mining
from .corpus import parse_nlu_markdown, parse_stories_markdown
from .errors import BaatcheetError

DEFAULT_PORT = 5005
PORT_ENV_VAR = "DIALOG_ENGINE_PORT"


class UsageError(Exception):
    """Raised for post-parse flag misuse; mapped to exit code 2."""


def _color_enabled() -> bool:
    return sys.stdout.isatty() and not os.environ.get("NO_COLOR")


def _dim(text: str) -> str:
    return f"\x1b[2m{text}\x1b[0m" if _color_enabled() else text


def _red(text: str) -> str:
    return f"\x1b[31m{text}\x1b[0m" if _color_enabled() else text


def _green(text: str) -> str:
    return f"\x1b[32m{text}\x1b[0m" if _color_enabled() else text


def _k_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("need at least one K value")
    for v in values:
        if v < 2:
            raise argparse.ArgumentTypeError(f"K values must be >= 2, got {v}")
    return values


def _read_file(path: str, what: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p.read_text("utf-8")


def _load_kg(triples_path: str | None, predicates_path: str | None):
    if triples_path is None:
        return None
    phrases = None
    if predicates_path is not None:
        phrases = kg_module.load_predicate_phrases(
            _read_file(predicates_path, "predicate phrase file")
        )
    return kg_module.load_triples(_read_file(triples_path, "triples file"), phrases)


def _load_engine(args) -> engine_module.Engine:
    project = engine_module.load_model(args.model)
    store = _load_kg(getattr(args, "kg", None), getattr(args, "predicates", None))
    return engine_module.Engine(project, kg_store=store, seed=args.seed)


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise UsageError(f"data directory not found: {data_dir}")
    project = engine_module.train_project(
        data_dir, config_path=args.config, seed=args.seed
    )
    fingerprint = project.fingerprint()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"model-{fingerprint[:12]}.tar.gz"
    engine_module.package_model(project, path)
    print(path)
    print(f"fingerprint {fingerprint}")
    return 0


def cmd_mine_intents(args) -> int:
    raw = _read_file(args.input, "question corpus")
    questions = [line for line in raw.splitlines() if line.strip()]
    stopwords = mining.load_stopwords(args.stopwords)
    docs, vocabulary = mining.preprocess_corpus(
        questions, stopwords, min_tokens=args.min_tokens, max_tokens=args.max_tokens
    )
    report = mining.sweep_k(
        docs, vocabulary, args.k, iterations=args.iterations, seed=args.seed
    )
    report_path = Path(args.report) if args.report else Path(f"{args.out}.report.json")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json() + "\n", "utf-8")

    label_k = args.label_k if args.label_k is not None else max(args.k)
    if label_k not in set(args.k):
        raise UsageError(f"--label-k {label_k} is not among the swept K values {args.k}")
    model = mining.fit_lda(
        docs,
        vocabulary,
        label_k,
        iterations=args.iterations,
        seed=args.seed + label_k,
    )
    draft = mining.export_intent_draft(model, docs, args.label_prefix)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(draft, "utf-8")

    for entry in report.entries:
        print(f"K={entry.k} mean_distance={entry.mean_distance:.4f}")
    print(f"draft ({label_k} topics) -> {out_path}")
    print(f"report -> {report_path}")
    return 0


def cmd_shell(args) -> int:
    eng = _load_engine(args)
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            sys.stdout.write("you> ")
            sys.stdout.flush()
        line = sys.stdin.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        if text == "/quit":
            break
        for reply in eng.respond("shell", text):
            print(reply.text)
            parse = eng.tracker("shell").latest_parse()
            debug = (
                f"[intent={parse.top_intent} conf={parse.top_confidence:.4f} "
                f"policy={reply.decision.source} policy_conf={reply.decision.confidence:.4f}]"
            )
            if reply.decision.triple is not None:
                t = reply.decision.triple
                debug += f" [triple: {t.subject} {t.predicate} {t.object}]"
            print(_dim(debug))
    return 0


def cmd_test(args) -> int:
    eng = _load_engine(args)
    tests = parse_stories_markdown(_read_file(args.stories, "conversation test file"))
    results = evaluation.run_conversation_tests(tests, eng)
    failed = 0
    for result in results:
        if result.passed:
            print(f"{_green('PASS')} {result.name}")
        else:
            failed += 1
            d = result.divergence
            print(
                f"{_red('FAIL')} {result.name}: step {d.step} "
                f"expected {d.expected} got {d.actual}"
            )
    print(f"{len(results) - failed} passed, {failed} failed")
    return 0 if failed == 0 else 1


def cmd_evaluate(args) -> int:
    project = engine_module.load_model(args.model)
    examples, _, _ = parse_nlu_markdown(_read_file(args.nlu, "NLU test file"))
    try:
        report = evaluation.evaluate_intents(project.intent_model, examples)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    json_text, table = evaluation.render_report(report)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json_text + "\n", "utf-8")
    (out_dir / "report.txt").write_text(table, "utf-8")
    print(table, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    eng = None
    if args.model is not None:
        eng = _load_engine(args)
    port = args.port
    if port is None:
        port = int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))
    app = create_app(eng)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baatcheet",
        description="Roman Urdu conversational engine: train, chat, mine intents, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=42, help="RNG seed (default 42)")

    p = sub.add_parser("train", help="train a model from a corpus directory")
    p.add_argument("-c", "--config", default=None, help="config.yml path")
    p.add_argument("-d", "--data", required=True, help="corpus directory")
    p.add_argument("-o", "--out", default="models", help="output directory")
    add_seed(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("mine-intents", help="mine draft intents from raw questions")
    p.add_argument("--input", required=True, help="one question per line")
    p.add_argument("--k", required=True, type=_k_list, help="comma-separated topic counts")
    p.add_argument("--out", required=True, help="draft nlu markdown output path")
    p.add_argument("--report", default=None, help="K-sweep report path (default <out>.report.json)")
    p.add_argument("--label-k", type=int, default=None, help="K used for the draft (default max)")
    p.add_argument("--label-prefix", default="mined", help="intent name prefix")
    p.add_argument("--stopwords", default=None, help="stopword file (default bundled list)")
    p.add_argument("--min-tokens", type=int, default=2)
    p.add_argument("--max-tokens", type=int, default=50)
    p.add_argument("--iterations", type=int, default=1000)
    add_seed(p)
    p.set_defaults(handler=cmd_mine_intents)

    p = sub.add_parser("shell", help="chat with a trained model on stdin/stdout")
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--kg", default=None, help="knowledge graph triples.tsv")
    p.add_argument("--predicates", default=None, help="predicate phrase tsv")
    add_seed(p)
    p.set_defaults(handler=cmd_shell)

    p = sub.add_parser("test", help="replay conversation tests against a model")
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--stories", required=True, help="conversationtest.md path")
    p.add_argument("--kg", default=None, help="knowledge graph triples.tsv")
    p.add_argument("--predicates", default=None, help="predicate phrase tsv")
    add_seed(p)
    p.set_defaults(handler=cmd_test)

    p = sub.add_parser("evaluate", help="score NLU predictions against labeled examples")
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--nlu", required=True, help="labeled nlu.md test file")
    p.add_argument("--out-dir", default=".", help="where report.json / report.txt go")
    add_seed(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--model", default=None, help="model archive path")
    p.add_argument("--kg", default=None, help="knowledge graph triples.tsv")
    p.add_argument("--predicates", default=None, help="predicate phrase tsv")
    p.add_argument("--port", type=int, default=None,
                   help=f"listen port (default ${PORT_ENV_VAR} or {DEFAULT_PORT})")
    p.add_argument("--host", default="127.0.0.1")
    add_seed(p)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(f"run 'baatcheet {args.command} --help' for usage", file=sys.stderr)
        return 2
    except BaatcheetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
