"""End-to-end pipeline demo on a synthetic corpus, no model server needed.

Builds a ten-document Spanish corpus plus scripted provider fixtures,
then drives the CLI through stats, index, adapt (BM25 few-shot), two
refinement streams, ensembling, and evaluation. Artifacts land in
--workdir (default: a fresh temp directory) and are printed at the end.

Usage:
    python3 scripts/dry_run.py [--workdir DIR] [--cycles N]
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from apec.cli import main as cli_main

ANALYSIS = "La adaptación tiene frases largas."
FINAL = "Sin comentarios adicionales."


def revision_response(correction: str) -> str:
    return (
        "# Análisis de la adaptación\n"
        f"{ANALYSIS}\n\n"
        "# Corrección\n"
        f"{correction}\n\n"
        "# Final\n"
        f"{FINAL}"
    )


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def build_fixtures(root: Path, cycles: int) -> dict:
    dev = [
        {
            "id": f"dev{i}",
            "source": (
                f"El documento número {i} describe el procedimiento "
                "administrativo con frases largas y términos difíciles."
            ),
            "reference": f"El documento {i} describe el procedimiento.",
            "task": "PL",
        }
        for i in range(10)
    ]
    train = [
        {
            "id": f"train{i}",
            "source": f"Texto de entrenamiento {i} sobre trámites y plazos complejos.",
            "reference": f"Texto fácil {i} sobre trámites.",
            "task": "PL",
        }
        for i in range(6)
    ]
    docs_path = root / "dev.jsonl"
    train_path = root / "train.jsonl"
    write_jsonl(docs_path, dev)
    write_jsonl(train_path, train)

    adapt_script = root / "adapt_script.jsonl"
    write_jsonl(
        adapt_script,
        [
            {"match": doc["source"], "response": f"Adaptación inicial de {doc['id']}."}
            for doc in dev
        ],
    )

    scripts = {}
    for stream, phrase in (("greedy", "clara"), ("sampled", "sencilla")):
        entries = []
        for doc in dev:
            for cycle in range(cycles):
                entries.append(
                    {
                        "match": doc["source"],
                        "response": revision_response(
                            f"Versión {phrase} {cycle} de {doc['id']}."
                        ),
                    }
                )
        path = root / f"refine_{stream}.jsonl"
        write_jsonl(path, entries)
        scripts[stream] = path

    return {
        "docs": docs_path,
        "train": train_path,
        "adapt_script": adapt_script,
        **scripts,
    }


def run_step(argv: list[str]) -> None:
    print(f"$ apec {' '.join(argv)}")
    rc = cli_main(argv)
    if rc != 0:
        print(f"step failed with exit code {rc}", file=sys.stderr)
        sys.exit(rc)


def run(workdir: Path, cycles: int) -> None:
    fixtures = build_fixtures(workdir, cycles)
    stats_path = workdir / "stats.json"
    index_path = workdir / "index.json"
    adapt_path = workdir / "adapt.jsonl"
    best_path = workdir / "best.jsonl"
    eval_path = workdir / "eval.json"

    run_step(
        [
            "stats",
            "--input", str(fixtures["docs"]),
            "--embed", "hash",
            "--output", str(stats_path),
        ]
    )
    run_step(["index", "--corpus", str(fixtures["train"]), "--output", str(index_path)])
    run_step(
        [
            "adapt",
            "--input", str(fixtures["docs"]),
            "--corpus", str(fixtures["train"]),
            "--index", str(index_path),
            "--mode", "fs-bm25",
            "--k", "2",
            "--provider", f"scripted:{fixtures['adapt_script']}",
            "--seed", "7",
            "--output", str(adapt_path),
        ]
    )
    trace_paths = {}
    for stream in ("greedy", "sampled"):
        trace_paths[stream] = workdir / f"traces_{stream}.jsonl"
        run_step(
            [
                "refine",
                "--input", str(adapt_path),
                "--docs", str(fixtures["docs"]),
                "--corpus", str(fixtures["train"]),
                "--index", str(index_path),
                "--provider", f"scripted:{fixtures[stream]}",
                "--embed", "hash",
                "--cycles", str(cycles),
                "--demos", "2",
                "--stream", stream,
                "--output", str(trace_paths[stream]),
            ]
        )
    run_step(
        [
            "ensemble",
            "--inputs", str(trace_paths["greedy"]), str(trace_paths["sampled"]),
            "--priority", "greedy,sampled",
            "--output", str(best_path),
        ]
    )
    run_step(
        [
            "evaluate",
            "--input", str(best_path),
            "--corpus", str(fixtures["docs"]),
            "--embed", "hash",
            "--output", str(eval_path),
        ]
    )

    evaluation = json.loads(eval_path.read_text(encoding="utf-8"))
    print()
    print(f"artifacts in {workdir}")
    for path in sorted(workdir.iterdir()):
        print(f"  {path.name}")
    print()
    print(
        f"evaluated {evaluation['doc_count']} docs: "
        f"FH {evaluation['fh']:.2f} (gain {evaluation['fh_gain']:+.2f}), "
        f"BoW {evaluation['bow_sim']:.4f}, Emb {evaluation['emb_sim']:.4f}, "
        f"table avg {evaluation['table_avg']:.2f}"
    )


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", help="artifact directory (default: temp dir)")
    parser.add_argument("--cycles", type=int, default=2, help="revision cycles per doc")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    if args.workdir:
        target = Path(args.workdir)
        target.mkdir(parents=True, exist_ok=True)
    else:
        target = Path(tempfile.mkdtemp(prefix="apec-dry-run-"))
    run(target, args.cycles)
