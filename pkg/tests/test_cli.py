import json

import pytest

from apec.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    EXIT_PROVIDER,
    EXIT_USAGE,
    load_config,
    main,
    read_adaptations,
    write_jsonl,
)
from apec.errors import ConfigError
from apec.refine import ApecTrace, trace_from_dict, trace_to_dict

from conftest import apec_response


def write_lines(path, rows):
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


@pytest.fixture
def workdir(tmp_path):
    docs = [
        {
            "id": "a",
            "source": "Fuente A con frases largas y difíciles.",
            "reference": "Fuente A corta.",
            "task": "PL",
        },
        {
            "id": "b",
            "source": "Fuente B describe un proceso complejo.",
            "reference": "Fuente B simple.",
            "task": "PL",
        },
        {
            "id": "c",
            "source": "Fuente C explica la norma vigente.",
            "reference": "Fuente C clara.",
            "task": "PL",
        },
    ]
    train = [
        {
            "id": f"t{i}",
            "source": f"Texto de entrenamiento número {i} con palabras variadas.",
            "reference": f"Texto simple {i}.",
            "task": "PL",
        }
        for i in range(4)
    ]
    docs_path = tmp_path / "docs.jsonl"
    train_path = tmp_path / "train.jsonl"
    write_lines(docs_path, docs)
    write_lines(train_path, train)
    return tmp_path, docs_path, train_path


class TestTablecheck:
    def test_exit_ok_and_report(self, capsys):
        assert main(["tablecheck"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "38/38 asserted rows pass; 1 known-inconsistent" in out
        assert "KNOWN-DIFF" in out
        assert out.count("PASS") == 38

    def test_tight_tolerance_fails(self, capsys):
        assert main(["tablecheck", "--tolerance", "0.0001"]) == EXIT_CHECK_FAILED
        assert "FAIL" in capsys.readouterr().out


class TestStats:
    def test_json_report(self, workdir, capsys):
        _, docs_path, _ = workdir
        assert main(["stats", "--input", str(docs_path)]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["schema_version"] == 1
        assert payload["doc_count"] == 3
        assert payload["fh_micro"] == pytest.approx(payload["fh_macro"], abs=30)
        assert payload["avg_sim"] is None

    def test_similarity_rows_with_embedder(self, workdir, capsys):
        _, docs_path, _ = workdir
        assert (
            main(["stats", "--input", str(docs_path), "--embed", "hash"]) == EXIT_OK
        )
        payload = json.loads(capsys.readouterr().out)
        assert payload["avg_sim"] == pytest.approx(
            (payload["bow_sim"] + payload["emb_sim"]) / 2
        )

    def test_text_table_to_file(self, workdir):
        tmp_path, docs_path, _ = workdir
        out_path = tmp_path / "stats.txt"
        rc = main(
            ["stats", "--input", str(docs_path), "--text", "--output", str(out_path)]
        )
        assert rc == EXIT_OK
        assert "FH readability (micro)" in out_path.read_text(encoding="utf-8")

    def test_missing_file_is_config_error(self, tmp_path):
        assert main(["stats", "--input", str(tmp_path / "no.jsonl")]) == EXIT_CONFIG

    def test_reference_side_without_refs(self, tmp_path, capsys):
        path = tmp_path / "norefs.jsonl"
        write_lines(path, [{"id": "a", "source": "Texto.", "task": "PL"}])
        rc = main(["stats", "--input", str(path), "--side", "reference"])
        assert rc == EXIT_CONFIG


class TestIndex:
    def test_build_and_reuse(self, workdir, capsys):
        tmp_path, docs_path, train_path = workdir
        index_path = tmp_path / "index.json"
        rc = main(
            ["index", "--corpus", str(train_path), "--output", str(index_path)]
        )
        assert rc == EXIT_OK
        assert "indexed 4 docs" in capsys.readouterr().out
        out_path = tmp_path / "adapt.jsonl"
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--corpus", str(train_path),
                "--index", str(index_path),
                "--mode", "fs-bm25",
                "--provider", "echo",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK

    def test_corpus_without_references(self, tmp_path):
        path = tmp_path / "norefs.jsonl"
        write_lines(path, [{"id": "a", "source": "Texto.", "task": "PL"}])
        rc = main(
            ["index", "--corpus", str(path), "--output", str(tmp_path / "i.json")]
        )
        assert rc == EXIT_CONFIG


class TestAdapt:
    def test_zero_shot_echo(self, workdir):
        tmp_path, docs_path, _ = workdir
        out_path = tmp_path / "zs.jsonl"
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "zs",
                "--provider", "echo",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK
        records = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert [r["doc_id"] for r in records] == ["a", "b", "c"]
        assert all(r["mode"] == "zs" for r in records)
        # echo returns the final user turn, which is the source itself
        assert records[0]["adaptation"] == "Fuente A con frases largas y difíciles."

    def test_scripted_fs_bm25(self, workdir):
        tmp_path, docs_path, train_path = workdir
        script = tmp_path / "script.jsonl"
        write_lines(
            script,
            [
                {"match": "Fuente A", "response": "Adaptación A."},
                {"match": "Fuente B", "response": "Adaptación B."},
                {"match": "Fuente C", "response": "Adaptación C."},
            ],
        )
        out_path = tmp_path / "fs.jsonl"
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--corpus", str(train_path),
                "--mode", "fs-bm25",
                "--k", "2",
                "--provider", f"scripted:{script}",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK
        records = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert [r["adaptation"] for r in records] == [
            "Adaptación A.",
            "Adaptación B.",
            "Adaptación C.",
        ]

    def test_fs_rdm_seed_determinism(self, workdir):
        tmp_path, docs_path, train_path = workdir
        out_a = tmp_path / "rdm_a.jsonl"
        out_b = tmp_path / "rdm_b.jsonl"
        for out_path in (out_a, out_b):
            rc = main(
                [
                    "adapt",
                    "--input", str(docs_path),
                    "--corpus", str(train_path),
                    "--mode", "fs-rdm",
                    "--k", "2",
                    "--seed", "7",
                    "--provider", "echo",
                    "--output", str(out_path),
                ]
            )
            assert rc == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_fs_emb_mode(self, workdir):
        tmp_path, docs_path, train_path = workdir
        out_path = tmp_path / "emb.jsonl"
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--corpus", str(train_path),
                "--mode", "fs-emb",
                "--embed", "hash",
                "--provider", "echo",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK
        assert len(out_path.read_text().splitlines()) == 3

    def test_ratio_requires_bm25(self, workdir):
        tmp_path, docs_path, _ = workdir
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "zs",
                "--ratio", "0.8,1.2",
                "--provider", "echo",
                "--output", str(tmp_path / "x.jsonl"),
            ]
        )
        assert rc == EXIT_USAGE

    def test_fs_needs_corpus(self, workdir):
        tmp_path, docs_path, _ = workdir
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "fs-rdm",
                "--provider", "echo",
                "--output", str(tmp_path / "x.jsonl"),
            ]
        )
        assert rc == EXIT_USAGE

    def test_unknown_provider(self, workdir):
        tmp_path, docs_path, _ = workdir
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "zs",
                "--provider", "oracle",
                "--output", str(tmp_path / "x.jsonl"),
            ]
        )
        assert rc == EXIT_USAGE

    def test_partial_failure(self, workdir, capsys):
        tmp_path, docs_path, _ = workdir
        script = tmp_path / "script.jsonl"
        write_lines(script, [{"match": "Fuente A", "response": "Sólo A."}])
        out_path = tmp_path / "partial.jsonl"
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "zs",
                "--provider", f"scripted:{script}",
                "--retries", "0",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_PARTIAL
        assert len(out_path.read_text().splitlines()) == 1
        assert "2 of 3 documents failed" in capsys.readouterr().err

    def test_total_failure(self, workdir, capsys):
        tmp_path, docs_path, _ = workdir
        script = tmp_path / "script.jsonl"
        script.write_text("", encoding="utf-8")
        rc = main(
            [
                "adapt",
                "--input", str(docs_path),
                "--mode", "zs",
                "--provider", f"scripted:{script}",
                "--retries", "0",
                "--output", str(tmp_path / "x.jsonl"),
            ]
        )
        assert rc == EXIT_PROVIDER


def refine_script(path, docs, cycles):
    """One parseable revision per doc per cycle, matched on the source."""
    entries = []
    for doc in docs:
        for cycle in range(cycles):
            entries.append(
                {
                    "match": doc["source"],
                    "response": apec_response(f"Revisión {cycle} de {doc['id']}."),
                }
            )
    write_lines(path, entries)


class TestRefine:
    def run_refine(self, workdir, cycles=2, script_docs=None, out_name="traces.jsonl"):
        tmp_path, docs_path, train_path = workdir
        docs = [json.loads(line) for line in docs_path.read_text().splitlines()]
        initial = tmp_path / "initial.jsonl"
        write_lines(
            initial,
            [{"doc_id": d["id"], "adaptation": f"Inicial {d['id']}."} for d in docs],
        )
        script = tmp_path / "refine_script.jsonl"
        refine_script(script, script_docs if script_docs is not None else docs, cycles)
        out_path = tmp_path / out_name
        rc = main(
            [
                "refine",
                "--input", str(initial),
                "--docs", str(docs_path),
                "--corpus", str(train_path),
                "--provider", f"scripted:{script}",
                "--embed", "hash",
                "--cycles", str(cycles),
                "--demos", "2",
                "--retries", "0",
                "--stream", "greedy",
                "--output", str(out_path),
            ]
        )
        return rc, out_path

    def test_end_to_end(self, workdir):
        rc, out_path = self.run_refine(workdir)
        assert rc == EXIT_OK
        traces = [
            trace_from_dict(json.loads(line))
            for line in out_path.read_text().splitlines()
        ]
        assert [t.doc_id for t in traces] == ["a", "b", "c"]
        assert all(len(t.records) == 2 for t in traces)
        assert all(t.stream == "greedy" for t in traces)
        assert all(not t.incomplete for t in traces)

    def test_byte_identical_reruns(self, workdir):
        rc1, out1 = self.run_refine(workdir, out_name="run1.jsonl")
        rc2, out2 = self.run_refine(workdir, out_name="run2.jsonl")
        assert rc1 == rc2 == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_incomplete_traces_partial_exit(self, workdir, capsys):
        tmp_path, docs_path, train_path = workdir
        docs = [json.loads(line) for line in docs_path.read_text().splitlines()]
        rc, out_path = self.run_refine(workdir, script_docs=docs[:1])
        assert rc == EXIT_PARTIAL
        traces = [
            trace_from_dict(json.loads(line))
            for line in out_path.read_text().splitlines()
        ]
        assert [t.incomplete for t in traces] == [False, True, True]
        assert "trace incomplete" in capsys.readouterr().err

    def test_all_incomplete_is_provider_exit(self, workdir):
        rc, _ = self.run_refine(workdir, script_docs=[])
        assert rc == EXIT_PROVIDER

    def test_unknown_adaptation_ids(self, workdir):
        tmp_path, docs_path, train_path = workdir
        initial = tmp_path / "initial.jsonl"
        write_lines(initial, [{"doc_id": "zz", "adaptation": "Texto."}])
        script = tmp_path / "script.jsonl"
        script.write_text("", encoding="utf-8")
        rc = main(
            [
                "refine",
                "--input", str(initial),
                "--docs", str(docs_path),
                "--corpus", str(train_path),
                "--provider", f"scripted:{script}",
                "--embed", "hash",
                "--output", str(tmp_path / "x.jsonl"),
            ]
        )
        assert rc == EXIT_CONFIG


class TestEvaluate:
    def test_perfect_outputs(self, workdir, capsys):
        tmp_path, docs_path, _ = workdir
        docs = [json.loads(line) for line in docs_path.read_text().splitlines()]
        outputs = tmp_path / "outputs.jsonl"
        write_lines(
            outputs,
            [{"doc_id": d["id"], "adaptation": d["reference"]} for d in docs],
        )
        rc = main(
            [
                "evaluate",
                "--input", str(outputs),
                "--corpus", str(docs_path),
                "--embed", "hash",
            ]
        )
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["doc_count"] == 3
        assert payload["bow_sim"] == pytest.approx(1.0)
        assert payload["emb_sim"] == pytest.approx(1.0)
        assert len(payload["rows"]) == 3

    def test_accepts_trace_files(self, workdir, capsys):
        tmp_path, docs_path, _ = workdir
        traces = tmp_path / "traces.jsonl"
        write_lines(
            traces,
            [
                {"doc_id": "a", "final": "Fuente A corta."},
                {"doc_id": "b", "final": "Fuente B simple."},
            ],
        )
        rc = main(
            [
                "evaluate",
                "--input", str(traces),
                "--corpus", str(docs_path),
                "--embed", "hash",
            ]
        )
        assert rc == EXIT_OK
        assert json.loads(capsys.readouterr().out)["doc_count"] == 2

    def test_text_output(self, workdir, capsys):
        tmp_path, docs_path, _ = workdir
        outputs = tmp_path / "outputs.jsonl"
        write_lines(outputs, [{"doc_id": "a", "adaptation": "Fuente A corta."}])
        rc = main(
            [
                "evaluate",
                "--input", str(outputs),
                "--corpus", str(docs_path),
                "--embed", "hash",
                "--text",
            ]
        )
        assert rc == EXIT_OK
        assert "MEAN" in capsys.readouterr().out


def make_trace_record(doc_id, stream, final, final_score):
    return trace_to_dict(
        ApecTrace(
            doc_id=doc_id,
            source="fuente",
            initial="inicial",
            initial_score=0.0,
            records=(),
            final=final,
            final_score=final_score,
            stream=stream,
        )
    )


class TestEnsemble:
    def test_argmax_selection(self, tmp_path, capsys):
        greedy = tmp_path / "greedy.jsonl"
        sampled = tmp_path / "sampled.jsonl"
        write_lines(
            greedy,
            [
                make_trace_record("a", "greedy", "G-a", 60.0),
                make_trace_record("b", "greedy", "G-b", 70.0),
            ],
        )
        write_lines(
            sampled,
            [
                make_trace_record("a", "sampled", "S-a", 65.0),
                make_trace_record("b", "sampled", "S-b", 50.0),
            ],
        )
        out_path = tmp_path / "best.jsonl"
        rc = main(
            [
                "ensemble",
                "--inputs", str(greedy), str(sampled),
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK
        records = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert [(r["doc_id"], r["stream"], r["adaptation"]) for r in records] == [
            ("a", "sampled", "S-a"),
            ("b", "greedy", "G-b"),
        ]

    def test_stream_defaults_to_file_stem(self, tmp_path):
        one = tmp_path / "uno.jsonl"
        two = tmp_path / "dos.jsonl"
        write_lines(one, [make_trace_record("a", "", "U-a", 10.0)])
        write_lines(two, [make_trace_record("a", "", "D-a", 20.0)])
        out_path = tmp_path / "best.jsonl"
        assert (
            main(["ensemble", "--inputs", str(one), str(two), "--output", str(out_path)])
            == EXIT_OK
        )
        record = json.loads(out_path.read_text())
        assert record["stream"] == "dos"

    def test_intersection_with_warning(self, tmp_path, capsys):
        one = tmp_path / "uno.jsonl"
        two = tmp_path / "dos.jsonl"
        write_lines(
            one,
            [
                make_trace_record("a", "u", "U-a", 10.0),
                make_trace_record("b", "u", "U-b", 10.0),
            ],
        )
        write_lines(two, [make_trace_record("a", "d", "D-a", 20.0)])
        out_path = tmp_path / "best.jsonl"
        assert (
            main(["ensemble", "--inputs", str(one), str(two), "--output", str(out_path)])
            == EXIT_OK
        )
        records = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert [r["doc_id"] for r in records] == ["a"]
        assert "missing 1 docs" in capsys.readouterr().err

    def test_priority_breaks_ties(self, tmp_path):
        one = tmp_path / "uno.jsonl"
        two = tmp_path / "dos.jsonl"
        write_lines(one, [make_trace_record("a", "uno", "U-a", 30.0)])
        write_lines(two, [make_trace_record("a", "dos", "D-a", 30.0)])
        out_path = tmp_path / "best.jsonl"
        rc = main(
            [
                "ensemble",
                "--inputs", str(one), str(two),
                "--priority", "dos,uno",
                "--output", str(out_path),
            ]
        )
        assert rc == EXIT_OK
        assert json.loads(out_path.read_text())["stream"] == "dos"

    def test_single_input_is_usage_error(self, tmp_path):
        one = tmp_path / "uno.jsonl"
        write_lines(one, [make_trace_record("a", "u", "U-a", 10.0)])
        rc = main(
            ["ensemble", "--inputs", str(one), "--output", str(tmp_path / "x.jsonl")]
        )
        assert rc == EXIT_USAGE

    def test_duplicate_doc_in_stream(self, tmp_path):
        one = tmp_path / "uno.jsonl"
        two = tmp_path / "dos.jsonl"
        write_lines(
            one,
            [
                make_trace_record("a", "u", "U-a", 10.0),
                make_trace_record("a", "u", "U-a2", 20.0),
            ],
        )
        write_lines(two, [make_trace_record("a", "d", "D-a", 20.0)])
        rc = main(
            ["ensemble", "--inputs", str(one), str(two), "--output", str(tmp_path / "x.jsonl")]
        )
        assert rc == EXIT_CONFIG


class TestConfig:
    def test_env_interpolation(self, tmp_path, monkeypatch):
        monkeypatch.setenv("APEC_TEST_KEY", "secreto")
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps(
                {
                    "llm": {"api_key": "${APEC_TEST_KEY}", "endpoints": ["${APEC_TEST_KEY}"]},
                    "seed": 7,
                }
            ),
            encoding="utf-8",
        )
        config = load_config(path)
        assert config["llm"]["api_key"] == "secreto"
        assert config["llm"]["endpoints"] == ["secreto"]
        assert config["seed"] == 7

    def test_missing_env_var_warns_and_empties(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("APEC_UNSET_VAR", raising=False)
        path = tmp_path / "config.json"
        path.write_text('{"key": "${APEC_UNSET_VAR}"}', encoding="utf-8")
        config = load_config(path)
        assert config["key"] == ""
        assert "APEC_UNSET_VAR" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{broken", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_non_object(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_none_path_is_empty(self):
        assert load_config(None) == {}

    def test_config_supplies_seed(self, workdir):
        tmp_path, docs_path, train_path = workdir
        config_path = tmp_path / "config.json"
        config_path.write_text('{"seed": 7}', encoding="utf-8")
        flag_out = tmp_path / "flag.jsonl"
        cfg_out = tmp_path / "cfg.jsonl"
        base = [
            "adapt",
            "--input", str(docs_path),
            "--corpus", str(train_path),
            "--mode", "fs-rdm",
            "--k", "2",
            "--provider", "echo",
        ]
        assert main(base + ["--seed", "7", "--output", str(flag_out)]) == EXIT_OK
        rc = main(base + ["--config", str(config_path), "--output", str(cfg_out)])
        assert rc == EXIT_OK
        assert flag_out.read_bytes() == cfg_out.read_bytes()


class TestHelpers:
    def test_read_adaptations_duplicate(self, tmp_path):
        path = tmp_path / "outputs.jsonl"
        write_lines(
            path,
            [
                {"doc_id": "a", "adaptation": "x"},
                {"doc_id": "a", "adaptation": "y"},
            ],
        )
        with pytest.raises(ConfigError):
            read_adaptations(path)

    def test_read_adaptations_needs_text(self, tmp_path):
        path = tmp_path / "outputs.jsonl"
        write_lines(path, [{"doc_id": "a"}])
        with pytest.raises(ConfigError):
            read_adaptations(path)

    def test_write_jsonl_sorts_keys(self, tmp_path):
        path = tmp_path / "x.jsonl"
        write_jsonl(path, [{"b": 1, "a": 2}])
        assert path.read_text(encoding="utf-8") == '{"a": 2, "b": 1}\n'

    def test_unknown_subcommand(self):
        assert main(["inventado"]) == EXIT_USAGE

    def test_no_arguments(self):
        assert main([]) == EXIT_USAGE
