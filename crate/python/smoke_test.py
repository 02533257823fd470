"""Smoke test for the `stepwise` extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py` from the repository root.
"""

import json
import pathlib
import sys

import stepwise

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"
PATH = "most_greater_eq { all_rows ; to par ; 9 }"


def main() -> int:
    table = stepwise.Table.parse((FIXTURES / "us_open_1938.json").read_text(), "json")
    assert len(table) == 10 and table.header[4] == "to par"
    assert stepwise.canonical_path("most_greater_eq{all_rows;to par;9}") == PATH
    assert stepwise.typecheck(table, PATH) == "bool"
    assert stepwise.evaluate(table, PATH) is True
    assert stepwise.evaluate(table, "count { all_rows }") == 10.0
    assert stepwise.evaluate(table, "hop { argmax { all_rows ; money } ; player }") == "ralph guldahl"

    paths = stepwise.search(table, beam_size=10, num_paths=3, max_depth=3)
    assert len(paths) == 3 and paths == stepwise.search(table, beam_size=10, num_paths=3, max_depth=3)
    for path, _score in paths:
        assert stepwise.evaluate(table, path) is True

    small = stepwise.Table.parse("name,pts\nann,3\nbo,5\n")
    assert "all_greater_eq { all_rows ; pts ; 3 }" in stepwise.enumerate_paths(small, 1)

    graph = (FIXTURES / "antwerp.graph").read_text()
    out = stepwise.summarize_graph(graph)
    kinds = [step["kind"] for step in out["trace"]]
    assert kinds.count("surface_realization") == 4 and kinds.count("fusion") == 3
    assert out["calls"]["sr_triple"] == 4
    assert out == stepwise.summarize_graph(graph)

    prompt = stepwise.render_prompt("fusion", {"sent1": "A.", "sent2": "B."})
    assert prompt.endswith("First Sentence: A.\nSecond Sentence: B.\nCombined Sentence:")

    assert stepwise.bleu_n(["a b c d"], [["a b c e"]], 1) == 0.75

    try:
        stepwise.evaluate(table, "nope { all_rows }")
    except stepwise.StepwiseError as e:
        assert "UnknownModule" in str(e)
    else:
        raise AssertionError("expected StepwiseError")

    print(json.dumps({"paths": paths, "summary": out["text"]}, indent=2))
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
