"""Smoke test for the `lir` extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/lir-*.whl
    python python/smoke_test.py
"""

import json
import math
import os
import tempfile

import lir


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    u, sigma, v = lir.svd([[3.0, 0.0], [0.0, 4.0]])
    assert close(sigma, [4.0, 3.0])

    c = [[0.6], [0.8]]
    assert close(lir.project_out([1.2, 1.6], c), [0.0, 0.0])
    assert close(lir.project_out_paper([1.2, 1.6], c), [0.6, 0.8])

    assert abs(lir.average_precision(["r1", "x", "r2"], {"r1", "r2"}) - 5 / 6) < 1e-15

    data = lir.generate(seed=42, topics=20, per_topic_per_lang=6, dim=32)
    bases = lir.fit_all(data["records"], 1)
    assert sorted(bases) == ["ar", "de", "en", "zh"]
    for lang, basis in bases.items():
        truth = data["ground_truth"][lang]
        col = basis.column(0)
        cos = sum(a * b for a, b in zip(col, truth)) / math.sqrt(sum(t * t for t in truth))
        assert abs(cos) > 0.95, (lang, cos)

    before = json.loads(lir.evaluate_retrieval(data["queries"], data["candidates"], data["qrels"]))
    after = json.loads(
        lir.evaluate_retrieval(data["queries"], data["candidates"], data["qrels"], bases=bases)
    )
    assert after["overall_map"] - before["overall_map"] >= 0.3, (before["overall_map"], after["overall_map"])

    cleaned, skipped = lir.remove_batch(data["records"], bases)
    assert len(cleaned) == len(data["records"]) and not skipped
    first = data["records"][0]
    assert lir.remove(first, bases[first.lang]) == cleaned[0]

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "en.lirc")
        lir.write_components(path, bases["en"])
        loaded = lir.read_components(path)
        assert loaded.rank == 1 and close(loaded.column(0), bases["en"].column(0), 1e-6)
        epath = os.path.join(tmp, "en.jsonl")
        en = [r for r in data["records"] if r.lang == "en"]
        lir.write_embeddings(epath, en)
        assert [r.id for r in lir.read_embeddings(epath)] == [r.id for r in en]

    try:
        lir.fit_components(data["records"][:3], 4)
    except lir.LirError as e:
        assert "rank 4 out of range" in str(e)
    else:
        raise AssertionError("expected LirError")

    print(f"ok: MAP {before['overall_map']:.4f} -> {after['overall_map']:.4f}")


if __name__ == "__main__":
    main()
