"""Smoke test for the resistkit Python extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke.py
"""

import json
import pathlib

import resistkit

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def main():
    lin4 = resistkit.Predicate.named("lin4")
    assert lin4.arity == 4
    assert lin4.is_even()
    assert lin4.density() == 0.5
    assert lin4.fourier() == [([], "1/2"), ([0, 1, 2, 3], "-1/2")]
    assert lin4.relevant_sets() == [[0, 1, 2, 3]]

    from_file = resistkit.Predicate.from_json((DATA / "lin4.json").read_text())
    assert from_file.to_json() == lin4.to_json()

    glst = resistkit.Predicate.named("glst")
    assert not glst.is_even()

    graphs = [json.loads(g) for g in resistkit.enumerate_graphs([0, 1], 4)]
    assert [len(g["edges"]) for g in graphs] == [1, 3]

    assert resistkit.isserlis([[1, 0.5], [0.5, 1]], [0, 1]) == 0.5
    assert resistkit.isserlis([[1, 0.5], [0.5, 1]], [0, 0, 1]) == 0.0

    verdict, cert = resistkit.search(lin4, 4)
    assert verdict == "primal"
    report = json.loads(resistkit.validate(lin4, cert))
    assert report["valid"] and report["exact"]

    verdict, sep = resistkit.search(resistkit.Predicate.named("nae3"), 1)
    assert verdict == "dual"
    assert json.loads(sep)["margin"] >= 1 / 3 - 1e-6

    test = json.loads(resistkit.dict_test(lin4, cert, "1/10", "dictator:3:1"))
    assert test["exact_probability"] == "19/20"

    code, text = resistkit.run_cli(["analyze", "--predicate", str(DATA / "nae3.json")])
    assert code == 0 and json.loads(text)["density"] == "3/4"
    code, _ = resistkit.run_cli(["analyze", "--predicate", str(DATA / "malformed.json")])
    assert code != 0

    print("smoke ok")


if __name__ == "__main__":
    main()
