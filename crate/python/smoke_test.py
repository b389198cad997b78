"""Smoke test for the figmine Python extension.

Build and install first:  pip install -e crates/python --no-build-isolation
Then run:                 python python/smoke_test.py
"""

import json
import math
import pathlib
import tempfile

import figmine


def check_stats():
    assert math.isclose(figmine.fisher_exact(3, 1, 1, 3), 34 / 70, rel_tol=1e-12)
    assert figmine.fisher_exact(0, 0, 0, 5) == 1.0
    assert figmine.roc_auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == 0.75
    m = figmine.compute_metrics(8, 2, 9, 1)
    assert math.isclose(m["precision"], 0.8) and math.isclose(m["specificity"], 9 / 11)
    try:
        figmine.roc_auc([0.5, 0.6], [True, True])
    except ValueError:
        pass
    else:
        raise AssertionError("single-class AUC should raise")


def check_text():
    miner = figmine.TextMiner()
    assert len(miner.terms("symptom")) == 15 and len(miner.terms("finding")) == 20
    text = "Denies fever. Chest CT shows bilateral ground glass opacities."
    rows = miner.mine(text)
    assert [(r["term"], r["polarity"]) for r in rows] == [
        ("fever", "negated"),
        ("ground-glass opacification", "positive"),
    ]
    for r in rows:
        assert text[r["start"]:r["end"]] == r["text"]
    assert figmine.normalize_figure_label("Figures 2-4") == [(2, None), (3, None), (4, None)]
    assert figmine.normalize_figure_label("Fig. 1B") == [(1, "b")]


def check_pipeline(tmp):
    corpus = tmp / "corpus"
    ids = figmine.write_demo_corpus(str(corpus))
    article = figmine.parse_bioc((corpus / f"{ids[0]}.xml").read_bytes())
    assert article["pmcid"] == ids[0] and len(article["figures"]) == 2
    linked = figmine.link_figures(article)
    assert linked[0]["figure"]["figure_number"] == 1 and linked[0]["referring_text"]

    image = next((corpus / ids[1]).glob("*_gr1.png"))
    boxes = figmine.split_compound(str(image))
    assert len(boxes) == 4 and all(w >= figmine.MIN_SIDE and h >= figmine.MIN_SIDE for _, _, w, h in boxes)
    # a 2x1 grid of flat panels split by a white gutter
    w, h = 500, 240
    rgb = bytearray()
    for y in range(h):
        for x in range(w):
            v = 255 if 230 <= x < 270 else (40 + (x * 7 + y * 13) % 150)
            rgb += bytes((v, v, v))
    assert figmine.split_pixels(w, h, bytes(rgb), keep_small=True) == [(0, 0, 230, 240), (270, 0, 230, 240)]

    model = figmine.Model.train_synthetic(30, seed=3)
    assert model.classes == ["CT", "CXR", "Other"]
    label, probs = model.predict(str(image))
    assert label in model.classes and math.isclose(sum(probs), 1.0, rel_tol=1e-9)
    again = figmine.Model.from_json(model.to_json())
    assert again.predict(str(image)) == (label, probs)
    feats = figmine.extract_features(str(image))
    assert len(feats) == 21 and again.predict_features(feats) == (label, probs)

    config = tmp / "figmine.toml"
    config.write_text(
        f'output_dir = "out"\n[source]\nmode = "fixture"\nfixture_dir = "corpus"\n'
        f'[articles]\nids = {json.dumps(ids[:2])}\n[cohort]\nlabel = "covid19"\n'
        f'[compare]\nlabel = "influenza"\nids = {json.dumps(ids[2:])}\n[classifier]\ntrain_per_class = 20\n'
    )
    summary = figmine.run_pipeline(str(config), workers=2)
    assert summary["subfigures_after_filter"] == sum(summary["modality_counts"].values()) == 8
    report = figmine.validate_manifest(str(tmp / "out" / "manifest.jsonl"))
    assert report == {"entries": 8, "violations": []}, report


def main():
    check_stats()
    check_text()
    with tempfile.TemporaryDirectory() as d:
        check_pipeline(pathlib.Path(d))
    print(f"figmine {figmine.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
