#!/usr/bin/env python3
"""Writes the toy corpus under data/toy/. Deterministic for a fixed seed."""
import json
import math
import random
import sys
from pathlib import Path

TOPICS = {
    "sports": ["football", "goal", "team", "league", "cup", "season", "player", "score"],
    "geography": ["city", "river", "country", "population", "capital", "mountain", "area", "region"],
    "music": ["album", "song", "band", "chart", "singer", "release", "track", "label"],
    "science": ["element", "atomic", "mass", "planet", "orbit", "moon", "chemical", "energy"],
    "transport": ["car", "train", "station", "line", "route", "bus", "airport", "speed"],
}
FILLER = ["the", "of", "and", "list", "table", "year", "total", "name", "number", "rank"]
DIM = 8


def main(out: Path, seed: int = 2024) -> None:
    rng = random.Random(seed)
    names = list(TOPICS)
    out.mkdir(parents=True, exist_ok=True)

    centroid = {t: [rng.gauss(0, 1) for _ in range(DIM)] for t in names}
    vectors = {}
    for t, words in TOPICS.items():
        for w in words:
            vectors[w] = [c + 0.6 * rng.gauss(0, 1) for c in centroid[t]]
    for w in FILLER:
        vectors[w] = [0.4 * rng.gauss(0, 1) for _ in range(DIM)]
    with open(out / "vectors.vec", "w") as f:
        f.write(f"{len(vectors)} {DIM}\n")
        for w, v in vectors.items():
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"] + list(vectors)
    vocab += [w.capitalize() for w in vectors]
    for c in "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789":
        vocab += [c, "##" + c]
    vocab += list("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
    unique = list(dict.fromkeys(vocab))
    (out / "vocab.txt").write_text("\n".join(unique) + "\n")

    def phrase(topic, n):
        return " ".join(
            rng.choice(TOPICS[topic]) if rng.random() < 0.7 else rng.choice(FILLER)
            for _ in range(n))

    tables = []
    for t in names:
        for k in range(4):
            ncol = rng.randint(2, 4)
            # Every other table is long enough to overflow a 128-token input.
            nrow = rng.randint(2, 8) if k % 2 == 0 else rng.randint(20, 40)
            headers = [rng.choice(TOPICS[t]).capitalize() for _ in range(ncol)]
            rows = []
            for _ in range(nrow):
                row = []
                for _ in range(ncol):
                    x = rng.random()
                    if x < 0.3:
                        row.append(str(rng.randint(1, 2000)))
                    elif x < 0.4:
                        row.append("")
                    elif x < 0.55:
                        row.append(phrase(rng.choice(names), rng.randint(1, 3)))
                    else:
                        row.append(phrase(t, rng.randint(1, 3)))
                rows.append(row)
            tables.append({
                "id": f"{t}-{k}",
                "caption": phrase(t, rng.randint(2, 5)).capitalize(),
                "page_title": phrase(t, 2).title(),
                "section_title": phrase(t, 1).title(),
                "headers": headers,
                "rows": rows,
            })
    with open(out / "tables.jsonl", "w") as f:
        for table in tables:
            f.write(json.dumps(table) + "\n")

    queries = []
    for ti, t in enumerate(names):
        for k in range(2):
            text = " ".join(rng.sample(TOPICS[t], rng.randint(2, 3)))
            queries.append((str(ti * 2 + k + 1), t, text))
    with open(out / "queries.tsv", "w") as f:
        for qid, _, text in queries:
            f.write(f"{qid}\t{text}\n")

    qrels, features = [], []
    for qid, t, text in queries:
        same = [tb for tb in tables if tb["id"].startswith(t + "-")]
        other = [tb for tb in tables if not tb["id"].startswith(t + "-")]
        judged = list(zip(same, rng.sample([2, 1, 1, 0], 4)))
        judged += [(tb, 0) for tb in rng.sample(other, 2)]
        terms = set(text.split())
        for tb, grade in judged:
            qrels.append(f"{qid} 0 {tb['id']} {grade}")
            cells = [c for r in tb["rows"] for c in r]
            words = " ".join([tb["caption"], tb["page_title"], tb["section_title"]]
                             + tb["headers"] + cells).lower().split()
            overlap = sum(w in terms for w in words)
            # Roughly one pair in ten has no additional features.
            if rng.random() < 0.9:
                features.append(f"{qid},{tb['id']},{overlap},{len(tb['rows'])},"
                                f"{math.log1p(len(words)):.6f}")
    (out / "qrels.txt").write_text("\n".join(qrels) + "\n")
    (out / "features.csv").write_text("qid,table_id,f1,f2,f3\n" + "\n".join(features) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "toy")
