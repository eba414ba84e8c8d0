#!/usr/bin/env python3
"""Generate the bundled synthetic relatedness data.

Each pair is built from two small bags of content words; the score is the
Jaccard overlap of the bags, rounded to two decimals. The Afrikaans-flavoured
copy of the test split substitutes every word through a fixed lexicon, and
the lexicon is written out as a translation table so the translate-then-score
path can run offline.
"""

import random
from pathlib import Path

SUBJECTS = ["man", "woman", "child", "dog", "cat", "farmer", "teacher", "bird"]
VERBS = ["eats", "watches", "carries", "paints", "finds", "cleans", "sells", "builds"]
OBJECTS = ["apple", "house", "boat", "bread", "garden", "table", "letter", "river"]
PLACES = ["market", "school", "forest", "kitchen", "harbour", "village", "station", "field"]

LEXICON = {
    "the": "die", "a": "n", "in": "in", "near": "naby",
    "man": "man", "woman": "vrou", "child": "kind", "dog": "hond", "cat": "kat",
    "farmer": "boer", "teacher": "onderwyser", "bird": "voel",
    "eats": "eet", "watches": "kyk", "carries": "dra", "paints": "verf",
    "finds": "vind", "cleans": "maak", "sells": "verkoop", "builds": "bou",
    "apple": "appel", "house": "huis", "boat": "boot", "bread": "brood",
    "garden": "tuin", "table": "tafel", "letter": "brief", "river": "rivier",
    "market": "mark", "school": "skool", "forest": "woud", "kitchen": "kombuis",
    "harbour": "hawe", "village": "dorp", "station": "stasie", "field": "veld",
}


def sentence(parts, prep):
    s, v, o, p = parts
    return f"The {s} {v} a {o} {prep} the {p}."


def make_pair(rng):
    a = [rng.choice(SUBJECTS), rng.choice(VERBS), rng.choice(OBJECTS), rng.choice(PLACES)]
    keep = rng.randint(0, 4)
    b = list(a)
    pools = [SUBJECTS, VERBS, OBJECTS, PLACES]
    for slot in rng.sample(range(4), 4 - keep):
        choices = [w for w in pools[slot] if w != a[slot]]
        b[slot] = rng.choice(choices)
    shared = len(set(a) & set(b))
    score = round(shared / len(set(a) | set(b)), 2)
    return sentence(a, rng.choice(["in", "near"])), sentence(b, rng.choice(["in", "near"])), score


def fmt(score):
    # Shortest round-trip form, integers without a fraction.
    text = repr(score)
    return text[:-2] if text.endswith(".0") else text


def quote(s):
    return '"' + s.replace('"', '""') + '"'


def write(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("pair_id,sentence_1,sentence_2,score\n")
        for pid, s1, s2, score in rows:
            f.write(f"{pid},{quote(s1)},{quote(s2)},{fmt(score)}\n")


def to_afr(s):
    words = s[:-1].split(" ")
    out = " ".join(LEXICON[w.lower()] for w in words) + "."
    return out[0].upper() + out[1:]


def main():
    rng = random.Random(20240613)
    out = Path(__file__).resolve().parent.parent / "data" / "synthetic"
    out.mkdir(parents=True, exist_ok=True)
    seen = set()
    rows = []
    while len(rows) < 240:
        s1, s2, score = make_pair(rng)
        if (s1, s2) in seen:
            continue
        seen.add((s1, s2))
        rows.append((f"SYN-{len(rows) + 1:04d}", s1, s2, float(score)))
    write(out / "train.csv", rows[:160])
    write(out / "dev.csv", rows[160:200])
    write(out / "test.csv", rows[200:])

    afr_rows = [(pid.replace("SYN", "AFR"), to_afr(s1), to_afr(s2), sc) for pid, s1, s2, sc in rows[200:]]
    write(out / "afr_test.csv", afr_rows)
    table = {}
    for (_, a1, a2, _), (_, e1, e2, _) in zip(afr_rows, rows[200:]):
        table[a1] = e1
        table[a2] = e2
    with open(out / "afr_eng_table.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("source,target\n")
        for src in sorted(table):
            f.write(f"{quote(src)},{quote(table[src])}\n")

    with open(out / "semrel_sample.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("PairID,Text,Score\n")
        for pid, s1, s2, sc in rows[:20]:
            f.write(f"{pid.replace('SYN', 'ENG-train')},{quote(s1 + chr(10) + s2)},{fmt(sc)}\n")


if __name__ == "__main__":
    main()
