#!/usr/bin/env python3
"""Regenerate the synthetic fixture corpus. Output is deterministic."""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent
DIM = 50

LABELS = ["BACKGROUND", "USES", "COMPARES_CONTRASTS", "MOTIVATION", "EXTENSION", "FUTURE"]
CUES = {
    "BACKGROUND": ["established", "widely", "known", "foundational", "classic"],
    "USES": ["use", "adopt", "employ", "implementation", "toolkit"],
    "COMPARES_CONTRASTS": ["compared", "unlike", "whereas", "contrast", "outperforms"],
    "MOTIVATION": ["inspired", "motivated", "gap", "lacking", "need"],
    "EXTENSION": ["extend", "build", "augment", "generalize", "adapt"],
    "FUTURE": ["future", "plan", "later", "remains", "open"],
}
LABEL_SECTION = {
    "BACKGROUND": "Introduction",
    "USES": "Methods",
    "COMPARES_CONTRASTS": "Results",
    "MOTIVATION": "Introduction",
    "EXTENSION": "Methods",
    "FUTURE": "Discussion",
}
FILLER = (
    "the a this our model data corpus graph network method parser tagger "
    "sentence token feature layer system task paper work approach analysis "
    "annotation dataset text language citation classifier training"
).split()
SURNAMES = [
    "Smith", "Garcia", "Chen", "Okafor", "Novak", "Larsen", "Tanaka", "Moreau",
    "Rossi", "Kowalski", "Haddad", "Silva", "Petrov", "Nguyen", "Fischer",
]
YEARS = [str(y) for y in range(2005, 2020)]
FILLER_SENTENCES = [
    "The corpus contains many documents.",
    "We describe the setting below.",
    "Each document is tokenized first.",
    "The vocabulary is built from training data.",
    "Table 1 lists the statistics.",
    "All runs use the same settings.",
    "Errors are analysed by hand.",
    "The remaining details follow.",
]


def words(rng, k):
    return [rng.choice(FILLER) for _ in range(k)]


def purpose_context(rng, label, surname, year):
    cue = rng.sample(CUES[label], 2)
    parts = words(rng, 2) + [cue[0]] + words(rng, 2) + [cue[1]] + words(rng, 1)
    parts[0] = parts[0].capitalize()
    return " ".join(parts) + f" {surname} ({year})."


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def write_vectors(path, vocab, rng):
    with path.open("w") as f:
        for tok in sorted(vocab):
            vals = " ".join(f"{rng.gauss(0.0, 0.3):.4f}" for _ in range(DIM))
            f.write(f"{tok} {vals}\n")


def tokens(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def main_corpus():
    rng = random.Random(20240601)
    records, docs = [], {}
    for p in range(1, 7):
        paper = f"p{p}"
        by_section = {"Introduction": [], "Methods": [], "Results": [], "Discussion": []}
        for k in range(10):
            label = LABELS[(k + p) % 6]
            surname = SURNAMES[(p * 10 + k) % len(SURNAMES)]
            year = rng.choice(YEARS)
            ctx = purpose_context(rng, label, surname, year)
            records.append({
                "record_id": f"{paper}-{k:02d}",
                "citing_paper_id": paper,
                "citing_title": f"Citation analysis of {rng.choice(FILLER)} {rng.choice(FILLER)} corpora",
                "citing_author": "Doe",
                "cited_title": f"A {rng.choice(FILLER)} {rng.choice(FILLER)} study",
                "cited_author": f"{rng.choice('ABCDEJ')}. {surname}",
                "citation_context": ctx,
                "label": label,
            })
            by_section[LABEL_SECTION[label]].append(ctx)
            if k % 3 == 0:
                by_section["Discussion"].append(f"We return to the findings of {surname} here.")
        lines = ["Abstract", f"This paper studies citation behaviour in collection {p}. It is short.", ""]
        for n, (section, sentences) in enumerate(by_section.items(), start=1):
            body = []
            for s in sentences:
                body.append(rng.choice(FILLER_SENTENCES))
                body.append(s)
            body.append(rng.choice(FILLER_SENTENCES))
            lines += [f"{n} {section}", " ".join(body), ""]
        docs[paper] = "\n".join(lines)
    return records, docs


def worthiness(rng):
    rows = []
    for i in range(300):
        body = words(rng, 6)
        body[0] = body[0].capitalize()
        if i % 2 == 0:
            s = " ".join(body[:3]) + f" as shown by {rng.choice(SURNAMES)} et al. ({rng.choice(YEARS)}) " + " ".join(body[3:]) + "."
            rows.append({"sentence": s, "has_citation": True})
        else:
            s = " ".join(body) + " in this setting."
            rows.append({"sentence": s, "has_citation": False})
    return rows


SECTION_CUES = {
    "introduction": ["introduce", "overview", "goal", "address"],
    "methods": ["trained", "parameters", "optimizer", "procedure"],
    "results": ["accuracy", "table", "score", "improves"],
    "discussion": ["suggests", "implications", "interpret", "limitations"],
    "related_work": ["prior", "previous", "approaches", "earlier"],
    "conclusion": ["conclusion", "presented", "summary", "overall"],
    "other": ["acknowledge", "funding", "grant", "thank"],
}


def sections(rng):
    rows = []
    names = list(SECTION_CUES)
    for i in range(301):
        label = names[i % len(names)]
        body = words(rng, 4) + rng.sample(SECTION_CUES[label], 2) + words(rng, 2)
        rng.shuffle(body)
        body[0] = body[0].capitalize()
        rows.append({"sentence": " ".join(body) + ".", "section_label": label})
    return rows


# Labels depend only on whether a contrast entry occurs; each citing paper
# uses its own entry so a grouped split sees unseen entries at validation.
CONTRAST = ["recently", "recent", "compared", "comparison", "similar", "studies", "reported",
            "others", "normally", "showed", "in line with", "despite", "relationship"]
NEAR_MISS = ["recentness", "latest", "comparing", "comparisons", "similarly", "study", "reporting",
             "other", "normal", "shows", "in keeping with", "spite", "relation"]
ABL_FILLER = (
    "results method corpus parser graph signal values model baseline metric scores "
    "dataset features approach trend effect sample measure pattern outcome"
).split()


def ablation_corpus():
    rng = random.Random(777)
    flat = set(w for e in CONTRAST for w in e.split())
    assert not flat & set(ABL_FILLER)
    assert not flat & set(w for e in NEAR_MISS for w in e.split()) - {"in", "with"}
    rows = []
    for p, (entry, miss) in enumerate(zip(CONTRAST, NEAR_MISS), start=1):
        paper = f"a{p:02d}"
        for k in range(12):
            positive = k % 2 == 0
            body = [rng.choice(ABL_FILLER) for _ in range(6)]
            body.insert(rng.randrange(1, 6), entry if positive else miss)
            body[0] = body[0].capitalize()
            rows.append({
                "record_id": f"{paper}-{k:02d}",
                "citing_paper_id": paper,
                "citing_title": "Signal processing notes",
                "citing_author": "Roe",
                "cited_title": "Graph theory primer",
                "cited_author": rng.choice(SURNAMES),
                "citation_context": " ".join(body) + ".",
                "label": "COMPARES_CONTRASTS" if positive else "BACKGROUND",
            })
    return rows


def main():
    records, docs = main_corpus()
    write_jsonl(ROOT / "citations.jsonl", records)
    ft = ROOT / "fulltext"
    ft.mkdir(exist_ok=True)
    for paper, text in docs.items():
        (ft / f"{paper}.txt").write_text(text)
    rng = random.Random(99)
    w = worthiness(rng)
    s = sections(rng)
    write_jsonl(ROOT / "worthiness.jsonl", w)
    write_jsonl(ROOT / "sections.jsonl", s)

    vocab = set()
    for r in records:
        vocab.update(tokens(r["citation_context"]))
    for text in docs.values():
        vocab.update(tokens(text))
    for row in w + s:
        vocab.update(tokens(row["sentence"]))
    # a few words stay out of the table so the UNK path is exercised
    oov = {"remaining", "statistics", "hand"}
    write_vectors(ROOT / "vectors.txt", vocab - oov, random.Random(5))

    config = {
        "citations": "citations.jsonl",
        "fulltext_dir": "fulltext",
        "worthiness": "worthiness.jsonl",
        "sections": "sections.jsonl",
        "word_vectors": "vectors.txt",
        "output_dir": "out",
        "seed": 13,
        "val_fraction": 0.34,
        "scaffold_val_fraction": 0.2,
        "train": {
            "h_lstm": 16,
            "hidden": 32,
            "d_trainable": 8,
            "batch_size": 8,
            "max_epochs": 30,
            "patience": 10,
            "learning_rate": 0.005,
            "dropout": 0.2,
        },
    }
    (ROOT / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    abl = ROOT / "ablation"
    abl.mkdir(exist_ok=True)
    rows = ablation_corpus()
    write_jsonl(abl / "citations.jsonl", rows)
    av = set()
    for r in rows:
        av.update(tokens(r["citation_context"]))
    write_vectors(abl / "vectors.txt", av, random.Random(6))
    abl_config = {
        "citations": "citations.jsonl",
        "word_vectors": "vectors.txt",
        "output_dir": "out",
        "seed": 3,
        "val_fraction": 0.3,
        "train": {
            "loss_weights": {"purpose": 1.0, "worthiness": 0.0, "section": 0.0},
            "h_lstm": 8,
            "hidden": 16,
            "d_trainable": 4,
            "batch_size": 16,
            "max_epochs": 40,
            "patience": 8,
            "learning_rate": 0.01,
            "dropout": 0.0,
        },
    }
    (abl / "config.json").write_text(json.dumps(abl_config, indent=2) + "\n")


if __name__ == "__main__":
    main()
