#!/usr/bin/env python3
"""Regenerates the bundled TSV fixtures in data/.

sentiment.tsv: short templated review sentences, label 1 = positive.
paraphrase.tsv: sentence pairs, label 1 = the second rewords the first.

Both are built from fixed word lists with a fixed seed, so rerunning the
script reproduces the committed files byte for byte.
"""
import argparse
import random
from pathlib import Path

SUBJECTS = ["the film", "this movie", "the story", "the acting", "the script", "the soundtrack",
            "the director's work", "the cast", "the ending", "the plot", "the dialogue", "the pacing",
            "the cinematography", "this sequel", "the lead performance", "the humor", "the visuals",
            "the premise", "the final act", "the characters"]
POSITIVE = ["wonderful", "moving", "brilliant", "charming", "gripping", "delightful", "sharp", "funny",
            "beautiful", "clever", "heartfelt", "memorable", "engaging", "stunning", "smart", "warm",
            "inventive", "touching", "superb", "lively"]
NEGATIVE = ["dull", "tedious", "clumsy", "bland", "forgettable", "messy", "boring", "flat", "shallow",
            "predictable", "lifeless", "awkward", "tiresome", "hollow", "sloppy", "weak", "stale",
            "confusing", "grating", "joyless"]
INTENSIFIERS = ["", "", "", "really ", "truly ", "quite ", "rather ", "surprisingly ", "genuinely "]
TAILS = ["", "", "", " from start to finish", " for most of its running time", " despite a slow start",
         " in every scene", " at least to me", " , as expected", " , sadly", " , thankfully"]
FILLERS = ["honestly", "overall", "in the end", "all things considered", "to be fair", "frankly"]


def sentiment_rows(rng, n, noise):
    rows = []
    for _ in range(n):
        label = rng.randint(0, 1)
        negate = rng.random() < 0.25
        # "not <negative word>" reads positive and vice versa.
        pool = NEGATIVE if (label == 1) == negate else POSITIVE
        word = rng.choice(pool)
        subject = rng.choice(SUBJECTS)
        verb = rng.choice(["is", "was", "feels", "seems"])
        adj = ("not " if negate else "") + rng.choice(INTENSIFIERS) + word
        text = f"{subject} {verb} {adj}{rng.choice(TAILS)}"
        if rng.random() < 0.3:
            text = f"{rng.choice(FILLERS)} , {text}"
        if rng.random() < 0.35:
            other = rng.choice(SUBJECTS)
            mixed = rng.choice(POSITIVE + NEGATIVE)
            text += f" but {other} is {mixed}"
        if rng.random() < noise:
            label = 1 - label
        rows.append((str(label), text))
    return rows


NOUNS = ["company", "council", "team", "court", "bank", "school", "hospital", "museum", "studio", "agency",
         "airline", "union", "committee", "library", "university", "startup", "newspaper", "factory"]
ACTIONS = [("announced", "revealed"), ("approved", "signed off on"), ("rejected", "turned down"),
           ("delayed", "postponed"), ("expanded", "grew"), ("cancelled", "called off"),
           ("launched", "rolled out"), ("reviewed", "examined"), ("funded", "paid for"),
           ("criticized", "faulted"), ("bought", "acquired"), ("closed", "shut down")]
OBJECTS = ["the new plan", "its budget", "the merger", "a research program", "the contract",
           "the proposal", "a hiring freeze", "the project", "an audit", "the policy", "its report",
           "a pilot scheme", "the renovation", "the deal"]
TIMES = ["on monday", "last week", "this morning", "in march", "after a long debate", "on friday",
         "late last year", "earlier today"]


def paraphrase_rows(rng, n, noise):
    rows = []
    for _ in range(n):
        noun = rng.choice(NOUNS)
        action = rng.choice(ACTIONS)
        obj = rng.choice(OBJECTS)
        when = rng.choice(TIMES)
        first = f"the {noun} {action[0]} {obj} {when}"
        label = rng.randint(0, 1)
        if label == 1:
            style = rng.randint(0, 2)
            if style == 0:
                second = f"{when} the {noun} {action[1]} {obj}"
            elif style == 1:
                second = f"{obj} was {action[0]} by the {noun} {when}"
            else:
                second = f"the {noun} {action[1]} {obj} {when}"
        else:
            style = rng.randint(0, 2)
            if style == 0:
                other = rng.choice([a for a in ACTIONS if a != action])
                second = f"the {noun} {rng.choice(other)} {obj} {when}"
            elif style == 1:
                other = rng.choice([o for o in OBJECTS if o != obj])
                second = f"the {noun} {action[1]} {other} {when}"
            else:
                other = rng.choice([x for x in NOUNS if x != noun])
                second = f"the {other} {action[0]} {obj} {rng.choice(TIMES)}"
        if rng.random() < noise:
            label = 1 - label
        rows.append((str(label), first, second))
    return rows


def write(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(header) + "\n")
        for r in rows:
            f.write("\t".join(r) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=2022)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    write(out / "sentiment.tsv", ["label", "sentence"], sentiment_rows(rng, 2000, 0.08))
    write(out / "paraphrase.tsv", ["label", "sentence1", "sentence2"], paraphrase_rows(rng, 800, 0.08))


if __name__ == "__main__":
    main()
