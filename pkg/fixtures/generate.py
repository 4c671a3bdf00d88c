"""Regenerate the toy corpora shipped with the repository.

The fixtures are committed; this script exists so they can be rebuilt
deterministically if the recipe ever needs to change.  Run from the
repository root:

    python3 fixtures/generate.py
"""

import json
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).parent

WORDS = [
    "sunshine", "dragon", "monkey", "shadow", "princess", "football",
    "master", "killer", "pepper", "ginger", "summer", "winter", "purple",
    "orange", "silver", "golden", "cookie", "banana", "flower", "tiger",
    "rocket", "guitar", "castle", "bridge", "planet", "forest", "breeze",
    "thunder", "velvet", "marble", "copper", "falcon", "pirate", "wizard",
]

NAMES = [
    "alex", "maria", "david", "laura", "kevin", "sofia", "james", "elena",
    "peter", "nadia", "oscar", "irene", "felix", "diana", "simon", "clara",
]

LEET = {"a": "@", "e": "3", "i": "1", "o": "0", "s": "$"}


def word_style(rng: np.random.Generator) -> str:
    word = WORDS[rng.integers(len(WORDS))]
    if rng.random() < 0.3:
        word = word.capitalize()
    if rng.random() < 0.15:
        word = "".join(LEET.get(c, c) for c in word)
    digits = "".join(str(d) for d in rng.integers(0, 10, size=rng.integers(1, 5)))
    suffix = "!" if rng.random() < 0.12 else ""
    return word + digits + suffix


def name_style(rng: np.random.Generator) -> str:
    name = NAMES[rng.integers(len(NAMES))]
    year = str(rng.integers(1970, 2010))
    sep = rng.choice(["", "_", "."])
    return name + sep + year


def digit_style(rng: np.random.Generator) -> str:
    return "".join(str(d) for d in rng.integers(0, 10, size=rng.integers(6, 10)))


def keyboard_style(rng: np.random.Generator) -> str:
    runs = ["qwerty", "asdfgh", "zxcvbn", "123456", "1q2w3e", "qazwsx"]
    base = runs[rng.integers(len(runs))]
    return base + str(rng.integers(0, 100))


def draw(rng: np.random.Generator, styles, probs) -> str:
    style = styles[rng.choice(len(styles), p=probs)]
    return style(rng)


def main() -> None:
    rng = np.random.default_rng(20240501)
    demo = [draw(rng, [word_style, name_style, digit_style, keyboard_style],
                 [0.55, 0.2, 0.15, 0.1]) for _ in range(2400)]
    # Sprinkle in lines the ingest filter should reject.
    demo[100] = "abc"
    demo[500] = "hi"
    demo[900] = "x" * 40
    demo[1300] = "cafélatte"
    demo[1700] = "tab\tseparated"
    (HERE / "demo_corpus.txt").write_bytes(
        ("\n".join(demo) + "\n").encode("utf-8"))

    rng = np.random.default_rng(20240502)
    leak = [draw(rng, [name_style, digit_style, word_style],
                 [0.5, 0.35, 0.15]) for _ in range(800)]
    (HERE / "leak_corpus.txt").write_bytes(
        ("\n".join(leak) + "\n").encode("utf-8"))

    rng = np.random.default_rng(20240503)
    test = [draw(rng, [word_style, name_style, digit_style, keyboard_style],
                 [0.55, 0.2, 0.15, 0.1]) for _ in range(200)]
    (HERE / "test_corpus.txt").write_bytes(
        ("\n".join(test) + "\n").encode("utf-8"))

    config = {
        "layers": 2,
        "embed_dim": 32,
        "intermediate_dim": 64,
        "heads": 2,
        "vocab_size": 100,
        "max_positions": 34,
    }
    (HERE / "tiny_config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
