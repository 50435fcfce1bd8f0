#!/usr/bin/env python3
# Copyright 2026 The specdec-lab Authors.
# SPDX-License-Identifier: Apache-2.0
"""Writes the bundled desk-scale corpus (plain ASCII bytes).

Short stories from a small stochastic grammar: enough local structure for a
byte-level model to learn, enough branching that the next byte is uncertain.
"""

import argparse
import random

NAMES = ["Ada", "Bram", "Clara", "Dorian", "Edith", "Felix", "Greta", "Hugo", "Ines",
         "Jonas", "Kara", "Lionel", "Mira", "Nils", "Olga", "Pavel", "Quinn", "Rosa",
         "Silas", "Tilda", "Ulrich", "Vera", "Walter", "Yara", "Zeno"]
PLACES = ["the harbour", "the mill", "the old library", "the market", "the orchard",
          "the lighthouse", "the station", "the river bank", "the bakery", "the chapel",
          "the workshop", "the garden", "the bridge", "the inn", "the quarry"]
OBJECTS = ["a lantern", "a letter", "a map", "a basket of apples", "a brass key",
           "a wooden box", "a small dog", "a broken clock", "a loaf of bread", "a red scarf",
           "a bundle of rope", "a jar of honey", "a compass", "a violin", "a ledger"]
ADJ = ["quiet", "cold", "bright", "narrow", "crowded", "empty", "wet", "warm", "dark",
       "windy", "dusty", "busy"]
TIMES = ["In the morning", "At noon", "Late in the evening", "Before dawn", "After supper",
         "On the next day", "That winter", "Some weeks later"]
VERBS_PAST = ["found", "carried", "lost", "mended", "sold", "hid", "opened", "painted",
              "bought", "returned"]
MOTION = ["walked to", "ran to", "rode to", "came back from", "hurried to", "wandered into"]
SAYS = ["said", "asked", "whispered", "replied", "shouted", "muttered"]
LINES = ["Where did you find it?", "We should go home now.", "I have never seen this before.",
         "Is it yours?", "Keep it safe until tomorrow.", "The door was open.",
         "Nobody must know.", "It is getting late.", "Bring it to the mill.",
         "Did you hear the bell?", "Let us wait a little longer."]
WEATHER = ["It was raining.", "The wind was strong.", "The sky was clear.",
           "Snow covered the roofs.", "A thin fog hung over the water.", "The sun was low."]


def sentence(rng, cast):
    kind = rng.random()
    a = rng.choice(cast)
    if kind < 0.25:
        return f"{rng.choice(TIMES)}, {a} {rng.choice(MOTION)} {rng.choice(PLACES)}."
    if kind < 0.45:
        return f"{a} {rng.choice(VERBS_PAST)} {rng.choice(OBJECTS)} near {rng.choice(PLACES)}."
    if kind < 0.65:
        b = rng.choice([c for c in cast if c != a] or cast)
        return f"\"{rng.choice(LINES)}\" {a} {rng.choice(SAYS)} to {b}."
    if kind < 0.78:
        return rng.choice(WEATHER)
    if kind < 0.9:
        place = rng.choice(PLACES)
        return f"{place[0].upper()}{place[1:]} was {rng.choice(ADJ)} and {rng.choice(ADJ)}."
    n = rng.randint(2, 19)
    return f"{a} counted {n} coins and paid {rng.randint(1, n)} of them."


def story(rng, index):
    cast = rng.sample(NAMES, rng.randint(2, 4))
    lines = [f"Chapter {index}.", ""]
    for _ in range(rng.randint(2, 5)):
        lines.append(" ".join(sentence(rng, cast) for _ in range(rng.randint(3, 7))))
        lines.append("")
    return "\n".join(lines)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="corpus.txt")
    parser.add_argument("--bytes", type=int, default=1_500_000)
    parser.add_argument("--seed", type=int, default=20260101)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    parts, size, index = [], 0, 1
    while size < args.bytes:
        text = story(rng, index)
        parts.append(text)
        size += len(text) + 1
        index += 1
    with open(args.out, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(parts))


if __name__ == "__main__":
    main()
