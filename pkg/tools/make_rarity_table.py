"""Regenerate src/sightline/data/word_frequency.tsv.

Needs the ``wordfreq`` package, which is not a runtime dependency.
"""
import re
import sys
from pathlib import Path

from wordfreq import top_n_list, word_frequency

N = int(sys.argv[1]) if len(sys.argv) > 1 else 4000
OUT = Path(__file__).resolve().parents[1] / "src" / "sightline" / "data" / "word_frequency.tsv"

words = [w for w in top_n_list("en", N * 2) if re.fullmatch(r"[a-z]+", w)][:N]
with OUT.open("w") as fh:
    fh.write("# word\tfrequency (per word of running English text)\n")
    for w in words:
        fh.write(f"{w}\t{word_frequency(w, 'en'):.3e}\n")
print(f"wrote {len(words)} entries to {OUT}")
