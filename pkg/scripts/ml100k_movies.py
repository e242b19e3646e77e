"""Convert MovieLens 100k ``u.item`` into a ``movies.dat`` style file.

    python scripts/ml100k_movies.py /path/to/ml-100k/u.item /path/to/ml-100k/movies.dat

The output has one ``id::Title (Year)::Genre|Genre`` row per movie, the format
read by ``carousel_eval.data.parse_item_features``.
"""

import argparse
from pathlib import Path

# column order of the 19 genre flags in u.item (see u.genre)
GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def convert(lines):
    for line in lines:
        fields = line.rstrip("\n").split("|")
        if len(fields) < 5 + len(GENRES):
            continue
        flags = fields[-len(GENRES):]
        genres = [g for g, flag in zip(GENRES, flags) if flag == "1" and g != "unknown"]
        yield f"{fields[0]}::{fields[1]}::{'|'.join(genres) or '(no genres listed)'}\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("u_item", type=Path)
    parser.add_argument("out", type=Path)
    args = parser.parse_args()
    text = args.u_item.read_text(encoding="latin-1")
    args.out.write_text("".join(convert(text.splitlines())), encoding="utf-8")


if __name__ == "__main__":
    main()
