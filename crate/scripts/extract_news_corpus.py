"""Builds data/news_en.txt.gz: one English news sentence per line.

Source: the NewsArticles sample bundled in the tmtoolkit wheel
(tmtoolkit/data/en/NewsArticles.zip, Apache-2.0 package on PyPI).

    pip download --no-deps tmtoolkit==0.12.0 -d /tmp/dl
    python3 scripts/extract_news_corpus.py /tmp/dl/tmtoolkit-0.12.0-py3-none-any.whl
"""
import csv
import gzip
import io
import re
import sys
import zipfile

SENT_SPLIT = re.compile(r'(?<=[.!?])\s+(?=["\'A-Z0-9])')


def main(wheel, out="data/news_en.txt.gz"):
    csv.field_size_limit(1 << 30)
    outer = zipfile.ZipFile(wheel)
    inner = zipfile.ZipFile(io.BytesIO(outer.read("tmtoolkit/data/en/NewsArticles.zip")))
    raw = inner.read("NewsArticles.csv").decode("utf-8", errors="replace")
    seen = set()
    lines = []
    for row in csv.DictReader(io.StringIO(raw)):
        # the sample lost its curly quotes; they survive as '"?'
        text = row["text"].replace('"?', '"').replace("�", "")
        text = " ".join(text.split())
        for sent in SENT_SPLIT.split(text):
            sent = sent.strip()
            if len(sent) < 10 or sent in seen:
                continue
            seen.add(sent)
            lines.append(sent)
    with gzip.open(out, "wt", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
    print(f"{len(lines)} lines -> {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
