#!/usr/bin/env python3
"""Generate the synthetic fixtures under data/fixtures.

Everything is derived from a fixed seed, so rerunning reproduces the
committed files byte for byte. Each fixture is cross-checked here with
small independent reimplementations of the keyword and fuzzy rules before
it is written.
"""

import csv
import io
import json
import math
import random
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "fixtures"
KEYWORDS = ROOT / "data" / "keywords" / "county_default.txt"

MOCK_SEEDS = ["caucasian", "negro", "negroes", "mongolian", "mongolians", "ethiopian", "ethiopians", "malay",
              "malays", "mulatto", "african", "asiatic", "hindu", "japanese", "chinese"]


def load_keywords():
    terms = []
    for line in KEYWORDS.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            terms.append(normalize(line))
    return terms


def normalize(s):
    return " ".join(s.lower().split())


def trigram_set(word, n=3):
    if len(word) < n:
        return {word}
    return {word[i:i + n] for i in range(len(word) - n + 1)}


def cosine(a, b):
    ga, gb = trigram_set(a), trigram_set(b)
    return len(ga & gb) / math.sqrt(len(ga) * len(gb))


def jaccard(a, b):
    ga, gb = trigram_set(a), trigram_set(b)
    return len(ga & gb) / len(ga | gb)


def words(s):
    return re.findall(r"[0-9a-zÀ-ɏ]+", s)


def keyword_hits(text, terms):
    t = normalize(text)
    return sorted({term for term in terms if term in t})


def fuzzy_hits(text, terms, threshold=0.75):
    singles = [t for t in terms if " " not in t]
    out = []
    for w in words(normalize(text)):
        best = max(cosine(w, t) for t in singles)
        if best > threshold:
            out.append(w)
    return out


def mock_hits(text):
    ws = set(words(normalize(text)))
    return [s for s in MOCK_SEEDS if s in ws]


# ---------------------------------------------------------------------------
# Page text

MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
          "November", "December"]
NAMES = ["Arthur Pomeroy", "Helen Marsh", "Frank Ellison", "Lucy Talbot", "Walter Dunning", "Ruth Kendall",
         "Harold Vance", "Clara Seward", "Edith Larkin", "George Pruett", "Anna Whitcomb", "Louis Farrow"]
TRACTS = ["Willow Glen Tract", "Rosegarden Addition", "Naglee Park", "Palm Haven", "Sunol Heights",
          "Burbank Acres", "Eden Vale Subdivision", "Linda Vista Tract"]

BOILERPLATE = [
    "This indenture, made the {day} day of {month}, {year}, between {a}, the party of the first part, and {b}, "
    "the party of the second part.",
    "Witnesseth, that the said party of the first part, for and in consideration of the sum of {amount} dollars, "
    "lawful money of the United States, does hereby grant, bargain, sell and convey unto the said party of the "
    "second part all that certain real property situate in the City of San Jose, County of Santa Clara, State of "
    "California.",
    "Said property is more particularly described as Lot {lot} in Block {block}, as shown upon that certain map "
    "entitled {tract}, filed in the office of the Recorder of the County of Santa Clara.",
    "Together with all and singular the tenements, hereditaments and appurtenances thereunto belonging or in "
    "anywise appertaining.",
    "To have and to hold the same unto the said party of the second part, and to the heirs and assigns of said "
    "party forever.",
    "Subject to taxes for the fiscal year {year}, and to easements and rights of way of record.",
    "The grantee shall not erect any structure upon said lot other than one single dwelling house with the usual "
    "outbuildings, costing not less than {amount} dollars.",
    "No building shall be placed nearer than {feet} feet to the front line of said lot.",
    "No intoxicating liquors shall ever be manufactured or sold upon said premises.",
    "These conditions shall run with the land and bind the grantee and the heirs and assigns of the grantee.",
    "In witness whereof, the said party of the first part has executed this instrument the day and year first "
    "above written.",
    "State of California, County of Santa Clara, ss. On this {day} day of {month}, {year}, before me, a Notary "
    "Public in and for said County, personally appeared {a}, known to me to be the person whose name is "
    "subscribed to the within instrument.",
    "Recorded at the request of {b}, {month} {day}, {year}, at {hour} o'clock, in Book {rbook} of Official "
    "Records, page {rpage}.",
]

COVENANTS = [
    "No person of any race other than the Caucasian race shall use or occupy any building or any lot, except that "
    "this covenant shall not prevent occupancy by domestic servants of a different race domiciled with an owner "
    "or tenant.",
    "Said premises shall not be sold, leased or rented to any person of African, Japanese or Chinese descent.",
    "The said lot shall never be occupied by any Negro or Mongolian, or by any person not of the Caucasian race.",
    "No part of said property shall at any time be sold, conveyed, leased or rented to any Negroes, Asiatics or "
    "Hindus.",
]

CORRUPTED = [
    "The said lot shall not be sold, leased or rented to any person not wholly of the Caucasia stock.",
    "Said premises shall be occupied only by persons wholly of the Caucasia stock.",
]

HEAVILY_CORRUPTED = [
    "The said lot shall not be sold, leased or rented to any person not wholly of the Caucian stock.",
]

FAIR_HOUSING = [
    "Pursuant to the fair housing act, any restriction against Negro or Caucasian buyers is void and of no effect.",
]

DISTRACTORS = [
    "The property is commonly known as {num} Whitestone Avenue.",
    "The property is commonly known as {num} Blackwood Terrace.",
    "The property is commonly known as {num} Brownell Street.",
    "The property is commonly known as {num} Cloverdale Road.",
    "The property is commonly known as {num} Colorado Street.",
]


def fill(template, rng):
    return template.format(
        day=rng.randint(1, 28), month=rng.choice(MONTHS), year=rng.randint(1905, 1948),
        a=rng.choice(NAMES), b=rng.choice(NAMES), amount=rng.choice([10, 100, 2500, 3000, 4500]),
        lot=rng.randint(1, 60), block=rng.randint(1, 12), tract=rng.choice(TRACTS), feet=rng.choice([15, 20, 25]),
        hour=rng.randint(8, 16), rbook=rng.randint(100, 999), rpage=rng.randint(1, 600), num=rng.randint(100, 1999))


def boilerplate_text(rng, n_sentences):
    return [fill(t, rng) for t in rng.sample(BOILERPLATE, n_sentences)]


def layout(doc_id, page_no, paragraphs, recorded_date=None):
    """Page record with one token box per whitespace-delimited token, in
    page-relative coordinates."""
    text = "\n".join(paragraphs)
    tokens = []
    row, col, prev_end = 0, 0, 0
    for m in re.finditer(r"\S+", text):
        if tokens and (col == 12 or "\n" in text[prev_end:m.start()]):
            row, col = row + 1, 0
        x0 = round(0.05 + 0.075 * col, 4)
        y0 = round(0.03 + 0.012 * row, 4)
        assert y0 + 0.01 <= 1.0, "page too long for the layout grid"
        tokens.append({"text": m.group(0), "char_start": m.start(), "char_end": m.end(), "x0": x0, "y0": y0,
                       "x1": round(x0 + 0.07, 4), "y1": round(y0 + 0.01, 4)})
        col += 1
        prev_end = m.end()
    rec = {"doc_id": doc_id, "page_no": page_no, "text": text, "tokens": tokens}
    if recorded_date:
        rec["recorded_date"] = recorded_date
    return rec


def random_date(rng):
    return "%04d-%02d-%02d" % (rng.randint(1905, 1948), rng.randint(1, 12), rng.randint(1, 28))


def plant(rng, sentence, n_boiler=6):
    paras = boilerplate_text(rng, n_boiler)
    paras.insert(rng.randint(1, len(paras)), sentence)
    return paras


def dumps(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def write_jsonl(path, records):
    path.write_text("".join(dumps(r) + "\n" for r in records))


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def check_clean(text, terms):
    assert not keyword_hits(text, terms), (keyword_hits(text, terms), text)
    assert not fuzzy_hits(text, terms), (fuzzy_hits(text, terms), text)
    assert not mock_hits(text), text


# ---------------------------------------------------------------------------
# Fixtures


def make_pages_100(terms):
    rng = random.Random(100)
    records, manifest = [], []
    kinds = ["clean"] * 88 + ["covenant"] * 8 + ["distractor"] * 4
    rng.shuffle(kinds)
    for i, kind in enumerate(kinds):
        doc_id = "SC-1%03d" % (i // 2)
        page_no = i % 2 + 1
        if kind == "clean":
            paras = boilerplate_text(rng, rng.randint(4, 8))
            check_clean("\n".join(paras), terms)
            planted = None
        else:
            planted = rng.choice(COVENANTS if kind == "covenant" else DISTRACTORS)
            planted = fill(planted, rng)
            paras = plant(rng, planted, rng.randint(3, 7))
        rec = layout(doc_id, page_no, paras, random_date(rng))
        records.append(rec)
        hits = keyword_hits(rec["text"], terms)
        assert bool(hits) == (kind != "clean")
        manifest.append({"doc_id": doc_id, "page_no": page_no, "kind": kind, "planted": planted,
                         "keyword_terms": hits})
    write_jsonl(OUT / "pages_100.jsonl", records)
    (OUT / "pages_100.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def make_mixed(terms):
    """Detector-ladder corpus: 1,000 pages in six categories."""
    rng = random.Random(7)
    counts = {"clean": 965, "covenant": 6, "distractor": 20, "corrupted": 4, "heavily-corrupted": 3,
              "fair-housing": 2}
    kinds = [k for k, n in counts.items() for _ in range(n)]
    rng.shuffle(kinds)
    records, gold, manifest = [], [], []
    for i, kind in enumerate(kinds):
        doc_id = "MX-%04d" % (i + 1)
        sentence = None
        if kind == "clean":
            paras = boilerplate_text(rng, rng.randint(2, 4))
        else:
            pool = {"covenant": COVENANTS, "distractor": DISTRACTORS, "corrupted": CORRUPTED,
                    "heavily-corrupted": HEAVILY_CORRUPTED, "fair-housing": FAIR_HOUSING}[kind]
            sentence = fill(rng.choice(pool), rng)
            paras = plant(rng, sentence, rng.randint(2, 4))
        rec = layout(doc_id, 1, paras, random_date(rng))
        text = rec["text"]

        kw, fz, mk = bool(keyword_hits(text, terms)), bool(fuzzy_hits(text, terms)), bool(mock_hits(text))
        expected = {"clean": (False, False, False), "covenant": (True, True, True),
                    "distractor": (True, False, False), "corrupted": (False, True, False),
                    "heavily-corrupted": (False, False, False), "fair-housing": (True, True, True)}[kind]
        assert (kw, fz, mk) == expected, (kind, kw, fz, mk, text)
        if kind == "clean":
            check_clean(text, terms)

        is_covenant = kind in ("covenant", "corrupted", "heavily-corrupted")
        gold.append([doc_id, 1, "true" if is_covenant else "false", sentence if is_covenant else ""])
        manifest.append({"doc_id": doc_id, "page_no": 1, "kind": kind, "sentence": sentence})
        records.append(rec)
    write_jsonl(OUT / "mixed_corpus.jsonl", records)
    write_csv(OUT / "mixed_gold.csv", ["doc_id", "page_no", "gold_label", "gold_span"], gold)
    (OUT / "mixed_corpus.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def square(lon, lat, d=0.004):
    ring = [[lon, lat], [lon + d, lat], [lon + d, lat + d], [lon, lat + d], [lon, lat]]
    return {"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": [ring]}}


def normalize_map_name(name):
    s = "".join(c if c.isalnum() else " " for c in name)
    s = normalize(s)
    changed = True
    while changed:
        changed = False
        for p in ("map of ", "the "):
            if len(s) > len(p) and s.startswith(p):
                s = s[len(p):]
                changed = True
    return s


def make_geo(terms):
    geo = OUT / "geo"
    (geo / "geometry").mkdir(parents=True, exist_ok=True)
    index = [
        ("Hanchett Residence Park", "I", "25", "T-HANCHETT", "hanchett"),
        ("Naglee Park Addition", "H", "7", "T-NAGLEE", "naglee"),
        ("Rosegarden Terrace Tract", "K", "41", "T-ROSEGARDEN", "rosegarden"),
        ("Willow Glen Orchard Subdivision", "L", "12", "T-WILLOW", "willow"),
        ("Eden Vale Homesites", "M", "3", "T-EDENVALE", "edenvale"),
    ]
    write_csv(geo / "map_index.csv", ["canonical_name", "book", "page", "tract_id", "geometry_ref"],
              [list(r) for r in index])
    for k, (_, _, _, _, ref) in enumerate(index + [("", "", "", "", "override-campbell")]):
        (geo / "geometry" / (ref + ".geojson")).write_text(
            json.dumps(square(-121.90 + 0.01 * k, 37.32 + 0.005 * k)) + "\n")
    write_csv(geo / "overrides.csv", ["book", "page", "tract_id", "geometry_ref"],
              [["Q", "88", "T-CAMPBELL-MANUAL", "override-campbell"]])

    covenant = COVENANTS[0]
    clues = [
        ("exact-book-page", "T-HANCHETT",
         "Being Lot 14 in Block 3, as shown upon the map recorded in Book 'I' of Maps at page 25, records "
         "of Santa Clara County."),
        ("fuzzy-name", "T-NAGLEE", "Being Lot 6 as shown upon the Map of Naglee Park Additiou, filed in the office "
         "of the Recorder of the County of Santa Clara."),
        ("fuzzy-name", "T-WILLOW", "Being Lot 21 as delineated upon the Map of Wlllow Glen Orchard Subdivision, "
         "recorded in Book Z of Maps, page 999."),
        ("unresolved", None, "Being Lot 2 as shown upon the Map of Sunnyvale Orchard Homes, filed in the office of "
         "the Recorder of the County of Santa Clara."),
        ("manual-override", "T-CAMPBELL-MANUAL", "Being Lot 9 as shown upon the map recorded in Book Q of Maps, "
         "page 88, records of Santa Clara County."),
    ]
    names = [normalize_map_name(r[0]) for r in index]
    for method, _, sentence in clues:
        m = re.search(r"Map of (?:the )?([A-Za-z0-9][^,.;:\n\"]*?)(?=\s*[,.;:\n\"]|\s+(?:recorded|filed)\b)",
                      sentence)
        if m and method == "fuzzy-name":
            best = max(jaccard(normalize_map_name(m.group(1)), n) for n in names)
            assert 0.8 <= best < 1.0, (sentence, best)
        if m and method == "unresolved":
            assert max(jaccard(normalize_map_name(m.group(1)), n) for n in names) < 0.8

    rng = random.Random(5)
    records, expected = [], []
    for i, (method, tract, sentence) in enumerate(clues):
        doc_id = "GEO-%d" % (i + 1)
        paras = boilerplate_text(rng, 3)
        paras.insert(1, sentence)
        paras.insert(2, covenant)
        rec = layout(doc_id, 1, paras, random_date(rng))
        assert keyword_hits(rec["text"], terms)
        records.append(rec)
        expected.append({"doc_id": doc_id, "page_no": 1, "method": method, "tract_id": tract})
    write_jsonl(geo / "pages.jsonl", records)
    (geo / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")


def make_prevalence():
    """Covenant records whose tallies are tract-wide 412 deeds / 18,871 lots,
    multi-lot 1,293 deeds / 5,354 lots, 5,612 single-lot deeds, and
    5,315 lots removed by deduplication."""
    rng = random.Random(1947)
    rows = []
    tract_wide = [46] * 331 + [45] * 81
    tw_tracts = []
    for k, n in enumerate(tract_wide):
        tract = "TW-%03d" % (k + 1)
        tw_tracts.append((tract, n))
        rows.append(["DECL-%04d" % (k + 1), random_date(rng), tract, "", "", "tract-wide", str(n)])

    # Multi-lot deeds: 182 of five lots and 1,111 of four, all distinct lots
    # in tracts without a declaration.
    multi_sizes = [5] * 182 + [4] * 1111
    multi_lots = []
    for k, size in enumerate(multi_sizes):
        tract = "ML-%03d" % (k // 10 + 1)
        block = str(k % 10 + 1)
        lots = [str(j + 1) for j in range(size)]
        multi_lots.extend((tract, block, lot) for lot in lots)
        rows.append(["ML-%05d" % (k + 1), random_date(rng), tract, block, "|".join(lots), "multi-lot", ""])

    # Single-lot deeds: 3,000 inside declared tracts (subsumed), 2,315 that
    # repeat a multi-lot deed's lot, 297 new lots.
    singles = []
    for k in range(3000):
        tract, n = tw_tracts[k % len(tw_tracts)]
        singles.append((tract, "", str(k // len(tw_tracts) + 1)))
    singles.extend(rng.sample(multi_lots, 2315))
    singles.extend(("SL-%03d" % (k // 20 + 1), "1", str(k % 20 + 1)) for k in range(297))
    for k, (tract, block, lot) in enumerate(singles):
        rows.append(["SL-%05d" % (k + 1), random_date(rng), tract, block, lot, "single-lot", ""])
    rng.shuffle(rows)

    # Independent tally.
    tw = [r for r in rows if r[5] == "tract-wide"]
    ml = [r for r in rows if r[5] == "multi-lot"]
    sl = [r for r in rows if r[5] == "single-lot"]
    tw_lots = sum(int(r[6]) for r in tw)
    ml_lots = sum(len(r[4].split("|")) for r in ml)
    declared = {r[2] for r in tw}
    distinct = {(r[2], r[3], lot) for r in ml + sl for lot in r[4].split("|") if r[2] not in declared}
    net = tw_lots + len(distinct)
    gross = tw_lots + ml_lots + len(sl)
    assert (len(tw), tw_lots, len(ml), ml_lots, len(sl)) == (412, 18871, 1293, 5354, 5612)
    assert gross - net == 5315 and net == 24522, (gross, net)
    write_csv(OUT / "prevalence_records.csv",
              ["deed_id", "date", "tract_id", "block", "lots", "scope", "lot_count_if_tract_wide"], rows)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    terms = load_keywords()
    make_pages_100(terms)
    make_mixed(terms)
    make_geo(terms)
    make_prevalence()


if __name__ == "__main__":
    main()
