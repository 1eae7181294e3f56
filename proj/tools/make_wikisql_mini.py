#!/usr/bin/env python3
"""Writes data/wikisql-mini: a small WikiSQL-format release split.

The output mirrors the public release layout (test.tables.jsonl with
id/header/types/rows, test.jsonl with table_id/question/sql) so the
build-wikisql pipeline and its oracle can be exercised offline. Tables hold
at most 30 rows. Everything is derived from a fixed seed.

    python3 tools/make_wikisql_mini.py [out_dir]
"""

import json
import os
import random
import sys

SEED = 20240517
N_QUESTIONS = 200
AGG_OPS = ["", "MAX", "MIN", "COUNT", "SUM", "AVG"]
COND_OPS = ["=", ">", "<"]

FIRST = ["Terrence", "Jalen", "Go", "Marcus", "Ana", "Luis", "Kenji", "Sofia", "Omar", "Priya", "Tomas",
         "Elena", "Chris", "Amara", "Ivan", "Mei", "Rafael", "Noor", "Pierre", "Hana", "Jose", "Lena"]
LAST = ["Ross", "Rose", "Shiozaki", "Smith", "Silva", "Garcia", "Tanaka", "Rossi", "Haddad", "Patel",
        "Novak", "Ivanova", "Bosh", "Okafor", "Petrov", "Chen", "Nadal", "Aziz", "Dubois", "Sato", "Reyes"]
COUNTRIES = ["Canada", "United States", "Japan", "Brazil", "Spain", "France", "Nigeria", "India",
             "Czech Republic", "Serbia", "Italy", "Mexico", "South Korea", "New Zealand"]
TEAMS = ["Toronto", "Boston", "Chicago", "Denver", "Phoenix", "Miami", "Utah", "Detroit", "Seattle",
         "Atlanta", "Portland", "Orlando"]
POSITIONS = ["Guard", "Forward", "Center", "Guard-Forward", "Forward-Center"]
SCHOOLS = ["Washington", "Michigan", "Duke", "UCLA", "Kansas", "Texas", "Stanford", "Georgetown"]
PARTIES = ["Labour", "National", "Green", "Independent", "Liberal", "Reform"]
MONTHS = ["january", "february", "march", "april", "october", "november", "december"]
VENUES = ["Home", "Away", "Neutral"]
RESULTS = ["W", "L", "D"]
STATES = ["Texas", "Ohio", "Oregon", "Maine", "Utah", "Iowa", "Idaho", "Nevada"]
NETWORKS = ["ABC", "CBS", "NBC", "FOX", "ESPN"]


def name(rng):
    return "%s %s" % (rng.choice(FIRST), rng.choice(LAST))


# Each template: (header, types, row factory). Values are emitted the way the
# public release does: reals as JSON numbers, everything else as strings.
def t_players(rng):
    header = ["Player", "Nationality", "Position", "Years in Toronto", "School/Club Team", "No."]
    types = ["text", "text", "text", "text", "text", "real"]

    def row(i):
        start = rng.randint(1995, 2012)
        return [name(rng), rng.choice(COUNTRIES), rng.choice(POSITIONS),
                "%d-%d" % (start, start + rng.randint(1, 4)), rng.choice(SCHOOLS), rng.randint(1, 55)]
    return header, types, row


def t_games(rng):
    header = ["Game", "Date", "Team", "Score", "High points", "Attendance"]
    types = ["real", "text", "text", "text", "text", "real"]

    def row(i):
        return [i + 1, "%s %d" % (rng.choice(MONTHS), rng.randint(1, 28)), rng.choice(TEAMS),
                "W %d-%d" % (rng.randint(90, 120), rng.randint(80, 110)), name(rng),
                rng.randint(12000, 21000)]
    return header, types, row


def t_elections(rng):
    header = ["District", "Incumbent", "Party", "First elected", "Result", "Votes"]
    types = ["text", "text", "text", "real", "text", "real"]

    def row(i):
        return ["%s %d" % (rng.choice(STATES), rng.randint(1, 12)), name(rng), rng.choice(PARTIES),
                rng.randint(1970, 2010), rng.choice(["Re-elected", "Retired", "Lost re-election"]),
                rng.randint(40000, 250000)]
    return header, types, row


def t_pageant(rng):
    header = ["Country", "Preliminaries", "Interview", "Swimsuit", "Evening Gown", "Average"]
    types = ["text", "real", "real", "text", "real", "real"]

    def row(i):
        vals = [round(rng.uniform(7.5, 9.9), 3) for _ in range(4)]
        avg = round(sum(vals[1:]) / 3, 3)
        # Swimsuit scores ship as text in this template.
        return [rng.choice(STATES), vals[0], vals[1], "%.3f" % vals[2], vals[3], avg]
    return header, types, row


def t_episodes(rng):
    header = ["No. in series", "Title", "Directed by", "Original air date", "Network", "U.S. viewers (millions)"]
    types = ["real", "text", "text", "text", "text", "real"]
    words = ["The", "Last", "Night", "Return", "Pilot", "Storm", "Echo", "Signal", "Home", "Run"]

    def row(i):
        title = "%s %s" % (rng.choice(words), rng.choice(words))
        return [i + 1, title, name(rng), "%s %d, %d" % (rng.choice(MONTHS).capitalize(), rng.randint(1, 28),
                                                         rng.randint(2001, 2012)),
                rng.choice(NETWORKS), round(rng.uniform(2.0, 18.0), 2)]
    return header, types, row


def t_races(rng):
    header = ["Season", "Series", "Races", "Wins", "Points", "Position"]
    types = ["real", "text", "real", "real", "text", "text"]

    def row(i):
        races = rng.randint(8, 20)
        # Points sometimes carry commas or a dash, as in the release.
        pts = rng.choice([str(rng.randint(0, 400)), "{:,}".format(rng.randint(1000, 3000)), "-"])
        return [rng.randint(1998, 2014), rng.choice(["Formula Three", "GP2", "Formula Renault", "Indy Lights"]),
                races, rng.randint(0, races // 2), pts, rng.choice(["1st", "2nd", "3rd", "5th", "10th", "NC"])]
    return header, types, row


def t_mixed_real(rng):
    # A 'real' column containing a non-numeric cell is ingested as text.
    header = ["Rank", "Nation", "Gold", "Silver", "Bronze", "Total"]
    types = ["real", "text", "real", "real", "real", "real"]

    def row(i):
        g, s, b = rng.randint(0, 12), rng.randint(0, 12), rng.randint(0, 12)
        total = g + s + b if rng.random() > 0.1 else "n/a"
        return [i + 1, rng.choice(COUNTRIES), g, s, b, total]
    return header, types, row


TEMPLATES = [t_players, t_games, t_elections, t_pageant, t_episodes, t_races, t_mixed_real]

FIXED_TABLES = [
    {
        "id": "1-fixed-electorates",
        "header": ["Member", "Electorate", "Province", "MPs term", "Election date"],
        "types": ["text", "text", "text", "text", "text"],
        "rows": [
            ["Hugh Carleton", "Bay of Islands", "Auckland", "First", "1853"],
            ["William Sefton Moorhouse", "Christchurch Country", "Canterbury", "First", "1853"],
            ["Charles Brown", "Grey and Bell", "Taranaki", "First", "1853"],
            ["Walter Mantell", "Wallace", "Otago", "Second", "1861"],
            ["David Monro", "Waimea", "Nelson", "Second", "1860"],
            ["John Cuff", "Grey", "Nelson", "Third", "1866"],
        ],
    },
    {
        "id": "1-fixed-wrestlers",
        "header": ["Rank", "Wrestler", "# of reigns", "Combined defenses", "Combined days"],
        "types": ["real", "text", "real", "real", "real"],
        "rows": [
            [1, "Mitsuharu Misawa", 5, 21, 1788],
            [2, "Go Shiozaki", 2, 9, 511],
            [3, "Jun Akiyama", 2, 6, 426],
            [4, "Takeshi Rikio", 1, 5, 344],
            [5, "Kenta Kobashi", 1, 13, 735],
        ],
    },
    {
        "id": "1-fixed-raptors",
        "header": ["Player", "No.", "Nationality", "Position", "Years in Toronto", "School/Club Team"],
        "types": ["text", "real", "text", "text", "text", "text"],
        "rows": [
            ["Terrence Ross", 31, "United States", "Guard", "2012-2017", "Washington"],
            ["Jalen Rose", 5, "United States", "Guard-Forward", "2003-06", "Michigan"],
            ["Tomas Novak", 12, "Czech Republic", "Forward", "1998-99", "Sparta Prague"],
            ["Ana Silva", 9, "Brazil", "Center", "2005-07", "Flamengo"],
        ],
    },
]

FIXED_QUESTIONS = [
    {"table_id": "1-fixed-electorates", "question": "which province is bay of islands in?",
     "sql": {"sel": 2, "agg": 0, "conds": [[1, 0, "Bay of Islands"]]}},
    {"table_id": "1-fixed-electorates", "question": "which province is grey and bell electorate in",
     "sql": {"sel": 2, "agg": 0, "conds": [[1, 0, "Grey and Bell"]]}},
    {"table_id": "1-fixed-wrestlers", "question": "how many combined days did go shiozaki have?",
     "sql": {"sel": 4, "agg": 0, "conds": [[1, 0, "Go Shiozaki"]]}},
    {"table_id": "1-fixed-raptors", "question": "What nationality is Terrence Ross?",
     "sql": {"sel": 2, "agg": 0, "conds": [[0, 0, "Terrence Ross"]]}},
    {"table_id": "1-fixed-raptors", "question": "Who played in Toronto in 2003-06?",
     "sql": {"sel": 0, "agg": 0, "conds": [[4, 0, "2003-06"]]}},
]


def make_tables(rng):
    tables = list(FIXED_TABLES)
    k = 0
    while len(tables) < 45:
        tmpl = TEMPLATES[k % len(TEMPLATES)]
        header, types, row = tmpl(rng)
        n = rng.randint(4, 30)
        rows = [row(i) for i in range(n)]
        tables.append({"id": "2-%d-%d" % (10000 + k * 37, k), "header": header, "types": types, "rows": rows,
                       "page_title": tmpl.__name__[2:], "caption": ""})
        k += 1
    return tables


def phrase(value):
    return value if isinstance(value, str) else ("%g" % value)


def make_question(rng, table):
    header, types, rows = table["header"], table["types"], table["rows"]
    arity = len(header)
    real_cols = [c for c in range(arity) if types[c] == "real"]
    agg = rng.choices(range(6), weights=[70, 6, 6, 8, 5, 5])[0]
    sel = rng.choice(real_cols) if agg in (1, 2, 4, 5) and real_cols and rng.random() < 0.9 else rng.randrange(arity)
    conds = []
    used = {sel}
    for _ in range(rng.choices([1, 2, 3], weights=[70, 25, 5])[0]):
        free = [c for c in range(arity) if c not in used]
        if not free:
            break
        col = rng.choice(free)
        used.add(col)
        op = rng.choices([0, 1, 2], weights=[80, 10, 10])[0]
        cell = rng.choice(rows)[col]
        if op == 0:
            if rng.random() < 0.08:
                value = "no such value" if types[col] == "text" else 99999
            else:
                value = cell
                # Some releases carry numbers for text columns and vice versa.
                if types[col] == "real" and rng.random() < 0.2:
                    value = phrase(cell)
        else:
            if isinstance(cell, (int, float)):
                value = cell + rng.choice([-1, 0, 1])
            else:
                value = cell
        conds.append([col, op, value])
    where = " and ".join("%s %s %s" % (header[c], ["is", "is more than", "is less than"][o], phrase(v))
                         for c, o, v in conds)
    lead = {0: "What is the %s", 1: "What is the highest %s", 2: "What is the lowest %s", 3: "How many %s",
            4: "What is the total %s", 5: "What is the average %s"}[agg] % header[sel]
    text = "%s when %s?" % (lead, where)
    return {"phase": 1, "table_id": table["id"], "question": text,
            "sql": {"sel": sel, "agg": agg, "conds": conds}}


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "wikisql-mini")
    rng = random.Random(SEED)
    tables = make_tables(rng)
    questions = [dict(q, phase=1) for q in FIXED_QUESTIONS]
    generated = tables[len(FIXED_TABLES):]
    while len(questions) < N_QUESTIONS:
        questions.append(make_question(rng, rng.choice(generated)))
    # A logical form with an aggregate over free text the oracle must refuse.
    questions[-1] = {"phase": 1, "table_id": tables[3]["id"], "question": "What is the total Player?",
                     "sql": {"sel": 0, "agg": 4, "conds": []}}
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "test.tables.jsonl"), "w", encoding="utf-8") as fh:
        for t in tables:
            fh.write(json.dumps(t, ensure_ascii=False) + "\n")
    with open(os.path.join(out, "test.jsonl"), "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q, ensure_ascii=False) + "\n")
    print("%d tables, %d questions -> %s" % (len(tables), len(questions), out))


if __name__ == "__main__":
    main()
