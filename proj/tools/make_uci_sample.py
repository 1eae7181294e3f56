#!/usr/bin/env python3
"""Writes data/uci-sample: a small curated bundle with reference queries.

Tables are deterministic stand-ins shaped like the public UCI abalone,
auto-mpg, breast-cancer and heart-disease files plus a few WikiSQL-style
lowercase tables. Each task carries a reference query; failure fixtures carry
a failure_type label.

    python3 tools/make_uci_sample.py [out_dir]
"""

import json
import os
import random
import sys

SEED = 7


def col(name, dtype, description=None, format_hint=None):
    c = {"name": name, "dtype": dtype}
    if description:
        c["description"] = description
    if format_hint:
        c["format_hint"] = format_hint
    return c


def abalone(rng):
    cols = [col("Sex", "string", "M, F or I (infant)"), col("Length", "float"), col("Diameter", "float"),
            col("Height", "float"), col("Whole_weight", "float"), col("Shucked_weight", "float"),
            col("Viscera_weight", "float"), col("Shell_weight", "float"),
            col("Rings", "int", "ring count; age in years is rings + 1.5")]
    rows = []
    for i in range(30):
        sex = "MFI"[i % 3]
        rings = rng.randint(4, 16) if sex != "I" else rng.randint(3, 9)
        length = round(0.2 + rings * 0.03 + rng.uniform(-0.05, 0.05), 3)
        diameter = round(length * 0.8, 3)
        height = round(length * 0.25, 3)
        whole = round(length * 1.6 + rng.uniform(0, 0.2), 4)
        rows.append([sex, length, diameter, height, whole, round(whole * 0.4, 4), round(whole * 0.2, 4),
                     round(whole * 0.3, 4), rings])
    rows[5][8] = rows[6][8] = rows[7][8] = 9
    return {"table_id": "abalone", "columns": cols, "rows": rows,
            "notes": "physical measurements of abalone"}


def auto_mpg(rng):
    cols = [col("mpg", "float"), col("cylinders", "int"), col("displacement", "float"), col("horsepower", "float"),
            col("weight", "int"), col("acceleration", "float"), col("model_year", "int", "two-digit year"),
            col("origin", "int"), col("car_name", "string")]
    names = ["chevrolet chevelle malibu", "buick skylark 320", "plymouth satellite", "amc rebel sst",
             "ford torino", "ford galaxie 500", "chevrolet impala", "plymouth fury iii", "pontiac catalina",
             "amc ambassador dpl", "dodge challenger se", "toyota corona mark ii", "datsun pl510",
             "volkswagen 1131 deluxe sedan", "peugeot 504", "audi 100 ls", "saab 99e", "bmw 2002",
             "ford pinto", "honda civic", "toyota corolla", "mazda rx2 coupe", "fiat 124b", "volvo 144ea",
             "renault 12 (sw)", "opel 1900", "datsun 710", "dodge colt", "chevrolet vega", "subaru dl"]
    rows = []
    for i, name in enumerate(names):
        cyl = 8 if i < 11 else (6 if i in (16, 21) else 4)
        mpg = round(rng.uniform(12, 17) if cyl == 8 else rng.uniform(18, 35), 1)
        disp = float(rng.choice([307, 350, 318, 304, 302, 429, 454, 440]) if cyl == 8 else rng.choice([97, 113, 121, 140, 98, 156]))
        hp = float(rng.randint(130, 220) if cyl == 8 else rng.randint(46, 110))
        weight = rng.randint(3400, 4700) if cyl == 8 else rng.randint(1800, 2900)
        rows.append([mpg, cyl, disp, hp, weight, round(rng.uniform(8, 21), 1), 70 + i % 8, 1 if cyl == 8 else rng.randint(1, 3), name])
    rows[18][3] = None
    return {"table_id": "auto-mpg", "columns": cols, "rows": rows}


def breast_cancer(rng):
    cols = [col("Class", "string"), col("age", "string"), col("menopause", "string"), col("tumor-size", "string"),
            col("inv-nodes", "string"), col("node-caps", "string"), col("deg-malig", "int"), col("breast", "string"),
            col("breast-quad", "string"), col("irradiat", "string")]
    sizes = ["0-4", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39", "40-44"]
    rows = []
    for i in range(30):
        klass = "recurrence-events" if i % 3 == 0 else "no-recurrence-events"
        age = ["30-39", "40-49", "50-59", "60-69"][rng.randint(0, 3) if i % 4 else 2]
        size = rng.choice(sizes) if i % 5 else "30-34"
        rows.append([klass, age, "premeno" if age in ("30-39", "40-49") else rng.choice(["ge40", "lt40"]), size,
                     rng.choice(["0-2", "3-5", "6-8"]), rng.choice(["yes", "no", None]), rng.randint(1, 3),
                     rng.choice(["left", "right"]), rng.choice(["left_up", "left_low", "right_up", "central"]),
                     rng.choice(["yes", "no"])])
    return {"table_id": "breast-cancer", "columns": cols, "rows": rows}


def heart_disease(rng):
    cols = [col("age", "int"), col("sex", "int", "1 = male, 0 = female"), col("cp", "int", "chest pain type"),
            col("trestbps", "int", "resting blood pressure in mm Hg"), col("chol", "int", "serum cholesterol in mg/dl"),
            col("fbs", "int"), col("restecg", "int"), col("thalach", "int", "maximum heart rate achieved"),
            col("exang", "int", "exercise induced angina (1 = yes)"), col("oldpeak", "float"), col("slope", "int"),
            col("ca", "float", "number of major vessels colored by fluoroscopy"), col("thal", "float"),
            col("num", "int", "heart disease severity, 0 (none) to 4")]
    rows = []
    for i in range(30):
        num = rng.choice([0, 0, 0, 1, 2, 3, 4])
        age = rng.randint(34, 76) if i != 12 else 77
        rows.append([age, rng.randint(0, 1), rng.randint(1, 4), rng.randint(100, 180), rng.randint(160, 400),
                     rng.randint(0, 1), rng.randint(0, 2), rng.randint(95, 200), rng.randint(0, 1),
                     round(rng.uniform(0, 4), 1), rng.randint(1, 3), None if i == 7 else float(rng.randint(0, 3)),
                     float(rng.choice([3, 6, 7])), num])
    return {"table_id": "heart-disease", "columns": cols, "rows": rows}


def lower_rows(rows):
    return [[c.lower() if isinstance(c, str) else c for c in r] for r in rows]


def wikisql_style():
    electorates = {
        "table_id": "1-electorates",
        "columns": [col("Member", "string"), col("Electorate", "string"), col("Province", "string"),
                    col("MPs term", "string"), col("Election date", "string")],
        "rows": lower_rows([
            ["Hugh Carleton", "Bay of Islands", "Auckland", "First", "1853"],
            ["William Sefton Moorhouse", "Christchurch Country", "Canterbury", "First", "1853"],
            ["Charles Brown", "Grey and Bell", "Taranaki", "First", "1853"],
            ["Walter Mantell", "Wallace", "Otago", "Second", "1861"],
            ["David Monro", "Waimea", "Nelson", "Second", "1860"],
            ["John Cuff", "Grey", "Nelson", "Third", "1866"],
        ])}
    wrestlers = {
        "table_id": "1-wrestlers",
        "columns": [col("Rank", "int"), col("Wrestler", "string"), col("# of reigns", "int"),
                    col("Combined defenses", "int"), col("Combined days", "int")],
        "rows": lower_rows([
            [1, "Mitsuharu Misawa", 5, 21, 1788],
            [2, "Go Shiozaki", 2, 9, 511],
            [3, "Jun Akiyama", 2, 6, 426],
            [4, "Takeshi Rikio", 1, 5, 344],
            [5, "Kenta Kobashi", 1, 13, 735],
        ])}
    pageant = {
        "table_id": "1-pageant",
        "columns": [col("Country", "string"), col("Interview", "float"), col("Swimsuit", "string"),
                    col("Evening Gown", "float"), col("Average", "float")],
        "rows": lower_rows([
            ["Texas", 9.577, "9.155", 9.233, 9.322],
            ["Ohio", 8.81, "8.503", 8.958, 8.757],
            ["Utah", 8.61, "8.503", 8.8, 8.638],
            ["Iowa", 8.33, "8.777", 8.877, 8.661],
            ["Maine", 8.92, "8.412", 8.611, 8.648],
        ])}
    games = {
        "table_id": "1-games",
        "columns": [col("Game", "int"), col("Date", "string", format_hint="lowercase month name and day, e.g. december 5"),
                    col("Team", "string"), col("Score", "string"), col("Location Attendance", "string")],
        "rows": lower_rows([
            [21, "December 1", "Boston", "W 101-93", "Air Canada Centre 18,106"],
            [22, "December 3", "Chicago", "L 88-94", "United Center 21,002"],
            [23, "December 5", "New Jersey", "W 110-104", "Air Canada Centre 17,612"],
            [24, "December 8", "Miami", "L 90-99", "American Airlines Arena 19,600"],
            [25, "January 2", "Denver", "W 115-109", "Air Canada Centre 18,801"],
        ])}
    components = {
        "table_id": "1-components",
        "columns": [col("Component", "string"), col("Integrated", "string"), col("Allied-Related", "string"),
                    col("Allied-Unrelated", "string"), col("Holding", "string")],
        "rows": lower_rows([
            ["Human Capital", "One Company", "Centralized", "Decentralized", "Decentralized"],
            ["Human Capital", "Shared", "Shared", "Independent", "Independent"],
            ["Operations", "One Company", "Shared", "Independent", "Independent"],
            ["Finance", "Centralized", "Centralized", "Centralized", "Decentralized"],
        ])}
    return [electorates, wrestlers, pageant, games, components]


# (table_id, question, query, role, qtype, failure_type)
TASKS = [
    # Worked examples of each question type.
    ("1-electorates", "which province is bay of islands in?",
     "result = df.loc[df['Electorate']=='bay of islands', 'Province'].iloc[0]", None, "retrieval", None),
    ("1-wrestlers", "how many combined days did go shiozaki have?",
     "result = df.loc[df['Wrestler']=='go shiozaki', 'Combined days'].values[0]", None, "aggregation", None),
    ("abalone", "how does the average shell weight vary across different numbers of rings?",
     "result = df.groupby('Rings')['Shell_weight'].mean()", None, "data_analysis", None),
    ("abalone", "can you create a new column 'volume' as a product of length, diameter, and height, then find "
                "the average volume for each sex?",
     "df['Volume'] = df['Length'] * df['Diameter'] * df['Height']; result = df.groupby('Sex')['Volume'].mean()",
     None, "data_analysis", None),
    # Role-conditioned generation samples.
    ("auto-mpg", "How has the average weight of cars changed over the model years?",
     "result = df.groupby('model_year')['weight'].mean()", "data_scientist", "data_analysis", None),
    ("breast-cancer", "What is the distribution of tumor size for cases with recurrence events?",
     "result = df[df['Class'] == 'recurrence-events']['tumor-size'].value_counts()", "data_scientist",
     "data_analysis", None),
    ("auto-mpg", "Which cars have more than 6 cylinders?", "result = df[df['cylinders'] > 6]", "general_user",
     "retrieval", None),
    ("breast-cancer", "What is the most common tumor size observed in the data?",
     "result = df['tumor-size'].mode()[0]", "general_user", "aggregation", None),
    ("auto-mpg", "What are the names of the cars with the top 3 highest fuel efficiencies in our dataset?",
     "result = df.nlargest(3, 'mpg')['car_name']", "data_owner", "data_analysis", None),
    ("breast-cancer", "What is the frequency of tumor sizes in the age group 50-59?",
     "result = df[df['age'] == '50-59']['tumor-size'].value_counts()", "data_owner", "data_analysis", None),
    # Failure fixtures with their expected queries.
    ("1-electorates", "which province is grey and bell electorate in",
     "result=df[(df['Electorate']=='grey and bell')]['Province'].unique()", None, "retrieval", "value_retrieval"),
    ("heart-disease", "what is the variance in resting blood pressure (trestbps) among different heart disease "
                      "severity levels?",
     "df.groupby('num')['trestbps'].var()", None, "data_analysis", "column_reference"),
    ("abalone", "What are the mean and median lengths of abalone by each sex category?",
     "result = df.groupby('Sex')['Length'].agg(['mean', 'median'])", None, "data_analysis",
     "instruction_misalignment"),
    ("1-components", "what is the total amount of allied-unrelated where the component is human capital?",
     "result = df[df['Component']=='human capital']['Allied-Unrelated'].count()", None, "aggregation",
     "aggregation"),
    ("1-pageant", "what is the average score when the swimsuit score is 8.503",
     "result = df[df['Swimsuit']=='8.503']['Average']", None, "retrieval", "function_column_ambiguity"),
    ("1-games", "which team played on december 5?", "result = df[df['Date'] == 'december 5']['Team']", None,
     "retrieval", "insufficient_column_info"),
    ("abalone", "how does the average shell weight vary across different numbers of rings?",
     "df.groupby('Rings')['Shell_weight'].mean()", None, "data_analysis", "coding_syntax"),
    ("abalone", "i'm interested in knowing the most common age of abalone. can you find that for me?",
     "result = df['Rings'].mode()", None, "aggregation", "hallucination"),
    # Additional hand-written pairs on the same tables.
    ("abalone", "What is the maximum number of rings?", "result = df['Rings'].max()", "general_user",
     "aggregation", None),
    ("abalone", "How many infant abalone are in the data?", "result = len(df[df['Sex'] == 'I'])", "general_user",
     "aggregation", None),
    ("auto-mpg", "What is the average mpg for each number of cylinders?",
     "result = df.groupby('cylinders')['mpg'].mean()", "data_scientist", "data_analysis", None),
    ("auto-mpg", "Which car has no recorded horsepower?", "result = df[df['horsepower'].isna()]['car_name']",
     "data_owner", "retrieval", None),
    ("auto-mpg", "How strongly is weight correlated with mpg?", "result = df['weight'].corr(df['mpg'])",
     "data_scientist", "data_analysis", None),
    ("breast-cancer", "How many patients received irradiation?", "result = (df['irradiat'] == 'yes').sum()",
     "data_owner", "aggregation", None),
    ("breast-cancer", "What is the average degree of malignancy for each class?",
     "result = df.groupby('Class')['deg-malig'].mean()", "data_scientist", "data_analysis", None),
    ("heart-disease", "What is the mean cholesterol of patients with any heart disease?",
     "result = df[df['num'] > 0]['chol'].mean()", "general_user", "aggregation", None),
    ("heart-disease", "What maximum heart rate did the oldest patient reach?",
     "result = df.loc[df['age'].idxmax(), 'thalach']", "general_user", "retrieval", None),
    ("heart-disease", "How many patients have exercise induced angina?", "result = int(df['exang'].sum())",
     "data_owner", "aggregation", None),
    ("1-electorates", "which members represent nelson?",
     "result = df[df['Province'] == 'nelson']['Member'].tolist()", None, "retrieval", None),
    ("1-wrestlers", "which wrestler has the most combined defenses?",
     "result = df.loc[df['Combined defenses'].idxmax(), 'Wrestler']", None, "aggregation", None),
    ("1-games", "how many games were played in december?",
     "result = int(df['Date'].str.startswith('december').sum())", None, "aggregation", None),
    ("1-pageant", "what is the highest interview score?", "result = df['Interview'].max()", None,
     "aggregation", None),
    ("heart-disease", "What is the average age of patients by chest pain type, sorted from oldest?",
     "result = df.groupby('cp')['age'].mean().sort_values(ascending=False)", "data_scientist", "data_analysis",
     None),
]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data", "uci-sample")
    rng = random.Random(SEED)
    tables = [abalone(rng), auto_mpg(rng), breast_cancer(rng), heart_disease(rng)] + wikisql_style()
    tasks = []
    for i, (table_id, question, query, role, qtype, failure) in enumerate(TASKS):
        q = {"qid": "uci-%02d" % i, "text": question, "qtype": qtype}
        if role:
            q["role"] = role
        t = {"question": q, "table_id": table_id, "ground_truth": {"reference_query": {"source": query, "lint": []}},
             "reviewed": True}
        if failure:
            t["failure_type"] = failure
        tasks.append(t)
    meta = {"name": "uci-sample", "version": "1",
            "supplementary": {"assumptions": [], "constraints": [], "mitigation_flags": ["no_import_directive"]},
            "judge": {}}
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "tables.jsonl"), "w", encoding="utf-8") as fh:
        for t in tables:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    with open(os.path.join(out, "tasks.jsonl"), "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("%d tables, %d tasks -> %s" % (len(tables), len(tasks), out))


if __name__ == "__main__":
    main()
