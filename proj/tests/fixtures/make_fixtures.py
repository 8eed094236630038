#!/usr/bin/env python3
"""Regenerates the JSON fixtures in this directory.

Outputs are committed; rerun after editing the task tables below. The golden
trajectory file is produced by the CLI (see README) and is not written here.
"""

import json
import re
from pathlib import Path

HERE = Path(__file__).resolve().parent
WS = re.compile(r"[ \t\n\r]*[^ \t\n\r]+|[ \t\n\r]+\Z")


def token_count(text):
    # Mirrors the scripted tokenizer: whitespace run + non-whitespace run.
    return len(WS.findall(text))


class Lcg:
    def __init__(self, seed):
        self.state = seed & 0xFFFFFFFF

    def next(self):
        self.state = (1103515245 * self.state + 12345) & 0x7FFFFFFF
        return self.state / 0x7FFFFFFF


def logprobs_for(text, seed, spread):
    rng = Lcg(seed)
    n = token_count(text)
    old = [round(-0.05 - 1.5 * rng.next(), 6) for _ in range(n)]
    new = [round(o + spread * (2 * rng.next() - 1), 6) for o in old]
    return old, new


def fenced(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "```markdown\n" + "\n".join(lines) + "\n```"


def bare(header, rows):
    return fenced(header, rows)[len("```markdown\n"):-len("\n```")]


def doc_id(name):
    return "local://wiki/" + name.replace(" ", "_").replace("/", "_")


def call(name, arguments):
    return "<tool_call>\n" + json.dumps({"name": name, "arguments": arguments}, ensure_ascii=False) + "\n</tool_call>"


# --- Fig. 7 instance (verbatim) --------------------------------------------

FIG7_QUESTION = (
    "I am conducting research on the conservation geography of New Zealand and need a structured overview of "
    "its National Parks system. I need you to identify all National Parks in New Zealand that were active and "
    "designated as of December 31, 2017, excluding any parks disestablished before that date, and compile their "
    "details. Please output the organized data as a single Markdown table, do not split into multiple markdown "
    "tables, each cell must be filled according to the column requirements, no omissions allowed, output in "
    "English.\n\nThe column names are as follows:\nNational Park, Establish Year, Total Area (km2), Primary "
    "Island, Administering Regional Councils\n\nDo not ask me any questions, just output the result in the "
    "format:\n```markdown\n{data_content}\n```\nOutput only the table header and rows; do not add analysis, "
    "commentary, or any additional text."
)
NZ_HEADER = ["National Park", "Establish Year", "Total Area (km2)", "Primary Island",
             "Administering Regional Councils"]
NZ_ROWS = [
    ["Tongariro National Park", "1887", "786", "North Island", "Manawatū-Whanganui"],
    ["Egmont National Park", "1900", "342", "North Island", "Taranaki"],
    ["Arthur's Pass National Park", "1929", "1,185", "South Island", "Canterbury, West Coast"],
    ["Abel Tasman National Park", "1942", "237", "South Island", "Tasman"],
    ["Fiordland National Park", "1952", "12,607", "South Island", "Southland"],
    ["Aoraki/Mount Cook National Park", "1953", "707", "South Island", "Canterbury"],
    ["Nelson Lakes National Park", "1956", "1,019", "South Island", "Tasman"],
    ["Westland Tai Poutini National Park", "1960", "1,320", "South Island", "West Coast"],
    ["Mount Aspiring National Park", "1964", "3,562", "South Island", "Otago, West Coast"],
    ["Whanganui National Park", "1986", "742", "North Island", "Manawatū-Whanganui"],
    ["Paparoa National Park", "1987", "430", "South Island", "West Coast"],
    ["Kahurangi National Park", "1996", "4,520", "South Island", "Tasman, West Coast"],
    ["Rakiura National Park", "2002", "1,400", "Stewart Island", "Southland"],
]


def nz_doc(r):
    return (f"{r[0]} is a national park on the {r[3]} of New Zealand. It was established in {r[1]} and has a "
            f"total area of {r[2]} km2. The park lies within the area administered by the {r[4]} regional "
            f"council(s). Visitors come for tramping tracks, huts and alpine scenery.")


def question(topic, header):
    return (f"I need a structured overview of {topic}. Please output the organized data as a single Markdown "
            f"table, do not split into multiple markdown tables, each cell must be filled according to the "
            f"column requirements, no omissions allowed, output in English.\n\nThe column names are as "
            f"follows:\n{', '.join(header)}\n\nDo not ask me any questions, just output the result in the "
            f"format:\n```markdown\n{{data_content}}\n```\nOutput only the table header and rows; do not add "
            f"analysis, commentary, or any additional text.")


# Desk tasks: id, topic, header, rows, unique columns, document text template.
TASKS = [
    {
        "id": "nz-parks", "question": FIG7_QUESTION, "header": NZ_HEADER, "rows": NZ_ROWS,
        "unique": ["National Park"], "doc": nz_doc, "search": "national parks New Zealand {}",
    },
    {
        "id": "planets", "topic": "the inner planets of the Solar System",
        "header": ["Planet", "Position from Sun", "Known Moons"],
        "rows": [["Mercury", "1", "0"], ["Venus", "2", "0"], ["Earth", "3", "1"], ["Mars", "4", "2"]],
        "unique": ["Planet"],
        "doc": lambda r: f"{r[0]} is planet number {r[1]} from the Sun and has {r[2]} known moons.",
        "search": "inner planet moons {}",
    },
    {
        "id": "noble-gases", "topic": "the stable noble gases",
        "header": ["Element", "Symbol", "Atomic Number"],
        "rows": [["Helium", "He", "2"], ["Neon", "Ne", "10"], ["Argon", "Ar", "18"], ["Krypton", "Kr", "36"],
                 ["Xenon", "Xe", "54"]],
        "unique": ["Element"],
        "doc": lambda r: f"{r[0]} (chemical symbol {r[1]}) is a noble gas with atomic number {r[2]}.",
        "search": "noble gas atomic number {}",
    },
    {
        "id": "great-lakes", "topic": "the Great Lakes of North America",
        "header": ["Lake", "Surface Area (km2)", "Max Depth (m)"],
        "rows": [["Lake Superior", "82,100", "406"], ["Lake Michigan", "58,000", "281"],
                 ["Lake Huron", "59,600", "229"], ["Lake Erie", "25,700", "64"], ["Lake Ontario", "18,960", "244"]],
        "unique": ["Lake"],
        "doc": lambda r: f"{r[0]} is one of the Great Lakes with a surface area of {r[1]} km2 and a maximum "
                         f"depth of {r[2]} m.",
        "search": "Great Lakes surface area depth {}",
    },
    {
        "id": "nordic-capitals", "topic": "the Nordic countries",
        "header": ["Country", "Capital", "Currency"],
        "rows": [["Denmark", "Copenhagen", "Danish krone"], ["Norway", "Oslo", "Norwegian krone"],
                 ["Sweden", "Stockholm", "Swedish krona"], ["Finland", "Helsinki", "Euro"],
                 ["Iceland", "Reykjavík", "Icelandic króna"]],
        "unique": ["Country"],
        "doc": lambda r: f"{r[0]} is a Nordic country whose capital is {r[1]}. Its currency is the {r[2]}.",
        "search": "Nordic country capital currency {}",
    },
    {
        "id": "languages", "topic": "four widely used programming languages",
        "header": ["Language", "First Appeared", "Designer"],
        "rows": [["C", "1972", "Dennis Ritchie"], ["Python", "1991", "Guido van Rossum"],
                 ["Java", "1995", "James Gosling"], ["Rust", "2015", "Graydon Hoare"]],
        "unique": ["Language"],
        "doc": lambda r: f"The {r[0]} programming language first appeared in {r[1]}; it was designed by {r[2]}.",
        "search": "programming language designer first appeared {}",
    },
    {
        "id": "olympics", "topic": "the Summer Olympic Games hosts from 2000 to 2016",
        "header": ["Year", "Host City", "Country"],
        "rows": [["2000", "Sydney", "Australia"], ["2004", "Athens", "Greece"], ["2008", "Beijing", "China"],
                 ["2012", "London", "United Kingdom"], ["2016", "Rio de Janeiro", "Brazil"]],
        "unique": ["Year", "Host City"],
        "doc": lambda r: f"The {r[0]} Summer Olympics were hosted by {r[1]}, {r[2]}.",
        "search": "Summer Olympics host city {}",
    },
    {
        "id": "mountains", "topic": "the highest mountain of each continent",
        "header": ["Continent", "Mountain", "Elevation (m)"],
        "rows": [["Asia", "Mount Everest", "8,849"], ["South America", "Aconcagua", "6,961"],
                 ["North America", "Denali", "6,190"], ["Africa", "Kilimanjaro", "5,895"],
                 ["Europe", "Mount Elbrus", "5,642"], ["Antarctica", "Vinson Massif", "4,892"],
                 ["Australia", "Mount Kosciuszko", "2,228"]],
        "unique": ["Continent"],
        "doc": lambda r: f"{r[1]} is the highest mountain in {r[0]}, rising to {r[2]} m above sea level.",
        "search": "highest mountain continent elevation {}",
    },
]

DISTRACTORS = [
    ("Kiwi bird", "The kiwi is a flightless bird endemic to New Zealand and a national symbol."),
    ("Wellington", "Wellington is the capital city of New Zealand, located on the North Island."),
    ("Moon", "The Moon is Earth's only natural satellite and the fifth largest moon in the Solar System."),
    ("Periodic table", "The periodic table arranges chemical elements by atomic number and groups noble gases "
                       "in group 18."),
    ("Niagara Falls", "Niagara Falls lies on the Niagara River between Lake Erie and Lake Ontario."),
    ("Krone", "The krone is the name of several Nordic currencies, including those of Denmark and Norway."),
    ("Compiler", "A compiler translates source code of a programming language into machine code."),
    ("Olympic flame", "The Olympic flame is lit in Olympia, Greece, months before each Games."),
    ("Seven Summits", "The Seven Summits are the highest mountains of each of the seven continents."),
    ("Tramping", "Tramping is the New Zealand term for multi-day hiking on backcountry tracks with huts."),
]


def task_rows_name(task, row):
    return row[0] if task["id"] != "olympics" else f"{row[0]} Summer Olympics"


def corpus():
    docs = []
    for t in TASKS:
        for r in t["rows"]:
            name = task_rows_name(t, r)
            docs.append({"id": doc_id(name), "title": name, "text": t["doc"](r)})
    for title, text in DISTRACTORS:
        docs.append({"id": doc_id(title), "title": title, "text": text})
    return docs


def instance(t, with_id=True):
    q = t.get("question") or question(t["topic"], t["header"])
    d = {"question": q, "answer": bare(t["header"], t["rows"]), "unique_columns": t["unique"]}
    if with_id:
        d = {"id": t["id"], **d}
    return d


# --- desk script -----------------------------------------------------------

def split(rows, parts):
    k = (len(rows) + parts - 1) // parts
    return [rows[i:i + k] for i in range(0, len(rows), k)]


def entry(role, turn, text, seed, spread=0.3, **keys):
    old, new = logprobs_for(text, seed, spread)
    e = {"role": role, "turn": turn, **keys, "text": text, "logprobs": old, "rescore_logprobs": new}
    return e


def variant(text, seed, spread=0.3):
    old, new = logprobs_for(text, seed, spread)
    return {"text": text, "logprobs": old, "rescore_logprobs": new}


def desk_script():
    entries = []
    seed = 1
    for t in TASKS:
        parts = split(t["rows"], 2)
        prompts = [f"Find {', '.join(t['header'][1:])} for: " + "; ".join(task_rows_name(t, r) for r in part)
                   for part in parts]
        lead1 = (f"<think>The table has {len(t['rows'])} rows. I will split the entities into "
                 f"{len(prompts)} groups and research them in parallel.</think>\n"
                 + call("create_sub_agents", {"sub_agents": [{"prompt": p} for p in prompts]}))
        entries.append(entry("lead", 1, lead1, seed, query_id=t["id"]))
        seed += 1
        for p, part in zip(prompts, parts):
            first = task_rows_name(t, part[0])
            s1 = (f"<think>Start with a broad search.</think>\n"
                  + call("search", {"query": t["search"].format(first)}))
            s2 = (f"<think>The top hit looks right; open it.</think>\n"
                  + call("access", {"url": doc_id(first), "query": " ".join(t["header"][1:])}))
            facts = "\n".join("- " + ", ".join(f"{h}: {v}" for h, v in zip(t["header"], r)) for r in part)
            s3 = f"<think>I have what I need.</think>\nFindings:\n{facts}"
            for turn, text in ((1, s1), (2, s2), (3, s3)):
                entries.append(entry("subagent", turn, text, seed, task=p))
                seed += 1
        rows = t["rows"]
        wrong = [list(r) for r in rows]
        wrong[-1][-1] = wrong[-1][-1] + " (approx.)" if not wrong[-1][-1][0].isdigit() else "0"
        perfect = "<think>Merging the sub-agent findings.</think>\n" + fenced(t["header"], rows)
        one_wrong = "<think>Merging the sub-agent findings.</think>\n" + fenced(t["header"], wrong)
        missing = "<think>One entity is unconfirmed; leaving it out.</think>\n" + fenced(t["header"], rows[:-1])
        prose = ("<think>Summarising.</think>\nThe entities are "
                 + ", ".join(task_rows_name(t, r) for r in rows) + ".")
        variants = []
        for text in (perfect, one_wrong, missing, prose):
            variants.append(variant(text, seed))
            seed += 1
        entries.append({"role": "lead", "turn": 2, "query_id": t["id"], "variants": variants})
    return {"entries": entries}


# --- golden script ---------------------------------------------------------

NZ_NORTH = [r for r in NZ_ROWS if r[3] == "North Island"]
NZ_SOUTH = [r for r in NZ_ROWS if r[3] == "South Island"]
NZ_STEWART = [r for r in NZ_ROWS if r[3] == "Stewart Island"]
GOLDEN_PROMPTS = [
    "List every national park on the North Island of New Zealand with establish year, total area in km2 and "
    "administering regional councils.",
    "List every national park on the South Island of New Zealand with establish year, total area in km2 and "
    "administering regional councils.",
    "Find the establish year, total area in km2 and administering regional council of the national park on "
    "Stewart Island, New Zealand.",
]


def facts(rows):
    return "\n".join(f"- {r[0]}: established {r[1]}, {r[2]} km2, {r[3]}, councils: {r[4]}" for r in rows)


def golden_script():
    e = []
    seed = 1000

    def add(role, turn, text, **keys):
        nonlocal seed
        e.append(entry(role, turn, text, seed, **keys))
        seed += 1

    # The call inside <think> is a decoy and must not run.
    add("lead", 1,
        "<think>Thirteen parks across three islands. I could search myself:\n"
        + call("search", {"query": "decoy inside think"})
        + "\nbut the lead has no search tool, so delegate by island.</think>\n"
        + call("create_sub_agents", {"sub_agents": [{"prompt": p} for p in GOLDEN_PROMPTS]}),
        query_id="nz-parks")
    # North: two parallel searches, one access, then a summary.
    add("subagent", 1,
        "<think>SECRET-NORTH-1 two angles at once.</think>\n"
        + call("search", {"query": "North Island national park New Zealand"}) + "\n"
        + call("search", {"query": "Tongariro Egmont Whanganui established"}),
        task=GOLDEN_PROMPTS[0])
    add("subagent", 2,
        "<think>SECRET-NORTH-2 confirm the Whanganui council.</think>\n"
        + call("access", {"url": doc_id("Whanganui National Park"), "query": "regional council"}),
        task=GOLDEN_PROMPTS[0])
    add("subagent", 3,
        "<think>SECRET-NORTH-3 done.</think>\nNorth Island parks:\n" + facts(NZ_NORTH),
        task=GOLDEN_PROMPTS[0])
    # South: a malformed call first, then recovery.
    add("subagent", 1,
        "<think>SECRET-SOUTH-1</think>\n<tool_call>\n{\"name\": \"search\", \"arguments\": {\"query\": }\n</tool_call>",
        task=GOLDEN_PROMPTS[1])
    add("subagent", 2,
        "<think>SECRET-SOUTH-2 fix the JSON.</think>\n"
        + call("search", {"query": "South Island national park established area"}),
        task=GOLDEN_PROMPTS[1])
    add("subagent", 3,
        "<think>SECRET-SOUTH-3 the corpus covers all nine.</think>\nSouth Island parks:\n" + facts(NZ_SOUTH),
        task=GOLDEN_PROMPTS[1])
    # Stewart Island: one search, then a summary with an unclosed think span
    # after it.
    add("subagent", 1,
        "<think>SECRET-STEWART-1</think>\n" + call("search", {"query": "Rakiura Stewart Island national park"}),
        task=GOLDEN_PROMPTS[2])
    add("subagent", 2,
        "<think>SECRET-STEWART-2</think>\nStewart Island park:\n" + facts(NZ_STEWART)
        + "\n<think>SECRET-STEWART-TAIL never closed",
        task=GOLDEN_PROMPTS[2])
    add("lead", 2,
        "<think>All three reports are in; assemble thirteen rows.</think>\n" + fenced(NZ_HEADER, NZ_ROWS),
        query_id="nz-parks")

    lakes = TASKS[3]
    lake_prompt = "Find surface area in km2 and maximum depth in m of each of the five Great Lakes."
    add("lead", 1,
        "<think>Small table; one helper is enough.</think>\n"
        + call("create_sub_agents", {"sub_agents": [{"prompt": lake_prompt}]}),
        query_id="great-lakes")
    add("subagent", 1,
        "<think>SECRET-LAKES-1</think>\n" + call("search", {"query": "Great Lakes surface area maximum depth"}),
        task=lake_prompt)
    add("subagent", 2,
        "<think>SECRET-LAKES-2</think>\nGreat Lakes:\n"
        + "\n".join(f"- {r[0]}: {r[1]} km2, {r[2]} m deep" for r in lakes["rows"]),
        task=lake_prompt)
    add("lead", 2,
        "<think>Write the table.</think>\n" + fenced(lakes["header"], lakes["rows"]),
        query_id="great-lakes")
    return {"entries": e}


# --- generation log for the filter stage -----------------------------------

def generation_log():
    lakes = TASKS[3]
    h, rows = lakes["header"], lakes["rows"]
    jb = "\n```json\n" + json.dumps({"unique_columns": ["Lake"]}) + "\n```"
    off = [list(r) for r in rows]
    off[0][1], off[1][2], off[2][1] = "80,000", "300", "1"
    out = [
        {"id": "keep", "question": question(lakes["topic"], h), "response_a": fenced(h, rows) + jb,
         "response_b": fenced(h, list(reversed(rows))) + jb},
        {"id": "inconsistent", "question": question(lakes["topic"], h), "response_a": fenced(h, rows) + jb,
         "response_b": fenced(h, off) + jb},
        {"id": "short", "question": question(lakes["topic"], h), "response_a": fenced(h, rows[:2]) + jb,
         "response_b": fenced(h, rows[:2]) + jb},
        {"id": "dupes", "question": question(lakes["topic"], h),
         "response_a": fenced(h, rows + [rows[0]]) + jb, "response_b": fenced(h, rows + [rows[0]]) + jb},
        {"id": "nokey", "question": question(lakes["topic"], h), "response_a": fenced(h, rows),
         "response_b": fenced(h, rows), "unique_columns": ["Basin"]},
        {"id": "prose", "question": question(lakes["topic"], h), "response_a": "I could not find a table.",
         "response_b": fenced(h, rows) + jb},
        {"id": "stage1", "question": "", "response_a": "", "response_b": "", "failure": "validation_failure"},
    ]
    return out


def config(script):
    return {
        "seed": 7,
        "schedule": "threaded",
        "backend": {"kind": "scripted", "script": script},
        "tools": {"mode": "local", "corpus": "corpus.jsonl"},
        "prompts": {"dir": "../../data/prompts"},
        "advantage": {"group_size": 4},
        "sampling": {"temperature": 1.0, "top_p": 1.0, "max_tokens": 4096},
    }


def write_json(name, obj):
    (HERE / name).write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def main():
    with open(HERE / "corpus.jsonl", "w", encoding="utf-8") as f:
        for d in corpus():
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    write_json("fig7.json", [instance(TASKS[0], with_id=False)])
    write_json("golden_dataset.json", [instance(TASKS[0]), instance(TASKS[3])])
    write_json("desk_dataset.json", [instance(t) for t in TASKS])
    write_json("golden_script.json", golden_script())
    write_json("desk_script.json", desk_script())
    write_json("golden.json", config("golden_script.json"))
    write_json("desk.json", config("desk_script.json"))
    with open(HERE / "generation_log.jsonl", "w", encoding="utf-8") as f:
        for r in generation_log():
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
