#!/usr/bin/env python3
"""Regenerates the JSON/JSONL fixtures in this directory."""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent


def write_jsonl(name, rows):
    with open(HERE / name, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_json(name, obj):
    with open(HERE / name, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write("\n")


# Preference ballots whose per-annotator first-place shares match the
# published study: annotators 1-3 cast 100 single-choice ballots each,
# annotator 4 cast 86 ballots of which 14 name two steps.
def table2_ballots():
    rng = random.Random(20231005)
    rows = []
    singles = {
        "1": [3, 25, 22, 29, 21],
        "2": [2, 28, 28, 25, 17],
        "3": [13, 43, 21, 13, 10],
        "4": [13, 19, 14, 16, 10],
    }
    ties = [(1, 2)] * 2 + [(2, 3)] * 3 + [(2, 4)] * 3 + [(3, 4)] * 2 + [(3, 5)] * 2 + [(4, 5)] * 2
    for annotator, counts in singles.items():
        choices = [[s + 1] for s, c in enumerate(counts) for _ in range(c)]
        if annotator == "4":
            choices += [list(t) for t in ties]
        rng.shuffle(choices)
        for i, chosen in enumerate(choices):
            rows.append({
                "article_id": f"a{i:03d}",
                "annotator_id": annotator,
                "chosen_steps": chosen,
                "ts": "2023-09-01T00:00:00Z",
                "blinding_seed": 0,
            })
    write_jsonl("table2_ballots.jsonl", rows)


ARTICLES = [
    {
        "article_id": "harbor",
        "text": (
            "The Kestrel Bridge in Marlow opened to traffic on Monday after four years of construction. "
            "The crossing cost 120 million pounds and links the harbor district with the northern estates. "
            "Mayor Ellen Tate cut the ribbon in front of a crowd of about 3000 residents. "
            "Engineers from Halden Works designed the 480 metre span to withstand winter storms. "
            "Local shop owners said the old ferry route had cut them off from customers for decades. "
            "The project was delayed in 2021 when a supply dispute halted steel deliveries for six months. "
            "Traffic planners expect 14000 vehicles to use the bridge each day. "
            "A cycle lane and a pedestrian walkway run along the eastern side of the deck."
        ),
        "reference_summary": "Marlow's Kestrel Bridge opened on Monday after a four-year build costing 120 million pounds.",
    },
    {
        "article_id": "orchard",
        "text": (
            "Apple growers in the Vellen Valley reported their largest harvest in a decade this autumn. "
            "The regional cooperative said members picked 52000 tonnes of fruit, up 18 percent on last year. "
            "Warm spring weather and the absence of late frosts helped the blossoms set early. "
            "Cooperative chair Marcus Oyelaran said prices at the Brenford market had fallen as a result. "
            "Several farms hired extra seasonal workers from Portugal to finish picking before the rains. "
            "Cider makers in the valley plan to release a special vintage next spring. "
            "Growers warned that storage space is running short across the region. "
            "The cooperative will ask the county council for help building a new cold store."
        ),
        "reference_summary": "Vellen Valley growers picked 52000 tonnes of apples, their biggest harvest in ten years.",
    },
    {
        "article_id": "library",
        "text": (
            "The Ashcombe public library reopened on Saturday after a two-year renovation. "
            "The building now houses a children's wing, a recording studio and 40 new study desks. "
            "Head librarian Priya Nandakumar said visitor numbers tripled on the first weekend. "
            "The work was funded by a 6 million pound grant from the Carrow Foundation. "
            "Architects kept the original 1908 reading room and restored its glass ceiling. "
            "Opening hours have been extended to 9 pm on weekdays. "
            "The library will host a lecture series with local authors starting in March. "
            "Membership remains free for all residents of the borough."
        ),
        "reference_summary": "Ashcombe library reopened on Saturday after a two-year, 6 million pound renovation.",
    },
]

# Five summaries per article. Every step keeps the same word count and adds
# entities, so entity density rises strictly from step to step.
CHAINS = {
    "harbor": [
        (["Kestrel Bridge"], "This article covers a new crossing that opened this week after many years of work, with a local official and many residents there, and it notes costs, delays and daily traffic."),
        (["Marlow", "Ellen Tate"], "The Kestrel Bridge opened this week in Marlow after many years of work, with Mayor Ellen Tate and many residents there, and it notes costs, delays and daily traffic."),
        (["120 million pounds", "3000"], "The Kestrel Bridge opened on Monday in Marlow after 4 years, costing 120 million pounds, with Mayor Ellen Tate and 3000 residents there, noting delays and traffic."),
        (["Halden Works", "2021"], "The Kestrel Bridge by Halden Works opened Monday in Marlow after 4 years and a 2021 delay, costing 120 million pounds, with Mayor Ellen Tate and 3000 residents."),
        (["480 metre", "14000"], "Halden Works' 480 metre Kestrel Bridge opened Monday in Marlow after 4 years and a 2021 delay, costing 120 million pounds; Mayor Ellen Tate, 3000 residents; 14000 vehicles daily."),
    ],
    "orchard": [
        (["Vellen Valley"], "This article describes a very large fruit harvest this autumn in a farming region, along with what growers, buyers and local cider makers now expect to happen next in the area."),
        (["52000 tonnes", "Marcus Oyelaran"], "Growers in the Vellen Valley picked 52000 tonnes this autumn, and Marcus Oyelaran said prices fell, while local cider makers now expect to release a special vintage next."),
        (["18 percent", "Brenford"], "Vellen Valley growers picked 52000 tonnes this autumn, up 18 percent; Marcus Oyelaran said Brenford prices fell, while local cider makers now expect to release a special vintage."),
        (["Portugal"], "Vellen Valley growers picked 52000 tonnes, up 18 percent, with workers from Portugal; Marcus Oyelaran said Brenford prices fell, and local cider makers now plan a special vintage next spring."),
        (["Vellen Valley cooperative", "county council"], "The Vellen Valley Cooperative picked 52000 tonnes, up 18 percent, with workers from Portugal; Marcus Oyelaran said Brenford prices fell; it will ask the County Council for a cold store."),
    ],
    "library": [
        (["Ashcombe"], "This article reports that a public library has reopened after a long renovation with several new rooms and facilities, longer opening hours, and more events for local people."),
        (["Priya Nandakumar", "Saturday"], "The Ashcombe public library reopened on Saturday after a long renovation, and Priya Nandakumar said visitor numbers rose sharply, with longer opening hours and more events planned."),
        (["Carrow Foundation", "6 million pound"], "The Ashcombe library reopened Saturday after a renovation funded by a 6 million pound Carrow Foundation grant; Priya Nandakumar said visitor numbers tripled, with more events planned."),
        (["1908", "40"], "The Ashcombe library reopened Saturday after a 6 million pound Carrow Foundation renovation keeping its 1908 reading room and adding 40 desks; Priya Nandakumar said visitors tripled."),
        (["9 pm", "March"], "Ashcombe library reopened Saturday after a 6 million pound Carrow Foundation renovation keeping its 1908 reading room, adding 40 desks, opening to 9 pm, with March lectures; visitors tripled."),
    ],
}


def chain_body(article_id, drop_steps=0):
    steps = CHAINS[article_id]
    if drop_steps:
        steps = steps[:-drop_steps]
    return json.dumps([{"Missing_Entities": "; ".join(m), "Denser_Summary": s} for m, s in steps], ensure_ascii=False)


def corpus_and_mocks():
    write_jsonl("corpus3.jsonl", ARTICLES)
    match = {a["article_id"]: a["text"].split(". ")[0] for a in ARTICLES}
    write_json("mock_cod.json", {
        "model": "scripted-cod",
        "rules": [
            {"match": match[a], "responses": [{"body": "Here you go:\n" + chain_body(a)}]} for a in CHAINS
        ],
        "default": [{"status": 404}],
    })
    # The third article answers with malformed JSON, then a 4-step chain, then
    # prose: every retry breaks the contract.
    write_json("mock_cod_partial.json", {
        "model": "scripted-cod",
        "rules": [
            {"match": match["harbor"], "responses": [{"status": 429}, {"body": chain_body("harbor")}]},
            {"match": match["orchard"], "responses": [{"body": chain_body("orchard")}]},
            {"match": match["library"], "responses": [
                {"body": "[{\"Missing_Entities\": \"x\", \"Denser_Summary\": "},
                {"body": chain_body("library", drop_steps=1)},
                {"body": "I cannot help with that."},
            ]},
        ],
        "default": [{"status": 404}],
    })
    write_json("mock_likert.json", {
        "model": "scripted-judge",
        "rules": [
            {"match": "with respect to Informative", "responses": [{"body": "5"}]},
            {"match": "with respect to Quality", "responses": [{"body": "Score: 4"}]},
            {"match": "with respect to Coherence", "responses": [{"body": "4"}]},
            {"match": "with respect to Attributable", "responses": [{"body": "5 - every claim is supported"}]},
            {"match": "with respect to Overall", "responses": [{"body": "4"}]},
        ],
        "default": [{"body": "3"}],
    })


if __name__ == "__main__":
    table2_ballots()
    corpus_and_mocks()
