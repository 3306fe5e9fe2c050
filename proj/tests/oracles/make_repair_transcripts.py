"""Writes the scripted-sampler transcripts under tests/fixtures/repair.

Every document is a plain standalone picture; errors are planted by putting an
undefined control sequence at the start of a chosen line.
"""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "repair"


def document(n_lines, tag, bad_line=None, soft_line=None):
    body_lines = n_lines - 6
    lines = ["\\documentclass[tikz]{standalone}", "\\usetikzlibrary{calc}", "\\begin{document}",
             "\\begin{tikzpicture}"]
    for k in range(body_lines):
        lines.append("\\draw (0,%d) -- (%d,%d);" % (k, k + 1, k))
    # Only the last body line differs between responses, so shared prefixes match.
    lines[-1] += " %% %s" % tag
    lines += ["\\end{tikzpicture}", "\\end{document}"]
    assert len(lines) == n_lines
    if bad_line:
        lines[bad_line - 1] = "\\undefinedmacro" + lines[bad_line - 1]
    if soft_line:
        lines[soft_line - 1] = "\\softerror" + lines[soft_line - 1]
    return "\n".join(lines)


def write(name, rows):
    with open(OUT / name, "w") as fh:
        for caption, responses in rows:
            fh.write(json.dumps({"caption": caption, "responses": responses}) + "\n")


OUT.mkdir(parents=True, exist_ok=True)

# Line 10 of 20 fails, fails again after the first repair, then compiles.
write("persistent_line10.jsonl", [(
    "A grid of twenty lines",
    [document(20, "first", bad_line=10), document(20, "second", bad_line=10), document(20, "fixed")],
)])

rows = []
for k in range(12):
    rows.append(("clean caption %02d" % k, [document(10, "c%d" % k)]))
for k in range(3):
    rows.append(("soft error caption %02d" % k, [document(10, "s%d" % k, soft_line=6)]))
for k in range(4):
    rows.append(("late error caption %02d" % k,
                 [document(10, "l%d" % k, bad_line=6), document(10, "l%d fixed" % k)]))
rows.append(("early persistent caption",
             [document(10, "e", bad_line=3), document(10, "e again", bad_line=3), document(10, "e fixed")]))
write("batch20.jsonl", rows)
with open(OUT / "batch20_captions.jsonl", "w") as fh:
    for k, (caption, _) in enumerate(rows):
        fh.write(json.dumps({"id": "cap%02d" % k, "caption": caption}) + "\n")
