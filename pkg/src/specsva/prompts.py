"""Prompt text for every LLM call in the pipeline.

Changing anything here changes request digests, so recorded transcripts stop
matching; the fixture check reports that as drift.

The formalization prompt is rebuilt from a prose description of the
original wording, so treat it as an approximation rather than a copy.
"""

TEMPLATE_HINT = """\
Describe each behavior using one of these patterns:
Signal values:
  When <condition>, <signal> = <value>
  e.g. When ENABLE is high, READY = 1
Signal transitions:
  <signal> changes from <val1> to <val2>
  Only <condition>
  e.g. DATA_VALID changes from 0 to 1 only when CLK_EN is high
Reset behaviors:
  Reset clears <signal>
  After reset is deasserted, <signal> must transition to 1
  e.g. After RESETN is deasserted, INIT_DONE must transition to 1"""

NO_HISTORY = "(no prior items)"

EXTRACT_SYSTEM = """\
You extract function descriptions from hardware design specifications.
Each description is one sentence stating a checkable behavior of named signals.
Stay consistent with the previously extracted items and do not repeat them.
Do not invent signals that the specification does not mention."""

EXTRACT_USER = """\
Template hint:
{template}

Specification segment {index}:
{segment}

Previously extracted items (prior context, oldest first):
{history}

Respond with one function description per line, each line starting with "- ".
If the segment describes no behavior, respond with the single line NONE."""

MAPPING_SYSTEM = """\
You read hardware design specifications and list every signal they define."""

MAPPING_USER = """\
List every signal named in the specification below together with a short
description phrase taken from the text. Mark top-level ports with "port": true.
Answer with a JSON array of objects with keys "name", "description" and "port",
inside a ```json fenced block.

Specification:
{spec}"""

SUBSTITUTE_SYSTEM = """\
You rewrite hardware behavior sentences so that signals are referred to by
their exact names. Replace every descriptive phrase that matches an entry of
the signal table with the signal name. Change nothing else. Never use a name
that is not in the table."""

SUBSTITUTE_USER = """\
Signal table (name: description):
{table}

Sentence:
{sentence}

Respond with the rewritten sentence on a single line."""

SUBSTITUTE_RETRY = """\
Your previous rewrite used identifiers that are not in the signal table: {bad}.
Use only names from the table.

Signal table (name: description):
{table}

Sentence:
{sentence}

Respond with the rewritten sentence on a single line."""

CRITICAL_SYSTEM = """\
You classify hardware behavior sentences. A sentence is critical when it
describes a causal relationship between two events, for example a transition
of one signal causing a transition of another. Simple factual statements such
as bit widths or naming are not critical."""

CRITICAL_USER = """\
Sentence:
{sentence}

Is this sentence critical? Begin your answer with YES or NO."""

FORMALIZE_SYSTEM = """\
You translate hardware function descriptions into formal statements.
Think step by step:
1. List the separate verification objects the sentence contains.
2. For each object, state its condition and its action.
3. Write one formal statement per object.
Each statement is a single line that uses the signal names verbatim and an
explicit implication connective "=>". Put the statements, one per line, in a
fenced ``` block after your reasoning. Only the fenced block is read."""

FORMALIZE_USER = """\
Known signals: {signals}

Sentence:
{sentence}"""

DECOMPOSE_SYSTEM = """\
You turn a formal statement into a SystemVerilog assertion antecedent and
consequent. Write each side as a SystemVerilog sequence: boolean expressions
over signals joined by fixed delays ##N. Do not use |->, ranged delays,
repetition operators or clocking events. Use only the known signals."""

DECOMPOSE_USER = """\
Known signals: {signals}

Formal statement:
{statement}

Answer with two labeled fenced blocks:
ANTECEDENT:
```
<sequence>
```
CONSEQUENT:
```
<sequence>
```"""

DECOMPOSE_RETRY = """\
{base}

Your previous answer was rejected: {error}
Fix it and answer again in the same format."""

ONESHOT_SYSTEM = """\
You write SystemVerilog assertions for hardware behavior statements."""

ONESHOT_USER = """\
Known signals: {signals}
Clock: {clock}
Reset: {reset}

Statement:
{statement}

Write one concurrent assertion named {name} as a property declaration followed
by its assert directive, inside a ```systemverilog fenced block."""
