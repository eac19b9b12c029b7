"""Transpile decision trees to C.

Two emitter styles:
  * NESTED_IF   -- the tree becomes a chain of nested if/else statements
                   reading one global double per feature (no parameters).
  * ARRAY_RECURSIVE -- child/feature/threshold/class arrays plus a recursive
                   walker, the layout used by general-purpose model porters.

Both styles share predict()'s contract: left branch on feature <= threshold,
return 0 or 1. Thresholds are printed with shortest round-trip formatting so
the compiled comparison is bit-identical to the in-memory one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .cart import DecisionTree, Internal, Leaf, TreeNode
from .flowdata import FlowSchema


class CodegenError(ValueError):
    pass


class EmitterStyle(Enum):
    NESTED_IF = "nested-if"
    ARRAY_RECURSIVE = "array-recursive"


@dataclass(frozen=True)
class EmittedSource:
    text: str
    style: EmitterStyle
    stats: tuple[int, int, int]  # (lines, emitted_nodes, max_nesting_depth)
    feature_variable_names: tuple[str, ...]


@dataclass(frozen=True)
class FirmwareBundle:
    program_text: str
    iteration_count: int
    feature_count: int

    def __post_init__(self):
        leftover = re.findall(r"\{\{[A-Z_]+\}\}", self.program_text)
        if leftover:
            raise CodegenError(f"unresolved template placeholders: {leftover}")


def feature_variables(schema: FlowSchema) -> tuple[str, ...]:
    """Deterministic, unique C identifiers for the per-feature globals."""
    names = []
    seen = set()
    for i, raw in enumerate(schema.feature_names):
        base = re.sub(r"[^0-9A-Za-z]", "_", raw).lower().strip("_") or f"col{i}"
        name = f"f_{base}"
        while name in seen:
            name += "_"
        seen.add(name)
        names.append(name)
    return tuple(names)


def c_double(value: float) -> str:
    """Shortest decimal text that strtod parses back to the same double."""
    text = repr(float(value))
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def _check(tree: DecisionTree, schema: FlowSchema) -> None:
    if tree.n_features != schema.feature_count:
        raise CodegenError(
            f"tree expects {tree.n_features} features, schema has {schema.feature_count}"
        )
    for index in tree.features_used:
        if not 0 <= index < schema.feature_count:
            raise CodegenError(f"feature index {index} out of schema range")


def _globals_block(variables: tuple[str, ...]) -> str:
    return "\n".join(f"double {name};" for name in variables)


def emit_nested_if(tree: DecisionTree, schema: FlowSchema) -> EmittedSource:
    """Emit predict() as nested if/else statements over the feature globals."""
    _check(tree, schema)
    variables = feature_variables(schema)
    body: list[str] = []

    def emit(node: TreeNode, indent: int) -> None:
        pad = "    " * indent
        if isinstance(node, Leaf):
            body.append(f"{pad}return {node.predicted};")
            return
        body.append(f"{pad}if ({variables[node.feature_index]} <= {c_double(node.threshold)}) {{")
        emit(node.left, indent + 1)
        body.append(f"{pad}}} else {{")
        emit(node.right, indent + 1)
        body.append(f"{pad}}}")

    emit(tree.root, 1)
    text = (
        _globals_block(variables)
        + "\n\nint predict(void) {\n"
        + "\n".join(body)
        + "\n}\n"
    )
    stats = (text.count("\n"), tree.node_count, tree.depth)
    return EmittedSource(text, EmitterStyle.NESTED_IF, stats, variables)


def _flatten(tree: DecisionTree) -> tuple[list, list, list, list, list]:
    """Preorder arrays: left, right, feature (-2 at leaves), threshold, class counts."""
    left: list[int] = []
    right: list[int] = []
    feature: list[int] = []
    threshold: list[float] = []
    counts: list[tuple[int, int]] = []

    def walk(node: TreeNode) -> int:
        index = len(left)
        left.append(-1)
        right.append(-1)
        if isinstance(node, Leaf):
            feature.append(-2)
            threshold.append(-2.0)
            counts.append(node.class_counts)
        else:
            feature.append(node.feature_index)
            threshold.append(node.threshold)
            counts.append((0, 0))
            left[index] = walk(node.left)
            right[index] = walk(node.right)
        return index

    walk(tree.root)
    return left, right, feature, threshold, counts


def emit_array_recursive(tree: DecisionTree, schema: FlowSchema) -> EmittedSource:
    """Emit predict() backed by node arrays and a recursive walker."""
    _check(tree, schema)
    variables = feature_variables(schema)
    left, right, feature, threshold, counts = _flatten(tree)
    n = len(left)

    def int_array(name: str, values: list[int]) -> str:
        return f"static const int {name}[{n}] = {{{', '.join(str(v) for v in values)}}};"

    counts_text = ", ".join(f"{{{c0}, {c1}}}" for c0, c1 in counts)
    thresholds_text = ", ".join(c_double(t) for t in threshold)
    text = f"""{_globals_block(variables)}

{int_array("tree_left", left)}
{int_array("tree_right", right)}
{int_array("tree_feature", feature)}
static const double tree_threshold[{n}] = {{{thresholds_text}}};
static const int tree_classes[{n}][2] = {{{counts_text}}};

static int tree_walk(const double features[], int node) {{
    int best;
    int i;
    if (tree_feature[node] >= 0) {{
        if (features[tree_feature[node]] <= tree_threshold[node]) {{
            return tree_walk(features, tree_left[node]);
        }}
        return tree_walk(features, tree_right[node]);
    }}
    best = 0;
    for (i = 1; i < 2; i++) {{
        if (tree_classes[node][i] > tree_classes[node][best]) {{
            best = i;
        }}
    }}
    return best;
}}

int predict(void) {{
    double features[{schema.feature_count}];
{chr(10).join(f'    features[{i}] = {name};' for i, name in enumerate(variables))}
    return tree_walk(features, 0);
}}
"""
    stats = (text.count("\n"), n, 0)
    return EmittedSource(text, EmitterStyle.ARRAY_RECURSIVE, stats, variables)


def emit(tree: DecisionTree, schema: FlowSchema, style: EmitterStyle) -> EmittedSource:
    if style is EmitterStyle.NESTED_IF:
        return emit_nested_if(tree, schema)
    return emit_array_recursive(tree, schema)


def emit_header(schema: FlowSchema) -> str:
    """predict.h: extern feature globals plus the predict prototype."""
    variables = feature_variables(schema)
    lines = ["#ifndef EDGETREE_PREDICT_H", "#define EDGETREE_PREDICT_H", ""]
    lines += [f"extern double {name};" for name in variables]
    lines += ["", "int predict(void);", "", "#endif"]
    return "\n".join(lines) + "\n"


FIRMWARE_TEMPLATE = r"""/* Timing harness around a generated flow classifier.
 *
 * Wire protocol (newline-terminated ASCII):
 *   request:  comma-separated feature values
 *   response: P,<class>,T,<total_elapsed_microseconds>,N,<iterations>
 *
 * The inner loop XORs every prediction into a volatile sink so the
 * repeated calls cannot be optimised away.
 */

{{FEATURE_GLOBALS}}

{{PREDICT_FUNCTION}}

#define EDGETREE_FEATURE_COUNT {{FEATURE_COUNT}}
#define EDGETREE_ITERATIONS {{ITERATIONS}}UL

static double *const feature_slots[EDGETREE_FEATURE_COUNT] = {
{{FEATURE_SLOTS}}
};

static volatile unsigned int prediction_sink;

static int run_record(unsigned long *elapsed_us, unsigned long (*clock_us)(void)) {
    unsigned long start, stop, i;
    int cls = 0;
    start = clock_us();
    for (i = 0; i < EDGETREE_ITERATIONS; i++) {
        cls = predict();
        prediction_sink ^= (unsigned int)cls;
    }
    stop = clock_us();
    *elapsed_us = stop - start;
    return cls;
}

#ifdef ARDUINO

#include <stdlib.h>

static unsigned long arduino_clock_us(void) { return micros(); }

void setup(void) {
    Serial.begin(115200);
}

void loop(void) {
    static char line[1024];
    static int pos = 0;
    while (Serial.available() > 0) {
        char c = (char)Serial.read();
        if (c != '\n') {
            if (pos < (int)sizeof(line) - 1) line[pos++] = c;
            continue;
        }
        line[pos] = '\0';
        pos = 0;
        char *cursor = line;
        for (int f = 0; f < EDGETREE_FEATURE_COUNT; f++) {
            *feature_slots[f] = strtod(cursor, &cursor);
            if (*cursor == ',') cursor++;
        }
        unsigned long elapsed;
        int cls = run_record(&elapsed, arduino_clock_us);
        Serial.print("P,");
        Serial.print(cls);
        Serial.print(",T,");
        Serial.print(elapsed);
        Serial.print(",N,");
        Serial.println(EDGETREE_ITERATIONS);
    }
}

#else /* host shim */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

static unsigned long host_clock_us(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (unsigned long)ts.tv_sec * 1000000UL + (unsigned long)(ts.tv_nsec / 1000L);
}

int main(void) {
    char *line = NULL;
    size_t cap = 0;

    while (getline(&line, &cap, stdin) != -1) {
        char *cursor = line;
        for (int f = 0; f < EDGETREE_FEATURE_COUNT; f++) {
            char *end = NULL;
            *feature_slots[f] = strtod(cursor, &end);
            if (end == cursor) {
                fprintf(stderr, "bad feature %d in: %s", f, line);
                free(line);
                return 2;
            }
            cursor = end;
            if (*cursor == ',') cursor++;
        }
        unsigned long elapsed;
        int cls = run_record(&elapsed, host_clock_us);
        printf("P,%d,T,%lu,N,%lu\n", cls, elapsed, (unsigned long)EDGETREE_ITERATIONS);
        fflush(stdout);
    }
    fprintf(stderr, "S,%u\n", prediction_sink);
    free(line);
    return 0;
}

#endif
"""


def emit_firmware(
    tree: DecisionTree,
    schema: FlowSchema,
    style: EmitterStyle = EmitterStyle.NESTED_IF,
    iteration_count: int = 100000,
) -> FirmwareBundle:
    """Inject a predict function into the serial timing-harness template."""
    if iteration_count < 1:
        raise CodegenError(f"iteration_count must be >= 1, got {iteration_count}")
    src = emit(tree, schema, style)
    slots = ",\n".join(f"    &{name}" for name in src.feature_variable_names)
    program = FIRMWARE_TEMPLATE
    for key, value in (
        ("{{FEATURE_GLOBALS}}", _globals_block(src.feature_variable_names)),
        ("{{PREDICT_FUNCTION}}", src.text.split("\n\n", 1)[1].rstrip("\n")),
        ("{{FEATURE_COUNT}}", str(schema.feature_count)),
        ("{{ITERATIONS}}", str(iteration_count)),
        ("{{FEATURE_SLOTS}}", slots),
    ):
        program = program.replace(key, value)
    return FirmwareBundle(program, iteration_count, schema.feature_count)


def source_stats(src: EmittedSource) -> tuple[int, int, int]:
    """(lines, emitted_nodes, max_nesting_depth) of an emission."""
    return src.stats
