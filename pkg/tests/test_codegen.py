import re

import numpy as np
import pytest

from edgetree.cart import DecisionTree, Internal, Leaf
from edgetree.codegen import (
    CodegenError,
    EmitterStyle,
    c_double,
    emit_array_recursive,
    emit_firmware,
    emit_header,
    emit_nested_if,
    feature_variables,
    source_stats,
)
from edgetree.flowdata import FlowSchema

from cart_oracle import oracle_predict_path, tree_to_tuple
from conftest import random_tree

IF_LINE = re.compile(r"^if \((\w+) <= (\S+)\) \{$")
RETURN_LINE = re.compile(r"^return ([01]);$")


def parse_nested_if(text, variables):
    """Test-only micro-parser: rebuild the decision structure from emitted C."""
    body_text = text.split("int predict(void) {\n", 1)[1]
    lines = [line.strip() for line in body_text.splitlines() if line.strip() and line.strip() != "}"]
    # the final dangling '}' of the function body was filtered with the others;
    # structure is recovered purely from if/else/return ordering
    pos = 0

    def parse():
        nonlocal pos
        line = lines[pos]
        match = RETURN_LINE.match(line)
        if match:
            pos += 1
            return ("leaf", int(match.group(1)))
        match = IF_LINE.match(line)
        assert match, f"unexpected line: {line!r}"
        pos += 1
        left = parse()
        assert lines[pos] == "} else {", lines[pos]
        pos += 1
        right = parse()
        return ("node", variables.index(match.group(1)), float(match.group(2)), left, right)

    node = parse()
    assert pos == len(lines)
    return node


def classes_only(node):
    """Reduce a nested-tuple tree to predicted classes at the leaves."""
    if node[0] == "leaf":
        c0, c1 = node[1]
        return ("leaf", 1 if c1 > c0 else 0)
    return ("node", node[1], node[2], classes_only(node[3]), classes_only(node[4]))


def schema_for(n_features):
    return FlowSchema(tuple(f"f{i}" for i in range(n_features)))


def stump_tree():
    return DecisionTree(Internal(0, 2.5, Leaf((4, 0)), Leaf((0, 4))), 2)


class TestFeatureVariables:
    def test_sanitizes_and_prefixes(self):
        schema = FlowSchema(("IN_BYTES", "L4_SRC_PORT", "Flow Duration"))
        assert feature_variables(schema) == ("f_in_bytes", "f_l4_src_port", "f_flow_duration")

    def test_collisions_are_deduplicated(self):
        schema = FlowSchema(("a.b", "a_b"))
        names = feature_variables(schema)
        assert len(set(names)) == 2

    def test_deterministic(self):
        schema = FlowSchema(("x", "y"))
        assert feature_variables(schema) == feature_variables(schema)


class TestCDouble:
    @pytest.mark.parametrize("value", [2.5, 0.1, 1e-7, 123456.789, -3.0, 1 / 3])
    def test_round_trip(self, value):
        assert float(c_double(value)) == value

    def test_integral_values_stay_doubles(self):
        assert c_double(3.0) == "3.0"


class TestNestedIf:
    def test_stump_shape(self):
        src = emit_nested_if(stump_tree(), schema_for(2))
        assert src.text.count("if (") == 1
        assert src.text.count("} else {") == 1
        assert src.text.count("return") == 2
        assert "if (f_f0 <= 2.5)" in src.text

    def test_single_leaf_single_return(self):
        tree = DecisionTree(Leaf((0, 7)), 2)
        src = emit_nested_if(tree, schema_for(2))
        assert src.text.count("if") == 0
        assert src.text.count("return 1;") == 1

    def test_inverse_parse_depth_12(self, rng):
        tree = random_tree(rng, 12, 4)
        src = emit_nested_if(tree, schema_for(4))
        parsed = parse_nested_if(src.text, list(src.feature_variable_names))
        assert parsed == classes_only(tree_to_tuple(tree.root))

    def test_emission_is_deterministic(self, rng):
        tree = random_tree(rng, 6, 3)
        a = emit_nested_if(tree, schema_for(3))
        b = emit_nested_if(tree, schema_for(3))
        assert a.text == b.text

    def test_stats(self, rng):
        tree = random_tree(rng, 5, 3)
        src = emit_nested_if(tree, schema_for(3))
        lines, nodes, nesting = source_stats(src)
        assert nodes == tree.node_count
        assert nesting == tree.depth
        assert lines == src.text.count("\n")

    def test_schema_arity_mismatch(self):
        with pytest.raises(CodegenError):
            emit_nested_if(stump_tree(), schema_for(1))


class TestArrayRecursive:
    def test_stump_arrays_length_3(self):
        src = emit_array_recursive(stump_tree(), schema_for(2))
        assert "static const int tree_left[3]" in src.text
        assert "static const double tree_threshold[3]" in src.text

    def test_single_leaf_arrays_length_1(self):
        tree = DecisionTree(Leaf((5, 0)), 1)
        src = emit_array_recursive(tree, schema_for(1))
        assert "tree_left[1]" in src.text

    def test_stats_report_zero_nesting(self, rng):
        tree = random_tree(rng, 6, 2)
        src = emit_array_recursive(tree, schema_for(2))
        _, nodes, nesting = source_stats(src)
        assert nodes == tree.node_count
        assert nesting == 0

    def test_array_contents_match_tree(self):
        src = emit_array_recursive(stump_tree(), schema_for(2))
        assert "tree_left[3] = {1, -1, -1}" in src.text
        assert "tree_right[3] = {2, -1, -1}" in src.text
        assert "tree_feature[3] = {0, -2, -2}" in src.text
        assert "{2.5, -2.0, -2.0}" in src.text
        assert "{{0, 0}, {4, 0}, {0, 4}}" in src.text


class TestHeader:
    def test_globals_and_prototype(self):
        header = emit_header(schema_for(2))
        assert "extern double f_f0;" in header
        assert "extern double f_f1;" in header
        assert "int predict(void);" in header


class TestFirmware:
    def test_no_unresolved_placeholders(self):
        bundle = emit_firmware(stump_tree(), schema_for(2))
        assert re.findall(r"\{\{[A-Z_]+\}\}", bundle.program_text) == []

    def test_iteration_count_appears_once(self):
        bundle = emit_firmware(stump_tree(), schema_for(2), iteration_count=100000)
        assert len(re.findall(r"(?<!\d)100000(?!\d)", bundle.program_text)) == 1
        assert "#define EDGETREE_ITERATIONS 100000UL" in bundle.program_text

    def test_contains_predict_and_globals(self):
        bundle = emit_firmware(stump_tree(), schema_for(2))
        assert "int predict(void)" in bundle.program_text
        assert "double f_f0;" in bundle.program_text
        assert "volatile" in bundle.program_text

    def test_array_style_injection(self):
        bundle = emit_firmware(stump_tree(), schema_for(2), EmitterStyle.ARRAY_RECURSIVE)
        assert "tree_walk" in bundle.program_text

    def test_bad_iteration_count(self):
        with pytest.raises(CodegenError):
            emit_firmware(stump_tree(), schema_for(2), iteration_count=0)


class TestThresholdTextRoundTrip:
    def test_comparison_outcomes_preserved(self, rng):
        tree = random_tree(rng, 8, 3)
        src = emit_nested_if(tree, schema_for(3))
        emitted = re.findall(r"<= (\S+)\)", src.text)
        thresholds = []

        def collect(node):
            if isinstance(node, Internal):
                thresholds.append(node.threshold)
                collect(node.left)
                collect(node.right)

        collect(tree.root)
        assert [float(t) for t in emitted] == thresholds
