"""Spec parsing, canonical serialization, and the parse/serialize round trip."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnlw.archspec import (ArchSpec, BACKBONES, VARIANTS, parse_spec, serialize_spec)
from rnlw.errors import SpecParseError


class TestParse:
    def test_minimal_one_line(self):
        spec = parse_spec("backbone=resnet101 variant=lw num_classes=21")
        assert spec.backbone == "resnet101"
        assert spec.variant == "lw"
        assert spec.num_classes == 21
        assert spec.channel_plan == (512, 256, 256, 256)
        assert spec.crp_stages == 4
        assert spec.input_size == (512, 512)

    def test_canonical_multi_line(self):
        text = """
        # a comment
        backbone = toy
        variant = original
        num_classes = 5
        channel_plan = 64,32,32,32
        crp_stages = 2
        input_size = 64x96
        """
        spec = parse_spec(text)
        assert spec.backbone == "toy"
        assert spec.channel_plan == (64, 32, 32, 32)
        assert spec.crp_stages == 2
        assert spec.input_size == (64, 96)

    def test_invalid_variant_lists_valid_values(self):
        with pytest.raises(SpecParseError) as err:
            parse_spec("backbone=resnet101 variant=lite num_classes=21")
        msg = str(err.value)
        for v in VARIANTS:
            assert v in msg

    def test_unknown_key_carries_line_number(self):
        with pytest.raises(SpecParseError, match="line 3"):
            parse_spec("backbone = toy\nvariant = lw\nbogus = 1\nnum_classes = 2")

    def test_missing_required_key(self):
        with pytest.raises(SpecParseError, match="num_classes"):
            parse_spec("backbone = toy\nvariant = lw")

    def test_duplicate_key(self):
        with pytest.raises(SpecParseError, match="duplicate"):
            parse_spec("backbone = toy\nbackbone = toy\nvariant = lw\nnum_classes = 2")

    def test_bad_input_size(self):
        with pytest.raises(SpecParseError, match="HxW"):
            parse_spec("backbone=toy variant=lw num_classes=2 input_size=512")

    def test_non_square_input_allowed(self):
        spec = parse_spec("backbone=resnet101 variant=lw num_classes=21 input_size=625x468")
        assert spec.input_size == (625, 468)


class TestRoundTrip:
    def test_default_spec(self):
        spec = ArchSpec("resnet101", "lw", 21)
        assert parse_spec(serialize_spec(spec)) == spec

    def test_serialization_idempotent(self):
        spec = ArchSpec("mobilenetv2", "lw", 40, channel_plan=(256, 256, 256, 256),
                        crp_stages=3, input_size=(625, 468),
                        mean=(0.5, 0.5, 0.5), std=(0.25, 0.25, 0.25))
        once = serialize_spec(spec)
        twice = serialize_spec(parse_spec(once))
        assert once == twice

    @settings(max_examples=100, deadline=None)
    @given(
        backbone=st.sampled_from(BACKBONES),
        variant=st.sampled_from(VARIANTS),
        num_classes=st.integers(1, 200),
        plan=st.tuples(*[st.sampled_from((4, 8, 16, 64, 256, 512))] * 4),
        crp_stages=st.integers(1, 6),
        size=st.tuples(st.integers(32, 1024), st.integers(32, 1024)),
        mean=st.tuples(*[st.floats(0, 1, allow_nan=False)] * 3),
        std=st.tuples(*[st.floats(0.01, 2, allow_nan=False)] * 3),
    )
    def test_fuzzed_round_trip(self, backbone, variant, num_classes, plan,
                               crp_stages, size, mean, std):
        spec = ArchSpec(backbone, variant, num_classes, plan, crp_stages, size, mean, std)
        assert parse_spec(serialize_spec(spec)) == spec


class TestDisplayName:
    @pytest.mark.parametrize("backbone,variant,name", [
        ("resnet101", "original", "RefineNet-101"),
        ("resnet101", "lw_with_rcu", "RefineNet-101-LW-WITH-RCU"),
        ("resnet101", "lw", "RefineNet-101-LW"),
        ("resnet50", "lw", "RefineNet-50-LW"),
        ("resnet152", "lw", "RefineNet-152-LW"),
        ("mobilenetv2", "lw", "RefineNet-MobileNet-v2-LW"),
    ])
    def test_table_row_names(self, backbone, variant, name):
        assert ArchSpec(backbone, variant, 21).display_name() == name
