"""Decoder blocks and backbones: closed-form parameter counts, residual
identities on zeroed weights, and the structural contracts per variant."""
import numpy as np
import pytest

from rnlw import ops
from rnlw.analyzer import count_params
from rnlw.archspec import ArchSpec
from rnlw.backbones import build_backbone
from rnlw.blocks import assemble_refinenet, build_crp, build_fusion, build_rcu
from rnlw.errors import BuildError
from rnlw.graph import Graph, execute, infer_shapes, random_weights
from rnlw.tensor import ConvParams


def zeroed_weights(graph):
    """All conv weights/biases zero, bn affine at identity."""
    w = random_weights(graph, 0)
    for name in w:
        if name.endswith(".scale"):
            continue
        w[name] = np.zeros_like(w[name])
    return w


def graph_params(graph, prefix=""):
    return sum(l.params for l in count_params(graph).layers
               if l.node_id.startswith(prefix))


def conv_nodes(graph):
    return [n for n in graph.nodes.values() if n.op == "conv"]


class TestRcu:
    def test_original_param_count_closed_form(self):
        g = Graph()
        g.add_input()
        g.add_relu("x", "input")
        build_rcu(g, "rcu", "x", 256, "original")
        # two 3x3 convs, 256 -> 256, with bias
        assert graph_params(g, "rcu") == 2 * (3 * 3 * 256 * 256 + 256) == 1_180_160

    def test_bottleneck_param_count_closed_form(self):
        g = Graph()
        g.add_input()
        g.add_relu("x", "input")
        build_rcu(g, "rcu", "x", 256, "lw_with_rcu")
        # 1x1 reduce to 128, 3x3 at 128, 1x1 restore, all with bias
        want = (256 * 128 + 128) + (3 * 3 * 128 * 128 + 128) + (128 * 256 + 256)
        assert graph_params(g, "rcu") == want == 213_504

    @pytest.mark.parametrize("variant", ["original", "lw_with_rcu"])
    def test_zero_weights_is_identity(self, variant, rng):
        g = Graph()
        g.add_input()
        h = build_rcu(g, "rcu", "input", 8, variant)
        g.add_output(h.exit)
        w = zeroed_weights(g)
        x = rng.standard_normal((1, 8, 6, 6)).astype(np.float32)
        (out,) = execute(g, w, x)
        np.testing.assert_array_equal(out, x)

    def test_indivisible_channels_rejected(self):
        g = Graph()
        g.add_input()
        with pytest.raises(BuildError, match="divisible"):
            build_rcu(g, "rcu", "input", 6, "lw_with_rcu")

    def test_no_rcu_in_lw(self):
        g = Graph()
        g.add_input()
        with pytest.raises(BuildError):
            build_rcu(g, "rcu", "input", 8, "lw")


class TestCrp:
    def test_lw_param_count_closed_form(self):
        g = Graph()
        g.add_input()
        build_crp(g, "crp", "input", 256, 4, "lw")
        assert graph_params(g, "crp") == 4 * (256 * 256 + 256) == 263_168

    def test_zero_weights_reduce_to_relu(self, rng):
        g = Graph()
        g.add_input()
        h = build_crp(g, "crp", "input", 4, 4, "lw")
        g.add_output(h.exit)
        x = rng.standard_normal((1, 4, 9, 9)).astype(np.float32)
        (out,) = execute(g, zeroed_weights(g), x)
        np.testing.assert_array_equal(out, np.maximum(x, 0))

    def test_spatial_size_preserved(self):
        g = Graph()
        g.add_input()
        h = build_crp(g, "crp", "input", 4, 4, "original")
        g.add_output(h.exit)
        shapes = infer_shapes(g, (1, 4, 11, 13))
        assert shapes[h.exit] == (1, 4, 11, 13)

    def test_seeded_execution_reproducible(self, rng):
        g = Graph()
        g.add_input()
        h = build_crp(g, "crp", "input", 8, 4, "lw")
        g.add_output(h.exit)
        w = random_weights(g, 11)
        x = rng.standard_normal((1, 8, 10, 10)).astype(np.float32)
        (a,) = execute(g, w, x)
        (b,) = execute(g, random_weights(g, 11), x.copy())
        assert a.tobytes() == b.tobytes()


class TestFusion:
    def _fusion_graph(self, variant="lw"):
        from rnlw.blocks import BlockHandle
        g = Graph()
        g.add_input()
        g.add_conv("coarse_feat", "input", ConvParams(3, 512, (1, 1), (2, 2)))
        g.add_conv("fine_feat", "input", ConvParams(3, 256, (1, 1)))
        coarse = BlockHandle("input", "coarse_feat", 3, 512, 2, 8)
        fine = BlockHandle("input", "fine_feat", 3, 256, 1, 4)
        h = build_fusion(g, "fuse", coarse, fine, 256, variant)
        g.add_output(h.exit)
        return g, h

    def test_lw_param_count_closed_form(self):
        g, _ = self._fusion_graph()
        # per-path 1x1 convs to 256 with bias: (512*256+256) + (256*256+256)
        assert graph_params(g, "fuse") == (512 * 256 + 256) + (256 * 256 + 256) == 197_120

    def test_output_takes_larger_spatial_size(self):
        g, h = self._fusion_graph()
        shapes = infer_shapes(g, (1, 3, 16, 16))
        assert shapes["coarse_feat"] == (1, 512, 8, 8)
        assert shapes[h.exit] == (1, 256, 16, 16)

    def test_zeroed_fine_path_leaves_coarse_conv_upsample(self, rng):
        g, h = self._fusion_graph()
        w = random_weights(g, 5)
        for name in ("fuse.conv_fine.w", "fuse.conv_fine.b"):
            w[name] = np.zeros_like(w[name])
        x = rng.standard_normal((1, 3, 16, 16)).astype(np.float32)
        (out,) = execute(g, w, x)
        coarse = ops.conv2d(x, w["coarse_feat.w"], w["coarse_feat.b"],
                            g.nodes["coarse_feat"].params)
        coarse = ops.conv2d(coarse, w["fuse.conv_coarse.w"], w["fuse.conv_coarse.b"],
                            g.nodes["fuse.conv_coarse"].params)
        want = ops.upsample_bilinear(coarse, 16, 16)
        np.testing.assert_array_equal(out, want)

    def test_same_stride_rejected(self):
        from rnlw.blocks import BlockHandle
        g = Graph()
        g.add_input()
        g.add_relu("a", "input")
        g.add_relu("b", "input")
        with pytest.raises(BuildError, match="stride"):
            build_fusion(g, "fuse", BlockHandle("input", "a", 3, 3, 2, 8),
                         BlockHandle("input", "b", 3, 3, 1, 8), 3, "lw")


class TestClf:
    def test_param_count(self):
        spec = ArchSpec("toy", "lw", 21, channel_plan=(64, 256, 256, 256))
        g = assemble_refinenet(spec)
        clf = [l for l in count_params(g).layers if l.node_id == "decoder.clf"]
        assert clf[0].params == 3 * 3 * 256 * 21 + 21 == 48_405

    def test_zero_weights_argmax_class0(self, rng):
        spec = ArchSpec("toy", "lw", 5, channel_plan=(16, 8, 8, 8))
        g = assemble_refinenet(spec)
        w = zeroed_weights(g)
        x = rng.standard_normal((1, 3, 32, 32)).astype(np.float32)
        (scores,) = execute(g, w, x)
        assert scores.shape == (1, 5, 32, 32)
        assert (np.argmax(scores[0], axis=0) == 0).all()


# Closed-form backbone sums, written out independently of the builders.
def resnet_backbone_params(blocks):
    def bottleneck(cin, mid, cout, downsample):
        p = (cin * mid + 2 * mid) + (9 * mid * mid + 2 * mid) + (mid * cout + 2 * cout)
        if downsample:
            p += cin * cout + 2 * cout
        return p

    total = 7 * 7 * 3 * 64 + 2 * 64  # stem conv + affine bn
    cin = 64
    for stage, n in enumerate(blocks, start=1):
        mid = 64 * 2 ** (stage - 1)
        cout = 4 * mid
        for i in range(n):
            total += bottleneck(cin, mid, cout, downsample=(i == 0))
            cin = cout
    return total


class TestBackbones:
    @pytest.mark.parametrize("name,blocks,published_with_head", [
        ("resnet50", (3, 4, 6, 3), 25.557e6),
        ("resnet101", (3, 4, 23, 3), 44.549e6),
        ("resnet152", (3, 8, 36, 3), 60.193e6),
    ])
    def test_resnet_params_match_closed_form(self, name, blocks, published_with_head):
        g = Graph()
        g.add_input()
        build_backbone(g, "input", name)
        got = graph_params(g, "backbone.")
        assert got == resnet_backbone_params(blocks)
        # published totals include the 2048->1000 classifier head we omit
        assert abs((got + 2048 * 1000 + 1000) - published_with_head) / published_with_head < 0.01

    def test_resnet50_tap_spatial_sizes(self):
        g = Graph()
        g.add_input()
        taps = build_backbone(g, "input", "resnet50")
        for t in taps.ids:
            g.add_output(t, f"out.{t}")
        shapes = infer_shapes(g, (1, 3, 512, 512))
        assert [shapes[t][2] for t in taps.ids] == [128, 64, 32, 16]
        assert taps.channels == (256, 512, 1024, 2048)
        assert shapes[taps.ids[3]] == (1, 2048, 16, 16)

    def test_mobilenet_params_and_taps(self):
        g = Graph()
        g.add_input()
        taps = build_backbone(g, "input", "mobilenetv2")
        assert taps.channels == (24, 32, 96, 320)
        got = graph_params(g, "backbone.")
        assert got == 1_811_712  # width-1.0 stack through the 320-ch bottleneck

    def test_toy_tap_sizes(self):
        g = Graph()
        g.add_input()
        taps = build_backbone(g, "input", "toy")
        for t in taps.ids:
            g.add_output(t, f"out.{t}")
        shapes = infer_shapes(g, (1, 3, 64, 64))
        assert [shapes[t][2] for t in taps.ids] == [16, 8, 4, 2]
        assert taps.channels == (8, 16, 32, 64)

    def test_unsupported_depth(self):
        from rnlw.backbones import build_resnet
        g = Graph()
        g.add_input()
        with pytest.raises(BuildError, match="50, 101, 152"):
            build_resnet(g, "input", 34)


class TestAssembly:
    def test_lw_has_no_rcu_and_single_3x3(self):
        g = assemble_refinenet(ArchSpec("resnet101", "lw", 21))
        assert not [nid for nid in g.nodes if ".rcu" in nid]
        decoder_convs = [n for n in conv_nodes(g) if not n.id.startswith("backbone.")]
        three = [n for n in decoder_convs if n.params.kernel == (3, 3)]
        assert [n.id for n in three] == ["decoder.clf"]
        assert all(n.params.kernel == (1, 1) for n in decoder_convs if n.id != "decoder.clf")
        assert not [n for n in conv_nodes(g) if n.params.kernel == (5, 5)]

    def test_original_rcu_multiplicity(self):
        g = assemble_refinenet(ArchSpec("resnet101", "original", 21))
        for level in (1, 2, 3, 4):
            pre = {nid.split(".")[2] for nid in g.nodes
                   if nid.startswith(f"decoder.l{level}.rcu_pre")}
            post = {nid.split(".")[2] for nid in g.nodes
                    if nid.startswith(f"decoder.l{level}.rcu_post")}
            assert pre == {"rcu_pre1", "rcu_pre2"}
            assert post == {"rcu_post1", "rcu_post2", "rcu_post3"}

    def test_crp_stage_count_default_and_override(self):
        g = assemble_refinenet(ArchSpec("toy", "lw", 3))
        pools = [nid for nid in g.nodes if nid.startswith("decoder.l2.crp.pool")]
        assert len(pools) == 4
        g2 = assemble_refinenet(ArchSpec("toy", "lw", 3, crp_stages=2))
        for level in (1, 2, 3, 4):
            pools = [nid for nid in g2.nodes if nid.startswith(f"decoder.l{level}.crp.pool")]
            convs = [nid for nid in g2.nodes if nid.startswith(f"decoder.l{level}.crp.conv")]
            assert len(pools) == 2 and len(convs) == 2

    def test_pre_clf_map_at_quarter_resolution(self):
        g = assemble_refinenet(ArchSpec("resnet101", "lw", 21))
        shapes = infer_shapes(g, (1, 3, 512, 512))
        clf_src = g.nodes["decoder.clf"].inputs[0]
        assert shapes[clf_src] == (1, 256, 128, 128)
        assert shapes["decoder.score_up"] == (1, 21, 512, 512)

    @pytest.mark.parametrize("backbone", ["resnet50", "resnet101", "resnet152",
                                          "mobilenetv2", "toy"])
    @pytest.mark.parametrize("variant", ["original", "lw_with_rcu", "lw"])
    def test_every_pair_infers_both_paper_sizes(self, backbone, variant):
        g = assemble_refinenet(ArchSpec(backbone, variant, 21))
        for size in ((1, 3, 512, 512), (1, 3, 625, 468)):
            shapes = infer_shapes(g, size)
            assert shapes["decoder.score_up"][2:] == size[2:]

    @pytest.mark.parametrize("backbone", ["toy", "resnet50", "mobilenetv2"])
    def test_param_monotonicity(self, backbone):
        totals = {}
        for variant in ("original", "lw_with_rcu", "lw"):
            g = assemble_refinenet(ArchSpec(backbone, variant, 21))
            totals[variant] = count_params(g).params_total
        assert totals["original"] > totals["lw_with_rcu"] > totals["lw"]

    def test_toy_lw_executes_quickly(self, rng):
        import time
        spec = ArchSpec("toy", "lw", 4, channel_plan=(64, 32, 32, 32))
        g = assemble_refinenet(spec)
        w = random_weights(g, 0)
        x = rng.standard_normal((1, 3, 64, 64)).astype(np.float32)
        t0 = time.perf_counter()
        (out,) = execute(g, w, x)
        assert time.perf_counter() - t0 < 1.0
        assert out.shape == (1, 4, 64, 64)

    def test_block_channel_contracts_on_random_specs(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            plan = tuple(int(rng.choice([8, 16, 32, 64])) for _ in range(4))
            variant = str(rng.choice(["original", "lw_with_rcu", "lw"]))
            spec = ArchSpec("toy", variant, int(rng.integers(2, 30)), channel_plan=plan)
            g = assemble_refinenet(spec)
            shapes = infer_shapes(g, (1, 3, 64, 64))
            for idx, level in enumerate((4, 3, 2, 1)):
                crp_out = [nid for nid in g.nodes
                           if nid.startswith(f"decoder.l{level}.crp.sum")]
                deepest = sorted(crp_out)[-1]
                assert shapes[deepest][1] == plan[idx]
