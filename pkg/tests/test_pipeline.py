import numpy as np
import pytest

from transitlabel.config import PipelineConfig
from transitlabel.evaluation import map_errors
from transitlabel.mapper import to_annotated
from transitlabel.model import SemanticClass as C, TraceError
from transitlabel.pipeline import (
    adjust_steps, analyse_trace, base_trail, format_sidecar, locate, parse_sidecar, run_pipeline, sidecar_path,
)
from transitlabel.simulator import SimConfig, corpus_from_config, generate_station


@pytest.fixture(scope="module")
def corpus():
    cfg = SimConfig()
    template = generate_station(cfg.seed, cfg.station)
    return template, corpus_from_config(template, cfg)


@pytest.fixture(scope="module")
def result(corpus):
    return run_pipeline(corpus[1], passes=2)


def test_map_covers_every_template_semantic(corpus, result):
    template, _ = corpus
    want = {label for label, _ in template.true_semantics()}
    # about a dozen uses per class leaves most sites short of confirmation,
    # but every kind of semantic is in the map
    got = {c.label for c in result.smap.clusters}
    assert want <= got


def test_second_pass_not_worse(corpus, result):
    template, _ = corpus
    truth = template.true_semantics()
    p1, p2 = (np.mean([e.error for e in map_errors(to_annotated(m), truth)]) for m in result.pass_maps)
    assert p2 <= p1


def test_single_pass_equals_first_of_two(corpus, result):
    one = run_pipeline(result.analyses, passes=1)
    assert one.smap == result.pass_maps[0]


def test_passes_validated(result):
    with pytest.raises(ValueError):
        run_pipeline(result.analyses, passes=0)
    with pytest.raises(TraceError):
        run_pipeline([])


def test_detections_only_for_mapped_classes(result):
    assert {d.cls for d in result.detections}.isdisjoint({C.WALKING, C.STANDING})
    assert all(0 < d.weight <= 1 for d in result.detections)


def test_own_detection_placed_before_reset(result):
    """A detection's position comes from the trail before it snaps to the map."""
    a = next(a for a in result.analyses if a.mappable)
    dets_prior, _ = locate(a, result.pass_maps[0], PipelineConfig())
    dets_plain, _ = locate(a, None, PipelineConfig())
    assert dets_prior[0].position == dets_plain[0].position


def test_sidecar_round_trip(result, tmp_path):
    text = format_sidecar(result)
    side = parse_sidecar(text)
    assert side.detections == result.detections
    assert set(side.traces) == {a.trace_id for a in result.analyses}
    for a in result.analyses:
        assert side.labels[a.trace_id] == [(lb.cls, lb.start_t, lb.end_t) for lb in a.labels]
    assert sidecar_path(tmp_path / "m.map").name == "m.map.detections"


@pytest.mark.parametrize("text", ["", "nope\n", "#transitlabel-detections v1\nX a b\n",
                                  "#transitlabel-detections v1\nD t walking 1 2\n"])
def test_sidecar_errors(text):
    with pytest.raises(TraceError):
        parse_sidecar(text)


def test_escalator_steps_replaced_by_belt_run(class_traces):
    cfg = PipelineConfig()
    a = analyse_trace(class_traces[C.ESCALATOR_STANDING][0], cfg)
    (lb,) = [lb for lb in a.labels if lb.ramp is not None]
    rs, re, dp = lb.ramp
    run = sum(s.stride for s in a.steps if rs <= s.t <= re)
    cc = cfg.classifier
    assert run == pytest.approx(dp / cc.hpa_per_meter / np.tan(np.radians(cc.escalator_slope)), rel=1e-9)


def test_stair_treads_shorten_strides(class_traces):
    cfg = PipelineConfig()
    a = analyse_trace(class_traces[C.STAIRS_STRAIGHT][0], cfg)
    (lb,) = [lb for lb in a.labels if lb.ramp is not None]
    rs, re, _ = lb.ramp
    inside = [s.stride for s in a.steps if rs <= s.t <= re]
    assert inside and set(inside) == {cfg.classifier.stairs_stride}
    assert adjust_steps(a.features, [], cfg)[0].stride == cfg.pdr.stride


def test_base_trail_spans_trace(class_traces):
    a = analyse_trace(class_traces[C.WALKING][0])
    tr = base_trail(a)
    assert tr.t[0] == a.features.start and tr.t[-1] == a.features.end
    assert (tr.x[0], tr.y[0]) == a.start
