import json
import math

import pytest
from hypothesis import given, settings, strategies as st

import interleaf


def test_parse_and_fill():
    tmpl, phrases = interleaf.parse_instruction("put the red block on the blue ball")
    assert tmpl == "put {0} on {1}"
    assert phrases == ["the red block", "the blue ball"]
    assert interleaf.fill_template(tmpl, [0, "the blue ball"]) == ["put", 0, "on the blue ball"]


def test_render_global_ordinals():
    s = interleaf.render([0, "into", 1])
    second = s.index("<BOI>", s.index("<BOI>") + 1)
    assert s[second:].startswith("<BOI> <image>_257 ")
    assert interleaf.token_count([0, "into", 1]) == 2 * 256 + 1 + 4


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.integers(0, 7), st.text("abc ", min_size=1).filter(str.strip)),
                min_size=1, max_size=8),
       st.sampled_from([1, 4, 256]))
def test_token_count_formula(parts, p):
    k = sum(isinstance(x, int) for x in parts)
    text = sum(len(x.split()) for x in parts if isinstance(x, str))
    if text == 0 and k == 0:
        return
    assert interleaf.token_count(parts, patch_count=p) == p * k + text + 2 * k


def test_geometry_and_stats():
    assert interleaf.pad_and_clamp((40, 60, 120, 160), 0.1, 320, 240) == (32, 50, 128, 170)
    assert interleaf.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    lo, hi = interleaf.clopper_pearson(0, 200)
    assert lo == 0.0
    assert math.isclose(hi, 1 - 0.025 ** (1 / 200), rel_tol=1e-9)


def test_normalize_endpoints_and_errors():
    lo, hi = [0.0] * 7, [2.0] * 7
    assert interleaf.normalize(hi, lo, hi) == [1.0] * 7
    assert interleaf.normalize([-1.0] * 7, lo, hi, inverse=True) == lo
    with pytest.raises(interleaf.ValidationError):
        interleaf.normalize([0.0] * 6, lo, hi)


def test_mixture():
    alloc = interleaf.plan_mixture({"a": 1.0, "b": 1.0, "c": 1.0}, 10)
    assert sum(alloc.values()) == 10


def test_pipeline_round_trip(tmp_path):
    manifest, truth = interleaf.synth(6, tmp_path / "data", seed=3, frames=3)
    cfg = {"mock_in_process": True, "truth": truth, "workers": 2}
    code, rep = interleaf.convert(manifest, tmp_path / "run", cfg)
    assert code == 0
    assert rep["episodes"]["processed"] == 6
    assert interleaf.report(tmp_path / "run") == rep
    a = interleaf.audit(tmp_path / "run", n=6)
    assert a["population"] == 6
    lines = (tmp_path / "run" / "records.jsonl").read_text().splitlines()
    assert all(json.loads(l)["canonical"] for l in lines)


def test_bad_config():
    with pytest.raises(interleaf.ValidationError):
        interleaf.convert("nowhere.jsonl", "out", {})
