#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "interleaf/config.hpp"
#include "interleaf/detect.hpp"
#include "interleaf/errors.hpp"
#include "interleaf/instruction.hpp"
#include "interleaf/interleave.hpp"
#include "interleaf/metrics.hpp"
#include "interleaf/mixture.hpp"
#include "interleaf/normalize.hpp"
#include "interleaf/pipeline.hpp"
#include "interleaf/synthetic.hpp"

namespace py = pybind11;
using namespace interleaf;

namespace {

using Box = std::tuple<int, int, int, int>;

BBox to_bbox(const Box& b) { return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)}; }
Box from_bbox(const BBox& b) { return {b.x0, b.y0, b.x1, b.y1}; }

// Segments cross the boundary as str (text) or int (image slot).
using PySegment = std::variant<std::size_t, std::string>;

InterleavedSequence assemble(const std::vector<PySegment>& parts, std::size_t patch_count, bool byte_level) {
  std::vector<Segment> segs;
  for (const auto& p : parts) {
    if (const auto* s = std::get_if<std::string>(&p)) segs.push_back(Segment::make_text(*s));
    else segs.push_back(Segment::make_image(std::get<std::size_t>(p)));
  }
  TokenizerConfig cfg;
  cfg.patch_count = patch_count;
  cfg.text_tokenizer = byte_level ? TextTokenizer::ByteLevel : TextTokenizer::Whitespace;
  return assemble_sequence(segs, cfg);
}

Pose7 to_pose(const std::vector<double>& v) {
  if (v.size() != kPoseDims) throw DimensionError("expected 7 values, got " + std::to_string(v.size()));
  Pose7 p{};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

}  // namespace

PYBIND11_MODULE(_interleaf, m) {
  m.doc() = "Native core of interleaf";
  m.attr("__version__") = std::string(tool_version());

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<StageUnavailable>(m, "StageUnavailable", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("parse_instruction", [](const std::string& text) {
    const ParsedInstruction p = extract_key_objects(text, Lexicon::builtin());
    return py::make_tuple(p.template_text, p.phrases);
  }, py::arg("text"));

  m.def("fill_template", [](const std::string& template_text, const std::vector<PySegment>& fillers) {
    ParsedInstruction p;
    p.template_text = template_text;
    std::vector<Filler> fs;
    for (const auto& f : fillers) {
      if (const auto* s = std::get_if<std::string>(&f)) fs.emplace_back(TextFiller{*s});
      else fs.emplace_back(ImageFiller{std::get<std::size_t>(f)});
    }
    std::vector<PySegment> out;
    for (const Segment& s : render_template(p, fs)) {
      if (s.kind == SegmentKind::Image) out.emplace_back(*s.slot);
      else out.emplace_back(s.text);
    }
    return out;
  }, py::arg("template"), py::arg("fillers"));

  m.def("render", [](const std::vector<PySegment>& parts, std::size_t patch_count, bool byte_level) {
    return render_canonical(assemble(parts, patch_count, byte_level));
  }, py::arg("segments"), py::arg("patch_count") = 256, py::arg("byte_level") = false);

  m.def("token_count", [](const std::vector<PySegment>& parts, std::size_t patch_count, bool byte_level) {
    return assemble(parts, patch_count, byte_level).tokens.size();
  }, py::arg("segments"), py::arg("patch_count") = 256, py::arg("byte_level") = false);

  m.def("pad_and_clamp", [](const Box& b, double pad, int w, int h) {
    return from_bbox(pad_and_clamp(to_bbox(b), pad, w, h));
  }, py::arg("bbox"), py::arg("pad_fraction"), py::arg("width"), py::arg("height"));

  m.def("iou", [](const Box& a, const Box& b) { return iou(to_bbox(a), to_bbox(b)); });

  m.def("clopper_pearson", [](std::uint64_t x, std::uint64_t n, double conf) {
    const Interval i = clopper_pearson(x, n, conf);
    return py::make_tuple(i.lo, i.hi);
  }, py::arg("failures"), py::arg("n"), py::arg("confidence") = 0.95);

  m.def("normalize", [](const std::vector<double>& v, const std::vector<double>& lo,
                        const std::vector<double>& hi, bool inverse) {
    NormalizationStats st;
    st.min = to_pose(lo);
    st.max = to_pose(hi);
    const Pose7 out = normalize_action(to_pose(v), st, inverse ? Direction::Inverse : Direction::Forward);
    return std::vector<double>(out.begin(), out.end());
  }, py::arg("values"), py::arg("min"), py::arg("max"), py::arg("inverse") = false);

  m.def("plan_mixture", [](const std::map<std::string, double>& weights, std::uint64_t total) {
    MixtureWeights w(weights.begin(), weights.end());
    const MixtureAllocation a = plan_mixture(w, total);
    return std::map<std::string, std::uint64_t>(a.begin(), a.end());
  }, py::arg("weights"), py::arg("total"));

  m.def("synth", [](std::size_t count, const std::filesystem::path& out, std::uint64_t seed, int frames) {
    SceneConfig sc;
    sc.frames = frames;
    py::gil_scoped_release release;
    const GeneratedSet s = generate_episode_set(count, sc, seed, out, 0);
    return std::make_pair(s.manifest_path.string(), s.truth_path.string());
  }, py::arg("count"), py::arg("out"), py::arg("seed") = 0, py::arg("frames") = 20);

  // JSON crosses as text; the Python wrapper decodes it.
  m.def("_convert", [](const std::string& manifest, const std::string& out, const std::string& config_json) {
    PipelineConfig cfg = PipelineConfig::from_json(nlohmann::json::parse(config_json));
    cfg.validate();
    py::gil_scoped_release release;
    const RunResult r = run_convert(cfg, manifest, out);
    return std::make_pair(r.exit_code, r.report.to_json().dump());
  });
  m.def("_report", [](const std::string& run) { return aggregate_report(run).to_json().dump(); });
  m.def("_audit", [](const std::string& run, std::size_t n, std::uint64_t seed) {
    return sample_audit(std::filesystem::path(run), n, seed).to_json().dump();
  });
}
