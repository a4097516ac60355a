// Python extension. Structured values cross the boundary as JSON text; the
// package wrapper decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "plotkit/dataset.hpp"
#include "plotkit/errors.hpp"
#include "plotkit/judge.hpp"
#include "plotkit/planner.hpp"
#include "plotkit/prompts.hpp"
#include "plotkit/scripted_backend.hpp"
#include "plotkit/text.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::vector<plotkit::PlotRecord> records_from(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return plotkit::read_records(in);
}

json records_json(const std::vector<plotkit::PlotRecord>& rs) {
  json out = json::array();
  for (const auto& r : rs) out.push_back(r);
  return out;
}

std::string generate(const std::string& rules_json, const plotkit::PipelineConfig& cfg,
                     std::optional<std::string> premise) {
  auto backend = plotkit::scripted_backend_from_json(json::parse(rules_json));
  plotkit::BackendConfig bcfg;
  bcfg.requests_per_minute = 1000000;
  plotkit::LlmClient client(backend, bcfg, std::make_shared<plotkit::FakeClock>());
  plotkit::PlanOptions opts;
  opts.fixed_premise = std::move(premise);
  plotkit::PlotRun run;
  {
    py::gil_scoped_release release;
    run = plotkit::generate_plot(client, cfg, opts);
  }
  json meta = run.meta;
  return json{{"text", plotkit::render_plot(run.doc)}, {"doc", run.doc}, {"meta", meta}}.dump();
}

std::string aggregate(const std::string& jsonl, std::optional<std::string> aspect) {
  std::vector<plotkit::ComparisonRecord> recs;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (!plotkit::text::trim(line).empty()) recs.push_back(json::parse(line).get<plotkit::ComparisonRecord>());
  }
  std::optional<plotkit::Aspect> only;
  if (aspect) {
    only = plotkit::aspect_from_string(*aspect);
    if (!only) throw plotkit::PreconditionError("unknown aspect '" + *aspect + "'");
  }
  return plotkit::winrates_to_json(plotkit::aggregate_winrates(recs, only)).dump();
}

}  // namespace

PYBIND11_MODULE(_plotkit, m) {
  m.doc() = "Native core of the plotkit package";

  static py::exception<plotkit::Error> base_error(m, "PlotkitError");
  static py::exception<plotkit::ParseError> parse_error(m, "ParseError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const plotkit::PreconditionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const plotkit::ParseError& e) {
      parse_error(e.what());
    } catch (const plotkit::Error& e) {
      base_error(e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<plotkit::PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_property(
          "char_range", [](const plotkit::PipelineConfig& c) { return std::make_pair(c.char_range.min, c.char_range.max); },
          [](plotkit::PipelineConfig& c, std::pair<int, int> r) { c.char_range = {r.first, r.second}; })
      .def_property(
          "sub_range", [](const plotkit::PipelineConfig& c) { return std::make_pair(c.sub_range.min, c.sub_range.max); },
          [](plotkit::PipelineConfig& c, std::pair<int, int> r) { c.sub_range = {r.first, r.second}; })
      .def_readwrite("max_top_points", &plotkit::PipelineConfig::max_top_points)
      .def_readwrite("candidates_per_step", &plotkit::PipelineConfig::candidates_per_step)
      .def_readwrite("max_step_retries", &plotkit::PipelineConfig::max_step_retries)
      .def_readwrite("annotate_scenes", &plotkit::PipelineConfig::annotate_scenes)
      .def_readwrite("seed", &plotkit::PipelineConfig::seed)
      .def_readwrite("creative_temperature", &plotkit::PipelineConfig::creative_temperature)
      .def_readwrite("structural_temperature", &plotkit::PipelineConfig::structural_temperature)
      .def_readwrite("max_tokens", &plotkit::PipelineConfig::max_tokens)
      .def("check", &plotkit::PipelineConfig::check);

  m.def("parse_plot", [](const std::string& text) { return json(plotkit::parse_plot(text)).dump(); });
  m.def("render_plot",
        [](const std::string& doc_json) { return plotkit::render_plot(json::parse(doc_json).get<plotkit::PlotDocument>()); });
  m.def("validate_plot", [](const std::string& text, const plotkit::PipelineConfig& cfg) {
    auto report = plotkit::validate_structure(plotkit::parse_plot(text), cfg);
    json violations = json::array();
    for (const auto& v : report.violations) violations.push_back(v);
    return json{{"valid", report.valid}, {"violations", violations}}.dump();
  });

  m.def("template_names", &plotkit::prompts::template_names);
  m.def("dump_prompt", [](const std::string& name) { return plotkit::prompts::dump(name); });

  m.def("generate_plot", &generate, py::arg("rules_json"), py::arg("config"), py::arg("premise") = std::nullopt);

  m.def("filter_records", [](const std::string& jsonl, const plotkit::PipelineConfig& cfg) {
    auto res = plotkit::filter_plots(records_from(jsonl), cfg);
    return json{{"kept", records_json(res.kept)}, {"dropped", records_json(res.dropped)}, {"report", res.report}}.dump();
  });
  m.def("export_sft", [](const std::string& jsonl, const plotkit::PipelineConfig& cfg) {
    std::ostringstream out;
    auto res = plotkit::export_sft(records_from(jsonl), out, cfg);
    return std::make_pair(out.str(), res.lines);
  });

  m.def("parse_verdict", [](const std::string& raw) -> std::optional<std::string> {
    try {
      return std::string(plotkit::to_string(plotkit::parse_verdict(raw)));
    } catch (const plotkit::NoVerdict&) {
      return std::nullopt;
    }
  });
  m.def("deshuffle", [](const std::string& verdict, const std::string& first, const std::string& second) {
    auto v = plotkit::verdict_from_string(verdict);
    if (!v) throw plotkit::PreconditionError("verdict must be A, B or C");
    return plotkit::deshuffle(*v, first, second);
  });
  m.def("aggregate_winrates", &aggregate, py::arg("records_jsonl"), py::arg("aspect") = std::nullopt);
  m.def("percent_tenths", &plotkit::percent_tenths);
  m.def("word_count", [](const std::string& s) { return plotkit::text::word_count(s); });
}
