// Python bindings. Structured results cross the boundary as JSON and come
// back as plain dicts and lists.
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "sif/clips.hpp"
#include "sif/error.hpp"
#include "sif/evaluation.hpp"
#include "sif/knowledge_graph.hpp"
#include "sif/metrics.hpp"
#include "sif/pipeline.hpp"
#include "sif/refine.hpp"

namespace py = pybind11;
using namespace sif;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

std::vector<StatementPrediction> predictions_from(const py::handle& obj) {
  std::ostringstream lines;
  for (const auto& item : from_python(obj)) lines << item.dump() << "\n";
  std::istringstream in(lines.str());
  return read_predictions(in);
}

metrics::RatingMatrix ratings_from(const std::vector<std::vector<std::optional<int>>>& rows, int scale_max) {
  return {scale_max, rows};
}

metrics::AlphaLevel alpha_level(const std::string& name) {
  if (name == "nominal") return metrics::AlphaLevel::Nominal;
  if (name == "ordinal") return metrics::AlphaLevel::Ordinal;
  if (name == "interval") return metrics::AlphaLevel::Interval;
  throw py::value_error("level must be nominal, ordinal or interval");
}

metrics::KappaWeighting kappa_weighting(const std::string& name) {
  if (name == "unweighted") return metrics::KappaWeighting::Unweighted;
  if (name == "linear") return metrics::KappaWeighting::Linear;
  if (name == "quadratic") return metrics::KappaWeighting::Quadratic;
  throw py::value_error("weighting must be unweighted, linear or quadratic");
}

std::set<std::string> label_set(const std::vector<std::string>& labels) { return {labels.begin(), labels.end()}; }

}  // namespace

PYBIND11_MODULE(_sif, m) {
  m.doc() = "CTI-to-firewall-rule pipeline";

  // the module keeps the class alive
  static py::handle sif_error = py::exception<Error>(m, "SifError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(sif_error)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(sif_error.ptr(), exc.ptr());
    }
  });

  // clips
  m.def(
      "parse_clips",
      [](const std::string& source) {
        auto result = clips::parse(source);
        auto diagnostics = result.diagnostics;
        if (result.program) {
          auto more = clips::validate(*result.program);
          diagnostics.insert(diagnostics.end(), more.begin(), more.end());
        }
        nlohmann::json out = {{"ok", result.program.has_value() && !clips::has_errors(diagnostics)},
                              {"diagnostics", clips::to_json(diagnostics)}};
        out["program"] = result.program ? nlohmann::json(clips::pretty_print(*result.program)) : nlohmann::json();
        return to_python(out);
      },
      py::arg("source"), "Parse and validate CLIPS source; returns ok, diagnostics and the pretty-printed program.");

  m.def(
      "run_clips",
      [](const std::string& source, std::size_t max_cycles) {
        auto result = clips::parse(source);
        if (!result.program) throw Error(ErrorCode::PreconditionViolation, "source does not parse");
        return to_python(clips::to_json(clips::run(*result.program, {}, max_cycles)));
      },
      py::arg("source"), py::arg("max_cycles") = 1000);

  m.def(
      "build_rules",
      [](const std::string& report_id, const std::string& source, std::size_t max_cycles) {
        auto build = pipeline::build_rules(report_id, source, refine::CapabilityRegistry::builtin(), max_cycles);
        nlohmann::json out = {{"rules_text", build.rules_text},
                              {"diagnostics", clips::to_json(build.diagnostics)},
                              {"provenance", refine::provenance_json(build.refinement)},
                              {"syntax_errors", build.syntax_errors},
                              {"warnings", build.warnings},
                              {"error", build.error}};
        out["failed_stage"] = build.failed_stage ? nlohmann::json(*build.failed_stage) : nlohmann::json();
        return to_python(out);
      },
      py::arg("report_id"), py::arg("source"), py::arg("max_cycles") = 1000,
      "Validate, execute and refine a CLIPS program into iptables rules.");

  m.def(
      "verify_iptables",
      [](const std::string& command) {
        py::list out;
        for (const auto& e : refine::verify_syntax(command)) {
          py::dict d;
          d["code"] = std::string(refine::to_string(e.code));
          d["message"] = e.message;
          d["token"] = e.token;
          out.append(d);
        }
        return out;
      },
      py::arg("command"), "Problems found in one iptables command; empty when it is valid.");

  // metrics
  m.def(
      "weighted_f1", [](const py::object& preds, const std::vector<std::string>& labels) {
        return metrics::weighted_f1(predictions_from(preds), label_set(labels));
      },
      py::arg("predictions"), py::arg("labels"));
  m.def(
      "weighted_accuracy", [](const py::object& preds, const std::vector<std::string>& labels) {
        return metrics::weighted_accuracy(predictions_from(preds), label_set(labels));
      },
      py::arg("predictions"), py::arg("labels"));
  m.def(
      "hamming_loss", [](const py::object& preds, const std::vector<std::string>& labels) {
        return metrics::hamming_loss(predictions_from(preds), label_set(labels));
      },
      py::arg("predictions"), py::arg("labels"));
  m.def(
      "top_k_accuracy", [](const py::object& preds, std::size_t k) {
        return metrics::top_k_accuracy(predictions_from(preds), k);
      },
      py::arg("predictions"), py::arg("k"));
  m.def("rouge_l_f1", [](const std::string& a, const std::string& b) { return metrics::rouge_l_f1(a, b); },
        py::arg("candidate"), py::arg("reference"));
  m.def(
      "krippendorff_alpha",
      [](const std::vector<std::vector<std::optional<int>>>& rows, const std::string& level, int scale_max) {
        return metrics::krippendorff_alpha(ratings_from(rows, scale_max), alpha_level(level));
      },
      py::arg("ratings"), py::arg("level") = "ordinal", py::arg("scale_max") = 5,
      "ratings: one row per item, one column per rater, None for missing.");
  m.def(
      "cohen_kappa",
      [](const std::vector<std::vector<std::optional<int>>>& rows, const std::string& weighting, int scale_max) {
        return metrics::cohen_kappa(ratings_from(rows, scale_max), kappa_weighting(weighting));
      },
      py::arg("ratings"), py::arg("weighting") = "unweighted", py::arg("scale_max") = 5);
  m.def("spearman_rho", &metrics::spearman_rho, py::arg("x"), py::arg("y"));
  m.def(
      "rating_report",
      [](const std::string& csv_text, const std::string& level, int scale_max) {
        std::istringstream in(csv_text);
        return to_python(evaluation::rating_report(evaluation::read_ratings_csv(in, scale_max), alpha_level(level)));
      },
      py::arg("csv_text"), py::arg("level") = "ordinal", py::arg("scale_max") = 5);

  // knowledge graph
  py::class_<kg::KnowledgeGraph>(m, "KnowledgeGraph")
      .def(py::init([](double stability, double retention_floor) {
             return kg::KnowledgeGraph({stability, retention_floor});
           }),
           py::arg("stability") = 1.0, py::arg("retention_floor") = 0.01)
      .def(
          "insert_concept",
          [](kg::KnowledgeGraph& g, const std::string& label, double now) { g.insert_concept(label, now); },
          py::arg("label"), py::arg("now"))
      .def("link", &kg::KnowledgeGraph::link, py::arg("child"), py::arg("parent"))
      .def("decay", &kg::KnowledgeGraph::decay, py::arg("now"))
      .def(
          "retrieve",
          [](const kg::KnowledgeGraph& g, const std::string& query, int max_depth) {
            py::list out;
            for (const auto& r : g.retrieve(query, max_depth))
              out.append(py::make_tuple(r.label, r.semantic_distance, r.activation));
            return out;
          },
          py::arg("query"), py::arg("max_depth"), "List of (label, semantic distance, activation).")
      .def("activation", [](const kg::KnowledgeGraph& g, const std::string& label) { return g.node(label).activation; })
      .def("__contains__", &kg::KnowledgeGraph::contains)
      .def("__len__", &kg::KnowledgeGraph::size)
      .def("is_acyclic", &kg::KnowledgeGraph::is_acyclic)
      .def("to_dict", [](const kg::KnowledgeGraph& g) { return to_python(g.to_json()); });

  // full run
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out, bool offline) {
        auto config = pipeline::PipelineConfig::load(config_path);
        if (out) config.out = *out;
        config.offline = config.offline || offline;
        config.validate();
        pipeline::RunManifest manifest;
        {
          py::gil_scoped_release release;
          manifest = pipeline::run_pipeline(config);
        }
        auto j = manifest.to_json();
        j["run_dir"] = manifest.run_dir.string();
        return to_python(j);
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("offline") = true,
      "Run every report of the configured corpus; returns the manifest plus run_dir.");
}
