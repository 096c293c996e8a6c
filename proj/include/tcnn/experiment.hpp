#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcnn/convnet.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/decode.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/rng.hpp"
#include "tcnn/stats.hpp"
#include "tcnn/text.hpp"

namespace tcnn {

enum class Method { kRaw, kHrf, kTMvpa, kCnn1, kCnn2 };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kRaw: return "raw";
    case Method::kHrf: return "hrf";
    case Method::kTMvpa: return "tmvpa";
    case Method::kCnn1: return "cnn1";
    case Method::kCnn2: return "cnn2";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kRaw, Method::kHrf, Method::kTMvpa, Method::kCnn1, Method::kCnn2})
    if (s == method_name(m)) return m;
  throw UsageError("unknown method '" + s + "' (expected raw, hrf, tmvpa, cnn1 or cnn2)");
}

inline int method_depth(Method m) { return m == Method::kCnn1 ? 1 : m == Method::kCnn2 ? 2 : 0; }

struct ExperimentConfig {
  Method method = Method::kRaw;
  PipelineConfig pipeline;
  std::size_t knn_k = 1;
  Metric metric = Metric::kEuclidean;
  std::size_t tmvpa_window = 6;
  std::uint64_t seed = 0;
};

/// Pipeline seeds follow from the experiment seed: layer 1 from "ae/1",
/// window sampling from "windows"; layer-2 seeds follow layer 1.
inline PipelineConfig seeded_pipeline(PipelineConfig cfg, std::uint64_t seed) {
  cfg.layer1_hyper.seed = derive_seed(seed, "ae/1");
  cfg.layer2_hyper.seed = cfg.layer1_hyper.seed + 1;
  cfg.sampling_seed = derive_seed(seed, "windows");
  return cfg;
}

struct EvalReport {
  std::string method;
  int depth = 0;
  std::size_t delta1 = 0;
  std::size_t delta2 = 0;
  std::size_t feature_dim = 0;
  double accuracy = 0.0;
  double p_value = 1.0;
  double chance = 0.0;
  std::size_t n_test = 0;
  std::size_t n_correct = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::uint64_t seed = 0;
};

inline DesignMatrix build_design(const VTDataset& d, const ExperimentConfig& cfg, const PipelineModel* model) {
  switch (cfg.method) {
    case Method::kRaw: return raw_mvpa_features(d);
    case Method::kHrf: return hrf_mvpa_features(d);
    case Method::kTMvpa: return t_mvpa_features(d, cfg.tmvpa_window);
    case Method::kCnn1:
    case Method::kCnn2:
      TCNN_REQUIRE(model != nullptr, "build_design: CNN methods need a model");
      return cnn_features(d, *model, method_depth(cfg.method));
  }
  throw UsageError("unknown method");
}

/// Encode-phase rows train the classifier, retrieve-phase rows test it.
inline EvalReport evaluate_design(const DesignMatrix& dm, int num_classes, const ExperimentConfig& cfg) {
  const DesignMatrix train = select_phase(dm, Phase::kEncode);
  const DesignMatrix test = select_phase(dm, Phase::kRetrieve);
  TCNN_REQUIRE(train.rows() > 0 && test.rows() > 0, "experiment: need both encode and retrieve labels");
  TCNN_REQUIRE(num_classes >= 2, "experiment: need at least two classes");
  const auto predictions = knn_classify(train, test, cfg.knn_k, cfg.metric);

  EvalReport r;
  r.method = method_name(cfg.method);
  r.depth = method_depth(cfg.method);
  if (r.depth >= 1) r.delta1 = cfg.pipeline.delta1;
  if (r.depth == 2) r.delta2 = cfg.pipeline.delta2;
  r.feature_dim = dm.feature_dim();
  r.seed = cfg.seed;
  r.chance = 1.0 / static_cast<double>(num_classes);
  r.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<std::size_t>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(test.labels[i])][static_cast<std::size_t>(predictions[i])];
    r.n_correct += predictions[i] == test.labels[i] ? 1 : 0;
  }
  r.n_test = predictions.size();
  r.accuracy = accuracy(predictions, test.labels);
  r.p_value = binomial_pvalue(r.n_correct, r.n_test, r.chance);
  return r;
}

/// Runs one method end to end. CNN methods pretrain unless `model` is given.
inline EvalReport run_experiment(const VTDataset& d, const ExperimentConfig& cfg,
                                 const PipelineModel* model = nullptr) {
  validate(d);
  std::optional<PipelineModel> trained;
  const int depth = method_depth(cfg.method);
  if (depth > 0 && model == nullptr) {
    trained = pretrain(d, seeded_pipeline(cfg.pipeline, cfg.seed), nullptr, depth);
    model = &*trained;
  }
  ExperimentConfig effective = cfg;
  if (model) {
    effective.pipeline.delta1 = model->config.delta1;
    effective.pipeline.delta2 = model->config.delta2;
  }
  return evaluate_design(build_design(d, effective, model), d.num_classes(), effective);
}

inline EvalReport run_experiment(const std::string& dataset_path, const ExperimentConfig& cfg,
                                 const PipelineModel* model = nullptr) {
  return run_experiment(load_dataset(dataset_path), cfg, model);
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { kCsv, kJson };

inline constexpr const char* kReportCsvHeader = "method,depth,delta1,delta2,dim,accuracy,p_value,seed";

inline void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << kReportCsvHeader << '\n';
  for (const auto& r : reports)
    os << r.method << ',' << r.depth << ',' << r.delta1 << ',' << r.delta2 << ',' << r.feature_dim << ','
       << text::format_double17(r.accuracy) << ',' << text::format_double17(r.p_value) << ',' << r.seed << '\n';
}

inline nlohmann::json report_json(const EvalReport& r) {
  return {{"method", r.method},     {"depth", r.depth},         {"delta1", r.delta1},
          {"delta2", r.delta2},     {"dim", r.feature_dim},     {"accuracy", r.accuracy},
          {"p_value", r.p_value},   {"seed", r.seed},           {"chance", r.chance},
          {"n_test", r.n_test},     {"n_correct", r.n_correct}, {"confusion", r.confusion}};
}

inline void write_report_json(std::ostream& os, std::span<const EvalReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  os << arr.dump(2) << '\n';
}

inline void emit_report(std::span<const EvalReport> reports, ReportFormat format, const std::string& path) {
  TCNN_REQUIRE(!reports.empty(), "emit_report: no reports");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  if (format == ReportFormat::kCsv)
    write_report_csv(os, reports);
  else
    write_report_json(os, reports);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline void write_curve_csv(std::ostream& os, const LearningCurve& curve) {
  os << "train_size,train_error,test_error\n";
  for (const auto& p : curve.points)
    os << p.train_size << ',' << text::format_double17(p.train_error) << ',' << text::format_double17(p.test_error)
       << '\n';
}

/// Line plot of train and test error against training-set size.
inline void write_curve_svg(std::ostream& os, const LearningCurve& curve, const std::string& title) {
  TCNN_REQUIRE(!curve.points.empty(), "write_curve_svg: empty curve");
  constexpr double kW = 480, kH = 320, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40;
  const double max_x = static_cast<double>(curve.points.back().train_size);
  const double min_x = static_cast<double>(curve.points.front().train_size);
  const double span_x = max_x > min_x ? max_x - min_x : 1.0;
  auto px = [&](std::size_t x) { return kLeft + (static_cast<double>(x) - min_x) / span_x * (kW - kLeft - kRight); };
  auto py = [&](double e) { return kTop + (1.0 - e) * (kH - kTop - kBottom); };
  auto series = [&](bool train) {
    std::string pts;
    for (const auto& p : curve.points) {
      if (!pts.empty()) pts += ' ';
      pts += text::format_double(px(p.train_size)) + ',' + text::format_double(py(train ? p.train_error : p.test_error));
    }
    return pts;
  };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "  <text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n"
     << "  <line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n"
     << "  <line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n"
     << "  <text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" font-size=\"12\">training samples</text>\n"
     << "  <text x=\"8\" y=\"" << kTop - 6 << "\" font-size=\"12\">error</text>\n"
     << "  <polyline fill=\"none\" stroke=\"steelblue\" points=\"" << series(true) << "\"><title>train</title></polyline>\n"
     << "  <polyline fill=\"none\" stroke=\"firebrick\" points=\"" << series(false) << "\"><title>test</title></polyline>\n"
     << "  <text x=\"" << kW - 120 << "\" y=\"" << kTop + 14 << "\" fill=\"steelblue\" font-size=\"12\">train</text>\n"
     << "  <text x=\"" << kW - 120 << "\" y=\"" << kTop + 30 << "\" fill=\"firebrick\" font-size=\"12\">test</text>\n"
     << "</svg>\n";
}

inline void write_design_csv(std::ostream& os, const DesignMatrix& dm) {
  os << "label,phase";
  for (std::size_t j = 0; j < dm.feature_dim(); ++j) os << ",f" << j;
  os << '\n';
  for (std::size_t i = 0; i < dm.rows(); ++i) {
    os << dm.labels[i] << ',' << phase_name(dm.phases[i]);
    for (double v : dm.features.row(i)) os << ',' << text::format_double17(v);
    os << '\n';
  }
}

}  // namespace tcnn
