// tcnn: command-line front end for the temporal CNN decoding pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tcnn/tcnn.hpp"

using namespace tcnn;

namespace {

struct Options {
  // data
  std::string dataset;
  std::string out;
  std::string model_path;
  std::uint64_t seed = 1;

  // synthetic generator
  std::size_t m = 64, n = 1200, classes = 10, per_class = 12, voxels_per_class = 6;
  double noise = 1.0, amplitude = 2.0, tr = 2.0;

  // architecture
  std::size_t delta1 = 4, delta2 = 2, tau1 = 6, tau2 = 9, k1 = 8, k2 = 4;
  double rho = 0.03, beta = 1.0, lambda = 1e-4;
  std::size_t max_iters = 400;
  std::size_t windows = 10000;
  int depth = 2;

  // decoding
  std::string method = "cnn2";
  std::vector<std::string> methods{"raw", "hrf", "tmvpa", "cnn1", "cnn2"};
  std::size_t knn_k = 1;
  std::string metric = "euclidean";
  std::string format = "csv";
  std::size_t step = 20;
  std::string svg;

  // hyperparameter search
  int layer = 1;
  bool normalized = false;
  std::vector<std::size_t> k_values;
  std::vector<double> rho_values, beta_values;
};

void add_seed(CLI::App* app, Options& o) { app->add_option("--seed", o.seed, "base random seed")->capture_default_str(); }

void add_architecture(CLI::App* app, Options& o) {
  app->add_option("--delta1", o.delta1, "pooling range of block 1")->capture_default_str();
  app->add_option("--delta2", o.delta2, "pooling range of block 2")->capture_default_str();
  app->add_option("--tau1", o.tau1, "filter length of block 1")->capture_default_str();
  app->add_option("--tau2", o.tau2, "filter length of block 2")->capture_default_str();
  app->add_option("--k1", o.k1, "filters in block 1")->capture_default_str();
  app->add_option("--k2", o.k2, "filters per bank in block 2")->capture_default_str();
  app->add_option("--rho", o.rho, "target mean activation")->capture_default_str();
  app->add_option("--beta", o.beta, "sparsity weight")->capture_default_str();
  app->add_option("--lambda", o.lambda, "weight decay")->capture_default_str();
  app->add_option("--max-iters", o.max_iters, "autoencoder iterations")->capture_default_str();
  app->add_option("--windows", o.windows, "windows sampled per autoencoder")->capture_default_str();
  add_seed(app, o);
}

void add_decoding(CLI::App* app, Options& o) {
  app->add_option("--knn-k", o.knn_k, "neighbours")->capture_default_str();
  app->add_option("--metric", o.metric, "euclidean or cosine")->capture_default_str();
}

void add_dataset(CLI::App* app, Options& o) { app->add_option("dataset", o.dataset, "dataset file")->required(); }

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig cfg;
  cfg.tau1 = o.tau1;
  cfg.tau2 = o.tau2;
  cfg.delta1 = o.delta1;
  cfg.delta2 = o.delta2;
  cfg.windows = o.windows;
  cfg.layer1_hyper = AEHyper{o.k1, o.rho, o.beta, o.lambda, o.max_iters, 0.1, 0};
  cfg.layer2_hyper = AEHyper{o.k2, o.rho, o.beta, o.lambda, o.max_iters, 0.1, 0};
  return seeded_pipeline(cfg, o.seed);
}

ExperimentConfig experiment_config(const Options& o, Method method) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.pipeline = pipeline_config(o);
  cfg.knn_k = o.knn_k;
  cfg.metric = parse_metric(o.metric);
  cfg.seed = o.seed;
  return cfg;
}

std::optional<PipelineModel> maybe_model(const Options& o) {
  if (o.model_path.empty()) return std::nullopt;
  return load_model(o.model_path);
}

// Trains (or loads) the model a CNN method needs.
PipelineModel model_for(const VTDataset& d, const Options& o, int depth) {
  if (auto m = maybe_model(o)) {
    if (depth == 2 && m->layer2.empty()) throw UsageError("model has no second layer; retrain with --depth 2");
    return *m;
  }
  return pretrain(d, pipeline_config(o), nullptr, depth);
}

ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw UsageError("unknown format '" + s + "' (expected csv or json)");
}

// Writes to --out when given, stdout otherwise.
template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  fn(os);
  if (!os) throw IoError("write failed for '" + path + "'");
}

std::vector<EvalReport> run_methods(const VTDataset& d, const Options& o, const std::vector<std::string>& names) {
  std::vector<Method> methods;
  int depth = 0;
  for (const auto& name : names) {
    methods.push_back(parse_method(name));
    depth = std::max(depth, method_depth(methods.back()));
  }
  // cnn1 reuses the first block of the two-layer model
  std::optional<PipelineModel> model;
  if (depth > 0) model = model_for(d, o, depth);
  std::vector<EvalReport> out;
  for (auto m : methods) out.push_back(run_experiment(d, experiment_config(o, m), model ? &*model : nullptr));
  return out;
}

void cmd_generate(const Options& o) {
  if (o.out.empty()) throw UsageError("generate needs --out");
  SynthConfig c;
  c.m = o.m;
  c.n = o.n;
  c.num_classes = o.classes;
  c.samples_per_class_per_phase = o.per_class;
  c.voxels_per_class = o.voxels_per_class;
  c.noise_sigma = o.noise;
  c.hrf_amplitude = o.amplitude;
  c.tr_seconds = o.tr;
  c.seed = o.seed;
  save_dataset(generate_synthetic(c), o.out);
}

void cmd_pretrain(const Options& o) {
  if (o.out.empty()) throw UsageError("pretrain needs --out");
  const auto d = load_dataset(o.dataset);
  save_model(pretrain(d, pipeline_config(o), nullptr, o.depth), o.out);
}

void cmd_hyperparam(const Options& o) {
  const auto d = load_dataset(o.dataset);
  const PipelineConfig cfg = pipeline_config(o);
  const ColumnSet excluded = test_exclusion_columns(d, cfg.tau1, cfg.tau2);

  HyperGrid grid = o.layer == 1 ? HyperGrid::layer1_default() : HyperGrid::layer2_default();
  if (!o.k_values.empty()) grid.k_values = o.k_values;
  if (!o.rho_values.empty()) grid.rho_values = o.rho_values;
  if (!o.beta_values.empty()) grid.beta_values = o.beta_values;
  grid.lambda_value = o.lambda;

  WindowSet windows;
  AEHyper base;
  if (o.layer == 1) {
    windows = sample_windows(d.values, cfg.tau1, cfg.windows, excluded, derive_seed(cfg.sampling_seed, "windows/1"));
    base = cfg.layer1_hyper;
  } else {
    // layer-2 windows are drawn from all block-1 responses stacked together
    const PipelineModel model = model_for(d, o, 1);
    const auto block1 = block1_output(d.values, model);
    windows = sample_windows(vstack(block1.matrices), cfg.tau2, cfg.windows, excluded,
                             derive_seed(cfg.sampling_seed, "windows/2"));
    base = cfg.layer2_hyper;
  }
  const auto result = grid_search(windows, grid, base, o.normalized);

  with_output(o.out, [&](std::ostream& os) {
    os << "k,rho,beta,distance,final_cost\n";
    for (const auto& e : result.entries)
      os << e.hyper.k << ',' << text::format_double(e.hyper.rho) << ',' << text::format_double(e.hyper.beta) << ','
         << text::format_double17(e.distance) << ',' << text::format_double17(e.bank.final_cost) << '\n';
  });
  const auto& best = result.entries[result.best];
  nlohmann::json summary{{"layer", o.layer},       {"k", best.hyper.k},       {"rho", best.hyper.rho},
                         {"beta", best.hyper.beta}, {"distance", best.distance}, {"points", result.entries.size()}};
  std::cerr << summary.dump() << '\n';
}

void cmd_transform(const Options& o) {
  const auto d = load_dataset(o.dataset);
  const auto model = model_for(d, o, o.depth);
  const auto dm = cnn_features(d, model, o.depth);
  with_output(o.out, [&](std::ostream& os) { write_design_csv(os, dm); });
}

void cmd_decode(const Options& o) {
  const auto d = load_dataset(o.dataset);
  const auto reports = run_methods(d, o, {o.method});
  const auto format = parse_format(o.format);
  if (o.out.empty()) {
    format == ReportFormat::kCsv ? write_report_csv(std::cout, reports) : write_report_json(std::cout, reports);
  } else {
    emit_report(reports, format, o.out);
  }
}

void cmd_learning_curve(const Options& o) {
  const auto d = load_dataset(o.dataset);
  const Method method = parse_method(o.method);
  std::optional<PipelineModel> model;
  if (method_depth(method) > 0) model = model_for(d, o, method_depth(method));
  const auto cfg = experiment_config(o, method);
  const auto pool = build_design(d, cfg, model ? &*model : nullptr);
  const auto curve = learning_curve(pool, o.step, o.knn_k, cfg.metric, derive_seed(o.seed, "curve"));
  with_output(o.out, [&](std::ostream& os) { write_curve_csv(os, curve); });
  if (!o.svg.empty())
    with_output(o.svg, [&](std::ostream& os) { write_curve_svg(os, curve, std::string(method_name(method)) + " learning curve"); });
}

void cmd_report(const Options& o) {
  const auto d = load_dataset(o.dataset);
  const auto reports = run_methods(d, o, o.methods);
  const auto format = parse_format(o.format);
  if (o.out.empty()) {
    format == ReportFormat::kCsv ? write_report_csv(std::cout, reports) : write_report_json(std::cout, reports);
  } else {
    emit_report(reports, format, o.out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal CNN features for fMRI decoding"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--voxels", o.m, "voxel count m")->capture_default_str();
  gen->add_option("--timepoints", o.n, "time points n")->capture_default_str();
  gen->add_option("--classes", o.classes)->capture_default_str();
  gen->add_option("--per-class", o.per_class, "labels per class per phase")->capture_default_str();
  gen->add_option("--voxels-per-class", o.voxels_per_class)->capture_default_str();
  gen->add_option("--noise", o.noise, "noise sigma")->capture_default_str();
  gen->add_option("--amplitude", o.amplitude, "HRF amplitude")->capture_default_str();
  gen->add_option("--tr", o.tr, "seconds per volume")->capture_default_str();
  gen->add_option("--out", o.out, "output dataset")->required();
  add_seed(gen, o);

  auto* pre = app.add_subcommand("pretrain", "train the autoencoder filter banks");
  add_dataset(pre, o);
  add_architecture(pre, o);
  pre->add_option("--depth", o.depth, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  pre->add_option("--out", o.out, "output model")->required();

  auto* hyp = app.add_subcommand("hyperparam", "grid search on the decorrelation distance");
  add_dataset(hyp, o);
  add_architecture(hyp, o);
  hyp->add_option("--layer", o.layer, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  hyp->add_flag("--normalized", o.normalized, "divide the distance by k");
  hyp->add_option("--k-values", o.k_values, "override the k axis")->delimiter(',');
  hyp->add_option("--rho-values", o.rho_values, "override the rho axis")->delimiter(',');
  hyp->add_option("--beta-values", o.beta_values, "override the beta axis")->delimiter(',');
  hyp->add_option("--model", o.model_path, "model supplying layer 1 (layer 2 search)");
  hyp->add_option("--out", o.out, "grid CSV (default stdout)");

  auto* tr = app.add_subcommand("transform", "write CNN features of labeled columns");
  add_dataset(tr, o);
  add_architecture(tr, o);
  tr->add_option("--depth", o.depth, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  tr->add_option("--model", o.model_path, "pretrained model (trained on the fly otherwise)");
  tr->add_option("--out", o.out, "design CSV (default stdout)");

  auto* dec = app.add_subcommand("decode", "classify retrieve-phase samples with one method");
  add_dataset(dec, o);
  add_architecture(dec, o);
  add_decoding(dec, o);
  dec->add_option("--method", o.method, "raw, hrf, tmvpa, cnn1 or cnn2")->capture_default_str();
  dec->add_option("--model", o.model_path, "pretrained model");
  dec->add_option("--format", o.format, "csv or json")->capture_default_str();
  dec->add_option("--out", o.out, "report file (default stdout)");

  auto* lc = app.add_subcommand("learning-curve", "train/test error against training size");
  add_dataset(lc, o);
  add_architecture(lc, o);
  add_decoding(lc, o);
  lc->add_option("--method", o.method)->capture_default_str();
  lc->add_option("--model", o.model_path, "pretrained model");
  lc->add_option("--step", o.step, "samples added per point")->capture_default_str();
  lc->add_option("--out", o.out, "curve CSV (default stdout)");
  lc->add_option("--svg", o.svg, "also plot the curve");

  auto* rep = app.add_subcommand("report", "run several methods and tabulate");
  add_dataset(rep, o);
  add_architecture(rep, o);
  add_decoding(rep, o);
  rep->add_option("--methods", o.methods, "comma-separated methods")->delimiter(',')->capture_default_str();
  rep->add_option("--model", o.model_path, "pretrained model");
  rep->add_option("--format", o.format, "csv or json")->capture_default_str();
  rep->add_option("--out", o.out, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) cmd_generate(o);
    else if (*pre) cmd_pretrain(o);
    else if (*hyp) cmd_hyperparam(o);
    else if (*tr) cmd_transform(o);
    else if (*dec) cmd_decode(o);
    else if (*lc) cmd_learning_curve(o);
    else if (*rep) cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
