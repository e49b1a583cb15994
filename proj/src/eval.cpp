#include "modinv/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "modinv/error.hpp"
#include "modinv/rng.hpp"

namespace modinv::eval {

MetricKind parse_metric(const std::string& name) {
  if (name == "acc" || name == "accuracy") return MetricKind::accuracy;
  if (name == "auroc" || name == "auc") return MetricKind::auroc;
  throw_error(ErrorKind::config,
              "unknown metric '" + name + "' (want acc|auroc)");
}

const char* metric_name(MetricKind kind) {
  return kind == MetricKind::accuracy ? "accuracy" : "auroc";
}

MetricValue accuracy(std::span<const int> predictions,
                     std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw_error(ErrorKind::shape,
                "accuracy: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(labels.size()) +
                    " labels");
  if (predictions.empty())
    throw_error(ErrorKind::data, "accuracy: empty input");
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  return {MetricKind::accuracy,
          static_cast<double>(correct) / predictions.size(),
          predictions.size()};
}

MetricValue auroc(std::span<const double> scores,
                  std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw_error(ErrorKind::shape, "auroc: scores/labels length mismatch");
  size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw_error(ErrorKind::metric,
                "auroc undefined: only one class present (" +
                    std::to_string(n_pos) + " positives, " +
                    std::to_string(n_neg) + " negatives)");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; ranks are 1-based.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    i = j;
  }

  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  const double auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
  return {MetricKind::auroc, auc, scores.size()};
}

double degradation_delta(double p_complete, double p_missing) {
  if (!(p_complete > 0.0))
    throw_error(ErrorKind::domain,
                "degradation delta needs p_complete > 0, got " +
                    std::to_string(p_complete));
  return (p_complete - p_missing) / p_complete;
}

std::string delta_percent_string(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", delta * 100.0);
  return buf;
}

model::BatchView make_batch_view(const data::PairedDataset& dataset) {
  model::BatchView view;
  const size_t n = dataset.size();
  view.ids.resize(n);
  view.has_a.resize(n);
  view.has_b.resize(n);
  view.vec_a = DenseMatrix(n, dataset.dim_a);
  view.vec_b = DenseMatrix(n, dataset.dim_b);
  for (size_t i = 0; i < n; ++i) {
    const auto& inst = dataset.instances[i];
    view.ids[i] = inst.id;
    view.has_a[i] = inst.avail_a ? 1 : 0;
    view.has_b[i] = inst.avail_b ? 1 : 0;
    if (inst.avail_a) {
      double* row = view.vec_a.data() + i * dataset.dim_a;
      for (size_t j = 0; j < dataset.dim_a; ++j) row[j] = inst.vec_a[j];
    }
    if (inst.avail_b) {
      double* row = view.vec_b.data() + i * dataset.dim_b;
      for (size_t j = 0; j < dataset.dim_b; ++j) row[j] = inst.vec_b[j];
    }
  }
  return view;
}

std::vector<model::Prediction> predict_dataset(model::Model& m,
                                               const data::PairedDataset& ds,
                                               model::FusionSpace space) {
  return m.predict_batch(make_batch_view(ds), space);
}

MetricValue evaluate(model::Model& m, const data::PairedDataset& dataset,
                     MetricKind kind, model::FusionSpace space) {
  const auto predictions = predict_dataset(m, dataset, space);
  std::vector<int> labels(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i)
    labels[i] = dataset.instances[i].label;

  if (kind == MetricKind::accuracy) {
    std::vector<int> predicted(predictions.size());
    for (size_t i = 0; i < predictions.size(); ++i)
      predicted[i] = predictions[i].predicted_class;
    return accuracy(predicted, labels);
  }
  if (dataset.num_classes != 2)
    throw_error(ErrorKind::metric,
                "auroc needs a binary task, dataset has " +
                    std::to_string(dataset.num_classes) + " classes");
  std::vector<double> scores(predictions.size());
  for (size_t i = 0; i < predictions.size(); ++i)
    scores[i] = predictions[i].probs[1];
  return auroc(scores, labels);
}

size_t sweep_thread_cap() {
  if (const char* env = std::getenv("MODINV_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

namespace {

// Runs one job per grid entry on up to `threads` workers, each owning a
// clone of the frozen model. Results land by index, so the report is
// deterministic regardless of scheduling.
std::vector<MetricValue> run_levels(
    const model::Model& m, size_t count, size_t threads,
    const std::function<MetricValue(model::Model&, size_t)>& job) {
  std::vector<MetricValue> results(count);
  const size_t worker_count = std::max<size_t>(
      1, std::min(threads == 0 ? sweep_thread_cap() : threads, count));

  if (worker_count == 1) {
    model::Model local = m.clone();
    for (size_t i = 0; i < count; ++i) results[i] = job(local, i);
    return results;
  }

  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(worker_count);
  std::vector<std::thread> workers;
  for (size_t w = 0; w < worker_count; ++w) {
    workers.emplace_back([&, w]() {
      try {
        model::Model local = m.clone();
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= count) break;
          results[i] = job(local, i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::vector<double> deltas_of(const std::vector<double>& values,
                              double p_complete) {
  std::vector<double> deltas(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] == p_complete)
      deltas[i] = 0.0;
    else
      deltas[i] = degradation_delta(p_complete, values[i]);
  }
  return deltas;
}

}  // namespace

SweepReport sweep_missing(const model::Model& m,
                          const data::PairedDataset& test, Modality target,
                          std::span<const double> grid,
                          const SweepOptions& opts) {
  if (grid.empty())
    throw_error(ErrorKind::config, "sweep: empty availability grid");
  bool has_complete = false;
  for (double level : grid) {
    if (!(level >= 0.0 && level <= 1.0))
      throw_error(ErrorKind::config, "sweep: availability level " +
                                         std::to_string(level) +
                                         " outside [0, 1]");
    if (level == 1.0) has_complete = true;
  }
  if (!has_complete)
    throw_error(ErrorKind::config,
                "sweep: grid must contain the 1.0 (complete) level");

  SweepReport report;
  report.type = SweepType::missing;
  report.grid.assign(grid.begin(), grid.end());
  report.metric_kind = opts.metric;
  report.seed = opts.seed;
  report.strategy = opts.strategy;
  report.model_sha = opts.model_sha;
  report.target = std::string(1, modality_letter(target));

  const auto results = run_levels(
      m, grid.size(), opts.threads, [&](model::Model& local, size_t i) {
        data::MaskSpec spec;
        spec.target = target;
        spec.availability = grid[i];
        spec.seed = derive_seed(opts.seed, std::bit_cast<uint64_t>(grid[i]));
        spec.phase = data::MaskPhase::test;
        const auto masked = data::apply_mask(test, spec);
        return evaluate(local, masked, opts.metric, opts.space);
      });

  double p_complete = 0.0;
  for (size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == 1.0) p_complete = results[i].value;
  for (const auto& r : results) report.values.push_back(r.value);
  report.deltas = deltas_of(report.values, p_complete);
  return report;
}

SweepReport sweep_corruption(const model::Model& m,
                             const data::PairedDataset& test,
                             std::span<const double> sigmas,
                             const SweepOptions& opts) {
  if (sigmas.empty()) throw_error(ErrorKind::config, "sweep: empty sigmas");
  for (double s : sigmas)
    if (s < 0.0)
      throw_error(ErrorKind::config, "sweep: sigma must be >= 0");

  SweepReport report;
  report.type = SweepType::corruption;
  report.grid.assign(sigmas.begin(), sigmas.end());
  report.metric_kind = opts.metric;
  report.seed = opts.seed;
  report.strategy = opts.strategy;
  report.model_sha = opts.model_sha;

  const auto results = run_levels(
      m, sigmas.size(), opts.threads, [&](model::Model& local, size_t i) {
        data::NoiseSpec spec;
        spec.mu = 0.0;
        spec.sigma = sigmas[i];
        spec.fraction_corrupted = 1.0;
        spec.seed = derive_seed(opts.seed, std::bit_cast<uint64_t>(sigmas[i]));
        auto noisy = data::corrupt(test, spec, Modality::A);
        noisy = data::corrupt(noisy, spec, Modality::B);
        return evaluate(local, noisy, opts.metric, opts.space);
      });

  double p_clean = results[0].value;
  for (size_t i = 0; i < report.grid.size(); ++i)
    if (report.grid[i] == 0.0) p_clean = results[i].value;
  for (const auto& r : results) report.values.push_back(r.value);
  report.deltas = deltas_of(report.values, p_clean);
  return report;
}

void write_sweep_json(const SweepReport& report, const std::string& path,
                      const std::string& provenance_json) {
  nlohmann::json j;
  j["type"] = report.type == SweepType::missing ? "missing" : "corruption";
  j["grid"] = report.grid;
  j["metric_kind"] = metric_name(report.metric_kind);
  j["values"] = report.values;
  j["deltas"] = report.deltas;
  j["sigma"] = report.sigma;
  j["strategy"] = report.strategy;
  j["seed"] = report.seed;
  j["model_sha"] = report.model_sha;
  if (!report.target.empty()) j["target"] = report.target;
  if (!provenance_json.empty()) {
    const auto extra = nlohmann::json::parse(provenance_json);
    for (const auto& [key, value] : extra.items()) j[key] = value;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

void write_sweep_csv(const SweepReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");
  os << "level,value,delta\n";
  char buf[96];
  for (size_t i = 0; i < report.grid.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", report.grid[i],
                  report.values[i], report.deltas[i]);
    os << buf;
  }
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

void dump_block2_csv(model::Model& m, const data::PairedDataset& dataset,
                     const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");

  const bool per_modality = m.config().arch == model::Arch::single_branch ||
                            m.config().fusion == model::Fusion::late;
  size_t embed_dim = m.config().layer_dim;
  os << "id,label,modality";
  for (size_t i = 0; i < embed_dim; ++i) os << ",e" << i;
  os << "\n";

  char buf[64];
  const auto write_row = [&](int64_t id, int label, const char* modality,
                             const double* vec) {
    os << id << "," << label << "," << modality;
    for (size_t j = 0; j < embed_dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.10g", vec[j]);
      os << "," << buf;
    }
    os << "\n";
  };

  if (per_modality) {
    // Batch each modality's available rows through the trunk/branch once.
    for (Modality mod : {Modality::A, Modality::B}) {
      std::vector<size_t> rows;
      for (size_t i = 0; i < dataset.size(); ++i)
        if (dataset.instances[i].avail(mod)) rows.push_back(i);
      if (rows.empty()) continue;
      const size_t d = mod == Modality::A ? dataset.dim_a : dataset.dim_b;
      DenseMatrix batch(rows.size(), d);
      for (size_t k = 0; k < rows.size(); ++k) {
        const auto& vec = mod == Modality::A
                              ? dataset.instances[rows[k]].vec_a
                              : dataset.instances[rows[k]].vec_b;
        double* out = batch.data() + k * d;
        for (size_t j = 0; j < d; ++j) out[j] = vec[j];
      }
      const DenseMatrix block2 = m.block2_for(mod, batch);
      const char* tag = mod == Modality::A ? "A" : "B";
      for (size_t k = 0; k < rows.size(); ++k)
        write_row(dataset.instances[rows[k]].id,
                  dataset.instances[rows[k]].label, tag,
                  block2.data() + k * block2.cols());
    }
  } else {
    // Early/mid fusion has a single fused embedding per instance.
    const auto view = make_batch_view(dataset);
    net::ForwardCtx ctx{net::Mode::infer, nullptr, false, false};
    const auto r = m.forward_pair(view.vec_a, view.vec_b, ctx);
    for (size_t i = 0; i < dataset.size(); ++i)
      write_row(dataset.instances[i].id, dataset.instances[i].label, "fused",
                r.block2.data() + i * r.block2.cols());
  }
  os.flush();
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

}  // namespace modinv::eval
