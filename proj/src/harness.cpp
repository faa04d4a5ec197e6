#include "authformer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "authformer/error.hpp"

namespace authformer {
namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

AblationRow run_combination(const Dataset& data, const TrainConfig& base, const AblationCombination& combo) {
  TrainConfig config = base;
  config.modalities = combo.modalities;
  const auto model = train_new_model<float>(data, config);
  const auto ids = data.ids(SplitSide::Test);
  const auto m = evaluate_classification(model, data, ids, combo.modalities);
  return {std::string(combo.label), m.accuracy, m.macro_f1, m.macro_recall};
}

}  // namespace

std::vector<AblationRow> ablation_run(const Dataset& data, const TrainConfig& config, std::size_t jobs) {
  for (auto tag : kAllModalities) data.descriptor(tag);
  const auto& combos = ablation_combinations();
  std::vector<AblationRow> rows(combos.size());
  jobs = std::clamp<std::size_t>(jobs, 1, combos.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < combos.size(); ++i) rows[i] = run_combination(data, config, combos[i]);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < combos.size(); i = next++) {
        try {
          rows[i] = run_combination(data, config, combos[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<DepthRow> depth_sweep(const Dataset& data, std::span<const std::size_t> layer_counts,
                                  const TrainConfig& base) {
  if (layer_counts.empty()) throw ValidationError("depth sweep needs at least one layer count");
  std::vector<DepthRow> rows;
  for (auto layers : layer_counts) {
    TrainConfig config = base;
    config.layers = layers;
    std::vector<EpochLog> log;
    const auto model = train_new_model<float>(data, config, &log);
    const auto ids = data.ids(SplitSide::Test);
    const auto m = evaluate_classification(model, data, ids, config.modalities);
    double seconds = 0;
    for (const auto& e : log) seconds += e.seconds;
    rows.push_back({layers, m.accuracy, log.empty() ? 0.0 : seconds / static_cast<double>(log.size()),
                    model.parameter_count()});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "combination,accuracy,macro_f1,macro_recall\n";
  for (const auto& r : rows) {
    out += quoted(r.combination) + "," + fixed4(r.accuracy) + "," + fixed4(r.macro_f1) + "," +
           fixed4(r.macro_recall) + "\n";
  }
  return out;
}

std::string depth_csv(const std::vector<DepthRow>& rows) {
  std::string out = "layers,accuracy,seconds_per_epoch,parameter_count\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layers) + "," + fixed4(r.accuracy) + "," + fixed4(r.seconds_per_epoch) + "," +
           std::to_string(r.parameter_count) + "\n";
  }
  return out;
}

std::string classification_csv(const std::string& combination, const ClassificationMetrics& m) {
  return "combination,accuracy,macro_recall,macro_f1\n" + quoted(combination) + "," + fixed4(m.accuracy) + "," +
         fixed4(m.macro_recall) + "," + fixed4(m.macro_f1) + "\n";
}

std::string verification_csv(const std::string& combination, const EerResult& v) {
  return "combination,tar,frr,far,eer,threshold\n" + quoted(combination) + "," + fixed4(v.tar) + "," +
         fixed4(v.frr) + "," + fixed4(v.far) + "," + fixed4(v.eer) + "," + fixed4(v.threshold) + "\n";
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %9s %9s %12s\n", "combination", "accuracy", "macro_f1", "macro_recall");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s %9.4f %9.4f %12.4f\n", r.combination.c_str(), r.accuracy, r.macro_f1,
                  r.macro_recall);
    out += line;
  }
  return out;
}

std::string depth_table(const std::vector<DepthRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%6s %9s %10s %11s\n", "layers", "accuracy", "sec/epoch", "parameters");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%6zu %9.4f %10.4f %11zu\n", r.layers, r.accuracy, r.seconds_per_epoch,
                  r.parameter_count);
    out += line;
  }
  return out;
}

}  // namespace authformer
