#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"

namespace authformer {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sum of low-frequency plane waves rescaled to [0, 1].
std::vector<double> smooth_field(std::size_t size, Rng& rng) {
  constexpr int kWaves = 6;
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < kWaves; ++i) {
    Wave w{static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4)), rng.uniform(0.0, kTwoPi),
           rng.uniform(0.5, 1.0)};
    if (w.fx == 0 && w.fy == 0) w.fx = 1;
    waves.push_back(w);
  }
  std::vector<double> field(size * size, 0.0);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double v = 0;
      for (const auto& w : waves) {
        v += w.amp * std::cos(kTwoPi * (w.fx * static_cast<double>(x) + w.fy * static_cast<double>(y)) /
                                  static_cast<double>(size) +
                              w.phase);
      }
      field[y * size + x] = v;
    }
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double low = *lo, range = *hi - *lo;
  for (auto& v : field) v = range > 0 ? (v - low) / range : 0.5;
  return field;
}

// Three class-specific sinusoids, scaled into [-1, 1].
std::vector<double> tone_mixture(std::size_t length, Rng& rng) {
  std::vector<double> signal(length, 0.0);
  for (int k = 0; k < 3; ++k) {
    const double cycles = rng.uniform(2.0, 24.0);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double amp = rng.uniform(0.5, 1.0);
    for (std::size_t t = 0; t < length; ++t) {
      signal[t] += amp * std::sin(kTwoPi * cycles * static_cast<double>(t) / static_cast<double>(length) + phase) / 3.0;
    }
  }
  return signal;
}

}  // namespace

double modality_noise_multiplier(Modality tag) {
  switch (tag) {
    case Modality::Face: return 1.0;
    case Modality::Fingerprint: return 1.25;
    case Modality::Palmprint: return 1.5;
    case Modality::Voice: return 2.0;
  }
  return 1.0;
}

Dataset generate_synthetic(const SynthConfig& config) {
  if (config.num_classes < 2) throw ValidationError("need at least 2 classes, got " + std::to_string(config.num_classes));
  if (config.samples_per_class < 2) throw ValidationError("need at least 2 samples per class");
  if (!(config.noise_level >= 0.0) || !std::isfinite(config.noise_level)) {
    throw ValidationError("noise level must be a finite value >= 0");
  }
  if (config.image_size == 0 || config.sequence_length == 0) throw ValidationError("empty sample geometry");

  const std::size_t n = config.num_classes * config.samples_per_class;
  const std::size_t pixels = config.image_size * config.image_size;
  Dataset ds;
  auto& m = ds.manifest;
  m.num_classes = config.num_classes;
  m.samples_per_class = config.samples_per_class;
  m.seed = config.seed;
  m.noise_level = config.noise_level;
  m.test_fraction = config.test_fraction;
  for (std::size_t i = 0; i < n; ++i) m.labels.push_back(i / config.samples_per_class);

  Rng root(config.seed);
  for (auto tag : kAllModalities) {
    Rng proto_rng = root.fork(1 + static_cast<std::uint64_t>(tag));
    Rng noise_rng = root.fork(101 + static_cast<std::uint64_t>(tag));
    const double sigma = config.noise_level * modality_noise_multiplier(tag);
    const bool image = is_image(tag);
    const std::size_t per = image ? pixels : config.sequence_length;
    const double lo = image ? 0.0 : -1.0;
    std::vector<float> values(n * per);
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      const auto proto = image ? smooth_field(config.image_size, proto_rng) : tone_mixture(per, proto_rng);
      for (std::size_t s = 0; s < config.samples_per_class; ++s) {
        float* dst = values.data() + (c * config.samples_per_class + s) * per;
        for (std::size_t i = 0; i < per; ++i) {
          const double noise = sigma > 0 ? sigma * noise_rng.normal() : 0.0;
          dst[i] = static_cast<float>(std::clamp(proto[i] + noise, lo, 1.0));
        }
      }
    }
    ModalityDescriptor d{tag, {}, std::string(modality_name(tag)) + ".atf"};
    d.shape = image ? Shape{n, config.image_size, config.image_size, 1} : Shape{n, config.sequence_length};
    m.modalities.push_back(std::move(d));
    ds.values[tag] = std::move(values);
  }

  const auto split = split_dataset(m.labels, m.num_classes, config.test_fraction, config.seed);
  m.split.assign(n, SplitSide::Train);
  for (auto id : split.test) m.split[id] = SplitSide::Test;
  return ds;
}

}  // namespace authformer
