#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "eegbio/datamodel.hpp"
#include "eegbio/rng.hpp"

namespace eegbio::test {

inline EpochSet make_epochs(double fs, std::size_t n_epochs, std::size_t n_components, std::size_t n_samples,
                            const std::function<double(std::size_t e, std::size_t c, std::size_t i)>& f) {
  EpochSet x;
  x.meta = {"S001", "A", Group::HC, 30.0, Sex::F};
  x.fs = fs;
  x.n_epochs = n_epochs;
  x.n_components = n_components;
  x.n_samples = n_samples;
  x.epoch_seconds = static_cast<double>(n_samples) / fs;
  x.data.resize(n_epochs * n_components * n_samples);
  for (std::size_t e = 0; e < n_epochs; ++e)
    for (std::size_t c = 0; c < n_components; ++c)
      for (std::size_t i = 0; i < n_samples; ++i) x.data[x.offset(e, c) + i] = f(e, c, i);
  return x;
}

inline Series noise_series(Rng rng, std::size_t n_epochs, std::size_t n_samples) {
  Series s(n_epochs, std::vector<double>(n_samples));
  for (auto& ep : s)
    for (auto& v : ep) v = rng.normal();
  return s;
}

inline Series sine_series(double f, double fs, std::size_t n_epochs, std::size_t n_samples, double phase = 0.3) {
  Series s(n_epochs, std::vector<double>(n_samples));
  for (std::size_t e = 0; e < n_epochs; ++e)
    for (std::size_t i = 0; i < n_samples; ++i)
      s[e][i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase + 0.7 * static_cast<double>(e));
  return s;
}

inline Series scaled(Series s, double c) {
  for (auto& ep : s)
    for (auto& v : ep) v *= c;
  return s;
}

/// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("eegbio-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace eegbio::test
