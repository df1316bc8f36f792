#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "repur/tensor.hpp"

namespace repur::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("repur_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Largest relative error between the taped gradient of f at each leaf and
/// central finite differences with step h, as |a - n| / max(|a|, |n|, 1e-6).
template <typename F>
double gradient_check(std::vector<Tensor> leaves, F&& f, double h = 1e-5) {
  for (auto& leaf : leaves) leaf.zero_grad();
  {
    GradTape tape;
    Tensor loss = f();
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& leaf : leaves) {
    const Matrix analytic = leaf.grad();
    Matrix& value = leaf.mutable_value();
    for (Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double up = f().item();
      value.data()[i] = saved - h;
      const double down = f().item();
      value.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace repur::testing
