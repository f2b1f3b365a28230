#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "catfill/data/dataset.hpp"
#include "catfill/nd/gradcheck.hpp"
#include "catfill/nd/tape.hpp"
#include "catfill/nd/tensor.hpp"

namespace testing_support {

using catfill::nd::Tape;
using catfill::nd::Tensor;

/// Builds a scalar from the tensors (bound as tape params) and returns the
/// worst relative error between tape gradients and central differences.
inline double tape_fd_error(std::vector<Tensor>& values,
                            const std::function<Tape::Var(Tape&, const std::vector<Tape::Param>&)>& f,
                            double step = 1e-6) {
  std::vector<Tensor> grads;
  for (const auto& v : values) grads.emplace_back(v.rows(), v.cols());
  Tape tape;
  std::vector<Tape::Param> ps;
  for (std::size_t i = 0; i < values.size(); ++i) ps.push_back(tape.register_param(values[i], grads[i]));
  auto loss = [&] {
    tape.clear();
    return tape.value(f(tape, ps))[0];
  };
  tape.clear();
  tape.backward(f(tape, ps));
  std::vector<Tensor*> ptrs;
  for (auto& v : values) ptrs.push_back(&v);
  return catfill::nd::finite_diff_check(ptrs, loss, grads, step).max_rel_error;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& gen, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = u(gen);
  return t;
}

/// Sample with explicit windows (forward oldest->newest, backward farthest->nearest).
inline catfill::data::Sample make_sample(int user, int target, std::vector<int> forward,
                                         std::vector<int> backward,
                                         catfill::data::Split split = catfill::data::Split::Train) {
  catfill::data::Sample s;
  s.user = user;
  s.target = target;
  s.forward = std::move(forward);
  s.backward = std::move(backward);
  s.split = split;
  return s;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("catfill_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

}  // namespace testing_support
