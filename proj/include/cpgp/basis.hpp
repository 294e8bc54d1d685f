#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace cpgp {

/// Regression functions f(t) = [f_1(t), ..., f_q(t)] of the mean f(t)^T beta.
/// An empty basis is a zero-mean model.
class RegressionBasis {
 public:
  using Function = std::function<double(double)>;

  RegressionBasis() = default;

  RegressionBasis(std::vector<Function> functions, bool segment_invariant,
                  std::string name)
      : functions_(std::move(functions)),
        segment_invariant_(segment_invariant),
        name_(std::move(name)) {}

  /// f(t) = 1, the default mean model.
  static RegressionBasis constant() {
    return RegressionBasis({[](double) { return 1.0; }}, true, "constant");
  }

  static RegressionBasis zero_mean() {
    return RegressionBasis({}, true, "none");
  }

  /// f(t) = [1, t]; not identical across segments.
  static RegressionBasis linear() {
    return RegressionBasis(
        {[](double) { return 1.0; }, [](double t) { return t; }}, false,
        "linear");
  }

  std::size_t size() const noexcept { return functions_.size(); }
  bool empty() const noexcept { return functions_.empty(); }

  /// True when every segment sees the same regression rows
  /// (Gamma_1 = ... = Gamma_k), e.g. for constant functions.
  bool segment_invariant() const noexcept { return segment_invariant_; }

  const std::string& name() const noexcept { return name_; }

  Eigen::VectorXd evaluate(double t) const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(functions_.size()));
    for (std::size_t j = 0; j < functions_.size(); ++j) {
      f[static_cast<Eigen::Index>(j)] = functions_[j](t);
    }
    return f;
  }

  void evaluate_into(double t, double* out) const {
    for (std::size_t j = 0; j < functions_.size(); ++j) out[j] = functions_[j](t);
  }

 private:
  std::vector<Function> functions_;
  bool segment_invariant_ = true;
  std::string name_ = "none";
};

}  // namespace cpgp
