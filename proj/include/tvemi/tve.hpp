#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvemi {

// Functional form of one covariate's time-varying effect f(t). The basis
// expansion b(t) satisfies f(t) = b(t) . coeffs:
//   Constant -> (1)
//   Linear   -> (1, t)
//   Rcs      -> (1, t, s_1(t), ..., s_{L-2}(t)) for L knots
//   Step     -> one-hot interval indicators for cutpoints 0 < s_1 < ... < s_K
class TveSpec {
 public:
  enum class Form { Constant, Linear, Rcs, Step };

  static TveSpec constant();
  static TveSpec linear();
  static TveSpec rcs(std::vector<double> knots);       // >= 3 strictly increasing
  static TveSpec step(std::vector<double> cutpoints);  // >= 1 strictly increasing, > 0

  Form form() const { return form_; }
  int dimension() const;
  const std::vector<double>& knots() const { return knots_; }

  bool operator==(const TveSpec& other) const = default;

 private:
  TveSpec(Form f, std::vector<double> k) : form_(f), knots_(std::move(k)) {}
  Form form_ = Form::Constant;
  std::vector<double> knots_;  // rcs knots or step cutpoints
};

// Restricted cubic spline term s_i(t), 0-based i in [0, L-3]. Both tails are
// linear in t by construction.
template <class Scalar>
Scalar rcs_term(Scalar t, const std::vector<double>& u, int i) {
  auto cube_pos = [](Scalar v) { return v > Scalar(0) ? v * v * v : Scalar(0); };
  const int last = static_cast<int>(u.size()) - 1;
  const Scalar denom = Scalar(u[last] - u[last - 1]);
  return cube_pos(t - Scalar(u[i])) -
         cube_pos(t - Scalar(u[last - 1])) * Scalar(u[last] - u[i]) / denom +
         cube_pos(t - Scalar(u[last])) * Scalar(u[last - 1] - u[i]) / denom;
}

// Basis vector b(t); basis_into writes into a preallocated buffer of length
// spec.dimension().
Eigen::VectorXd basis(const TveSpec& spec, double t);
void basis_into(const TveSpec& spec, double t, Eigen::Ref<Eigen::VectorXd> out);

// f(t) = b(t) . coeffs
double tve_eval(const TveSpec& spec, const Eigen::VectorXd& coeffs, double t);

// Type-7 quantile knots at the conventional percentile sets:
//   L=3 -> (10,50,90), L=4 -> (5,35,65,95), L=5 -> (5,25,50,75,95).
// `times` is the pool the percentiles are taken over (by default the observed
// event times). Errors if fewer than L distinct values or if the selected
// knots are not strictly increasing.
std::vector<double> select_knots(const std::vector<double>& times, int n_knots);

// Lossless round-trip serialization: "constant", "linear",
// "rcs:k1,k2,...", "step:c1,c2,...".
std::string to_string(const TveSpec& spec);
TveSpec parse_tve_spec(const std::string& text);

}  // namespace tvemi
