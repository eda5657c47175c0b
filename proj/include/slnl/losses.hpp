#pragma once

#include <string>

#include "slnl/ops.hpp"

namespace slnl {

enum class LossKind { CE, FL, SMCE, SMFL };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// Loss family configuration. The kinds are nested: CE is the (0,0) corner,
/// FL fixes m=0, SMCE fixes gamma=0, SMFL is the general case.
struct LossConfig {
  LossKind kind = LossKind::CE;
  double gamma = 0.0;
  double margin = 0.0;
  double epsilon = 1e-7;  // probability clamp before logs

  static LossConfig ce();
  static LossConfig fl(double gamma);
  static LossConfig smce(double margin);
  static LossConfig smfl(double gamma, double margin);

  void validate() const;
  /// Table-style label, e.g. "SMFL(2,0.4)" / "FL(2,)" / "SMCE(,0.4)" / "CE".
  std::string label() const;
};

// Scalar loss family. p_t is the estimated probability of the true class.
double sm_term(double p_t, double m);                            // log(e^m + (1-e^m) p_t)
double cross_entropy(double p_t, double eps = 1e-7);             // -log p_t
double focal_loss(double p_t, double gamma, double eps = 1e-7);  // -(1-p_t)^gamma log p_t
double smce(double p_t, double m, double eps = 1e-7);
double smfl(double p_t, double gamma, double m, double eps = 1e-7);
double loss_value(double p_t, const LossConfig& cfg);

/// Numerically stable form that shifts the true-class score by -m; equal to
/// smce(softmax(z)_t, m) for any finite scores.
double smce_from_logits(const Tensor& z, std::size_t true_class, double m);

/// Loss of one classifier given its probability vector and a one-hot label.
double mode_loss(const Tensor& p, const Tensor& one_hot, const LossConfig& cfg);
double total_loss(double l_p, double l_v, double l_c);

/// Differentiable loss from a probability vector node.
Value loss_node(Tape& t, Value p, std::size_t true_class, const LossConfig& cfg);

}  // namespace slnl
