#include "slnl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slnl {

namespace {

double clamp_prob(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

std::string trim_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::CE: return "CE";
    case LossKind::FL: return "FL";
    case LossKind::SMCE: return "SMCE";
    case LossKind::SMFL: return "SMFL";
  }
  fail("loss_kind_name: bad kind");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "CE" || s == "ce") return LossKind::CE;
  if (s == "FL" || s == "fl") return LossKind::FL;
  if (s == "SMCE" || s == "smce") return LossKind::SMCE;
  if (s == "SMFL" || s == "smfl") return LossKind::SMFL;
  fail("loss.kind: unknown value '" + s + "' (expected CE, FL, SMCE or SMFL)");
}

LossConfig LossConfig::ce() { return LossConfig{LossKind::CE, 0.0, 0.0, 1e-7}; }
LossConfig LossConfig::fl(double gamma) { return LossConfig{LossKind::FL, gamma, 0.0, 1e-7}; }
LossConfig LossConfig::smce(double margin) {
  return LossConfig{LossKind::SMCE, 0.0, margin, 1e-7};
}
LossConfig LossConfig::smfl(double gamma, double margin) {
  return LossConfig{LossKind::SMFL, gamma, margin, 1e-7};
}

void LossConfig::validate() const {
  check(std::isfinite(gamma) && gamma >= 0.0, "loss: gamma must be finite and >= 0");
  check(std::isfinite(margin) && margin >= 0.0, "loss: margin must be finite and >= 0");
  check(epsilon > 0.0 && epsilon <= 1e-3, "loss: epsilon must be in (0, 1e-3]");
  switch (kind) {
    case LossKind::CE:
      check(gamma == 0.0 && margin == 0.0, "loss: CE requires gamma = 0 and margin = 0");
      break;
    case LossKind::FL:
      check(margin == 0.0, "loss: FL requires margin = 0");
      break;
    case LossKind::SMCE:
      check(gamma == 0.0, "loss: SMCE requires gamma = 0");
      break;
    case LossKind::SMFL:
      break;
  }
}

std::string LossConfig::label() const {
  switch (kind) {
    case LossKind::CE: return "CE";
    case LossKind::FL: return "FL(" + trim_num(gamma) + ",)";
    case LossKind::SMCE: return "SMCE(," + trim_num(margin) + ")";
    case LossKind::SMFL: return "SMFL(" + trim_num(gamma) + "," + trim_num(margin) + ")";
  }
  fail("loss label: bad kind");
}

double sm_term(double p_t, double m) {
  check(std::isfinite(m) && m >= 0.0, "sm_term: margin must be >= 0");
  const double em = std::exp(m);
  return std::log(em + (1.0 - em) * p_t);
}

double cross_entropy(double p_t, double eps) { return -std::log(clamp_prob(p_t, eps)); }

double focal_loss(double p_t, double gamma, double eps) {
  check(std::isfinite(gamma) && gamma >= 0.0, "focal_loss: gamma must be >= 0");
  const double pc = clamp_prob(p_t, eps);
  return std::pow(1.0 - pc, gamma) * (-std::log(pc));
}

double smce(double p_t, double m, double eps) {
  return sm_term(clamp_prob(p_t, eps), m) + cross_entropy(p_t, eps);
}

double smfl(double p_t, double gamma, double m, double eps) {
  return sm_term(clamp_prob(p_t, eps), m) + focal_loss(p_t, gamma, eps);
}

double loss_value(double p_t, const LossConfig& cfg) {
  cfg.validate();
  return smfl(p_t, cfg.gamma, cfg.margin, cfg.epsilon);
}

double smce_from_logits(const Tensor& z, std::size_t true_class, double m) {
  require_rank(z, 1, "smce_from_logits");
  check(true_class < z.shape[0], "smce_from_logits: class index out of range");
  check(std::isfinite(m) && m >= 0.0, "smce_from_logits: margin must be >= 0");
  // shifted scores: z_t - m, z_c unchanged; loss = logsumexp(shifted) - (z_t - m)
  const std::size_t C = z.shape[0];
  double mx = z[true_class] - m;
  for (std::size_t c = 0; c < C; ++c)
    if (c != true_class) mx = std::max(mx, z[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double s = (c == true_class) ? z[c] - m : z[c];
    sum += std::exp(s - mx);
  }
  return mx + std::log(sum) - (z[true_class] - m);
}

double mode_loss(const Tensor& p, const Tensor& one_hot, const LossConfig& cfg) {
  cfg.validate();
  require_rank(p, 1, "mode_loss probabilities");
  require_shape(one_hot, p.shape, "mode_loss label");
  double psum = 0.0;
  for (double v : p.data) psum += v;
  check(std::abs(psum - 1.0) <= 1e-9, "mode_loss: probabilities must sum to 1");
  std::size_t hits = 0, t = 0;
  for (std::size_t i = 0; i < one_hot.numel(); ++i) {
    if (one_hot[i] == 1.0) {
      hits += 1;
      t = i;
    } else if (one_hot[i] != 0.0) {
      fail("mode_loss: label vector is not one-hot");
    }
  }
  check(hits == 1, "mode_loss: label vector is not one-hot");
  return smfl(p[t], cfg.gamma, cfg.margin, cfg.epsilon);
}

double total_loss(double l_p, double l_v, double l_c) { return l_p + l_v + l_c; }

Value loss_node(Tape& t, Value p, std::size_t true_class, const LossConfig& cfg) {
  cfg.validate();
  const Tensor& pv = t.value(p);
  require_rank(pv, 1, "loss_node probabilities");
  check(true_class < pv.shape[0], "loss_node: class index out of range");
  Value pt = select(t, p, true_class);
  Value pc = clamp(t, pt, cfg.epsilon, 1.0 - cfg.epsilon);
  const double em = std::exp(cfg.margin);
  Value sm = log_ew(t, affine(t, pc, 1.0 - em, em));
  Value nlog = affine(t, log_ew(t, pc), -1.0, 0.0);
  Value focal = mul(t, pow_const(t, affine(t, pc, -1.0, 1.0), cfg.gamma), nlog);
  return add(t, sm, focal);
}

}  // namespace slnl
