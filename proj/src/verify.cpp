#include "slnl/verify.hpp"

#include <cmath>
#include <numbers>

#include "slnl/checkpoint.hpp"
#include "slnl/gradcheck.hpp"

namespace slnl {

namespace {

// Direct double-sum transform, kept independent of the fast path in dft.cpp.
FreqComponents dft2_reference(const Tensor& x) {
  const std::size_t C = x.shape[0], T = x.shape[1], N = x.shape[2];
  FreqComponents f{Tensor({C, T, N}), Tensor({C, T, N})};
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t u = 0; u < T; ++u)
      for (std::size_t v = 0; v < N; ++v) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t n = 0; n < N; ++n) {
            const double ang =
                -two_pi * (static_cast<double>(u * t) / static_cast<double>(T) +
                           static_cast<double>(v * n) / static_cast<double>(N));
            re += x.at3(c, t, n) * std::cos(ang);
            im += x.at3(c, t, n) * std::sin(ang);
          }
        f.f_cos.at3(c, u, v) = re;
        f.f_sin.at3(c, u, v) = im;
      }
  return f;
}

// Brute-force pairwise non-local, independent of the softmax formulation.
Tensor nonlocal_reference(const Tensor& x, const NonLocalParams& p) {
  const std::size_t M = x.shape[0], P = x.shape[1];
  const std::size_t Q = p.w_g.shape[0], L = p.w_phi.shape[0];
  Tensor phi({M, L}), psi({M, L}), g({M, Q});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t l = 0; l < L; ++l) {
      double a = 0.0, b = 0.0;
      for (std::size_t c = 0; c < P; ++c) {
        a += p.w_phi.at2(l, c) * x.at2(i, c);
        b += p.w_psi.at2(l, c) * x.at2(i, c);
      }
      phi.at2(i, l) = a;
      psi.at2(i, l) = b;
    }
    for (std::size_t q = 0; q < Q; ++q) {
      double a = 0.0;
      for (std::size_t c = 0; c < P; ++c) a += p.w_g.at2(q, c) * x.at2(i, c);
      g.at2(i, q) = a;
    }
  }
  Tensor y({M, Q});
  for (std::size_t i = 0; i < M; ++i) {
    double z = 0.0;
    std::vector<double> w(M);
    for (std::size_t j = 0; j < M; ++j) {
      double dot = 0.0;
      for (std::size_t l = 0; l < L; ++l) dot += phi.at2(i, l) * psi.at2(j, l);
      w[j] = std::exp(dot);
      z += w[j];
    }
    std::vector<double> pooled(Q, 0.0);
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t q = 0; q < Q; ++q) pooled[q] += w[j] / z * g.at2(j, q);
    for (std::size_t q = 0; q < Q; ++q) {
      double acc = 0.0;
      for (std::size_t q2 = 0; q2 < Q; ++q2) acc += p.w_w.at2(q, q2) * pooled[q2];
      y.at2(i, q) = acc;
    }
  }
  return y;
}

CheckResult make_check(const std::string& name, double tolerance, double observed) {
  return CheckResult{name, tolerance, observed, observed <= tolerance};
}

CheckResult fd_result(const std::string& name, const GradCheckResult& r) {
  return CheckResult{name, 0.0, r.worst_excess, r.pass};
}

GradCheckResult check_model_gradients(Model& model, const Tensor& input, std::size_t label,
                                      std::size_t per_tensor_coords) {
  model.params().zero_grads();
  {
    Tape t;
    BoundParams bound;
    Model::Heads heads = model.build_heads(t, bound, input, Mode::train, 1234);
    Value loss = model.build_loss(t, heads, label);
    t.backward(loss);
    bound.accumulate_grads(t, model.params());
  }
  std::vector<Tensor*> wiggled;
  std::vector<const Tensor*> analytic;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& e = model.params().entry(static_cast<int>(i));
    if (!e.learnable) continue;
    wiggled.push_back(&e.value);
    analytic.push_back(&e.grad);
  }
  auto eval = [&]() {
    Tape t;
    BoundParams bound;
    Model::Heads heads = model.build_heads(t, bound, input, Mode::train, 1234);
    return t.value(model.build_loss(t, heads, label))[0];
  };
  GradCheckSettings s;
  s.max_coords = per_tensor_coords;
  s.seed = 17;
  return finite_difference_check(eval, wiggled, analytic, s);
}

}  // namespace

std::vector<CheckResult> verify_dft() {
  std::vector<CheckResult> out;
  Rng rng(20240209);
  double round_trip = 0.0, parseval = 0.0, oracle = 0.0, linearity = 0.0, residual = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = 1 + rng() % 3, T = 1 + rng() % 16, N = 1 + rng() % 16;
    Tensor x = random_uniform({C, T, N}, rng, -2.0, 2.0);
    FreqComponents f = dft2(x);

    double resid = 0.0;
    Tensor back = idft2(f, &resid);
    round_trip = std::max(round_trip, max_abs_diff(back, x));
    residual = std::max(residual, resid);

    FreqComponents ref = dft2_reference(x);
    oracle = std::max(oracle, max_abs_diff(f.f_cos, ref.f_cos));
    oracle = std::max(oracle, max_abs_diff(f.f_sin, ref.f_sin));

    double space = 0.0, freq = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) space += x[i] * x[i];
    for (std::size_t i = 0; i < x.numel(); ++i)
      freq += f.f_cos[i] * f.f_cos[i] + f.f_sin[i] * f.f_sin[i];
    freq /= static_cast<double>(T * N);
    parseval = std::max(parseval, std::abs(space - freq) / std::max(1.0, std::abs(space)));

    Tensor y = random_uniform({C, T, N}, rng, -2.0, 2.0);
    const double a = uniform(rng, -2.0, 2.0), b = uniform(rng, -2.0, 2.0);
    Tensor mix({C, T, N});
    for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + b * y[i];
    FreqComponents fm = dft2(mix), fy = dft2(y);
    for (std::size_t i = 0; i < mix.numel(); ++i) {
      linearity =
          std::max(linearity, std::abs(fm.f_cos[i] - (a * f.f_cos[i] + b * fy.f_cos[i])));
      linearity =
          std::max(linearity, std::abs(fm.f_sin[i] - (a * f.f_sin[i] + b * fy.f_sin[i])));
    }
  }
  out.push_back(make_check("dft.round_trip", 1e-10, round_trip));
  out.push_back(make_check("dft.parseval_rel", 1e-9, parseval));
  out.push_back(make_check("dft.direct_sum_oracle", 1e-9, oracle));
  out.push_back(make_check("dft.linearity", 1e-9, linearity));
  out.push_back(make_check("dft.imag_residual", 1e-9, residual));

  // spectra identity: amplitude^2 == cos^2 + sin^2
  Tensor x = random_uniform({2, 8, 8}, rng, -1.0, 1.0);
  FreqComponents f = dft2(x);
  SpectraOut s = spectra(f);
  double spec_err = 0.0;
  for (std::size_t i = 0; i < f.f_cos.numel(); ++i)
    spec_err = std::max(spec_err, std::abs(s.amplitude[i] * s.amplitude[i] -
                                           (f.f_cos[i] * f.f_cos[i] + f.f_sin[i] * f.f_sin[i])));
  out.push_back(make_check("dft.spectra_identity", 1e-9, spec_err));
  return out;
}

std::vector<CheckResult> verify_nonlocal() {
  std::vector<CheckResult> out;
  Rng rng(7771);

  double oracle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t M = 1 + rng() % 32, P = 1 + rng() % 6, Q = 1 + rng() % 6,
                      L = 1 + rng() % 4;
    NonLocalParams p = NonLocalParams::init(P, Q, L, rng);
    Tensor x = random_uniform({M, P}, rng, -1.5, 1.5);
    oracle = std::max(oracle, max_abs_diff(nonlocal_forward(x, p), nonlocal_reference(x, p)));
  }
  out.push_back(make_check("nonlocal.pairwise_oracle", 1e-12, oracle));

  // affinity rows sum to 1
  double rowsum = 0.0;
  {
    const std::size_t M = 12, P = 4, L = 3;
    NonLocalParams p = NonLocalParams::init(P, 4, L, rng);
    Tensor x = random_uniform({M, P}, rng, -2.0, 2.0);
    Tape t;
    Value xb = t.leaf(Tensor({1, M, P}, x.data));
    Value attn = softmax_lastaxis(
        t, bmm_nt(t, linear_rows(t, xb, t.leaf(p.w_phi)), linear_rows(t, xb, t.leaf(p.w_psi))));
    const Tensor& rows = t.value(attn);
    for (std::size_t i = 0; i < M; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < M; ++j) s += rows.data[i * M + j];
      rowsum = std::max(rowsum, std::abs(s - 1.0));
    }
  }
  out.push_back(make_check("nonlocal.affinity_rows_sum", 1e-12, rowsum));

  // degeneracy: w_w = 0 collapses the SLnL block onto the local block
  {
    SlnlBlockParams p = SlnlBlockParams::init(3, 4, 3, 2, rng);
    p.t_nl.w_w.fill(0.0);
    p.s_nl.w_w.fill(0.0);
    p.st_nl.w_w.fill(0.0);
    Tensor x = random_uniform({3, 6, 5}, rng, -1.0, 1.0);
    Tensor a = slnl_block(x, p, Mode::eval);
    Tensor b = local_block(x, p.local, Mode::eval);
    out.push_back(make_check("nonlocal.ww_zero_degeneracy", 0.0,
                             bitwise_equal(a, b) ? 0.0 : max_abs_diff(a, b) + 1.0));
  }

  // affinity fields: structural set equals the perturbation probe
  {
    const std::size_t T = 6, N = 5;
    std::size_t mismatches = 0;
    for (auto target : {std::pair<std::size_t, std::size_t>{2, 2}, {0, 0}, {5, 4}}) {
      PositionSet structural = affinity_field(BlockKind::local, 3, T, N, target);
      PositionSet probed = empirical_affinity_field(BlockKind::local, 3, 2, 3, T, N, target, 99);
      if (structural != probed) ++mismatches;
    }
    PositionSet full = affinity_field(BlockKind::slnl, 3, T, N, {2, 2});
    if (full != empirical_affinity_field(BlockKind::slnl, 3, 2, 3, T, N, {2, 2}, 99))
      ++mismatches;
    out.push_back(make_check("nonlocal.affinity_field_sets", 0.0,
                             static_cast<double>(mismatches)));
  }
  return out;
}

std::vector<CheckResult> verify_losses() {
  std::vector<CheckResult> out;
  Rng rng(99123);

  double eq14 = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Tensor z = random_uniform({7}, rng, -4.0, 4.0);
    const std::size_t t = rng() % 7;
    Tensor p = softmax_lastaxis(z);
    eq14 = std::max(eq14, std::abs(smce_from_logits(z, t, 0.6) - smce(p[t], 0.6)));
  }
  out.push_back(make_check("losses.logit_shift_identity", 1e-12, eq14));

  double lattice = 0.0;
  for (double p : {1e-8, 0.001, 0.2, 0.5, 0.9, 0.9999999}) {
    lattice = std::max(lattice, std::abs(smfl(p, 0.0, 0.0) - cross_entropy(p)));
    for (double g : {0.5, 2.0, 3.0})
      lattice = std::max(lattice, std::abs(smfl(p, g, 0.0) - focal_loss(p, g)));
    for (double m : {0.2, 0.4, 0.6})
      lattice = std::max(lattice, std::abs(smfl(p, 0.0, m) - smce(p, m)));
  }
  out.push_back(make_check("losses.reduction_lattice", 0.0, lattice));

  std::size_t violations = 0;
  const double m = 0.4;
  double prev = sm_term(0.0, m);
  for (int i = 0; i <= 1000; ++i) {
    const double p = static_cast<double>(i) / 1000.0;
    const double v = sm_term(p, m);
    if (v < -1e-15 || v > m + 1e-15) ++violations;
    if (i > 0 && v >= prev) ++violations;
    prev = v;
  }
  out.push_back(make_check("losses.sm_bounds_grid", 0.0, static_cast<double>(violations)));

  std::size_t order_violations = 0;
  for (int i = 1; i < 200; ++i) {
    const double p = static_cast<double>(i) / 200.0;
    if (smfl(p, 2.0, 0.4) < focal_loss(p, 2.0)) ++order_violations;
    if (smce(p, 0.4) < cross_entropy(p)) ++order_violations;
  }
  out.push_back(
      make_check("losses.soft_margin_ordering", 0.0, static_cast<double>(order_violations)));
  return out;
}

ModelConfig toy_model_config() {
  ModelConfig cfg;
  cfg.m1 = 1;
  cfg.m2 = 1;
  cfg.channels = {4, 4};
  cfg.kernels = {3};
  cfg.pool_every = 2;
  cfg.k_systems = 1;
  cfg.joints_out = 4;
  cfg.joints_in = 4;
  cfg.t_frames = 4;
  cfg.coord_dim = 2;
  cfg.num_classes = 2;
  cfg.attention = FAVariant::rfa;
  cfg.attention_lambda = 4;
  cfg.loss = LossConfig::smfl(2.0, 0.4);
  cfg.dropout_rate = 0.2;
  cfg.seed = 5150;
  return cfg;
}

CheckResult toy_model_gradient_sweep(std::size_t min_coords) {
  Model model(toy_model_config());
  Rng rng(31337);
  Tensor input = random_uniform({2, 4, 4}, rng, -1.0, 1.0);
  std::size_t tensors = 0;
  for (std::size_t i = 0; i < model.params().size(); ++i)
    if (model.params().entry(static_cast<int>(i)).learnable) ++tensors;
  const std::size_t per_tensor = (min_coords + tensors - 1) / tensors + 1;
  GradCheckResult r = check_model_gradients(model, input, 1, per_tensor);
  CheckResult c = fd_result("gradients.toy_model_sweep", r);
  if (r.checked < min_coords) {
    c.pass = false;
    c.observed = -1.0;
  }
  return c;
}

std::vector<CheckResult> verify_gradients() {
  std::vector<CheckResult> out;
  Rng rng(4242);

  // representative parameterized operations
  {
    Tensor x = random_uniform({2, 4, 3}, rng, -1.0, 1.0);
    Tensor k = random_uniform({3, 2, 3, 3}, rng, -0.7, 0.7);
    Tensor b = random_uniform({3}, rng, -0.2, 0.2);
    std::vector<Tensor> inputs{x, k, b};
    std::vector<Tensor> analytic;
    {
      Tape t;
      Value xv = t.leaf(x, true), kv = t.leaf(k, true), bv = t.leaf(b, true);
      Value y = conv2d(t, xv, kv, bv);
      Value root = sum_all(t, mul(t, y, y));
      t.backward(root);
      analytic = {t.grad(xv), t.grad(kv), t.grad(bv)};
    }
    auto eval = [&]() {
      Tape t;
      Value y = conv2d(t, t.leaf(inputs[0]), t.leaf(inputs[1]), t.leaf(inputs[2]));
      return t.value(sum_all(t, mul(t, y, y)))[0];
    };
    std::vector<Tensor*> wiggled{&inputs[0], &inputs[1], &inputs[2]};
    std::vector<const Tensor*> grads{&analytic[0], &analytic[1], &analytic[2]};
    out.push_back(fd_result("gradients.conv2d", finite_difference_check(eval, wiggled, grads)));
  }

  out.push_back(toy_model_gradient_sweep(200));
  return out;
}

std::vector<CheckResult> verify_suite(const std::string& name) {
  if (name == "dft") return verify_dft();
  if (name == "nonlocal") return verify_nonlocal();
  if (name == "losses") return verify_losses();
  if (name == "gradients") return verify_gradients();
  if (name == "all") {
    std::vector<CheckResult> out;
    for (const char* suite : {"dft", "nonlocal", "losses", "gradients"}) {
      std::vector<CheckResult> part = verify_suite(suite);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  fail("verify: unknown suite '" + name + "' (expected dft, nonlocal, losses, gradients, all)");
}

}  // namespace slnl
