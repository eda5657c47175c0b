#include "slnl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace slnl {

void TrainConfig::validate() const {
  check(lr0 > 0.0, "train: lr0 must be positive");
  check(lr_decay > 0.0 && lr_decay <= 1.0, "train: lr_decay must be in (0,1]");
  check(weight_decay >= 0.0, "train: weight_decay must be >= 0");
  check(epochs >= 1, "train: epochs must be >= 1");
  check(batch_size >= 1, "train: batch_size must be >= 1");
}

ConfigMap TrainConfig::to_config() const {
  ConfigMap m;
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  m["train.lr0"] = num(lr0);
  m["train.lr_decay"] = num(lr_decay);
  m["train.weight_decay"] = num(weight_decay);
  m["train.beta1"] = num(beta1);
  m["train.beta2"] = num(beta2);
  m["train.eps"] = num(eps);
  m["train.epochs"] = std::to_string(epochs);
  m["train.batch_size"] = std::to_string(batch_size);
  m["train.seed"] = std::to_string(seed);
  return m;
}

TrainConfig TrainConfig::from_config(ConfigReader& r) {
  TrainConfig c;
  c.lr0 = r.get_double("train.lr0", c.lr0);
  c.lr_decay = r.get_double("train.lr_decay", c.lr_decay);
  c.weight_decay = r.get_double("train.weight_decay", c.weight_decay);
  c.beta1 = r.get_double("train.beta1", c.beta1);
  c.beta2 = r.get_double("train.beta2", c.beta2);
  c.eps = r.get_double("train.eps", c.eps);
  c.epochs = r.get_size("train.epochs", c.epochs);
  c.batch_size = r.get_size("train.batch_size", c.batch_size);
  c.seed = r.get_u64("train.seed", c.seed);
  r.reject_unconsumed("train.");
  c.validate();
  return c;
}

AdamW::AdamW(const ParamStore& store, const TrainConfig& cfg) : cfg_(cfg) {
  m_.resize(store.size());
  v_.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(static_cast<int>(i));
    if (!e.learnable) continue;
    m_[i] = Tensor::zeros(e.value.shape);
    v_[i] = Tensor::zeros(e.value.shape);
  }
}

void AdamW::step(ParamStore& store, double lr, double grad_scale) {
  t_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(static_cast<int>(i));
    if (!e.learnable) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < e.value.numel(); ++j) {
      const double g = e.grad[j] * grad_scale;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      // decoupled weight decay: applied to the parameter, not the gradient
      e.value[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * e.value[j]);
    }
  }
}

namespace {

std::size_t argmax_lowest(const Tensor& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.numel(); ++i)
    if (p[i] > p[best]) best = i;  // strict >: lowest index wins ties
  return best;
}

double sample_loss(Model& model, const Model::Output& out, std::size_t label) {
  const LossConfig& cfg = model.config().loss;
  return smfl(out.p_pos[label], cfg.gamma, cfg.margin, cfg.epsilon) +
         smfl(out.p_vel[label], cfg.gamma, cfg.margin, cfg.epsilon) +
         smfl(out.p_cat[label], cfg.gamma, cfg.margin, cfg.epsilon);
}

}  // namespace

TrainResult train(Model& model, const std::vector<SkeletonSequence>& train_set,
                  const std::vector<SkeletonSequence>* val_set, const TrainConfig& cfg,
                  std::ostream* log, const StopCondition& stop) {
  cfg.validate();
  check(!train_set.empty(), "train: empty dataset");
  const std::size_t classes = model.config().num_classes;
  for (const SkeletonSequence& s : train_set)
    check(s.label < classes, "train: label " + std::to_string(s.label) +
                                 " exceeds configured class count");

  const auto t0 = std::chrono::steady_clock::now();
  AdamW opt(model.params(), cfg);
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = cfg.lr0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0xe70c * epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t processed = 0;
    while (processed < order.size()) {
      const std::size_t batch = std::min(cfg.batch_size, order.size() - processed);
      model.params().zero_grads();
      for (std::size_t k = 0; k < batch; ++k) {
        const std::size_t idx = order[processed + k];
        const SkeletonSequence& s = train_set[idx];
        const std::uint64_t sample_seed = mix_seed(mix_seed(cfg.seed, epoch), idx);
        Tensor input = preprocess(s, Mode::train, model.config().t_frames, sample_seed);

        Tape tape;
        BoundParams bound;
        Model::Heads heads =
            model.build_heads(tape, bound, input, Mode::train, mix_seed(sample_seed, 0xd0));
        Value loss = model.build_loss(tape, heads, s.label);
        const double lval = tape.value(loss)[0];
        if (!std::isfinite(lval))
          throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch));
        loss_sum += lval;
        if (argmax_lowest(tape.value(heads.p_cat)) == s.label) ++correct;
        tape.backward(loss);
        bound.accumulate_grads(tape, model.params());
      }
      opt.step(model.params(), lr, 1.0 / static_cast<double>(batch));
      processed += batch;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.train_loss = loss_sum / static_cast<double>(order.size());
    em.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    em.val_loss = std::nan("");
    em.val_acc = std::nan("");
    if (val_set) {
      EvalResult ev = evaluate(model, *val_set);
      em.val_loss = ev.mean_loss;
      em.val_acc = ev.accuracy;
    }
    result.history.push_back(em);
    if (log)
      (*log) << "epoch " << epoch << " lr " << lr << " train_loss " << em.train_loss
             << " train_acc " << em.train_acc << " val_acc " << em.val_acc << "\n";
    lr *= cfg.lr_decay;
    if (stop && stop(em)) {
      result.stopped_early = true;
      break;
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::size_t predict(Model& model, const SkeletonSequence& sample) {
  Tensor input = preprocess(sample, Mode::eval, model.config().t_frames);
  Model::Output out = model.forward(input, Mode::eval);
  return argmax_lowest(out.p_cat);
}

EvalResult evaluate(Model& model, const std::vector<SkeletonSequence>& samples) {
  check(!samples.empty(), "evaluate: empty dataset");
  const std::size_t classes = model.config().num_classes;
  EvalResult r;
  r.classes = classes;
  r.confusion.assign(classes * classes, 0);
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (const SkeletonSequence& s : samples) {
    check(s.label < classes, "evaluate: label out of range");
    Tensor input = preprocess(s, Mode::eval, model.config().t_frames);
    Model::Output out = model.forward(input, Mode::eval);
    const std::size_t pred = argmax_lowest(out.p_cat);
    r.confusion[s.label * classes + pred] += 1;
    if (pred == s.label) ++correct;
    loss_sum += sample_loss(model, out, s.label);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  r.mean_loss = loss_sum / static_cast<double>(samples.size());
  return r;
}

double margin_fraction(Model& model, const std::vector<SkeletonSequence>& samples, double m) {
  check(!samples.empty(), "margin_fraction: empty dataset");
  std::size_t cleared = 0;
  for (const SkeletonSequence& s : samples) {
    Tensor input = preprocess(s, Mode::eval, model.config().t_frames);
    Model::Output out = model.forward(input, Mode::eval);
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < out.z_cat.numel(); ++c)
      if (c != s.label) best_other = std::max(best_other, out.z_cat[c]);
    if (out.z_cat[s.label] - best_other >= m) ++cleared;
  }
  return static_cast<double>(cleared) / static_cast<double>(samples.size());
}

}  // namespace slnl
