#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "slnl/ablate.hpp"
#include "slnl/checkpoint.hpp"
#include "slnl/config.hpp"
#include "slnl/report.hpp"
#include "slnl/synth_data.hpp"
#include "slnl/train.hpp"
#include "slnl/verify.hpp"

using namespace slnl;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

SyntheticSpec tiny_spec() {
  SyntheticSpec spec = SyntheticSpec::desk_default();
  spec.joints = 6;
  spec.t_raw = 40;
  spec.t_frames = 8;
  spec.train_per_class = 25;
  spec.test_per_class = 10;
  return spec;
}

ModelConfig tiny_model(const SyntheticSpec& spec) {
  ModelConfig cfg;
  cfg.m1 = 1;
  cfg.m2 = 1;
  cfg.channels = {4, 4};
  cfg.kernels = {3};
  cfg.pool_every = 2;
  cfg.k_systems = 1;
  cfg.joints_in = spec.joints;
  cfg.joints_out = spec.joints;
  cfg.t_frames = spec.t_frames;
  cfg.coord_dim = spec.d;
  cfg.num_classes = spec.classes.size();
  cfg.attention = FAVariant::rfa;
  cfg.dropout_rate = 0.1;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("generation: determinism, labels, constant class") {
  SyntheticSpec spec = tiny_spec();
  auto a = generate_train(spec);
  auto b = generate_train(spec);
  CHECK(a.size() == 4 * spec.train_per_class);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(bitwise_equal(a[i].positions, b[i].positions));
  }
  CHECK(class_count(a) == 4);

  // train and test splits differ
  auto t = generate_test(spec);
  CHECK(!bitwise_equal(a[0].positions, t[0].positions));

  // zero amplitude and noise leaves the constant base pose
  SyntheticSpec still = tiny_spec();
  still.classes = {ClassSpec{{2.0}, 0.0, 1.0, 0.0}};
  auto samples = generate_train(still);
  const Tensor& p = samples[0].positions;
  for (std::size_t c = 0; c < p.shape[0]; ++c)
    for (std::size_t t2 = 1; t2 < p.shape[1]; ++t2)
      for (std::size_t j = 0; j < p.shape[2]; ++j)
        CHECK(p.at3(c, t2, j) == doctest::Approx(p.at3(c, 0, j)).epsilon(1e-12));

  SyntheticSpec empty = tiny_spec();
  empty.classes.clear();
  CHECK_THROWS_AS(generate_train(empty), std::invalid_argument);
}

TEST_CASE("generation: amplitude spectrum peaks at the generating frequency") {
  SyntheticSpec spec = SyntheticSpec::desk_default();
  spec.train_per_class = 8;
  auto samples = generate_train(spec);
  for (std::size_t cls : {std::size_t{0}, std::size_t{1}}) {
    const double f_expect = spec.classes[cls].freqs[0];
    std::vector<double> amp(spec.t_raw, 0.0);
    std::size_t count = 0;
    for (const auto& s : samples) {
      if (s.label != cls) continue;
      ++count;
      // per-joint temporal spectra, averaged over joints and channels
      const Tensor& x = s.positions;
      Tensor lines({x.shape[0] * x.shape[2], spec.t_raw, 1});
      for (std::size_t c = 0; c < x.shape[0]; ++c)
        for (std::size_t j = 0; j < x.shape[2]; ++j)
          for (std::size_t t = 0; t < spec.t_raw; ++t)
            lines.at3(c * x.shape[2] + j, t, 0) = x.at3(c, t, j);
      SpectraOut sp = spectra(dft2(lines));
      for (std::size_t ch = 0; ch < lines.shape[0]; ++ch)
        for (std::size_t u = 0; u < spec.t_raw; ++u)
          amp[u] += sp.amplitude.at3(ch, u, 0);
    }
    CHECK(count > 0);
    std::size_t peak = 1;
    for (std::size_t u = 1; u <= spec.t_raw / 2; ++u)
      if (amp[u] > amp[peak]) peak = u;
    CHECK(static_cast<double>(peak) == doctest::Approx(f_expect));
  }
}

TEST_CASE("frequency-pair classes separable from mean amplitude spectra") {
  SyntheticSpec spec = SyntheticSpec::desk_default();
  spec.train_per_class = 40;
  spec.test_per_class = 25;
  auto train = generate_train(spec);
  auto test = generate_test(spec);

  auto feature = [&](const SkeletonSequence& s) {
    Tensor x = preprocess(s, Mode::eval, spec.t_frames);
    SpectraOut sp = spectra(dft2(x));
    // channel-averaged amplitude spectrum
    std::vector<double> f(spec.t_frames * spec.joints, 0.0);
    for (std::size_t c = 0; c < x.shape[0]; ++c)
      for (std::size_t i = 0; i < f.size(); ++i)
        f[i] += sp.amplitude.data[c * f.size() + i] / static_cast<double>(x.shape[0]);
    return f;
  };

  // nearest-centroid classifier restricted to the frequency pair {0, 1}
  std::vector<double> cent0, cent1;
  std::size_t n0 = 0, n1 = 0;
  for (const auto& s : train) {
    if (s.label > 1) continue;
    auto f = feature(s);
    auto& cent = s.label == 0 ? cent0 : cent1;
    auto& n = s.label == 0 ? n0 : n1;
    if (cent.empty()) cent.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) cent[i] += f[i];
    ++n;
  }
  for (auto& v : cent0) v /= static_cast<double>(n0);
  for (auto& v : cent1) v /= static_cast<double>(n1);

  std::size_t correct = 0, total = 0;
  for (const auto& s : test) {
    if (s.label > 1) continue;
    auto f = feature(s);
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      d0 += (f[i] - cent0[i]) * (f[i] - cent0[i]);
      d1 += (f[i] - cent1[i]) * (f[i] - cent1[i]);
    }
    const std::size_t pred = d0 <= d1 ? 0 : 1;
    if (pred == s.label) ++correct;
    ++total;
  }
  CHECK(total == 50);
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("preprocess: crop and resize behavior") {
  // identity window
  Rng rng(3);
  Tensor x = random_uniform({2, 10, 4}, rng, -1.0, 1.0);
  CHECK(bitwise_equal(crop_resize(x, 0, 10, 10), x));

  // linear ramp stays a linear ramp through 64 -> 16
  Tensor ramp({1, 64, 2});
  for (std::size_t t = 0; t < 64; ++t)
    for (std::size_t j = 0; j < 2; ++j) ramp.at3(0, t, j) = 0.25 * double(t) - 3.0;
  Tensor rs = crop_resize(ramp, 0, 64, 16);
  const double step = 0.25 * 63.0 / 15.0;
  for (std::size_t t = 0; t < 16; ++t)
    CHECK(rs.at3(0, t, 0) == doctest::Approx(-3.0 + step * double(t)).epsilon(1e-9));

  // eval mode takes the central 95%
  SkeletonSequence s;
  s.positions = random_uniform({1, 100, 3}, rng, -1.0, 1.0);
  Tensor ev = preprocess(s, Mode::eval, 16);
  CHECK(bitwise_equal(ev, crop_resize(s.positions, 2, 95, 16)));

  // train crops stay in bounds and are seed-deterministic
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Tensor a = preprocess(s, Mode::train, 16, seed);
    CHECK(a.shape == std::vector<std::size_t>{1, 16, 3});
    CHECK(a.all_finite());
    CHECK(bitwise_equal(a, preprocess(s, Mode::train, 16, seed)));
  }
  CHECK_THROWS_AS(crop_resize(x, 5, 6, 4), std::invalid_argument);
}

TEST_CASE("dataset file round trip, size arithmetic and corruption") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 3;
  auto samples = generate_train(spec);
  const std::string path = temp_path("slnl_test_dataset.skds");
  save_dataset(path, samples);

  auto loaded = load_dataset(path);
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].label == samples[i].label);
    CHECK(bitwise_equal(loaded[i].positions, samples[i].positions));
  }

  // header + per-sample records, nothing else
  const std::size_t expect = 12 + samples.size() * (16 + 2 * 40 * 6 * 8);
  CHECK(std::filesystem::file_size(path) == expect);

  // truncation must error out, not return partial data
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 13));
  out.close();
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("truncated"), std::runtime_error);

  std::ofstream out2(path, std::ios::binary);
  out2 << "XXXX";
  out2.close();
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("magic"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("config parsing and typed access") {
  ConfigMap cfg = parse_config("a.b = 1\n# comment\nlist = 3,4,5\nname= hello # tail\n");
  CHECK(cfg.at("a.b") == "1");
  CHECK(cfg.at("name") == "hello");
  CHECK_THROWS_AS(parse_config("a = 1\na = 2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("novalue\n"), std::invalid_argument);

  ConfigReader r(cfg);
  CHECK(r.get_size("a.b", 9) == 1);
  CHECK(r.get_size_list("list", {}) == std::vector<std::size_t>{3, 4, 5});
  CHECK(r.get_string("name", "") == "hello");
  CHECK(r.get_double("missing", 2.5) == 2.5);

  ConfigReader bad(parse_config("model.m1 = x\n"));
  CHECK_THROWS_WITH_AS(bad.get_size("model.m1", 0), doctest::Contains("model.m1"),
                       std::invalid_argument);

  ConfigReader unknown(parse_config("model.m1 = 1\nmodel.m2 = 1\nmodel.chanels = 4,4\n"));
  CHECK_THROWS_WITH_AS(ModelConfig::from_config(unknown), doctest::Contains("model.chanels"),
                       std::invalid_argument);

  // round trip through serialize/parse
  CHECK(parse_config(serialize_config(cfg)) == cfg);
}

TEST_CASE("model config snapshots round-trip") {
  ModelConfig cfg = ModelConfig::desk_default();
  cfg.m1 = 1;
  cfg.m2 = 3;
  cfg.attention = FAVariant::dfa;
  cfg.loss = LossConfig::smce(0.6);
  ConfigReader r(cfg.to_config());
  ModelConfig back = ModelConfig::from_config(r);
  CHECK(back.to_config() == cfg.to_config());

  ModelConfig bad = cfg;
  bad.m1 = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("report round trip") {
  RunReport r;
  r.command = "train";
  r.seed = 99;
  r.wall_seconds = 12.25;
  r.config["model.m1"] = "2";
  r.config["train.epochs"] = "5";
  r.final_values["test.accuracy"] = "0.9375";
  r.metrics.push_back(EpochMetrics{1, 1e-3, 2.5, 0.25, 2.25, 0.3});
  r.metrics.push_back(EpochMetrics{2, 9.8e-4, 1.5, 0.5, 1.75, 0.55});
  r.checks.push_back(CheckResult{"dft.round_trip", 1e-10, 3.2e-13, true});
  r.checks.push_back(CheckResult{"bogus", 0.0, 1.0, false});
  r.table.push_back(AblationRow{"CE", 0.875, 0.25});
  r.table.push_back(AblationRow{"SMFL(2,0.4)", 0.9, 0.625});
  r.table_extra_name = "margin_fraction";

  RunReport back = parse_report(write_report(r));
  CHECK(back.command == r.command);
  CHECK(back.seed == r.seed);
  CHECK(back.wall_seconds == r.wall_seconds);
  CHECK(back.config == r.config);
  CHECK(back.final_values == r.final_values);
  REQUIRE(back.metrics.size() == 2);
  CHECK(back.metrics[1].train_loss == 1.5);
  CHECK(back.metrics[1].lr == 9.8e-4);
  REQUIRE(back.checks.size() == 2);
  CHECK(back.checks[0].pass);
  CHECK(!back.checks[1].pass);
  CHECK(!back.all_checks_pass());
  REQUIRE(back.table.size() == 2);
  CHECK(back.table[1].label == "SMFL(2,0.4)");
  CHECK(back.table[1].extra == 0.625);
  CHECK(back.table_extra_name == "margin_fraction");
}

TEST_CASE("model forward: probability heads and determinism") {
  SyntheticSpec spec = tiny_spec();
  ModelConfig cfg = tiny_model(spec);
  Model model(cfg);
  auto samples = generate_train(spec);
  Tensor input = preprocess(samples[0], Mode::eval, cfg.t_frames);

  Model::Output out = model.forward(input, Mode::eval);
  for (const Tensor* p : {&out.p_pos, &out.p_vel, &out.p_cat}) {
    CHECK(p->shape == std::vector<std::size_t>{4});
    double sum = 0.0;
    for (double v : p->data) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }

  Model::Output out2 = model.forward(input, Mode::eval);
  CHECK(bitwise_equal(out.p_cat, out2.p_cat));  // eval is pure

  // same seeds, fresh model: bit-identical init and outputs
  Model model2(cfg);
  Model::Output out3 = model2.forward(input, Mode::eval);
  CHECK(bitwise_equal(out.p_cat, out3.p_cat));

  CHECK_THROWS_AS(model.forward(Tensor({1, 8, 6}, 0.1), Mode::eval), std::invalid_argument);
}

TEST_CASE("model forward equals a pure-local reference when reduced") {
  // disabled attention and zeroed non-local gates turn each stream into
  // input BN -> transform -> local blocks -> GAP -> classifier
  SyntheticSpec spec = tiny_spec();
  ModelConfig cfg = tiny_model(spec);
  cfg.attention = FAVariant::none;
  cfg.dropout_rate = 0.0;
  Model model(cfg);
  ParamStore& ps = model.params();
  for (const std::string& stream : {std::string("pos"), std::string("vel")})
    for (const std::string& nlname : {std::string("t"), std::string("s"), std::string("st")})
      ps.value(ps.find(stream + ".block0.nl." + nlname + ".ww")).fill(0.0);

  auto samples = generate_train(spec);
  Tensor input = preprocess(samples[3], Mode::eval, cfg.t_frames);
  Model::Output got = model.forward(input, Mode::eval);

  auto ref_stream = [&](const std::string& prefix, const Tensor& raw) {
    auto val = [&](const std::string& name) { return ps.value(ps.find(prefix + name)); };
    BatchNormParams ibn;
    ibn.gamma = val(".input_bn.gamma");
    ibn.beta = val(".input_bn.beta");
    ibn.run_mean = val(".input_bn.run_mean");
    ibn.run_var = val(".input_bn.run_var");
    Tensor x = batchnorm(raw, ibn, Mode::eval);
    TransformParams tp;
    tp.joint_w = val(".joint.w");
    tp.joint_b = val(".joint.b");
    tp.coord_maps = {val(".coord.0")};
    x = transform_forward(x, tp);
    for (int b = 0; b < 2; ++b) {
      const std::string bp = ".block" + std::to_string(b);
      LocalBlockParams lp;
      lp.tconv = {val(bp + ".tconv.k"), val(bp + ".tconv.b")};
      lp.sconv = {val(bp + ".sconv.k"), val(bp + ".sconv.b")};
      lp.stconv = {val(bp + ".stconv.k"), val(bp + ".stconv.b")};
      if (ps.find(prefix + bp + ".proj.k") >= 0)
        lp.proj = ConvPair{val(bp + ".proj.k"), val(bp + ".proj.b")};
      lp.bn.gamma = val(bp + ".bn.gamma");
      lp.bn.beta = val(bp + ".bn.beta");
      lp.bn.run_mean = val(bp + ".bn.run_mean");
      lp.bn.run_var = val(bp + ".bn.run_var");
      x = local_block(x, lp, Mode::eval);
      if ((b + 1) % 2 == 0) x = maxpool2(x);
    }
    return global_avg_pool(x);
  };

  Tensor fpos = ref_stream("pos", input);
  Tensor fvel = ref_stream("vel", velocity_of(input));
  Tensor cat({fpos.numel() + fvel.numel()});
  std::copy(fpos.data.begin(), fpos.data.end(), cat.data.begin());
  std::copy(fvel.data.begin(), fvel.data.end(), cat.data.begin() + fpos.numel());
  Tensor z = dense(cat, ps.value(ps.find("cat.cls.w")), ps.value(ps.find("cat.cls.b")));
  Tensor expect = softmax_lastaxis(z);
  CHECK(max_abs_diff(got.p_cat, expect) < 1e-12);
}

TEST_CASE("training: separable two-class set reaches 99% within 20 epochs") {
  SyntheticSpec spec = tiny_spec();
  spec.classes = {ClassSpec{{2.0}, 0.2, 1.0, 0.05}, ClassSpec{{2.0}, 1.2, 1.0, 0.05}};
  spec.train_per_class = 50;
  spec.test_per_class = 20;
  auto train_set = generate_train(spec);

  ModelConfig mcfg = tiny_model(spec);
  mcfg.num_classes = 2;
  Model model(mcfg);

  TrainConfig tcfg;
  tcfg.epochs = 20;
  tcfg.batch_size = 10;
  tcfg.lr0 = 0.01;
  tcfg.seed = 3;
  TrainResult res = train(model, train_set, nullptr, tcfg, nullptr,
                          [](const EpochMetrics& m) { return m.train_acc >= 0.99; });
  CHECK(res.history.back().train_acc >= 0.99);
  CHECK(res.history.size() <= 20);
}

TEST_CASE("training: single-sample overfit drives the loss to ~zero") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 1;
  auto all = generate_train(spec);
  std::vector<SkeletonSequence> one{all[2]};

  ModelConfig mcfg = tiny_model(spec);
  mcfg.dropout_rate = 0.0;
  Model model(mcfg);
  TrainConfig tcfg;
  tcfg.epochs = 200;
  tcfg.batch_size = 1;
  tcfg.lr0 = 0.02;
  tcfg.lr_decay = 1.0;
  TrainResult res = train(model, one, nullptr, tcfg,
                          nullptr, [](const EpochMetrics& m) { return m.train_loss < 0.005; });
  CHECK(res.history.back().train_loss < 0.01);
  // monotone descent of the 10-epoch means; random train-mode crops add
  // per-epoch jitter around the trend
  std::vector<double> block_means;
  for (std::size_t i = 0; i + 10 <= res.history.size(); i += 10) {
    double m = 0.0;
    for (std::size_t k = i; k < i + 10; ++k) m += res.history[k].train_loss;
    block_means.push_back(m / 10.0);
  }
  REQUIRE(block_means.size() >= 3);
  for (std::size_t i = 1; i < block_means.size(); ++i)
    CHECK(block_means[i] < block_means[i - 1]);
}

TEST_CASE("training: seed determinism of the full loop") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 10;
  auto data = generate_train(spec);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 8;

  ModelConfig mcfg = tiny_model(spec);
  Model a(mcfg), b(mcfg);
  TrainResult ra = train(a, data, nullptr, tcfg);
  TrainResult rb = train(b, data, nullptr, tcfg);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].train_acc == rb.history[i].train_acc);
  }

  // labels outside the configured class count are rejected
  std::vector<SkeletonSequence> bad = {data[0]};
  bad[0].label = 11;
  CHECK_THROWS_AS(train(a, bad, nullptr, tcfg), std::invalid_argument);
}

TEST_CASE("predict, evaluate and margin statistics") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 6;
  auto data = generate_train(spec);
  Model model(tiny_model(spec));

  const std::size_t pred = predict(model, data[0]);
  CHECK(pred < 4);
  EvalResult ev = evaluate(model, data);
  CHECK(ev.accuracy >= 0.0);
  CHECK(ev.accuracy <= 1.0);
  CHECK(ev.confusion.size() == 16);
  std::size_t total = 0;
  for (std::size_t v : ev.confusion) total += v;
  CHECK(total == data.size());

  // untrained margin fraction is a diagnostic in [0,1]
  const double frac = margin_fraction(model, data, 0.4);
  CHECK(frac >= 0.0);
  CHECK(frac <= 1.0);
  // m = 0 counts exactly the correct predictions of the c-classifier
  CHECK(margin_fraction(model, data, 0.0) == doctest::Approx(ev.accuracy));
}

TEST_CASE("velocity stream is the front-padded temporal difference") {
  Rng rng(12);
  Tensor x = random_uniform({2, 5, 3}, rng, -1.0, 1.0);
  Tensor v = velocity_of(x);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(v.at3(c, 0, j) == 0.0);
      for (std::size_t t = 1; t < 5; ++t)
        CHECK(v.at3(c, t, j) == x.at3(c, t, j) - x.at3(c, t - 1, j));
    }
}

TEST_CASE("ablation plans: labels and every cell runnable") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 8;
  spec.test_per_class = 4;
  auto train_set = generate_train(spec);
  auto test_set = generate_test(spec);

  ModelConfig base = tiny_model(spec);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 8;

  SUBCASE("loss plan mirrors the (gamma, m) label convention") {
    RunReport r = run_ablation(AblationPlan::loss, train_set, test_set, base, tcfg);
    REQUIRE(r.table.size() == 4);
    CHECK(r.table[0].label == "CE");
    CHECK(r.table[1].label == "FL(2,)");
    CHECK(r.table[2].label == "SMCE(,0.4)");
    CHECK(r.table[3].label == "SMFL(2,0.4)");
    CHECK(r.table_extra_name == "margin_fraction_at_0.4");
    // the serialized table re-parses losslessly
    RunReport back = parse_report(write_report(r));
    REQUIRE(back.table.size() == 4);
    CHECK(back.table[3].label == r.table[3].label);
    CHECK(back.table[3].accuracy == r.table[3].accuracy);
  }

  SUBCASE("fa plan lists the five attention variants") {
    RunReport r = run_ablation(AblationPlan::fa, train_set, test_set, base, tcfg);
    REQUIRE(r.table.size() == 5);
    CHECK(r.table[0].label == "No FA");
    CHECK(r.table[1].label == "Amplitude FA");
    CHECK(r.table[2].label == "Shared FA");
    CHECK(r.table[3].label == "Dependent FA");
    CHECK(r.table[4].label == "Residual FA (rFA)");
  }

  SUBCASE("slnl plan sweeps every (m1, m2) split") {
    ModelConfig four = base;
    four.m1 = 0;
    four.m2 = 4;
    four.channels = {3, 3, 3, 3};
    RunReport r = run_ablation(AblationPlan::slnl, train_set, test_set, four, tcfg);
    REQUIRE(r.table.size() == 5);
    CHECK(r.table[0].label == "Local (M1=0, M2=4)");
    CHECK(r.table[1].label == "SLnL (M1=1, M2=3)");
    CHECK(r.table[4].label == "SLnL (M1=4, M2=0)");
    for (const AblationRow& row : r.table) {
      CHECK(row.accuracy >= 0.0);
      CHECK(row.accuracy <= 1.0);
    }
  }
}

TEST_CASE("component-space round trip: dft2(idft2(f)) for real-signal components") {
  Rng rng(13);
  Tensor x = random_uniform({2, 6, 5}, rng, -1.0, 1.0);
  FreqComponents f = dft2(x);
  FreqComponents back = dft2(idft2(f));
  CHECK(max_abs_diff(back.f_cos, f.f_cos) < 1e-9);
  CHECK(max_abs_diff(back.f_sin, f.f_sin) < 1e-9);
}

TEST_CASE("argmax tie-break prefers the lowest class index") {
  // direct check of the documented rule on a synthetic head output
  Tensor p({3}, std::vector<double>{0.5, 0.5, 0.0});
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.numel(); ++i)
    if (p[i] > p[best]) best = i;
  CHECK(best == 0);
}

TEST_CASE("checkpoint round trip preserves behavior bit-for-bit") {
  SyntheticSpec spec = tiny_spec();
  spec.train_per_class = 5;
  auto data = generate_train(spec);
  Model model(tiny_model(spec));
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 5;
  train(model, data, nullptr, tcfg);

  const std::string path = temp_path("slnl_test_ckpt.bin");
  save_checkpoint(path, model);
  Model back = load_checkpoint(path);
  CHECK(back.config().to_config() == model.config().to_config());

  Tensor input = preprocess(data[7], Mode::eval, model.config().t_frames);
  Model::Output a = model.forward(input, Mode::eval);
  Model::Output b = back.forward(input, Mode::eval);
  CHECK(bitwise_equal(a.p_cat, b.p_cat));
  CHECK(bitwise_equal(a.z_cat, b.z_cat));

  // corrupt magic
  std::ofstream out(path, std::ios::binary);
  out << "WXYZ";
  out.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("verify suites all pass on a healthy build") {
  for (const char* suite : {"dft", "nonlocal", "losses"}) {
    for (const CheckResult& c : verify_suite(suite)) {
      INFO(c.name, " observed ", c.observed, " tol ", c.tolerance);
      CHECK(c.pass);
    }
  }
}

TEST_CASE("gradient-check harness flags a broken adjoint (negative control)") {
  // a deliberately wrong backward map must be caught by the checker
  Rng rng(8);
  Tensor x = random_uniform({5}, rng, 0.5, 1.5);
  Tensor analytic({5});
  {
    Tape t;
    Value xv = t.leaf(x, true);
    Value y = sum_all(t, log_ew(t, xv));
    t.backward(y);
    analytic = t.grad(xv);
  }
  for (double& g : analytic.data) g *= 1.5;  // inject the bug
  auto eval = [&]() {
    Tape t;
    return t.value(sum_all(t, log_ew(t, t.leaf(x))))[0];
  };
  std::vector<Tensor*> w{&x};
  std::vector<const Tensor*> a{&analytic};
  GradCheckResult r = finite_difference_check(eval, w, a);
  CHECK(!r.pass);
  CHECK(r.detail.find("coord") != std::string::npos);
}
