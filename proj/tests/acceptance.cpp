// Acceptance suite: one PASS or FAIL line per criterion. Every criterion runs
// even when an earlier one fails; the exit status is nonzero if any failed.

#include "pgar/eval.hpp"
#include "pgar/gr.hpp"
#include "pgar/model_io.hpp"
#include "pgar/msr.hpp"
#include "pgar/training.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace pgar;
using pgar::test::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  // Records one sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
  void note(const std::string& what) { lines.push_back("      " + what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome parameter_budget() {
  Outcome o;
  const auto full = count_parameters(make_model<float>(ModelConfig{}));
  ModelConfig rgb_cfg;
  rgb_cfg.rgb_only = true;
  const auto rgb = count_parameters(make_model<float>(rgb_cfg));
  const double full_target = 17.01e6, rgb_target = 16.38e6;
  const double full_dev = (double(full.total) - full_target) / full_target;
  const double rgb_dev = (double(rgb.total) - rgb_target) / rgb_target;
  const Index delta = full.total - rgb.total;

  o.check(std::abs(full_dev) <= 0.03, "full model " + std::to_string(full.total) + " scalars vs 17.01M target, " +
                                          fmt("%+.2f%%", 100 * full_dev) + " (tolerance 3%)");
  o.check(std::abs(rgb_dev) <= 0.03, "RGB-only model " + std::to_string(rgb.total) + " scalars vs 16.38M target, " +
                                         fmt("%+.2f%%", 100 * rgb_dev) + " (tolerance 3%)");
  o.check(delta == 575113, "depth increment " + std::to_string(delta) + " (expected 575113)");
  o.note("fp32 size: full " + fmt("%.2f", full.megabytes()) + " MiB / " + fmt("%.2f", full.megabytes_decimal()) +
         " MB, RGB-only " + fmt("%.2f", rgb.megabytes()) + " MiB / " + fmt("%.2f", rgb.megabytes_decimal()) + " MB");
  o.note("depth stream " + std::to_string(full.group("depth")) + " scalars");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome split_concat_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::vector<std::tuple<int, int, int>> pairs;  // style, C, c
  for (int style = 1; style <= 8; ++style) {
    const auto sched = build_schedule(style);
    for (int stage = 1; stage <= 8; ++stage) {
      const int C = stage == 1 ? 16 : stage == 2 ? 32 : 64;
      for (int c : sched.stage(stage)) pairs.emplace_back(style, C, c);
    }
  }
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::uniform_int_distribution<int> extent(1, 7);
  int configs = 0, mismatches = 0;
  std::array<int, 9> per_style{};
  for (int trial = 0; trial < 256; ++trial) {
    const auto [style, C, c] = std::size_t(trial) < pairs.size() ? pairs[std::size_t(trial)] : pairs[pick(rng)];
    const Index n = extent(rng) % 2 + 1, h = extent(rng), w = extent(rng);
    const auto f = random_tensor<double>({n, C, h, w}, rng);
    const auto s = random_tensor<double>({n, 1, h, w}, rng);
    const auto got = split_and_concatenate(f, s, c);
    const auto want = test::naive_split_concat(f, s, c);
    if (got.shape() != want.shape() || !(got.array() == want.array()).all()) ++mismatches;
    ++configs;
    ++per_style[std::size_t(style)];
  }
  bool all_styles = true;
  for (int st = 1; st <= 8; ++st) all_styles = all_styles && per_style[std::size_t(st)] > 0;
  o.check(configs >= 200, std::to_string(configs) + " random configurations");
  o.check(all_styles, "every style 1-8 represented");
  o.check(mismatches == 0, std::to_string(mismatches) + " mismatches against the interleaving loop (exact)");
  return o;
}

// ---------------------------------------------------------------- 3

Outcome gradients() {
  Outcome o;
  std::mt19937_64 rng(3);
  const double tol = 1e-4;

  double gr_worst = 0;
  for (int c : {4, 2, 1}) {
    auto p = GrBlockParams<double>::make(4, c);
    test::randomize(p.theta1, rng, 0.3);
    test::randomize(p.theta2, rng, 0.3);
    auto f = random_tensor<double>({1, 4, 5, 4}, rng);
    auto s = random_tensor<double>({1, 1, 5, 4}, rng);
    const auto rf = random_tensor<double>({1, 4, 5, 4}, rng);
    const auto rs = random_tensor<double>({1, 1, 5, 4}, rng);
    GrTrace<double> trace;
    gr_block_forward(f, s, p, c, &trace);
    GrBlockParams<double> g{p.theta1.zeros_like(), p.theta2.zeros_like()};
    const auto back = gr_block_backward(p, trace, c, rf, rs, &g);
    auto loss = [&] {
      const auto out = gr_block_forward(f, s, p, c);
      return test::dot(out.feature, rf) + test::dot(out.prediction, rs);
    };
    for (double e : {test::gradient_error(f.data(), f.size(), back.df.data(), loss),
                     test::gradient_error(s.data(), s.size(), back.ds.data(), loss),
                     test::gradient_error(p.theta1.weight.data(), p.theta1.weight.size(), g.theta1.weight.data(), loss),
                     test::gradient_error(p.theta1.bias.data(), p.theta1.bias.size(), g.theta1.bias.data(), loss),
                     test::gradient_error(p.theta2.weight.data(), p.theta2.weight.size(), g.theta2.weight.data(), loss),
                     test::gradient_error(p.theta2.bias.data(), p.theta2.bias.size(), g.theta2.bias.data(), loss)}) {
      gr_worst = std::max(gr_worst, e);
    }
  }
  o.check(gr_worst <= tol, "GR block, c in {4, 2, 1}: worst relative error " + fmt("%.2e", gr_worst));

  double msr_worst = 0;
  for (int d : {1, 2, 3}) {
    auto p = MsrBranchParams<double>::make(5, 3, d);
    test::randomize(p.reduce, rng, 0.5);
    test::randomize(p.dilated, rng, 0.5);
    test::randomize(p.expand, rng, 0.5);
    auto x = random_tensor<double>({1, 5, 6, 6}, rng);
    const auto r = random_tensor<double>({1, 5, 6, 6}, rng);
    MsrStepTrace<double> trace;
    msr_branch_step(x, p, &trace);
    MsrBranchParams<double> g{p.reduce.zeros_like(), p.dilated.zeros_like(), p.expand.zeros_like()};
    const auto dx = msr_branch_step_backward(p, trace, r, &g);
    auto loss = [&] { return test::dot(msr_branch_step(x, p), r); };
    for (double e : {test::gradient_error(x.data(), x.size(), dx.data(), loss),
                     test::gradient_error(p.reduce.weight.data(), p.reduce.weight.size(), g.reduce.weight.data(), loss),
                     test::gradient_error(p.reduce.bias.data(), p.reduce.bias.size(), g.reduce.bias.data(), loss),
                     test::gradient_error(p.dilated.weight.data(), p.dilated.weight.size(), g.dilated.weight.data(),
                                          loss),
                     test::gradient_error(p.dilated.bias.data(), p.dilated.bias.size(), g.dilated.bias.data(), loss),
                     test::gradient_error(p.expand.weight.data(), p.expand.weight.size(), g.expand.weight.data(), loss),
                     test::gradient_error(p.expand.bias.data(), p.expand.bias.size(), g.expand.bias.data(), loss)}) {
      msr_worst = std::max(msr_worst, e);
    }
  }
  o.check(msr_worst <= tol, "MSR branch step, dilation 1-3: worst relative error " + fmt("%.2e", msr_worst));

  PredictionSet<double> preds;
  preds.s_init = {random_tensor<double>({1, 1, 1, 1}, rng, -3, 3), Scale{32}};
  for (int den : {1, 2, 4, 4, 8, 8, 16, 16}) {
    preds.stages.push_back({random_tensor<double>({1, 1, 32 / den, 32 / den}, rng, -3, 3), Scale{den}});
  }
  Tensor<double> gt(1, 1, 32, 32);
  std::bernoulli_distribution coin(0.5);
  for (Index i = 0; i < gt.size(); ++i) gt.data()[i] = coin(rng) ? 1 : 0;
  PredictionGrad<double> g;
  deep_supervision_loss(preds, gt, {}, &g);
  auto loss = [&] { return deep_supervision_loss(preds, gt).total; };
  double ds_worst = test::gradient_error(preds.s_init.data.data(), preds.s_init.data.size(), g.s_init.data(), loss);
  for (std::size_t i = 0; i < preds.stages.size(); ++i) {
    auto& t = preds.stages[i].data;
    ds_worst = std::max(ds_worst, test::gradient_error(t.data(), t.size(), g.stages[i].data(), loss));
  }
  o.check(ds_worst <= tol, "deep-supervision loss, all 9 outputs: worst relative error " + fmt("%.2e", ds_worst));
  return o;
}

// ---------------------------------------------------------------- 4

Outcome residual_identity() {
  Outcome o;
  auto m = init_model<double>(ModelConfig{}, 4);
  int zeroed = 0;
  for (auto& s : m.stages) {
    for (auto& b : s.blocks) {
      b.theta2 = b.theta2.zeros_like();
      ++zeroed;
    }
  }
  o.check(zeroed == 24, std::to_string(zeroed) + " GR blocks with theta2 set to zero");
  std::mt19937_64 rng(44);
  const auto rgb = random_tensor<double>({1, 3, 352, 352}, rng);
  const auto depth = random_tensor<double>({1, 1, 352, 352}, rng, 0, 1);
  const auto preds = forward(m, rgb, depth);

  Tensor<double> logits = preds.s_init.data;
  Tensor<double> probs = sigmoid(preds.s_init.data);
  for (Index size : {22, 44, 88, 176, 352}) {
    logits = resize_bilinear(logits, size, size);
    probs = resize_bilinear(probs, size, size);
  }
  const auto s1 = sigmoid(preds.s(1).data);
  const double logit_chain = (s1.array() - sigmoid(logits).array()).abs().maxCoeff();
  const double prob_chain = (s1.array() - probs.array()).abs().maxCoeff();
  o.check(preds.s_init.data.h() == 11 && preds.s(1).data.h() == 352, "s_init 11x11, s1 352x352");
  o.check(logit_chain <= 1e-6,
          "sigmoid(s1) vs sigmoid(chained upsampling of s_init): max deviation " + fmt("%.2e", logit_chain));
  o.note("chained upsampling applied to sigmoid(s_init) instead deviates by " + fmt("%.2e", prob_chain) +
         " (the logistic does not commute with interpolation)");
  return o;
}

// ---------------------------------------------------------------- 5

Outcome shapes() {
  Outcome o;
  const auto m = init_model<float>(ModelConfig{}, 5);
  const int chans[8] = {16, 32, 64, 64, 64, 64, 64, 64};
  const int scales[8] = {1, 2, 4, 4, 8, 8, 16, 16};
  const char* names[8] = {"rgb1", "rgb2", "rgb3", "d4", "rgb5", "d6", "rgb7", "d8"};
  for (int size : {352, 224}) {
    std::mt19937_64 rng(55);
    const auto rgb = random_tensor<float>({1, 3, size, size}, rng);
    const auto depth = random_tensor<float>({1, 1, size, size}, rng, 0, 1);
    ForwardTrace<float> trace;
    const auto preds = forward(m, rgb, depth, &trace);

    bool features_ok = trace.stage_features.size() == 8;
    std::ostringstream table;
    for (std::size_t i = 0; i < 8 && features_ok; ++i) {
      const auto& f = trace.stage_features[i];
      const Shape want{1, chans[i], size / scales[i], size / scales[i]};
      const bool source_ok = (m.topology[i].source == Source::depth) == (names[i][0] == 'd');
      features_ok = features_ok && f.data.shape() == want && f.scale.denominator == scales[i] && source_ok;
      table << " " << names[i] << "=" << f.data.shape().str();
    }
    o.check(features_ok, std::to_string(size) + " px side features:" + table.str());

    const int den[9] = {32, 16, 16, 8, 8, 4, 4, 2, 1};
    const auto outs = preds.outputs();
    bool preds_ok = outs.size() == 9;
    std::ostringstream sizes;
    for (std::size_t k = 0; k < outs.size() && preds_ok; ++k) {
      const Index want = size / den[k];
      preds_ok = preds_ok && outs[k]->data.shape() == Shape{1, 1, want, want};
      sizes << (k ? "," : "") << outs[k]->data.h();
    }
    o.check(preds_ok, std::to_string(size) + " px predictions s_init,s8..s1 = {" + sizes.str() + "}");
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome schedules() {
  Outcome o;
  using Row = std::array<std::array<int, 3>, 3>;  // per block, c at side-outputs 1, 2, 3+
  const std::array<int, 3> wide{16, 32, 64}, c8{8, 8, 8}, c4{4, 4, 4}, c1{1, 1, 1};
  const std::array<Row, 8> printed{{{wide, wide, wide},
                                    {c8, c8, c8},
                                    {c4, c4, c4},
                                    {c1, c1, c1},
                                    {wide, c8, c4},
                                    {wide, c8, c1},
                                    {wide, c4, c1},
                                    {c8, c4, c1}}};
  for (int style = 1; style <= 8; ++style) {
    const auto sched = build_schedule(style);
    bool ok = sched.rows.size() == 8;
    std::ostringstream row;
    for (int stage = 1; stage <= 8 && ok; ++stage) {
      const auto got = sched.stage(stage);
      ok = got.size() == 3;
      for (std::size_t b = 0; b < 3 && ok; ++b) {
        ok = got[b] == printed[std::size_t(style - 1)][b][std::size_t(std::min(stage, 3) - 1)];
      }
      if (stage <= 3) {
        row << " s" << stage << "=(" << got[0] << "," << got[1] << "," << got[2] << ")";
      }
    }
    o.check(ok, "style " + std::to_string(style) + ":" + row.str());
  }
  return o;
}

// ---------------------------------------------------------------- 7

Outcome overfit() {
  Outcome o;
  const auto samples = synthetic_samples(5, 64, 7);
  auto model = init_model<float>(test::tiny_config(64), 7);
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.augment = false;
  cfg.lr = 1e-3;
  const auto batch = make_batch(samples);
  AdamState state;
  EvalResult last;
  int reached = -1;
  for (int step = 1; step <= 500; ++step) {
    train_step(model, batch, state, cfg, cfg.lr);
    if (step % 50 == 0) {
      last = evaluate_samples(model, samples, EvalConfig{}, "overfit").result;
      o.note("step " + std::to_string(step) + ": max-F " + fmt("%.4f", last.max_f) + ", MAE " + fmt("%.4f", last.mae));
      if (last.max_f >= 0.95 && last.mae <= 0.05) {
        reached = step;
        break;
      }
    }
  }
  o.check(reached > 0, reached > 0 ? "max-F >= 0.95 and MAE <= 0.05 after " + std::to_string(reached) + " steps"
                                   : "thresholds not reached within 500 steps");
  return o;
}

// ---------------------------------------------------------------- 8

Outcome metrics() {
  Outcome o;
  Map2d p4(4, 4), g4(4, 4);
  p4 << 1, 0.75, 0, 0, 0.5, 1, 0.25, 0, 0, 0, 0, 0.5, 0, 0, 0, 1;
  g4 << 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1;
  o.check(mae(p4, g4) == 1.5 / 16, "4x4 MAE " + fmt("%.6f", mae(p4, g4)) + " (hand value 0.093750)");

  Map2d pred = Map2d::Zero(4, 4), gt = Map2d::Zero(4, 4);
  gt.block(0, 0, 2, 2) = 1;
  pred(0, 0) = 1;
  pred(0, 1) = 1;
  pred(1, 0) = 0.6;
  pred(1, 1) = 0.2;
  pred(3, 3) = 0.8;
  // Best operating point: thresholds up to 0.2 keep all 4 positives and 1 false positive.
  const double p = 0.8, r = 1.0, hand = 1.3 * p * r / (0.3 * p + r);
  o.check(std::abs(max_f_measure(pred, gt) - hand) <= 1e-12,
          "4x4 max-F " + fmt("%.6f", max_f_measure(pred, gt)) + " (hand value " + fmt("%.6f", hand) + ")");

  std::mt19937_64 rng(8);
  double self_s = 1, self_e = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const Map2d g = test::random_mask(12, 10, rng);
    self_s = std::min(self_s, s_measure(g, g));
    self_e = std::min(self_e, e_measure(g, g));
  }
  o.check(std::abs(self_s - 1) <= 1e-9 && std::abs(self_e - 1) <= 1e-9,
          "gt against itself: min S " + fmt("%.12f", self_s) + ", min E " + fmt("%.12f", self_e));

  int out_of_range = 0;
  std::uniform_int_distribution<int> side(2, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = side(rng), w = side(rng);
    const Map2d g = test::random_mask(h, w, rng);
    const Map2d q = test::random_pred(h, w, rng);
    for (double v : {s_measure(q, g), e_measure(q, g), max_f_measure(q, g), mae(q, g)}) {
      if (!(v >= 0 && v <= 1)) ++out_of_range;
    }
  }
  o.check(out_of_range == 0, "1000 random pairs: " + std::to_string(out_of_range) + " scores outside [0, 1]");

  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Map2d g = test::random_mask(16, 16, rng);
    const Map2d q = test::random_pred(16, 16, rng);
    worst = std::max(worst, std::abs(s_measure(q, g) - test::reference_s_measure(q, g)));
  }
  o.check(worst <= 1e-6, "S-measure vs from-definition loops, 20 cases: max deviation " + fmt("%.2e", worst));
  return o;
}

// ---------------------------------------------------------------- 9

std::vector<double> flatten(Model<float>& m) {
  std::vector<double> out;
  for (const auto& p : parameters(m)) out.insert(out.end(), p.data, p.data + p.size);
  return out;
}

Outcome determinism() {
  Outcome o;
  const auto samples = synthetic_samples(5, 32, 9);
  RunConfig run;
  run.model = test::tiny_config(32);
  run.train.batch_size = 2;
  run.train.epochs = 2;
  run.train.lr = 1e-3;
  run.train.lr_drop_epoch = 1;
  run.train.seed = 99;
  const fs::path ckpt = fs::temp_directory_path() / ("pgar_accept_" + std::to_string(std::random_device{}()) + ".pgar");

  auto train = [&](Model<float>& m, AdamState& st, int start, bool save) {
    std::vector<LossReport> trace;
    TrainCallbacks cb;
    cb.on_step = [&](const LossReport& r) { trace.push_back(r); };
    if (save) {
      cb.on_epoch_end = [&](int epoch, const Model<float>& mm, const AdamState& s) {
        if (epoch == 0) save_checkpoint(ckpt.string(), run, mm, s, epoch);
      };
    }
    train_loop(m, samples, run.train, st, cb, start);
    return trace;
  };
  auto same_losses = [](const std::vector<LossReport>& a, const std::vector<LossReport>& b, std::size_t offset) {
    if (a.size() < offset + b.size()) return false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (a[offset + i].losses != b[i].losses || a[offset + i].total != b[i].total) return false;
    }
    return true;
  };

  auto a = init_model<float>(run.model, 11), b = init_model<float>(run.model, 11);
  AdamState sa, sb;
  const auto ta = train(a, sa, 0, true);
  const auto tb = train(b, sb, 0, false);
  o.check(ta.size() == tb.size() && same_losses(ta, tb, 0),
          std::to_string(ta.size()) + "-step loss traces of two runs bitwise equal");
  o.check(flatten(a) == flatten(b), "final parameters bitwise equal");

  const auto ra = report_json({evaluate_samples(a, samples, EvalConfig{}, "synthetic")}).dump();
  const auto rb = report_json({evaluate_samples(b, samples, EvalConfig{}, "synthetic")}).dump();
  o.check(ra == rb, "evaluation reports byte-identical (" + std::to_string(ra.size()) + " bytes)");

  auto ck = load_checkpoint(ckpt.string());
  const auto tc = train(ck.model, ck.optimizer, ck.epoch + 1, false);
  const std::size_t offset = ta.size() - tc.size();
  o.check(!tc.empty() && same_losses(ta, tc, offset) && flatten(ck.model) == flatten(a),
          "resume from the epoch-0 checkpoint reproduces the last " + std::to_string(tc.size()) +
              " steps and final parameters");
  fs::remove(ckpt);
  return o;
}

// ---------------------------------------------------------------- 10

Outcome report_format() {
  Outcome o;
  const auto samples = synthetic_samples(3, 32, 10);
  const auto model = init_model<float>(test::tiny_config(32), 10);
  const std::vector<DatasetReport> reports{evaluate_samples(model, samples, EvalConfig{}, "synthetic")};
  const auto j = report_json(reports);
  o.check(j.at("columns") == nlohmann::json{"E_xi", "S_alpha", "F_beta", "M"},
          "json columns " + j.at("columns").dump());
  const auto& d = j.at("datasets").at(0);
  o.check(d.contains("E_xi") && d.contains("S_alpha") && d.contains("F_beta") && d.contains("M"),
          "json dataset entry carries all four scores");
  const auto table = report_table(reports);
  const auto e = table.find("E_xi"), s = table.find("S_a"), f = table.find("F_b"), m = table.find("M (down)");
  o.check(e != std::string::npos && e < s && s < f && f < m && m != std::string::npos,
          "table rows in the order E_xi, S_a, F_b, M");
  const std::string note = kReproducibilityNote;
  o.check(j.value("note", "") == note && table.find(note) != std::string::npos,
          "non-reproducibility statement in both reports");
  o.note(note);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parameter budget", parameter_budget},
      {"split-and-concatenate oracle", split_concat_oracle},
      {"gradient checks", gradients},
      {"zero-residual identity", residual_identity},
      {"shape suite", shapes},
      {"guidance schedules", schedules},
      {"overfit on synthetic data", overfit},
      {"metric oracles", metrics},
      {"determinism", determinism},
      {"report format", report_format},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failed;
    std::cout << "criterion " << i + 1 << " " << criteria[i].first << ": " << (out.pass ? "PASS" : "FAIL") << " ("
              << fmt("%.1f", secs) << " s)\n";
    for (const auto& l : out.lines) std::cout << "    " << l << "\n";
    std::cout.flush();
  }
  std::cout << (criteria.size() - std::size_t(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
