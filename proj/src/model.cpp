#include "aat/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "aat/wer.hpp"

namespace aat {
namespace {

void init_mat(Mat& m, int rows, int cols, Rng& rng) {
  m = Mat(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : m.d) v = rng.uniform(-scale, scale);
}

// out += W * x (W rows x cols, x cols)
void matvec_acc(const Mat& w, const double* x, double* out) {
  for (int i = 0; i < w.rows; ++i) {
    const double* row = w.row(i);
    double acc = 0.0;
    for (int j = 0; j < w.cols; ++j) acc += row[j] * x[j];
    out[i] += acc;
  }
}

// out += W^T * a
void matvec_t_acc(const Mat& w, const double* a, double* out) {
  for (int i = 0; i < w.rows; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const double* row = w.row(i);
    for (int j = 0; j < w.cols; ++j) out[j] += row[j] * ai;
  }
}

// W += scale * a * x^T
void outer_acc(Mat& w, const double* a, const double* x, double scale = 1.0) {
  for (int i = 0; i < w.rows; ++i) {
    const double ai = a[i] * scale;
    if (ai == 0.0) continue;
    double* row = w.row(i);
    for (int j = 0; j < w.cols; ++j) row[j] += ai * x[j];
  }
}

}  // namespace

VictimModel VictimModel::init(Rng& rng, const FeatureConfig& feat, int hidden) {
  VictimModel m;
  m.feat = feat;
  m.hidden = hidden;
  init_mat(m.w1_in, hidden, feat.n_coeffs, rng);
  init_mat(m.w1_rec, hidden, hidden, rng);
  init_mat(m.w2_in, hidden, hidden, rng);
  init_mat(m.w2_rec, hidden, hidden, rng);
  init_mat(m.w_out, m.vocab.size(), hidden, rng);
  m.b1.assign(hidden, 0.0);
  m.b2.assign(hidden, 0.0);
  m.b_out.assign(m.vocab.size(), 0.0);
  return m;
}

ForwardContext forward_ctx(const VictimModel& model, const AudioClip& clip) {
  ForwardContext ctx;
  ctx.mfcc_ctx = mfcc_forward(clip, model.feat);
  const Mat& raw = ctx.mfcc_ctx.feats;
  const int n_frames = raw.rows;
  const int n_coeffs = raw.cols;
  const int h = model.hidden;

  // Per-utterance cepstral mean normalization.
  ctx.feat_mean.assign(n_coeffs, 0.0);
  for (int t = 0; t < n_frames; ++t)
    for (int c = 0; c < n_coeffs; ++c) ctx.feat_mean[c] += raw.at(t, c);
  for (double& v : ctx.feat_mean) v /= n_frames;
  ctx.feats = Mat(n_frames, n_coeffs);
  for (int t = 0; t < n_frames; ++t)
    for (int c = 0; c < n_coeffs; ++c)
      ctx.feats.at(t, c) = raw.at(t, c) - ctx.feat_mean[c];

  ctx.h1 = Mat(n_frames, h);
  ctx.h2 = Mat(n_frames, h);
  ctx.logits = Mat(n_frames, model.vocab.size());

  std::vector<double> pre(h);
  for (int t = 0; t < n_frames; ++t) {
    // layer 1
    std::copy(model.b1.begin(), model.b1.end(), pre.begin());
    matvec_acc(model.w1_in, ctx.feats.row(t), pre.data());
    if (t > 0) matvec_acc(model.w1_rec, ctx.h1.row(t - 1), pre.data());
    for (int i = 0; i < h; ++i) ctx.h1.at(t, i) = std::tanh(pre[i]);
    // layer 2
    std::copy(model.b2.begin(), model.b2.end(), pre.begin());
    matvec_acc(model.w2_in, ctx.h1.row(t), pre.data());
    if (t > 0) matvec_acc(model.w2_rec, ctx.h2.row(t - 1), pre.data());
    for (int i = 0; i < h; ++i) ctx.h2.at(t, i) = std::tanh(pre[i]);
    // output
    std::copy(model.b_out.begin(), model.b_out.end(), ctx.logits.row(t));
    matvec_acc(model.w_out, ctx.h2.row(t), ctx.logits.row(t));
  }
  return ctx;
}

Mat forward(const VictimModel& model, const AudioClip& clip) {
  return forward_ctx(model, clip).logits;
}

ModelGradients ModelGradients::zeros_like(const VictimModel& m) {
  ModelGradients g;
  g.w1_in = Mat(m.w1_in.rows, m.w1_in.cols);
  g.w1_rec = Mat(m.w1_rec.rows, m.w1_rec.cols);
  g.w2_in = Mat(m.w2_in.rows, m.w2_in.cols);
  g.w2_rec = Mat(m.w2_rec.rows, m.w2_rec.cols);
  g.w_out = Mat(m.w_out.rows, m.w_out.cols);
  g.b1.assign(m.b1.size(), 0.0);
  g.b2.assign(m.b2.size(), 0.0);
  g.b_out.assign(m.b_out.size(), 0.0);
  return g;
}

void ModelGradients::accumulate(const ModelGradients& other, double scale) {
  const auto add = [scale](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  };
  add(w1_in.d, other.w1_in.d);
  add(w1_rec.d, other.w1_rec.d);
  add(w2_in.d, other.w2_in.d);
  add(w2_rec.d, other.w2_rec.d);
  add(w_out.d, other.w_out.d);
  add(b1, other.b1);
  add(b2, other.b2);
  add(b_out, other.b_out);
}

double ModelGradients::norm() const {
  double acc = 0.0;
  const auto sq = [&acc](const std::vector<double>& v) {
    for (double x : v) acc += x * x;
  };
  sq(w1_in.d);
  sq(w1_rec.d);
  sq(w2_in.d);
  sq(w2_rec.d);
  sq(w_out.d);
  sq(b1);
  sq(b2);
  sq(b_out);
  return std::sqrt(acc);
}

std::vector<double> backward_to_input(const VictimModel& model,
                                      const ForwardContext& ctx,
                                      const Mat& grad_logits,
                                      ModelGradients* param_grads) {
  const int n_frames = ctx.logits.rows;
  const int n_coeffs = ctx.feats.cols;
  const int h = model.hidden;

  Mat grad_feats(n_frames, n_coeffs);
  std::vector<double> dh1_next(h, 0.0), dh2_next(h, 0.0);
  std::vector<double> dh1(h), dh2(h), a1(h), a2(h);

  for (int t = n_frames - 1; t >= 0; --t) {
    // output layer
    std::fill(dh2.begin(), dh2.end(), 0.0);
    matvec_t_acc(model.w_out, grad_logits.row(t), dh2.data());
    for (int i = 0; i < h; ++i) dh2[i] += dh2_next[i];
    if (param_grads) {
      outer_acc(param_grads->w_out, grad_logits.row(t), ctx.h2.row(t));
      for (int k = 0; k < ctx.logits.cols; ++k)
        param_grads->b_out[k] += grad_logits.at(t, k);
    }
    // layer 2 tanh
    for (int i = 0; i < h; ++i) {
      const double y = ctx.h2.at(t, i);
      a2[i] = dh2[i] * (1.0 - y * y);
    }
    std::fill(dh2_next.begin(), dh2_next.end(), 0.0);
    if (t > 0) matvec_t_acc(model.w2_rec, a2.data(), dh2_next.data());
    std::fill(dh1.begin(), dh1.end(), 0.0);
    matvec_t_acc(model.w2_in, a2.data(), dh1.data());
    for (int i = 0; i < h; ++i) dh1[i] += dh1_next[i];
    if (param_grads) {
      outer_acc(param_grads->w2_in, a2.data(), ctx.h1.row(t));
      if (t > 0) outer_acc(param_grads->w2_rec, a2.data(), ctx.h2.row(t - 1));
      for (int i = 0; i < h; ++i) param_grads->b2[i] += a2[i];
    }
    // layer 1 tanh
    for (int i = 0; i < h; ++i) {
      const double y = ctx.h1.at(t, i);
      a1[i] = dh1[i] * (1.0 - y * y);
    }
    std::fill(dh1_next.begin(), dh1_next.end(), 0.0);
    if (t > 0) matvec_t_acc(model.w1_rec, a1.data(), dh1_next.data());
    matvec_t_acc(model.w1_in, a1.data(), grad_feats.row(t));
    if (param_grads) {
      outer_acc(param_grads->w1_in, a1.data(), ctx.feats.row(t));
      if (t > 0) outer_acc(param_grads->w1_rec, a1.data(), ctx.h1.row(t - 1));
      for (int i = 0; i < h; ++i) param_grads->b1[i] += a1[i];
    }
  }

  // CMN adjoint: g -> g - mean_t(g).
  std::vector<double> mean(n_coeffs, 0.0);
  for (int t = 0; t < n_frames; ++t)
    for (int c = 0; c < n_coeffs; ++c) mean[c] += grad_feats.at(t, c);
  for (double& v : mean) v /= n_frames;
  for (int t = 0; t < n_frames; ++t)
    for (int c = 0; c < n_coeffs; ++c) grad_feats.at(t, c) -= mean[c];

  return mfcc_backward(ctx.mfcc_ctx, grad_feats);
}

std::vector<std::string> transcribe(const VictimModel& model,
                                    const AudioClip& clip) {
  return greedy_words(forward(model, clip), model.vocab);
}

std::vector<double> input_gradient(const VictimModel& model,
                                   const AudioClip& clip,
                                   const TranscriptionTarget& target,
                                   double* loss_out) {
  const ForwardContext ctx = forward_ctx(model, clip);
  Mat grad_logits;
  const double loss = ctc_loss(ctx.logits, target.token_ids, &grad_logits);
  if (loss_out) *loss_out = loss;
  return backward_to_input(model, ctx, grad_logits);
}

double corpus_wer(const VictimModel& model,
                  const std::vector<LabeledClip>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("corpus_wer: empty dataset");
  double total = 0.0;
  for (const auto& item : dataset)
    total += wer(split_words(item.text), transcribe(model, item.clip));
  return total / dataset.size();
}

VictimModel train_victim(const std::vector<LabeledClip>& train_set,
                         const std::vector<LabeledClip>& heldout,
                         const TrainConfig& cfg) {
  if (train_set.empty())
    throw std::invalid_argument("train_victim: empty training set");
  Rng rng(cfg.seed);
  VictimModel model = VictimModel::init(rng);

  ModelGradients velocity = ModelGradients::zeros_like(model);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = cfg.learning_rate;
  // Per-sample SGD keeps bouncing around the optimum even at the decayed
  // learning rate, so the last epoch is not reliably the best one. Track the
  // best held-out WER seen during the second half of training and return
  // those weights.
  VictimModel best = model;
  double best_wer = std::numeric_limits<double>::infinity();
  const int eval_from = cfg.epochs / 2;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with our deterministic generator.
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const LabeledClip& item = train_set[idx];
      const ForwardContext ctx = forward_ctx(model, item.clip);
      Mat grad_logits;
      const auto target = model.vocab.encode(item.text);
      epoch_loss += ctc_loss(ctx.logits, target, &grad_logits);
      if (cfg.logit_l2 > 0.0)
        for (std::size_t i = 0; i < grad_logits.d.size(); ++i)
          grad_logits.d[i] += 2.0 * cfg.logit_l2 * ctx.logits.d[i];
      ModelGradients grads = ModelGradients::zeros_like(model);
      backward_to_input(model, ctx, grad_logits, &grads);

      const double gnorm = grads.norm();
      const double clip_scale =
          gnorm > cfg.grad_clip ? cfg.grad_clip / gnorm : 1.0;
      const auto step = [&](Mat& w, Mat& v, const Mat& g) {
        for (std::size_t i = 0; i < w.d.size(); ++i) {
          v.d[i] = cfg.momentum * v.d[i] - lr * clip_scale * g.d[i];
          w.d[i] += v.d[i];
        }
      };
      const auto step_vec = [&](std::vector<double>& w, std::vector<double>& v,
                                const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = cfg.momentum * v[i] - lr * clip_scale * g[i];
          w[i] += v[i];
        }
      };
      step(model.w1_in, velocity.w1_in, grads.w1_in);
      step(model.w1_rec, velocity.w1_rec, grads.w1_rec);
      step(model.w2_in, velocity.w2_in, grads.w2_in);
      step(model.w2_rec, velocity.w2_rec, grads.w2_rec);
      step(model.w_out, velocity.w_out, grads.w_out);
      step_vec(model.b1, velocity.b1, grads.b1);
      step_vec(model.b2, velocity.b2, grads.b2);
      step_vec(model.b_out, velocity.b_out, grads.b_out);
    }
    lr *= cfg.lr_decay;
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %3d  mean ctc loss %.4f\n", epoch,
                   epoch_loss / train_set.size());
    }
    if (!heldout.empty() && epoch >= eval_from && (epoch % 5 == 4)) {
      const double wer = corpus_wer(model, heldout);
      if (cfg.verbose)
        std::fprintf(stderr, "epoch %3d  held-out WER %.2f%%\n", epoch, wer);
      if (wer < best_wer) {
        best_wer = wer;
        best = model;
      }
    }
  }

  if (!heldout.empty()) {
    const double final_wer = corpus_wer(model, heldout);
    if (final_wer < best_wer) {
      best_wer = final_wer;
      best = model;
    }
    if (cfg.verbose)
      std::fprintf(stderr, "held-out WER %.2f%% (best checkpoint)\n", best_wer);
    if (best_wer > cfg.target_wer)
      throw std::runtime_error(
          "train_victim: did not converge, held-out WER " +
          std::to_string(best_wer) + "% > target " +
          std::to_string(cfg.target_wer) + "%");
    return best;
  }
  return model;
}

namespace {

void write_tensor(std::ofstream& os, const std::string& name,
                  const double* data, std::size_t count) {
  const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
  const std::uint64_t n = count;
  os.write(reinterpret_cast<const char*>(&name_len), 4);
  os.write(name.data(), name_len);
  os.write(reinterpret_cast<const char*>(&n), 8);
  os.write(reinterpret_cast<const char*>(data), sizeof(double) * count);
}

}  // namespace

void save_model(const std::string& path, const VictimModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);

  nlohmann::json desc;
  desc["format_version"] = 1;
  desc["hidden"] = model.hidden;
  desc["vocab"] = "blank+a-z+space";
  desc["feature"] = {{"sample_rate", model.feat.sample_rate},
                     {"frame_len", model.feat.frame_len},
                     {"hop", model.feat.hop},
                     {"n_fft", model.feat.n_fft},
                     {"n_mels", model.feat.n_mels},
                     {"n_coeffs", model.feat.n_coeffs}};
  const std::string header = desc.dump();

  os.write("AATCKPT1", 8);
  const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
  os.write(reinterpret_cast<const char*>(&hlen), 4);
  os.write(header.data(), hlen);

  write_tensor(os, "w1_in", model.w1_in.d.data(), model.w1_in.d.size());
  write_tensor(os, "w1_rec", model.w1_rec.d.data(), model.w1_rec.d.size());
  write_tensor(os, "w2_in", model.w2_in.d.data(), model.w2_in.d.size());
  write_tensor(os, "w2_rec", model.w2_rec.d.data(), model.w2_rec.d.size());
  write_tensor(os, "w_out", model.w_out.d.data(), model.w_out.d.size());
  write_tensor(os, "b1", model.b1.data(), model.b1.size());
  write_tensor(os, "b2", model.b2.data(), model.b2.size());
  write_tensor(os, "b_out", model.b_out.data(), model.b_out.size());
}

VictimModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, "AATCKPT1", 8) != 0)
    throw std::runtime_error("load_model: bad checkpoint magic in " + path);
  std::uint32_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), 4);
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  const auto desc = nlohmann::json::parse(header);

  VictimModel model;
  model.hidden = desc.at("hidden").get<int>();
  const auto& f = desc.at("feature");
  model.feat.sample_rate = f.at("sample_rate").get<int>();
  model.feat.frame_len = f.at("frame_len").get<int>();
  model.feat.hop = f.at("hop").get<int>();
  model.feat.n_fft = f.at("n_fft").get<int>();
  model.feat.n_mels = f.at("n_mels").get<int>();
  model.feat.n_coeffs = f.at("n_coeffs").get<int>();

  const int h = model.hidden;
  const int v = model.vocab.size();
  const auto read_into = [&is, &path](const std::string& expect, double* dst,
                                      std::size_t count) {
    std::uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    if (!is || name != expect || n != count)
      throw std::runtime_error("load_model: corrupt tensor '" + expect +
                               "' in " + path);
    is.read(reinterpret_cast<char*>(dst), sizeof(double) * count);
  };

  model.w1_in = Mat(h, model.feat.n_coeffs);
  model.w1_rec = Mat(h, h);
  model.w2_in = Mat(h, h);
  model.w2_rec = Mat(h, h);
  model.w_out = Mat(v, h);
  model.b1.resize(h);
  model.b2.resize(h);
  model.b_out.resize(v);
  read_into("w1_in", model.w1_in.d.data(), model.w1_in.d.size());
  read_into("w1_rec", model.w1_rec.d.data(), model.w1_rec.d.size());
  read_into("w2_in", model.w2_in.d.data(), model.w2_in.d.size());
  read_into("w2_rec", model.w2_rec.d.data(), model.w2_rec.d.size());
  read_into("w_out", model.w_out.d.data(), model.w_out.d.size());
  read_into("b1", model.b1.data(), model.b1.size());
  read_into("b2", model.b2.data(), model.b2.size());
  read_into("b_out", model.b_out.data(), model.b_out.size());
  if (!is) throw std::runtime_error("load_model: truncated checkpoint " + path);
  return model;
}

}  // namespace aat
