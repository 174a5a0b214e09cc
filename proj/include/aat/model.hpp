#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aat/audio.hpp"
#include "aat/ctc.hpp"
#include "aat/mat.hpp"
#include "aat/mfcc.hpp"
#include "aat/rng.hpp"

namespace aat {

// Small differentiable ASR: MFCC -> two unidirectional tanh recurrent layers
// -> linear -> CTC. All adjoints are hand-rolled; there is no general
// autodiff here.
struct VictimModel {
  FeatureConfig feat;
  Vocab vocab;
  int hidden = 128;

  Mat w1_in, w1_rec;  // hidden x n_coeffs, hidden x hidden
  Mat w2_in, w2_rec;  // hidden x hidden
  Mat w_out;          // vocab x hidden
  std::vector<double> b1, b2, b_out;

  static VictimModel init(Rng& rng, const FeatureConfig& feat = {},
                          int hidden = 128);
};

// Activations saved for backpropagation.
struct ForwardContext {
  MfccContext mfcc_ctx;
  std::vector<double> feat_mean;  // per-coefficient mean (CMN)
  Mat feats;                      // normalized features
  Mat h1, h2;
  Mat logits;
};

struct ModelGradients {
  Mat w1_in, w1_rec, w2_in, w2_rec, w_out;
  std::vector<double> b1, b2, b_out;

  static ModelGradients zeros_like(const VictimModel& m);
  void accumulate(const ModelGradients& other, double scale = 1.0);
  double norm() const;
};

// Per-frame unnormalized scores. Throws if the clip is shorter than one
// feature frame.
Mat forward(const VictimModel& model, const AudioClip& clip);
ForwardContext forward_ctx(const VictimModel& model, const AudioClip& clip);

// BPTT from dL/d(logits) back to the waveform. If param_grads is non-null,
// parameter gradients are accumulated into it as well.
std::vector<double> backward_to_input(const VictimModel& model,
                                      const ForwardContext& ctx,
                                      const Mat& grad_logits,
                                      ModelGradients* param_grads = nullptr);

std::vector<std::string> transcribe(const VictimModel& model,
                                    const AudioClip& clip);

// d ctc_loss / d samples, chained through the full feature pipeline.
std::vector<double> input_gradient(const VictimModel& model,
                                   const AudioClip& clip,
                                   const TranscriptionTarget& target,
                                   double* loss_out = nullptr);

struct LabeledClip {
  AudioClip clip;
  std::string text;
};

struct TrainConfig {
  int epochs = 80;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double lr_decay = 0.975;  // geometric, per epoch
  double grad_clip = 5.0;
  // L2 penalty on the logits. Without it per-sample SGD drives the CTC loss
  // toward zero by scaling the logits up without bound, which changes nothing
  // about the decoded transcript but makes the decision surface needlessly
  // steep.
  double logit_l2 = 1e-3;
  double target_wer = 10.0;  // percent, held-out
  std::uint64_t seed = 1;
  bool verbose = false;
};

// Momentum SGD over the corpus. Throws if held-out WER is still above
// target_wer after the configured epochs (message carries the final WER).
VictimModel train_victim(const std::vector<LabeledClip>& train_set,
                         const std::vector<LabeledClip>& heldout,
                         const TrainConfig& cfg);

// Mean word error rate of greedy transcriptions against labels, percent.
double corpus_wer(const VictimModel& model,
                  const std::vector<LabeledClip>& dataset);

// Versioned checkpoint: JSON descriptor + named raw tensors.
void save_model(const std::string& path, const VictimModel& model);
VictimModel load_model(const std::string& path);

}  // namespace aat
