#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "nirvis/autodiff.hpp"
#include "nirvis/config.hpp"
#include "nirvis/nn.hpp"
#include "nirvis/optim.hpp"
#include "nirvis/rng.hpp"
#include "nirvis/tensor.hpp"

// Adversarial discriminative feature learning: a shared-weight extractor F
// embeds grayscale faces of both modalities; a feature discriminator D_f
// tries to tell the modalities apart while F is trained to fool it, with a
// class-wise variance discrepancy term and a softmax classifier on top.
namespace nirvis::feat {

// Four conv(3x3)/leaky/maxpool stages with widths w,2w,4w,8w, then a dense
// map to the embedding. Input is (B,1,S,S) grayscale with S divisible by 16.
template <typename T>
struct FeatureExtractor {
  nn::Conv2d<T> c1, c2, c3, c4;
  nn::Dense<T> fc;
  int input_size = 0, feature_dim = 0;

  FeatureExtractor() = default;
  FeatureExtractor(int w, int fdim, int in_size, std::mt19937_64& rng)
      : c1(1, w, 3, 1, 1, true, nn::he_std<T>(1 * 9), rng),
        c2(w, 2 * w, 3, 1, 1, true, nn::he_std<T>(w * 9), rng),
        c3(2 * w, 4 * w, 3, 1, 1, true, nn::he_std<T>(2 * w * 9), rng),
        c4(4 * w, 8 * w, 3, 1, 1, true, nn::he_std<T>(4 * w * 9), rng),
        input_size(in_size),
        feature_dim(fdim) {
    if (in_size % 16 != 0)
      throw ValueError("FeatureExtractor: input size must be divisible by 16");
    const int flat = 8 * w * (in_size / 16) * (in_size / 16);
    fc = nn::Dense<T>(flat, fdim, true, nn::he_std<T>(flat), rng);
  }

  // (B,1,S,S) -> (B,feature_dim)
  ad::Var<T> forward(const ad::Var<T>& x) const {
    auto h = ad::maxpool2x2(ad::leaky_relu(c1.forward(x), T(0.2)));
    h = ad::maxpool2x2(ad::leaky_relu(c2.forward(h), T(0.2)));
    h = ad::maxpool2x2(ad::leaky_relu(c3.forward(h), T(0.2)));
    h = ad::maxpool2x2(ad::leaky_relu(c4.forward(h), T(0.2)));
    const int B = h.shape()[0];
    const int flat = h.shape()[1] * h.shape()[2] * h.shape()[3];
    return fc.forward(ad::reshape(h, {B, flat}));
  }

  void params(nn::NamedParams<T>& out, const std::string& p) const {
    c1.params(out, p + ".c1");
    c2.params(out, p + ".c2");
    c3.params(out, p + ".c3");
    c4.params(out, p + ".c4");
    fc.params(out, p + ".fc");
  }
};

// Modality critic on embeddings: two leaky hidden layers, sigmoid output.
template <typename T>
struct FeatureDiscriminator {
  nn::Dense<T> d1, d2, d3;

  FeatureDiscriminator() = default;
  FeatureDiscriminator(int fdim, int hidden, std::mt19937_64& rng)
      : d1(fdim, hidden, true, nn::he_std<T>(fdim), rng),
        d2(hidden, hidden, true, nn::he_std<T>(hidden), rng),
        d3(hidden, 1, true, nn::he_std<T>(hidden), rng) {}

  // (B,fdim) -> (B,1) probability the row came from the VIS domain.
  ad::Var<T> forward(const ad::Var<T>& f) const {
    auto h = ad::leaky_relu(d1.forward(f), T(0.2));
    h = ad::leaky_relu(d2.forward(h), T(0.2));
    return ad::sigmoid(d3.forward(h));
  }

  void params(nn::NamedParams<T>& out, const std::string& p) const {
    d1.params(out, p + ".d1");
    d2.params(out, p + ".d2");
    d3.params(out, p + ".d3");
  }
};

// Linear classifier without bias.
template <typename T>
struct ClassifierHead {
  nn::Dense<T> fc;

  ClassifierHead() = default;
  ClassifierHead(int fdim, int classes, std::mt19937_64& rng)
      : fc(fdim, classes, false, nn::he_std<T>(fdim), rng) {}

  ad::Var<T> forward(const ad::Var<T>& f) const { return fc.forward(f); }

  void params(nn::NamedParams<T>& out, const std::string& p) const { fc.params(out, p + ".fc"); }
};

// ---------------------------------------------------------------------------
// Losses

// Confusion term on NIR embeddings: -mean log D_f(F(I_N)).
template <typename T>
ad::Var<T> loss_feat_adv(const ad::Var<T>& nir_probs) {
  return ad::affine(ad::mean(ad::log(nir_probs)), T(-1), T(0));
}

// D_f objective: VIS rows are the positive class.
template <typename T>
ad::Var<T> loss_feat_disc(const ad::Var<T>& vis_probs, const ad::Var<T>& nir_probs) {
  auto lv = ad::mean(ad::log(vis_probs));
  auto ln = ad::mean(ad::log(ad::affine(nir_probs, T(-1), T(1))));
  return ad::affine(ad::add(lv, ln), T(-1), T(0));
}

// Class-wise variance discrepancy: sum over classes of the euclidean norm of
// the difference between per-dimension population variances of the class's
// VIS rows and NIR rows. Each matrix needs >= 2 rows.
template <typename T>
ad::Var<T> loss_cvd(const std::vector<std::pair<ad::Var<T>, ad::Var<T>>>& class_rows) {
  if (class_rows.empty()) throw ValueError("loss_cvd: no classes supplied");
  std::vector<ad::Var<T>> terms;
  for (const auto& [vis, nir] : class_rows)
    terms.push_back(ad::l2_norm_last(ad::sub(ad::var_rows(vis), ad::var_rows(nir))));
  return ad::sum(ad::stack0(terms));
}

// Mean softmax cross-entropy over the pooled two-modality batch.
template <typename T>
ad::Var<T> loss_cls(const ad::Var<T>& logits, const std::vector<int>& labels) {
  return ad::softmax_cross_entropy(logits, labels);
}

// ---------------------------------------------------------------------------
// Class-balanced sampler: every batch holds `classes_per_batch` classes with
// `samples_per_class` VIS and `samples_per_class` NIR images each, so the
// variance terms always see >= 2 rows per modality per class.

class BalancedSampler {
 public:
  struct Pick {
    int sample_index;   // into the caller's sample table
    int local_label;    // class index within the training split
    bool is_vis;
  };

  BalancedSampler(std::vector<std::vector<int>> vis_by_class,
                  std::vector<std::vector<int>> nir_by_class, int classes_per_batch,
                  int samples_per_class, std::uint64_t seed)
      : vis_(std::move(vis_by_class)),
        nir_(std::move(nir_by_class)),
        cpb_(classes_per_batch),
        spc_(samples_per_class),
        rng_(make_rng(seed)) {
    if (vis_.size() != nir_.size() || vis_.empty())
      throw ValueError("sampler: class tables empty or mismatched");
    for (std::size_t c = 0; c < vis_.size(); ++c)
      if (vis_[c].empty() || nir_[c].empty())
        throw ValueError("sampler: class " + std::to_string(c) + " lacks a modality");
    cpb_ = std::min<int>(cpb_, static_cast<int>(vis_.size()));
    order_.resize(vis_.size());
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = order_.size();  // force a shuffle on first use
  }

  std::vector<Pick> next() {
    std::vector<Pick> batch;
    for (int k = 0; k < cpb_; ++k) {
      if (cursor_ >= order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      const int c = order_[cursor_++];
      draw(vis_[static_cast<std::size_t>(c)], c, true, batch);
      draw(nir_[static_cast<std::size_t>(c)], c, false, batch);
    }
    return batch;
  }

 private:
  void draw(const std::vector<int>& pool, int label, bool is_vis, std::vector<Pick>& out) {
    // Without replacement when the class is large enough, else wrap around.
    std::vector<int> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng_);
    for (int i = 0; i < spc_; ++i)
      out.push_back({pool[static_cast<std::size_t>(idx[static_cast<std::size_t>(i) % idx.size()])],
                     label, is_vis});
  }

  std::vector<std::vector<int>> vis_, nir_;
  int cpb_, spc_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Trainer

struct FeatStepLosses {
  double f_adv = 0, cvd = 0, cls = 0, total = 0, d_f = 0;
};

struct PresetFlags {
  bool use_adv = true;
  bool use_cvd = true;
};

inline PresetFlags preset_flags(const std::string& preset) {
  PresetFlags f;
  if (preset == "softmax-only") {
    f.use_adv = false;
    f.use_cvd = false;
  } else if (preset == "adfl-no-adv") {
    f.use_adv = false;
  } else if (preset == "adfl-no-cvd") {
    f.use_cvd = false;
  }  // "adfl" and "hallucination+adfl" keep everything on
  return f;
}

class FeatTrainer {
 public:
  FeatureExtractor<float> f;
  ClassifierHead<float> head;
  FeatureDiscriminator<float> df;

  FeatTrainer(const ExperimentConfig& cfg, int classes, std::uint64_t seed)
      : flags_(preset_flags(cfg.preset)),
        l1_(static_cast<float>(cfg.lambda1)),
        l2_(static_cast<float>(cfg.lambda2)),
        lr0_(static_cast<float>(cfg.lr)),
        main_iters_(cfg.feat_iters),
        opt_f_(static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
               static_cast<float>(cfg.beta2)),
        opt_df_(static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
                static_cast<float>(cfg.beta2)) {
    auto rng = make_rng(split_seed(seed, "feat/init"));
    f = FeatureExtractor<float>(cfg.feat_width, cfg.feature_dim, cfg.crop_size, rng);
    head = ClassifierHead<float>(cfg.feature_dim, classes, rng);
    df = FeatureDiscriminator<float>(cfg.feature_dim, cfg.df_hidden, rng);
    nn::NamedParams<float> pf, pd;
    f.params(pf, "f");
    head.params(pf, "head");
    df.params(pd, "df");
    for (auto& [n, v] : pf) opt_f_.add_param(v);
    for (auto& [n, v] : pd) opt_df_.add_param(v);
  }

  // Softmax-only warmup on VIS images: loss = lambda2 * CE.
  double pretrain_step(const ad::Var<float>& vis_gray, const std::vector<int>& labels) {
    auto feats = f.forward(vis_gray);
    auto ce = loss_cls(head.forward(feats), labels);
    auto total = ad::affine(ce, l2_, 0.f);
    opt_f_.zero_grad();
    ad::backward(total);
    opt_f_.step();
    return ce.item();
  }

  // One alternating step. `vis_gray`/`nir_gray` are (Bv,1,S,S)/(Bn,1,S,S);
  // `class_slices` maps each batch class to its row ranges [begin,end) in the
  // VIS and NIR feature matrices.
  struct ClassSlice {
    int vis_begin, vis_end, nir_begin, nir_end;
  };
  FeatStepLosses step(const ad::Var<float>& vis_gray, const ad::Var<float>& nir_gray,
                      const std::vector<int>& vis_labels, const std::vector<int>& nir_labels,
                      const std::vector<ClassSlice>& class_slices) {
    FeatStepLosses out;
    const int fdim = f.feature_dim;

    // Linear decay to 10% across the main phase. An adversarial game has no
    // converging loss to flatten the final iterate; annealing is what makes
    // the last iterate representative instead of a draw from the churn.
    if (main_iters_ > 1) {
      const float frac = std::min(1.0f, static_cast<float>(step_count_) /
                                            static_cast<float>(main_iters_ - 1));
      const float lr = lr0_ * (1.0f - 0.9f * frac);
      opt_f_.set_lr(lr);
      opt_df_.set_lr(lr);
    }
    ++step_count_;

    // D_f update on frozen embeddings. Entirely skipped when the adversarial
    // term is off, so those presets never touch D_f parameters.
    if (flags_.use_adv) {
      ad::Var<float> vis_const, nir_const;
      {
        ad::NoGradGuard ng;
        vis_const = ad::Var<float>::constant(ad::normalize_rows(f.forward(vis_gray)).value());
        nir_const = ad::Var<float>::constant(ad::normalize_rows(f.forward(nir_gray)).value());
      }
      auto l_df = loss_feat_disc(df.forward(vis_const), df.forward(nir_const));
      opt_df_.zero_grad();
      ad::backward(l_df);
      opt_df_.step();
      out.d_f = l_df.item();
    }

    // Extractor + head update with the preset's active terms. The critic and
    // the cross-view spread see unit-normalized rows: retrieval scores by
    // cosine, and on the raw scale the extractor can "win" the game or shrink
    // the spread by rescaling norms without moving directions at all.
    auto fv = f.forward(vis_gray);
    auto fn = f.forward(nir_gray);
    auto fvn = ad::normalize_rows(fv);
    auto fnn = ad::normalize_rows(fn);
    auto all = ad::concat_rows(fv, fn);
    std::vector<int> labels = vis_labels;
    labels.insert(labels.end(), nir_labels.begin(), nir_labels.end());
    auto ce = loss_cls(head.forward(all), labels);
    auto total = ad::affine(ce, l2_, 0.f);
    if (flags_.use_adv) {
      auto adv = loss_feat_adv(df.forward(fnn));
      total = ad::add(adv, total);
      out.f_adv = adv.item();
    }
    if (flags_.use_cvd) {
      std::vector<std::pair<ad::Var<float>, ad::Var<float>>> rows;
      for (const auto& cs : class_slices)
        rows.emplace_back(
            ad::slice(fvn, {cs.vis_begin, 0}, {cs.vis_end - cs.vis_begin, fdim}),
            ad::slice(fnn, {cs.nir_begin, 0}, {cs.nir_end - cs.nir_begin, fdim}));
      auto cvd = loss_cvd(rows);
      total = ad::add(total, ad::affine(cvd, l1_, 0.f));
      out.cvd = cvd.item();
    }
    opt_f_.zero_grad();
    ad::backward(total);
    opt_f_.step();
    out.cls = ce.item();
    out.total = total.item();
    return out;
  }

  nn::NamedParams<float> named_params() const {
    nn::NamedParams<float> ps;
    f.params(ps, "f");
    head.params(ps, "head");
    df.params(ps, "df");
    return ps;
  }

  // Extractor-only parameters, for checkpoints that should work regardless
  // of the training-time class count.
  nn::NamedParams<float> extractor_params() const {
    nn::NamedParams<float> ps;
    f.params(ps, "f");
    return ps;
  }

 private:
  PresetFlags flags_;
  float l1_, l2_;
  float lr0_;
  int main_iters_;
  int step_count_ = 0;
  Adam<float> opt_f_, opt_df_;
};

}  // namespace nirvis::feat
