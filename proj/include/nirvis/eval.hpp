#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nirvis/errors.hpp"
#include "nirvis/tensor.hpp"

// Closed-set verification/identification metrics. Scores are cosine
// similarities between probe (NIR) and gallery (VIS) embeddings.
namespace nirvis::eval {

inline const std::array<double, 3> kFarTargets = {1e-2, 1e-3, 1e-4};

struct ScoreMatrix {
  std::vector<int> gallery_ids;  // VIS identities
  std::vector<int> probe_ids;    // NIR identities
  Tensor<double> sim;            // (probes, gallery)
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw ValueError("cosine_similarity: dimension mismatch or empty vectors");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValueError("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Rows = probes, columns = gallery. Every probe identity must be enrolled.
inline ScoreMatrix build_scores(const std::vector<std::vector<double>>& gallery_feats,
                                const std::vector<int>& gallery_ids,
                                const std::vector<std::vector<double>>& probe_feats,
                                const std::vector<int>& probe_ids) {
  if (gallery_feats.size() != gallery_ids.size() || probe_feats.size() != probe_ids.size() ||
      gallery_feats.empty() || probe_feats.empty())
    throw ValueError("build_scores: empty or mismatched inputs");
  for (int pid : probe_ids)
    if (std::find(gallery_ids.begin(), gallery_ids.end(), pid) == gallery_ids.end())
      throw ValueError("build_scores: probe identity " + std::to_string(pid) +
                       " missing from gallery (closed-set protocol)");
  ScoreMatrix m;
  m.gallery_ids = gallery_ids;
  m.probe_ids = probe_ids;
  const int P = static_cast<int>(probe_ids.size()), G = static_cast<int>(gallery_ids.size());
  m.sim = Tensor<double>({P, G});
  for (int p = 0; p < P; ++p)
    for (int g = 0; g < G; ++g)
      m.sim.at(p, g) =
          cosine_similarity(probe_feats[static_cast<std::size_t>(p)],
                            gallery_feats[static_cast<std::size_t>(g)]);
  return m;
}

// Fraction of probes whose best gallery match shares their identity. Score
// ties resolve to the lowest gallery index.
inline double rank1(const ScoreMatrix& m) {
  const int P = m.sim.dim(0), G = m.sim.dim(1);
  if (P == 0 || G == 0) throw ValueError("rank1: empty score matrix");
  int correct = 0;
  for (int p = 0; p < P; ++p) {
    int best = 0;
    for (int g = 1; g < G; ++g)
      if (m.sim.at(p, g) > m.sim.at(p, best)) best = g;
    if (m.gallery_ids[static_cast<std::size_t>(best)] == m.probe_ids[static_cast<std::size_t>(p)])
      ++correct;
  }
  return static_cast<double>(correct) / P;
}

struct RocVr {
  std::vector<std::pair<double, double>> roc;  // (FAR, VR), FAR ascending
  std::vector<double> vr;                      // one per requested FAR target
};

// Acceptance rule: accept iff score >= tau. For each FAR target, tau is the
// smallest distinct impostor score whose FAR stays within the target; when
// even the largest impostor score overshoots (tiny impostor sets), the
// operating point is "above every impostor", i.e. VR counts genuine scores
// strictly greater than the impostor maximum. The ROC curve itself sweeps
// every distinct score and is closed with the trivial (1,1) endpoint.
inline RocVr roc_and_vr(const ScoreMatrix& m,
                        const std::vector<double>& far_targets = {kFarTargets.begin(),
                                                                  kFarTargets.end()}) {
  std::vector<double> genuine, impostor;
  const int P = m.sim.dim(0), G = m.sim.dim(1);
  for (int p = 0; p < P; ++p)
    for (int g = 0; g < G; ++g)
      (m.gallery_ids[static_cast<std::size_t>(g)] == m.probe_ids[static_cast<std::size_t>(p)]
           ? genuine
           : impostor)
          .push_back(m.sim.at(p, g));
  if (genuine.empty() || impostor.empty())
    throw ValueError("roc_and_vr: need at least one genuine and one impostor pair");
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());
  const double ng = static_cast<double>(genuine.size());
  const double ni = static_cast<double>(impostor.size());
  auto count_ge = [](const std::vector<double>& sorted, double tau) {
    return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), tau));
  };

  RocVr out;
  std::vector<double> all = genuine;
  all.insert(all.end(), impostor.begin(), impostor.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (auto it = all.rbegin(); it != all.rend(); ++it)
    out.roc.emplace_back(count_ge(impostor, *it) / ni, count_ge(genuine, *it) / ng);
  if (out.roc.empty() || out.roc.back() != std::make_pair(1.0, 1.0)) out.roc.emplace_back(1.0, 1.0);

  std::vector<double> imp_distinct = impostor;
  imp_distinct.erase(std::unique(imp_distinct.begin(), imp_distinct.end()), imp_distinct.end());
  const double above_max = count_ge(genuine, std::nextafter(impostor.back(), 2.0)) / ng;
  for (double target : far_targets) {
    double vr = above_max;  // fallback: threshold just above every impostor
    // FAR is non-increasing in tau, so the first qualifying candidate in
    // ascending order is the smallest qualifying tau.
    for (double tau : imp_distinct) {
      if (count_ge(impostor, tau) / ni <= target) {
        vr = count_ge(genuine, tau) / ng;
        break;
      }
    }
    out.vr.push_back(vr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fold aggregation and report files

struct FoldMetrics {
  double rank1 = 0;
  std::vector<double> vr;  // aligned with kFarTargets
};

struct EvalReport {
  std::vector<FoldMetrics> folds;
  std::vector<std::vector<std::pair<double, double>>> rocs;  // per fold
  FoldMetrics mean, stddev;
};

// Mean and sample standard deviation (divide by k-1; zero spread for k=1).
inline void aggregate_folds(EvalReport& r) {
  const std::size_t k = r.folds.size();
  if (k == 0) throw ValueError("aggregate_folds: no folds");
  const std::size_t nv = r.folds[0].vr.size();
  r.mean = FoldMetrics{0.0, std::vector<double>(nv, 0.0)};
  r.stddev = FoldMetrics{0.0, std::vector<double>(nv, 0.0)};
  for (const auto& f : r.folds) {
    r.mean.rank1 += f.rank1;
    for (std::size_t i = 0; i < nv; ++i) r.mean.vr[i] += f.vr[i];
  }
  r.mean.rank1 /= static_cast<double>(k);
  for (auto& v : r.mean.vr) v /= static_cast<double>(k);
  if (k > 1) {
    for (const auto& f : r.folds) {
      r.stddev.rank1 += (f.rank1 - r.mean.rank1) * (f.rank1 - r.mean.rank1);
      for (std::size_t i = 0; i < nv; ++i)
        r.stddev.vr[i] += (f.vr[i] - r.mean.vr[i]) * (f.vr[i] - r.mean.vr[i]);
    }
    r.stddev.rank1 = std::sqrt(r.stddev.rank1 / static_cast<double>(k - 1));
    for (auto& v : r.stddev.vr) v = std::sqrt(v / static_cast<double>(k - 1));
  }
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

// One row per fold plus an aggregate row (mean±std cells).
inline void write_eval_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "fold,rank1,vr_far_1e-2,vr_far_1e-3,vr_far_1e-4\n";
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    out << f << ',' << detail::fmt(r.folds[f].rank1);
    for (double v : r.folds[f].vr) out << ',' << detail::fmt(v);
    out << '\n';
  }
  out << "aggregate," << detail::fmt(r.mean.rank1) << "±" << detail::fmt(r.stddev.rank1);
  for (std::size_t i = 0; i < r.mean.vr.size(); ++i)
    out << ',' << detail::fmt(r.mean.vr[i]) << "±" << detail::fmt(r.stddev.vr[i]);
  out << '\n';
  if (!out) throw IoError(path + ": write failed");
}

inline void write_roc_csv(const std::string& path,
                          const std::vector<std::pair<double, double>>& roc) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "far,vr\n";
  for (const auto& [far, vr] : roc) out << detail::fmt(far) << ',' << detail::fmt(vr) << '\n';
  if (!out) throw IoError(path + ": write failed");
}

// Minimal self-contained SVG line plot of the ROC curve.
inline void write_roc_svg(const std::string& path,
                          const std::vector<std::pair<double, double>>& roc) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  const int W = 480, H = 480, M = 50;
  auto X = [&](double far) { return M + far * (W - 2 * M); };
  auto Y = [&](double vr) { return H - M - vr * (H - 2 * M); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << M << "\" y2=\"" << M
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double v = t / 10.0;
    out << "<text x=\"" << X(v) - 8 << "\" y=\"" << H - M + 18 << "\" font-size=\"11\">"
        << detail::fmt(v) << "</text>\n"
        << "<text x=\"" << M - 32 << "\" y=\"" << Y(v) + 4 << "\" font-size=\"11\">"
        << detail::fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << W / 2 - 60 << "\" y=\"" << H - 12
      << "\" font-size=\"13\">false accept rate</text>\n"
      << "<text x=\"14\" y=\"" << H / 2
      << "\" font-size=\"13\" transform=\"rotate(-90 14 " << H / 2
      << ")\">verification rate</text>\n<polyline fill=\"none\" stroke=\"#0057b8\" "
         "stroke-width=\"1.5\" points=\"";
  for (const auto& [far, vr] : roc) out << detail::fmt(X(far)) << ',' << detail::fmt(Y(vr)) << ' ';
  out << "\"/>\n</svg>\n";
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace nirvis::eval
