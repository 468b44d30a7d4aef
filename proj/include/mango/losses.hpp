#pragma once

// All loss mathematics: cosine scoring, thresholded modified scoring,
// InfoNCE, PatchNCE (original and modified), SegNCE with multiple positives,
// and the GAN objective. Every composite returns analytic gradients w.r.t.
// its embedding inputs; everything is pure and templated on the scalar so
// float runs training and double feeds finite-difference checks.
//
// Conventions:
//  - embeddings are matrices with one vector per row (N x e);
//  - scores are cosine similarities after row normalization (eps 1e-8);
//  - PatchNCE row i scores query z_i against all candidates in Z-hat, the
//    positive is the same-index candidate, and the per-image loss is the
//    plain double sum over layers and queries;
//  - SegNCE per layer is the mean over non-SKIP queries (partnerless queries
//    are skipped, not counted as zero), summed over layers;
//  - the GAN value is E log D(x) + E log(1 - D(G(y))) with scores clamped to
//    [eps, 1-eps], eps 1e-7: the generator minimizes +value, the
//    discriminator minimizes -value.

#include "mango/layers.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mango {

constexpr double kNormEps = 1e-8;
constexpr double kGanClampEps = 1e-7;

// --- scoring primitives -----------------------------------------------------

template <typename S>
S cosine_score(const VecX<S>& a, const VecX<S>& b) {
  const S na = std::max(a.norm(), static_cast<S>(kNormEps));
  const S nb = std::max(b.norm(), static_cast<S>(kNormEps));
  return a.dot(b) / (na * nb);
}

// Eq. 5 case law: negatives above theta are damped by alpha; positives and
// everything at or below theta pass through ("if rho > theta", strict).
template <typename S>
S modified_score(S score, bool is_positive, S alpha, S theta) {
  return (!is_positive && score > theta) ? alpha * score : score;
}

// Cross-entropy of softmax(scores/tau) against the target index.
template <typename S>
S nce_loss(const VecX<S>& scores, int target, S tau) {
  require(scores.size() >= 2, "nce_loss: need at least 2 candidates");
  require(target >= 0 && target < scores.size(), "nce_loss: target out of range");
  require(tau > S(0), "nce_loss: tau must be positive");
  const VecX<S> x = scores / tau;
  const S m = x.maxCoeff();
  const S lse = m + std::log((x.array() - m).exp().sum());
  return lse - x(target);
}

// Convenience form on raw vectors with cosine (optionally modified) scoring;
// candidates one per row, positive at `target`.
template <typename S>
S nce_loss(const VecX<S>& query, const MatX<S>& candidates, int target, S tau, bool modified,
           S alpha, S theta) {
  VecX<S> scores(candidates.rows());
  for (Eigen::Index j = 0; j < candidates.rows(); ++j) {
    const S s = cosine_score<S>(query, candidates.row(j).transpose());
    scores(j) = modified ? modified_score(s, j == target, alpha, theta) : s;
  }
  return nce_loss(scores, target, tau);
}

// --- row normalization with backward ----------------------------------------

template <typename S>
struct RowNormalized {
  MatX<S> U;
  VecX<S> norms;  // clamped to eps
};

template <typename S>
RowNormalized<S> row_normalize(const MatX<S>& V) {
  RowNormalized<S> out;
  out.U.resizeLike(V);
  out.norms.resize(V.rows());
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    const S n = std::max(V.row(i).norm(), static_cast<S>(kNormEps));
    out.norms(i) = n;
    out.U.row(i) = V.row(i) / n;
  }
  return out;
}

// dV given dU for U = V / max(||V||, eps).
template <typename S>
MatX<S> row_normalize_backward(const RowNormalized<S>& rn, const MatX<S>& dU) {
  MatX<S> dV;
  dV.resizeLike(dU);
  for (Eigen::Index i = 0; i < dU.rows(); ++i) {
    const S proj = rn.U.row(i).dot(dU.row(i));
    dV.row(i) = (dU.row(i) - proj * rn.U.row(i)) / rn.norms(i);
  }
  return dV;
}

// --- PatchNCE ----------------------------------------------------------------

template <typename S>
struct PairNceResult {
  S value = S(0);
  MatX<S> dV;     // grad w.r.t. query embeddings
  MatX<S> dVhat;  // grad w.r.t. candidate embeddings
};

// One layer of Eq. 4: queries V (rows) against candidates Vhat (rows) at the
// same indices, positive on the diagonal; sum of per-query NCE terms.
template <typename S>
PairNceResult<S> patchnce_layer_loss(const MatX<S>& V, const MatX<S>& Vhat, S tau, bool modified,
                                     S alpha, S theta) {
  require(V.rows() == Vhat.rows() && V.cols() == Vhat.cols(),
          "patchnce_layer_loss: embedding shape mismatch");
  const Eigen::Index n = V.rows();
  require(n >= 2, "patchnce_layer_loss: need at least 2 features");

  const RowNormalized<S> qn = row_normalize(V);
  const RowNormalized<S> cn = row_normalize(Vhat);
  MatX<S> scores;
  scores.noalias() = qn.U * cn.U.transpose();

  // Case-law mask fixed from forward scores (piecewise-constant factor).
  MatX<S> factor = MatX<S>::Ones(n, n);
  if (modified) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && scores(i, j) > theta) {
          factor(i, j) = alpha;
          scores(i, j) *= alpha;
        }
  }

  PairNceResult<S> out;
  MatX<S> dS = MatX<S>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VecX<S> x = scores.row(i).transpose() / tau;
    const S m = x.maxCoeff();
    VecX<S> p = (x.array() - m).exp();
    const S lse = m + std::log(p.sum());
    p /= p.sum();
    out.value += lse - x(i);
    // d(loss_i)/d(scores_i) = (softmax - onehot)/tau
    dS.row(i) = (p.transpose() / tau);
    dS(i, i) -= S(1) / tau;
  }
  dS.array() *= factor.array();

  MatX<S> dU;
  dU.noalias() = dS * cn.U;
  MatX<S> dUhat;
  dUhat.noalias() = dS.transpose() * qn.U;
  out.dV = row_normalize_backward(qn, dU);
  out.dVhat = row_normalize_backward(cn, dUhat);
  return out;
}

template <typename S>
struct PatchNceResult {
  S value = S(0);
  std::vector<MatX<S>> dV;
  std::vector<MatX<S>> dVhat;
};

// Eq. 4 across layers: plain double sum (layers x queries).
template <typename S>
PatchNceResult<S> patchnce_loss(const std::vector<MatX<S>>& V_layers,
                                const std::vector<MatX<S>>& Vhat_layers, S tau, bool modified,
                                S alpha, S theta) {
  require(V_layers.size() == Vhat_layers.size(), "patchnce_loss: layer count mismatch");
  require(!V_layers.empty(), "patchnce_loss: no layers");
  PatchNceResult<S> out;
  for (std::size_t l = 0; l < V_layers.size(); ++l) {
    PairNceResult<S> r = patchnce_layer_loss(V_layers[l], Vhat_layers[l], tau, modified, alpha, theta);
    out.value += r.value;
    out.dV.push_back(std::move(r.dV));
    out.dVhat.push_back(std::move(r.dVhat));
  }
  return out;
}

// --- SegNCE -------------------------------------------------------------------

// Eq. 6 for one query over raw embeddings: positives are same-class partners
// (self excluded from the positives); candidates are all rows, with self
// excluded from the denominator when include_self is false. Returns nullopt
// (SKIP) when the query has no partner.
template <typename S>
std::optional<S> segnce_query_loss(const MatX<S>& Z, int i, const std::vector<int>& labels, S tau,
                                   bool include_self) {
  const Eigen::Index n = Z.rows();
  require(static_cast<Eigen::Index>(labels.size()) == n, "segnce_query_loss: label count mismatch");
  require(i >= 0 && i < n, "segnce_query_loss: query index out of range");
  const RowNormalized<S> rn = row_normalize(Z);
  VecX<S> x(n);
  for (Eigen::Index j = 0; j < n; ++j) x(j) = rn.U.row(i).dot(rn.U.row(j)) / tau;

  std::vector<int> positives;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
      positives.push_back(static_cast<int>(j));
  if (positives.empty()) return std::nullopt;

  S m = -std::numeric_limits<S>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    if (include_self || j != i) m = std::max(m, x(j));
  S sum = S(0);
  for (Eigen::Index j = 0; j < n; ++j)
    if (include_self || j != i) sum += std::exp(x(j) - m);
  const S lse = m + std::log(sum);

  S acc = S(0);
  for (int j : positives) acc += lse - x(j);
  return acc / static_cast<S>(positives.size());
}

template <typename S>
struct SegNceLayerResult {
  S value = S(0);
  MatX<S> dZ;              // grad w.r.t. raw embeddings
  int active_queries = 0;  // non-SKIP count
  bool all_skipped = false;
};

// Mean over non-SKIP queries of the per-query loss; gradient flows through
// every appearance of each embedding (query, positive, and candidate roles).
template <typename S>
SegNceLayerResult<S> segnce_layer_loss(const MatX<S>& Z, const std::vector<int>& labels, S tau,
                                       bool include_self) {
  const Eigen::Index n = Z.rows();
  require(static_cast<Eigen::Index>(labels.size()) == n, "segnce_layer_loss: label count mismatch");
  SegNceLayerResult<S> out;
  out.dZ = MatX<S>::Zero(n, Z.cols());
  if (n == 0) {
    out.all_skipped = true;
    return out;
  }

  const RowNormalized<S> rn = row_normalize(Z);
  MatX<S> scores;
  scores.noalias() = rn.U * rn.U.transpose();

  // First pass: count active queries so the mean weight is known.
  std::vector<std::vector<int>> positives(static_cast<std::size_t>(n));
  int active = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)])
        positives[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
    if (!positives[static_cast<std::size_t>(i)].empty()) ++active;
  }
  out.active_queries = active;
  if (active == 0) {
    out.all_skipped = true;
    return out;
  }
  const S wq = S(1) / static_cast<S>(active);

  MatX<S> dS = MatX<S>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pos = positives[static_cast<std::size_t>(i)];
    if (pos.empty()) continue;
    VecX<S> x = scores.row(i).transpose() / tau;
    S m = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (include_self || j != i) m = std::max(m, x(j));
    VecX<S> e = VecX<S>::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j)
      if (include_self || j != i) e(j) = std::exp(x(j) - m);
    const S Zsum = e.sum();
    const S lse = m + std::log(Zsum);

    const S inv_p = S(1) / static_cast<S>(pos.size());
    S value_i = S(0);
    for (int j : pos) value_i += lse - x(j);
    out.value += wq * value_i * inv_p;

    // d/d(x_j) of mean_pos (lse - x_pos) = softmax_j - uniform-target_j
    for (Eigen::Index j = 0; j < n; ++j) dS(i, j) += wq * (e(j) / Zsum) / tau;
    for (int j : pos) dS(i, j) -= wq * inv_p / tau;
  }

  // scores = U U^T: both occurrences contribute.
  MatX<S> dU;
  dU.noalias() = (dS + dS.transpose()) * rn.U;
  out.dZ = row_normalize_backward(rn, dU);
  return out;
}

template <typename S>
struct SegNceResult {
  S value = S(0);
  std::vector<MatX<S>> dZ;
  int skipped_layers = 0;
};

// Eq. 7 scope: input-image features only (callers enforce the data source).
// Per layer the mean over non-SKIP queries; layers sum. A layer where every
// query skips contributes 0 and emits a warning.
template <typename S>
SegNceResult<S> segnce_loss(const std::vector<MatX<S>>& Z_layers,
                            const std::vector<std::vector<int>>& labels_per_layer, S tau,
                            bool include_self) {
  require(Z_layers.size() == labels_per_layer.size(), "segnce_loss: layer count mismatch");
  require(!Z_layers.empty(), "segnce_loss: no layers");
  SegNceResult<S> out;
  for (std::size_t l = 0; l < Z_layers.size(); ++l) {
    SegNceLayerResult<S> r =
        segnce_layer_loss(Z_layers[l], labels_per_layer[l], tau, include_self);
    if (r.all_skipped) {
      ++out.skipped_layers;
      std::cerr << "warning: segnce layer " << l << ": all queries skipped (no same-class partners)\n";
    }
    out.value += r.value;
    out.dZ.push_back(std::move(r.dZ));
  }
  return out;
}

// --- GAN ----------------------------------------------------------------------

template <typename S>
struct GanLossResult {
  S value = S(0);       // Eq. 1 value; G minimizes +value, D minimizes -value
  VecX<S> d_real;       // d(value)/d(real scores)
  VecX<S> d_fake;       // d(value)/d(fake scores)
  S mean_real = S(0);
  S mean_fake = S(0);
};

template <typename S>
GanLossResult<S> gan_loss(const VecX<S>& real_scores, const VecX<S>& fake_scores) {
  require(real_scores.size() > 0 && fake_scores.size() > 0, "gan_loss: empty score set");
  GanLossResult<S> out;
  out.d_real = VecX<S>::Zero(real_scores.size());
  out.d_fake = VecX<S>::Zero(fake_scores.size());
  const S eps = static_cast<S>(kGanClampEps);
  const S lo = eps, hi = S(1) - eps;
  const S kr = S(1) / static_cast<S>(real_scores.size());
  const S kf = S(1) / static_cast<S>(fake_scores.size());
  for (Eigen::Index i = 0; i < real_scores.size(); ++i) {
    const S s = std::min(std::max(real_scores(i), lo), hi);
    out.value += kr * std::log(s);
    if (real_scores(i) > lo && real_scores(i) < hi) out.d_real(i) = kr / s;
    out.mean_real += kr * real_scores(i);
  }
  for (Eigen::Index j = 0; j < fake_scores.size(); ++j) {
    const S s = std::min(std::max(fake_scores(j), lo), hi);
    out.value += kf * std::log(S(1) - s);
    if (fake_scores(j) > lo && fake_scores(j) < hi) out.d_fake(j) = -kf / (S(1) - s);
    out.mean_fake += kf * fake_scores(j);
  }
  return out;
}

// --- composite ------------------------------------------------------------------

struct LossWeights {
  double w_patchnce_A = 1.0;
  double w_patchnce_idB = 1.0;
  double w_segnce = 1.0;
  double w_gan = 1.0;
};

struct LossReport {
  double gan_G = 0.0;   // +L_GAN (the generator's view, Eq. 8)
  double gan_D = 0.0;   // -L_GAN (Eq. 9)
  double patchnce_A = 0.0;
  double patchnce_idB = 0.0;
  double segnce = 0.0;
  double total_G = 0.0;
  double total_D = 0.0;
};

// total_G = w1*patchnce_A + w2*patchnce_idB + w3*segnce + w4*gan; total_D = -gan.
inline LossReport total_losses(double patchnce_A, double patchnce_idB, double segnce, double gan,
                               const LossWeights& w) {
  const auto check = [](double v, const char* name) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite loss component: ") + name);
  };
  check(patchnce_A, "patchnce_A");
  check(patchnce_idB, "patchnce_idB");
  check(segnce, "segnce");
  check(gan, "gan");
  LossReport r;
  r.patchnce_A = patchnce_A;
  r.patchnce_idB = patchnce_idB;
  r.segnce = segnce;
  r.gan_G = gan;
  r.gan_D = -gan;
  r.total_G = w.w_patchnce_A * patchnce_A + w.w_patchnce_idB * patchnce_idB +
              w.w_segnce * segnce + w.w_gan * gan;
  r.total_D = -gan;
  return r;
}

}  // namespace mango
