#include "headope/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "headope/rng.hpp"

namespace headope {

namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit(double p) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log(p / (1.0 - p));
}

}  // namespace

double outcome_signal(ToolOutcome o) {
  switch (o) {
    case ToolOutcome::Failure: return -1.0;
    case ToolOutcome::NotInvoked: return 0.0;
    case ToolOutcome::Success: return 1.0;
  }
  throw ContractError("invalid ToolOutcome");
}

FeatureVector featurize(const UserProfile& user, const TurnFeatures& f, ToolOutcome prev_outcome) {
  FeatureVector x;
  x.turn_index = static_cast<double>(f.turn_index);
  x.latency_seconds = f.latency_seconds;
  x.response_chars = static_cast<double>(f.response_chars);
  x.has_citation = f.has_citation ? 1.0 : 0.0;
  x.has_structure = f.has_structure ? 1.0 : 0.0;
  x.user_asked_explain = f.user_asked_explain ? 1.0 : 0.0;
  x.literacy_high = user.literacy == Literacy::High ? 1.0 : 0.0;
  x.efficacy_high = user.efficacy == Efficacy::High ? 1.0 : 0.0;
  x.prev_outcome = outcome_signal(prev_outcome);
  return x;
}

std::vector<FeatureVector> featurize_session(const Session& s) {
  std::vector<FeatureVector> xs;
  xs.reserve(s.turns.size());
  ToolOutcome prev = ToolOutcome::NotInvoked;
  for (const LoggedTurn& t : s.turns) {
    xs.push_back(featurize(s.user, t.features, prev));
    prev = t.outcome;
  }
  return xs;
}

// ---------------------------------------------------------------------------
// Diagnostics.
// ---------------------------------------------------------------------------

double ece(std::span<const double> probs, std::span<const int> labels, int n_bins) {
  if (probs.empty()) throw ContractError("ece: empty input");
  if (probs.size() != labels.size()) throw ContractError("ece: size mismatch");
  if (n_bins < 1) throw ContractError("ece: n_bins must be >= 1");

  std::vector<double> conf_sum(static_cast<size_t>(n_bins), 0.0);
  std::vector<double> label_sum(static_cast<size_t>(n_bins), 0.0);
  std::vector<size_t> count(static_cast<size_t>(n_bins), 0);
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("ece: probability outside [0,1]");
    auto b = static_cast<size_t>(std::min<int>(n_bins - 1, static_cast<int>(p * n_bins)));
    conf_sum[b] += p;
    label_sum[b] += labels[i] != 0 ? 1.0 : 0.0;
    ++count[b];
  }
  const auto n = static_cast<double>(probs.size());
  double e = 0.0;
  for (size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0) continue;
    const auto nb = static_cast<double>(count[b]);
    e += (nb / n) * std::abs(label_sum[b] / nb - conf_sum[b] / nb);
  }
  return e;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("auc: size mismatch");
  size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0 ? 1 : 0;
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw EstimationError("auc: needs at least one positive and one negative label");
  }

  // Rank-sum with average ranks over ties.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const auto np = static_cast<double>(n_pos);
  const auto nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// ---------------------------------------------------------------------------
// LinearSoftmaxModel.
// ---------------------------------------------------------------------------

std::array<double, FeatureVector::kDim> LinearSoftmaxModel::transform(
    const std::array<double, FeatureVector::kDim>& row) const {
  auto out = row;
  for (int d = 0; d < FeatureVector::kDim; ++d) {
    out[static_cast<size_t>(d)] = (row[static_cast<size_t>(d)] - center_[static_cast<size_t>(d)]) /
                                  scale_[static_cast<size_t>(d)];
  }
  return out;
}

void LinearSoftmaxModel::fit(const std::vector<std::array<double, FeatureVector::kDim>>& rows,
                             const std::vector<int>& labels, int n_classes, double l2) {
  if (rows.empty() || rows.size() != labels.size()) throw ContractError("softmax fit: bad inputs");
  if (n_classes < 2) throw ContractError("softmax fit: n_classes must be >= 2");
  n_classes_ = n_classes;

  const auto n = static_cast<Eigen::Index>(rows.size());
  constexpr int kD = FeatureVector::kDim;
  const int d1 = kD + 1;  // + intercept

  // Standardize the two continuous columns (latency, chars) with training stats.
  center_.fill(0.0);
  scale_.fill(1.0);
  for (int col : {1, 2}) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[static_cast<size_t>(col)];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows) {
      const double dv = r[static_cast<size_t>(col)] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(rows.size());
    center_[static_cast<size_t>(col)] = mean;
    scale_[static_cast<size_t>(col)] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  Eigen::MatrixXd X(n, d1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = transform(rows[static_cast<size_t>(i)]);
    X(i, 0) = 1.0;
    for (int d = 0; d < kD; ++d) X(i, d + 1) = z[static_cast<size_t>(d)];
  }

  const int km1 = n_classes - 1;
  const int n_params = km1 * d1;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n_params);

  auto probs_for = [&](const Eigen::VectorXd& weights, Eigen::Index i) {
    Eigen::VectorXd s(n_classes_);
    for (int k = 0; k < km1; ++k) {
      s(k) = X.row(i).dot(weights.segment(k * d1, d1));
    }
    s(km1) = 0.0;
    const double m = s.maxCoeff();
    Eigen::VectorXd p = (s.array() - m).exp();
    p /= p.sum();
    return p;
  };

  auto nll = [&](const Eigen::VectorXd& weights) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd p = probs_for(weights, i);
      v -= std::log(std::max(p(labels[static_cast<size_t>(i)]), kProbClamp));
    }
    // No penalty on intercepts.
    for (int k = 0; k < km1; ++k) {
      v += 0.5 * l2 * weights.segment(k * d1 + 1, kD).squaredNorm();
    }
    return v;
  };

  double current = nll(w);
  for (int iter = 0; iter < 60; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n_params, n_params);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd p = probs_for(w, i);
      const int y = labels[static_cast<size_t>(i)];
      for (int k = 0; k < km1; ++k) {
        const double gk = p(k) - (y == k ? 1.0 : 0.0);
        grad.segment(k * d1, d1) += gk * X.row(i).transpose();
        for (int l = 0; l < km1; ++l) {
          const double h = p(k) * ((k == l ? 1.0 : 0.0) - p(l));
          hess.block(k * d1, l * d1, d1, d1) += h * X.row(i).transpose() * X.row(i);
        }
      }
    }
    for (int k = 0; k < km1; ++k) {
      grad.segment(k * d1 + 1, kD) += l2 * w.segment(k * d1 + 1, kD);
      for (int d = 1; d < d1; ++d) hess(k * d1 + d, k * d1 + d) += l2;
    }
    // Levenberg damping keeps the step sane when the Hessian is near-singular.
    hess.diagonal().array() += 1e-8;

    if (grad.norm() < 1e-8 * static_cast<double>(n)) break;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h < 12; ++h) {
      Eigen::VectorXd cand = w - scale * step;
      const double v = nll(cand);
      if (v <= current + 1e-12) {
        w = std::move(cand);
        current = v;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }

  coef_.assign(w.data(), w.data() + n_params);
}

std::vector<double> LinearSoftmaxModel::class_scores(
    const std::array<double, FeatureVector::kDim>& row) const {
  if (n_classes_ == 0) throw ContractError("softmax model not fitted");
  const auto z = transform(row);
  const int d1 = FeatureVector::kDim + 1;
  std::vector<double> s(static_cast<size_t>(n_classes_), 0.0);
  for (int k = 0; k < n_classes_ - 1; ++k) {
    double acc = coef_[static_cast<size_t>(k * d1)];
    for (int d = 0; d < FeatureVector::kDim; ++d) {
      acc += coef_[static_cast<size_t>(k * d1 + d + 1)] * z[static_cast<size_t>(d)];
    }
    s[static_cast<size_t>(k)] = acc;
  }
  return s;
}

std::vector<double> LinearSoftmaxModel::predict_probs(
    const std::array<double, FeatureVector::kDim>& row) const {
  auto s = class_scores(row);
  const double m = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double& v : s) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : s) v /= sum;
  return s;
}

// ---------------------------------------------------------------------------
// Platt scaling.
// ---------------------------------------------------------------------------

double PlattMap::apply(double p) const {
  if (identity) return p;
  return sigmoid(a * logit(p) + b);
}

PlattMap PlattMap::fit(std::span<const double> probs, std::span<const int> labels) {
  PlattMap map;
  size_t pos = 0;
  for (int y : labels) pos += y != 0 ? 1 : 0;
  // Degenerate label sets cannot support a 2-parameter fit; keep identity.
  if (probs.size() < 8 || pos == 0 || pos == labels.size()) return map;

  double a = 1.0, b = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    double g_a = 0.0, g_b = 0.0, h_aa = 0.0, h_ab = 0.0, h_bb = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      const double z = logit(probs[i]);
      const double p = sigmoid(a * z + b);
      const double r = p - (labels[i] != 0 ? 1.0 : 0.0);
      g_a += r * z;
      g_b += r;
      const double wgt = std::max(p * (1.0 - p), 1e-12);
      h_aa += wgt * z * z;
      h_ab += wgt * z;
      h_bb += wgt;
    }
    // Light ridge so a stays near 1 on tiny calibration sets.
    g_a += 1e-3 * (a - 1.0);
    h_aa += 1e-3;
    g_b += 1e-3 * b;
    h_bb += 1e-3;

    const double det = h_aa * h_bb - h_ab * h_ab;
    if (std::abs(det) < 1e-12) break;
    const double da = (g_a * h_bb - g_b * h_ab) / det;
    const double db = (g_b * h_aa - g_a * h_ab) / det;
    a -= da;
    b -= db;
    if (std::abs(da) + std::abs(db) < 1e-10) break;
  }
  if (!std::isfinite(a) || !std::isfinite(b)) return map;
  map.a = a;
  map.b = b;
  map.identity = false;
  return map;
}

void floor_distribution(std::span<double> probs, double eps) {
  const auto k = static_cast<double>(probs.size());
  if (eps < 0.0 || eps * k >= 1.0) throw ContractError("floor_distribution: bad eps");
  for (double& p : probs) p = (1.0 - k * eps) * p + eps;
}

// ---------------------------------------------------------------------------
// Cross-fitted head propensities.
// ---------------------------------------------------------------------------

int default_n_folds(size_t n_sessions) { return n_sessions < 10 ? 3 : 5; }

namespace {

std::vector<int> assign_session_folds(size_t n_sessions, int n_folds, uint64_t seed) {
  std::vector<int> perm(n_sessions);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::substream(seed, "folds");
  rng.shuffle(std::span<int>(perm));
  std::vector<int> fold(n_sessions, 0);
  for (size_t i = 0; i < n_sessions; ++i) {
    fold[static_cast<size_t>(perm[i])] = static_cast<int>(i % static_cast<size_t>(n_folds));
  }
  return fold;
}

struct FlatLog {
  std::vector<std::array<double, FeatureVector::kDim>> rows;
  std::vector<int> session_of_turn;
};

FlatLog flatten(std::span<const Session> sessions) {
  FlatLog flat;
  for (size_t s = 0; s < sessions.size(); ++s) {
    for (const FeatureVector& x : featurize_session(sessions[s])) {
      flat.rows.push_back(x.values());
      flat.session_of_turn.push_back(static_cast<int>(s));
    }
  }
  return flat;
}

void check_fit_preconditions(std::span<const Session> sessions, const PropensityFitOptions& opt) {
  if (opt.n_folds < 2) throw ContractError("cross-fitting requires >= 2 folds");
  if (sessions.size() < static_cast<size_t>(opt.n_folds)) {
    throw ContractError("cross-fitting requires at least n_folds sessions");
  }
  if (opt.floor_eps <= 0.0 || opt.floor_eps >= 0.2) {
    throw ContractError("floor_eps must be in (0, 0.2)");
  }
}

}  // namespace

std::array<double, kNumTools> HeadPropensityModel::at(size_t turn) const {
  return propensities.at(turn);
}

double HeadPropensityModel::logged_propensity(size_t turn) const {
  return propensities.at(turn)[static_cast<size_t>(observed_class.at(turn))];
}

HeadPropensityModel fit_head_model(std::span<const Session> sessions, Head head,
                                   const PropensityFitOptions& opt) {
  check_fit_preconditions(sessions, opt);

  HeadPropensityModel model;
  model.head = head;
  model.n_classes = head_cardinality(head);
  model.floor_eps = opt.floor_eps;

  FlatLog flat = flatten(sessions);
  const size_t n = flat.rows.size();
  if (n == 0) throw ContractError("fit_head_model: no turns");

  for (const Session& s : sessions) {
    for (const LoggedTurn& t : s.turns) {
      model.observed_class.push_back(head == Head::Tool ? static_cast<int>(t.action.tool)
                                                        : static_cast<int>(t.action.style));
    }
  }

  model.fold_of_session = assign_session_folds(sessions.size(), opt.n_folds, opt.seed);
  model.fold_of_turn.resize(n);
  for (size_t i = 0; i < n; ++i) {
    model.fold_of_turn[i] =
        model.fold_of_session[static_cast<size_t>(flat.session_of_turn[i])];
  }

  std::array<size_t, kNumTools> class_counts{};
  for (int y : model.observed_class) ++class_counts[static_cast<size_t>(y)];
  int observed_classes = 0;
  for (int c = 0; c < model.n_classes; ++c) {
    if (class_counts[static_cast<size_t>(c)] > 0) ++observed_classes;
  }

  model.propensities.assign(n, {});
  const auto k = static_cast<size_t>(model.n_classes);

  if (observed_classes < 2) {
    // Degenerate head: one action observed everywhere. Emit the floored
    // point mass and flag it; downstream ratios stay bounded by eps.
    model.degenerate = true;
    int the_class = 0;
    for (int c = 0; c < model.n_classes; ++c) {
      if (class_counts[static_cast<size_t>(c)] > 0) the_class = c;
    }
    for (size_t i = 0; i < n; ++i) {
      std::array<double, kNumTools> p{};
      p[static_cast<size_t>(the_class)] = 1.0;
      floor_distribution(std::span<double>(p.data(), k), opt.floor_eps);
      model.propensities[i] = p;
    }
  } else {
    // Raw out-of-fold probabilities.
    std::vector<std::vector<double>> raw(n, std::vector<double>(k, 0.0));
    for (int f = 0; f < opt.n_folds; ++f) {
      std::vector<std::array<double, FeatureVector::kDim>> train_rows;
      std::vector<int> train_labels;
      for (size_t i = 0; i < n; ++i) {
        if (model.fold_of_turn[i] != f) {
          train_rows.push_back(flat.rows[i]);
          train_labels.push_back(model.observed_class[i]);
        }
      }
      if (train_rows.empty()) throw ContractError("fit_head_model: empty training fold");
      LinearSoftmaxModel fold_model;
      fold_model.fit(train_rows, train_labels, model.n_classes, opt.l2);
      for (size_t i = 0; i < n; ++i) {
        if (model.fold_of_turn[i] == f) raw[i] = fold_model.predict_probs(flat.rows[i]);
      }
    }

    // Per-class sigmoid recalibration fitted on the out-of-fold predictions.
    std::vector<PlattMap> maps(k);
    for (size_t c = 0; c < k; ++c) {
      std::vector<double> probs(n);
      std::vector<int> labels(n);
      for (size_t i = 0; i < n; ++i) {
        probs[i] = raw[i][c];
        labels[i] = model.observed_class[i] == static_cast<int>(c) ? 1 : 0;
      }
      maps[c] = PlattMap::fit(probs, labels);
    }

    for (size_t i = 0; i < n; ++i) {
      std::array<double, kNumTools> p{};
      double sum = 0.0;
      for (size_t c = 0; c < k; ++c) {
        p[c] = std::clamp(maps[c].apply(raw[i][c]), kProbClamp, 1.0);
        sum += p[c];
      }
      for (size_t c = 0; c < k; ++c) p[c] /= sum;
      for (size_t c = 0; c < k; ++c) {
        if (p[c] < opt.floor_eps) {
          ++model.floor_hits;
          break;
        }
      }
      floor_distribution(std::span<double>(p.data(), k), opt.floor_eps);
      model.propensities[i] = p;
    }
  }

  // Max-prob calibration diagnostic on the final propensities.
  std::vector<double> conf(n);
  std::vector<int> correct(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& p = model.propensities[i];
    const auto arg = static_cast<int>(std::max_element(p.begin(), p.begin() + k) - p.begin());
    conf[i] = p[static_cast<size_t>(arg)];
    correct[i] = model.observed_class[i] == arg ? 1 : 0;
  }
  model.oof_ece = ece(conf, correct, 10);
  return model;
}

RatingPropensityModel fit_rating_propensity(std::span<const Session> sessions,
                                            const PropensityFitOptions& opt) {
  check_fit_preconditions(sessions, opt);

  RatingPropensityModel model;
  model.floor_eps = opt.floor_eps;

  FlatLog flat = flatten(sessions);
  const size_t n = flat.rows.size();
  for (const Session& s : sessions) {
    for (const LoggedTurn& t : s.turns) model.rated.push_back(t.rated() ? 1 : 0);
  }

  const auto fold_of_session = assign_session_folds(sessions.size(), opt.n_folds, opt.seed);
  model.fold_of_turn.resize(n);
  for (size_t i = 0; i < n; ++i) {
    model.fold_of_turn[i] = fold_of_session[static_cast<size_t>(flat.session_of_turn[i])];
  }

  const size_t n_rated = static_cast<size_t>(
      std::count(model.rated.begin(), model.rated.end(), 1));
  if (n_rated == n || n_rated == 0) {
    // No missingness variation to learn from; constant model, flagged.
    model.no_selection = true;
    const double p = n_rated == n ? 1.0 - opt.floor_eps : opt.floor_eps;
    model.propensities.assign(n, p);
    model.oof_auc = 0.5;
    return model;
  }

  std::vector<double> raw(n, 0.0);
  for (int f = 0; f < opt.n_folds; ++f) {
    std::vector<std::array<double, FeatureVector::kDim>> train_rows;
    std::vector<int> train_labels;
    for (size_t i = 0; i < n; ++i) {
      if (model.fold_of_turn[i] != f) {
        train_rows.push_back(flat.rows[i]);
        train_labels.push_back(model.rated[i]);
      }
    }
    LinearSoftmaxModel fold_model;
    int observed = 0;
    for (int c : {0, 1}) {
      if (std::find(train_labels.begin(), train_labels.end(), c) != train_labels.end()) ++observed;
    }
    if (observed < 2) {
      const double p = std::count(train_labels.begin(), train_labels.end(), 1) > 0 ? 1.0 : 0.0;
      for (size_t i = 0; i < n; ++i) {
        if (model.fold_of_turn[i] == f) raw[i] = p;
      }
      continue;
    }
    fold_model.fit(train_rows, train_labels, 2, opt.l2);
    for (size_t i = 0; i < n; ++i) {
      if (model.fold_of_turn[i] == f) raw[i] = fold_model.predict_probs(flat.rows[i])[1];
    }
  }

  PlattMap map = PlattMap::fit(raw, model.rated);
  model.propensities.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double p = map.apply(raw[i]);
    model.propensities[i] = std::clamp(p, opt.floor_eps, 1.0 - opt.floor_eps);
  }
  model.oof_auc = auc(model.propensities, model.rated);
  return model;
}

}  // namespace headope
