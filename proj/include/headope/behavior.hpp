#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "headope/model.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// Feature encoding x_t = (turn features, user attributes, previous outcome).
// ---------------------------------------------------------------------------

struct FeatureVector {
  static constexpr int kDim = 9;

  double turn_index = 1.0;
  double latency_seconds = 0.0;   // standardized inside fitted models
  double response_chars = 0.0;    // standardized inside fitted models
  double has_citation = 0.0;
  double has_structure = 0.0;
  double user_asked_explain = 0.0;
  double literacy_high = 0.0;
  double efficacy_high = 0.0;
  double prev_outcome = 0.0;      // -1 failure, 0 not invoked, +1 success

  std::array<double, kDim> values() const {
    return {turn_index,       latency_seconds, response_chars, has_citation, has_structure,
            user_asked_explain, literacy_high,   efficacy_high,  prev_outcome};
  }
};

double outcome_signal(ToolOutcome o);  // {-1, 0, +1}

FeatureVector featurize(const UserProfile& user, const TurnFeatures& features,
                        ToolOutcome prev_outcome);

// Per-turn feature vectors for a session, threading the previous-turn outcome.
std::vector<FeatureVector> featurize_session(const Session& s);

enum class Head : uint8_t { Tool = 0, Style = 1 };
inline int head_cardinality(Head h) { return h == Head::Tool ? kNumTools : kNumStyles; }

// ---------------------------------------------------------------------------
// Calibration / ranking diagnostics.
// ---------------------------------------------------------------------------

// Expected calibration error over n_bins equal-width confidence bins:
// sum_b (|bin_b|/N) * |mean(label) - mean(prob)| within each bin.
// For multiclass heads, call with max-prob confidences and correctness labels.
double ece(std::span<const double> predicted_probs, std::span<const int> observed_labels,
           int n_bins = 10);

// Probability a random positive outranks a random negative; ties count 0.5.
// Requires at least one positive and one negative label.
double auc(std::span<const double> scores, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Cross-fitted, calibrated propensity models.
// ---------------------------------------------------------------------------

struct PropensityFitOptions {
  int n_folds = 5;          // session-level folds
  double l2 = 1.0;          // ridge strength on the logistic fit
  double floor_eps = 0.01;  // uniform-mixing floor applied to predictions
  uint64_t seed = 0;        // fold-assignment substream
};

// Picks the default fold count for a log: 5, or 3 when sessions < 10.
int default_n_folds(size_t n_sessions);

// Reconstructed logging propensities for one decision head. Holds the
// out-of-fold calibrated propensity of every logged turn, in session-major
// turn order, plus fold bookkeeping so cross-fitting honesty is checkable.
struct HeadPropensityModel {
  Head head = Head::Tool;
  int n_classes = 0;
  double floor_eps = 0.01;
  bool degenerate = false;  // a single action observed overall

  // propensities[i][c]: calibrated P(class c | x_i), floored, sums to 1.
  std::vector<std::array<double, kNumTools>> propensities;
  std::vector<int> observed_class;   // logged action per turn
  std::vector<int> fold_of_turn;     // fold whose held-out set contains the turn
  std::vector<int> fold_of_session;  // per session

  double oof_ece = 0.0;  // max-prob ECE of the out-of-fold predictions
  size_t floor_hits = 0; // predictions that hit the floor before mixing

  std::array<double, kNumTools> at(size_t turn) const;
  double logged_propensity(size_t turn) const;
};

// Fits cross-fitted multinomial-logistic propensities with Platt-style
// per-class calibration on out-of-fold predictions. Folds are assigned at
// session level; every turn's propensity comes from a model that never saw
// its session. Throws ContractError when n_folds < 2 or sessions < n_folds.
HeadPropensityModel fit_head_model(std::span<const Session> sessions, Head head,
                                   const PropensityFitOptions& options);

// Cross-fitted P(rating observed | x_t), clamped to [eps, 1-eps].
struct RatingPropensityModel {
  double floor_eps = 0.01;
  bool no_selection = false;  // all turns rated: constant model, AIPW reduces to plain weighting
  std::vector<double> propensities;  // per turn, session-major order
  std::vector<int> rated;            // observed missingness labels
  std::vector<int> fold_of_turn;
  double oof_auc = 0.5;  // 0.5 when degenerate

  double at(size_t turn) const { return propensities.at(turn); }
};

RatingPropensityModel fit_rating_propensity(std::span<const Session> sessions,
                                            const PropensityFitOptions& options);

// ---------------------------------------------------------------------------
// Low-level fitting primitives (exposed for tests and the outcome model).
// ---------------------------------------------------------------------------

// Regularized multinomial logistic regression (softmax with reference class),
// Newton-optimized. Inputs are raw feature rows; latency/chars columns are
// standardized internally with training-set statistics.
class LinearSoftmaxModel {
 public:
  void fit(const std::vector<std::array<double, FeatureVector::kDim>>& rows,
           const std::vector<int>& labels, int n_classes, double l2);
  std::vector<double> predict_probs(const std::array<double, FeatureVector::kDim>& row) const;
  // Unnormalized class scores (reference class fixed at 0).
  std::vector<double> class_scores(const std::array<double, FeatureVector::kDim>& row) const;
  int n_classes() const { return n_classes_; }

 private:
  int n_classes_ = 0;
  std::vector<double> coef_;            // (n_classes-1) x (kDim+1), row-major
  std::array<double, FeatureVector::kDim> center_{};
  std::array<double, FeatureVector::kDim> scale_{};

  std::array<double, FeatureVector::kDim> transform(
      const std::array<double, FeatureVector::kDim>& row) const;
};

// Two-parameter sigmoid recalibration p' = sigmoid(a * logit(p) + b),
// fitted by Newton on (prediction, binary label) pairs.
struct PlattMap {
  double a = 1.0;
  double b = 0.0;
  bool identity = true;

  double apply(double p) const;
  static PlattMap fit(std::span<const double> probs, std::span<const int> labels);
};

// Uniform mixing toward the K-simplex center: p' = (1 - K*eps) * p + eps.
// Guarantees every entry >= eps while preserving the sum.
void floor_distribution(std::span<double> probs, double eps);

}  // namespace headope
