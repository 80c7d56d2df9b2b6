#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nudge/feature_extraction.hpp"
#include "nudge/time_utils.hpp"

namespace nudge {

enum class ModelBackend { ConstantMean, LeastSquares, BayesianRidge, GradientBoosting };

std::string_view to_string(ModelBackend backend);
ModelBackend backend_from_string(std::string_view text);

/// Training knobs. The defaults are the conventional ones; nothing here is
/// tuned per dataset.
struct FitConfig {
    // gradient boosting
    int n_estimators = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_split = 2;
    // least squares
    double ridge_jitter = 1e-8;
    // bayesian ridge
    double br_alpha_init = 1e-6;
    double br_lambda_init = 1e-6;
    double br_tolerance = 1e-6;
    int br_max_iterations = 300;
    // prediction clamp; mirrors the training lifetime band
    double clamp_lo = 24.0;
    double clamp_hi = 336.0;
};

struct TreeNode {
    int feature = -1;        ///< split feature index; -1 for leaves
    double threshold = 0.0;  ///< goes left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;      ///< leaf prediction (hours of residual)

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// A binary regression tree stored as a flat node array with the root at 0.
struct RegressionTree {
    std::vector<TreeNode> nodes;
    int max_depth = 0;

    double predict(std::span<const double> x) const;
    bool operator==(const RegressionTree&) const = default;
};

/// A fitted lifetime regressor plus its training metadata. Immutable and
/// shareable after fit.
struct TrainedModel {
    ModelBackend backend = ModelBackend::ConstantMean;
    std::vector<std::string> feature_schema;
    Instant trained_at{};
    Instant window_start{};
    Instant window_end{};
    std::optional<std::string> scope_repo;  ///< nullopt = global model

    double mean = 0.0;  ///< ConstantMean value; GradientBoosting base score
    std::vector<double> weights;
    double intercept = 0.0;
    double br_alpha = 0.0;   ///< noise precision after convergence
    double br_lambda = 0.0;  ///< weight precision after convergence
    std::vector<RegressionTree> trees;
    double learning_rate = 0.1;
    double clamp_lo = 24.0;
    double clamp_hi = 336.0;

    /// Prediction on a raw value span, clamped to [clamp_lo, clamp_hi].
    double predict_values(std::span<const double> x) const;
    /// Prediction on a FeatureVector; throws SchemaMismatch when the vector
    /// arity does not match the schema.
    double predict(const FeatureVector& x) const;

    bool operator==(const TrainedModel&) const = default;
};

/// Fits one backend on (X, y). y values must be finite and inside the
/// training band; features must be finite. ConstantMean accepts a single
/// sample; the other backends need at least 10.
/// Throws InsufficientData / NonFiniteInput.
TrainedModel fit(ModelBackend backend, const std::vector<FeatureVector>& X,
                 const std::vector<double>& y, const FitConfig& config = {});

/// fit() on plain rows, for callers that assemble matrices directly.
TrainedModel fit_values(ModelBackend backend, const std::vector<std::vector<double>>& X,
                        const std::vector<double>& y, const FitConfig& config = {});

struct EvalMetrics {
    double mae_hours = 0.0;
    double mape = 0.0;
    int n = 0;
    std::vector<std::pair<double, double>> per_fold;  ///< (mae, mape) per fold

    bool operator==(const EvalMetrics&) const = default;
};

/// One-time k-fold cross validation (no repetition). Partitions are a seeded
/// shuffle with sizes differing by at most one; every sample is predicted
/// exactly once. Throws InsufficientData when n < k.
EvalMetrics cross_validate(ModelBackend backend, const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y, int k = 10,
                           std::uint64_t seed = 0, const FitConfig& config = {});

/// Percentage gains of a model over the constant baseline:
/// (constant - model) / constant * 100, for MAE and MAPE.
std::pair<double, double> improvement_vs_constant(const EvalMetrics& model,
                                                  const EvalMetrics& constant);

constexpr int kModelFormatVersion = 1;

/// JSON serialization with bit-exact double round-trip.
std::string serialize_model(const TrainedModel& model);
/// Throws VersionMismatch on an unknown format version, CorruptModel on
/// anything unparsable.
TrainedModel deserialize_model(std::string_view bytes);

/// Deterministic Fisher-Yates shuffle (std::shuffle is not pinned across
/// standard libraries).
void deterministic_shuffle(std::vector<std::size_t>& indices, std::uint64_t seed);

}  // namespace nudge
