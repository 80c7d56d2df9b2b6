#include "nudge/lifetime_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <json.hpp>

#include "nudge/errors.hpp"

namespace nudge {
namespace {

using nlohmann::json;

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

void check_inputs(ModelBackend backend, std::size_t n, std::size_t m,
                  const std::vector<std::vector<double>>& X,
                  const std::vector<double>& y) {
    if (n != y.size()) {
        throw InsufficientData("feature rows and targets differ in length");
    }
    const std::size_t minimum = backend == ModelBackend::ConstantMean ? 1 : 10;
    if (n < minimum) {
        throw InsufficientData("need at least " + std::to_string(minimum) +
                               " samples, got " + std::to_string(n));
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw NonFiniteInput("non-finite target value");
    }
    for (const std::vector<double>& row : X) {
        if (row.size() != m) throw SchemaMismatch("ragged feature matrix");
        for (double v : row) {
            if (!std::isfinite(v)) throw NonFiniteInput("non-finite feature value");
        }
    }
}

Eigen::MatrixXd design_matrix(const std::vector<std::vector<double>>& X) {
    const std::size_t n = X.size();
    const std::size_t m = X.empty() ? 0 : X[0].size();
    Eigen::MatrixXd mat(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) mat(i, j) = X[i][j];
    }
    return mat;
}

void fit_least_squares(TrainedModel& model, const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y, const FitConfig& config) {
    const std::size_t n = X.size();
    const std::size_t m = X[0].size();
    Eigen::MatrixXd design(n, m + 1);
    design.col(0).setOnes();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) design(i, j + 1) = X[i][j];
    }
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd moment = design.transpose() * target;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) {
        gram.diagonal().array() += config.ridge_jitter;
    }
    Eigen::VectorXd coef = gram.ldlt().solve(moment);
    if (!coef.allFinite()) {
        gram.diagonal().array() += config.ridge_jitter;
        coef = gram.ldlt().solve(moment);
    }
    model.intercept = coef(0);
    model.weights.assign(coef.data() + 1, coef.data() + 1 + m);
}

void fit_bayesian_ridge(TrainedModel& model, const std::vector<std::vector<double>>& X,
                        const std::vector<double>& y, const FitConfig& config) {
    const std::size_t n = X.size();
    const std::size_t m = X[0].size();
    Eigen::MatrixXd design = design_matrix(X);
    Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

    // Centering absorbs the intercept, as in the usual implementation.
    const Eigen::RowVectorXd x_mean = design.colwise().mean();
    const double y_mean = target.mean();
    design.rowwise() -= x_mean;
    target.array() -= y_mean;

    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd moment = design.transpose() * target;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd eigenvalues = eig.eigenvalues().cwiseMax(0.0);

    double alpha = config.br_alpha_init;   // noise precision
    double lambda = config.br_lambda_init; // weight precision
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
    for (int iter = 0; iter < config.br_max_iterations; ++iter) {
        Eigen::MatrixXd posterior = gram;
        posterior.diagonal().array() += lambda / alpha;
        const Eigen::VectorXd next = posterior.ldlt().solve(moment);

        const double rss = (target - design * next).squaredNorm();
        double gamma = 0.0;
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
            gamma += alpha * eigenvalues(i) / (lambda + alpha * eigenvalues(i));
        }
        const double delta = (next - coef).cwiseAbs().sum();
        coef = next;
        if (delta < config.br_tolerance) break;
        if (rss < 1e-12 || coef.squaredNorm() < 1e-300) break;
        lambda = (gamma + 1e-12) / (coef.squaredNorm() + 1e-300);
        alpha = (double(n) - gamma + 1e-12) / (rss + 1e-300);
    }
    model.weights.assign(coef.data(), coef.data() + m);
    model.intercept = y_mean - x_mean * coef;
    model.br_alpha = alpha;
    model.br_lambda = lambda;
}

// Greedy exact-split regression tree on squared error.
class TreeBuilder {
  public:
    TreeBuilder(const std::vector<std::vector<double>>& X,
                const std::vector<double>& residuals, const FitConfig& config)
        : X_(X), r_(residuals), config_(config) {}

    RegressionTree build() {
        RegressionTree tree;
        tree.max_depth = config_.max_depth;
        std::vector<std::size_t> all(r_.size());
        std::iota(all.begin(), all.end(), 0);
        grow(tree, all, 0);
        return tree;
    }

  private:
    int grow(RegressionTree& tree, const std::vector<std::size_t>& idx, int depth) {
        const int node_id = int(tree.nodes.size());
        tree.nodes.emplace_back();

        double sum = 0.0;
        for (std::size_t i : idx) sum += r_[i];
        const double node_mean = sum / double(idx.size());

        int best_feature = -1;
        double best_threshold = 0.0;
        // Baseline is the unsplit node; only strict impurity decreases split.
        double best_score = -(sum * sum) / double(idx.size()) - 1e-12;
        if (depth < config_.max_depth && idx.size() >= std::size_t(config_.min_samples_split)) {
            find_best_split(idx, best_feature, best_threshold, best_score);
        }
        if (best_feature < 0) {
            tree.nodes[node_id].value = node_mean;
            return node_id;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (X_[i][best_feature] <= best_threshold ? left : right).push_back(i);
        }
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        const int left_id = grow(tree, left, depth + 1);
        const int right_id = grow(tree, right, depth + 1);
        tree.nodes[node_id].left = left_id;
        tree.nodes[node_id].right = right_id;
        return node_id;
    }

    void find_best_split(const std::vector<std::size_t>& idx, int& best_feature,
                         double& best_threshold, double& best_score) const {
        const std::size_t m = X_[0].size();
        std::vector<std::size_t> order(idx);
        for (std::size_t f = 0; f < m; ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (X_[a][f] != X_[b][f]) return X_[a][f] < X_[b][f];
                return a < b;
            });
            double total = 0.0;
            for (std::size_t i : order) total += r_[i];
            double left_sum = 0.0;
            const double n = double(order.size());
            for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
                left_sum += r_[order[pos]];
                const double x_here = X_[order[pos]][f];
                const double x_next = X_[order[pos + 1]][f];
                if (x_here == x_next) continue;
                const double nl = double(pos + 1);
                const double nr = n - nl;
                // Maximizing between-group variance == minimizing SSE.
                const double right_sum = total - left_sum;
                const double score =
                    -(left_sum * left_sum / nl + right_sum * right_sum / nr);
                if (score < best_score) {
                    best_score = score;
                    best_feature = int(f);
                    best_threshold = x_here + (x_next - x_here) / 2.0;
                }
            }
        }
    }

    const std::vector<std::vector<double>>& X_;
    const std::vector<double>& r_;
    const FitConfig& config_;
};

void fit_gradient_boosting(TrainedModel& model, const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y, const FitConfig& config) {
    model.mean = mean_of(y);
    model.learning_rate = config.learning_rate;
    std::vector<double> current(y.size(), model.mean);
    std::vector<double> residuals(y.size());
    for (int round = 0; round < config.n_estimators; ++round) {
        for (std::size_t i = 0; i < y.size(); ++i) residuals[i] = y[i] - current[i];
        RegressionTree tree = TreeBuilder(X, residuals, config).build();
        for (std::size_t i = 0; i < y.size(); ++i) {
            current[i] += config.learning_rate * tree.predict(X[i]);
        }
        model.trees.push_back(std::move(tree));
    }
}

}  // namespace

std::string_view to_string(ModelBackend backend) {
    switch (backend) {
        case ModelBackend::ConstantMean: return "constant_mean";
        case ModelBackend::LeastSquares: return "least_squares";
        case ModelBackend::BayesianRidge: return "bayesian_ridge";
        case ModelBackend::GradientBoosting: return "gradient_boosting";
    }
    return "?";
}

ModelBackend backend_from_string(std::string_view text) {
    for (ModelBackend b : {ModelBackend::ConstantMean, ModelBackend::LeastSquares,
                           ModelBackend::BayesianRidge, ModelBackend::GradientBoosting}) {
        if (to_string(b) == text) return b;
    }
    throw ParseError("unknown model backend '" + std::string(text) + "'");
}

double RegressionTree::predict(std::span<const double> x) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        const TreeNode& n = nodes[node];
        node = x[std::size_t(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[node].value;
}

double TrainedModel::predict_values(std::span<const double> x) const {
    if (!feature_schema.empty() && x.size() != feature_schema.size()) {
        throw SchemaMismatch("feature vector has " + std::to_string(x.size()) +
                             " values, model expects " +
                             std::to_string(feature_schema.size()));
    }
    double out = 0.0;
    switch (backend) {
        case ModelBackend::ConstantMean:
            out = mean;
            break;
        case ModelBackend::LeastSquares:
        case ModelBackend::BayesianRidge: {
            out = intercept;
            for (std::size_t j = 0; j < weights.size(); ++j) out += weights[j] * x[j];
            break;
        }
        case ModelBackend::GradientBoosting: {
            out = mean;
            for (const RegressionTree& tree : trees) {
                out += learning_rate * tree.predict(x);
            }
            break;
        }
    }
    return std::clamp(out, clamp_lo, clamp_hi);
}

double TrainedModel::predict(const FeatureVector& x) const {
    return predict_values(x.values);
}

TrainedModel fit_values(ModelBackend backend, const std::vector<std::vector<double>>& X,
                        const std::vector<double>& y, const FitConfig& config) {
    const std::size_t n = X.size();
    const std::size_t m = n == 0 ? 0 : X[0].size();
    check_inputs(backend, n, m, X, y);

    TrainedModel model;
    model.backend = backend;
    model.clamp_lo = config.clamp_lo;
    model.clamp_hi = config.clamp_hi;
    switch (backend) {
        case ModelBackend::ConstantMean:
            model.mean = mean_of(y);
            break;
        case ModelBackend::LeastSquares:
            fit_least_squares(model, X, y, config);
            break;
        case ModelBackend::BayesianRidge:
            fit_bayesian_ridge(model, X, y, config);
            break;
        case ModelBackend::GradientBoosting:
            fit_gradient_boosting(model, X, y, config);
            break;
    }
    return model;
}

TrainedModel fit(ModelBackend backend, const std::vector<FeatureVector>& X,
                 const std::vector<double>& y, const FitConfig& config) {
    std::vector<std::vector<double>> rows;
    rows.reserve(X.size());
    for (const FeatureVector& fv : X) rows.push_back(fv.values);
    TrainedModel model = fit_values(backend, rows, y, config);
    model.feature_schema = retained_feature_names();
    return model;
}

void deterministic_shuffle(std::vector<std::size_t>& indices, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = indices.size(); i > 1; --i) {
        const std::size_t j = std::size_t(rng() % i);
        std::swap(indices[i - 1], indices[j]);
    }
}

EvalMetrics cross_validate(ModelBackend backend, const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y, int k, std::uint64_t seed,
                           const FitConfig& config) {
    const std::size_t n = X.size();
    if (k < 2) throw InsufficientData("k-fold needs k >= 2");
    if (n < std::size_t(k) || n != y.size()) {
        throw InsufficientData("k-fold needs at least k samples");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    deterministic_shuffle(order, seed);

    const std::size_t base = n / std::size_t(k);
    const std::size_t extra = n % std::size_t(k);

    EvalMetrics metrics;
    metrics.n = int(n);
    std::vector<double> predictions(n, 0.0);
    std::size_t start = 0;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t size = base + (std::size_t(fold) < extra ? 1 : 0);
        const std::size_t end = start + size;

        std::vector<std::vector<double>> train_x;
        std::vector<double> train_y;
        train_x.reserve(n - size);
        train_y.reserve(n - size);
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (pos >= start && pos < end) continue;
            train_x.push_back(X[order[pos]]);
            train_y.push_back(y[order[pos]]);
        }
        const TrainedModel model = fit_values(backend, train_x, train_y, config);

        double fold_mae = 0.0, fold_mape = 0.0;
        for (std::size_t pos = start; pos < end; ++pos) {
            const std::size_t i = order[pos];
            const double pred = model.predict_values(X[i]);
            predictions[i] = pred;
            fold_mae += std::abs(pred - y[i]);
            fold_mape += std::abs(pred - y[i]) / y[i];
        }
        metrics.per_fold.emplace_back(fold_mae / double(size), fold_mape / double(size));
        start = end;
    }

    double mae = 0.0, mape = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mae += std::abs(predictions[i] - y[i]);
        mape += std::abs(predictions[i] - y[i]) / y[i];
    }
    metrics.mae_hours = mae / double(n);
    metrics.mape = mape / double(n);
    return metrics;
}

std::pair<double, double> improvement_vs_constant(const EvalMetrics& model,
                                                  const EvalMetrics& constant) {
    const double mae_gain =
        (constant.mae_hours - model.mae_hours) / constant.mae_hours * 100.0;
    const double mape_gain = (constant.mape - model.mape) / constant.mape * 100.0;
    return {mae_gain, mape_gain};
}

std::string serialize_model(const TrainedModel& model) {
    json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["backend"] = std::string(to_string(model.backend));
    doc["feature_schema"] = model.feature_schema;
    doc["trained_at"] = format_rfc3339(model.trained_at);
    doc["window_start"] = format_rfc3339(model.window_start);
    doc["window_end"] = format_rfc3339(model.window_end);
    if (model.scope_repo) doc["scope_repo"] = *model.scope_repo;
    doc["mean"] = model.mean;
    doc["weights"] = model.weights;
    doc["intercept"] = model.intercept;
    doc["br_alpha"] = model.br_alpha;
    doc["br_lambda"] = model.br_lambda;
    doc["learning_rate"] = model.learning_rate;
    doc["clamp_lo"] = model.clamp_lo;
    doc["clamp_hi"] = model.clamp_hi;
    json trees = json::array();
    for (const RegressionTree& tree : model.trees) {
        json nodes = json::array();
        for (const TreeNode& n : tree.nodes) {
            nodes.push_back({{"f", n.feature},
                             {"t", n.threshold},
                             {"l", n.left},
                             {"r", n.right},
                             {"v", n.value}});
        }
        trees.push_back({{"max_depth", tree.max_depth}, {"nodes", nodes}});
    }
    doc["trees"] = trees;
    return doc.dump();
}

TrainedModel deserialize_model(std::string_view bytes) {
    json doc = json::parse(bytes, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw CorruptModel("model blob is not valid JSON");
    }
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
        throw CorruptModel("model blob has no format_version");
    }
    if (doc["format_version"].get<int>() != kModelFormatVersion) {
        throw VersionMismatch("unsupported model format version " +
                              std::to_string(doc["format_version"].get<int>()));
    }
    try {
        TrainedModel model;
        model.backend = backend_from_string(doc.at("backend").get<std::string>());
        model.feature_schema = doc.at("feature_schema").get<std::vector<std::string>>();
        model.trained_at = parse_rfc3339(doc.at("trained_at").get<std::string>());
        model.window_start = parse_rfc3339(doc.at("window_start").get<std::string>());
        model.window_end = parse_rfc3339(doc.at("window_end").get<std::string>());
        if (doc.contains("scope_repo")) {
            model.scope_repo = doc.at("scope_repo").get<std::string>();
        }
        model.mean = doc.at("mean").get<double>();
        model.weights = doc.at("weights").get<std::vector<double>>();
        model.intercept = doc.at("intercept").get<double>();
        model.br_alpha = doc.at("br_alpha").get<double>();
        model.br_lambda = doc.at("br_lambda").get<double>();
        model.learning_rate = doc.at("learning_rate").get<double>();
        model.clamp_lo = doc.at("clamp_lo").get<double>();
        model.clamp_hi = doc.at("clamp_hi").get<double>();
        for (const json& tree_doc : doc.at("trees")) {
            RegressionTree tree;
            tree.max_depth = tree_doc.at("max_depth").get<int>();
            for (const json& node_doc : tree_doc.at("nodes")) {
                TreeNode n;
                n.feature = node_doc.at("f").get<int>();
                n.threshold = node_doc.at("t").get<double>();
                n.left = node_doc.at("l").get<int>();
                n.right = node_doc.at("r").get<int>();
                n.value = node_doc.at("v").get<double>();
                tree.nodes.push_back(n);
            }
            model.trees.push_back(std::move(tree));
        }
        return model;
    } catch (const json::exception& e) {
        throw CorruptModel(std::string("model blob field error: ") + e.what());
    } catch (const ParseError& e) {
        throw CorruptModel(std::string("model blob field error: ") + e.what());
    }
}

}  // namespace nudge
