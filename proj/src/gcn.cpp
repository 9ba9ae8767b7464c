#include "netpred/gcn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "netpred/errors.hpp"
#include "netpred/rng.hpp"

namespace netpred {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("gcn: learning rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InputError("gcn: dropout must be in [0, 1)");
  if (epochs == 0) throw InputError("gcn: epochs must be at least 1");
  if (hidden_channels == 0) throw InputError("gcn: hidden channels must be positive");
  if (!(l2_coefficient >= 0.0)) throw InputError("gcn: l2 coefficient must be non-negative");
}

NormalizedAdjacency normalized_adjacency(const Eigen::MatrixXd& weights) {
  if (weights.rows() != weights.cols()) throw InputError("gcn: adjacency must be square");
  if (!weights.allFinite()) throw InputError("gcn: non-finite edge weight");
  Eigen::MatrixXd a = weights.cwiseMax(0.0);
  a.diagonal().array() += 1.0;
  const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
  Eigen::MatrixXd m = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  return {0.5 * (m + m.transpose())};
}

Eigen::MatrixXd stock_weight_matrix(const PredictionNetwork& network) {
  const auto n = static_cast<Eigen::Index>(network.stock_nodes.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : network.stock_stock_edges) {
    const auto a = static_cast<Eigen::Index>(*network.stock_position(e.a));
    const auto b = static_cast<Eigen::Index>(*network.stock_position(e.b));
    w(a, b) = w(b, a) = e.weight;
  }
  return w;
}

NormalizedAdjacency normalized_adjacency(const PredictionNetwork& network) {
  return normalized_adjacency(stock_weight_matrix(network));
}

namespace {

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd y(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    y.row(i) = (z.row(i).array() - top).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

void check_shapes(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X, const GcnParams& params) {
  if (adjacency.matrix.rows() != X.rows() || adjacency.matrix.cols() != X.rows())
    throw InputError("gcn: adjacency does not match node count");
  if (params.W0.rows() != X.cols()) throw InputError("gcn: W0 rows do not match feature count");
  if (params.W1.rows() != params.W0.cols()) throw InputError("gcn: W1 rows do not match hidden width");
}

struct ForwardPass {
  Eigen::MatrixXd ax;      // A X
  Eigen::MatrixXd hidden;  // A X W0, pre-activation
  Eigen::MatrixXd active;  // relu(hidden) * mask
  Eigen::MatrixXd a_active;
  Eigen::MatrixXd probs;
};

ForwardPass forward(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                    const GcnParams& params, const Eigen::MatrixXd* hidden_mask) {
  check_shapes(adjacency, X, params);
  ForwardPass f;
  f.ax = adjacency.matrix * X;
  f.hidden = f.ax * params.W0;
  f.active = f.hidden.cwiseMax(0.0);
  if (hidden_mask) {
    if (hidden_mask->rows() != f.active.rows() || hidden_mask->cols() != f.active.cols())
      throw InputError("gcn: dropout mask shape mismatch");
    f.active = f.active.cwiseProduct(*hidden_mask);
  }
  f.a_active = adjacency.matrix * f.active;
  f.probs = row_softmax(f.a_active * params.W1);
  return f;
}

}  // namespace

Eigen::MatrixXd gcn_forward(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                            const GcnParams& params, const Eigen::MatrixXd* hidden_mask) {
  return forward(adjacency, X, params, hidden_mask).probs;
}

bool SeedTargets::single_class() const {
  return std::adjacent_find(classes.begin(), classes.end(), std::not_equal_to<>()) == classes.end();
}

SeedTargets seed_targets(const std::vector<std::string>& nodes,
                         const std::map<std::string, Movement>& labels) {
  SeedTargets t;
  for (const auto& [symbol, movement] : labels) {
    const auto it = std::find(nodes.begin(), nodes.end(), symbol);
    if (it == nodes.end()) throw InputError("gcn: seed " + symbol + " is not a graph node");
    t.rows.push_back(static_cast<std::size_t>(it - nodes.begin()));
    t.classes.push_back(class_of(movement));
  }
  return t;
}

double masked_cross_entropy(const Eigen::MatrixXd& Y, const SeedTargets& targets,
                            double l2_coefficient, const GcnParams& params) {
  double loss = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (static_cast<Eigen::Index>(targets.rows[k]) >= Y.rows())
      throw InputError("gcn: seed row outside the prediction matrix");
    const double p = Y(static_cast<Eigen::Index>(targets.rows[k]), static_cast<Eigen::Index>(targets.classes[k]));
    loss -= std::log(std::max(p, 1e-12));
  }
  return loss + 0.5 * l2_coefficient * (params.W0.squaredNorm() + params.W1.squaredNorm());
}

LossGradients loss_gradients(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                             const GcnParams& params, const SeedTargets& targets,
                             double l2_coefficient, const Eigen::MatrixXd* hidden_mask) {
  const auto f = forward(adjacency, X, params, hidden_mask);
  LossGradients g;
  g.loss = masked_cross_entropy(f.probs, targets, l2_coefficient, params);

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(f.probs.rows(), f.probs.cols());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(targets.rows[k]);
    d_logits.row(r) += f.probs.row(r);
    d_logits(r, static_cast<Eigen::Index>(targets.classes[k])) -= 1.0;
  }
  g.dW1 = f.a_active.transpose() * d_logits + l2_coefficient * params.W1;
  // The normalized adjacency is symmetric, so A^T = A.
  Eigen::MatrixXd d_active = adjacency.matrix * d_logits * params.W1.transpose();
  Eigen::MatrixXd d_hidden = d_active.cwiseProduct((f.hidden.array() > 0.0).cast<double>().matrix());
  if (hidden_mask) d_hidden = d_hidden.cwiseProduct(*hidden_mask);
  g.dW0 = f.ax.transpose() * d_hidden + l2_coefficient * params.W0;
  return g;
}

GcnParams glorot_init(std::size_t features, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  auto uniform = [&](std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
    return m;
  };
  GcnParams p;
  p.W0 = uniform(features, hidden);
  p.W1 = uniform(hidden, classes);
  return p;
}

TrainResult train_gcn(const NormalizedAdjacency& adjacency, const Eigen::MatrixXd& X,
                      const SeedTargets& targets, const TrainConfig& config) {
  config.validate();
  if (targets.size() == 0) throw InputError("gcn: no seed labels");
  TrainResult result;
  result.single_class_seeds = targets.single_class();
  result.params = glorot_init(static_cast<std::size_t>(X.cols()), config.hidden_channels, kClassCount,
                              Rng::derive(config.seed, 0));
  Rng dropout_rng(Rng::derive(config.seed, 1));

  auto& p = result.params;
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Zero(p.W0.rows(), p.W0.cols()), v0 = m0;
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols()), v1 = m1;
  Eigen::MatrixXd mask(X.rows(), static_cast<Eigen::Index>(config.hidden_channels));
  const double keep = 1.0 - config.dropout_rate;
  double decay1 = 1.0, decay2 = 1.0;

  auto adam = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& m, Eigen::MatrixXd& v, const Eigen::MatrixXd& grad) {
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const Eigen::ArrayXXd m_hat = m.array() / (1.0 - decay1);
    const Eigen::ArrayXXd v_hat = v.array() / (1.0 - decay2);
    w.array() -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
  };

  result.loss_history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const Eigen::MatrixXd* mask_ptr = nullptr;
    if (config.dropout_rate > 0.0) {
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          mask(i, j) = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
      mask_ptr = &mask;
    }
    const auto g = loss_gradients(adjacency, X, p, targets, config.l2_coefficient, mask_ptr);
    if (!std::isfinite(g.loss) || !g.dW0.allFinite() || !g.dW1.allFinite())
      throw DivergenceError(epoch + 1, config.learning_rate);
    result.loss_history.push_back(g.loss);
    decay1 *= config.beta1;
    decay2 *= config.beta2;
    adam(p.W0, m0, v0, g.dW0);
    adam(p.W1, m1, v1, g.dW1);
  }
  result.final_loss =
      masked_cross_entropy(gcn_forward(adjacency, X, p), targets, config.l2_coefficient, p);
  if (!std::isfinite(result.final_loss)) throw DivergenceError(config.epochs, config.learning_rate);
  return result;
}

std::vector<Movement> predict_labels(const Eigen::MatrixXd& Y) {
  if (Y.cols() != static_cast<Eigen::Index>(kClassCount)) throw InputError("gcn: expected two classes");
  std::vector<Movement> out(static_cast<std::size_t>(Y.rows()));
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    out[static_cast<std::size_t>(i)] = Y(i, kRiseClass) >= Y(i, kFallClass) ? Movement::Rise : Movement::Fall;
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows.at(static_cast<std::size_t>(i)).size()) != c)
      throw ParseError("ragged matrix", 0);
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

}  // namespace

std::string params_to_json(const GcnParams& params) {
  return nlohmann::json{{"W0", matrix_json(params.W0)}, {"W1", matrix_json(params.W1)}}.dump();
}

GcnParams params_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    return {matrix_from_json(doc.at("W0")), matrix_from_json(doc.at("W1"))};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gcn params: ") + e.what(), 0);
  }
}

}  // namespace netpred
