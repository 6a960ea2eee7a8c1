#pragma once

// Infers input-token -> output-token dependency weights from perturbed
// queries. Each perturbed sample contributes one row: which original tokens
// it retained (X) and which output tokens appeared in the model's top-1
// answer (Y). Each output column is then explained by an independent
// L2-regularized logistic regression, or by smoothed PMI.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cpr/error.hpp"
#include "cpr/perturb.hpp"
#include "cpr/program.hpp"

namespace cpr {

struct DesignMatrix {
  Eigen::MatrixXd X;  // N x n, 1 = original input token retained
  Eigen::MatrixXd Y;  // N x v, 1 = output token present in top-1
  std::vector<Token> input_vocab;        // code tokens, then comment tokens
  std::vector<std::string> output_vocab;  // first-seen order

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
};

/// Row 0 is the unperturbed input (all-true mask); row i + 1 is samples[i].
inline DesignMatrix build_design_matrix(const ProgramInput& input,
                                        const std::vector<PerturbedSample>& samples,
                                        const std::vector<RepairOutput>& outputs,
                                        const RepairOutput& unperturbed) {
  if (samples.size() != outputs.size())
    throw AlignmentError(std::to_string(samples.size()) + " samples but " +
                         std::to_string(outputs.size()) + " outputs");
  DesignMatrix dm;
  for (const auto& t : input.code) dm.input_vocab.push_back(t);
  for (const auto& t : input.comment) dm.input_vocab.push_back(t);
  const auto n = dm.input_vocab.size();
  const auto N = samples.size() + 1;

  std::unordered_map<std::string, std::size_t> column;
  std::vector<std::vector<std::size_t>> present(N);
  auto record = [&](std::size_t row, const RepairOutput& out) {
    if (out.empty()) throw AlignmentError("empty repair output at row " + std::to_string(row));
    for (const auto& tok : out.top().tokens) {
      auto [it, fresh] = column.try_emplace(tok.text, dm.output_vocab.size());
      if (fresh) dm.output_vocab.push_back(tok.text);
      present[row].push_back(it->second);
    }
  };
  record(0, unperturbed);
  for (std::size_t i = 0; i < outputs.size(); ++i) record(i + 1, outputs[i]);

  dm.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
  dm.Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                               static_cast<Eigen::Index>(dm.output_vocab.size()));
  dm.X.row(0).setOnes();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& mask = samples[i].retained_mask;
    if (mask.size() != n)
      throw AlignmentError("sample " + std::to_string(i) + " mask has length " +
                           std::to_string(mask.size()) + ", expected " + std::to_string(n));
    for (std::size_t c = 0; c < n; ++c)
      dm.X(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(c)) = mask[c] ? 1.0 : 0.0;
  }
  for (std::size_t r = 0; r < N; ++r)
    for (auto c : present[r]) dm.Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
  return dm;
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd grad_w;
  double grad_b = 0.0;
};

/// Mean logistic loss + (lambda / 2) * |w|^2; the bias is not penalized.
inline LossAndGradient logistic_loss_gradient(const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& w, double b,
                                              double lambda) {
  const double N = static_cast<double>(X.rows());
  const Eigen::VectorXd z = (X * w).array() + b;
  LossAndGradient out;
  Eigen::VectorXd residual(z.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    // softplus(z) - y z, evaluated without overflow
    const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
    loss += softplus - y[i] * zi;
    const double p = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
    residual[i] = p - y[i];
  }
  out.loss = loss / N + 0.5 * lambda * w.squaredNorm();
  out.grad_w = X.transpose() * residual / N + lambda * w;
  out.grad_b = residual.sum() / N;
  return out;
}

struct LogisticFit {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // gradient inf-norm reached tol
  double grad_inf_norm = 0.0;
  std::vector<double> loss_history;  // loss at the start and after each step
};

/// Full-batch gradient descent with Armijo backtracking. Stops when the
/// gradient infinity-norm is <= tol or after max_iter iterations. The loss
/// sequence is non-increasing.
inline LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double lambda, double tol, std::size_t max_iter) {
  if (X.rows() < 1 || X.cols() < 1)
    throw ValidationError("logistic_fit needs at least one row and one column");
  if (y.size() != X.rows()) throw AlignmentError("label vector length mismatch");
  if (lambda < 0) throw InvalidConfigError("lambda must be non-negative");

  LogisticFit fit;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  auto state = logistic_loss_gradient(X, y, w, b, lambda);
  auto check = [&](const LossAndGradient& s) {
    if (!std::isfinite(s.loss) || !s.grad_w.allFinite() || !std::isfinite(s.grad_b))
      throw NumericalError("non-finite loss or gradient in logistic fit");
  };
  check(state);
  fit.loss_history.push_back(state.loss);
  auto inf_norm = [](const LossAndGradient& s) {
    return std::max(s.grad_w.size() ? s.grad_w.cwiseAbs().maxCoeff() : 0.0,
                    std::abs(s.grad_b));
  };

  constexpr double kArmijo = 1e-4;
  double step = 1.0;
  while (fit.iterations < max_iter) {
    const double gnorm = inf_norm(state);
    if (gnorm <= tol) {
      fit.converged = true;
      break;
    }
    const double gsq = state.grad_w.squaredNorm() + state.grad_b * state.grad_b;
    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    while (step > 1e-20) {
      Eigen::VectorXd w_new = w - step * state.grad_w;
      const double b_new = b - step * state.grad_b;
      auto next = logistic_loss_gradient(X, y, w_new, b_new, lambda);
      check(next);
      if (next.loss <= state.loss - kArmijo * step * gsq) {
        w = std::move(w_new);
        b = b_new;
        state = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++fit.iterations;
    if (!accepted) break;  // no decrease possible at machine precision
    fit.loss_history.push_back(state.loss);
  }
  fit.grad_inf_norm = inf_norm(state);
  if (!fit.converged && fit.grad_inf_norm <= tol) fit.converged = true;
  fit.weights = std::move(w);
  fit.bias = b;
  return fit;
}

/// Smoothed pointwise mutual information between each input column and y:
/// log[(c(x=1,y=1) + .5)(N + 1) / ((c(x=1) + .5)(c(y=1) + .5))].
inline Eigen::VectorXd pmi_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (y.size() != X.rows()) throw AlignmentError("label vector length mismatch");
  const double N = static_cast<double>(X.rows());
  const double cy = y.sum();
  Eigen::VectorXd out(X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const double cx = X.col(i).sum();
    const double cxy = X.col(i).dot(y);
    out[i] = std::log((cxy + 0.5) * (N + 1.0) / ((cx + 0.5) * (cy + 0.5)));
  }
  return out;
}

enum class EstimatorMethod { logistic, pmi };

inline std::string_view to_string(EstimatorMethod m) {
  return m == EstimatorMethod::logistic ? "logistic" : "pmi";
}

struct EstimatorConfig {
  EstimatorMethod method = EstimatorMethod::logistic;
  double lambda = 1e-3;
  double tol = 1e-6;
  std::size_t max_iter = 500;
  std::size_t workers = 1;
};

struct DependencyMatrix {
  Eigen::MatrixXd W;     // n x v
  Eigen::VectorXd bias;  // v
  std::vector<Token> input_vocab;
  std::vector<std::string> output_vocab;
  EstimatorConfig config;
  std::vector<bool> constant_input;   // column never varied: weight 0 by convention
  std::vector<bool> constant_output;  // label never varied: weights 0
  std::vector<std::size_t> iterations;  // per output column (logistic)
  std::vector<bool> converged;

  std::optional<std::size_t> output_index(const std::string& text) const {
    for (std::size_t j = 0; j < output_vocab.size(); ++j)
      if (output_vocab[j] == text) return j;
    return std::nullopt;
  }
};

/// Fits every output column independently. Constant input columns and
/// constant output columns get zero weights and are flagged.
inline DependencyMatrix estimate_dependencies(const DesignMatrix& dm,
                                              const EstimatorConfig& cfg = {}) {
  const auto N = dm.X.rows();
  const auto n = dm.X.cols();
  const auto v = dm.Y.cols();
  DependencyMatrix dep;
  dep.W = Eigen::MatrixXd::Zero(n, v);
  dep.bias = Eigen::VectorXd::Zero(v);
  dep.input_vocab = dm.input_vocab;
  dep.output_vocab = dm.output_vocab;
  dep.config = cfg;
  dep.constant_input.assign(static_cast<std::size_t>(n), false);
  dep.constant_output.assign(static_cast<std::size_t>(v), false);
  dep.iterations.assign(static_cast<std::size_t>(v), 0);
  dep.converged.assign(static_cast<std::size_t>(v), true);

  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double s = dm.X.col(c).sum();
    if (s == 0.0 || s == static_cast<double>(N))
      dep.constant_input[static_cast<std::size_t>(c)] = true;
    else
      active.push_back(c);
  }
  Eigen::MatrixXd Xa(N, static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) Xa.col(static_cast<Eigen::Index>(k)) = dm.X.col(active[k]);

  auto smoothed_logit = [&](double count) {
    return std::log((count + 0.5) / (static_cast<double>(N) - count + 0.5));
  };

  auto fit_column = [&](Eigen::Index j) {
    const Eigen::VectorXd y = dm.Y.col(j);
    const double cy = y.sum();
    const auto ju = static_cast<std::size_t>(j);
    if (cy == 0.0 || cy == static_cast<double>(N)) {
      dep.constant_output[ju] = true;
      dep.bias[j] = smoothed_logit(cy);
      return;
    }
    if (active.empty()) {
      dep.bias[j] = smoothed_logit(cy);
      return;
    }
    if (cfg.method == EstimatorMethod::pmi) {
      const Eigen::VectorXd s = pmi_score(Xa, y);
      for (std::size_t k = 0; k < active.size(); ++k) dep.W(active[k], j) = s[static_cast<Eigen::Index>(k)];
      dep.bias[j] = smoothed_logit(cy);
      return;
    }
    LogisticFit fit;
    try {
      fit = logistic_fit(Xa, y, cfg.lambda, cfg.tol, cfg.max_iter);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (output token '" +
                           dm.output_vocab[ju] + "')");
    }
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double wk = fit.weights[static_cast<Eigen::Index>(k)];
      if (!std::isfinite(wk))
        throw NumericalError("non-finite weight for (input token '" +
                             dm.input_vocab[static_cast<std::size_t>(active[k])].text +
                             "', output token '" + dm.output_vocab[ju] + "')");
      dep.W(active[k], j) = wk;
    }
    dep.bias[j] = fit.bias;
    dep.iterations[ju] = fit.iterations;
    dep.converged[ju] = fit.converged;
  };

  const std::size_t workers = std::min<std::size_t>(cfg.workers, static_cast<std::size_t>(v));
  if (workers <= 1) {
    for (Eigen::Index j = 0; j < v; ++j) fit_column(j);
    return dep;
  }
  std::vector<std::optional<NumericalError>> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (auto j = static_cast<Eigen::Index>(w); j < v;
               j += static_cast<Eigen::Index>(workers))
            fit_column(j);
        } catch (const NumericalError& e) {
          errors[w] = e;
        }
      });
  }
  for (auto& e : errors)
    if (e) throw *e;
  return dep;
}

inline nlohmann::ordered_json to_json(const DependencyMatrix& dep) {
  nlohmann::ordered_json j;
  auto inputs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dep.input_vocab.size(); ++i) {
    const auto& t = dep.input_vocab[i];
    inputs.push_back({{"text", t.text},
                      {"stream", to_string(t.stream)},
                      {"position", t.position},
                      {"constant", static_cast<bool>(dep.constant_input[i])}});
  }
  j["input_vocab"] = inputs;
  j["output_vocab"] = dep.output_vocab;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < dep.W.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(dep.W.cols()));
    for (Eigen::Index c = 0; c < dep.W.cols(); ++c) row[static_cast<std::size_t>(c)] = dep.W(r, c);
    rows.push_back(row);
  }
  j["W"] = rows;
  j["bias"] = std::vector<double>(dep.bias.data(), dep.bias.data() + dep.bias.size());
  j["method"] = to_string(dep.config.method);
  j["config"] = {{"lambda", dep.config.lambda},
                 {"tol", dep.config.tol},
                 {"max_iter", dep.config.max_iter}};
  return j;
}

}  // namespace cpr
