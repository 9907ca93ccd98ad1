#include "scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace essaylens {

namespace {

double sigmoid(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double stddev) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.gaussian(0.0, stddev);
  return v;
}

Mat gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Mat m(rows, cols);
  for (double& x : m.data()) x = rng.gaussian(0.0, stddev);
  return m;
}

constexpr double kInitStd = 0.1;

}  // namespace

void Scorer::require_rows(const Mat& embedded) {
  if (embedded.rows() == 0) {
    throw EmptyEssayError("scorer requires at least one token");
  }
}

// ---------------------------------------------------------------------------
// LinearBowScorer

LinearBowScorer::LinearBowScorer(std::vector<double> weight, double bias)
    : weight_(std::move(weight)), bias_(bias) {
  if (weight_.empty()) throw InvalidInputError("linear scorer needs a non-empty weight vector");
}

double LinearBowScorer::presum(const Mat& embedded) const {
  double total = bias_;
  for (std::size_t t = 0; t < embedded.rows(); ++t) {
    const double* row = embedded.row(t);
    for (std::size_t d = 0; d < weight_.size(); ++d) total += weight_[d] * row[d];
  }
  return total;
}

double LinearBowScorer::raw_score(const Mat& embedded) const {
  require_rows(embedded);
  return clamp01(presum(embedded));
}

Mat LinearBowScorer::input_gradient(const Mat& embedded) const {
  require_rows(embedded);
  Mat grad(embedded.rows(), weight_.size());
  const double s = presum(embedded);
  if (s > 0.0 && s < 1.0) {
    for (std::size_t t = 0; t < embedded.rows(); ++t) {
      for (std::size_t d = 0; d < weight_.size(); ++d) grad(t, d) = weight_[d];
    }
  }
  return grad;
}

std::vector<double> LinearBowScorer::parameters() const {
  std::vector<double> p = weight_;
  p.push_back(bias_);
  return p;
}

void LinearBowScorer::set_parameters(const std::vector<double>& params) {
  if (params.size() != weight_.size() + 1) {
    throw InvalidInputError("linear scorer expects " + std::to_string(weight_.size() + 1) +
                            " parameters");
  }
  std::copy(params.begin(), params.end() - 1, weight_.begin());
  bias_ = params.back();
}

std::vector<double> LinearBowScorer::parameter_gradient(const Mat& embedded) const {
  require_rows(embedded);
  std::vector<double> grad(weight_.size() + 1, 0.0);
  const double s = presum(embedded);
  if (s > 0.0 && s < 1.0) {
    for (std::size_t t = 0; t < embedded.rows(); ++t) {
      const double* row = embedded.row(t);
      for (std::size_t d = 0; d < weight_.size(); ++d) grad[d] += row[d];
    }
    grad.back() = 1.0;
  }
  return grad;
}

std::unique_ptr<Scorer> LinearBowScorer::clone() const {
  return std::make_unique<LinearBowScorer>(weight_, bias_);
}

// ---------------------------------------------------------------------------
// MeanPoolMlpScorer

MeanPoolMlpScorer::MeanPoolMlpScorer(std::size_t dim, std::size_t hidden, std::uint64_t seed)
    : dim_(dim), hidden_(hidden) {
  if (dim == 0 || hidden == 0) throw InvalidInputError("mlp scorer needs dim >= 1, hidden >= 1");
  Rng rng(seed);
  hidden_weight_ = gaussian_matrix(rng, hidden, dim, kInitStd);
  hidden_bias_ = gaussian_vector(rng, hidden, kInitStd);
  out_weight_ = gaussian_vector(rng, hidden, kInitStd);
  out_bias_ = rng.gaussian(0.0, kInitStd);
}

MeanPoolMlpScorer::MeanPoolMlpScorer(Mat hidden_weight, std::vector<double> hidden_bias,
                                     std::vector<double> out_weight, double out_bias)
    : dim_(hidden_weight.cols()),
      hidden_(hidden_weight.rows()),
      hidden_weight_(std::move(hidden_weight)),
      hidden_bias_(std::move(hidden_bias)),
      out_weight_(std::move(out_weight)),
      out_bias_(out_bias) {
  if (dim_ == 0 || hidden_ == 0 || hidden_bias_.size() != hidden_ ||
      out_weight_.size() != hidden_) {
    throw InvalidInputError("mlp scorer parameter shapes are inconsistent");
  }
}

MeanPoolMlpScorer::Forward MeanPoolMlpScorer::forward(const Mat& embedded) const {
  Forward f;
  f.mean.assign(dim_, 0.0);
  // Sum each column in sorted value order: the pooled mean of a permuted
  // essay is then bit-identical, which the shuffle invariants require.
  std::vector<double> column(embedded.rows());
  for (std::size_t d = 0; d < dim_; ++d) {
    for (std::size_t t = 0; t < embedded.rows(); ++t) column[t] = embedded(t, d);
    std::sort(column.begin(), column.end());
    double total = 0.0;
    for (double v : column) total += v;
    f.mean[d] = total / static_cast<double>(embedded.rows());
  }
  f.activation.assign(hidden_, 0.0);
  double out = out_bias_;
  for (std::size_t i = 0; i < hidden_; ++i) {
    double z = hidden_bias_[i];
    const double* wrow = hidden_weight_.row(i);
    for (std::size_t d = 0; d < dim_; ++d) z += wrow[d] * f.mean[d];
    f.activation[i] = std::tanh(z);
    out += out_weight_[i] * f.activation[i];
  }
  f.output = sigmoid(out);
  return f;
}

double MeanPoolMlpScorer::raw_score(const Mat& embedded) const {
  require_rows(embedded);
  return forward(embedded).output;
}

Mat MeanPoolMlpScorer::input_gradient(const Mat& embedded) const {
  require_rows(embedded);
  const Forward f = forward(embedded);
  const double s = f.output * (1.0 - f.output);
  std::vector<double> d_mean(dim_, 0.0);
  for (std::size_t i = 0; i < hidden_; ++i) {
    const double dz = s * out_weight_[i] * (1.0 - f.activation[i] * f.activation[i]);
    const double* wrow = hidden_weight_.row(i);
    for (std::size_t d = 0; d < dim_; ++d) d_mean[d] += dz * wrow[d];
  }
  Mat grad(embedded.rows(), dim_);
  const double inv_n = 1.0 / static_cast<double>(embedded.rows());
  for (std::size_t t = 0; t < embedded.rows(); ++t) {
    for (std::size_t d = 0; d < dim_; ++d) grad(t, d) = d_mean[d] * inv_n;
  }
  return grad;
}

std::vector<double> MeanPoolMlpScorer::parameters() const {
  std::vector<double> p;
  p.reserve(hidden_ * dim_ + hidden_ * 2 + 1);
  p.insert(p.end(), hidden_weight_.data().begin(), hidden_weight_.data().end());
  p.insert(p.end(), hidden_bias_.begin(), hidden_bias_.end());
  p.insert(p.end(), out_weight_.begin(), out_weight_.end());
  p.push_back(out_bias_);
  return p;
}

void MeanPoolMlpScorer::set_parameters(const std::vector<double>& params) {
  const std::size_t expected = hidden_ * dim_ + hidden_ * 2 + 1;
  if (params.size() != expected) {
    throw InvalidInputError("mlp scorer expects " + std::to_string(expected) + " parameters");
  }
  auto it = params.begin();
  std::copy(it, it + static_cast<std::ptrdiff_t>(hidden_ * dim_), hidden_weight_.data().begin());
  it += static_cast<std::ptrdiff_t>(hidden_ * dim_);
  std::copy(it, it + static_cast<std::ptrdiff_t>(hidden_), hidden_bias_.begin());
  it += static_cast<std::ptrdiff_t>(hidden_);
  std::copy(it, it + static_cast<std::ptrdiff_t>(hidden_), out_weight_.begin());
  it += static_cast<std::ptrdiff_t>(hidden_);
  out_bias_ = *it;
}

std::vector<double> MeanPoolMlpScorer::parameter_gradient(const Mat& embedded) const {
  require_rows(embedded);
  const Forward f = forward(embedded);
  const double s = f.output * (1.0 - f.output);
  std::vector<double> grad(hidden_ * dim_ + hidden_ * 2 + 1, 0.0);
  for (std::size_t i = 0; i < hidden_; ++i) {
    const double dz = s * out_weight_[i] * (1.0 - f.activation[i] * f.activation[i]);
    for (std::size_t d = 0; d < dim_; ++d) grad[i * dim_ + d] = dz * f.mean[d];
    grad[hidden_ * dim_ + i] = dz;                      // hidden bias
    grad[hidden_ * dim_ + hidden_ + i] = s * f.activation[i];  // out weight
  }
  grad.back() = s;  // out bias
  return grad;
}

std::unique_ptr<Scorer> MeanPoolMlpScorer::clone() const {
  return std::make_unique<MeanPoolMlpScorer>(hidden_weight_, hidden_bias_, out_weight_, out_bias_);
}

// ---------------------------------------------------------------------------
// RecurrentScorer

RecurrentScorer::RecurrentScorer(std::size_t dim, std::size_t hidden, std::uint64_t seed)
    : dim_(dim), hidden_(hidden) {
  if (dim == 0 || hidden == 0) {
    throw InvalidInputError("recurrent scorer needs dim >= 1, hidden >= 1");
  }
  Rng rng(seed);
  input_weight_ = gaussian_matrix(rng, hidden, dim, kInitStd);
  recurrent_weight_ = gaussian_matrix(rng, hidden, hidden, kInitStd);
  bias_ = gaussian_vector(rng, hidden, kInitStd);
  out_weight_ = gaussian_vector(rng, hidden, kInitStd);
  out_bias_ = rng.gaussian(0.0, kInitStd);
}

RecurrentScorer::Forward RecurrentScorer::forward(const Mat& embedded) const {
  Forward f;
  f.states = Mat(embedded.rows() + 1, hidden_);
  for (std::size_t t = 0; t < embedded.rows(); ++t) {
    const double* x = embedded.row(t);
    const double* prev = f.states.row(t);
    double* next = f.states.row(t + 1);
    for (std::size_t i = 0; i < hidden_; ++i) {
      double pre = bias_[i];
      const double* wx = input_weight_.row(i);
      for (std::size_t d = 0; d < dim_; ++d) pre += wx[d] * x[d];
      const double* wh = recurrent_weight_.row(i);
      for (std::size_t j = 0; j < hidden_; ++j) pre += wh[j] * prev[j];
      next[i] = std::tanh(pre);
    }
  }
  double out = out_bias_;
  const double* last = f.states.row(embedded.rows());
  for (std::size_t i = 0; i < hidden_; ++i) out += out_weight_[i] * last[i];
  f.output = sigmoid(out);
  return f;
}

RecurrentScorer::Backward RecurrentScorer::backward(const Mat& embedded, bool want_params) const {
  const Forward f = forward(embedded);
  const double s = f.output * (1.0 - f.output);
  const std::size_t n = embedded.rows();
  const std::size_t param_count = hidden_ * dim_ + hidden_ * hidden_ + hidden_ * 2 + 1;

  Backward b;
  b.d_input = Mat(n, dim_);
  if (want_params) b.d_params.assign(param_count, 0.0);

  std::vector<double> delta(hidden_);  // d output / d h_t
  for (std::size_t i = 0; i < hidden_; ++i) delta[i] = s * out_weight_[i];

  std::vector<double> dpre(hidden_);
  for (std::size_t t = n; t-- > 0;) {
    const double* h = f.states.row(t + 1);
    for (std::size_t i = 0; i < hidden_; ++i) dpre[i] = delta[i] * (1.0 - h[i] * h[i]);

    double* dx = b.d_input.row(t);
    for (std::size_t d = 0; d < dim_; ++d) {
      double g = 0.0;
      for (std::size_t i = 0; i < hidden_; ++i) g += input_weight_(i, d) * dpre[i];
      dx[d] = g;
    }
    if (want_params) {
      const double* x = embedded.row(t);
      const double* prev = f.states.row(t);
      for (std::size_t i = 0; i < hidden_; ++i) {
        for (std::size_t d = 0; d < dim_; ++d) b.d_params[i * dim_ + d] += dpre[i] * x[d];
        const std::size_t wh_base = hidden_ * dim_ + i * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) b.d_params[wh_base + j] += dpre[i] * prev[j];
        b.d_params[hidden_ * dim_ + hidden_ * hidden_ + i] += dpre[i];
      }
    }
    std::vector<double> next_delta(hidden_, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      double g = 0.0;
      for (std::size_t i = 0; i < hidden_; ++i) g += recurrent_weight_(i, j) * dpre[i];
      next_delta[j] = g;
    }
    delta.swap(next_delta);
  }
  if (want_params) {
    const double* last = f.states.row(n);
    const std::size_t out_base = hidden_ * dim_ + hidden_ * hidden_ + hidden_;
    for (std::size_t i = 0; i < hidden_; ++i) b.d_params[out_base + i] = s * last[i];
    b.d_params.back() = s;
  }
  return b;
}

double RecurrentScorer::raw_score(const Mat& embedded) const {
  require_rows(embedded);
  return forward(embedded).output;
}

Mat RecurrentScorer::input_gradient(const Mat& embedded) const {
  require_rows(embedded);
  return backward(embedded, false).d_input;
}

std::vector<double> RecurrentScorer::parameters() const {
  std::vector<double> p;
  p.reserve(hidden_ * dim_ + hidden_ * hidden_ + hidden_ * 2 + 1);
  p.insert(p.end(), input_weight_.data().begin(), input_weight_.data().end());
  p.insert(p.end(), recurrent_weight_.data().begin(), recurrent_weight_.data().end());
  p.insert(p.end(), bias_.begin(), bias_.end());
  p.insert(p.end(), out_weight_.begin(), out_weight_.end());
  p.push_back(out_bias_);
  return p;
}

void RecurrentScorer::set_parameters(const std::vector<double>& params) {
  const std::size_t expected = hidden_ * dim_ + hidden_ * hidden_ + hidden_ * 2 + 1;
  if (params.size() != expected) {
    throw InvalidInputError("recurrent scorer expects " + std::to_string(expected) +
                            " parameters");
  }
  auto it = params.begin();
  auto take = [&](double* dst, std::size_t count) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(count), dst);
    it += static_cast<std::ptrdiff_t>(count);
  };
  take(input_weight_.data().data(), hidden_ * dim_);
  take(recurrent_weight_.data().data(), hidden_ * hidden_);
  take(bias_.data(), hidden_);
  take(out_weight_.data(), hidden_);
  out_bias_ = *it;
}

std::vector<double> RecurrentScorer::parameter_gradient(const Mat& embedded) const {
  require_rows(embedded);
  return backward(embedded, true).d_params;
}

std::unique_ptr<Scorer> RecurrentScorer::clone() const {
  auto copy = std::make_unique<RecurrentScorer>(dim_, hidden_, 0);
  copy->set_parameters(parameters());
  return copy;
}

// ---------------------------------------------------------------------------
// Scaling and training

ScaledScore scale_score(double raw, const Rubric& rubric) {
  ScaledScore s;
  s.raw = raw;
  s.rubric = rubric;
  s.scaled = static_cast<double>(rubric.min_score) +
             raw * static_cast<double>(rubric.range());
  return s;
}

double unscale_score(double scaled, const Rubric& rubric) {
  return (scaled - static_cast<double>(rubric.min_score)) / static_cast<double>(rubric.range());
}

ScaledScore score_essay(const Scorer& scorer, const EmbeddedEssay& essay, const Rubric& rubric) {
  if (essay.matrix.rows() == 0) throw EmptyEssayError("cannot score an empty essay");
  if (essay.matrix.cols() != scorer.embedding_dim()) {
    throw InvalidInputError("essay embedding dimension " + std::to_string(essay.matrix.cols()) +
                            " does not match scorer dimension " +
                            std::to_string(scorer.embedding_dim()));
  }
  return scale_score(scorer.raw_score(essay.matrix), rubric);
}

ScaledScore score_essay_or_min(const Scorer& scorer, const EmbeddedEssay& essay,
                               const Rubric& rubric) {
  if (essay.matrix.rows() == 0) return scale_score(0.0, rubric);
  return score_essay(scorer, essay, rubric);
}

TrainResult train(Scorer& scorer, const LabeledCorpus& corpus, const EmbeddingTable& table,
                  const TrainOptions& options) {
  if (corpus.essays.empty()) throw InvalidInputError("cannot train on an empty corpus");
  if (table.dim() != scorer.embedding_dim()) {
    throw InvalidInputError("embedding table dimension does not match scorer");
  }

  const std::size_t n = corpus.essays.size();
  std::vector<Mat> inputs;
  std::vector<double> targets;
  inputs.reserve(n);
  targets.reserve(n);
  for (const auto& entry : corpus.essays) {
    if (entry.essay.empty()) throw EmptyEssayError("training corpus contains an empty essay");
    inputs.push_back(embed(entry.essay, table).matrix);
    const Rubric& rubric = corpus.rubric_for(entry.essay.prompt_id);
    targets.push_back(unscale_score(static_cast<double>(entry.human_score), rubric));
  }

  auto full_loss = [&]() {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = scorer.raw_score(inputs[i]) - targets[i];
      loss += err * err;
    }
    return loss / static_cast<double>(n);
  };

  auto apply_batch = [&](const std::vector<std::size_t>& batch) {
    std::vector<double> params = scorer.parameters();
    std::vector<double> grad(params.size(), 0.0);
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      const double err = scorer.raw_score(inputs[i]) - targets[i];
      const std::vector<double> g = scorer.parameter_gradient(inputs[i]);
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += scale * err * g[p];
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      params[p] -= options.learning_rate * grad[p];
    }
    scorer.set_parameters(params);
  };

  TrainResult result;
  result.loss_history.reserve(options.epochs + 1);
  Rng rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = full_loss();
    if (!std::isfinite(loss)) {
      throw DivergedError(epoch, "training diverged at epoch " + std::to_string(epoch) +
                                     " (loss is not finite)");
    }
    result.loss_history.push_back(loss);
    if (options.batch_size == 0 || options.batch_size >= n) {
      apply_batch(order);
    } else {
      rng.shuffle(order);
      std::vector<std::size_t> batch;
      for (std::size_t start = 0; start < n; start += options.batch_size) {
        batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(start + options.batch_size, n)));
        apply_batch(batch);
      }
      std::sort(order.begin(), order.end());
    }
  }
  const double final_loss = full_loss();
  if (!std::isfinite(final_loss)) {
    throw DivergedError(options.epochs, "training diverged at epoch " +
                                            std::to_string(options.epochs) +
                                            " (loss is not finite)");
  }
  result.loss_history.push_back(final_loss);
  return result;
}

std::unique_ptr<Scorer> make_scorer(const std::string& kind, std::size_t dim, std::size_t hidden,
                                    std::uint64_t seed) {
  if (kind == "linear-bow") {
    Rng rng(seed);
    std::vector<double> weight = gaussian_vector(rng, dim, kInitStd);
    const double bias = rng.gaussian(0.0, kInitStd);
    return std::make_unique<LinearBowScorer>(std::move(weight), bias);
  }
  if (kind == "mean-pool-mlp") return std::make_unique<MeanPoolMlpScorer>(dim, hidden, seed);
  if (kind == "recurrent") return std::make_unique<RecurrentScorer>(dim, hidden, seed);
  throw InvalidInputError("unknown scorer kind \"" + kind +
                          "\" (expected linear-bow, mean-pool-mlp or recurrent)");
}

void save_checkpoint(const Scorer& scorer, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  std::size_t hidden = 0;
  if (const auto* mlp = dynamic_cast<const MeanPoolMlpScorer*>(&scorer)) {
    hidden = mlp->hidden_size();
  } else if (const auto* rec = dynamic_cast<const RecurrentScorer*>(&scorer)) {
    hidden = rec->hidden_size();
  }
  const std::vector<double> params = scorer.parameters();
  out << "essaylens-checkpoint v1\n";
  out << "kind " << scorer.kind() << '\n';
  out << "dim " << scorer.embedding_dim() << '\n';
  out << "hidden " << hidden << '\n';
  out << "params " << params.size() << '\n';
  for (double p : params) out << format_double(p) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path);
}

std::unique_ptr<Scorer> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "essaylens-checkpoint" || version != "v1") {
    throw ParseError(path + ": not an essaylens v1 checkpoint");
  }
  auto expect_key = [&](const char* key) {
    std::string k;
    in >> k;
    if (k != key) throw ParseError(path + ": expected field \"" + key + "\", got \"" + k + "\"");
  };
  expect_key("kind");
  std::string kind;
  in >> kind;
  expect_key("dim");
  std::size_t dim = 0;
  in >> dim;
  expect_key("hidden");
  std::size_t hidden = 0;
  in >> hidden;
  expect_key("params");
  std::size_t count = 0;
  in >> count;
  if (!in || dim == 0) throw ParseError(path + ": malformed checkpoint header");

  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> params[i])) throw ParseError(path + ": checkpoint truncated at parameter " +
                                             std::to_string(i));
  }
  try {
    auto scorer = make_scorer(kind, dim, hidden == 0 ? 1 : hidden, 0);
    scorer->set_parameters(params);
    return scorer;
  } catch (const InvalidInputError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace essaylens
