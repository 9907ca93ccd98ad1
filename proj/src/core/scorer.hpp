#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "embedding.hpp"

namespace essaylens {

// A differentiable scoring function over an embedded essay. raw_score maps
// the token-embedding matrix to [0, 1]; input_gradient returns d raw / d E
// with the same shape. parameter_gradient returns d raw / d theta against
// the flat layout used by parameters()/set_parameters(), which is what the
// trainer updates. Implementations must be pure and deterministic.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t embedding_dim() const = 0;

  virtual double raw_score(const Mat& embedded) const = 0;
  virtual Mat input_gradient(const Mat& embedded) const = 0;

  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(const std::vector<double>& params) = 0;
  virtual std::vector<double> parameter_gradient(const Mat& embedded) const = 0;

  virtual std::unique_ptr<Scorer> clone() const = 0;

 protected:
  static void require_rows(const Mat& embedded);
};

// score = clamp01(bias + sum_t w . E_t). Linear in the unclamped region, so
// integrated gradients against a zero baseline have the closed form w_i * x_i
// per dimension; used as the analytic oracle throughout the tests.
class LinearBowScorer final : public Scorer {
 public:
  LinearBowScorer(std::vector<double> weight, double bias);

  std::string kind() const override { return "linear-bow"; }
  std::size_t embedding_dim() const override { return weight_.size(); }
  double raw_score(const Mat& embedded) const override;
  Mat input_gradient(const Mat& embedded) const override;
  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& params) override;
  std::vector<double> parameter_gradient(const Mat& embedded) const override;
  std::unique_ptr<Scorer> clone() const override;

  const std::vector<double>& weight() const { return weight_; }
  double bias() const { return bias_; }

 private:
  double presum(const Mat& embedded) const;
  std::vector<double> weight_;
  double bias_;
};

// score = sigmoid(w_out . tanh(W m + b) + b_out) with m the token-mean of the
// embedding rows. Column sums are taken in sorted value order, which makes
// the pooled mean -- and therefore the score -- invariant to token order down
// to the last bit, not just in exact arithmetic.
class MeanPoolMlpScorer final : public Scorer {
 public:
  MeanPoolMlpScorer(std::size_t dim, std::size_t hidden, std::uint64_t seed);
  MeanPoolMlpScorer(Mat hidden_weight, std::vector<double> hidden_bias,
                    std::vector<double> out_weight, double out_bias);

  std::string kind() const override { return "mean-pool-mlp"; }
  std::size_t embedding_dim() const override { return dim_; }
  std::size_t hidden_size() const { return hidden_; }
  double raw_score(const Mat& embedded) const override;
  Mat input_gradient(const Mat& embedded) const override;
  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& params) override;
  std::vector<double> parameter_gradient(const Mat& embedded) const override;
  std::unique_ptr<Scorer> clone() const override;

 private:
  struct Forward {
    std::vector<double> mean;        // dim
    std::vector<double> activation;  // hidden, tanh(W m + b)
    double output = 0.0;             // sigmoid(..)
  };
  Forward forward(const Mat& embedded) const;

  std::size_t dim_;
  std::size_t hidden_;
  Mat hidden_weight_;               // hidden x dim
  std::vector<double> hidden_bias_;
  std::vector<double> out_weight_;
  double out_bias_;
};

// h_t = tanh(Wx x_t + Wh h_{t-1} + b), score = sigmoid(w_out . h_T + b_out).
// Order-sensitive by construction; gradients are backpropagation through time.
class RecurrentScorer final : public Scorer {
 public:
  RecurrentScorer(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::string kind() const override { return "recurrent"; }
  std::size_t embedding_dim() const override { return dim_; }
  std::size_t hidden_size() const { return hidden_; }
  double raw_score(const Mat& embedded) const override;
  Mat input_gradient(const Mat& embedded) const override;
  std::vector<double> parameters() const override;
  void set_parameters(const std::vector<double>& params) override;
  std::vector<double> parameter_gradient(const Mat& embedded) const override;
  std::unique_ptr<Scorer> clone() const override;

 private:
  struct Forward {
    Mat states;         // (n_tokens + 1) x hidden, row 0 is h_0 = 0
    double output = 0.0;
  };
  Forward forward(const Mat& embedded) const;
  struct Backward {
    Mat d_input;
    std::vector<double> d_params;
  };
  Backward backward(const Mat& embedded, bool want_params) const;

  std::size_t dim_;
  std::size_t hidden_;
  Mat input_weight_;      // hidden x dim
  Mat recurrent_weight_;  // hidden x hidden
  std::vector<double> bias_;
  std::vector<double> out_weight_;
  double out_bias_;
};

struct ScaledScore {
  double raw = 0.0;  // in [0, 1]
  double scaled = 0.0;
  Rubric rubric;
};

ScaledScore scale_score(double raw, const Rubric& rubric);
double unscale_score(double scaled, const Rubric& rubric);

// Throws EmptyEssayError on a zero-token essay.
ScaledScore score_essay(const Scorer& scorer, const EmbeddedEssay& essay, const Rubric& rubric);

// Empty essays score the rubric minimum instead of erroring; perturbations
// that strip every token rely on this.
ScaledScore score_essay_or_min(const Scorer& scorer, const EmbeddedEssay& essay,
                               const Rubric& rubric);

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;      // only consumed by mini-batch shuffling
};

struct TrainResult {
  // loss_history[e] is the full-corpus MSE before epoch e's update;
  // the final entry is the post-training loss (size epochs + 1).
  std::vector<double> loss_history;
};

// Gradient descent on mean squared error between raw scores and labels
// normalized into [0, 1] by each essay's rubric. Throws DivergedError when
// the loss stops being finite.
TrainResult train(Scorer& scorer, const LabeledCorpus& corpus, const EmbeddingTable& table,
                  const TrainOptions& options);

std::unique_ptr<Scorer> make_scorer(const std::string& kind, std::size_t dim, std::size_t hidden,
                                    std::uint64_t seed);

void save_checkpoint(const Scorer& scorer, const std::string& path);
std::unique_ptr<Scorer> load_checkpoint(const std::string& path);

}  // namespace essaylens
