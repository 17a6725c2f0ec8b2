#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "grounder/dual_encoder.hpp"

namespace grounder {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data).subspan(i * cols, cols);
    }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// In-batch contrastive objective: row i of `queries` is paired with row i of
// `knowledge`; every other knowledge row in the batch is a negative.
struct ContrastiveBatch {
    Matrix queries;    // B x d
    Matrix knowledge;  // B x d
};

struct ContrastiveResult {
    double loss = 0.0;
    Matrix probabilities;  // row-wise softmax of the logits
    Matrix grad_logits;    // dL/dS
    Matrix grad_queries;   // dL/dQ
    Matrix grad_knowledge; // dL/dT
};

// loss = mean_i -log softmax(S_i)[i] over a B x B logit matrix, B >= 2.
// Softmax uses max subtraction. Fills loss, probabilities and grad_logits.
ContrastiveResult contrastive_loss_from_logits(const Matrix& logits);

// Same objective with S = Q T^T; gradients flow back to Q and T.
ContrastiveResult contrastive_loss(const ContrastiveBatch& batch);

struct TripletItem {
    std::span<const double> anchor;
    std::span<const double> positive;
    std::span<const double> negative;
    double margin = 1.0;
};

struct TripletResult {
    double loss = 0.0;
    double activation = 0.0;  // d(a,p) - d(a,n) + m
    bool active = false;
    std::vector<double> grad_anchor;
    std::vector<double> grad_positive;
    std::vector<double> grad_negative;
};

// max(d(a,p) - d(a,n) + m, 0) with d the Euclidean distance. The distance
// gradient at coincident points is taken as zero.
TripletResult triplet_loss(const TripletItem& item);

double l2_distance(std::span<const double> x, std::span<const double> y);
double l2_distance(const EmbeddingVector& x, const EmbeddingVector& y);

struct AdamConfig {
    double lr_peak = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t warmup_steps = 5;
    std::size_t total_steps = 1;

    void validate() const;
};

// Linear warmup to lr_peak over warmup_steps, then linear decay to 0 at
// total_steps. step is 1-based; throws ArgumentError outside [1, total_steps].
double lr_at(const AdamConfig& config, std::size_t step);

// Bias-corrected Adam over one float parameter tensor.
class Adam {
public:
    Adam(AdamConfig config, std::size_t parameter_count);

    // One update with the scheduled learning rate; throws ArgumentError on a
    // shape mismatch or a non-finite gradient (parameters untouched).
    void step(std::span<float> params, std::span<const float> grads);
    // Same update through the serial reference kernel.
    void step_serial(std::span<float> params, std::span<const float> grads);

    std::size_t steps_taken() const { return step_; }
    const AdamConfig& config() const { return config_; }
    std::span<const float> first_moment() const { return first_; }
    std::span<const float> second_moment() const { return second_; }

private:
    template <class Kernel>
    void apply(std::span<float> params, std::span<const float> grads, Kernel&& kernel);

    AdamConfig config_;
    std::size_t step_ = 0;
    std::vector<float> first_;
    std::vector<float> second_;
};

// Loss over a flat parameter vector; writes the analytic gradient into grad.
using LossWithGradient = std::function<double(std::span<const double> params, std::span<double> grad)>;

struct GradCheckOptions {
    double step = 1e-5;            // central-difference half width
    double tolerance = 1e-4;       // max relative error accepted
    double denominator_floor = 1e-6;
    std::size_t max_coordinates = 0;  // 0 = every coordinate, else a seeded sample
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t worst_coordinate = 0;
    std::size_t coordinates_checked = 0;
    std::vector<std::size_t> failures;

    bool passed() const { return failures.empty(); }
};

// Central finite differences against the analytic gradient.
// Relative error = |a - n| / max(|a|, |n|, denominator_floor).
GradCheckReport grad_check(const LossWithGradient& fn, std::span<const double> params,
                           const GradCheckOptions& options = {});

}  // namespace grounder
