#include "grounder/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grounder/error.hpp"
#include "grounder/kernels.hpp"
#include "grounder/rng.hpp"

namespace grounder {

ContrastiveResult contrastive_loss_from_logits(const Matrix& logits) {
    const std::size_t b = logits.rows;
    if (b < 2) throw ArgumentError("contrastive batch needs B >= 2, got " + std::to_string(b));
    if (logits.cols != b) throw ArgumentError("contrastive logits must be B x B");

    ContrastiveResult out;
    out.probabilities = Matrix(b, b);
    out.grad_logits = Matrix(b, b);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        const auto row = logits.row(i);
        const double peak = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (double s : row) denom += std::exp(s - peak);
        const double log_denom = std::log(denom);
        total += log_denom - (row[i] - peak);
        for (std::size_t j = 0; j < b; ++j) {
            const double p = std::exp(row[j] - peak - log_denom);
            out.probabilities(i, j) = p;
            out.grad_logits(i, j) = (p - (i == j ? 1.0 : 0.0)) * inv_b;
        }
    }
    out.loss = total * inv_b;
    return out;
}

ContrastiveResult contrastive_loss(const ContrastiveBatch& batch) {
    const auto& q = batch.queries;
    const auto& t = batch.knowledge;
    if (q.rows != t.rows || q.cols != t.cols) throw ArgumentError("Q and T must have the same shape");
    const std::size_t b = q.rows;
    const std::size_t d = q.cols;
    if (b < 2) throw ArgumentError("contrastive batch needs B >= 2, got " + std::to_string(b));

    Matrix logits(b, b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += q(i, k) * t(j, k);
            logits(i, j) = dot;
        }
    }
    auto out = contrastive_loss_from_logits(logits);
    out.grad_queries = Matrix(b, d);
    out.grad_knowledge = Matrix(b, d);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double g = out.grad_logits(i, j);
            for (std::size_t k = 0; k < d; ++k) {
                out.grad_queries(i, k) += g * t(j, k);
                out.grad_knowledge(j, k) += g * q(i, k);
            }
        }
    }
    return out;
}

double l2_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("l2_distance: dimension mismatch");
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - y[j];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

double l2_distance(const EmbeddingVector& x, const EmbeddingVector& y) {
    if (x.dims() != y.dims()) throw ArgumentError("l2_distance: dimension mismatch");
    double sq = 0.0;
    for (std::size_t j = 0; j < x.dims(); ++j) {
        const double diff = static_cast<double>(x.values[j]) - y.values[j];
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

TripletResult triplet_loss(const TripletItem& item) {
    const std::size_t d = item.anchor.size();
    if (item.positive.size() != d || item.negative.size() != d) {
        throw ArgumentError("triplet_loss: dimension mismatch");
    }
    if (!(item.margin > 0.0)) throw ArgumentError("triplet margin must be > 0");

    TripletResult out;
    const double d_pos = l2_distance(item.anchor, item.positive);
    const double d_neg = l2_distance(item.anchor, item.negative);
    out.activation = d_pos - d_neg + item.margin;
    out.active = out.activation > 0.0;
    out.loss = out.active ? out.activation : 0.0;
    out.grad_anchor.assign(d, 0.0);
    out.grad_positive.assign(d, 0.0);
    out.grad_negative.assign(d, 0.0);
    if (!out.active) return out;

    // d/da ||a - p|| = (a - p) / ||a - p||; the negative term enters with a minus sign.
    for (std::size_t j = 0; j < d; ++j) {
        const double toward_pos = d_pos > 0.0 ? (item.anchor[j] - item.positive[j]) / d_pos : 0.0;
        const double toward_neg = d_neg > 0.0 ? (item.anchor[j] - item.negative[j]) / d_neg : 0.0;
        out.grad_anchor[j] = toward_pos - toward_neg;
        out.grad_positive[j] = -toward_pos;
        out.grad_negative[j] = toward_neg;
    }
    return out;
}

void AdamConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ArgumentError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ArgumentError("Adam eps must be > 0");
    if (!(lr_peak >= 0.0) || !std::isfinite(lr_peak)) throw ArgumentError("lr_peak must be finite and >= 0");
    if (total_steps == 0) throw ArgumentError("total_steps must be >= 1");
    if (warmup_steps > total_steps) throw ArgumentError("warmup_steps exceeds total_steps");
}

double lr_at(const AdamConfig& c, std::size_t step) {
    if (step < 1 || step > c.total_steps) {
        throw ArgumentError("step " + std::to_string(step) + " outside [1, " + std::to_string(c.total_steps) + "]");
    }
    if (step <= c.warmup_steps) {
        return c.lr_peak * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
    }
    return c.lr_peak * static_cast<double>(c.total_steps - step) /
           static_cast<double>(c.total_steps - c.warmup_steps);
}

Adam::Adam(AdamConfig config, std::size_t parameter_count)
    : config_(config), first_(parameter_count, 0.0f), second_(parameter_count, 0.0f) {
    config_.validate();
}

template <class Kernel>
void Adam::apply(std::span<float> params, std::span<const float> grads, Kernel&& kernel) {
    if (params.size() != first_.size() || grads.size() != first_.size()) {
        throw ArgumentError("Adam: parameter/gradient shape mismatch");
    }
    for (float g : grads) {
        if (!std::isfinite(g)) throw ArgumentError("Adam: non-finite gradient");
    }
    const std::size_t t = step_ + 1;
    kernels::AdamHyper h;
    h.lr = lr_at(config_, t);
    h.beta1 = config_.beta1;
    h.beta2 = config_.beta2;
    h.eps = config_.eps;
    h.bias_correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
    h.bias_correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
    kernel(params, grads, first_, second_, h);
    step_ = t;
}

void Adam::step(std::span<float> params, std::span<const float> grads) {
    apply(params, grads, [](auto&&... args) { kernels::omp::adam_update(args...); });
}

void Adam::step_serial(std::span<float> params, std::span<const float> grads) {
    apply(params, grads, [](auto&&... args) { kernels::serial::adam_update(args...); });
}

GradCheckReport grad_check(const LossWithGradient& fn, std::span<const double> params,
                           const GradCheckOptions& options) {
    GradCheckReport report;
    std::vector<double> x(params.begin(), params.end());
    std::vector<double> analytic(x.size(), 0.0);
    std::vector<double> scratch(x.size(), 0.0);
    fn(x, analytic);

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
        Rng rng(options.seed);
        rng.shuffle(std::span<std::size_t>(coords));
        coords.resize(options.max_coordinates);
        std::sort(coords.begin(), coords.end());
    }

    for (std::size_t c : coords) {
        const double saved = x[c];
        x[c] = saved + options.step;
        const double up = fn(x, scratch);
        x[c] = saved - options.step;
        const double down = fn(x, scratch);
        x[c] = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        const double abs_err = std::abs(analytic[c] - numeric);
        const double denom = std::max({std::abs(analytic[c]), std::abs(numeric), options.denominator_floor});
        const double rel_err = abs_err / denom;
        ++report.coordinates_checked;
        report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
        if (rel_err > report.max_relative_error) {
            report.max_relative_error = rel_err;
            report.worst_coordinate = c;
        }
        if (!(rel_err < options.tolerance)) report.failures.push_back(c);
    }
    return report;
}

}  // namespace grounder
