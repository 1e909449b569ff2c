#include "llmpred/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

using nlohmann::json;

// Minimal row-major batch matrix; the shapes here are tiny (at most a few
// hundred per side), so plain loops in i-k-j order are plenty.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), d(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return d[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return d[r * cols + c]; }
};

// C = A (R x K) * B (K x C)
Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = &b.d[k * b.cols];
            double* crow = &c.d[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// C = A^T (K x R)^T=(R x K) ... i.e. A is (B x R), result (R x C) = A^T * B
Mat matmul_at_b(const Mat& a, const Mat& b) {
    Mat c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a.at(k, i);
            if (aki == 0.0) continue;
            const double* brow = &b.d[k * b.cols];
            double* crow = &c.d[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

// C = A (B x K) * W^T where W is (R x K): result (B x R)
Mat matmul_a_bt(const Mat& a, const Mat& w, std::size_t w_rows, std::size_t w_cols) {
    Mat c(a.rows, w_rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t r = 0; r < w_rows; ++r) {
            const double* arow = &a.d[i * a.cols];
            const double* wrow = &w.d[r * w_cols];
            double acc = 0.0;
            for (std::size_t k = 0; k < w_cols; ++k) acc += arow[k] * wrow[k];
            c.at(i, r) = acc;
        }
    }
    return c;
}

Mat affine(const Mat& x, const RefinerLayer& layer) {
    Mat w;
    w.rows = layer.in;
    w.cols = layer.out;
    w.d = layer.w; // cheap at these sizes; avoids aliasing concerns
    Mat z = matmul(x, w);
    for (std::size_t i = 0; i < z.rows; ++i) {
        for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += layer.b[j];
    }
    return z;
}

struct LayerCache {
    Mat input;   // activation entering the layer
    Mat zhat;    // normalized pre-activation (batch_norm only)
    Mat h;       // post-tanh activation
    std::vector<double> sigma; // sqrt(var + eps) actually used
    bool batch_stats = false;  // whether batch statistics were used
};

struct ForwardResult {
    Mat out;
    std::vector<LayerCache> caches;
    // refreshed running statistics (only meaningful when batch stats were
    // used and the caller wants to commit them)
    std::vector<std::vector<double>> new_running_mean;
    std::vector<std::vector<double>> new_running_var;
};

ForwardResult forward(const RefinerModel& model, const Mat& x, bool training) {
    const RefinerConfig& cfg = model.config;
    ForwardResult res;
    res.caches.resize(model.hidden.size());
    res.new_running_mean.resize(model.hidden.size());
    res.new_running_var.resize(model.hidden.size());

    Mat h = x;
    for (std::size_t l = 0; l < model.hidden.size(); ++l) {
        const RefinerLayer& layer = model.hidden[l];
        LayerCache& cache = res.caches[l];
        cache.input = h;

        Mat z = affine(h, layer);
        Mat u;
        if (cfg.batch_norm) {
            const std::size_t B = z.rows;
            std::vector<double> mu(layer.out), var(layer.out);
            // Batch statistics need at least two rows; a singleton batch
            // falls back to the running estimates even during training.
            cache.batch_stats = training && B > 1;
            if (cache.batch_stats) {
                for (std::size_t j = 0; j < layer.out; ++j) {
                    double m = 0.0;
                    for (std::size_t i = 0; i < B; ++i) m += z.at(i, j);
                    m /= static_cast<double>(B);
                    double v = 0.0;
                    for (std::size_t i = 0; i < B; ++i) {
                        const double d = z.at(i, j) - m;
                        v += d * d;
                    }
                    mu[j] = m;
                    var[j] = v / static_cast<double>(B); // biased, used for normalization
                }
                res.new_running_mean[l].resize(layer.out);
                res.new_running_var[l].resize(layer.out);
                for (std::size_t j = 0; j < layer.out; ++j) {
                    const double unbiased =
                        var[j] * static_cast<double>(B) / static_cast<double>(B - 1);
                    res.new_running_mean[l][j] =
                        (1.0 - cfg.bn_momentum) * layer.running_mean[j] + cfg.bn_momentum * mu[j];
                    res.new_running_var[l][j] =
                        (1.0 - cfg.bn_momentum) * layer.running_var[j] + cfg.bn_momentum * unbiased;
                }
            } else {
                mu = layer.running_mean;
                var = layer.running_var;
            }
            cache.sigma.resize(layer.out);
            for (std::size_t j = 0; j < layer.out; ++j) {
                cache.sigma[j] = std::sqrt(var[j] + cfg.bn_epsilon);
            }
            cache.zhat = Mat(B, layer.out);
            u = Mat(B, layer.out);
            for (std::size_t i = 0; i < B; ++i) {
                for (std::size_t j = 0; j < layer.out; ++j) {
                    const double zh = (z.at(i, j) - mu[j]) / cache.sigma[j];
                    cache.zhat.at(i, j) = zh;
                    u.at(i, j) = layer.gamma[j] * zh + layer.beta[j];
                }
            }
        } else {
            u = std::move(z);
        }

        cache.h = Mat(u.rows, u.cols);
        for (std::size_t i = 0; i < u.d.size(); ++i) cache.h.d[i] = std::tanh(u.d[i]);
        h = cache.h;
    }

    // Residual head: the network predicts a correction on top of its input.
    res.out = affine(h, model.output);
    for (std::size_t i = 0; i < res.out.d.size(); ++i) res.out.d[i] += x.d[i];
    return res;
}

struct FlatIndex {
    // offsets into the flat parameter vector, per hidden layer then output
    struct LayerSpan {
        std::size_t w = 0, b = 0, gamma = 0, beta = 0;
    };
    std::vector<LayerSpan> hidden;
    LayerSpan output;
    std::size_t total = 0;
};

FlatIndex flat_index(const RefinerModel& model) {
    FlatIndex idx;
    std::size_t pos = 0;
    for (const RefinerLayer& layer : model.hidden) {
        FlatIndex::LayerSpan span;
        span.w = pos;
        pos += layer.w.size();
        span.b = pos;
        pos += layer.b.size();
        if (model.config.batch_norm) {
            span.gamma = pos;
            pos += layer.gamma.size();
            span.beta = pos;
            pos += layer.beta.size();
        }
        idx.hidden.push_back(span);
    }
    idx.output.w = pos;
    pos += model.output.w.size();
    idx.output.b = pos;
    pos += model.output.b.size();
    idx.total = pos;
    return idx;
}

struct BatchResult {
    double loss = 0.0;
    std::vector<double> grad;
    std::vector<std::vector<double>> new_running_mean;
    std::vector<std::vector<double>> new_running_var;
};

BatchResult forward_backward(const RefinerModel& model, const Mat& x, const Mat& y,
                             bool training) {
    const std::size_t B = x.rows;
    const std::size_t H = x.cols;
    ForwardResult fwd = forward(model, x, training);

    BatchResult res;
    res.new_running_mean = std::move(fwd.new_running_mean);
    res.new_running_var = std::move(fwd.new_running_var);

    const double scale = 1.0 / static_cast<double>(B * H);
    double loss = 0.0;
    Mat dout(B, H);
    for (std::size_t i = 0; i < dout.d.size(); ++i) {
        const double diff = fwd.out.d[i] - y.d[i];
        loss += diff * diff;
        dout.d[i] = 2.0 * diff * scale;
    }
    res.loss = loss * scale;

    const FlatIndex idx = flat_index(model);
    res.grad.assign(idx.total, 0.0);

    // Output affine: out = h_last * W + b (+ x, which carries no parameters).
    const Mat& h_last = fwd.caches.empty() ? x : fwd.caches.back().h;
    {
        Mat dw = matmul_at_b(h_last, dout);
        std::copy(dw.d.begin(), dw.d.end(), res.grad.begin() + idx.output.w);
        for (std::size_t j = 0; j < model.output.out; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < B; ++i) acc += dout.at(i, j);
            res.grad[idx.output.b + j] = acc;
        }
    }
    Mat dh;
    {
        Mat w;
        w.rows = model.output.in;
        w.cols = model.output.out;
        w.d = model.output.w;
        dh = matmul_a_bt(dout, w, w.rows, w.cols);
    }

    for (std::size_t l = model.hidden.size(); l-- > 0;) {
        const RefinerLayer& layer = model.hidden[l];
        const LayerCache& cache = fwd.caches[l];
        const FlatIndex::LayerSpan& span = idx.hidden[l];

        // tanh backward: du = dh * (1 - h^2)
        Mat du(B, layer.out);
        for (std::size_t i = 0; i < du.d.size(); ++i) {
            du.d[i] = dh.d[i] * (1.0 - cache.h.d[i] * cache.h.d[i]);
        }

        Mat dz;
        if (model.config.batch_norm) {
            for (std::size_t j = 0; j < layer.out; ++j) {
                double dgamma = 0.0, dbeta = 0.0;
                for (std::size_t i = 0; i < B; ++i) {
                    dgamma += du.at(i, j) * cache.zhat.at(i, j);
                    dbeta += du.at(i, j);
                }
                res.grad[span.gamma + j] = dgamma;
                res.grad[span.beta + j] = dbeta;
            }
            dz = Mat(B, layer.out);
            if (cache.batch_stats) {
                // Backprop through the batch statistics themselves.
                for (std::size_t j = 0; j < layer.out; ++j) {
                    double mean_dzhat = 0.0, mean_dzhat_zhat = 0.0;
                    for (std::size_t i = 0; i < B; ++i) {
                        const double dzh = du.at(i, j) * layer.gamma[j];
                        mean_dzhat += dzh;
                        mean_dzhat_zhat += dzh * cache.zhat.at(i, j);
                    }
                    mean_dzhat /= static_cast<double>(B);
                    mean_dzhat_zhat /= static_cast<double>(B);
                    for (std::size_t i = 0; i < B; ++i) {
                        const double dzh = du.at(i, j) * layer.gamma[j];
                        dz.at(i, j) = (dzh - mean_dzhat -
                                       cache.zhat.at(i, j) * mean_dzhat_zhat) /
                                      cache.sigma[j];
                    }
                }
            } else {
                // Running statistics are constants in the graph.
                for (std::size_t j = 0; j < layer.out; ++j) {
                    for (std::size_t i = 0; i < B; ++i) {
                        dz.at(i, j) = du.at(i, j) * layer.gamma[j] / cache.sigma[j];
                    }
                }
            }
        } else {
            dz = std::move(du);
        }

        Mat dw = matmul_at_b(cache.input, dz);
        std::copy(dw.d.begin(), dw.d.end(), res.grad.begin() + span.w);
        for (std::size_t j = 0; j < layer.out; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < B; ++i) acc += dz.at(i, j);
            res.grad[span.b + j] = acc;
        }

        Mat w;
        w.rows = layer.in;
        w.cols = layer.out;
        w.d = layer.w;
        dh = matmul_a_bt(dz, w, w.rows, w.cols);
    }

    return res;
}

Mat rows_to_mat(const std::vector<std::vector<double>>& rows, std::size_t expect_cols) {
    Mat m(rows.size(), expect_cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != expect_cols) {
            throw Error(ErrorCode::dimension_mismatch,
                        "row " + std::to_string(i) + " has length " +
                            std::to_string(rows[i].size()) + ", expected " +
                            std::to_string(expect_cols));
        }
        std::copy(rows[i].begin(), rows[i].end(), m.d.begin() + i * expect_cols);
    }
    return m;
}

double inference_mse(const RefinerModel& model, const Mat& x, const Mat& y) {
    ForwardResult fwd = forward(model, x, /*training=*/false);
    double acc = 0.0;
    for (std::size_t i = 0; i < fwd.out.d.size(); ++i) {
        const double d = fwd.out.d[i] - y.d[i];
        acc += d * d;
    }
    return acc / static_cast<double>(fwd.out.d.size());
}

void validate_config(const RefinerConfig& cfg) {
    if (cfg.input_dim == 0 || cfg.hidden_widths.empty() || cfg.batch_size == 0 ||
        cfg.epochs == 0) {
        throw Error(ErrorCode::config_error, "refiner config has a zero-sized field");
    }
    for (std::size_t w : cfg.hidden_widths) {
        if (w == 0) throw Error(ErrorCode::config_error, "refiner hidden width must be >= 1");
    }
    if (!(cfg.train_split > 0.0) || !(cfg.train_split < 1.0)) {
        throw Error(ErrorCode::config_error, "train_split must lie in (0, 1)");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw Error(ErrorCode::config_error, "learning_rate must be positive");
    }
}

} // namespace

RefinerModel init_refiner(const RefinerConfig& cfg) {
    validate_config(cfg);
    RefinerModel model;
    model.config = cfg;
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> dims;
    dims.push_back(cfg.input_dim);
    for (std::size_t w : cfg.hidden_widths) dims.push_back(w);
    dims.push_back(cfg.input_dim);

    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        RefinerLayer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        const bool is_output = (l + 2 == dims.size());
        // Xavier-uniform for the hidden stack; the output layer starts near
        // zero so the residual model begins at the identity map.
        const double lim =
            is_output ? 1e-3
                      : std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        std::uniform_real_distribution<double> dist(-lim, lim);
        layer.w.resize(layer.in * layer.out);
        for (double& v : layer.w) v = dist(rng);
        layer.b.assign(layer.out, 0.0);
        if (!is_output && cfg.batch_norm) {
            layer.gamma.assign(layer.out, 1.0);
            layer.beta.assign(layer.out, 0.0);
            layer.running_mean.assign(layer.out, 0.0);
            layer.running_var.assign(layer.out, 1.0);
        }
        if (is_output) {
            model.output = std::move(layer);
        } else {
            model.hidden.push_back(std::move(layer));
        }
    }
    return model;
}

std::vector<double> model_parameters(const RefinerModel& model) {
    const FlatIndex idx = flat_index(model);
    std::vector<double> flat(idx.total);
    for (std::size_t l = 0; l < model.hidden.size(); ++l) {
        const RefinerLayer& layer = model.hidden[l];
        const FlatIndex::LayerSpan& span = idx.hidden[l];
        std::copy(layer.w.begin(), layer.w.end(), flat.begin() + span.w);
        std::copy(layer.b.begin(), layer.b.end(), flat.begin() + span.b);
        if (model.config.batch_norm) {
            std::copy(layer.gamma.begin(), layer.gamma.end(), flat.begin() + span.gamma);
            std::copy(layer.beta.begin(), layer.beta.end(), flat.begin() + span.beta);
        }
    }
    std::copy(model.output.w.begin(), model.output.w.end(), flat.begin() + idx.output.w);
    std::copy(model.output.b.begin(), model.output.b.end(), flat.begin() + idx.output.b);
    return flat;
}

void set_model_parameters(RefinerModel& model, const std::vector<double>& flat) {
    const FlatIndex idx = flat_index(model);
    if (flat.size() != idx.total) {
        throw Error(ErrorCode::dimension_mismatch,
                    "parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                        std::to_string(idx.total));
    }
    for (std::size_t l = 0; l < model.hidden.size(); ++l) {
        RefinerLayer& layer = model.hidden[l];
        const FlatIndex::LayerSpan& span = idx.hidden[l];
        std::copy_n(flat.begin() + span.w, layer.w.size(), layer.w.begin());
        std::copy_n(flat.begin() + span.b, layer.b.size(), layer.b.begin());
        if (model.config.batch_norm) {
            std::copy_n(flat.begin() + span.gamma, layer.gamma.size(), layer.gamma.begin());
            std::copy_n(flat.begin() + span.beta, layer.beta.size(), layer.beta.begin());
        }
    }
    std::copy_n(flat.begin() + idx.output.w, model.output.w.size(), model.output.w.begin());
    std::copy_n(flat.begin() + idx.output.b, model.output.b.size(), model.output.b.begin());
}

std::pair<double, std::vector<double>> training_loss_gradient(
    const RefinerModel& model, const std::vector<std::vector<double>>& x,
    const std::vector<std::vector<double>>& y) {
    if (x.empty() || x.size() != y.size()) {
        throw Error(ErrorCode::dimension_mismatch, "x and y must be equal-length and non-empty");
    }
    const Mat mx = rows_to_mat(x, model.config.input_dim);
    const Mat my = rows_to_mat(y, model.config.input_dim);
    BatchResult res = forward_backward(model, mx, my, /*training=*/true);
    return {res.loss, std::move(res.grad)};
}

std::pair<RefinerModel, TrainingLog> train_refiner(const std::vector<RefinerPair>& pairs,
                                                   const RefinerConfig& cfg) {
    validate_config(cfg);
    if (pairs.size() < 2) {
        throw Error(ErrorCode::insufficient_data,
                    "refiner training needs at least 2 pairs, got " +
                        std::to_string(pairs.size()));
    }
    const std::size_t H = cfg.input_dim;
    for (const RefinerPair& p : pairs) {
        if (p.first.size() != H || p.second.size() != H) {
            throw Error(ErrorCode::dimension_mismatch,
                        "refiner pair length differs from input_dim=" + std::to_string(H));
        }
        for (double v : p.first) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::not_a_number, "refiner pair contains non-finite value");
            }
        }
        for (double v : p.second) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::not_a_number, "refiner pair contains non-finite value");
            }
        }
    }

    RefinerModel model = init_refiner(cfg);
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull); // distinct stream from init

    // Seeded 70/30 (train_split) shuffle-split.
    std::vector<std::size_t> perm(pairs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(cfg.train_split * static_cast<double>(pairs.size()));
    n_train = std::min(std::max<std::size_t>(n_train, 1), pairs.size() - 1);

    auto gather = [&](std::size_t begin, std::size_t end) {
        Mat x(end - begin, H), y(end - begin, H);
        for (std::size_t i = begin; i < end; ++i) {
            const RefinerPair& p = pairs[perm[i]];
            std::copy(p.first.begin(), p.first.end(), x.d.begin() + (i - begin) * H);
            std::copy(p.second.begin(), p.second.end(), y.d.begin() + (i - begin) * H);
        }
        return std::pair<Mat, Mat>{std::move(x), std::move(y)};
    };
    auto [train_x, train_y] = gather(0, n_train);
    auto [val_x, val_y] = gather(n_train, pairs.size());

    TrainingLog log;
    log.initial_val_loss = inference_mse(model, val_x, val_y);

    // Adam state over the flat parameter vector.
    std::vector<double> params = model_parameters(model);
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long long step = 0;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;

        for (std::size_t s = 0; s < n_train; s += cfg.batch_size) {
            const std::size_t e = std::min(s + cfg.batch_size, n_train);
            Mat bx(e - s, H), by(e - s, H);
            for (std::size_t i = s; i < e; ++i) {
                const std::size_t row = order[i];
                std::copy_n(train_x.d.begin() + row * H, H, bx.d.begin() + (i - s) * H);
                std::copy_n(train_y.d.begin() + row * H, H, by.d.begin() + (i - s) * H);
            }

            BatchResult res = forward_backward(model, bx, by, /*training=*/true);
            if (!std::isfinite(res.loss)) {
                throw Error(ErrorCode::non_finite_loss,
                            "training diverged at epoch " + std::to_string(epoch));
            }
            epoch_loss += res.loss;
            ++batches;

            for (std::size_t l = 0; l < model.hidden.size(); ++l) {
                if (!res.new_running_mean[l].empty()) {
                    model.hidden[l].running_mean = std::move(res.new_running_mean[l]);
                    model.hidden[l].running_var = std::move(res.new_running_var[l]);
                }
            }

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * res.grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * res.grad[i] * res.grad[i];
                params[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam_eps);
            }
            set_model_parameters(model, params);
        }

        EpochStats stats;
        stats.train_loss = batches > 0 ? epoch_loss / static_cast<double>(batches) : 0.0;
        stats.val_loss = inference_mse(model, val_x, val_y);
        log.epochs.push_back(stats);
    }

    model.trained = true;
    log.final_val_loss = log.epochs.back().val_loss;
    return {std::move(model), std::move(log)};
}

std::vector<double> refine_low(const RefinerModel& model, const std::vector<double>& predicted_low) {
    if (!model.trained) {
        throw Error(ErrorCode::untrained_model, "refine_low called on an untrained model");
    }
    if (predicted_low.size() != model.config.input_dim) {
        throw Error(ErrorCode::dimension_mismatch,
                    "refine_low input length " + std::to_string(predicted_low.size()) +
                        ", model expects " + std::to_string(model.config.input_dim));
    }
    Mat x(1, model.config.input_dim);
    std::copy(predicted_low.begin(), predicted_low.end(), x.d.begin());
    ForwardResult fwd = forward(model, x, /*training=*/false);
    return fwd.out.d;
}

Series refine_low(const RefinerModel& model, const Series& predicted_low) {
    Series out;
    out.channel_id = predicted_low.channel_id;
    out.values = refine_low(model, predicted_low.values);
    return out;
}

std::string refiner_to_json(const RefinerModel& model) {
    json layers = json::array();
    auto layer_json = [&](const RefinerLayer& layer) {
        json j = {{"in", layer.in}, {"out", layer.out}, {"w", layer.w}, {"b", layer.b}};
        if (!layer.gamma.empty()) {
            j["gamma"] = layer.gamma;
            j["beta"] = layer.beta;
            j["running_mean"] = layer.running_mean;
            j["running_var"] = layer.running_var;
        }
        return j;
    };
    for (const RefinerLayer& layer : model.hidden) layers.push_back(layer_json(layer));

    const json j = {
        {"format_version", 1},
        {"trained", model.trained},
        {"config",
         {{"input_dim", model.config.input_dim},
          {"hidden_widths", model.config.hidden_widths},
          {"batch_norm", model.config.batch_norm},
          {"learning_rate", model.config.learning_rate},
          {"batch_size", model.config.batch_size},
          {"epochs", model.config.epochs},
          {"train_split", model.config.train_split},
          {"seed", model.config.seed},
          {"bn_momentum", model.config.bn_momentum},
          {"bn_epsilon", model.config.bn_epsilon}}},
        {"hidden", layers},
        {"output", layer_json(model.output)},
    };
    return j.dump();
}

RefinerModel refiner_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorCode::parse_error, "refiner checkpoint is not valid JSON");
    }
    if (j.value("format_version", -1) != 1) {
        throw Error(ErrorCode::config_error, "unsupported refiner checkpoint version");
    }
    try {
        RefinerModel model;
        const json& cj = j.at("config");
        model.config.input_dim = cj.at("input_dim").get<std::size_t>();
        model.config.hidden_widths = cj.at("hidden_widths").get<std::vector<std::size_t>>();
        model.config.batch_norm = cj.at("batch_norm").get<bool>();
        model.config.learning_rate = cj.at("learning_rate").get<double>();
        model.config.batch_size = cj.at("batch_size").get<std::size_t>();
        model.config.epochs = cj.at("epochs").get<std::size_t>();
        model.config.train_split = cj.at("train_split").get<double>();
        model.config.seed = cj.at("seed").get<std::uint64_t>();
        model.config.bn_momentum = cj.at("bn_momentum").get<double>();
        model.config.bn_epsilon = cj.at("bn_epsilon").get<double>();
        model.trained = j.at("trained").get<bool>();

        auto layer_from = [](const json& lj) {
            RefinerLayer layer;
            layer.in = lj.at("in").get<std::size_t>();
            layer.out = lj.at("out").get<std::size_t>();
            layer.w = lj.at("w").get<std::vector<double>>();
            layer.b = lj.at("b").get<std::vector<double>>();
            if (lj.contains("gamma")) {
                layer.gamma = lj.at("gamma").get<std::vector<double>>();
                layer.beta = lj.at("beta").get<std::vector<double>>();
                layer.running_mean = lj.at("running_mean").get<std::vector<double>>();
                layer.running_var = lj.at("running_var").get<std::vector<double>>();
            }
            if (layer.w.size() != layer.in * layer.out || layer.b.size() != layer.out) {
                throw Error(ErrorCode::dimension_mismatch, "checkpoint layer shape mismatch");
            }
            return layer;
        };
        for (const json& lj : j.at("hidden")) model.hidden.push_back(layer_from(lj));
        model.output = layer_from(j.at("output"));
        return model;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error,
                    std::string("refiner checkpoint missing fields: ") + e.what());
    }
}

} // namespace llmpred
