#include "pauselab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace pauselab {

namespace {

constexpr double kLnEps = 1e-5;

template <class Real>
void check_ids(const ModelConfig& cfg, const std::vector<TokenId>& ids) {
    if (ids.empty()) throw std::invalid_argument("empty token sequence");
    if (static_cast<int>(ids.size()) > cfg.max_seq_len)
        throw std::invalid_argument("sequence length " + std::to_string(ids.size()) +
                                    " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    for (TokenId id : ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::invalid_argument("token id " + std::to_string(id) + " out of range for vocab_size " +
                                        std::to_string(cfg.vocab_size));
    (void)sizeof(Real);
}

// out[n×p] (+)= a[n×m] · b[m×p]
template <class Real>
void matmul(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out, bool accumulate) {
    assert(a.cols == b.rows && a.rows == out.rows && b.cols == out.cols);
    if (!accumulate) out.zero();
    for (int i = 0; i < a.rows; ++i) {
        const Real* ai = a.row(i);
        Real* oi = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const Real aik = ai[k];
            if (aik == Real(0)) continue;
            const Real* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
        }
    }
}

// out[m×p] += a[n×m]^T · b[n×p]
template <class Real>
void matmul_at_b(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out) {
    assert(a.rows == b.rows && a.cols == out.rows && b.cols == out.cols);
    for (int i = 0; i < a.rows; ++i) {
        const Real* ai = a.row(i);
        const Real* bi = b.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const Real aik = ai[k];
            if (aik == Real(0)) continue;
            Real* ok = out.row(k);
            for (int j = 0; j < b.cols; ++j) ok[j] += aik * bi[j];
        }
    }
}

// out[n×m] += a[n×p] · b[m×p]^T
template <class Real>
void matmul_a_bt(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out) {
    assert(a.cols == b.cols && a.rows == out.rows && b.rows == out.cols);
    for (int i = 0; i < a.rows; ++i) {
        const Real* ai = a.row(i);
        Real* oi = out.row(i);
        for (int k = 0; k < b.rows; ++k) {
            const Real* bk = b.row(k);
            Real acc = 0;
            for (int j = 0; j < a.cols; ++j) acc += ai[j] * bk[j];
            oi[k] += acc;
        }
    }
}

template <class Real>
Real gelu(Real x) {
    const Real c = Real(0.7978845608028654);  // sqrt(2/pi)
    const Real a = Real(0.044715);
    return Real(0.5) * x * (Real(1) + std::tanh(c * (x + a * x * x * x)));
}

template <class Real>
Real gelu_grad(Real x) {
    const Real c = Real(0.7978845608028654);
    const Real a = Real(0.044715);
    const Real u = c * (x + a * x * x * x);
    const Real t = std::tanh(u);
    return Real(0.5) * (Real(1) + t) + Real(0.5) * x * (Real(1) - t * t) * c * (Real(1) + Real(3) * a * x * x);
}

// y = gain ⊙ (x-μ)/σ + bias, per row; caches μ and 1/σ.
template <class Real>
void layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& bias,
                Tensor<Real>& y, std::vector<Real>& mu, std::vector<Real>& rstd) {
    const int n = x.rows, d = x.cols;
    mu.resize(n);
    rstd.resize(n);
    for (int t = 0; t < n; ++t) {
        const Real* xt = x.row(t);
        Real m = 0;
        for (int i = 0; i < d; ++i) m += xt[i];
        m /= Real(d);
        Real var = 0;
        for (int i = 0; i < d; ++i) {
            const Real c = xt[i] - m;
            var += c * c;
        }
        var /= Real(d);
        const Real r = Real(1) / std::sqrt(var + Real(kLnEps));
        mu[t] = m;
        rstd[t] = r;
        Real* yt = y.row(t);
        const Real* g = gain.row(0);
        const Real* b = bias.row(0);
        for (int i = 0; i < d; ++i) yt[i] = g[i] * (xt[i] - m) * r + b[i];
    }
}

template <class Real>
void layer_norm_backward(const Tensor<Real>& x, const Tensor<Real>& gain, const std::vector<Real>& mu,
                         const std::vector<Real>& rstd, const Tensor<Real>& dy, Tensor<Real>& dx,
                         Tensor<Real>& dgain, Tensor<Real>& dbias) {
    const int n = x.rows, d = x.cols;
    for (int t = 0; t < n; ++t) {
        const Real* xt = x.row(t);
        const Real* dyt = dy.row(t);
        const Real* g = gain.row(0);
        Real* dgt = dgain.row(0);
        Real* dbt = dbias.row(0);
        const Real m = mu[t], r = rstd[t];
        Real sum_gdy = 0, sum_gdy_xhat = 0;
        for (int i = 0; i < d; ++i) {
            const Real xhat = (xt[i] - m) * r;
            const Real gdy = g[i] * dyt[i];
            sum_gdy += gdy;
            sum_gdy_xhat += gdy * xhat;
            dgt[i] += dyt[i] * xhat;
            dbt[i] += dyt[i];
        }
        sum_gdy /= Real(d);
        sum_gdy_xhat /= Real(d);
        Real* dxt = dx.row(t);
        for (int i = 0; i < d; ++i) {
            const Real xhat = (xt[i] - m) * r;
            dxt[i] += (g[i] * dyt[i] - sum_gdy - xhat * sum_gdy_xhat) * r;
        }
    }
}

template <class Real>
struct LayerCache {
    Tensor<Real> x_in;  // layer input
    std::vector<Real> ln1_mu, ln1_rstd;
    Tensor<Real> a;        // post-ln1
    Tensor<Real> q, k, v;  // n × d_model
    Tensor<Real> att;      // (num_heads·n) × n, causal rows softmaxed
    Tensor<Real> o;        // concat head outputs, pre-projection
    Tensor<Real> x_mid;    // after attention residual
    std::vector<Real> ln2_mu, ln2_rstd;
    Tensor<Real> b;      // post-ln2
    Tensor<Real> h_pre;  // n × d_ff
    Tensor<Real> h_act;
};

template <class Real>
struct ForwardCache {
    std::vector<LayerCache<Real>> layers;
    Tensor<Real> x_final;
    std::vector<Real> lnf_mu, lnf_rstd;
    Tensor<Real> y;  // post-final-ln
    Tensor<Real> logits;
};

template <class Real>
void forward_cached(const Model<Real>& model, const std::vector<TokenId>& ids, ForwardCache<Real>& fc) {
    const ModelConfig& cfg = model.config;
    check_ids<Real>(cfg, ids);
    const int n = static_cast<int>(ids.size());
    const int d = cfg.d_model, heads = cfg.num_heads, dh = d / heads;
    const Real scale = Real(1) / std::sqrt(Real(dh));

    Tensor<Real> x(n, d);
    for (int t = 0; t < n; ++t) {
        const Real* te = model.token_embeddings.row(ids[t]);
        const Real* pe = model.positional_embeddings.row(t);
        Real* xt = x.row(t);
        for (int i = 0; i < d; ++i) xt[i] = te[i] + pe[i];
    }

    fc.layers.assign(cfg.num_layers, {});
    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerParams<Real>& lp = model.layers[l];
        LayerCache<Real>& lc = fc.layers[l];
        lc.x_in = x;
        lc.a = Tensor<Real>(n, d);
        layer_norm(lc.x_in, lp.ln1_gain, lp.ln1_bias, lc.a, lc.ln1_mu, lc.ln1_rstd);

        lc.q = Tensor<Real>(n, d);
        lc.k = Tensor<Real>(n, d);
        lc.v = Tensor<Real>(n, d);
        matmul(lc.a, lp.w_query, lc.q, false);
        matmul(lc.a, lp.w_key, lc.k, false);
        matmul(lc.a, lp.w_value, lc.v, false);

        lc.att = Tensor<Real>(heads * n, n);
        lc.o = Tensor<Real>(n, d);
        for (int h = 0; h < heads; ++h) {
            const int off = h * dh;
            for (int t = 0; t < n; ++t) {
                Real* arow = lc.att.row(h * n + t);
                const Real* qt = lc.q.row(t) + off;
                Real mx = -std::numeric_limits<Real>::infinity();
                for (int u = 0; u <= t; ++u) {
                    const Real* ku = lc.k.row(u) + off;
                    Real s = 0;
                    for (int i = 0; i < dh; ++i) s += qt[i] * ku[i];
                    s *= scale;
                    arow[u] = s;
                    mx = std::max(mx, s);
                }
                Real denom = 0;
                for (int u = 0; u <= t; ++u) {
                    arow[u] = std::exp(arow[u] - mx);
                    denom += arow[u];
                }
                Real* ot = lc.o.row(t) + off;
                for (int u = 0; u <= t; ++u) {
                    arow[u] /= denom;
                    const Real* vu = lc.v.row(u) + off;
                    const Real w = arow[u];
                    for (int i = 0; i < dh; ++i) ot[i] += w * vu[i];
                }
            }
        }

        lc.x_mid = lc.x_in;
        matmul(lc.o, lp.w_out_proj, lc.x_mid, true);

        lc.b = Tensor<Real>(n, d);
        layer_norm(lc.x_mid, lp.ln2_gain, lp.ln2_bias, lc.b, lc.ln2_mu, lc.ln2_rstd);

        lc.h_pre = Tensor<Real>(n, cfg.d_ff);
        for (int t = 0; t < n; ++t) std::memcpy(lc.h_pre.row(t), lp.b_ff1.row(0), sizeof(Real) * cfg.d_ff);
        matmul(lc.b, lp.w_ff1, lc.h_pre, true);
        lc.h_act = Tensor<Real>(n, cfg.d_ff);
        for (std::size_t i = 0; i < lc.h_pre.size(); ++i) lc.h_act.data[i] = gelu(lc.h_pre.data[i]);

        x = lc.x_mid;
        for (int t = 0; t < n; ++t) {
            Real* xt = x.row(t);
            const Real* b2 = lp.b_ff2.row(0);
            for (int i = 0; i < d; ++i) xt[i] += b2[i];
        }
        matmul(lc.h_act, lp.w_ff2, x, true);
    }

    fc.x_final = x;
    fc.y = Tensor<Real>(n, d);
    layer_norm(fc.x_final, model.lnf_gain, model.lnf_bias, fc.y, fc.lnf_mu, fc.lnf_rstd);
    fc.logits = Tensor<Real>(n, cfg.vocab_size);
    matmul(fc.y, model.w_unembed, fc.logits, false);
}

// log softmax of one logits row evaluated at a single id (double accumulation).
template <class Real>
double row_log_prob(const Tensor<Real>& logits, int row, TokenId id) {
    const Real* lr = logits.row(row);
    const int v = logits.cols;
    Real mx = lr[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, lr[j]);
    double denom = 0;
    for (int j = 0; j < v; ++j) denom += std::exp(static_cast<double>(lr[j] - mx));
    return static_cast<double>(lr[id] - mx) - std::log(denom);
}

template <class Real>
void validate_item(const ModelConfig& cfg, const LossItem& item) {
    check_ids<Real>(cfg, item.ids);
    const int n = static_cast<int>(item.ids.size());
    if (item.loss_lo < 0 || item.loss_hi > n - 1 || item.loss_lo >= item.loss_hi)
        throw std::invalid_argument("loss span [" + std::to_string(item.loss_lo) + ", " +
                                    std::to_string(item.loss_hi) + ") invalid for sequence of length " +
                                    std::to_string(n));
    for (int k : item.ignore_set)
        if (k < item.loss_lo || k >= item.loss_hi)
            throw std::invalid_argument("ignore position " + std::to_string(k) + " outside loss span");
    if (static_cast<int>(item.ignore_set.size()) >= item.loss_hi - item.loss_lo)
        throw std::invalid_argument("all loss positions ignored");
}

template <class Real>
bool is_ignored(const LossItem& item, int k) {
    return std::find(item.ignore_set.begin(), item.ignore_set.end(), k) != item.ignore_set.end();
}

}  // namespace

void ModelConfig::validate() const {
    if (num_layers < 1 || num_heads < 1 || d_model < 1 || d_ff < 1)
        throw std::invalid_argument("model dimensions must be positive");
    if (d_model % num_heads != 0) throw std::invalid_argument("d_model must be divisible by num_heads");
    if (vocab_size < kNumSpecialTokens)
        throw std::invalid_argument("vocab_size must cover the reserved special tokens");
    if (max_seq_len < 2) throw std::invalid_argument("max_seq_len must be at least 2");
}

template <class Real>
void Model<Real>::for_each_tensor(const std::function<void(const std::string&, Tensor<Real>&)>& fn) {
    fn("token_embeddings", token_embeddings);
    fn("positional_embeddings", positional_embeddings);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerParams<Real>& lp = layers[l];
        fn(p + "ln1_gain", lp.ln1_gain);
        fn(p + "ln1_bias", lp.ln1_bias);
        fn(p + "w_query", lp.w_query);
        fn(p + "w_key", lp.w_key);
        fn(p + "w_value", lp.w_value);
        fn(p + "w_out_proj", lp.w_out_proj);
        fn(p + "ln2_gain", lp.ln2_gain);
        fn(p + "ln2_bias", lp.ln2_bias);
        fn(p + "w_ff1", lp.w_ff1);
        fn(p + "b_ff1", lp.b_ff1);
        fn(p + "w_ff2", lp.w_ff2);
        fn(p + "b_ff2", lp.b_ff2);
    }
    fn("lnf_gain", lnf_gain);
    fn("lnf_bias", lnf_bias);
    fn("w_unembed", w_unembed);
}

template <class Real>
void Model<Real>::for_each_tensor(
    const std::function<void(const std::string&, const Tensor<Real>&)>& fn) const {
    auto* self = const_cast<Model<Real>*>(this);
    self->for_each_tensor([&fn](const std::string& name, Tensor<Real>& t) { fn(name, t); });
}

template <class Real>
std::size_t Model<Real>::num_parameters() const {
    std::size_t total = 0;
    for_each_tensor([&total](const std::string&, const Tensor<Real>& t) { total += t.size(); });
    return total;
}

template <class Real>
Model<Real> init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model<Real> m;
    m.config = config;
    const int d = config.d_model;
    m.token_embeddings = Tensor<Real>(config.vocab_size, d);
    m.positional_embeddings = Tensor<Real>(config.max_seq_len, d);
    m.layers.assign(config.num_layers, {});
    for (LayerParams<Real>& lp : m.layers) {
        lp.ln1_gain = Tensor<Real>(1, d);
        lp.ln1_bias = Tensor<Real>(1, d);
        lp.w_query = Tensor<Real>(d, d);
        lp.w_key = Tensor<Real>(d, d);
        lp.w_value = Tensor<Real>(d, d);
        lp.w_out_proj = Tensor<Real>(d, d);
        lp.ln2_gain = Tensor<Real>(1, d);
        lp.ln2_bias = Tensor<Real>(1, d);
        lp.w_ff1 = Tensor<Real>(d, config.d_ff);
        lp.b_ff1 = Tensor<Real>(1, config.d_ff);
        lp.w_ff2 = Tensor<Real>(config.d_ff, d);
        lp.b_ff2 = Tensor<Real>(1, d);
    }
    m.lnf_gain = Tensor<Real>(1, d);
    m.lnf_bias = Tensor<Real>(1, d);
    m.w_unembed = Tensor<Real>(d, config.vocab_size);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, config.init_scale);
    m.for_each_tensor([&](const std::string& name, Tensor<Real>& t) {
        const bool is_gain = name.find("gain") != std::string::npos;
        const bool is_bias = name.find("bias") != std::string::npos || name.find("b_ff") != std::string::npos;
        if (is_gain) {
            std::fill(t.data.begin(), t.data.end(), Real(1));
        } else if (is_bias) {
            t.zero();
        } else {
            for (Real& v : t.data) v = static_cast<Real>(dist(rng));
        }
    });
    return m;
}

template <class Real>
Model<Real> zeros_like(const Model<Real>& model) {
    Model<Real> z = model;
    z.for_each_tensor([](const std::string&, Tensor<Real>& t) { t.zero(); });
    return z;
}

template <class Real>
Tensor<Real> forward(const Model<Real>& model, const std::vector<TokenId>& ids) {
    ForwardCache<Real> fc;
    forward_cached(model, ids, fc);
    return std::move(fc.logits);
}

template <class Real>
std::vector<double> token_log_likelihoods(const Model<Real>& model, const std::vector<TokenId>& ids,
                                          int lo, int hi) {
    check_ids<Real>(model.config, ids);
    const int n = static_cast<int>(ids.size());
    if (lo < 0 || hi > n - 1 || lo > hi)
        throw std::invalid_argument("log-likelihood span [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                    ") invalid for sequence of length " + std::to_string(n));
    ForwardCache<Real> fc;
    forward_cached(model, ids, fc);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (int k = lo; k < hi; ++k) out.push_back(row_log_prob(fc.logits, k, ids[k + 1]));
    return out;
}

template <class Real>
LossValue masked_nll(const Model<Real>& model, const LossItem& item) {
    validate_item<Real>(model.config, item);
    ForwardCache<Real> fc;
    forward_cached(model, item.ids, fc);
    double total = 0.0;
    long count = 0;
    for (int k = item.loss_lo; k < item.loss_hi; ++k) {
        if (is_ignored<Real>(item, k)) continue;
        total -= row_log_prob(fc.logits, k, item.ids[k + 1]);
        ++count;
    }
    return {total / static_cast<double>(count), count};
}

template <class Real>
LossValue backward(const Model<Real>& model, const std::vector<LossItem>& batch, Model<Real>& grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const ModelConfig& cfg = model.config;
    long total_positions = 0;
    for (const LossItem& item : batch) {
        validate_item<Real>(cfg, item);
        total_positions += (item.loss_hi - item.loss_lo) - static_cast<long>(item.ignore_set.size());
    }
    const Real weight = Real(1) / static_cast<Real>(total_positions);

    double total_nll = 0.0;
    const int d = cfg.d_model, heads = cfg.num_heads, dh = d / heads;
    const Real scale = Real(1) / std::sqrt(Real(dh));

    for (const LossItem& item : batch) {
        ForwardCache<Real> fc;
        forward_cached(model, item.ids, fc);
        const int n = static_cast<int>(item.ids.size());

        // dLogits for the mean NLL, already scaled by the batch weight.
        Tensor<Real> dlogits(n, cfg.vocab_size);
        for (int k = item.loss_lo; k < item.loss_hi; ++k) {
            if (is_ignored<Real>(item, k)) continue;
            const Real* lr = fc.logits.row(k);
            Real mx = lr[0];
            for (int j = 1; j < cfg.vocab_size; ++j) mx = std::max(mx, lr[j]);
            double denom = 0;
            for (int j = 0; j < cfg.vocab_size; ++j) denom += std::exp(static_cast<double>(lr[j] - mx));
            Real* dlr = dlogits.row(k);
            for (int j = 0; j < cfg.vocab_size; ++j)
                dlr[j] = static_cast<Real>(std::exp(static_cast<double>(lr[j] - mx)) / denom) * weight;
            dlr[item.ids[k + 1]] -= weight;
            total_nll -= static_cast<double>(lr[item.ids[k + 1]] - mx) - std::log(denom);
        }

        // Unembed and final layer norm.
        matmul_at_b(fc.y, dlogits, grads.w_unembed);
        Tensor<Real> dy(n, d);
        matmul_a_bt(dlogits, model.w_unembed, dy);
        Tensor<Real> dx(n, d);
        layer_norm_backward(fc.x_final, model.lnf_gain, fc.lnf_mu, fc.lnf_rstd, dy, dx, grads.lnf_gain,
                            grads.lnf_bias);

        for (int l = cfg.num_layers - 1; l >= 0; --l) {
            const LayerParams<Real>& lp = model.layers[l];
            LayerParams<Real>& gp = grads.layers[l];
            const LayerCache<Real>& lc = fc.layers[l];

            // Feed-forward block: x_out = x_mid + h_act·W2 + b2
            Tensor<Real> dh_act(n, cfg.d_ff);
            matmul_a_bt(dx, lp.w_ff2, dh_act);
            matmul_at_b(lc.h_act, dx, gp.w_ff2);
            for (int t = 0; t < n; ++t) {
                const Real* dxt = dx.row(t);
                Real* db2 = gp.b_ff2.row(0);
                for (int i = 0; i < d; ++i) db2[i] += dxt[i];
            }
            Tensor<Real> dh_pre(n, cfg.d_ff);
            for (std::size_t i = 0; i < dh_pre.size(); ++i)
                dh_pre.data[i] = dh_act.data[i] * gelu_grad(lc.h_pre.data[i]);
            for (int t = 0; t < n; ++t) {
                const Real* dht = dh_pre.row(t);
                Real* db1 = gp.b_ff1.row(0);
                for (int i = 0; i < cfg.d_ff; ++i) db1[i] += dht[i];
            }
            matmul_at_b(lc.b, dh_pre, gp.w_ff1);
            Tensor<Real> db(n, d);
            matmul_a_bt(dh_pre, lp.w_ff1, db);
            Tensor<Real> dx_mid = dx;  // residual branch
            layer_norm_backward(lc.x_mid, lp.ln2_gain, lc.ln2_mu, lc.ln2_rstd, db, dx_mid, gp.ln2_gain,
                                gp.ln2_bias);

            // Attention block: x_mid = x_in + o·Wo
            Tensor<Real> do_(n, d);
            matmul_a_bt(dx_mid, lp.w_out_proj, do_);
            matmul_at_b(lc.o, dx_mid, gp.w_out_proj);

            Tensor<Real> dq(n, d), dk(n, d), dv(n, d);
            for (int h = 0; h < heads; ++h) {
                const int off = h * dh;
                std::vector<Real> datt(static_cast<std::size_t>(n));
                for (int t = 0; t < n; ++t) {
                    const Real* arow = lc.att.row(h * n + t);
                    const Real* dot = do_.row(t) + off;
                    Real dot_att = 0;
                    for (int u = 0; u <= t; ++u) {
                        const Real* vu = lc.v.row(u) + off;
                        Real s = 0;
                        for (int i = 0; i < dh; ++i) s += dot[i] * vu[i];
                        datt[u] = s;
                        dot_att += arow[u] * s;
                        Real* dvu = dv.row(u) + off;
                        const Real w = arow[u];
                        for (int i = 0; i < dh; ++i) dvu[i] += w * dot[i];
                    }
                    Real* dqt = dq.row(t) + off;
                    const Real* qt = lc.q.row(t) + off;
                    for (int u = 0; u <= t; ++u) {
                        const Real dscore = arow[u] * (datt[u] - dot_att) * scale;
                        if (dscore == Real(0)) continue;
                        const Real* ku = lc.k.row(u) + off;
                        Real* dku = dk.row(u) + off;
                        for (int i = 0; i < dh; ++i) {
                            dqt[i] += dscore * ku[i];
                            dku[i] += dscore * qt[i];
                        }
                    }
                }
            }

            Tensor<Real> da(n, d);
            matmul_a_bt(dq, lp.w_query, da);
            matmul_a_bt(dk, lp.w_key, da);
            matmul_a_bt(dv, lp.w_value, da);
            matmul_at_b(lc.a, dq, gp.w_query);
            matmul_at_b(lc.a, dk, gp.w_key);
            matmul_at_b(lc.a, dv, gp.w_value);

            Tensor<Real> dx_in = dx_mid;  // residual branch
            layer_norm_backward(lc.x_in, lp.ln1_gain, lc.ln1_mu, lc.ln1_rstd, da, dx_in, gp.ln1_gain,
                                gp.ln1_bias);
            dx = std::move(dx_in);
        }

        for (int t = 0; t < n; ++t) {
            const Real* dxt = dx.row(t);
            Real* te = grads.token_embeddings.row(item.ids[t]);
            Real* pe = grads.positional_embeddings.row(t);
            for (int i = 0; i < d; ++i) {
                te[i] += dxt[i];
                pe[i] += dxt[i];
            }
        }
    }

    return {total_nll / static_cast<double>(total_positions), total_positions};
}

template <class Real>
double sgd_step(Model<Real>& model, const Model<Real>& grads, SgdState<Real>& state, double learning_rate) {
    double sq_norm = 0.0;
    grads.for_each_tensor([&sq_norm](const std::string&, const Tensor<Real>& t) {
        for (Real v : t.data) sq_norm += static_cast<double>(v) * static_cast<double>(v);
    });
    const double norm = std::sqrt(sq_norm);
    double rescale = 1.0;
    if (state.clip_norm > 0.0 && norm > state.clip_norm) rescale = state.clip_norm / norm;

    if (state.momentum > 0.0 && state.velocity.layers.empty() && state.velocity.token_embeddings.size() == 0)
        state.velocity = zeros_like(model);

    std::vector<Tensor<Real>*> param_tensors, grad_tensors, vel_tensors;
    std::vector<bool> decayed;
    model.for_each_tensor([&](const std::string& name, Tensor<Real>& t) {
        param_tensors.push_back(&t);
        decayed.push_back(name.find("gain") == std::string::npos && name.find("bias") == std::string::npos &&
                          name.find("b_ff") == std::string::npos);
    });
    const_cast<Model<Real>&>(grads).for_each_tensor(
        [&](const std::string&, Tensor<Real>& t) { grad_tensors.push_back(&t); });
    if (state.momentum > 0.0)
        state.velocity.for_each_tensor([&](const std::string&, Tensor<Real>& t) { vel_tensors.push_back(&t); });

    for (std::size_t ti = 0; ti < param_tensors.size(); ++ti) {
        Tensor<Real>& p = *param_tensors[ti];
        const Tensor<Real>& g = *grad_tensors[ti];
        const Real wd = static_cast<Real>(decayed[ti] ? state.weight_decay : 0.0);
        if (state.momentum > 0.0) {
            Tensor<Real>& vel = *vel_tensors[ti];
            for (std::size_t i = 0; i < p.size(); ++i) {
                vel.data[i] = static_cast<Real>(state.momentum) * vel.data[i] +
                              static_cast<Real>(rescale) * g.data[i] + wd * p.data[i];
                p.data[i] -= static_cast<Real>(learning_rate) * vel.data[i];
            }
        } else {
            for (std::size_t i = 0; i < p.size(); ++i)
                p.data[i] -= static_cast<Real>(learning_rate) *
                             (static_cast<Real>(rescale) * g.data[i] + wd * p.data[i]);
        }
    }
    return norm;
}

template <class Real>
LossValue backward_and_step(Model<Real>& model, const std::vector<LossItem>& batch, SgdState<Real>& state,
                            double learning_rate) {
    Model<Real> grads = zeros_like(model);
    const LossValue loss = backward(model, batch, grads);
    if (!std::isfinite(loss.mean_nll)) throw std::runtime_error("non-finite loss in training step");
    const double norm = sgd_step(model, grads, state, learning_rate);
    if (!std::isfinite(norm)) throw std::runtime_error("non-finite gradient in training step");
    return loss;
}

template <class Real>
double grad_check(const Model<Real>& model, const LossItem& item, double epsilon, int samples_per_tensor,
                  std::uint64_t seed) {
    if (epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
    Model<Real> grads = zeros_like(model);
    backward(model, {item}, grads);

    Model<Real> probe = model;
    std::vector<Tensor<Real>*> probe_tensors;
    std::vector<const Tensor<Real>*> grad_tensors;
    probe.for_each_tensor([&](const std::string&, Tensor<Real>& t) { probe_tensors.push_back(&t); });
    grads.for_each_tensor([&](const std::string&, const Tensor<Real>& t) { grad_tensors.push_back(&t); });

    std::mt19937_64 rng(seed);
    double max_rel = 0.0;
    for (std::size_t ti = 0; ti < probe_tensors.size(); ++ti) {
        Tensor<Real>& t = *probe_tensors[ti];
        const Tensor<Real>& g = *grad_tensors[ti];
        const int samples = std::min<int>(samples_per_tensor, static_cast<int>(t.size()));
        for (int s = 0; s < samples; ++s) {
            const std::size_t idx = rng() % t.size();
            const Real saved = t.data[idx];
            t.data[idx] = saved + static_cast<Real>(epsilon);
            const double lp = masked_nll(probe, item).mean_nll;
            t.data[idx] = saved - static_cast<Real>(epsilon);
            const double lm = masked_nll(probe, item).mean_nll;
            t.data[idx] = saved;
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double analytic = static_cast<double>(g.data[idx]);
            const double denom = std::max(1e-8, std::abs(numeric) + std::abs(analytic));
            max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

template <class Real>
std::vector<TokenId> generate(const Model<Real>& model, const std::vector<TokenId>& prefix_ids, int max_new,
                              DecodeFlags flags, std::vector<double>* step_logprobs) {
    if (prefix_ids.empty()) throw std::invalid_argument("empty prefix");
    if (static_cast<int>(prefix_ids.size()) + max_new > model.config.max_seq_len)
        throw std::invalid_argument("prefix plus max_new exceeds max_seq_len");
    std::vector<TokenId> ids = prefix_ids;
    if (step_logprobs) step_logprobs->clear();
    for (int step = 0; step < max_new; ++step) {
        const Tensor<Real> logits = forward(model, ids);
        const Real* lr = logits.row(logits.rows - 1);
        TokenId best = -1;
        Real best_val = -std::numeric_limits<Real>::infinity();
        for (int j = 0; j < model.config.vocab_size; ++j) {
            if (flags.ban_pause && j == kPauseId) continue;
            if (lr[j] > best_val) {
                best_val = lr[j];
                best = j;
            }
        }
        if (step_logprobs) step_logprobs->push_back(row_log_prob(logits, logits.rows - 1, best));
        ids.push_back(best);
        if (best == kEosId) break;
    }
    return ids;
}

#define PAUSELAB_INSTANTIATE(Real)                                                                        \
    template struct Model<Real>;                                                                          \
    template Model<Real> init_params<Real>(const ModelConfig&, std::uint64_t);                            \
    template Model<Real> zeros_like<Real>(const Model<Real>&);                                            \
    template Tensor<Real> forward<Real>(const Model<Real>&, const std::vector<TokenId>&);                 \
    template std::vector<double> token_log_likelihoods<Real>(const Model<Real>&,                          \
                                                             const std::vector<TokenId>&, int, int);      \
    template LossValue masked_nll<Real>(const Model<Real>&, const LossItem&);                             \
    template LossValue backward<Real>(const Model<Real>&, const std::vector<LossItem>&, Model<Real>&);    \
    template double sgd_step<Real>(Model<Real>&, const Model<Real>&, SgdState<Real>&, double);            \
    template LossValue backward_and_step<Real>(Model<Real>&, const std::vector<LossItem>&,                \
                                               SgdState<Real>&, double);                                  \
    template double grad_check<Real>(const Model<Real>&, const LossItem&, double, int, std::uint64_t);    \
    template std::vector<TokenId> generate<Real>(const Model<Real>&, const std::vector<TokenId>&, int,    \
                                                 DecodeFlags, std::vector<double>*);

PAUSELAB_INSTANTIATE(float)
PAUSELAB_INSTANTIATE(double)

#undef PAUSELAB_INSTANTIATE

}  // namespace pauselab
