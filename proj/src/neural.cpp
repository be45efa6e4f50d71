#include "fracta/neural.hpp"

#include "fracta/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace fracta {

ModelConfig ModelConfig::tiny() {
    return {"tiny", 64, {8, 16, 32, 64}, 512, 256, 6};
}

ModelConfig ModelConfig::small() {
    return {"small", 224, {8, 16, 32, 64, 128}, 512, 256, 6};
}

ModelConfig ModelConfig::micro() {
    return {"micro", 8, {4, 8}, 16, 16, 6};
}

ModelConfig ModelConfig::from_preset(const std::string& name) {
    if (name == "tiny") return tiny();
    if (name == "small") return small();
    if (name == "micro") return micro();
    throw std::invalid_argument("unknown model preset: " + name);
}

namespace {

constexpr double kBceEps = 1e-7;
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr double kLeakSlope = 0.01;

double clamp01(double p) { return std::min(1.0 - kBceEps, std::max(kBceEps, p)); }

// d BCE(clamp(p), t) / dp; zero in the clamped (flat) region
double dbce(double p, double t) {
    if (p <= kBceEps || p >= 1.0 - kBceEps) return 0.0;
    return (p - t) / (p * (1.0 - p));
}

template <class T> using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T> using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T> struct ParamRef {
    T* value;
    T* grad;
    Eigen::Index size;
};

template <class T> struct StatRef {
    T* value;
    Eigen::Index size;
};

template <class T> struct Dense {
    Mat<T> W, gW;
    Vec<T> b, gb;
    Mat<T> x_cache;

    void init(Eigen::Index out, Eigen::Index in, Rng& rng) {
        W.resize(out, in);
        const double limit = std::sqrt(6.0 / double(in));
        for (Eigen::Index c = 0; c < in; ++c)
            for (Eigen::Index r = 0; r < out; ++r) W(r, c) = T(rng.uniform(-limit, limit));
        b = Vec<T>::Zero(out);
        gW = Mat<T>::Zero(out, in);
        gb = Vec<T>::Zero(out);
    }

    Mat<T> forward(const Mat<T>& x, bool cache) {
        if (cache) x_cache = x;
        return (W * x).colwise() + b;
    }

    Mat<T> backward(const Mat<T>& gy) {
        gW.noalias() += gy * x_cache.transpose();
        gb += gy.rowwise().sum();
        return W.transpose() * gy;
    }

    void params(std::vector<ParamRef<T>>& out) {
        out.push_back({W.data(), gW.data(), W.size()});
        out.push_back({b.data(), gb.data(), b.size()});
    }
};

template <class T> struct BatchNorm {
    Vec<T> gamma, beta, ggamma, gbeta;
    Vec<T> run_mean, run_var;
    Mat<T> xhat;
    Vec<T> invstd;
    bool frozen = false;

    void init(Eigen::Index n) {
        gamma = Vec<T>::Ones(n);
        beta = Vec<T>::Zero(n);
        ggamma = Vec<T>::Zero(n);
        gbeta = Vec<T>::Zero(n);
        run_mean = Vec<T>::Zero(n);
        run_var = Vec<T>::Ones(n);
    }

    Mat<T> forward(const Mat<T>& x, bool train) {
        frozen = !train;
        if (train) {
            const Vec<T> mean = x.rowwise().mean();
            Mat<T> xc = x.colwise() - mean;
            const Vec<T> var = xc.array().square().rowwise().mean().matrix();
            invstd = (var.array() + T(kBnEps)).rsqrt().matrix();
            xhat = (xc.array().colwise() * invstd.array()).matrix();
            run_mean = T(kBnMomentum) * run_mean + T(1.0 - kBnMomentum) * mean;
            run_var = T(kBnMomentum) * run_var + T(1.0 - kBnMomentum) * var;
        } else {
            invstd = (run_var.array() + T(kBnEps)).rsqrt().matrix();
            xhat = ((x.colwise() - run_mean).array().colwise() * invstd.array()).matrix();
        }
        return ((xhat.array().colwise() * gamma.array()).colwise() + beta.array()).matrix();
    }

    Mat<T> backward(const Mat<T>& gy) {
        ggamma += (gy.array() * xhat.array()).rowwise().sum().matrix();
        gbeta += gy.rowwise().sum();
        Mat<T> dxhat = (gy.array().colwise() * gamma.array()).matrix();
        if (frozen) return (dxhat.array().colwise() * invstd.array()).matrix();
        const T n = T(gy.cols());
        const Vec<T> s1 = dxhat.rowwise().sum();
        const Vec<T> s2 = (dxhat.array() * xhat.array()).rowwise().sum().matrix();
        Mat<T> t = n * dxhat;
        t.colwise() -= s1;
        t -= (xhat.array().colwise() * s2.array()).matrix();
        return (t.array().colwise() * (invstd.array() / n)).matrix();
    }

    void params(std::vector<ParamRef<T>>& out) {
        out.push_back({gamma.data(), ggamma.data(), gamma.size()});
        out.push_back({beta.data(), gbeta.data(), beta.size()});
    }

    void stats(std::vector<StatRef<T>>& out) {
        out.push_back({run_mean.data(), run_mean.size()});
        out.push_back({run_var.data(), run_var.size()});
    }
};

template <class T> struct LeakyRelu {
    Mat<T> mask;

    Mat<T> forward(const Mat<T>& x) {
        mask = (x.array() > T(0)).template cast<T>() * T(1.0 - kLeakSlope) + T(kLeakSlope);
        return (x.array() * mask.array()).matrix();
    }

    Mat<T> backward(const Mat<T>& gy) { return (gy.array() * mask.array()).matrix(); }
};

// 3x3 stride-2 pad-1 convolution on a (channels x H*W) activation layout
template <class T> struct Conv3x3s2 {
    int cin = 0, cout = 0, hin = 0, hout = 0;
    Mat<T> W, gW; // cout x cin*9
    Vec<T> b, gb;
    Mat<T> cols_cache;

    void init(int cin_, int cout_, int hin_, Rng& rng) {
        cin = cin_;
        cout = cout_;
        hin = hin_;
        hout = (hin + 2 - 3) / 2 + 1;
        W.resize(cout, cin * 9);
        const double limit = std::sqrt(6.0 / double(cin * 9));
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = T(rng.uniform(-limit, limit));
        b = Vec<T>::Zero(cout);
        gW = Mat<T>::Zero(cout, cin * 9);
        gb = Vec<T>::Zero(cout);
    }

    // x holds nimg images as contiguous column blocks of hin*hin each
    Mat<T> im2col(const Mat<T>& x, int nimg) const {
        Mat<T> cols = Mat<T>::Zero(cin * 9, Eigen::Index(nimg) * hout * hout);
        for (int img = 0; img < nimg; ++img) {
            const Eigen::Index xoff = Eigen::Index(img) * hin * hin;
            const Eigen::Index coff = Eigen::Index(img) * hout * hout;
            for (int oy = 0; oy < hout; ++oy)
                for (int ox = 0; ox < hout; ++ox) {
                    const Eigen::Index col = coff + oy * hout + ox;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= hin) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= hin) continue;
                            for (int c = 0; c < cin; ++c)
                                cols(c * 9 + ky * 3 + kx, col) = x(c, xoff + iy * hin + ix);
                        }
                    }
                }
        }
        return cols;
    }

    Mat<T> forward(const Mat<T>& x, int nimg, bool cache) {
        Mat<T> cols = im2col(x, nimg);
        if (cache) cols_cache = cols;
        return (W * cols).colwise() + b;
    }

    // returns dX; set need_dx = false for the first block (input is data)
    Mat<T> backward(const Mat<T>& gy, bool need_dx) {
        gW.noalias() += gy * cols_cache.transpose();
        gb += gy.rowwise().sum();
        if (!need_dx) return {};
        const int nimg = int(gy.cols() / (Eigen::Index(hout) * hout));
        const Mat<T> dcols = W.transpose() * gy;
        Mat<T> dx = Mat<T>::Zero(cin, Eigen::Index(nimg) * hin * hin);
        for (int img = 0; img < nimg; ++img) {
            const Eigen::Index xoff = Eigen::Index(img) * hin * hin;
            const Eigen::Index coff = Eigen::Index(img) * hout * hout;
            for (int oy = 0; oy < hout; ++oy)
                for (int ox = 0; ox < hout; ++ox) {
                    const Eigen::Index col = coff + oy * hout + ox;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= hin) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= hin) continue;
                            for (int c = 0; c < cin; ++c)
                                dx(c, xoff + iy * hin + ix) += dcols(c * 9 + ky * 3 + kx, col);
                        }
                    }
                }
        }
        return dx;
    }

    void params(std::vector<ParamRef<T>>& out) {
        out.push_back({W.data(), gW.data(), W.size()});
        out.push_back({b.data(), gb.data(), b.size()});
    }
};

template <class T> struct Encoder {
    int image_size = 0;
    std::vector<Conv3x3s2<T>> convs;
    std::vector<BatchNorm<T>> bns;
    std::vector<LeakyRelu<T>> acts;
    Dense<T> fc; // last channels -> dz
    int gap_hw = 0;

    void init(const ModelConfig& cfg, Rng& rng) {
        image_size = cfg.image_size;
        int h = cfg.image_size, cin = 1;
        for (int cout : cfg.encoder_channels) {
            Conv3x3s2<T> conv;
            conv.init(cin, cout, h, rng);
            h = conv.hout;
            convs.push_back(std::move(conv));
            BatchNorm<T> bn;
            bn.init(cout);
            bns.push_back(std::move(bn));
            acts.emplace_back();
            cin = cout;
        }
        gap_hw = h * h;
        fc.init(cfg.dz, cin, rng);
    }

    // images as 1 x nimg*H*W (contiguous column blocks) -> z matrix dz x nimg
    Mat<T> forward(const Mat<T>& images, int nimg, bool train) {
        Mat<T> a = images;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            a = convs[i].forward(a, nimg, true);
            a = bns[i].forward(a, train);
            a = acts[i].forward(a);
        }
        Mat<T> pooled(a.rows(), nimg); // per-image global average pool
        for (int j = 0; j < nimg; ++j)
            pooled.col(j) = a.middleCols(Eigen::Index(j) * gap_hw, gap_hw).rowwise().mean();
        return fc.forward(pooled, true);
    }

    void backward(const Mat<T>& dz) {
        const Mat<T> da = fc.backward(dz); // clast x nimg
        Mat<T> g(da.rows(), da.cols() * gap_hw);
        for (Eigen::Index j = 0; j < da.cols(); ++j)
            g.middleCols(j * gap_hw, gap_hw) = (da.col(j) / T(gap_hw)).replicate(1, gap_hw);
        for (std::size_t i = convs.size(); i-- > 0;) {
            g = acts[i].backward(g);
            g = bns[i].backward(g);
            g = convs[i].backward(g, i > 0);
        }
    }

    void params(std::vector<ParamRef<T>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs[i].params(out);
            bns[i].params(out);
        }
        fc.params(out);
    }

    void stats(std::vector<StatRef<T>>& out) {
        for (auto& bn : bns) bn.stats(out);
    }
};

template <class T> struct ResBlock {
    BatchNorm<T> bn1, bn2;
    LeakyRelu<T> act1, act2;
    Dense<T> fc1, fc2;

    void init(int width, Rng& rng) {
        bn1.init(width);
        fc1.init(width, width, rng);
        bn2.init(width);
        fc2.init(width, width, rng);
    }

    Mat<T> forward(const Mat<T>& h, bool train) {
        Mat<T> t = bn1.forward(h, train);
        t = act1.forward(t);
        t = fc1.forward(t, true);
        t = bn2.forward(t, train);
        t = act2.forward(t);
        t = fc2.forward(t, true);
        return h + t;
    }

    Mat<T> backward(const Mat<T>& gout) {
        Mat<T> g = fc2.backward(gout);
        g = act2.backward(g);
        g = bn2.backward(g);
        g = fc1.backward(g);
        g = act1.backward(g);
        g = bn1.backward(g);
        return gout + g; // residual path
    }

    void params(std::vector<ParamRef<T>>& out) {
        bn1.params(out);
        fc1.params(out);
        bn2.params(out);
        fc2.params(out);
    }

    void stats(std::vector<StatRef<T>>& out) {
        bn1.stats(out);
        bn2.stats(out);
    }
};

template <class T> struct Decoder {
    Dense<T> zproj, xproj; // dz -> w, 3 -> w; summed after the first layer
    std::vector<ResBlock<T>> blocks;
    Dense<T> head; // w -> 1

    void init(const ModelConfig& cfg, Rng& rng) {
        zproj.init(cfg.decoder_width, cfg.dz, rng);
        xproj.init(cfg.decoder_width, 3, rng);
        blocks.resize(std::size_t(cfg.decoder_blocks));
        for (auto& blk : blocks) blk.init(cfg.decoder_width, rng);
        head.init(1, cfg.decoder_width, rng);
    }

    std::vector<Eigen::Index> counts_cache; // points per image, in column order

    // z: dz x nimg, points: 3 x N grouped by image -> logits 1 x N
    Mat<T> forward(const Mat<T>& z, const Mat<T>& points,
                   const std::vector<Eigen::Index>& counts, bool train) {
        counts_cache = counts;
        const Mat<T> hz = zproj.forward(z, true);
        Mat<T> h = xproj.forward(points, true);
        Eigen::Index start = 0;
        for (Eigen::Index j = 0; j < hz.cols(); ++j) {
            h.middleCols(start, counts[std::size_t(j)]).colwise() += hz.col(j);
            start += counts[std::size_t(j)];
        }
        for (auto& blk : blocks) h = blk.forward(h, train);
        return head.forward(h, true);
    }

    // returns dz (dz x nimg)
    Mat<T> backward(const Mat<T>& dlogits) {
        Mat<T> g = head.backward(dlogits);
        for (std::size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(g);
        xproj.backward(g);
        Mat<T> dhz(g.rows(), Eigen::Index(counts_cache.size()));
        Eigen::Index start = 0;
        for (std::size_t j = 0; j < counts_cache.size(); ++j) {
            dhz.col(Eigen::Index(j)) = g.middleCols(start, counts_cache[j]).rowwise().sum();
            start += counts_cache[j];
        }
        return zproj.backward(dhz);
    }

    void params(std::vector<ParamRef<T>>& out) {
        zproj.params(out);
        xproj.params(out);
        for (auto& blk : blocks) blk.params(out);
        head.params(out);
    }

    void stats(std::vector<StatRef<T>>& out) {
        for (auto& blk : blocks) blk.stats(out);
    }
};

template <class T> struct Network {
    ModelConfig cfg;
    Encoder<T> enc;
    Decoder<T> fC, fB;

    // Adam state, aligned with the registry order
    std::vector<Vec<T>> adam_m, adam_v;
    std::int64_t adam_step = 0;

    void init(const ModelConfig& config, std::uint64_t seed) {
        cfg = config;
        Rng rng(derive_seed(seed, "model-init"));
        enc.init(cfg, rng);
        fC.init(cfg, rng);
        fB.init(cfg, rng);
        const auto reg = registry();
        adam_m.resize(reg.size());
        adam_v.resize(reg.size());
        for (std::size_t i = 0; i < reg.size(); ++i) {
            adam_m[i] = Vec<T>::Zero(reg[i].size);
            adam_v[i] = Vec<T>::Zero(reg[i].size);
        }
    }

    std::vector<ParamRef<T>> registry() {
        std::vector<ParamRef<T>> out;
        enc.params(out);
        fC.params(out);
        fB.params(out);
        return out;
    }

    std::vector<StatRef<T>> stat_registry() {
        std::vector<StatRef<T>> out;
        enc.stats(out);
        fC.stats(out);
        fB.stats(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto& p : registry()) n += std::size_t(p.size);
        return n;
    }

    void zero_grads() {
        for (auto& p : registry()) std::fill(p.grad, p.grad + p.size, T(0));
    }

    Mat<T> image_matrix(const std::vector<const std::vector<float>*>& images) const {
        const Eigen::Index n = Eigen::Index(cfg.image_size) * cfg.image_size;
        Mat<T> m(1, n * Eigen::Index(images.size()));
        for (std::size_t img = 0; img < images.size(); ++img) {
            if (Eigen::Index(images[img]->size()) != n)
                throw std::invalid_argument("image resolution mismatch: expected " +
                                            std::to_string(n) + " pixels, got " +
                                            std::to_string(images[img]->size()));
            for (Eigen::Index i = 0; i < n; ++i)
                m(0, Eigen::Index(img) * n + i) = T((*images[img])[std::size_t(i)]);
        }
        return m;
    }

    // forward + loss + (optionally) gradients for a batch of images, each
    // conditioning its contiguous chunk of counts[i] points
    double compute(const std::vector<const std::vector<float>*>& images,
                   const std::vector<Eigen::Index>& counts, const Mat<T>& points,
                   const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                   double lambda_r, bool train, bool want_grads) {
        const Mat<T> z = enc.forward(image_matrix(images), int(images.size()), train);
        const Mat<T> logitsC = fC.forward(z, points, counts, train);
        const Mat<T> logitsB = fB.forward(z, points, counts, train);

        const Eigen::Index n = points.cols();
        double total = 0;
        Mat<T> dlC(1, n), dlB(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pC = 1.0 / (1.0 + std::exp(-double(logitsC(0, i))));
            const double pB = 1.0 / (1.0 + std::exp(-double(logitsB(0, i))));
            const double pR = pC * pB;
            const double tC = labels[std::size_t(i)][0], tB = labels[std::size_t(i)][1],
                         tR = labels[std::size_t(i)][2];
            total += bce(pC, tC) + lambda_b * bce(pB, tB) + lambda_r * bce(pR, tR);
            if (want_grads) {
                const double dpC = dbce(pC, tC) + lambda_r * dbce(pR, tR) * pB;
                const double dpB = lambda_b * dbce(pB, tB) + lambda_r * dbce(pR, tR) * pC;
                dlC(0, i) = T(dpC * pC * (1.0 - pC));
                dlB(0, i) = T(dpB * pB * (1.0 - pB));
            }
        }
        if (want_grads) {
            const Mat<T> dzC = fC.backward(dlC);
            const Mat<T> dzB = fB.backward(dlB);
            enc.backward(dzC + dzB);
        }
        return total;
    }

    double compute(const std::vector<float>& image, const Mat<T>& points,
                   const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                   double lambda_r, bool train, bool want_grads) {
        return compute({&image}, {points.cols()}, points, labels, lambda_b, lambda_r, train,
                       want_grads);
    }

    void adam_update(double lr) {
        const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++adam_step;
        const double bc1 = 1.0 - std::pow(beta1, double(adam_step));
        const double bc2 = 1.0 - std::pow(beta2, double(adam_step));
        const auto reg = registry();
        for (std::size_t i = 0; i < reg.size(); ++i) {
            for (Eigen::Index j = 0; j < reg[i].size; ++j) {
                const T g = reg[i].grad[j];
                adam_m[i][j] = T(beta1) * adam_m[i][j] + T(1.0 - beta1) * g;
                adam_v[i][j] = T(beta2) * adam_v[i][j] + T(1.0 - beta2) * g * g;
                const double mhat = double(adam_m[i][j]) / bc1;
                const double vhat = double(adam_v[i][j]) / bc2;
                reg[i].value[j] -= T(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

template <class T> Mat<T> points_matrix(const std::vector<Vec3>& points) {
    Mat<T> m(3, Eigen::Index(points.size()));
    for (Eigen::Index i = 0; i < m.cols(); ++i)
        for (int a = 0; a < 3; ++a) m(a, i) = T(points[std::size_t(i)][a]);
    return m;
}

} // namespace

double bce(double pred, double label) {
    const double q = clamp01(pred);
    return -label * std::log(q) - (1.0 - label) * std::log(1.0 - q);
}

double loss_sum(const std::vector<FieldTriple>& preds,
                const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                double lambda_r) {
    if (preds.size() != labels.size())
        throw std::invalid_argument("loss_sum: preds/labels size mismatch");
    double total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!std::isfinite(preds[i].oC) || !std::isfinite(preds[i].oB) ||
            !std::isfinite(preds[i].oR))
            throw std::invalid_argument("loss_sum: non-finite prediction");
        total += bce(preds[i].oC, labels[i][0]) + lambda_b * bce(preds[i].oB, labels[i][1]) +
                 lambda_r * bce(preds[i].oR, labels[i][2]);
    }
    return total;
}

struct FieldModel::Impl {
    Network<float> net;
};

FieldModel::FieldModel(const ModelConfig& config, std::uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
    impl_->net.init(config, seed);
}

FieldModel::FieldModel(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
FieldModel::FieldModel(FieldModel&&) noexcept = default;
FieldModel& FieldModel::operator=(FieldModel&&) noexcept = default;
FieldModel::~FieldModel() = default;

const ModelConfig& FieldModel::config() const { return impl_->net.cfg; }

std::size_t FieldModel::parameter_count() const { return impl_->net.parameter_count(); }

std::vector<double> FieldModel::encode(const std::vector<float>& image) const {
    const Vec<float> z =
        impl_->net.enc.forward(impl_->net.image_matrix({&image}), 1, /*train=*/false).col(0);
    std::vector<double> out(std::size_t(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) out[std::size_t(i)] = double(z[i]);
    return out;
}

std::vector<FieldTriple> FieldModel::eval_fields(const std::vector<double>& z,
                                                 const std::vector<Vec3>& points) const {
    auto& net = impl_->net;
    if (Eigen::Index(z.size()) != Eigen::Index(net.cfg.dz))
        throw std::invalid_argument("eval_fields: latent size mismatch");
    Vec<float> zf(Eigen::Index(z.size()));
    for (Eigen::Index i = 0; i < zf.size(); ++i) zf[i] = float(z[std::size_t(i)]);
    const Mat<float> pts = points_matrix<float>(points);
    const Mat<float> logitsC = net.fC.forward(zf, pts, {pts.cols()}, /*train=*/false);
    const Mat<float> logitsB = net.fB.forward(zf, pts, {pts.cols()}, /*train=*/false);
    std::vector<FieldTriple> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        out[i].oC = 1.0 / (1.0 + std::exp(-double(logitsC(0, Eigen::Index(i)))));
        out[i].oB = 1.0 / (1.0 + std::exp(-double(logitsB(0, Eigen::Index(i)))));
        out[i].oR = out[i].oC * out[i].oB; // Eq-1 product, by construction
    }
    return out;
}

double FieldModel::train_step(const std::vector<float>& image, const std::vector<Vec3>& points,
                              const std::vector<std::array<std::uint8_t, 3>>& labels,
                              double lambda_b, double lambda_r, double lr) {
    return train_step({&image}, {points.size()}, points, labels, lambda_b, lambda_r, lr);
}

double FieldModel::train_step(const std::vector<const std::vector<float>*>& images,
                              const std::vector<std::size_t>& counts,
                              const std::vector<Vec3>& points,
                              const std::vector<std::array<std::uint8_t, 3>>& labels,
                              double lambda_b, double lambda_r, double lr) {
    if (points.size() != labels.size())
        throw std::invalid_argument("train_step: points/labels size mismatch");
    if (images.size() != counts.size())
        throw std::invalid_argument("train_step: images/counts size mismatch");
    std::size_t total_pts = 0;
    std::vector<Eigen::Index> cts;
    for (std::size_t c : counts) {
        total_pts += c;
        cts.push_back(Eigen::Index(c));
    }
    if (total_pts != points.size())
        throw std::invalid_argument("train_step: counts do not cover the point batch");
    auto& net = impl_->net;
    net.zero_grads();
    const double loss = net.compute(images, cts, points_matrix<float>(points), labels, lambda_b,
                                    lambda_r, /*train=*/true, /*want_grads=*/true);
    if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train_step: non-finite loss " << loss << " at Adam step " << net.adam_step + 1
           << " (batch of " << points.size() << " points)";
        throw std::runtime_error(os.str());
    }
    net.adam_update(lr);
    return loss;
}

OccupancyField FieldModel::field(const std::vector<double>& z, char which) const {
    if (which != 'C' && which != 'B' && which != 'R')
        throw std::invalid_argument("field: selector must be 'C', 'B', or 'R'");
    const FieldModel* self = this;
    const std::vector<double> zc = z;
    return OccupancyField(
        [self, zc, which](const Vec3& p) {
            const FieldTriple t = self->eval_fields(zc, {p})[0];
            return which == 'C' ? t.oC : which == 'B' ? t.oB : t.oR;
        },
        FieldKind::Neural);
}

namespace {

constexpr char kCkptMagic[4] = {'F', 'X', 'C', 'K'};

std::string config_block(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "preset=" << cfg.preset << "\nimage_size=" << cfg.image_size << "\ndz=" << cfg.dz
       << "\ndecoder_width=" << cfg.decoder_width << "\ndecoder_blocks=" << cfg.decoder_blocks
       << "\nencoder_channels=";
    for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i)
        os << (i ? "," : "") << cfg.encoder_channels[i];
    os << "\n";
    return os.str();
}

ModelConfig parse_config_block(const std::string& text, const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    try {
        ModelConfig cfg;
        cfg.preset = kv.at("preset");
        cfg.image_size = std::stoi(kv.at("image_size"));
        cfg.dz = std::stoi(kv.at("dz"));
        cfg.decoder_width = std::stoi(kv.at("decoder_width"));
        cfg.decoder_blocks = std::stoi(kv.at("decoder_blocks"));
        cfg.encoder_channels.clear();
        std::istringstream cs(kv.at("encoder_channels"));
        std::string tok;
        while (std::getline(cs, tok, ',')) cfg.encoder_channels.push_back(std::stoi(tok));
        return cfg;
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": corrupt checkpoint config block");
    }
}

void write_f64_array(std::ofstream& out, const float* data, Eigen::Index n) {
    const std::uint64_t count = std::uint64_t(n);
    out.write(reinterpret_cast<const char*>(&count), 8);
    std::vector<double> buf(std::size_t(n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) buf[std::size_t(i)] = double(data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
}

void read_f64_array(std::ifstream& in, float* data, Eigen::Index n, const std::string& path) {
    std::uint64_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), 8) || count != std::uint64_t(n))
        throw std::runtime_error(path + ": corrupt checkpoint (array length mismatch)");
    std::vector<double> buf(std::size_t(n), 0.0);
    if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * 8)))
        throw std::runtime_error(path + ": corrupt checkpoint (truncated array)");
    for (Eigen::Index i = 0; i < n; ++i) data[i] = float(buf[std::size_t(i)]);
}

} // namespace

void FieldModel::save(const std::string& path) const {
    auto& net = impl_->net;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kCkptMagic, 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::string cfg = config_block(net.cfg);
    const std::uint32_t cfg_len = std::uint32_t(cfg.size());
    out.write(reinterpret_cast<const char*>(&cfg_len), 4);
    out.write(cfg.data(), std::streamsize(cfg.size()));

    const auto reg = net.registry();
    for (const auto& p : reg) write_f64_array(out, p.value, p.size);
    const std::uint64_t step = std::uint64_t(net.adam_step);
    out.write(reinterpret_cast<const char*>(&step), 8);
    for (std::size_t i = 0; i < reg.size(); ++i)
        write_f64_array(out, net.adam_m[i].data(), net.adam_m[i].size());
    for (std::size_t i = 0; i < reg.size(); ++i)
        write_f64_array(out, net.adam_v[i].data(), net.adam_v[i].size());
    for (const auto& s : net.stat_registry()) write_f64_array(out, s.value, s.size);
    if (!out) throw std::runtime_error(path + ": write failure");
}

FieldModel FieldModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw std::runtime_error(path + ": bad FXCK magic");
    std::uint32_t version = 0, cfg_len = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != 1)
        throw std::runtime_error(path + ": unsupported FXCK version " + std::to_string(version));
    in.read(reinterpret_cast<char*>(&cfg_len), 4);
    if (!in || cfg_len > 1 << 20) throw std::runtime_error(path + ": corrupt checkpoint header");
    std::string cfg_text(cfg_len, '\0');
    if (!in.read(cfg_text.data(), cfg_len))
        throw std::runtime_error(path + ": corrupt checkpoint (truncated config)");

    auto impl = std::make_unique<Impl>();
    impl->net.init(parse_config_block(cfg_text, path), 0);
    auto& net = impl->net;

    const auto reg = net.registry();
    for (const auto& p : reg) read_f64_array(in, p.value, p.size, path);
    std::uint64_t step = 0;
    if (!in.read(reinterpret_cast<char*>(&step), 8))
        throw std::runtime_error(path + ": corrupt checkpoint (missing optimizer step)");
    net.adam_step = std::int64_t(step);
    for (std::size_t i = 0; i < reg.size(); ++i)
        read_f64_array(in, net.adam_m[i].data(), net.adam_m[i].size(), path);
    for (std::size_t i = 0; i < reg.size(); ++i)
        read_f64_array(in, net.adam_v[i].data(), net.adam_v[i].size(), path);
    for (const auto& s : net.stat_registry()) read_f64_array(in, s.value, s.size, path);
    if (in.peek() != std::ifstream::traits_type::eof())
        throw std::runtime_error(path + ": corrupt checkpoint (trailing bytes)");
    return FieldModel(std::move(impl));
}

FieldModel FieldModel::load(const std::string& path, const ModelConfig& expect) {
    FieldModel model = load(path);
    if (!(model.config() == expect))
        throw std::runtime_error(path + ": checkpoint config mismatch (found preset '" +
                                 model.config().preset + "', expected '" + expect.preset + "')");
    return model;
}

double gradient_check(double epsilon, std::uint64_t seed) {
    Network<double> net;
    net.init(ModelConfig::micro(), derive_seed(seed, "gradcheck-model"));

    Rng rng(derive_seed(seed, "gradcheck-data"));
    const int npix = net.cfg.image_size * net.cfg.image_size;
    std::vector<float> image(std::size_t(npix), 0.0f);
    for (auto& v : image) v = float(rng.uniform());
    const Eigen::Index npts = 6;
    Mat<double> points(3, npts);
    for (Eigen::Index i = 0; i < npts; ++i)
        for (int a = 0; a < 3; ++a) points(a, i) = rng.uniform(-0.55, 0.55);
    std::vector<std::array<std::uint8_t, 3>> labels(std::size_t(npts), {0, 0, 0});
    for (auto& l : labels) {
        l[0] = std::uint8_t(rng.index(2));
        l[1] = std::uint8_t(rng.index(2));
        l[2] = l[0] & l[1];
    }
    const double lb = 1.0, lrr = 1.0;

    // analytic gradients with frozen batch norm
    net.zero_grads();
    net.compute(image, points, labels, lb, lrr, /*train=*/false, /*want_grads=*/true);
    const auto reg = net.registry();
    std::vector<std::vector<double>> analytic(reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i)
        analytic[i].assign(reg[i].grad, reg[i].grad + reg[i].size);

    double max_rel = 0;
    for (std::size_t i = 0; i < reg.size(); ++i) {
        for (Eigen::Index j = 0; j < reg[i].size; ++j) {
            const double orig = reg[i].value[j];
            reg[i].value[j] = orig + epsilon;
            const double lp = net.compute(image, points, labels, lb, lrr, false, false);
            reg[i].value[j] = orig - epsilon;
            const double lm = net.compute(image, points, labels, lb, lrr, false, false);
            reg[i].value[j] = orig;
            const double fd = (lp - lm) / (2.0 * epsilon);
            const double an = analytic[i][std::size_t(j)];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace fracta
