#include "ierisk/pifnet.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ierisk/error.hpp"

namespace ierisk {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

constexpr char kModelMagic[8] = {'I', 'E', 'R', 'P', 'I', 'F', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

// Row-wise softmax with max subtraction.
MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        RowVectorXd e = (logits.row(i).array() - m).exp();
        p.row(i) = e / e.sum();
    }
    return p;
}

// Per hidden layer intermediates kept for the backward pass.
struct HiddenCache {
    MatrixXd input;  // N x in
    MatrixXd xhat;   // N x H
    VectorXd inv_std;
    MatrixXd pre_relu;  // N x H (after affine BN)
    MatrixXd mask;      // N x H, already scaled by 1/(1-p); empty when off
};

} // namespace

FeatureRow features_of(const MetricVector& m) noexcept { return {m.vd, m.sid, m.is_norm}; }

Standardizer Standardizer::fit(std::span<const FeatureRow> rows) {
    if (rows.empty()) throw ModelError("cannot fit a standardizer to zero rows");
    Standardizer s;
    const auto n = static_cast<double>(rows.size());
    for (std::size_t f = 0; f < 3; ++f) {
        double mean = 0.0;
        for (const auto& r : rows) mean += r[f];
        mean /= n;
        double var = 0.0;
        for (const auto& r : rows) var += (r[f] - mean) * (r[f] - mean);
        const double sd = std::sqrt(var / n);
        s.mean[f] = mean;
        s.scale[f] = sd > 1e-12 ? sd : 1.0;
    }
    s.fitted = true;
    return s;
}

FeatureRow Standardizer::apply(const FeatureRow& x) const noexcept {
    return {(x[0] - mean[0]) / scale[0], (x[1] - mean[1]) / scale[1], (x[2] - mean[2]) / scale[2]};
}

bool label_less(std::string_view a, std::string_view b) {
    auto split = [](std::string_view s) {
        std::size_t i = s.size();
        while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
        return std::pair{s.substr(0, i), s.substr(i)};
    };
    const auto [pa, na] = split(a);
    const auto [pb, nb] = split(b);
    if (pa != pb) return pa < pb;
    if (na.size() != nb.size()) return na.size() < nb.size();
    return na < nb;
}

std::vector<std::string> sorted_labels(std::span<const TrainingRow> rows) {
    std::set<std::string> uniq;
    for (const auto& r : rows) uniq.insert(r.label);
    std::vector<std::string> out(uniq.begin(), uniq.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return label_less(a, b); });
    return out;
}

PifModel PifModel::init(std::uint64_t seed, std::vector<std::string> label_order) {
    if (label_order.empty()) throw ModelError("label order must be nonempty");
    PifModel m;
    m.labels_ = std::move(label_order);
    m.seed_ = seed;

    CounterRng rng(CounterRng::derive(seed, 0x696e6974 /* "init" */));
    const auto widths = m.layer_widths();
    for (std::size_t l = 0; l < 4; ++l) {
        const auto in = static_cast<Eigen::Index>(widths[l]);
        const auto out = static_cast<Eigen::Index>(widths[l + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        auto& d = m.dense_[l];
        d.w.resize(out, in);
        d.b.resize(out);
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) d.w(r, c) = rng.uniform(-bound, bound);
        }
        for (Eigen::Index r = 0; r < out; ++r) d.b(r) = rng.uniform(-bound, bound);
        if (l < 3) {
            auto& bn = m.bn_[l];
            bn.gamma = VectorXd::Ones(out);
            bn.beta = VectorXd::Zero(out);
            bn.running_mean = VectorXd::Zero(out);
            bn.running_var = VectorXd::Ones(out);
        }
    }
    return m;
}

std::vector<std::size_t> PifModel::layer_widths() const {
    return {kInputs, kHidden[0], kHidden[1], kHidden[2], labels_.size()};
}

std::size_t PifModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < 4; ++l) {
        n += static_cast<std::size_t>(dense_[l].w.size() + dense_[l].b.size());
        if (l < 3) n += static_cast<std::size_t>(bn_[l].gamma.size() + bn_[l].beta.size());
    }
    return n;
}

std::vector<double> PifModel::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < 4; ++l) {
        const auto& d = dense_[l];
        for (Eigen::Index r = 0; r < d.w.rows(); ++r) {
            for (Eigen::Index c = 0; c < d.w.cols(); ++c) flat.push_back(d.w(r, c));
        }
        for (Eigen::Index r = 0; r < d.b.size(); ++r) flat.push_back(d.b(r));
        if (l < 3) {
            for (Eigen::Index r = 0; r < bn_[l].gamma.size(); ++r) flat.push_back(bn_[l].gamma(r));
            for (Eigen::Index r = 0; r < bn_[l].beta.size(); ++r) flat.push_back(bn_[l].beta(r));
        }
    }
    return flat;
}

void PifModel::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw ModelError("parameter vector has the wrong length");
    std::size_t i = 0;
    for (std::size_t l = 0; l < 4; ++l) {
        auto& d = dense_[l];
        for (Eigen::Index r = 0; r < d.w.rows(); ++r) {
            for (Eigen::Index c = 0; c < d.w.cols(); ++c) d.w(r, c) = flat[i++];
        }
        for (Eigen::Index r = 0; r < d.b.size(); ++r) d.b(r) = flat[i++];
        if (l < 3) {
            for (Eigen::Index r = 0; r < bn_[l].gamma.size(); ++r) bn_[l].gamma(r) = flat[i++];
            for (Eigen::Index r = 0; r < bn_[l].beta.size(); ++r) bn_[l].beta(r) = flat[i++];
        }
    }
}

double PifModel::loss(const MatrixXd& x, std::span<const int> targets, ForwardMode mode,
                      std::vector<double>* gradient, CounterRng* dropout_rng, bool update_running_stats) {
    const Eigen::Index n = x.rows();
    if (n == 0 || static_cast<std::size_t>(n) != targets.size()) throw ModelError("batch/target size mismatch");
    if (x.cols() != static_cast<Eigen::Index>(kInputs)) throw ModelError("expected 3 input features");
    if (mode == ForwardMode::train && hyper_.dropout > 0.0 && !dropout_rng) {
        throw ModelError("dropout in train mode needs a random source");
    }

    std::array<HiddenCache, 3> cache;
    MatrixXd act = x;
    for (std::size_t l = 0; l < 3; ++l) {
        auto& c = cache[l];
        const auto& d = dense_[l];
        auto& bn = bn_[l];
        c.input = act;
        MatrixXd z = act * d.w.transpose();
        z.rowwise() += d.b.transpose();

        VectorXd mean;
        VectorXd var;
        if (mode == ForwardMode::inference) {
            mean = bn.running_mean;
            var = bn.running_var;
        } else {
            mean = z.colwise().mean().transpose();
            var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
            if (update_running_stats) {
                const double m = hyper_.bn_momentum;
                const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
                bn.running_mean = (1.0 - m) * bn.running_mean + m * mean;
                bn.running_var = (1.0 - m) * bn.running_var + m * unbias * var;
            }
        }
        c.inv_std = (var.array() + hyper_.bn_epsilon).rsqrt().matrix();
        c.xhat = ((z.rowwise() - mean.transpose()).array().rowwise() * c.inv_std.transpose().array()).matrix();
        c.pre_relu = (c.xhat.array().rowwise() * bn.gamma.transpose().array()).matrix();
        c.pre_relu.rowwise() += bn.beta.transpose();
        act = c.pre_relu.cwiseMax(0.0);

        if (mode == ForwardMode::train && hyper_.dropout > 0.0) {
            const double keep = 1.0 - hyper_.dropout;
            c.mask.resize(act.rows(), act.cols());
            for (Eigen::Index i = 0; i < act.rows(); ++i) {
                for (Eigen::Index j = 0; j < act.cols(); ++j) {
                    c.mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                }
            }
            act = act.cwiseProduct(c.mask);
        }
    }
    MatrixXd logits = act * dense_[3].w.transpose();
    logits.rowwise() += dense_[3].b.transpose();
    const MatrixXd probs = softmax_rows(logits);

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= probs.cols()) throw ModelError("target index out of range");
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        total += lse - logits(i, t);
    }
    const double mean_loss = total / static_cast<double>(n);
    if (!gradient) return mean_loss;

    // Backward pass.
    MatrixXd dlogits = probs;
    for (Eigen::Index i = 0; i < n; ++i) dlogits(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
    dlogits /= static_cast<double>(n);

    std::array<MatrixXd, 4> dw;
    std::array<VectorXd, 4> db;
    std::array<VectorXd, 3> dgamma;
    std::array<VectorXd, 3> dbeta;

    dw[3] = dlogits.transpose() * act;
    db[3] = dlogits.colwise().sum().transpose();
    MatrixXd dact = dlogits * dense_[3].w;

    const auto nd = static_cast<double>(n);
    for (int l = 2; l >= 0; --l) {
        const auto& c = cache[static_cast<std::size_t>(l)];
        if (c.mask.size() > 0) dact = dact.cwiseProduct(c.mask);
        const MatrixXd dy = (c.pre_relu.array() > 0.0).select(dact, 0.0);
        dgamma[l] = dy.cwiseProduct(c.xhat).colwise().sum().transpose();
        dbeta[l] = dy.colwise().sum().transpose();
        const MatrixXd dxhat = (dy.array().rowwise() * bn_[l].gamma.transpose().array()).matrix();
        MatrixXd dz;
        if (mode == ForwardMode::inference) {
            dz = (dxhat.array().rowwise() * c.inv_std.transpose().array()).matrix();
        } else {
            const RowVectorXd sum_dxhat = dxhat.colwise().sum();
            const RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum();
            MatrixXd inner = nd * dxhat;
            inner.rowwise() -= sum_dxhat;
            inner -= (c.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
            dz = ((inner.array().rowwise() * c.inv_std.transpose().array()) / nd).matrix();
        }
        dw[l] = dz.transpose() * c.input;
        db[l] = dz.colwise().sum().transpose();
        if (l > 0) dact = dz * dense_[l].w;
    }

    gradient->clear();
    gradient->reserve(parameter_count());
    for (std::size_t l = 0; l < 4; ++l) {
        for (Eigen::Index r = 0; r < dw[l].rows(); ++r) {
            for (Eigen::Index cc = 0; cc < dw[l].cols(); ++cc) gradient->push_back(dw[l](r, cc));
        }
        for (Eigen::Index r = 0; r < db[l].size(); ++r) gradient->push_back(db[l](r));
        if (l < 3) {
            for (Eigen::Index r = 0; r < dgamma[l].size(); ++r) gradient->push_back(dgamma[l](r));
            for (Eigen::Index r = 0; r < dbeta[l].size(); ++r) gradient->push_back(dbeta[l](r));
        }
    }
    return mean_loss;
}

MatrixXd PifModel::logits(const MatrixXd& x, ForwardMode mode) const {
    if (mode == ForwardMode::train) throw ModelError("logits() does not apply dropout; use loss()");
    MatrixXd act = x;
    for (std::size_t l = 0; l < 3; ++l) {
        MatrixXd z = act * dense_[l].w.transpose();
        z.rowwise() += dense_[l].b.transpose();
        VectorXd mean;
        VectorXd var;
        if (mode == ForwardMode::inference) {
            mean = bn_[l].running_mean;
            var = bn_[l].running_var;
        } else {
            mean = z.colwise().mean().transpose();
            var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        }
        const VectorXd inv_std = (var.array() + hyper_.bn_epsilon).rsqrt().matrix();
        MatrixXd y = ((z.rowwise() - mean.transpose()).array().rowwise() *
                      (inv_std.array() * bn_[l].gamma.array()).transpose())
                         .matrix();
        y.rowwise() += bn_[l].beta.transpose();
        act = y.cwiseMax(0.0);
    }
    MatrixXd out = act * dense_[3].w.transpose();
    out.rowwise() += dense_[3].b.transpose();
    return out;
}

bool operator==(const PifModel& a, const PifModel& b) {
    if (a.labels_ != b.labels_ || a.seed_ != b.seed_ || !(a.standardizer_ == b.standardizer_)) return false;
    for (std::size_t l = 0; l < 4; ++l) {
        if (a.dense_[l].w != b.dense_[l].w || a.dense_[l].b != b.dense_[l].b) return false;
        if (l < 3) {
            const auto& x = a.bn_[l];
            const auto& y = b.bn_[l];
            if (x.gamma != y.gamma || x.beta != y.beta || x.running_mean != y.running_mean ||
                x.running_var != y.running_var) {
                return false;
            }
        }
    }
    return true;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ModelError("truncated model file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint64_t read_u64(std::istream& in) {
    const std::uint64_t lo = read_u32(in);
    const std::uint64_t hi = read_u32(in);
    return lo | (hi << 32);
}

void write_f32(std::ostream& out, double v) { write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
double read_f32(std::istream& in) { return static_cast<double>(std::bit_cast<float>(read_u32(in))); }
void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

template <typename Derived>
void write_block(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_f32(out, m(r, c));
    }
}

template <typename Derived>
void read_block(std::istream& in, Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f32(in);
    }
}

} // namespace

void PifModel::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot write model file " + file.string());
    out.write(kModelMagic, sizeof kModelMagic);
    write_u32(out, kModelVersion);
    write_u64(out, seed_);
    write_u32(out, static_cast<std::uint32_t>(labels_.size()));
    for (const auto& l : labels_) {
        write_u32(out, static_cast<std::uint32_t>(l.size()));
        out.write(l.data(), static_cast<std::streamsize>(l.size()));
    }
    const auto widths = layer_widths();
    write_u32(out, static_cast<std::uint32_t>(widths.size()));
    for (auto w : widths) write_u32(out, static_cast<std::uint32_t>(w));
    write_u32(out, standardizer_.fitted ? 1u : 0u);
    for (std::size_t f = 0; f < 3; ++f) write_f64(out, standardizer_.mean[f]);
    for (std::size_t f = 0; f < 3; ++f) write_f64(out, standardizer_.scale[f]);
    for (std::size_t l = 0; l < 4; ++l) {
        write_block(out, dense_[l].w);
        write_block(out, dense_[l].b);
        if (l < 3) {
            write_block(out, bn_[l].gamma);
            write_block(out, bn_[l].beta);
            write_block(out, bn_[l].running_mean);
            write_block(out, bn_[l].running_var);
        }
    }
    if (!out) throw ModelError("failed writing model file " + file.string());
}

PifModel PifModel::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ModelError("cannot open model file " + file.string());
    char magic[sizeof kModelMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
        throw ModelError("not a PIF model file: " + file.string());
    }
    if (read_u32(in) != kModelVersion) throw ModelError("unsupported model file version");
    const std::uint64_t seed = read_u64(in);
    const std::uint32_t n_labels = read_u32(in);
    if (n_labels == 0 || n_labels > 1024) throw ModelError("corrupt label count");
    std::vector<std::string> labels(n_labels);
    for (auto& l : labels) {
        const std::uint32_t len = read_u32(in);
        if (len > 4096) throw ModelError("corrupt label length");
        l.resize(len);
        if (!in.read(l.data(), len)) throw ModelError("truncated model file");
    }
    PifModel m = init(seed, labels);
    const std::uint32_t n_widths = read_u32(in);
    const auto expected = m.layer_widths();
    if (n_widths != expected.size()) throw ModelError("model shape mismatch");
    for (auto w : expected) {
        if (read_u32(in) != w) throw ModelError("model shape mismatch");
    }
    m.standardizer_.fitted = read_u32(in) != 0;
    for (std::size_t f = 0; f < 3; ++f) m.standardizer_.mean[f] = read_f64(in);
    for (std::size_t f = 0; f < 3; ++f) m.standardizer_.scale[f] = read_f64(in);
    for (std::size_t l = 0; l < 4; ++l) {
        read_block(in, m.dense_[l].w);
        read_block(in, m.dense_[l].b);
        if (l < 3) {
            read_block(in, m.bn_[l].gamma);
            read_block(in, m.bn_[l].beta);
            read_block(in, m.bn_[l].running_mean);
            read_block(in, m.bn_[l].running_var);
        }
    }
    return m;
}

TrainResult train(PifModel& model, std::span<const TrainingRow> rows, const TrainHyper& hyper) {
    if (rows.size() < 2) throw ModelError("training needs at least two rows");
    std::set<std::string> distinct;
    for (const auto& r : rows) {
        for (double v : r.x) {
            if (!std::isfinite(v)) throw ModelError("non-finite feature in row " + r.id);
        }
        distinct.insert(r.label);
    }
    if (distinct.size() < 2) throw ModelError("training needs at least two distinct labels");
    if (hyper.epochs < 0) throw ModelError("epoch count must be non-negative");

    const auto& labels = model.labels();
    std::vector<int> targets;
    for (const auto& r : rows) {
        auto it = std::find(labels.begin(), labels.end(), r.label);
        if (it == labels.end()) throw ModelError("label " + r.label + " not in the model's label order");
        targets.push_back(static_cast<int>(it - labels.begin()));
    }

    std::vector<FeatureRow> feats;
    for (const auto& r : rows) feats.push_back(r.x);
    model.set_hyper(hyper);
    model.set_standardizer(Standardizer::fit(feats));

    MatrixXd x(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto s = model.standardizer().apply(feats[i]);
        for (std::size_t f = 0; f < 3; ++f) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = s[f];
    }

    CounterRng dropout_rng(CounterRng::derive(model.seed(), 0x64726f70 /* "drop" */));
    std::vector<double> params = model.parameters();
    std::vector<double> m1(params.size(), 0.0);
    std::vector<double> m2(params.size(), 0.0);
    std::vector<double> grad;

    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(hyper.epochs));
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const double l = model.loss(x, targets, ForwardMode::train, &grad, &dropout_rng, true);
        result.loss_trace.push_back(l);
        const double c1 = 1.0 - std::pow(hyper.beta1, epoch);
        const double c2 = 1.0 - std::pow(hyper.beta2, epoch);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m1[i] = hyper.beta1 * m1[i] + (1.0 - hyper.beta1) * grad[i];
            m2[i] = hyper.beta2 * m2[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
            params[i] -= hyper.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + hyper.adam_epsilon);
        }
        model.set_parameters(params);
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (predict(model, rows[i].x).label == rows[i].label) ++correct;
    }
    result.training_accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
    return result;
}

Prediction predict(const PifModel& model, const FeatureRow& x) {
    if (!model.trained()) throw ModelError("model is untrained");
    for (double v : x) {
        if (!std::isfinite(v)) throw ModelError("non-finite feature");
    }
    const auto s = model.standardizer().apply(x);
    MatrixXd in(1, 3);
    in << s[0], s[1], s[2];
    const MatrixXd probs = softmax_rows(model.logits(in, ForwardMode::inference));

    Prediction p;
    p.probabilities.assign(probs.data(), probs.data() + probs.size());
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.probabilities.size(); ++k) {
        if (p.probabilities[k] > p.probabilities[best]) best = k;
    }
    p.label = model.labels()[best];
    return p;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::string> labels, std::size_t k,
                                                       std::uint64_t seed) {
    if (k < 2) throw ModelError("k must be at least 2");
    if (k > labels.size()) throw ModelError("k exceeds the number of rows");

    std::map<std::string, std::vector<std::size_t>, decltype(&label_less)> by_label(&label_less);
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

    CounterRng rng(CounterRng::derive(seed, 0x666f6c64 /* "fold" */));
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t next = 0;
    for (auto& [label, idx] : by_label) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        for (auto i : idx) {
            folds[next].push_back(i);
            next = (next + 1) % k;
        }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

CvResult kfold_cv(std::span<const TrainingRow> rows, std::size_t k, std::uint64_t seed, const TrainHyper& hyper) {
    std::vector<std::string> labels;
    for (const auto& r : rows) labels.push_back(r.label);
    const auto label_order = sorted_labels(rows);

    CvResult result;
    result.folds = stratified_folds(labels, k, seed);
    for (std::size_t f = 0; f < k; ++f) {
        const auto& held = result.folds[f];
        std::vector<TrainingRow> train_rows;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!std::binary_search(held.begin(), held.end(), i)) train_rows.push_back(rows[i]);
        }
        PifModel model = PifModel::init(CounterRng::derive(seed, f), label_order);
        train(model, train_rows, hyper);
        result.standardizers.push_back(model.standardizer());

        std::size_t correct = 0;
        for (auto i : held) {
            if (predict(model, rows[i].x).label == rows[i].label) ++correct;
        }
        result.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(held.size()));
    }

    const auto n = static_cast<double>(k);
    result.mean = std::accumulate(result.fold_accuracies.begin(), result.fold_accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : result.fold_accuracies) ss += (a - result.mean) * (a - result.mean);
    result.std = std::sqrt(ss / (n - 1.0));
    return result;
}

std::vector<TrainingRow> load_training_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open training data " + file.string());
    std::vector<TrainingRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line_no == 1 && !cells.empty() && cells[0] == "path_id") continue;
        if (cells.size() != 5) throw ParseError(line_no, "expected path_id,vd,sid,is,label");
        TrainingRow r;
        r.id = cells[0];
        try {
            for (std::size_t f = 0; f < 3; ++f) r.x[f] = std::stod(cells[f + 1]);
        } catch (const std::exception&) {
            throw ParseError(line_no, "feature is not a number");
        }
        r.label = cells[4];
        rows.push_back(std::move(r));
    }
    return rows;
}

double PifWeights::max_weight() const {
    double m = 0.0;
    for (const auto& w : weights) {
        if (w) m = std::max(m, *w);
    }
    return m;
}

const std::vector<PifWeights>& pif_weight_table() {
    constexpr std::optional<double> NA = std::nullopt;
    static const std::vector<PifWeights> table = {
        {"HSI0", "No impact - well designed HSI supporting the task", {1.0, 1.0, 1.0, 1.0, 1.0}},
        {"HSI1", "Indicator is similar to other sources of information nearby", {1.5, NA, NA, NA, NA}},
        {"HSI2", "No sign or indication of technical difference from adjacent sources", {3.0, NA, NA, NA, NA}},
        {"HSI3", "Related information is spatially distributed, not organized, or not accessible at the same time",
         {1.5, 2.0, NA, NA, NA}},
        {"HSI4", "Unintuitive or unconventional indications", {2.0, NA, NA, NA, NA}},
        {"HSI5", "Poor salience of the target out of the crowded background", {3.0, NA, NA, NA, NA}},
        {"HSI6", "Inconsistent formats, units, symbols, or tables", {5.0, NA, NA, NA, NA}},
        {"HSI7", "Inconsistent interpretation of displays", {NA, 5.7, NA, NA, NA}},
        {"HSI8", "Similarity in elements - wrong element selected on a panel", {NA, NA, NA, 1.2, NA}},
        {"HSI9", "Poor functional localization - 2 to 5 displays/panels needed", {NA, NA, NA, 2.0, NA}},
        {"HSI10", "Ergonomic deficits of controls", {NA, NA, NA, 3.38, NA}},
        {"HSI11", "Control labels disagree with document nomenclature", {NA, NA, NA, 5.0, NA}},
        {"HSI12", "Controls do not have labels or indications", {NA, NA, NA, 10.0, NA}},
        {"HSI13", "Controls provide inadequate or ambiguous feedback", {NA, NA, NA, 4.5, NA}},
        {"HSI14", "Confusion in action maneuver states", {NA, NA, NA, 10.0, NA}},
        {"HSI15", "Unclear functional allocation between human and automation", {NA, NA, NA, 9.0, NA}},
    };
    return table;
}

PifWeights pif_weights(std::string_view label) {
    for (const auto& row : pif_weight_table()) {
        if (row.label == label) return row;
    }
    throw InvalidArgument("unknown PIF label " + std::string(label));
}

} // namespace ierisk
