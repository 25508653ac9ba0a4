#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ierisk/metrics.hpp"
#include "ierisk/rng.hpp"

namespace ierisk {

// (VD, SID, IS)
using FeatureRow = std::array<double, 3>;

FeatureRow features_of(const MetricVector& m) noexcept;

struct Standardizer {
    FeatureRow mean{0.0, 0.0, 0.0};
    FeatureRow scale{1.0, 1.0, 1.0};  // population std; 1 where a feature is constant
    bool fitted = false;

    static Standardizer fit(std::span<const FeatureRow> rows);
    FeatureRow apply(const FeatureRow& x) const noexcept;

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct TrainingRow {
    std::string id;
    FeatureRow x{};
    std::string label;
};

struct TrainHyper {
    int epochs = 200;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double dropout = 0.3;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
};


enum class ForwardMode {
    train,                // batch statistics, dropout on
    train_deterministic,  // batch statistics, dropout off
    inference,            // running statistics, dropout off
};

// Orders labels by alphabetic prefix, then numeric suffix (HSI2 < HSI10).
bool label_less(std::string_view a, std::string_view b);
std::vector<std::string> sorted_labels(std::span<const TrainingRow> rows);

struct Prediction {
    std::string label;
    std::vector<double> probabilities;  // in label_order
};

// 3 -> 128 -> 64 -> 32 -> K fully connected network; each hidden layer is
// followed by batch normalization, ReLU and dropout.
class PifModel {
public:
    static constexpr std::size_t kInputs = 3;
    static constexpr std::array<std::size_t, 3> kHidden{128, 64, 32};

    static PifModel init(std::uint64_t seed, std::vector<std::string> label_order);

    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::size_t num_classes() const noexcept { return labels_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }
    bool trained() const noexcept { return standardizer_.fitted; }
    const Standardizer& standardizer() const noexcept { return standardizer_; }
    void set_standardizer(const Standardizer& s) { standardizer_ = s; }

    // Layer widths including input and output: {3, 128, 64, 32, K}.
    std::vector<std::size_t> layer_widths() const;

    // Trainable parameters flattened as: per hidden layer W (row-major), b,
    // gamma, beta; then the output W, b.
    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    // Mean softmax cross-entropy over the batch. `x` holds already
    // standardized inputs, one row per sample. Fills `gradient` (same layout
    // as parameters()) when non-null. In train modes the running statistics
    // are updated only when update_running_stats is set.
    double loss(const Eigen::MatrixXd& x, std::span<const int> targets, ForwardMode mode,
                std::vector<double>* gradient = nullptr, CounterRng* dropout_rng = nullptr,
                bool update_running_stats = false);

    Eigen::MatrixXd logits(const Eigen::MatrixXd& x, ForwardMode mode) const;

    const TrainHyper& hyper() const noexcept { return hyper_; }
    void set_hyper(const TrainHyper& h) { hyper_ = h; }

    void save(const std::filesystem::path& file) const;
    static PifModel load(const std::filesystem::path& file);

    friend bool operator==(const PifModel& a, const PifModel& b);

private:
    struct Dense {
        Eigen::MatrixXd w;  // out x in
        Eigen::VectorXd b;
    };
    struct BatchNorm {
        Eigen::VectorXd gamma;
        Eigen::VectorXd beta;
        Eigen::VectorXd running_mean;
        Eigen::VectorXd running_var;
    };

    std::vector<std::string> labels_;
    std::uint64_t seed_ = 0;
    std::array<Dense, 4> dense_;
    std::array<BatchNorm, 3> bn_;
    Standardizer standardizer_;
    TrainHyper hyper_;
};

struct TrainResult {
    std::vector<double> loss_trace;  // one entry per epoch, before the update
    double training_accuracy = 0.0;
};

// Fits the standardizer on `rows`, then runs full-batch Adam on softmax
// cross-entropy for hyper.epochs epochs.
TrainResult train(PifModel& model, std::span<const TrainingRow> rows, const TrainHyper& hyper = {});

Prediction predict(const PifModel& model, const FeatureRow& x);

struct CvResult {
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double std = 0.0;  // sample (n-1)
    std::vector<std::vector<std::size_t>> folds;  // held-out row indices
    std::vector<Standardizer> standardizers;       // fitted on each training split
};

// Seeded shuffle within each label, dealt round-robin across k folds.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::string> labels, std::size_t k,
                                                       std::uint64_t seed);

CvResult kfold_cv(std::span<const TrainingRow> rows, std::size_t k = 5, std::uint64_t seed = 0,
                  const TrainHyper& hyper = {});

// Training data CSV `path_id,vd,sid,is,label`. Header optional.
std::vector<TrainingRow> load_training_csv(const std::filesystem::path& file);

enum class MacroCognitive { D, U, DM, E, T };

struct PifWeights {
    std::string label;
    std::string attribute;
    // Index by MacroCognitive; nullopt means not applicable.
    std::array<std::optional<double>, 5> weights;

    std::optional<double> weight(MacroCognitive f) const { return weights[static_cast<std::size_t>(f)]; }
    double max_weight() const;
};

PifWeights pif_weights(std::string_view label);
const std::vector<PifWeights>& pif_weight_table();

} // namespace ierisk
