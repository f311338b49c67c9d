#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valgauge/core.hpp"
#include "valgauge/topology.hpp"

namespace valgauge::verifier {

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;
};

/// Value-guided verifier parameters. Hidden MLP layers use tanh; the last
/// layer is linear with a single output.
struct VerifierParams {
    int width = 0;
    std::uint64_t encoder_seed = 0;
    Eigen::MatrixXd value_table;  ///< 10 x d, one row per ValueDimension
    Eigen::MatrixXd attn_q;       ///< d x d
    Eigen::MatrixXd attn_k;
    Eigen::MatrixXd attn_v;
    std::vector<DenseLayer> mlp;

    /// Throws Errc::shape_mismatch or Errc::non_finite.
    void validate() const;
};

/// Named views over every trainable block, in a fixed order. The views alias
/// the parameter storage.
std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXd>>> parameter_groups(VerifierParams& p);

/// MLP widths {2d, d, 1}; every block uniform in +-1/sqrt(fan_in), value table
/// uniform in [-1, 1].
VerifierParams init_params(int width, std::uint64_t seed, std::uint64_t encoder_seed);
/// Same shapes as init_params, all zeros.
VerifierParams zero_params(int width, std::uint64_t encoder_seed = 0);

/// "valgauge-verifier v1" header, scalar fields, then each block as a shape
/// line followed by row-major shortest round-trip decimals.
std::string format_params(const VerifierParams& p);
VerifierParams parse_params(std::string_view text);

/// Hashed bag-of-words: each token maps to a seeded pseudo-random unit vector;
/// the document vector is the L2-normalized sum. Empty text gives zeros.
Eigen::VectorXd encode_text(std::string_view text, int width, std::uint64_t seed);

struct Attention {
    Eigen::VectorXd refined;  ///< E'_v
    Eigen::VectorXd weights;  ///< softmax over the ten values
    ValueActivation activation;
};

/// Value rows scaled by (v+1)/2, projected to keys/values; the context
/// embedding is the query.
Attention cross_attention(const VerifierParams& p, const Eigen::VectorXd& context, const ValueProfile& profile);

struct VerifierScore {
    double score = 0.0;
    ValueActivation activation;
};

VerifierScore score_embedded(const VerifierParams& p, const Eigen::VectorXd& action, const Eigen::VectorXd& context,
                             const ValueProfile& profile);
VerifierScore score(const VerifierParams& p, std::string_view action_text, std::string_view context_text,
                    const ValueProfile& profile);

/// A preference pair with its texts already embedded.
struct EncodedPair {
    Eigen::VectorXd context;
    Eigen::VectorXd chosen;
    Eigen::VectorXd rejected;
    ValueProfile profile;
};

EncodedPair encode_pair(const VerifierParams& p, const PreferencePair& pair);

/// -log sigmoid(margin), computed without overflow.
double pairwise_loss(double margin);

double ranking_loss(const VerifierParams& p, const EncodedPair& pair);
/// Throws Errc::degenerate_pair when chosen and rejected texts are identical.
double ranking_loss(const VerifierParams& p, const PreferencePair& pair);

struct LossGradient {
    double loss = 0.0;
    VerifierParams grad;  ///< same shapes as the parameters
};

/// Mean ranking loss over `batch` and its exact gradient.
LossGradient loss_and_gradient(const VerifierParams& p, std::span<const EncodedPair> batch);

struct TrainHyper {
    double lr = 0.05;
    int epochs = 200;
    std::uint64_t seed = 0;
};

struct TrainResult {
    VerifierParams params;
    /// Mean loss before each update, then the final loss (epochs + 1 entries).
    std::vector<double> loss_trace;
};

/// Full-batch gradient descent. Throws Errc::non_finite_loss on divergence.
TrainResult train(VerifierParams init, std::span<const EncodedPair> dataset, const TrainHyper& hyper);

/// Fraction of pairs whose chosen action scores strictly higher.
double pair_accuracy(const VerifierParams& p, std::span<const EncodedPair> pairs);

/// Pairs ranked by a hidden unit direction in action space, with a minimum
/// projected gap of 0.1. Train and held-out pairs share the direction.
struct PlantedPairs {
    Eigen::VectorXd direction;
    std::vector<EncodedPair> train;
    std::vector<EncodedPair> held_out;
};

PlantedPairs planted_separable_pairs(int width, std::size_t train, std::size_t held_out, std::uint64_t seed);

topology::EmbeddingSet export_value_embeddings(const VerifierParams& p);

}  // namespace valgauge::verifier
