#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valgauge/core.hpp"

namespace valgauge::topology {

/// N labelled embedding rows (N >= 3, D >= 2, distinct labels, finite values).
class EmbeddingSet {
  public:
    EmbeddingSet(std::vector<ValueDimension> labels, Eigen::MatrixXd vectors);

    [[nodiscard]] const std::vector<ValueDimension>& labels() const noexcept { return m_labels; }
    [[nodiscard]] const Eigen::MatrixXd& vectors() const noexcept { return m_vectors; }
    [[nodiscard]] std::size_t size() const noexcept { return m_labels.size(); }
    [[nodiscard]] Eigen::Index width() const noexcept { return m_vectors.cols(); }

  private:
    std::vector<ValueDimension> m_labels;
    Eigen::MatrixXd m_vectors;
};

/// Text format shared with the verifier export: a "valgauge-embeddings v1"
/// line, "shape N D", then N lines of label and D values, tab separated.
/// Values use shortest round-trip decimals so a save/load cycle is bit-exact.
std::string format_embeddings(const EmbeddingSet& e);
EmbeddingSet parse_embeddings(std::string_view text);

struct Projection {
    Eigen::MatrixX2d coords;  ///< one row per embedding, mean-centred
    Eigen::Vector2d explained_variance;  ///< top-2 covariance eigenvalues, descending
    double total_variance = 0.0;  ///< trace of the covariance
};

/// Projection onto the top-2 principal axes of the population covariance.
/// Each axis is oriented so its largest-magnitude coordinate is positive.
Projection pca2d(const EmbeddingSet& e);

class CircularSequence {
  public:
    explicit CircularSequence(std::vector<ValueDimension> order);

    [[nodiscard]] const std::vector<ValueDimension>& order() const noexcept { return m_order; }
    [[nodiscard]] std::size_t size() const noexcept { return m_order.size(); }
    [[nodiscard]] CircularSequence rotated(std::size_t k) const;
    [[nodiscard]] CircularSequence reversed() const;

    friend bool operator==(const CircularSequence&, const CircularSequence&) = default;

  private:
    std::vector<ValueDimension> m_order;
};

/// The canonical circumplex order restricted to `labels` (counter-clockwise convention).
CircularSequence ground_truth_sequence(std::span<const ValueDimension> labels);

/// atan2 angle of every point about the centroid, in [-pi, pi).
std::vector<double> centroid_angles(const Eigen::MatrixX2d& points);

/// Labels sorted by ascending centroid angle, ties by canonical order.
CircularSequence angular_order(std::span<const ValueDimension> labels, const Eigen::MatrixX2d& points);

/// Inversions of `ranks` relative to ascending order, by merge counting.
std::size_t count_inversions(std::span<const std::size_t> ranks);

/// Minimum Kendall-tau distance to `gt` over all cyclic rotations of `obs`.
std::size_t circular_inversion_distance(const CircularSequence& obs, const CircularSequence& gt);

double cis(const CircularSequence& obs, const CircularSequence& gt);

const std::set<ValueDimension>& default_exclusions();

EmbeddingSet filter_dimensions(const EmbeddingSet& e, const std::set<ValueDimension>& excluded);

struct TopologyReport {
    CircularSequence observed;
    CircularSequence ground_truth;
    Projection projection;
    std::vector<double> angles;  ///< per input row
    std::size_t d_circ = 0;
    double cis = 0.0;
    /// CIS of the reversed observed order; only set when requested.
    std::optional<double> reversed_cis;
};

TopologyReport analyze(const EmbeddingSet& e, bool reflection_diagnostic = false);

/// Tab-separated label, x, y, angle, rank (1-based position in the observed order).
std::string coordinates_tsv(const EmbeddingSet& e, const TopologyReport& report);

}  // namespace valgauge::topology
