#include "valgauge/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "valgauge/format.hpp"

namespace valgauge::topology {

EmbeddingSet::EmbeddingSet(std::vector<ValueDimension> labels, Eigen::MatrixXd vectors)
    : m_labels(std::move(labels)), m_vectors(std::move(vectors))
{
    if (static_cast<Eigen::Index>(m_labels.size()) != m_vectors.rows())
        fail(Errc::shape_mismatch, "embedding set: label count differs from row count");
    if (m_labels.size() < 3)
        fail(Errc::too_few_remaining, "embedding set needs at least 3 labels");
    if (m_vectors.cols() < 2)
        fail(Errc::shape_mismatch, "embedding set needs width >= 2");
    if (!m_vectors.allFinite())
        fail(Errc::non_finite, "embedding set contains non-finite values");
    std::vector<ValueDimension> sorted = m_labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        fail(Errc::label_mismatch, "embedding set labels must be distinct");
}

std::string format_embeddings(const EmbeddingSet& e)
{
    std::string out = "valgauge-embeddings v1\n";
    out += "shape " + std::to_string(e.size()) + " " + std::to_string(e.width()) + "\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        out += dimension_name(e.labels()[i]);
        for (Eigen::Index c = 0; c < e.width(); ++c) {
            out += '\t';
            out += format_double(e.vectors()(static_cast<Eigen::Index>(i), c));
        }
        out += '\n';
    }
    return out;
}

EmbeddingSet parse_embeddings(std::string_view text)
{
    std::vector<std::string_view> lines;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        lines.push_back(line);
    }
    if (lines.empty() || lines[0] != "valgauge-embeddings v1")
        throw Error(Errc::parse_error, "missing 'valgauge-embeddings v1' header").at_line(1);
    if (lines.size() < 2 || !lines[1].starts_with("shape "))
        throw Error(Errc::parse_error, "missing shape line").at_line(2);
    std::size_t rows = 0;
    std::size_t cols = 0;
    {
        const auto rest = lines[1].substr(6);
        const auto sp = rest.find(' ');
        const auto r = parse_double(rest.substr(0, sp));
        const auto c = sp == std::string_view::npos ? std::nullopt : parse_double(rest.substr(sp + 1));
        if (!r || !c || *r < 0 || *c < 0)
            throw Error(Errc::parse_error, "bad shape line").at_line(2);
        rows = static_cast<std::size_t>(*r);
        cols = static_cast<std::size_t>(*c);
    }
    std::vector<ValueDimension> labels;
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t row = 0;
    for (std::size_t li = 2; li < lines.size(); ++li) {
        auto line = lines[li];
        if (line.empty())
            continue;
        if (row == rows)
            throw Error(Errc::parse_error, "more rows than declared").at_line(li + 1);
        std::vector<std::string_view> fields;
        while (true) {
            const auto tab = line.find('\t');
            fields.push_back(line.substr(0, tab));
            if (tab == std::string_view::npos)
                break;
            line = line.substr(tab + 1);
        }
        if (fields.size() != cols + 1)
            throw Error(Errc::parse_error, "expected label and " + std::to_string(cols) + " values").at_line(li + 1);
        const auto label = parse_dimension(fields[0]);
        if (!label)
            throw Error(Errc::parse_error, "unknown value label '" + std::string(fields[0]) + "'").at_line(li + 1);
        labels.push_back(*label);
        for (std::size_t c = 0; c < cols; ++c) {
            const auto v = parse_double(fields[c + 1]);
            if (!v)
                throw Error(Errc::parse_error, "bad number").at_line(li + 1);
            vectors(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = *v;
        }
        ++row;
    }
    if (row != rows)
        fail(Errc::parse_error, "fewer rows than declared");
    return EmbeddingSet(std::move(labels), std::move(vectors));
}

Projection pca2d(const EmbeddingSet& e)
{
    const Eigen::MatrixXd& x = e.vectors();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
    Projection p;
    p.total_variance = cov.trace();
    if (!(p.total_variance > 0.0))
        fail(Errc::degenerate_data, "pca: embeddings have zero total variance");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        fail(Errc::degenerate_data, "pca: eigen-decomposition failed");
    const Eigen::Index d = cov.rows();
    // Eigenvalues come back ascending.
    Eigen::MatrixX2d axes(d, 2);
    axes.col(0) = solver.eigenvectors().col(d - 1);
    axes.col(1) = solver.eigenvectors().col(d - 2);
    p.explained_variance << std::max(0.0, solver.eigenvalues()(d - 1)), std::max(0.0, solver.eigenvalues()(d - 2));
    p.coords = centered * axes;
    for (Eigen::Index c = 0; c < 2; ++c) {
        Eigen::Index arg = 0;
        p.coords.col(c).cwiseAbs().maxCoeff(&arg);
        if (p.coords(arg, c) < 0.0)
            p.coords.col(c) *= -1.0;
    }
    return p;
}

CircularSequence::CircularSequence(std::vector<ValueDimension> order) : m_order(std::move(order))
{
    std::vector<ValueDimension> sorted = m_order;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        fail(Errc::label_mismatch, "circular sequence repeats a label");
}

CircularSequence CircularSequence::rotated(std::size_t k) const
{
    std::vector<ValueDimension> out(m_order.size());
    if (m_order.empty())
        return CircularSequence(out);
    k %= m_order.size();
    std::rotate_copy(m_order.begin(), m_order.begin() + static_cast<std::ptrdiff_t>(k), m_order.end(), out.begin());
    return CircularSequence(std::move(out));
}

CircularSequence CircularSequence::reversed() const
{
    return CircularSequence(std::vector<ValueDimension>(m_order.rbegin(), m_order.rend()));
}

CircularSequence ground_truth_sequence(std::span<const ValueDimension> labels)
{
    std::vector<ValueDimension> order(labels.begin(), labels.end());
    std::sort(order.begin(), order.end());
    return CircularSequence(std::move(order));
}

std::vector<double> centroid_angles(const Eigen::MatrixX2d& points)
{
    const Eigen::RowVector2d centroid = points.colwise().mean();
    std::vector<double> angles;
    angles.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double dx = points(i, 0) - centroid(0);
        const double dy = points(i, 1) - centroid(1);
        if (std::hypot(dx, dy) <= 1e-12)
            throw Error(Errc::centroid_coincidence, "point coincides with the centroid")
                .at_index(static_cast<std::size_t>(i));
        double a = std::atan2(dy, dx);
        if (a >= std::numbers::pi)
            a -= 2.0 * std::numbers::pi;
        angles.push_back(a);
    }
    return angles;
}

CircularSequence angular_order(std::span<const ValueDimension> labels, const Eigen::MatrixX2d& points)
{
    if (static_cast<Eigen::Index>(labels.size()) != points.rows())
        fail(Errc::shape_mismatch, "angular_order: label count differs from point count");
    const auto angles = centroid_angles(points);
    std::vector<std::size_t> idx(labels.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (angles[a] != angles[b])
            return angles[a] < angles[b];
        return labels[a] < labels[b];
    });
    std::vector<ValueDimension> order;
    order.reserve(idx.size());
    for (auto i : idx)
        order.push_back(labels[i]);
    return CircularSequence(std::move(order));
}

namespace {

std::size_t merge_count(std::vector<std::size_t>& a, std::vector<std::size_t>& scratch, std::size_t lo, std::size_t hi)
{
    if (hi - lo < 2)
        return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::size_t inv = merge_count(a, scratch, lo, mid) + merge_count(a, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            inv += mid - i;
            scratch[k++] = a[j++];
        } else {
            scratch[k++] = a[i++];
        }
    }
    while (i < mid)
        scratch[k++] = a[i++];
    while (j < hi)
        scratch[k++] = a[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace

std::size_t count_inversions(std::span<const std::size_t> ranks)
{
    std::vector<std::size_t> a(ranks.begin(), ranks.end());
    std::vector<std::size_t> scratch(a.size());
    return merge_count(a, scratch, 0, a.size());
}

std::size_t circular_inversion_distance(const CircularSequence& obs, const CircularSequence& gt)
{
    const std::size_t n = obs.size();
    if (n != gt.size())
        fail(Errc::label_mismatch, "sequences have different lengths");
    if (n < 3)
        fail(Errc::invalid_argument, "circular inversion distance needs N >= 3");
    std::vector<std::size_t> gt_pos(kValueCount, n);
    for (std::size_t i = 0; i < n; ++i)
        gt_pos[index_of(gt.order()[i])] = i;
    std::vector<std::size_t> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = gt_pos[index_of(obs.order()[i])];
        if (p == n)
            fail(Errc::label_mismatch, "label '" + std::string(dimension_name(obs.order()[i])) +
                                           "' is not in the ground-truth sequence");
        ranks[i] = p;
    }
    std::size_t best = n * (n - 1) / 2;
    std::vector<std::size_t> rotated(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i)
            rotated[i] = ranks[(i + k) % n];
        best = std::min(best, count_inversions(rotated));
    }
    return best;
}

double cis(const CircularSequence& obs, const CircularSequence& gt)
{
    const auto d = circular_inversion_distance(obs, gt);
    const auto n = static_cast<double>(obs.size());
    return 1.0 - static_cast<double>(d) / (n * (n - 1.0) / 2.0);
}

const std::set<ValueDimension>& default_exclusions()
{
    static const std::set<ValueDimension> preset = {ValueDimension::power, ValueDimension::security};
    return preset;
}

EmbeddingSet filter_dimensions(const EmbeddingSet& e, const std::set<ValueDimension>& excluded)
{
    std::vector<ValueDimension> labels;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!excluded.contains(e.labels()[i])) {
            labels.push_back(e.labels()[i]);
            keep.push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (labels.size() < 3)
        fail(Errc::too_few_remaining, "only " + std::to_string(labels.size()) + " dimensions remain after exclusion");
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(keep.size()), e.width());
    for (std::size_t r = 0; r < keep.size(); ++r)
        vectors.row(static_cast<Eigen::Index>(r)) = e.vectors().row(keep[r]);
    return EmbeddingSet(std::move(labels), std::move(vectors));
}

TopologyReport analyze(const EmbeddingSet& e, bool reflection_diagnostic)
{
    auto projection = pca2d(e);
    auto angles = centroid_angles(projection.coords);
    auto observed = angular_order(e.labels(), projection.coords);
    auto gt = ground_truth_sequence(e.labels());
    TopologyReport r{observed, gt, std::move(projection), std::move(angles), 0, 0.0, std::nullopt};
    r.d_circ = circular_inversion_distance(observed, gt);
    r.cis = cis(observed, gt);
    if (reflection_diagnostic)
        r.reversed_cis = cis(observed.reversed(), gt);
    return r;
}

std::string coordinates_tsv(const EmbeddingSet& e, const TopologyReport& report)
{
    std::string out = "label\tx\ty\tangle\trank\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        const auto label = e.labels()[i];
        const auto& order = report.observed.order();
        const auto rank = static_cast<std::size_t>(std::find(order.begin(), order.end(), label) - order.begin()) + 1;
        const auto row = static_cast<Eigen::Index>(i);
        out += std::string(dimension_name(label)) + "\t" + format_fixed(report.projection.coords(row, 0), 9) + "\t" +
               format_fixed(report.projection.coords(row, 1), 9) + "\t" + format_fixed(report.angles[i], 9) + "\t" +
               std::to_string(rank) + "\n";
    }
    return out;
}

}  // namespace valgauge::topology
